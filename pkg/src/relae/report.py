"""Figure rendering for the CLI report paths.

Every artifact-producing command writes delimited output first; these
helpers render a matplotlib figure next to each CSV.  The evaluation
module itself stays plot-free.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import EvalReport, SweepResult  # noqa: E402

_BASELINE_STYLE = {"BAE": ("tab:gray", "--"), "GAE": ("tab:green", ":")}


def plot_sweep(result: SweepResult, path, title: str = "") -> None:
    """Reconstruction MSE against alpha with baseline reference lines."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(result.alphas, result.mses, marker="o", markersize=2.5,
            lw=1.2, color="tab:blue", label="relational")
    for name, mse in sorted(result.baselines.items()):
        color, ls = _BASELINE_STYLE.get(name, ("tab:red", "-."))
        ax.axhline(mse, color=color, ls=ls, lw=1.2, label=name)
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel("reconstruction MSE")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_model_bars(reports: list[EvalReport], path, title: str = "") -> None:
    """Side-by-side reconstruction loss and error-rate bars per model."""
    names = [r.model for r in reports]
    x = range(len(names))
    fig, (ax_l, ax_r) = plt.subplots(1, 2, figsize=(10.5, 4.2))
    ax_l.bar(x, [r.recon_mse for r in reports],
             yerr=[r.mse_std for r in reports], capsize=3, alpha=0.8)
    ax_l.set_xticks(list(x))
    ax_l.set_xticklabels(names, rotation=45, ha="right")
    ax_l.set_ylabel("reconstruction MSE")
    ax_l.grid(alpha=0.3, axis="y")
    ax_r.bar(x, [100 * r.error_rate for r in reports],
             yerr=[100 * r.error_std for r in reports],
             capsize=3, alpha=0.8, color="tab:orange")
    ax_r.set_xticks(list(x))
    ax_r.set_xticklabels(names, rotation=45, ha="right")
    ax_r.set_ylabel("classification error (%)")
    ax_r.grid(alpha=0.3, axis="y")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_epoch_losses(epochs: list[int], totals: list[float], path,
                      components: dict[str, list[float]] | None = None,
                      title: str = "") -> None:
    """Training curve: total objective per epoch, optional components."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(epochs, totals, lw=1.4, label="total")
    for name, vals in (components or {}).items():
        if any(v != 0.0 for v in vals):
            ax.plot(epochs, vals, lw=1.0, alpha=0.8, label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("objective (sum over training set)")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
