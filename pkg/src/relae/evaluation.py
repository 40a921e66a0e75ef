"""Model evaluation: reconstruction MSE, softmax classification, k-fold
cross-validation, and the alpha sweep.

The sweep trains one model per alpha in {0, 0.02, ..., 1.0} from the same
initialization and configuration, plus plain and similarity-weighted
baselines as horizontal references.  Reported reconstruction loss is the
mean squared error per sample per feature; classification error is the
misclassified fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corruption import CorruptionSpec, fit_corruption
from .data import Dataset, kfold_splits
from .model import Network, encode, forward, init_network
from .numeric import Rng
from .objectives import (
    DENOISING_KINDS,
    RELATIONAL_KINDS,
    VARIATIONAL_KINDS,
    ObjectiveSpec,
)
from .trainer import (
    TAG_FOLD,
    TAG_INIT,
    TAG_SOFTMAX,
    TAG_SPLIT,
    TrainConfig,
    train,
    train_layerwise,
)

SWEEP_STEP = 0.02
TAG_SHUFFLE_SOFTMAX = 61


@dataclass
class SweepResult:
    alphas: list[float]
    mses: list[float]
    baselines: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.alphas) != len(self.mses):
            raise ValueError("alpha and mse lists must have equal length")
        if any(b >= a for a, b in zip(self.alphas[1:], self.alphas)):
            raise ValueError("alphas must be strictly increasing")


@dataclass
class EvalReport:
    model: str
    recon_mse: float
    error_rate: float
    fold_mse: list[float] = field(default_factory=list)
    fold_error: list[float] = field(default_factory=list)
    mse_std: float = 0.0
    error_std: float = 0.0


@dataclass
class SoftmaxConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 128
    seed: int = 0


@dataclass
class SoftmaxClassifier:
    weights: np.ndarray  # n_classes x n_features
    bias: np.ndarray  # n_classes
    classes: np.ndarray  # sorted class ids


def reconstruction_mse(net: Network, data: np.ndarray) -> float:
    """Mean over samples and features of the squared reconstruction error."""
    trace = forward(net, data)
    d = data - trace.output
    return float(np.mean(d * d))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_softmax(
    features: np.ndarray, labels: np.ndarray, cfg: SoftmaxConfig | None = None
) -> SoftmaxClassifier:
    """Multinomial logistic regression by minibatch SGD from zero init."""
    cfg = cfg or SoftmaxConfig()
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("softmax training needs at least two classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[l] for l in labels])
    n, d = features.shape
    k = len(classes)
    w = np.zeros((k, d))
    b = np.zeros(k)
    onehot = np.eye(k)[y]
    rng = Rng(cfg.seed)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.derive(TAG_SHUFFLE_SOFTMAX, epoch).permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            fb, yb = features[idx], onehot[idx]
            probs = _softmax(fb @ w.T + b)
            diff = (probs - yb) / len(idx)
            w -= cfg.learning_rate * (diff.T @ fb)
            b -= cfg.learning_rate * diff.sum(axis=0)
    return SoftmaxClassifier(w, b, classes)


def predict(clf: SoftmaxClassifier, features: np.ndarray) -> np.ndarray:
    """Predicted class ids; argmax ties resolve to the lowest class id."""
    scores = features @ clf.weights.T + clf.bias
    return clf.classes[np.argmax(scores, axis=1)]


def classify_error(clf: SoftmaxClassifier, features: np.ndarray, labels) -> float:
    labels = np.asarray(labels)
    if features.shape[0] != len(labels):
        raise ValueError(
            f"{features.shape[0]} samples but {len(labels)} labels"
        )
    return float(np.mean(predict(clf, features) != labels))


def fit_autoencoder(
    sizes: list[int],
    train_x: np.ndarray,
    objective: ObjectiveSpec,
    cfg: TrainConfig,
    activation: str | list[str] = "sigmoid",
) -> Network:
    """Initialize and train one network, honoring the layerwise flag.

    Corruption for denoising kinds is fitted on ``train_x`` so held-out
    data never leaks into the noise statistics.
    """
    corruption = None
    if objective.kind in DENOISING_KINDS:
        corruption = fit_corruption(
            CorruptionSpec(delta_scale=objective.noise_scale), train_x
        )
    if cfg.layerwise:
        return train_layerwise(sizes, train_x, objective, cfg, activation)
    variational = objective.kind in VARIATIONAL_KINDS
    net = init_network(sizes, Rng(cfg.seed).derive(TAG_INIT), activation, variational)
    train(net, train_x, objective, cfg, corruption=corruption)
    return net


def cross_validate(
    ds: Dataset,
    sizes: list[int],
    objective: ObjectiveSpec,
    cfg: TrainConfig,
    k: int = 10,
    softmax_cfg: SoftmaxConfig | None = None,
    activation: str | list[str] = "sigmoid",
) -> EvalReport:
    """Per fold: train the autoencoder, encode both splits, classify.

    Reconstruction MSE is measured on the held-out fold; the softmax
    classifier trains on encoded training features with its own fixed
    hyperparameters so all autoencoder variants compete on equal terms.
    """
    root = Rng(cfg.seed)
    splits = kfold_splits(len(ds), k, root.child_seed(TAG_SPLIT))
    fold_mse, fold_err = [], []
    for f, (tr_idx, te_idx) in enumerate(splits):
        x_tr, x_te = ds.features[tr_idx], ds.features[te_idx]
        y_tr, y_te = ds.labels[tr_idx], ds.labels[te_idx]
        fold_cfg = replace(cfg, seed=root.child_seed(TAG_FOLD, f))
        net = fit_autoencoder(sizes, x_tr, objective, fold_cfg, activation)
        fold_mse.append(reconstruction_mse(net, x_te))
        sm_cfg = softmax_cfg or SoftmaxConfig(seed=root.child_seed(TAG_SOFTMAX, f))
        clf = train_softmax(encode(net, x_tr), y_tr, sm_cfg)
        fold_err.append(classify_error(clf, encode(net, x_te), y_te))
    return EvalReport(
        model=objective.kind,
        recon_mse=float(np.mean(fold_mse)),
        error_rate=float(np.mean(fold_err)),
        fold_mse=fold_mse,
        fold_error=fold_err,
        mse_std=float(np.std(fold_mse)),
        error_std=float(np.std(fold_err)),
    )


def sweep_alphas(step: float = SWEEP_STEP) -> list[float]:
    count = round(1.0 / step)
    return [round(i * step, 10) for i in range(count + 1)]


def _holdout_split(ds: Dataset, seed: int, split: str):
    if split == "train":
        return ds.features, ds.features
    tr_idx, te_idx = kfold_splits(len(ds), 10, seed)[0]
    return ds.features[tr_idx], ds.features[te_idx]


def alpha_sweep(
    ds: Dataset,
    kind: str,
    sizes: list[int],
    base: ObjectiveSpec,
    cfg: TrainConfig,
    split: str = "test",
    activation: str | list[str] = "sigmoid",
    progress=None,
) -> SweepResult:
    """Final reconstruction MSE per alpha, plus BAE and GAE references.

    Every point trains from the same initialization and configuration
    (identical seed), so the curve shape reflects the objective alone.
    ``split`` selects whether the reported MSE is held-out ("test", one
    stratification-free 90/10 split) or on the training data itself.
    """
    if kind not in RELATIONAL_KINDS:
        raise ValueError(f"{kind} has no alpha parameter to sweep")
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    x_tr, x_eval = _holdout_split(ds, Rng(cfg.seed).child_seed(TAG_SPLIT), split)

    def run_point(spec: ObjectiveSpec) -> float:
        net = fit_autoencoder(sizes, x_tr, spec, cfg, activation)
        return reconstruction_mse(net, x_eval)

    alphas = sweep_alphas()
    mses = []
    for i, a in enumerate(alphas):
        mses.append(run_point(replace(base, kind=kind, alpha=a)))
        if progress is not None:
            progress(f"alpha={a:.2f}", i + 1, len(alphas) + 2)
    baselines = {}
    for j, bkind in enumerate(("BAE", "GAE")):
        baselines[bkind] = run_point(replace(base, kind=bkind))
        if progress is not None:
            progress(bkind, len(alphas) + j + 1, len(alphas) + 2)
    return SweepResult(alphas, mses, baselines)


# --- CSV serialization ----------------------------------------------------------


def write_sweep_csv(result: SweepResult, path) -> None:
    """51 numeric rows then one row per named baseline, header `alpha,mse`."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("alpha,mse\n")
        for a, m in zip(result.alphas, result.mses):
            f.write(f"{a:.2f},{m!r}\n")
        for name in sorted(result.baselines):
            f.write(f"{name},{result.baselines[name]!r}\n")


def read_sweep_csv(path) -> SweepResult:
    alphas, mses, baselines = [], [], {}
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != "alpha,mse":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in f:
            key, val = line.strip().split(",")
            try:
                alphas.append(float(key))
                mses.append(float(val))
            except ValueError:
                baselines[key] = float(val)
    return SweepResult(alphas, mses, baselines)


def write_eval_csv(reports: list[EvalReport], path) -> None:
    """One row per model and fold, header `model,fold,mse,error`."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("model,fold,mse,error\n")
        for rep in reports:
            for i, (m, e) in enumerate(zip(rep.fold_mse, rep.fold_error)):
                f.write(f"{rep.model},{i},{m!r},{e!r}\n")
