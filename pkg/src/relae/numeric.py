"""Dense float64 matrix arithmetic and seeded random number generation.

Conventions used by the whole package, stated once here:

* Matrices are 2-D numpy arrays of float64, row-major, with samples as
  rows: a data batch is n x m (n samples, m features).  A layer's affine
  map with weight W (out x in) is therefore realized as ``x @ W.T + b``.
* Public operations validate shapes and reject non-finite results.
* Rng streams are counter-based (Philox) so that the same seed yields a
  bit-identical draw sequence, and independent substreams can be derived
  from integer paths without consuming the parent stream.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NonFiniteError",
    "Rng",
    "as_matrix",
    "require_finite",
    "matmul",
    "transpose",
    "sigmoid",
]

_MASK64 = (1 << 64) - 1


class NonFiniteError(ValueError):
    """A public operation produced or received NaN/Inf entries."""


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return require_finite(a, name)


def require_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.isfinite(a).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product a @ b with explicit dimension checking."""
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul requires 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape} by {b.shape}"
        )
    return require_finite(a @ b, "matmul result")


def transpose(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.T)


def sigmoid(a: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, stable for large |x|.

    Branches on sign so neither exp overflows; outputs are in (0, 1)
    up to float64 rounding (saturates to 0.0/1.0 beyond |x| ~ 37).
    """
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


class Rng:
    """Seeded random source with derivable independent substreams.

    Identical (seed, path) gives a bit-identical draw sequence.  A
    substream derived via :meth:`derive` does not consume from or affect
    its parent, so parallel consumers stay reproducible.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self._path = tuple(int(p) & _MASK64 for p in _path)
        ss = np.random.SeedSequence((self.seed, *self._path))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def derive(self, *path: int) -> "Rng":
        """Independent substream addressed by an integer path."""
        return Rng(self.seed, self._path + tuple(path))

    def child_seed(self, *path: int) -> int:
        """A 64-bit seed deterministically derived from (seed, path)."""
        ss = np.random.SeedSequence(
            (self.seed, *self._path, *(int(p) & _MASK64 for p in path))
        )
        return int(ss.generate_state(1, np.uint64)[0])

    def uniform(self, lo: float, hi: float, rows: int, cols: int) -> np.ndarray:
        """rows x cols matrix of i.i.d. draws from U[lo, hi)."""
        if not lo < hi:
            raise ValueError(f"invalid uniform interval [{lo}, {hi})")
        return self._gen.uniform(lo, hi, size=(rows, cols))

    def gaussian(self, mean: float, stddev: float, rows: int, cols: int) -> np.ndarray:
        """rows x cols matrix of i.i.d. normal draws; stddev=0 is constant."""
        if stddev < 0:
            raise ValueError(f"negative stddev {stddev}")
        return self._gen.normal(mean, stddev, size=(rows, cols))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
