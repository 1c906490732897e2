"""Dense array helpers, SPD linear algebra, and seeded randomness.

Thin layer over numpy/scipy. Model data is float32; reductions and the
Cholesky factorization run in float64 before casting back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .errors import NotPositiveDefiniteError, NumericError

DTYPE = np.float32


def assert_finite(a, what: str = "array"):
    """Raise NumericError if `a` contains NaN or Inf."""
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite values in {what}")


class SeededRng:
    """Deterministic random source: identical seeds give identical streams.

    Wraps numpy's PCG64 (a 64-bit counter-based generator with published
    constants), so sequences are reproducible across runs and platforms.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, p=None):
        return int(self._gen.choice(n, p=p))

    def spawn(self) -> "SeededRng":
        """Derive an independent child generator (order-dependent but seeded)."""
        return SeededRng(int(self._gen.integers(0, 2**63 - 1)))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return np.matmul(a, b)


@dataclass
class SpdFactor:
    """Cholesky factor L of a symmetric positive-definite matrix (M = L L^T)."""

    dim: int
    lower: np.ndarray  # (dim, dim) float64, lower-triangular

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def cholesky(m: np.ndarray) -> SpdFactor:
    """Factor a symmetric matrix; raises NotPositiveDefiniteError on failure."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-5, atol=1e-8):
        raise ValueError("cholesky input is not symmetric")
    try:
        lower = np.linalg.cholesky((m + m.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return SpdFactor(dim=m.shape[0], lower=lower)


def solve_spd(f: SpdFactor, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b by forward then back substitution."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != f.dim:
        raise ValueError(f"solve_spd dimension mismatch: {b.shape[0]} vs {f.dim}")
    y = solve_triangular(f.lower, b, lower=True)
    return solve_triangular(f.lower.T, y, lower=False)


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max-subtracted) along `axis`."""
    v = np.asarray(v)
    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def sigmoid(x):
    return expit(np.asarray(x))


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(np.asarray(x), 0)


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
_BINARY = {"add": np.add, "mul": np.multiply, "sub": np.subtract}


def elementwise(kind: str, a, b=None):
    """Pointwise op dispatch; binary kinds require equal operand shapes."""
    if kind in _UNARY:
        if b is not None:
            raise ValueError(f"{kind} is unary")
        return _UNARY[kind](a)
    if kind in _BINARY:
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape != b.shape:
            raise ValueError(f"{kind} shape mismatch: {a.shape} vs {b.shape}")
        return _BINARY[kind](a, b)
    raise ValueError(f"unknown elementwise kind: {kind}")
