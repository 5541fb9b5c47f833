"""Complex linear algebra, Gaussian sampling, and the arithmetic-operation counter.

Counting convention used throughout the package:

* one complex (or scalar) multiply      -> 1 mult
* one complex add/subtract              -> 1 add
* a squared magnitude ``|w|**2``        -> 1 mult + 1 add
* division by a real scalar             -> 1 mult
* accumulating a real-valued metric     -> 1 add

Conjugation, comparisons, and sorting are free.  Detector comparisons are
only ever made between counters driven by the same convention, so paired
ratios are meaningful even though the absolute numbers depend on it.
"""

from dataclasses import dataclass

import numpy as np


class RankDeficient(Exception):
    """Channel matrix is numerically rank deficient; caller should resample."""


class OpCounter:
    """Mutable multiply/add tally.  One counter per detection call."""

    __slots__ = ("mults", "adds")

    def __init__(self, mults: int = 0, adds: int = 0):
        self.mults = mults
        self.adds = adds

    def add(self, mults: int, adds: int) -> None:
        self.mults += mults
        self.adds += adds

    def reset(self) -> None:
        self.mults = 0
        self.adds = 0

    def copy(self) -> "OpCounter":
        return OpCounter(self.mults, self.adds)

    @property
    def total(self) -> int:
        return self.mults + self.adds

    def __eq__(self, other) -> bool:
        if not isinstance(other, OpCounter):
            return NotImplemented
        return self.mults == other.mults and self.adds == other.adds

    def __repr__(self) -> str:
        return f"OpCounter(mults={self.mults}, adds={self.adds})"


@dataclass(frozen=True)
class QrFactors:
    """Thin QR factorization H = q1 @ r with [q1 q2] unitary.

    q1:  (n_r, n_t) orthonormal columns spanning range(H)
    q2:  (n_r, n_r - n_t) orthonormal complement
    r:   (n_t, n_t) upper triangular with real, strictly positive diagonal
    """

    q1: np.ndarray
    q2: np.ndarray
    r: np.ndarray


def qrd(h: np.ndarray, rank_tol: float = 1e-12) -> QrFactors:
    """Full QR decomposition of a tall complex matrix.

    The diagonal of r is normalized to be real and positive (column phases
    absorbed into q), which makes the factorization unique and the child
    enumeration order of the tree search reproducible bit-for-bit.

    Raises RankDeficient when any |r[l, l]| <= rank_tol.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError("channel matrix must be 2-D")
    n_r, n_t = h.shape
    if n_r < n_t or n_t < 1:
        raise ValueError(f"need n_r >= n_t >= 1, got shape {h.shape}")
    q, r_full = np.linalg.qr(h, mode="complete")
    r = r_full[:n_t, :]
    diag = r.diagonal().copy()
    if np.any(np.abs(diag) <= rank_tol):
        raise RankDeficient(f"smallest pivot {np.min(np.abs(diag)):.3e} below {rank_tol:.0e}")
    # absorb pivot phases so diag(r) is real positive
    phase = diag / np.abs(diag)
    q = q.copy()
    q[:, :n_t] *= phase
    r = phase.conj()[:, None] * r
    # exact-real diagonal (kill residual imaginary dust)
    r[np.diag_indices(n_t)] = np.abs(diag)
    r = np.triu(r)
    return QrFactors(q1=q[:, :n_t], q2=q[:, n_t:], r=r)


def gaussian_complex_vector(n: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. circularly symmetric complex Gaussians, E|entry|^2 = variance."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def counted_residual_metric(z: np.ndarray, r: np.ndarray, x: np.ndarray,
                            counter: OpCounter) -> float:
    """||z - r @ x||^2 exploiting the upper-triangular structure of r.

    Per row l (0-based, t = n - l nonzero coefficients): t products, t - 1
    accumulation adds, one subtraction from z[l], and 1 mult + 1 add for the
    squared magnitude; row results are folded into the total with one add
    each after the first.
    """
    z = np.asarray(z, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    n = z.shape[0]
    if r.shape != (n, n) or x.shape[0] != n:
        raise ValueError("dimension mismatch between z, r, x")
    total = 0.0
    mults = 0
    adds = 0
    for l in range(n):
        t = n - l
        acc = z[l]
        for k in range(l, n):
            acc -= r[l, k] * x[k]
        mults += t + 1          # t products + squared magnitude
        adds += t + 1           # (t-1) sums + 1 subtract + squared magnitude
        total += acc.real * acc.real + acc.imag * acc.imag
        if l > 0:
            adds += 1
    counter.add(mults, adds)
    return float(total)
