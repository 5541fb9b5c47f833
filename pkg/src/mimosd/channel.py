"""Constellations, the linear MIMO system model, and the zero-forcing fallback."""

from dataclasses import dataclass, field

import numpy as np

from .numerics import RankDeficient, gaussian_complex_vector


class NotAConstellationPoint(Exception):
    """A vector entry does not match any constellation symbol."""


@dataclass(frozen=True)
class Constellation:
    """Ordered set of complex symbols with integer bit labels.

    Symbols are normalized to unit average energy.  ``labels[q]`` is the
    bit pattern transmitted by ``symbols[q]``, packed LSB-first into an int.
    """

    name: str
    symbols: np.ndarray
    bits_per_symbol: int
    labels: np.ndarray

    def __post_init__(self):
        m = self.symbols.shape[0]
        if m != 2 ** self.bits_per_symbol:
            raise ValueError(f"{m} symbols cannot carry {self.bits_per_symbol} bits")
        if len(np.unique(self.symbols)) != m:
            raise ValueError("constellation symbols must be distinct")
        energy = np.mean(np.abs(self.symbols) ** 2)
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"constellation must have unit average energy, got {energy}")

    @property
    def size(self) -> int:
        return self.symbols.shape[0]

    def index_of(self, value: complex, tol: float = 1e-9) -> int:
        """Index of the symbol equal to `value` (within tol), else raises."""
        d = np.abs(self.symbols - value)
        q = int(np.argmin(d))
        if d[q] > tol:
            raise NotAConstellationPoint(f"{value} is not a constellation point")
        return q

    def nearest_index(self, value: complex) -> int:
        """Index of the closest symbol; ties go to the lower index."""
        return int(np.argmin(np.abs(self.symbols - value) ** 2))


def square_qam(order: int) -> Constellation:
    """Gray-labeled square QAM with unit average energy.

    Per-axis reflected Gray coding: the first half of the label bits select
    the in-phase level, the second half the quadrature level, so neighboring
    points differ in exactly one bit.
    """
    side = int(round(np.sqrt(order)))
    if side * side != order or side < 2:
        raise ValueError(f"square QAM needs a square order >= 4, got {order}")
    bits_per_axis = side.bit_length() - 1
    if 2 ** bits_per_axis != side:
        raise ValueError(f"square QAM side must be a power of two, got {side}")
    levels = np.arange(side) * 2.0 - (side - 1)      # -(side-1), ..., +(side-1)
    scale = np.sqrt(2.0 * (order - 1) / 3.0)
    gray = np.arange(side) ^ (np.arange(side) >> 1)  # level position -> gray code
    symbols = np.empty(order, dtype=np.complex128)
    labels = np.empty(order, dtype=np.int64)
    q = 0
    for qi in range(side):
        for qq in range(side):
            symbols[q] = (levels[qi] + 1j * levels[qq]) / scale
            labels[q] = int(gray[qi]) | (int(gray[qq]) << bits_per_axis)
            q += 1
    name = "qpsk" if order == 4 else f"{order}qam"
    return Constellation(name=name, symbols=symbols,
                         bits_per_symbol=2 * bits_per_axis, labels=labels)


def qpsk() -> Constellation:
    """Gray-labeled QPSK, symbols (+-1 +- 1j)/sqrt(2)."""
    return square_qam(4)


_CONSTELLATIONS = {"qpsk": 4, "16qam": 16, "64qam": 64}


def constellation_by_name(name: str) -> Constellation:
    try:
        return square_qam(_CONSTELLATIONS[name.lower()])
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; "
                         f"known: {sorted(_CONSTELLATIONS)}") from None


def snr_to_noise_variance(snr_db: float, n_t: int) -> float:
    """Noise variance per receive dimension for SNR defined as Es*n_t/sigma_v^2.

    Symbols carry unit average energy, so sigma_v^2 = n_t / 10^(snr_db/10).
    """
    if n_t < 1:
        raise ValueError(f"need n_t >= 1, got {n_t}")
    return n_t / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class ChannelInstance:
    """One realization of y = h @ x_true + v."""

    h: np.ndarray
    x_true: np.ndarray
    v: np.ndarray
    y: np.ndarray
    noise_variance: float
    x_true_indices: np.ndarray = field(repr=False, default=None)


def draw_channel_instance(n_t: int, n_r: int, constellation: Constellation,
                          snr_db: float, rng: np.random.Generator) -> ChannelInstance:
    """i.i.d. CN(0, 1) channel, uniform symbols, AWGN at the requested SNR.

    Draw order is fixed (h, then x, then v) so a seeded generator always
    reproduces the same instance.
    """
    if n_r < n_t:
        raise ValueError(f"need n_r >= n_t, got {n_r} < {n_t}")
    noise_variance = snr_to_noise_variance(snr_db, n_t)
    h = np.sqrt(0.5) * (rng.standard_normal((n_r, n_t))
                        + 1j * rng.standard_normal((n_r, n_t)))
    idx = rng.integers(0, constellation.size, size=n_t)
    x_true = constellation.symbols[idx]
    v = gaussian_complex_vector(n_r, noise_variance, rng)
    y = h @ x_true + v
    return ChannelInstance(h=h, x_true=x_true, v=v, y=y,
                           noise_variance=noise_variance, x_true_indices=idx)


def zero_forcing_detect(y: np.ndarray, h: np.ndarray,
                        constellation: Constellation) -> np.ndarray:
    """Linear equalization (H^H H)^-1 H^H y, then per-entry nearest symbol."""
    gram = h.conj().T @ h
    try:
        x_lin = np.linalg.solve(gram, h.conj().T @ y)
    except np.linalg.LinAlgError:
        raise RankDeficient("H^H H is numerically singular") from None
    if not np.all(np.isfinite(x_lin)):
        raise RankDeficient("H^H H is numerically singular")
    idx = [constellation.nearest_index(value) for value in x_lin]
    return constellation.symbols[np.array(idx)]


def bits_diff(a: np.ndarray, b: np.ndarray, constellation: Constellation) -> int:
    """Hamming distance between the bit labelings of two symbol vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    total = 0
    for va, vb in zip(a, b):
        la = constellation.labels[constellation.index_of(va)]
        lb = constellation.labels[constellation.index_of(vb)]
        total += int(la ^ lb).bit_count()
    return total
