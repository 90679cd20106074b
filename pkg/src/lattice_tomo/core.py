"""Constellations, the real-valued linear Gaussian model and SNR bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


def gray_code(n_bits: int) -> np.ndarray:
    """Reflected Gray code sequence of length ``2**n_bits``."""
    i = np.arange(1 << n_bits, dtype=np.int64)
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """Ordered real PAM alphabet with a Gray labeling on the symbol index.

    ``labels[k]`` is the integer label of ``symbols[k]``; ``bits[k]`` holds the
    same label as a 0/1 row, most significant bit first.
    """

    symbols: np.ndarray
    bits_per_symbol: int
    labels: np.ndarray
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=float)
        if sym.ndim != 1 or sym.size < 2:
            raise InvalidArgumentError("constellation needs at least two symbols")
        if np.any(np.diff(sym) <= 0):
            raise InvalidArgumentError("symbols must be strictly increasing")
        if sym.size != 1 << self.bits_per_symbol:
            raise InvalidArgumentError("size must equal 2**bits_per_symbol")
        sym.setflags(write=False)
        object.__setattr__(self, "symbols", sym)

    @property
    def m(self) -> int:
        return self.symbols.size

    @property
    def energy(self) -> float:
        """Mean symbol energy E_s under uniform priors."""
        return float(np.mean(self.symbols**2))

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.symbols[1:] + self.symbols[:-1])

    def slice(self, y) -> np.ndarray:
        """Index of the nearest symbol; exact midpoints go to the smaller symbol."""
        return np.searchsorted(self.midpoints, y, side="left")

    def label_of(self, k: int) -> str:
        return format(int(self.labels[k]), f"0{self.bits_per_symbol}b")


def make_constellation(m: int) -> Constellation:
    """M-PAM alphabet {±1, ±3, ..., ±(M-1)}, Gray labeled, no energy normalization."""
    if not isinstance(m, (int, np.integer)) or m < 2 or (m & (m - 1)):
        raise InvalidArgumentError(f"constellation size must be a power of two >= 2, got {m!r}")
    n_bits = int(m).bit_length() - 1
    symbols = np.arange(-(m - 1), m, 2, dtype=float)
    labels = gray_code(n_bits)
    shifts = np.arange(n_bits - 1, -1, -1)
    bits = ((labels[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    labels.setflags(write=False)
    bits.setflags(write=False)
    return Constellation(symbols, n_bits, labels, bits)


@dataclass(frozen=True)
class SymbolVector:
    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def from_indices(cls, indices, constellation: Constellation) -> "SymbolVector":
        idx = np.asarray(indices, dtype=np.int64)
        return cls(idx, constellation.symbols[idx])

    def __len__(self):
        return self.indices.size


@dataclass(frozen=True)
class Problem:
    """One instance of x = H s + n with known noise variance per real component."""

    H: np.ndarray
    x: np.ndarray
    sigma2: float
    constellation: Constellation

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if H.ndim != 2:
            raise InvalidArgumentError("H must be a matrix")
        p, d = H.shape
        if not p >= d >= 2:
            raise InvalidArgumentError(f"need p >= d >= 2, got p={p}, d={d}")
        if x.shape != (p,):
            raise InvalidArgumentError(f"x must have shape ({p},), got {x.shape}")
        if not self.sigma2 > 0:
            raise InvalidArgumentError("sigma2 must be positive")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def p(self) -> int:
        return self.H.shape[0]

    @property
    def d(self) -> int:
        return self.H.shape[1]


def complex_to_real(Hc, xc):
    """Real representation of a complex system.

    Returns ``H = [[Re, -Im], [Im, Re]]`` and ``x = [Re xc; Im xc]`` so that a
    complex ``s`` corresponds to ``[Re s; Im s]``.
    """
    Hc = np.atleast_2d(np.asarray(Hc, dtype=complex))
    xc = np.asarray(xc, dtype=complex).reshape(-1)
    H = np.block([[Hc.real, -Hc.imag], [Hc.imag, Hc.real]])
    x = np.concatenate([xc.real, xc.imag])
    return H, x


def sample_channel(rng: np.random.Generator, p: int, d: int) -> np.ndarray:
    """i.i.d. N(0, 1) real channel of shape (p, d)."""
    if d < 2 or p < d:
        raise InvalidArgumentError(f"need p >= d >= 2, got p={p}, d={d}")
    return rng.standard_normal((p, d))


def sigma2_from_snr(snr_db: float, constellation: Constellation, d: int) -> float:
    # received energy per antenna is d * E_s for unit-variance channel taps; N0 == sigma2
    return d * constellation.energy / 10.0 ** (snr_db / 10.0)
