"""QPSK/OFDM baseband signal chain on a comb-pilot resource grid.

Conventions used throughout the package:

* Resource grids are complex arrays of shape ``(..., N, M)``: subcarrier
  index first, OFDM symbol index second, optional leading batch axes.
* Pilot cells occupy every ``pilot_spacing``-th subcarrier (including
  subcarrier 0) on every symbol; all remaining cells carry data.
* OFDM modulation scales the inverse transform by ``sqrt(N)`` and
  demodulation by ``1 / sqrt(N)``, so the average time-sample power equals
  the average cell power and frequency-domain noise keeps the variance of
  the time-domain noise it came from.
* Data symbols flatten symbol-major: entry ``m * n_data + d`` of a flat
  data vector is subcarrier ``data_indices[d]`` of OFDM symbol ``m``.
  Bits pair up as (real, imag) per QPSK symbol in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectral import dft, idft

__all__ = [
    "GridConfig",
    "generate_pilots",
    "qpsk_modulate",
    "qpsk_demodulate",
    "build_grid",
    "extract_data",
    "ofdm_modulate",
    "ofdm_demodulate",
    "extract_pilot_ls",
]

_SQRT2 = np.sqrt(2.0)


def _is_pow2(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


@lru_cache(maxsize=None)
def _data_indices(n_subcarriers: int, n_pilots: int) -> np.ndarray:
    mask = np.ones(n_subcarriers, dtype=bool)
    mask[:: n_subcarriers // n_pilots] = False
    idx = np.nonzero(mask)[0]
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class GridConfig:
    """Dimensions of one estimation block of the resource grid.

    ``n_symbols`` is the number of OFDM symbols the block spans; the
    multi-symbol estimator forms one channel estimate per block.
    """

    n_subcarriers: int = 512
    n_pilots: int = 64
    n_symbols: int = 2
    cp_len: int = 40

    def __post_init__(self) -> None:
        if not _is_pow2(self.n_subcarriers):
            raise ValueError(f"n_subcarriers must be a power of two, got {self.n_subcarriers}")
        if not _is_pow2(self.n_pilots):
            raise ValueError(f"n_pilots must be a power of two, got {self.n_pilots}")
        if self.n_pilots > self.n_subcarriers:
            raise ValueError("n_pilots cannot exceed n_subcarriers")
        if self.n_symbols < 1:
            raise ValueError(f"n_symbols must be at least 1, got {self.n_symbols}")
        if not 0 <= self.cp_len <= self.n_subcarriers:
            raise ValueError(f"cp_len must lie in [0, n_subcarriers], got {self.cp_len}")

    @property
    def pilot_spacing(self) -> int:
        return self.n_subcarriers // self.n_pilots

    @property
    def pilot_indices(self) -> np.ndarray:
        return np.arange(0, self.n_subcarriers, self.pilot_spacing)

    @property
    def data_indices(self) -> np.ndarray:
        return _data_indices(self.n_subcarriers, self.n_pilots)

    @property
    def n_data(self) -> int:
        """Data subcarriers per OFDM symbol."""
        return self.n_subcarriers - self.n_pilots

    @property
    def samples_per_symbol(self) -> int:
        return self.n_subcarriers + self.cp_len

    @property
    def samples_per_block(self) -> int:
        return self.n_symbols * self.samples_per_symbol

    @property
    def data_bits_per_block(self) -> int:
        """QPSK data bits carried by one block."""
        return 2 * self.n_symbols * self.n_data


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Map bit pairs (b0, b1) to ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).

    ``bits`` has an even last axis; output halves it. Gray mapping: b0
    selects the sign of the real part, b1 of the imaginary part.
    """
    arr = np.asarray(bits)
    if arr.shape[-1] % 2:
        raise ValueError(f"bit count must be even, got {arr.shape[-1]}")
    pairs = arr.reshape(arr.shape[:-1] + (arr.shape[-1] // 2, 2))
    return ((1.0 - 2.0 * pairs[..., 0]) + 1j * (1.0 - 2.0 * pairs[..., 1])) / _SQRT2


def qpsk_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard decisions inverse to :func:`qpsk_modulate`.

    A component exactly on the decision boundary (zero) demaps to bit 0.
    """
    s = np.asarray(symbols)
    bits = np.empty(s.shape[:-1] + (2 * s.shape[-1],), dtype=np.int64)
    bits[..., 0::2] = s.real < 0
    bits[..., 1::2] = s.imag < 0
    return bits


def generate_pilots(seed: int, cfg: GridConfig) -> np.ndarray:
    """Deterministic unit-modulus QPSK pilot grid of shape (n_pilots, n_symbols)."""
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(cfg.n_pilots, 2 * cfg.n_symbols))
    return qpsk_modulate(bits)


def build_grid(data_symbols: np.ndarray, pilots: np.ndarray, cfg: GridConfig) -> np.ndarray:
    """Assemble a (..., N, M) resource grid from flat data symbols and pilots."""
    data = np.asarray(data_symbols)
    expected = cfg.n_symbols * cfg.n_data
    if data.shape[-1] != expected:
        raise ValueError(f"expected {expected} data symbols per block, got {data.shape[-1]}")
    batch = data.shape[:-1]
    grid = np.zeros(batch + (cfg.n_subcarriers, cfg.n_symbols), dtype=np.complex128)
    grid[..., cfg.pilot_indices, :] = pilots
    per_symbol = data.reshape(batch + (cfg.n_symbols, cfg.n_data))
    grid[..., cfg.data_indices, :] = np.swapaxes(per_symbol, -1, -2)
    return grid


def extract_data(grid: np.ndarray, cfg: GridConfig) -> np.ndarray:
    """Pull the data cells back out of a grid, flattened symbol-major."""
    cells = np.asarray(grid)[..., cfg.data_indices, :]
    per_symbol = np.swapaxes(cells, -1, -2)
    return per_symbol.reshape(per_symbol.shape[:-2] + (-1,))


def ofdm_modulate(grid: np.ndarray, cfg: GridConfig) -> np.ndarray:
    """Per-symbol scaled IDFT plus cyclic prefix, serialized to samples.

    Output shape is ``(..., n_symbols * (n_subcarriers + cp_len))``.
    """
    arr = np.asarray(grid)
    if arr.shape[-2:] != (cfg.n_subcarriers, cfg.n_symbols):
        raise ValueError(
            f"grid must end in shape ({cfg.n_subcarriers}, {cfg.n_symbols}), got {arr.shape[-2:]}"
        )
    freq = np.swapaxes(arr, -1, -2)
    body = idft(freq) * np.sqrt(cfg.n_subcarriers)
    if cfg.cp_len:
        body = np.concatenate([body[..., cfg.n_subcarriers - cfg.cp_len :], body], axis=-1)
    return body.reshape(body.shape[:-2] + (cfg.samples_per_block,))


def ofdm_demodulate(samples: np.ndarray, cfg: GridConfig) -> np.ndarray:
    """Strip cyclic prefixes and apply the scaled forward transform per symbol."""
    arr = np.asarray(samples)
    if arr.shape[-1] != cfg.samples_per_block:
        raise ValueError(
            f"expected {cfg.samples_per_block} samples per block, got {arr.shape[-1]}"
        )
    blocks = arr.reshape(arr.shape[:-1] + (cfg.n_symbols, cfg.samples_per_symbol))
    body = blocks[..., cfg.cp_len :]
    freq = dft(body) / np.sqrt(cfg.n_subcarriers)
    return np.swapaxes(freq, -1, -2)


def extract_pilot_ls(rx_grid: np.ndarray, pilots: np.ndarray, cfg: GridConfig) -> np.ndarray:
    """Least-squares channel observation at the pilot cells.

    Pilots are unit modulus, so dividing by the pilot equals multiplying by
    its conjugate; returns shape ``(..., n_pilots, n_symbols)``.
    """
    return np.asarray(rx_grid)[..., cfg.pilot_indices, :] * np.conj(pilots)
