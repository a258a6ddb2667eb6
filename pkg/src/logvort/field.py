"""Periodic grid fields and their spectral representation.

The plane is approximated by the periodic box ``[-box*pi, box*pi)^2`` sampled
on an ``n x n`` grid with ``x_j = -box*pi + j*h`` and ``h = 2*pi*box/n``.
Axis 0 of ``values`` is x1, axis 1 is x2 (``indexing="ij"``).  The grid
contains the origin (index ``n//2``) and is symmetric under ``j -> n - j``,
so odd/even symmetry is exact at the sample level.

Spectral coefficients approximate the continuous transform

    fhat(xi) = integral f(x) exp(-i x.xi) dx,   xi = m / box,

stored in FFT order.  Norms use the Plancherel measure, so that

    ||f||_{L2}^2 = sum |fhat|^2 / area,   area = (2*pi*box)^2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft as sfft

_WORKERS = 1


def set_threads(n: int) -> None:
    """Cap the number of threads used by FFTs (results do not depend on it)."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def fft2(a: np.ndarray) -> np.ndarray:
    return sfft.fft2(a, workers=_WORKERS)


def ifft2(a: np.ndarray) -> np.ndarray:
    return sfft.ifft2(a, workers=_WORKERS)


def rfft2(a: np.ndarray) -> np.ndarray:
    return sfft.rfft2(a, workers=_WORKERS)


def irfft2(a: np.ndarray, n: int) -> np.ndarray:
    return sfft.irfft2(a, s=(n, n), workers=_WORKERS)


def _check_n(n: int) -> None:
    if n < 16 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 16, got {n}")


def wavenumbers(n: int, box: float) -> np.ndarray:
    """Physical wavenumbers m/box in FFT order."""
    return np.fft.fftfreq(n, d=1.0 / n) / box


def grid_coords(n: int, box: float) -> np.ndarray:
    return -box * np.pi + np.arange(n) * (2.0 * np.pi * box / n)


def _sign_pattern(n: int) -> np.ndarray:
    # exp(i xi box pi) = (-1)^m accounts for the grid starting at -box*pi
    m = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    s = np.where(m % 2 == 0, 1.0, -1.0)
    return np.multiply.outer(s, s)


@dataclass(frozen=True)
class GridField:
    """Real samples of a periodic field on the symmetric grid."""

    values: np.ndarray
    box: float = 1.0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"values must be a square 2D array, got shape {v.shape}")
        _check_n(v.shape[0])
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")
        if not (self.box > 0 and np.isfinite(self.box)):
            raise ValueError(f"box must be positive, got {self.box}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "box", float(self.box))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 2.0 * np.pi * self.box / self.n

    @property
    def area(self) -> float:
        return (2.0 * np.pi * self.box) ** 2

    def coords(self) -> np.ndarray:
        return grid_coords(self.n, self.box)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.coords()
        return np.meshgrid(x, x, indexing="ij")

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      n: int, box: float = 1.0) -> "GridField":
        _check_n(n)
        x = grid_coords(n, box)
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        return cls(np.broadcast_to(fn(x1, x2), (n, n)), box)

    @classmethod
    def zeros(cls, n: int, box: float = 1.0) -> "GridField":
        return cls(np.zeros((n, n)), box)

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(values, self.box)

    def _other(self, other):
        if isinstance(other, GridField):
            if other.n != self.n or other.box != self.box:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other) -> "GridField":
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> "GridField":
        return self.with_values(self.values - self._other(other))

    def __mul__(self, other) -> "GridField":
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return self.with_values(-self.values)

    def reflect(self, axis: int) -> np.ndarray:
        """Samples of x -> f(x with coordinate `axis` negated)."""
        return np.roll(np.flip(self.values, axis=axis), 1, axis=axis)

    def symmetry_residual(self) -> float:
        """Max defect of odd-in-x1 and odd-in-x2 symmetry, relative to max |f|."""
        scale = max(np.abs(self.values).max(), 1e-300)
        r1 = np.abs(self.values + self.reflect(0)).max()
        r2 = np.abs(self.values + self.reflect(1)).max()
        return float(max(r1, r2) / scale)


@dataclass(frozen=True)
class SpectralField:
    """Continuous-transform samples fhat(m/box) in FFT order."""

    modes: np.ndarray
    box: float = 1.0

    def __post_init__(self) -> None:
        m = np.array(self.modes, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"modes must be a square 2D array, got shape {m.shape}")
        _check_n(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise ValueError("spectrum contains non-finite modes")
        m.setflags(write=False)
        object.__setattr__(self, "modes", m)
        object.__setattr__(self, "box", float(self.box))

    @property
    def n(self) -> int:
        return self.modes.shape[0]

    @property
    def area(self) -> float:
        return (2.0 * np.pi * self.box) ** 2

    def wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        k = wavenumbers(self.n, self.box)
        return np.meshgrid(k, k, indexing="ij")

    def abs_xi(self) -> np.ndarray:
        k1, k2 = self.wavevectors()
        return np.hypot(k1, k2)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.modes) ** 2) / self.area))

    def weighted_sum(self, weight: np.ndarray) -> float:
        """Plancherel-normalized sum of weight * |fhat|^2."""
        return float(np.sum(weight * np.abs(self.modes) ** 2) / self.area)

    def with_modes(self, modes: np.ndarray) -> "SpectralField":
        return SpectralField(modes, self.box)

    def conjugate_defect(self) -> float:
        m = self.modes
        mirrored = np.roll(np.flip(m, axis=(0, 1)), 1, axis=(0, 1))
        scale = max(np.abs(m).max(), 1e-300)
        return float(np.abs(m - np.conj(mirrored)).max() / scale)


def to_spectral(f: GridField) -> SpectralField:
    return SpectralField(f.h ** 2 * _sign_pattern(f.n) * fft2(f.values), f.box)


def to_grid(F: SpectralField) -> GridField:
    defect = F.conjugate_defect()
    if defect > 1e-9:
        raise ValueError(f"spectrum is not conjugate-symmetric (defect {defect:.3e})")
    h = 2.0 * np.pi * F.box / F.n
    return GridField(ifft2(F.modes * _sign_pattern(F.n)).real / h ** 2, F.box)


def apply_multiplier(F: SpectralField, m: Callable[[np.ndarray], np.ndarray]) -> SpectralField:
    """Multiply each mode by m(|xi|).

    A non-finite value of m at the zero mode is replaced by 0, which requires
    the zero mode of F to vanish; any other non-finite value at an occupied
    mode is an error.
    """
    r = F.abs_xi()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        w = np.asarray(m(r), dtype=np.complex128) * np.ones_like(r)
    bad = ~np.isfinite(w)
    if bad[0, 0]:
        scale = max(np.abs(F.modes).max(), 1e-300)
        if abs(F.modes[0, 0]) > 1e-12 * scale:
            raise ValueError("multiplier is singular at xi=0 but the field has nonzero mean")
        w[0, 0] = 0.0
        bad[0, 0] = False
    occupied = bad & (F.modes != 0)
    if occupied.any():
        i, j = np.argwhere(occupied)[0]
        k = wavenumbers(F.n, F.box)
        raise ValueError(f"multiplier is non-finite at occupied mode xi=({k[i]:g}, {k[j]:g})")
    w[bad] = 0.0
    return F.with_modes(F.modes * w)


def _nyquist_free(n: int, box: float) -> np.ndarray:
    k = wavenumbers(n, box)
    k[n // 2] = 0.0  # odd derivatives of a real field drop the Nyquist mode
    return k


def derivative(f: GridField, axis: int) -> GridField:
    k = _nyquist_free(f.n, f.box)
    F = to_spectral(f).modes
    shape = (-1, 1) if axis == 0 else (1, -1)
    return to_grid(SpectralField(1j * k.reshape(shape) * F, f.box))


def gradient(f: GridField) -> tuple[GridField, GridField]:
    k = _nyquist_free(f.n, f.box)
    F = to_spectral(f).modes
    d1 = to_grid(SpectralField(1j * k[:, None] * F, f.box))
    d2 = to_grid(SpectralField(1j * k[None, :] * F, f.box))
    return d1, d2


def dealias_mask(n: int) -> np.ndarray:
    m = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    keep = m <= n // 3
    return np.logical_and.outer(keep, keep)


def dealias(F: SpectralField) -> SpectralField:
    return F.with_modes(np.where(dealias_mask(F.n), F.modes, 0.0))


# --- LGV1 snapshots -------------------------------------------------------

_MAGIC = b"LGV1"
_HEADER = struct.Struct("<4sIdd")


def write_snapshot(path: str | Path, field: GridField, time: float = 0.0) -> None:
    """Write magic, u32 n, f64 box, f64 time, then n*n f64 samples (little-endian, row-major)."""
    data = _HEADER.pack(_MAGIC, field.n, field.box, float(time))
    data += np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    Path(path).write_bytes(data)


def read_snapshot(path: str | Path) -> tuple[GridField, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("snapshot truncated")
    magic, n, box, time = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    expected = _HEADER.size + 8 * n * n
    if len(raw) != expected:
        raise ValueError(f"snapshot size {len(raw)} does not match n={n}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n)
    return GridField(values.astype(np.float64), box), time
