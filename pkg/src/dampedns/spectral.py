"""Fourier representation of vector fields on a periodic box.

Coefficients are stored in full complex FFT order, shape ``(3, N1, N2, N3)``.
They are scaled by ``sqrt(V) / N`` relative to the raw DFT so that the
coefficient l2 norm equals the physical L2 norm over the box (Parseval with
unit constant). A constant field ``c`` therefore has DC coefficient
``c * sqrt(V)``.

Wavenumber tables use ``k in {-N/2+1, ..., N/2}``; the Nyquist entry is stored
as ``+N/2``. Odd multipliers (first derivatives, divergence, the Leray
projector) use a copy of the tables with the Nyquist entry set to zero, so
that they commute with Hermitian symmetry. Even multipliers (Laplacians,
Sobolev weights, the Friedrichs cutoff) use the true ``|xi|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

HERMITIAN_RTOL = 1e-13
DIVFREE_RTOL = 1e-12

#: passed to scipy.fft; -1 uses all cores
FFT_WORKERS = -1


@dataclass(frozen=True)
class Grid:
    """Uniform collocation lattice on [0, L1) x [0, L2) x [0, L3)."""

    modes: tuple[int, int, int]
    box: tuple[float, float, float] = (2 * np.pi, 2 * np.pi, 2 * np.pi)

    def __post_init__(self):
        modes = tuple(int(n) for n in self.modes)
        box = tuple(float(b) for b in self.box)
        if len(modes) != 3 or len(box) != 3:
            raise ValueError("grid needs three mode counts and three box lengths")
        for n in modes:
            if n < 4 or n % 2:
                raise ValueError(f"mode counts must be even and >= 4, got {modes}")
        for b in box:
            if not np.isfinite(b) or b <= 0:
                raise ValueError(f"box lengths must be positive, got {box}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "box", box)

    @classmethod
    def cube(cls, n: int, length: float = 2 * np.pi) -> Grid:
        return cls((n, n, n), (length, length, length))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.modes

    @property
    def size(self) -> int:
        return int(np.prod(self.modes))

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.size

    @cached_property
    def integers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis in FFT order, Nyquist stored as +N/2."""
        out = []
        for n in self.modes:
            k = np.fft.fftfreq(n, 1.0 / n)
            k[n // 2] = n // 2
            out.append(k)
        return tuple(out)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(2 * np.pi * k / L for k, L in zip(self.integers, self.box))

    @cached_property
    def odd_wavenumbers(self) -> tuple[np.ndarray, ...]:
        out = []
        for xi, n in zip(self.wavenumbers, self.modes):
            xi = xi.copy()
            xi[n // 2] = 0.0
            out.append(xi)
        return tuple(out)

    @cached_property
    def xi(self) -> np.ndarray:
        """Broadcast wavevectors, shape (3, N1, N2, N3)."""
        return np.stack(np.meshgrid(*self.wavenumbers, indexing="ij"))

    @cached_property
    def xi_odd(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.odd_wavenumbers, indexing="ij"))

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return np.sum(self.xi**2, axis=0)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @cached_property
    def xi_h_sq(self) -> np.ndarray:
        return self.xi[0] ** 2 + self.xi[1] ** 2

    @cached_property
    def xi_odd_sq(self) -> np.ndarray:
        return np.sum(self.xi_odd**2, axis=0)

    @property
    def xi_max(self) -> float:
        return float(self.xi_abs.max())

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k_i| < N_i/3 on every axis."""
        keep = [np.abs(k) < n / 3.0 for k, n in zip(self.integers, self.modes)]
        return keep[0][:, None, None] & keep[1][None, :, None] & keep[2][None, None, :]

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Lattice points x_i = j L_i / N_i, shape (3, N1, N2, N3)."""
        axes = [np.arange(n) * (L / n) for n, L in zip(self.modes, self.box)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @property
    def _scale(self) -> float:
        return np.sqrt(self.volume) / self.size


def _check_components(arr: np.ndarray, grid: Grid, what: str) -> None:
    if arr.shape != (3,) + grid.shape:
        raise ValueError(f"{what} shape {arr.shape} does not match grid {(3,) + grid.shape}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def mirror_index(a: np.ndarray, axes=(-3, -2, -1)) -> np.ndarray:
    """Return a(-k) for arrays in FFT order."""
    return np.roll(np.flip(a, axis=axes), 1, axis=axes)


def hermitian_defect(coeffs: np.ndarray) -> float:
    """max |c(-k) - conj c(k)| / max |c|, 0 for a zero array."""
    scale = np.abs(coeffs).max()
    if scale == 0:
        return 0.0
    return float(np.abs(mirror_index(coeffs) - np.conj(coeffs)).max() / scale)


def symmetrize(coeffs: np.ndarray) -> np.ndarray:
    return 0.5 * (coeffs + np.conj(mirror_index(coeffs)))


@dataclass(frozen=True, eq=False)
class PhysicalVectorField:
    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        _check_components(samples, self.grid, "samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("physical field contains NaN or Inf")
        object.__setattr__(self, "samples", _frozen(samples))

    @classmethod
    def from_function(cls, grid: Grid, func) -> PhysicalVectorField:
        """Sample ``func(x1, x2, x3) -> (u1, u2, u3)`` on the lattice."""
        x = grid.coordinates
        comps = [np.broadcast_to(c, grid.shape) for c in func(x[0], x[1], x[2])]
        return cls(grid, np.stack(comps).astype(float))

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.samples**2, axis=0))


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        _check_components(coeffs, self.grid, "coeffs")
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralVectorField:
        return cls(grid, np.zeros((3,) + grid.shape, dtype=complex))

    def hermitian_defect(self) -> float:
        return hermitian_defect(self.coeffs)

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        return self.hermitian_defect() <= rtol

    def divergence_defect(self) -> float:
        """max |xi . u(xi)| / max |u(xi)|, odd multiplier convention."""
        scale = np.abs(self.coeffs).max()
        if scale == 0:
            return 0.0
        div = np.sum(self.grid.xi_odd * self.coeffs, axis=0)
        return float(np.abs(div).max() / scale)

    def is_divergence_free(self, rtol: float = DIVFREE_RTOL) -> bool:
        return self.divergence_defect() <= rtol

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def __add__(self, other: SpectralVectorField) -> SpectralVectorField:
        return SpectralVectorField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralVectorField) -> SpectralVectorField:
        return SpectralVectorField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> SpectralVectorField:
        return SpectralVectorField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


# array-level kernels, shared with the time stepper


def fft_forward(samples: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.fftn(samples, axes=(-3, -2, -1), workers=FFT_WORKERS) * grid._scale


def fft_inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    out = sfft.ifftn(coeffs, axes=(-3, -2, -1), workers=FFT_WORKERS)
    return out.real * (1.0 / grid._scale)


def leray_array(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    xi = grid.xi_odd
    k2 = grid.xi_odd_sq
    safe = np.where(k2 == 0, 1.0, k2)
    proj = np.sum(xi * coeffs, axis=0) / safe
    return coeffs - xi * proj


# half-spectrum (rfft) layout, used internally by the time stepper


def half_width(grid: Grid) -> int:
    return grid.modes[2] // 2 + 1


def to_half(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return np.ascontiguousarray(coeffs[..., : half_width(grid)])


def to_full(half: np.ndarray, grid: Grid) -> np.ndarray:
    """Rebuild full coefficients from the k3 >= 0 half, assuming Hermitian symmetry."""
    n3 = grid.modes[2]
    h = half_width(grid)
    full = np.empty(half.shape[:-1] + (n3,), dtype=complex)
    full[..., :h] = half
    mirrored = np.conj(mirror_index(half, axes=(-3, -2)))
    full[..., h:] = mirrored[..., 1 : n3 - h + 1][..., ::-1]
    return full


def half_weights(grid: Grid) -> np.ndarray:
    """Multiplicity of each half-spectrum k3 plane in full-spectrum sums."""
    w = np.full(half_width(grid), 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def rfft_forward(samples: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.rfftn(samples, axes=(-3, -2, -1), workers=FFT_WORKERS) * grid._scale


def rfft_inverse(half: np.ndarray, grid: Grid) -> np.ndarray:
    out = sfft.irfftn(half, s=grid.shape, axes=(-3, -2, -1), workers=FFT_WORKERS)
    return out * (1.0 / grid._scale)


def symmetrize_half(half: np.ndarray) -> np.ndarray:
    """Enforce Hermitian symmetry on the self-conjugate k3 = 0 and Nyquist planes."""
    out = half.copy()
    for j in (0, -1):
        plane = out[..., j]
        out[..., j] = 0.5 * (plane + np.conj(mirror_index(plane, axes=(-2, -1))))
    return out


# public operations


def forward_transform(f: PhysicalVectorField) -> SpectralVectorField:
    return SpectralVectorField(f.grid, fft_forward(f.samples, f.grid))


def inverse_transform(
    f_hat: SpectralVectorField, rtol: float = HERMITIAN_RTOL
) -> PhysicalVectorField:
    defect = f_hat.hermitian_defect()
    if defect > rtol:
        raise ValueError(
            f"coefficients are not Hermitian symmetric (defect {defect:.3e} > {rtol:.1e})"
        )
    return PhysicalVectorField(f_hat.grid, fft_inverse(f_hat.coeffs, f_hat.grid))


def leray_project(f_hat: SpectralVectorField) -> SpectralVectorField:
    """Apply I - xi xi^T / |xi|^2 per mode; modes with xi = 0 pass through."""
    return SpectralVectorField(f_hat.grid, leray_array(f_hat.coeffs, f_hat.grid))


def friedrichs_cutoff(f_hat: SpectralVectorField, R: float) -> SpectralVectorField:
    """Zero every mode with |xi| >= R."""
    if not R > 0:
        raise ValueError(f"cutoff radius must be positive, got {R}")
    if np.isinf(R):
        return f_hat
    mask = f_hat.grid.xi_abs < R
    return SpectralVectorField(f_hat.grid, f_hat.coeffs * mask)


def derivative(f_hat: SpectralVectorField, axis: int) -> SpectralVectorField:
    """Partial derivative along ``axis`` (1, 2 or 3); Nyquist mode zeroed."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    xi = f_hat.grid.xi_odd[axis - 1]
    return SpectralVectorField(f_hat.grid, 1j * xi * f_hat.coeffs)


def horizontal_laplacian(f_hat: SpectralVectorField) -> SpectralVectorField:
    """Multiply by -(xi1^2 + xi2^2); purely vertical modes map to zero."""
    return SpectralVectorField(f_hat.grid, -f_hat.grid.xi_h_sq * f_hat.coeffs)


def band_limited_scalar(grid: Grid, rng: np.random.Generator, band: float = 2.0 / 3.0) -> np.ndarray:
    """Random real, mean-zero scalar coefficients supported on |xi| <= band * xi_nyq.

    ``xi_nyq`` is the smallest per-axis Nyquist wavenumber; the support is
    further intersected with the dealiasing mask.
    """
    xi_nyq = min(n * np.pi / L for n, L in zip(grid.modes, grid.box))
    support = (grid.xi_abs <= band * xi_nyq) & grid.dealias_mask
    support[0, 0, 0] = False
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c = symmetrize(c * support)
    return c


def random_field(grid: Grid, seed=None, band: float = 2.0 / 3.0) -> SpectralVectorField:
    """Random real band-limited vector field, not projected."""
    rng = np.random.default_rng(seed)
    coeffs = np.stack([band_limited_scalar(grid, rng, band) for _ in range(3)])
    return SpectralVectorField(grid, coeffs)


def random_divergence_free(grid: Grid, seed=None, band: float = 2.0 / 3.0) -> SpectralVectorField:
    return leray_project(random_field(grid, seed, band))
