"""Norm functionals on the torus and empirical inequality probes.

Physical-space norms are lattice quadratures: uniform sums times the cell
volume. L^inf norms are lattice maxima, i.e. lower bounds on the continuum
sup norm. Spectral norms are weighted coefficient l2 sums under the unit
Parseval normalization of :mod:`dampedns.spectral`.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .spectral import (
    FFT_WORKERS,
    Grid,
    PhysicalVectorField,
    SpectralVectorField,
    band_limited_scalar,
)


def _check_exponent(p, name="p"):
    if not (np.isinf(p) and p > 0) and not (np.isfinite(p) and p >= 1):
        raise ValueError(f"{name} must be in [1, inf], got {p}")


def lebesgue_norm(f: PhysicalVectorField, p: float) -> float:
    _check_exponent(p)
    mag = f.magnitude()
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * f.grid.cell_volume) ** (1.0 / p))


def sobolev_weight(grid: Grid, s: float, homogeneous: bool) -> np.ndarray:
    if homogeneous:
        k = grid.xi_abs
        with np.errstate(divide="ignore"):
            w = np.where(k > 0, k ** float(s), 0.0)
        return w
    return (1.0 + grid.xi_sq) ** (s / 2.0)


def sobolev_norm(f_hat: SpectralVectorField, s: float, homogeneous: bool = True) -> float:
    """H^s or homogeneous H^s norm; the mean mode contributes nothing to the latter."""
    c = f_hat.coeffs
    if homogeneous and s < 0:
        mean = np.abs(c[:, 0, 0, 0]).max()
        if mean > 1e-13 * max(np.abs(c).max(), np.finfo(float).tiny):
            raise ValueError("homogeneous norm with s < 0 needs a mean-zero field")
    w = sobolev_weight(f_hat.grid, s, homogeneous)
    return float(np.sqrt(np.sum(w**2 * np.abs(c) ** 2)))


def h01_norm(f_hat: SpectralVectorField) -> float:
    """sqrt(||f||^2 + ||d3 f||^2), the anisotropic H^{0,1} norm."""
    c2 = np.abs(f_hat.coeffs) ** 2
    return float(np.sqrt(np.sum((1.0 + f_hat.grid.xi_odd[2] ** 2) * c2)))


def mixed_norm(f: PhysicalVectorField, p_vertical: float, q_horizontal: float) -> float:
    """L_v^p L_h^q: horizontal L^q on each x3 slice, then vertical L^p of the profile."""
    _check_exponent(p_vertical, "p_vertical")
    _check_exponent(q_horizontal, "q_horizontal")
    grid = f.grid
    mag = f.magnitude()
    d_area = grid.box[0] * grid.box[1] / (grid.modes[0] * grid.modes[1])
    dz = grid.box[2] / grid.modes[2]
    if np.isinf(q_horizontal):
        profile = mag.max(axis=(0, 1))
    else:
        profile = (np.sum(mag**q_horizontal, axis=(0, 1)) * d_area) ** (1.0 / q_horizontal)
    if np.isinf(p_vertical):
        return float(profile.max())
    return float((np.sum(profile**p_vertical) * dz) ** (1.0 / p_vertical))


@dataclass
class NormReport:
    name: str
    value: float
    field_id: str = ""
    parameters: dict = field(default_factory=dict)
    seed: int | None = None

    HEADER = ("name", "parameters", "value", "field_id", "seed")

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"norm value must be nonnegative, got {self.value}")

    def csv_row(self) -> str:
        params = ";".join(f"{k}={v}" for k, v in self.parameters.items())
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(
            [self.name, params, repr(float(self.value)), self.field_id,
             "" if self.seed is None else self.seed]
        )
        return buf.getvalue()


# probes


@dataclass
class ProbeStats:
    ratios: np.ndarray
    seed: int | None = None

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    @property
    def mean(self) -> float:
        return float(np.mean(self.ratios))

    @property
    def trials(self) -> int:
        return len(self.ratios)


def _pad(c: np.ndarray, new_shape) -> np.ndarray:
    """Zero-pad FFT-ordered coefficients to a larger lattice (Nyquist rows dropped)."""
    out = np.zeros(new_shape, dtype=complex)
    slices_src, slices_dst = [], []
    for n, m in zip(c.shape, new_shape):
        h = n // 2
        slices_src.append((slice(0, h), slice(n - h + 1, n)))
        slices_dst.append((slice(0, h), slice(m - h + 1, m)))
    for combo in itertools.product(range(2), repeat=c.ndim):
        src = tuple(slices_src[a][b] for a, b in enumerate(combo))
        dst = tuple(slices_dst[a][b] for a, b in enumerate(combo))
        out[dst] = c[src]
    return out


def _homogeneous_scalar_norm(c: np.ndarray, box, s: float) -> float:
    ks = []
    for n, L in zip(c.shape, box):
        k = np.fft.fftfreq(n, 1.0 / n)
        ks.append(2 * np.pi * np.abs(k) / L)
    k2 = sum(np.meshgrid(*[k**2 for k in ks], indexing="ij"))
    kabs = np.sqrt(k2)
    with np.errstate(divide="ignore"):
        w = np.where(kabs > 0, kabs ** float(s), 0.0)
    return float(np.sqrt(np.sum(w**2 * np.abs(c) ** 2)))


def product_law_ratio(f_coeffs: np.ndarray, g_coeffs: np.ndarray, grid: Grid, s1: float, s2: float) -> float:
    """||f g||_{H^(s1+s2-3/2)} / (||f||_{H^s1} ||g||_{H^s2}), homogeneous norms.

    ``f_coeffs`` and ``g_coeffs`` are mean-zero scalar coefficient arrays in
    the normalized convention. The product is formed alias-free on a lattice
    padded to twice the size per axis, and its mean is dropped before taking
    the (possibly negative order) homogeneous norm.
    """
    padded = tuple(2 * n for n in grid.shape)
    vol = grid.volume
    fp = _pad(f_coeffs, padded)
    gp = _pad(g_coeffs, padded)
    n_pad = np.prod(padded)
    to_phys = n_pad / np.sqrt(vol)
    f_x = sfft.ifftn(fp, workers=FFT_WORKERS).real * to_phys
    g_x = sfft.ifftn(gp, workers=FFT_WORKERS).real * to_phys
    fg = sfft.fftn(f_x * g_x, workers=FFT_WORKERS) / to_phys
    fg[0, 0, 0] = 0.0
    sigma = s1 + s2 - 1.5
    num = _homogeneous_scalar_norm(fg, grid.box, sigma)
    den = _homogeneous_scalar_norm(f_coeffs, grid.box, s1) * _homogeneous_scalar_norm(g_coeffs, grid.box, s2)
    return num / den


def product_law_probe(s1: float, s2: float, trials: int, grid: Grid, seed=None) -> ProbeStats:
    """Empirical sup of the product-law ratio over random band-limited pairs (d = 3)."""
    if not (s1 < 1.5 and s2 < 1.5 and s1 + s2 > 0):
        raise ValueError(f"need s1, s2 < 3/2 and s1 + s2 > 0, got ({s1}, {s2})")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    for i in range(trials):
        f = band_limited_scalar(grid, rng)
        g = band_limited_scalar(grid, rng)
        ratios[i] = product_law_ratio(f, g, grid, s1, s2)
    return ProbeStats(ratios, seed)


def interpolation_ratio(w: np.ndarray, box_h) -> float:
    """||w||_{L^4} / (||w||_{L^2}^(1/2) ||grad w||_{L^2}^(1/2}) for one horizontal slice.

    ``w`` is a real 2D array of lattice samples on a box of sides ``box_h``.
    L^2 norms are spectral; the L^4 integral is taken on a lattice padded to
    twice the resolution so that it is exact for band-limited slices.
    """
    n1, n2 = w.shape
    area = box_h[0] * box_h[1]
    c = sfft.fft2(w) * (np.sqrt(area) / (n1 * n2))
    k1 = np.fft.fftfreq(n1, 1.0 / n1)
    k2 = np.fft.fftfreq(n2, 1.0 / n2)
    k1[n1 // 2] = 0.0
    k2[n2 // 2] = 0.0
    xi1 = 2 * np.pi * k1 / box_h[0]
    xi2 = 2 * np.pi * k2 / box_h[1]
    grad2 = xi1[:, None] ** 2 + xi2[None, :] ** 2
    l2 = np.sqrt(np.sum(np.abs(c) ** 2))
    grad = np.sqrt(np.sum(grad2 * np.abs(c) ** 2))
    padded = (2 * n1, 2 * n2)
    cp = _pad(c, padded)
    wp = sfft.ifft2(cp).real * (padded[0] * padded[1] / np.sqrt(area))
    l4 = (np.sum(wp**4) * area / (padded[0] * padded[1])) ** 0.25
    return float(l4 / np.sqrt(l2 * grad))


def _band_limited_slice(shape, box_h, rng: np.random.Generator) -> np.ndarray:
    """Random real mean-zero 2D coefficients on |xi| <= (2/3) xi_nyq."""
    n1, n2 = shape
    k1 = np.fft.fftfreq(n1, 1.0 / n1)
    k2 = np.fft.fftfreq(n2, 1.0 / n2)
    xi_nyq = min(n1 * np.pi / box_h[0], n2 * np.pi / box_h[1])
    kabs = np.sqrt((2 * np.pi * k1[:, None] / box_h[0]) ** 2 + (2 * np.pi * k2[None, :] / box_h[1]) ** 2)
    support = (kabs <= 2.0 / 3.0 * xi_nyq) & (3 * np.abs(k1)[:, None] < n1) & (3 * np.abs(k2)[None, :] < n2)
    support[0, 0] = False
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * support
    mirrored = np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1))
    return 0.5 * (c + np.conj(mirrored))


def interpolation_probe(trials: int, grid: Grid, seed=None) -> ProbeStats:
    """Ratio statistics over random mean-zero band-limited horizontal slices."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n1, n2 = grid.modes[:2]
    box_h = grid.box[:2]
    ratios = np.empty(trials)
    for i in range(trials):
        c = _band_limited_slice((n1, n2), box_h, rng)
        w = sfft.ifft2(c).real
        ratios[i] = interpolation_ratio(w, box_h)
    return ProbeStats(ratios, seed)
