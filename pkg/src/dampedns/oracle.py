"""Brute-force references for the fast spectral paths.

Nothing here imports the FFT kernels or the grid's cached wavenumber tables:
wavenumbers, lattices and exponentials are rebuilt locally and sums are done
directly, so an agreement between the two routes is informative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, PhysicalVectorField, SpectralVectorField


class OracleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_modes: int = 8**3
    refine_factor: int = 4
    max_quadrature_points: int = 2**21

    def check_modes(self, grid: Grid) -> None:
        n = grid.modes[0] * grid.modes[1] * grid.modes[2]
        if n > self.max_modes:
            raise OracleBudgetError(f"{n} modes exceeds oracle budget of {self.max_modes}")


DEFAULT_BUDGET = OracleBudget()


def _int_wavenumbers(n: int) -> np.ndarray:
    # -N/2+1 .. N/2, in FFT storage order
    return np.array([j if j <= n // 2 else j - n for j in range(n)], dtype=float)


def _mode_table(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Flattened (xi, x) tables in C order: xi has shape (M, 3), x shape (M, 3)."""
    ks, xs = [], []
    for n, L in zip(grid.modes, grid.box):
        ks.append(_int_wavenumbers(n) * (2 * np.pi / L))
        xs.append(np.linspace(0.0, L, n, endpoint=False))
    xi = np.array([(a, b, c) for a in ks[0] for b in ks[1] for c in ks[2]])
    x = np.array([(a, b, c) for a in xs[0] for b in xs[1] for c in xs[2]])
    return xi, x


def naive_dft(f: PhysicalVectorField, budget: OracleBudget = DEFAULT_BUDGET) -> SpectralVectorField:
    """Direct O(N^2) sum  c(xi) = sqrt(V)/N * sum_x f(x) exp(-i xi.x)."""
    grid = f.grid
    budget.check_modes(grid)
    xi, x = _mode_table(grid)
    phase = np.exp(-1j * (xi @ x.T))
    n = len(x)
    weight = np.sqrt(np.prod(grid.box)) / n
    out = np.empty((3, n), dtype=complex)
    for j in range(3):
        out[j] = weight * (phase @ f.samples[j].reshape(-1))
    return SpectralVectorField(grid, out.reshape((3,) + grid.shape))


def naive_idft(f_hat: SpectralVectorField, budget: OracleBudget = DEFAULT_BUDGET) -> PhysicalVectorField:
    """Direct O(N^2) sum  f(x) = 1/sqrt(V) * sum_xi c(xi) exp(i xi.x), real part."""
    grid = f_hat.grid
    budget.check_modes(grid)
    xi, x = _mode_table(grid)
    phase = np.exp(1j * (x @ xi.T))
    weight = 1.0 / np.sqrt(np.prod(grid.box))
    out = np.empty((3, len(x)))
    for j in range(3):
        out[j] = (weight * (phase @ f_hat.coeffs[j].reshape(-1))).real
    return PhysicalVectorField(grid, out.reshape((3,) + grid.shape))


def _retained(grid: Grid) -> list[tuple[tuple[int, int, int], tuple[int, int, int], np.ndarray]]:
    """Retained (2/3 rule) modes as (storage index, integer wavevector, physical wavevector) triples."""
    out = []
    for i in range(grid.modes[0]):
        for j in range(grid.modes[1]):
            for k in range(grid.modes[2]):
                ints = []
                for idx, n in zip((i, j, k), grid.modes):
                    m = idx if idx <= n // 2 else idx - n
                    ints.append(m)
                if all(3 * abs(m) < n for m, n in zip(ints, grid.modes)):
                    xi = np.array([2 * np.pi * m / L for m, L in zip(ints, grid.box)])
                    out.append(((i, j, k), tuple(ints), xi))
    return out


def convolution_nonlinear(
    u_hat: SpectralVectorField, budget: OracleBudget = DEFAULT_BUDGET
) -> SpectralVectorField:
    """Alias-free (u . grad) u on the retained mode set by a direct triad sum.

    ``out_j(m) = V^{-1/2} sum_{p + q = m} sum_l u_l(p) (i q_l) u_j(q)``, with
    ``u`` truncated to the retained modes first. Modes outside the retained
    set are returned as zero.
    """
    grid = u_hat.grid
    budget.check_modes(grid)
    retained = _retained(grid)
    by_ints = {ints: (idx, xi) for idx, ints, xi in retained}
    c = u_hat.coeffs
    out = np.zeros((3,) + grid.shape, dtype=complex)
    norm = 1.0 / np.sqrt(np.prod(grid.box))
    for idx_m, m, _ in retained:
        acc = np.zeros(3, dtype=complex)
        for idx_p, p, _ in retained:
            q = (m[0] - p[0], m[1] - p[1], m[2] - p[2])
            if q not in by_ints:
                continue
            idx_q, xi_q = by_ints[q]
            up = c[(slice(None),) + idx_p]
            uq = c[(slice(None),) + idx_q]
            advect = 1j * (up[0] * xi_q[0] + up[1] * xi_q[1] + up[2] * xi_q[2])
            acc += advect * uq
        out[(slice(None),) + idx_m] = norm * acc
    return SpectralVectorField(grid, out)


def refined_quadrature_norm(
    func,
    grid: Grid,
    p: float,
    refine_factor: int | None = None,
    budget: OracleBudget = DEFAULT_BUDGET,
) -> float:
    """L^p norm of an analytic field ``func(x1, x2, x3) -> (u1, u2, u3)``.

    Sampled on a lattice ``refine_factor`` times finer than ``grid`` per axis;
    ``p = inf`` gives the lattice maximum of the pointwise magnitude.
    """
    r = budget.refine_factor if refine_factor is None else int(refine_factor)
    dims = [n * r for n in grid.modes]
    if dims[0] * dims[1] * dims[2] > budget.max_quadrature_points:
        raise OracleBudgetError(f"refined lattice {dims} exceeds quadrature budget")
    axes = [np.linspace(0.0, L, n, endpoint=False) for n, L in zip(dims, grid.box)]
    x1, x2, x3 = np.meshgrid(*axes, indexing="ij")
    comps = func(x1, x2, x3)
    mag2 = sum(np.broadcast_to(c, x1.shape).astype(float) ** 2 for c in comps)
    mag = np.sqrt(mag2)
    if np.isinf(p):
        return float(mag.max())
    dv = np.prod(grid.box) / (dims[0] * dims[1] * dims[2])
    return float((np.sum(mag**p) * dv) ** (1.0 / p))
