"""Property and oracle suites behind ``dampedns verify``.

Each suite returns a list of :class:`SuiteCheck` rows. A row passes when its
measured value is within tolerance; ``margin`` is value / tolerance, so rows
sort worst-first by it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import oracle
from . import spectral as sp
from .diagnostics import monotonicity_check
from .dynamics import InitialCondition, make_initial_condition, nonlinear_term
from .norms import (
    h01_norm,
    interpolation_probe,
    lebesgue_norm,
    mixed_norm,
    product_law_probe,
    sobolev_norm,
)
from .spectral import Grid, PhysicalVectorField, SpectralVectorField


@dataclass
class SuiteCheck:
    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool
    seconds: float = 0.0
    note: str = ""

    @property
    def margin(self) -> float:
        if not self.passed:
            return np.inf
        return self.value / self.tolerance if self.tolerance > 0 else 0.0


def _row(suite, name, value, tol, started, note="", passed=None):
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return SuiteCheck(suite, name, value, float(tol), ok, time.perf_counter() - started, note)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.finfo(float).tiny))


# projectors


def projector_suite(fields: int = 1000, n: int = 16, seed: int = 0, tol: float = 1e-13) -> list[SuiteCheck]:
    """Leray and Friedrichs identities over ``fields`` random fields on n^3."""
    grid = Grid.cube(n)
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    idem = div = grad = cut_idem = cut_comm = 0.0
    R = 0.5 * grid.xi_max
    for _ in range(fields):
        f = sp.random_field(grid, rng)
        norm = f.l2_norm()
        p = sp.leray_project(f)
        pp = sp.leray_project(p)
        idem = max(idem, (pp - p).l2_norm() / norm)
        div = max(div, p.divergence_defect())
        # gradient field: grad of a random scalar
        phi = sp.band_limited_scalar(grid, rng)
        g = SpectralVectorField(grid, 1j * grid.xi_odd * phi[None])
        grad = max(grad, sp.leray_project(g).l2_norm() / g.l2_norm())
        j = sp.friedrichs_cutoff(f, R)
        cut_idem = max(cut_idem, (sp.friedrichs_cutoff(j, R) - j).l2_norm() / norm)
        a = sp.friedrichs_cutoff(sp.leray_project(f), R)
        b = sp.leray_project(sp.friedrichs_cutoff(f, R))
        c = sp.friedrichs_cutoff(sp.derivative(f, 3), R)
        d = sp.derivative(sp.friedrichs_cutoff(f, R), 3)
        cut_comm = max(cut_comm, (a - b).l2_norm() / norm, (c - d).l2_norm() / max(sp.derivative(f, 3).l2_norm(), 1e-300))
    s = "projectors"
    return [
        _row(s, "leray_idempotence", idem, tol, start),
        _row(s, "leray_divergence", div, tol, start),
        _row(s, "leray_kills_gradients", grad, tol, start),
        _row(s, "cutoff_idempotence", cut_idem, tol, start),
        _row(s, "cutoff_commutes", cut_comm, tol, start),
    ]


# oracle


def _retained_mask(grid: Grid) -> np.ndarray:
    return grid.dealias_mask


def oracle_suite(n: int = 8, random_fields: int = 20, seed: int = 0, tol: float = 1e-12,
                 neutrality_tol: float = 1e-11) -> list[SuiteCheck]:
    """Fast transforms and dealiased nonlinearity against direct sums."""
    grid = Grid.cube(n)
    start = time.perf_counter()
    fields = [make_initial_condition(InitialCondition("taylor_green"), grid)]
    fields += [sp.random_divergence_free(grid, seed + k) for k in range(random_fields)]
    dft = idft = nl = neutral = 0.0
    mask = _retained_mask(grid)
    for u in fields:
        phys = sp.inverse_transform(u)
        dft = max(dft, _rel(sp.forward_transform(phys).coeffs, oracle.naive_dft(phys).coeffs))
        idft = max(idft, _rel(phys.samples, oracle.naive_idft(u).samples))
        fast = nonlinear_term(u).coeffs
        ref = oracle.convolution_nonlinear(u).coeffs
        nl = max(nl, _rel(fast * mask, ref))
        ud = u.coeffs * mask
        inner = abs(np.sum(fast * np.conj(ud)).real)
        neutral = max(neutral, inner / max(np.sqrt(np.sum(np.abs(ud) ** 2)) ** 3, 1e-300))
    s = "oracle"
    return [
        _row(s, "forward_vs_naive_dft", dft, tol, start),
        _row(s, "inverse_vs_naive_idft", idft, tol, start),
        _row(s, "nonlinear_vs_convolution", nl, tol, start),
        _row(s, "energy_neutrality", neutral, neutrality_tol, start),
    ]


# monotonicity


def monotonicity_suite(trials: int = 10**6, seed: int = 0, tol: float = 1e-12) -> list[SuiteCheck]:
    out = []
    for d in (1, 2, 3):
        start = time.perf_counter()
        rep = monotonicity_check(d, trials, seed=[seed, d])
        out.append(_row("monotonicity", f"min_normalized_inner_d{d}", -rep.min_normalized, tol, start,
                        note=f"min inner product {rep.min_inner:.3e} over {rep.trials} pairs"))
    return out


# norms


def norms_suite(n: int = 16, seed: int = 0, tol: float = 1e-12) -> list[SuiteCheck]:
    """Norm functionals against closed forms and refined quadrature."""
    grid = Grid.cube(n)
    s = "norms"
    out = []
    start = time.perf_counter()

    def sin_mode(x1, x2, x3):
        z = np.zeros_like(x1)
        return (np.sin(x3), z, z)

    f = PhysicalVectorField.from_function(grid, sin_mode)
    for p in (2.0, 4.0):
        ref = oracle.refined_quadrature_norm(sin_mode, grid, p)
        out.append(_row(s, f"lebesgue_p{p:g}_vs_refined", abs(lebesgue_norm(f, p) / ref - 1), tol, start))
    f_hat = sp.forward_transform(f)
    out.append(_row(s, "parseval", abs(f_hat.l2_norm() / lebesgue_norm(f, 2) - 1), tol, start))
    out.append(_row(s, "sobolev_single_mode",
                    abs(sobolev_norm(f_hat, 1.5) / f_hat.l2_norm() - 1.0), tol, start))
    out.append(_row(s, "h01_single_mode", abs(h01_norm(f_hat) / (np.sqrt(2) * f_hat.l2_norm()) - 1), tol, start))
    out.append(_row(s, "mixed_2_2_equals_l2", abs(mixed_norm(f, 2, 2) / lebesgue_norm(f, 2) - 1), tol, start))

    # probe ratios are scale invariant in each factor
    rng = np.random.default_rng(seed)
    from .norms import product_law_ratio
    a = sp.band_limited_scalar(grid, rng)
    b = sp.band_limited_scalar(grid, rng)
    r1 = product_law_ratio(a, b, grid, 0.5, 0.5)
    r2 = product_law_ratio(3.0 * a, 0.25 * b, grid, 0.5, 0.5)
    out.append(_row(s, "product_law_homogeneity", abs(r2 / r1 - 1), 1e-10, start))
    stats = product_law_probe(0.5, 0.5, 20, grid, seed)
    out.append(_row(s, "product_law_probe_finite", 0.0, 1.0, start, passed=np.all(np.isfinite(stats.ratios)),
                    note=f"max ratio {stats.max:.4f}"))
    istats = interpolation_probe(20, grid, seed)
    out.append(_row(s, "interpolation_probe_finite", 0.0, 1.0, start, passed=np.all(np.isfinite(istats.ratios)),
                    note=f"max ratio {istats.max:.4f}"))
    return out


SUITES = {
    "norms": norms_suite,
    "projectors": projector_suite,
    "monotonicity": monotonicity_suite,
    "oracle": oracle_suite,
}


def run_suite(name: str, seed: int = 0) -> list[SuiteCheck]:
    if name == "all":
        rows = [r for key in SUITES for r in SUITES[key](seed=seed)]
        return sorted(rows, key=lambda r: (r.passed, -r.margin))
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](seed=seed)


def format_table(rows: list[SuiteCheck]) -> str:
    lines = [f"{'suite':<13} {'check':<34} {'value':>11} {'tolerance':>10}  result"]
    for r in rows:
        line = f"{r.suite:<13} {r.name:<34} {r.value:>11.3e} {r.tolerance:>10.1e}  {'pass' if r.passed else 'FAIL'}"
        if r.note:
            line += f"  ({r.note})"
        lines.append(line)
    return "\n".join(lines)
