"""Runtime checks of the a-priori estimates along discrete trajectories.

The :class:`EnergyLedger` records every functional entering the energy and
vertical-derivative inequalities; time integrals are accumulated with the
trapezoid rule on the ledger's sample times.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import spectral as sp
from .dynamics import (
    BlowUpError,
    DampingSpec,
    SimulationState,
    SolverConfig,
    _kernel,
    _seed_stream,
)
from .spectral import SpectralVectorField

E = math.e

# (column, meaning). Cumulative columns start with "two_", "alpha", "rhs" or "int_".
LEDGER_COLUMNS = (
    ("t", "time"),
    ("kinetic_L2sq", "||u||_L2^2"),
    ("two_int_grad_h_u_L2sq", "2 nu int_0^t ||grad_h u||_L2^2"),
    ("two_alpha_int_damping_L1", "2 alpha int_0^t D(u): ||log(e+|u|^2)|u|^4||_L1 or ||u||_L(beta+1)^(beta+1)"),
    ("dz_u_L2sq", "||d3 u||_L2^2"),
    ("two_int_grad_h_dz_u_L2sq", "2 nu int_0^t ||grad_h d3 u||_L2^2"),
    ("alpha_int_frac_dz_u2_sq_L1", "alpha int_0^t || |u|^2/(e+|u|^2) |d3|u|^2|^2 ||_L1"),
    ("alpha_int_log_dz_u2_sq_L1", "alpha int_0^t || log(e+|u|^2) |d3|u|^2|^2 ||_L1"),
    ("alpha_int_log_u2_dz_u_sq_L1", "alpha int_0^t || log(e+|u|^2) |u|^2 |d3 u|^2 ||_L1"),
    ("alpha_bm1_int_u_bm3_dz_u2_sq_L1", "alpha (beta-1) int_0^t || |u|^(beta-3) |d3|u|^2|^2 ||_L1"),
    ("two_alpha_int_u_bm1_dz_u2_L1", "2 alpha int_0^t || |u|^(beta-1) d3|u|^2 ||_L1"),
    ("rhs16_int_u2_dz_u2_L1", "16 int_0^t || |u|^2 d3|u|^2 ||_L1 (theorem form)"),
    ("rhs16_int_u_bm1_dz_u2_L1", "16 int_0^t || |u|^(beta-1) d3|u|^2 ||_L1 (proof form)"),
    ("rhs8_int_u2_dz_u2_L1", "8 int_0^t || |u|^2 d3|u|^2 ||_L1 (intermediate line)"),
    ("int_stability_integrand", "int_0^t (||d3 grad_h u||^2 + ||d3 u||^2 + ||grad_h u||^2)"),
    ("u_max_lattice", "max_x |u(x)| on the lattice"),
)
COLUMN_NAMES = tuple(c for c, _ in LEDGER_COLUMNS)
CUMULATIVE = tuple(c for c in COLUMN_NAMES if c.startswith(("two_", "alpha", "rhs", "int_")))
INSTANT = ("kinetic_L2sq", "dz_u_L2sq", "u_max_lattice")


@dataclass
class EnergyLedger:
    """Append-only time series of the inequality terms.

    ``beta`` is the damping exponent used by the beta-dependent columns (3 for
    logarithmic and undamped runs). ``alpha`` is 0 for undamped runs.
    """

    damping_kind: str = "none"
    alpha: float = 0.0
    beta: float = 3.0
    viscosity: float = 1.0
    dt: float = 0.0
    rows: list = field(default_factory=list)
    _prev: dict | None = field(default=None, repr=False)

    @classmethod
    def for_config(cls, cfg: SolverConfig) -> EnergyLedger:
        d = cfg.damping
        return cls(d.kind, d.alpha if d.active else 0.0, d.exponent, cfg.viscosity, cfg.dt)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMN_NAMES:
            raise KeyError(name)
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def append(self, row: dict, integrands: dict) -> None:
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError(f"ledger time must increase: {row['t']} after {self.rows[-1]['t']}")
        self.rows.append(row)
        self._prev = {"t": row["t"], **integrands}

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMN_NAMES)
        for r in self.rows:
            w.writerow([repr(float(r[c])) for c in COLUMN_NAMES])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def read_csv(cls, path, **meta) -> EnergyLedger:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMN_NAMES:
                raise ValueError(f"{path}: unexpected ledger columns")
            rows = [{k: float(v) for k, v in zip(header, line)} for line in reader]
        led = cls(**meta)
        led.rows = rows
        return led

    def resume_state(self) -> dict:
        return {
            "damping_kind": self.damping_kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "viscosity": self.viscosity,
            "dt": self.dt,
            "first_row": dict(self.rows[0]) if self.rows else None,
            "last_row": dict(self.rows[-1]) if self.rows else None,
            "prev": dict(self._prev) if self._prev else None,
        }

    @classmethod
    def from_resume_state(cls, data: dict) -> EnergyLedger:
        led = cls(data["damping_kind"], data["alpha"], data["beta"], data["viscosity"], data["dt"])
        if data.get("last_row"):
            led.rows = [dict(data["last_row"])]
            first = data.get("first_row")
            if first and first["t"] < data["last_row"]["t"]:
                # keeps the reference state of the inequalities when earlier rows are gone
                led.rows.insert(0, dict(first))
            led._prev = dict(data["prev"])
        return led


def _velocity_and_dz(c: np.ndarray, grid):
    both = sp.rfft_inverse(np.concatenate([c, 1j * grid.xi_odd[2][..., : c.shape[-1]] * c]), grid)
    return both[:3], both[3:]


def physical_velocity(c: np.ndarray, grid) -> np.ndarray:
    """Lattice samples of u exactly as the ledger computes them (bitwise)."""
    return _velocity_and_dz(c, grid)[0]


def _terms_half(c: np.ndarray, grid, damping: DampingSpec, viscosity: float):
    w3 = sp.half_weights(grid)
    h = sp.half_width(grid)
    c2 = np.abs(c) ** 2 * w3
    xi_h_sq = grid.xi_h_sq[..., :h]
    xi3 = grid.xi_odd[2][..., :h]
    xi3_sq = xi3**2
    kinetic = float(np.sum(c2))
    grad_h = float(np.sum(xi_h_sq * c2))
    dz = float(np.sum(xi3_sq * c2))
    grad_h_dz = float(np.sum(xi_h_sq * xi3_sq * c2))

    u_x, dzu_x = _velocity_and_dz(c, grid)
    mag2 = u_x[0] * u_x[0] + u_x[1] * u_x[1] + u_x[2] * u_x[2]
    dz_mag2 = 2.0 * (u_x[0] * dzu_x[0] + u_x[1] * dzu_x[1] + u_x[2] * dzu_x[2])
    dzu2 = dzu_x[0] * dzu_x[0] + dzu_x[1] * dzu_x[1] + dzu_x[2] * dzu_x[2]
    dv = grid.cell_volume
    alpha = damping.alpha if damping.active else 0.0
    beta = damping.exponent
    log_term = np.log(E + mag2)
    abs_dz_mag2 = np.abs(dz_mag2)
    u2dz = float(np.sum(mag2 * abs_dz_mag2) * dv)
    # one fractional power serves all beta-dependent columns
    pw_bm3 = np.ones_like(mag2) if beta == 3 else mag2 ** ((beta - 3) / 2)
    pw_bm1 = pw_bm3 * mag2
    pw2 = float(np.sum(pw_bm1 * abs_dz_mag2) * dv)
    dz_mag2_sq = dz_mag2 * dz_mag2
    if damping.kind == "power":
        density = pw_bm1 * mag2
    else:
        density = damping.density(mag2)
    integrands = {
        "two_int_grad_h_u_L2sq": 2.0 * viscosity * grad_h,
        "two_alpha_int_damping_L1": 2.0 * alpha * float(np.sum(density) * dv),
        "two_int_grad_h_dz_u_L2sq": 2.0 * viscosity * grad_h_dz,
        "alpha_int_frac_dz_u2_sq_L1": alpha * float(np.sum(mag2 / (E + mag2) * dz_mag2_sq) * dv),
        "alpha_int_log_dz_u2_sq_L1": alpha * float(np.sum(log_term * dz_mag2_sq) * dv),
        "alpha_int_log_u2_dz_u_sq_L1": alpha * float(np.sum(log_term * mag2 * dzu2) * dv),
        "alpha_bm1_int_u_bm3_dz_u2_sq_L1": alpha * (beta - 1) * float(np.sum(pw_bm3 * dz_mag2_sq) * dv),
        "two_alpha_int_u_bm1_dz_u2_L1": 2.0 * alpha * pw2,
        "rhs16_int_u2_dz_u2_L1": 16.0 * u2dz,
        "rhs16_int_u_bm1_dz_u2_L1": 16.0 * pw2,
        "rhs8_int_u2_dz_u2_L1": 8.0 * u2dz,
        "int_stability_integrand": grad_h_dz + dz + grad_h,
    }
    instant = {
        "kinetic_L2sq": kinetic,
        "dz_u_L2sq": dz,
        "u_max_lattice": float(np.sqrt(mag2.max())),
    }
    return integrands, instant, u_x


def instantaneous_terms(u_hat: SpectralVectorField, damping: DampingSpec, viscosity: float = 1.0) -> dict:
    """Every integrand and instantaneous quantity of the ledger at one time."""
    g = u_hat.grid
    integrands, instant, _ = _terms_half(sp.to_half(np.asarray(u_hat.coeffs), g), g, damping, viscosity)
    return {"integrands": integrands, "instant": instant}


def append_half(t: float, c: np.ndarray, cfg: SolverConfig, ledger: EnergyLedger, return_physical=False):
    if ledger.rows and not t > ledger.rows[-1]["t"]:
        raise ValueError(f"state time {t} does not follow ledger time {ledger.rows[-1]['t']}")
    integrands, instant, u_x = _terms_half(c, cfg.grid, cfg.damping, cfg.viscosity)
    row = {"t": float(t), **instant}
    if ledger.rows:
        last, prev = ledger.rows[-1], ledger._prev
        h = t - prev["t"]
        for name in CUMULATIVE:
            row[name] = last[name] + 0.5 * h * (prev[name] + integrands[name])
    else:
        for name in CUMULATIVE:
            row[name] = 0.0
    ledger.append(row, integrands)
    return (row, u_x) if return_physical else row


def ledger_append(state: SimulationState, cfg: SolverConfig, ledger: EnergyLedger) -> dict:
    """Evaluate the functionals at ``state`` and append one trapezoid-accumulated row."""
    return append_half(state.t, sp.to_half(np.asarray(state.u_hat.coeffs), cfg.grid), cfg, ledger)


# reports


@dataclass
class CheckReport:
    name: str
    passed: bool
    max_defect: float
    worst_time: float
    tolerance: float
    status: str = ""
    details: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict, repr=False)

    def to_text(self) -> str:
        lines = [
            f"check: {self.name}",
            f"result: {'pass' if self.passed else 'fail'}",
            f"max_defect: {self.max_defect:.6e}",
            f"worst_time: {self.worst_time:.6g}",
            f"tolerance: {self.tolerance:.6e}",
        ]
        if self.status:
            lines.append(f"status: {self.status}")
        for k, v in self.details.items():
            lines.append(f"{k}: {v}")
        return "\n".join(lines) + "\n"


def default_tolerance(t: np.ndarray, dt: float, scale: float) -> np.ndarray:
    """max(1e-8, 10 dt^2 t scale), the discretization-order budget."""
    return np.maximum(1e-8, 10.0 * dt**2 * t * scale)


_MODES = {"theorem1.1": "power", "theorem1.2": "log"}


def energy_defect(ledger: EnergyLedger) -> np.ndarray:
    """LHS(t) - ||u0||^2 of the energy inequality, per ledger row."""
    lhs = (ledger.column("kinetic_L2sq") + ledger.column("two_int_grad_h_u_L2sq")
           + ledger.column("two_alpha_int_damping_L1"))
    return lhs - ledger.rows[0]["kinetic_L2sq"]


def check_energy_inequality(ledger: EnergyLedger, mode: str = "theorem1.2", tolerance=None) -> CheckReport:
    """||u||^2 + 2 int ||grad_h u||^2 + 2 alpha int D(u) <= ||u0||^2 along the ledger.

    ``mode`` names the damping family (``theorem1.1`` power law, ``theorem1.2``
    logarithmic) and must agree with the ledger unless the run was undamped.
    ``tolerance`` is an absolute bound; by default the per-row budget of
    :func:`default_tolerance`.
    """
    if not ledger.rows:
        raise ValueError("empty ledger")
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {tuple(_MODES)}")
    if ledger.damping_kind not in ("none", _MODES[mode]):
        raise ValueError(f"{mode} does not apply to a {ledger.damping_kind!r}-damped ledger")
    t = ledger.t
    defect = energy_defect(ledger)
    scale = ledger.rows[0]["kinetic_L2sq"]
    tol = default_tolerance(t, ledger.dt, scale) if tolerance is None else np.full_like(t, tolerance)
    k = int(np.argmax(defect - tol))
    worst = int(np.argmax(defect))
    passed = bool(np.all(defect <= tol))
    return CheckReport(
        f"energy_inequality[{mode}]",
        passed,
        float(defect[worst]),
        float(t[worst]),
        float(tol[k]),
        details={"max_abs_defect": float(np.max(np.abs(defect))), "initial_energy": scale},
        series={"t": t, "defect": defect},
    )


@dataclass(frozen=True)
class BAlpha:
    """Growth rate of the vertical-derivative envelope, both published forms."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def theorem_variant(self) -> float:
        return math.exp(3.0 / self.alpha) - E

    @property
    def proof_variant(self) -> float:
        return max(math.exp(3.0 / (2.0 * self.alpha)) - E, 0.0)

    def value(self, choice: str = "max") -> float:
        if choice == "theorem":
            return self.theorem_variant
        if choice == "proof":
            return self.proof_variant
        if choice == "max":
            return max(self.theorem_variant, self.proof_variant, 0.0)
        raise ValueError(f"unknown b_alpha variant {choice!r}")

    def threshold_sq(self, exponent: str = "theorem") -> float:
        """|u|^2 level where alpha log(e + |u|^2) reaches 3 (``theorem``) or 3/2 (``proof``)."""
        target = 3.0 if exponent == "theorem" else 1.5
        return math.exp(target / self.alpha) - E

    def absorbing_set(self, mag2: np.ndarray, exponent: str = "theorem") -> np.ndarray:
        """Points where the damping dominates the stretching bound (the set A_t)."""
        target = 3.0 if exponent == "theorem" else 1.5
        return self.alpha * np.log(E + mag2) - target >= 0


def dz_lhs(ledger: EnergyLedger) -> np.ndarray:
    lhs = ledger.column("dz_u_L2sq") + ledger.column("two_int_grad_h_dz_u_L2sq")
    if ledger.damping_kind == "power":
        lhs = lhs + ledger.column("alpha_bm1_int_u_bm3_dz_u2_sq_L1") + ledger.column("two_alpha_int_u_bm1_dz_u2_L1")
    else:
        lhs = (lhs + ledger.column("alpha_int_frac_dz_u2_sq_L1") + ledger.column("alpha_int_log_dz_u2_sq_L1")
               + ledger.column("alpha_int_log_u2_dz_u_sq_L1"))
    return lhs


def check_dz_inequality(ledger: EnergyLedger, b: BAlpha, variant_choice: str = "max", tolerance=None) -> CheckReport:
    """Vertical-derivative estimate against the envelope ||d3 u0||^2 exp(b t)."""
    if not ledger.rows:
        raise ValueError("empty ledger")
    t = ledger.t
    rate = b.value(variant_choice)
    dz0 = ledger.rows[0]["dz_u_L2sq"]
    envelope = dz0 * np.exp(rate * t)
    lhs = dz_lhs(ledger)
    margin = envelope - lhs
    tol = default_tolerance(t, ledger.dt, dz0) if tolerance is None else np.full_like(t, tolerance)
    worst = int(np.argmin(margin))
    return CheckReport(
        f"dz_envelope[{variant_choice}]",
        bool(np.all(margin >= -tol)),
        float(-margin[worst]),
        float(t[worst]),
        float(tol[worst]),
        details={
            "b_used": rate,
            "b_theorem": b.theorem_variant,
            "b_proof": b.proof_variant,
            "min_margin": float(margin[worst]),
        },
        series={"t": t, "margin": margin, "envelope": envelope, "lhs": lhs},
    )


def dz_candidates_report(ledger: EnergyLedger) -> dict:
    """Margins of the power-law vertical estimate against each published right-hand side.

    The three candidate right-hand sides disagree in their constants and
    integrands; each margin is reported, none is asserted.
    """
    lhs = dz_lhs(ledger)
    dz0 = ledger.rows[0]["dz_u_L2sq"]
    out = {}
    for name in ("rhs16_int_u2_dz_u2_L1", "rhs16_int_u_bm1_dz_u2_L1", "rhs8_int_u2_dz_u2_L1"):
        out[name] = float(np.min(dz0 + ledger.column(name) - lhs))
    return out


def decay_function_check(ledger: EnergyLedger, b: BAlpha, variant_choice: str = "max", tolerance=None) -> CheckReport:
    """t -> exp(-b t) ||d3 u(t)||^2 must be non-increasing between ledger rows."""
    if not ledger.rows:
        raise ValueError("empty ledger")
    t = ledger.t
    rate = b.value(variant_choice)
    f = np.exp(-rate * t) * ledger.column("dz_u_L2sq")
    inc = np.diff(f)
    dz0 = ledger.rows[0]["dz_u_L2sq"]
    if tolerance is None:
        tol = float(max(1e-8, 10.0 * ledger.dt**2 * dz0))
    else:
        tol = float(tolerance)
    if len(inc) == 0:
        return CheckReport(f"decay_function[{variant_choice}]", True, 0.0, float(t[0]), tol,
                           details={"b_used": rate}, series={"t": t, "f": f})
    k = int(np.argmax(inc))
    return CheckReport(
        f"decay_function[{variant_choice}]",
        bool(inc[k] <= tol),
        float(inc[k]),
        float(t[k + 1]),
        tol,
        details={"b_used": rate},
        series={"t": t, "f": f},
    )


# Gronwall


@dataclass
class GronwallInput:
    t: np.ndarray
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    A: float

    def __post_init__(self):
        self.t, self.f, self.g, self.h = (np.asarray(a, dtype=float) for a in (self.t, self.f, self.g, self.h))
        n = len(self.t)
        if any(len(a) != n for a in (self.f, self.g, self.h)):
            raise ValueError("f, g, h must share the time grid")
        if n < 1 or np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if self.A < 0 or np.any(self.f < 0) or np.any(self.g < 0) or np.any(self.h < 0):
            raise ValueError("Gronwall data must be nonnegative")


def gronwall_envelope(data: GronwallInput, tolerance: float | None = None) -> CheckReport:
    """Check f + int g <= A + int h f, then f + int g <= A exp(int h).

    If the hypothesis fails numerically the status is ``hypothesis violated``
    and the conclusion is not held against the lemma.
    """
    tol = 1e-6 * max(data.A, 1.0) if tolerance is None else tolerance
    t = data.t
    int_g = cumulative_trapezoid(data.g, t, initial=0.0)
    int_h = cumulative_trapezoid(data.h, t, initial=0.0)
    int_hf = cumulative_trapezoid(data.h * data.f, t, initial=0.0)
    lhs = data.f + int_g
    hypothesis_gap = lhs - (data.A + int_hf)
    envelope = data.A * np.exp(int_h)
    conclusion_gap = lhs - envelope
    hyp_ok = bool(np.all(hypothesis_gap <= tol))
    con_ok = bool(np.all(conclusion_gap <= tol))
    if not hyp_ok:
        status = "hypothesis violated"
    elif not con_ok:
        status = "lemma violated"
    else:
        status = "ok"
    k = int(np.argmax(conclusion_gap))
    return CheckReport(
        "gronwall",
        hyp_ok and con_ok,
        float(conclusion_gap[k]),
        float(t[k]),
        float(tol),
        status=status,
        details={
            "max_hypothesis_gap": float(np.max(hypothesis_gap)),
            "max_equality_defect": float(np.max(np.abs(conclusion_gap))),
        },
        series={"t": t, "envelope": envelope, "lhs": lhs},
    )


# monotonicity of the logarithmic damping


def log_damping_vector(x: np.ndarray) -> np.ndarray:
    """log(e + |x|^2) |x|^2 x, rows of ``x`` are points."""
    n2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.log(E + n2) * n2 * x


def monotonicity_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sum((log_damping_vector(x) - log_damping_vector(y)) * (x - y), axis=-1)


def _sample_pairs(dimension: int, trials: int, rng: np.random.Generator):
    d = dimension
    parts = np.array_split(np.arange(trials), 5)
    xs, ys = [], []

    def ball(n, radius):
        v = rng.standard_normal((n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = rng.random((n, 1)) ** (1.0 / d)
        return v * r * radius

    # uniform in balls of mixed radius
    n = len(parts[0])
    radius = 10.0 ** rng.uniform(-3, 3, (n, 1))
    xs.append(ball(n, radius))
    ys.append(ball(n, radius))
    # heavy-tailed, magnitudes spread over many decades
    n = len(parts[1])
    scale = np.minimum(np.abs(rng.standard_cauchy((n, 2))), 1e12)
    xs.append(rng.standard_normal((n, d)) * scale[:, :1])
    ys.append(rng.standard_normal((n, d)) * scale[:, 1:])
    # near-collinear: y = (1 + s) x plus a tiny transverse kick
    n = len(parts[2])
    x = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-3, 3, (n, 1))
    s = rng.uniform(-2.5, 1.5, (n, 1))
    ys.append((1 + s) * x + 1e-9 * np.linalg.norm(x, axis=1, keepdims=True) * rng.standard_normal((n, d)))
    xs.append(x)
    # x close to y
    n = len(parts[3])
    x = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-3, 3, (n, 1))
    eps = 10.0 ** rng.uniform(-12, -2, (n, 1))
    xs.append(x)
    ys.append(x + eps * np.linalg.norm(x, axis=1, keepdims=True) * rng.standard_normal((n, d)))
    # |x| and |y| nearly equal, arbitrary directions
    n = len(parts[4])
    x = rng.standard_normal((n, d))
    y = rng.standard_normal((n, d))
    y *= np.linalg.norm(x, axis=1, keepdims=True) / np.linalg.norm(y, axis=1, keepdims=True)
    y *= 1 + 1e-6 * rng.standard_normal((n, 1))
    r = 10.0 ** rng.uniform(-3, 3, (n, 1))
    xs.append(x * r)
    ys.append(y * r)
    return np.concatenate(xs), np.concatenate(ys)


@dataclass
class MonotonicityReport:
    dimension: int
    trials: int
    min_inner: float
    min_normalized: float
    worst_pair: tuple

    @property
    def passed(self) -> bool:
        return self.min_normalized >= -1e-12


def monotonicity_check(dimension: int, trials: int, seed=None, pairs=None) -> MonotonicityReport:
    """Sample <a(x)x - a(y)y, x - y> with a(z) = log(e+|z|^2)|z|^2 over mixed-scale pairs.

    ``min_normalized`` divides by max(|x|, |y|)^4. ``pairs`` overrides the
    sampler with explicit ``(x, y)`` arrays.
    """
    if dimension not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if pairs is None:
        x, y = _sample_pairs(dimension, trials, np.random.default_rng(seed))
    else:
        x, y = (np.asarray(a, dtype=float).reshape(-1, dimension) for a in pairs)
    inner = monotonicity_inner(x, y)
    scale = np.maximum(np.linalg.norm(x, axis=1), np.linalg.norm(y, axis=1)) ** 4
    with np.errstate(invalid="ignore", divide="ignore"):
        normalized = np.where(scale > 0, inner / scale, 0.0)
    k = int(np.argmin(normalized))
    return MonotonicityReport(dimension, len(x), float(inner.min()), float(normalized[k]), (x[k], y[k]))


# two-trajectory stability


@dataclass
class StabilityReport:
    t: np.ndarray
    w_sq: np.ndarray
    ratio: np.ndarray
    fitted_exponent: float
    integrand_cum: np.ndarray
    c: float
    aborted: bool = False

    @property
    def analytic_bound(self) -> np.ndarray:
        """exp(c int_0^t (||d3 grad_h u||^2 + ||d3 u||^2 + ||grad_h u||^2))."""
        return np.exp(self.c * self.integrand_cum)

    @property
    def analytic_bound_ok(self) -> bool:
        return bool(np.all(self.ratio <= self.analytic_bound))

    def fitted_bound_ok(self, slack: float = 1.05) -> bool:
        return bool(np.all(self.ratio <= np.exp(self.fitted_exponent * self.t) * slack))


class StabilityAbort(RuntimeError):
    def __init__(self, report: StabilityReport, cause: Exception):
        self.report = report
        super().__init__(f"stability probe aborted: {cause}")


def fit_exponent(t: np.ndarray, ratio: np.ndarray) -> float:
    """Least-squares c in log(ratio) = c t (through the origin), over t > 0."""
    mask = (t > 0) & (ratio > 0)
    if not np.any(mask):
        return 0.0
    tt = t[mask]
    return float(np.sum(tt * np.log(ratio[mask])) / np.sum(tt * tt))


def stability_integrand(c: np.ndarray, grid) -> float:
    """||d3 grad_h u||^2 + ||d3 u||^2 + ||grad_h u||^2 from half-spectrum coefficients."""
    h = sp.half_width(grid)
    c2 = np.abs(c) ** 2 * sp.half_weights(grid)
    xi3 = grid.xi_odd[2][..., :h] ** 2
    xh = grid.xi_h_sq[..., :h]
    return float(np.sum((xh * xi3 + xi3 + xh) * c2))


def stability_probe(cfg: SolverConfig, epsilon: float, seed=None, c: float = 1.0) -> StabilityReport:
    """Run u from the IC and v from IC + epsilon * (unit random divergence-free field).

    The perturbation is drawn from the ``probe`` sub-stream of ``seed``
    (default: the config seed). Samples every ``cfg.output_every`` steps.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    seed = cfg.seed if seed is None else seed
    g = cfg.grid
    u0 = sp.to_half(np.asarray(cfg.initial_field().coeffs), g)
    rng = np.random.default_rng(_seed_stream(seed, "probe"))
    delta = np.stack([sp.band_limited_scalar(g, rng) for _ in range(3)])
    delta = sp.leray_array(delta, g)
    if cfg.cutoff_R is not None:
        delta = delta * (g.xi_abs < cfg.cutoff_R)
    delta = sp.to_half(delta / np.sqrt(np.sum(np.abs(delta) ** 2)), g)
    v0 = u0 + epsilon * delta

    kernel = _kernel(cfg)
    w3 = sp.half_weights(g)
    times, w_sq, integ = [0.0], [float(np.sum(w3 * np.abs(u0 - v0) ** 2))], [0.0]
    prev_int = stability_integrand(u0, g)
    u, v = u0, v0
    n_total = cfg.n_steps
    t_prev = 0.0

    def report(aborted=False):
        t = np.array(times)
        ws = np.array(w_sq)
        ratio = ws / ws[0] if ws[0] > 0 else np.zeros_like(ws)
        return StabilityReport(t, ws, ratio, fit_exponent(t, ratio), np.array(integ), c, aborted)

    try:
        for n in range(1, n_total + 1):
            u = kernel.step(u)
            v = kernel.step(v)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise BlowUpError(n, n * cfg.dt, ())
            if n % cfg.output_every == 0 or n == n_total:
                t = n * cfg.dt
                cur = stability_integrand(u, g)
                integ.append(integ[-1] + 0.5 * (t - t_prev) * (prev_int + cur))
                prev_int, t_prev = cur, t
                times.append(t)
                w_sq.append(float(np.sum(w3 * np.abs(u - v) ** 2)))
    except BlowUpError as exc:
        raise StabilityAbort(report(aborted=True), exc) from exc
    return report()
