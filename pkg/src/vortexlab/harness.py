"""Decay-rate experiments: fits, reports, and the experiment registry.

Every experiment produces `ExperimentReport` rows whose predicted exponents
come from one formula table keyed by (estimate, p, |sigma|), never from
per-case constants.  Raw (t, value) series are kept alongside for export.

Report pass semantics (`mode`):
  "match"     |fitted - predicted| <= tolerance   (two-sided rate statements)
  "bound"     fitted <= predicted + tolerance     (one-sided upper bounds)
  "positive"  fitted > 0 with a reliable fit      (exponential-decay rate b)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    artificial_entry_fields,
    artificial_symbol,
    artificial_symbol_grid,
    default_cutoff,
    generator_block,
    heat_leray_kernel_norms,
    heat_symbol_grid,
    pointwise_bound_report,
    s_symbol,
    s_symbol_grid,
    spar_symbol,
    spar_symbol_grid,
    split,
    wave_symbol,
)
from .profiles import (
    FluidParams,
    biot_savart,
    dipole_vorticity_field,
    first_moments_beta,
    oseen_vorticity_field,
    profile_superposition,
    vorticity_of,
)
from .solver import SolverConfig, scaled_params, simulate, vorticity_simulate
from .spectral import (
    Grid,
    SpectralField,
    State,
    derivative,
    gradient,
    leray_decompose,
    lp_norm,
    lp_norm_state,
    lp_norm_vector,
    make_grid,
    sample,
    transform,
)


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rate series and fitting


@dataclass(frozen=True)
class RateSeries:
    """Positive samples (t, value) on a strictly increasing time grid."""

    t: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.t) < 6:
            raise HarnessError(f"rate series needs >= 6 samples, got {len(self.t)}")
        if len(self.t) != len(self.values):
            raise HarnessError("times and values differ in length")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise HarnessError("rate series times must be strictly increasing")
        if any(not v > 0 for v in self.values):
            raise HarnessError("rate series values must be positive")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float

    @property
    def reliable(self) -> bool:
        return self.r2 >= 0.98


def fit_rate(series: RateSeries, log_correction: bool = False) -> FitResult:
    """Least-squares slope in log t - log value coordinates.

    With log_correction the values are divided by ln(1+t) first, matching
    logarithmic envelopes.
    """
    t = np.asarray(series.t)
    v = np.asarray(series.values)
    if log_correction:
        v = v / np.log1p(t)
    x = np.log(t)
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return FitResult(float(slope), float(intercept), r2)


def window(t, values, t_min, t_max) -> RateSeries:
    """Restrict raw samples to a fit window."""
    t = np.asarray(t)
    values = np.asarray(values)
    keep = (t >= t_min - 1e-12) & (t <= t_max + 1e-12)
    return RateSeries(tuple(t[keep]), tuple(values[keep]))


# ---------------------------------------------------------------------------
# predicted exponents: one formula table


_EXPONENT_FORMULAS = {
    # L^p decay of the low-frequency curl-free kernel applied to data
    "lf_kernel": lambda p, s: -(1.0 - 1.0 / p + s / 2.0),
    # L^p decay of the artificial-viscosity kernel (wave * heat)
    "artificial_kernel": lambda p, s: -(1.25 - 1.5 / p + s / 2.0),
    # improvement of the artificial kernel over the true low-frequency part
    "kernel_difference": lambda p, s: -(1.0 - 1.0 / p + s / 2.0 + 0.5),
    # derived heat-Leray kernel norms
    "heat_leray": lambda p, s: -(1.0 - 1.0 / p + s / 2.0),
    # heat flow of divergence-free data with (1+|x|) rot m integrable
    "heat_dipole_data": lambda p, s: -(1.0 - 1.0 / p + s / 2.0),
    # heat flow of data with vanishing circulation and first moments
    "heat_second_moment_data": lambda p, s: -(1.0 - 1.0 / p + s / 2.0 + 0.5),
    # sound (curl-free) part of the nonlinear solution
    "sound_part": lambda p, s: -(1.25 - 1.5 / p + s / 2.0),
    # difference between the solution and the linear evolution, p >= 2
    "nonlinear_correction": lambda p, s: -(1.0 - 1.0 / p + s / 2.0 + 0.5),
    # weights of the profile-convergence statements
    "incompressible_weight": lambda p, s: 1.0 - 1.0 / p + s / 2.0,
    "dipole_weight": lambda p, s: 1.5 - 1.0 / p + s / 2.0,
}


def predicted_exponent(estimate: str, p: float, sigma: int) -> float:
    """Exponent of the named estimate at Lebesgue index p and |sigma|."""
    try:
        formula = _EXPONENT_FORMULAS[estimate]
    except KeyError:
        raise HarnessError(f"unknown estimate {estimate!r}") from None
    return formula(float(p), int(sigma))


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    label: str
    predicted: float
    fitted: float
    tolerance: float
    p: float | None = None
    sigma: int | None = None
    r2: float | None = None
    mode: str = "match"
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.fitted):
            return False
        if self.mode == "match":
            return bool(abs(self.fitted - self.predicted) <= self.tolerance)
        if self.mode == "bound":
            return bool(self.fitted <= self.predicted + self.tolerance)
        if self.mode == "positive":
            return bool(self.fitted > 0 and (self.r2 is None or self.r2 >= 0.98))
        raise HarnessError(f"unknown report mode {self.mode!r}")


@dataclass(frozen=True)
class ExperimentResult:
    name: str
    reports: tuple[ExperimentReport, ...]
    series: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


@dataclass(frozen=True)
class ExperimentContext:
    """Common knobs shared by all experiments."""

    grid: Grid
    params: FluidParams
    epsilon: float = 1e-2
    T: float = 30.0
    dt: float | None = None
    seed: int = 0
    threads: int = 1

    @staticmethod
    def default() -> "ExperimentContext":
        return ExperimentContext(grid=make_grid(256, 200.0), params=FluidParams())


def _rate_report(
    experiment,
    label,
    estimate,
    p,
    sigma,
    series: RateSeries,
    tolerance,
    mode="match",
    allow_log=False,
):
    """Fit a series against the formula table, optionally with a log envelope."""
    predicted = predicted_exponent(estimate, p, sigma)
    fit = fit_rate(series)
    used_log = False
    if allow_log and abs(fit.slope - predicted) > tolerance:
        logfit = fit_rate(series, log_correction=True)
        if abs(logfit.slope - predicted) < abs(fit.slope - predicted):
            fit = logfit
            used_log = True
    return ExperimentReport(
        experiment=experiment,
        label=label,
        predicted=predicted,
        fitted=fit.slope,
        tolerance=tolerance,
        p=p,
        sigma=sigma,
        r2=fit.r2,
        mode=mode,
        meta={"log_envelope": used_log},
    )


def _state_norm_fields(X: State, sigma: int, p: float) -> float:
    if sigma == 0:
        return lp_norm_state(X, p)
    dX = State(
        derivative(X.rho, (sigma, 0)),
        (derivative(X.m[0], (sigma, 0)), derivative(X.m[1], (sigma, 0))),
    )
    return lp_norm_state(dX, p)


def _hermitian_random_state(grid: Grid, rng) -> State:
    def one():
        raw = rng.standard_normal((grid.n, grid.n))
        f = transform(raw, grid)
        return SpectralField(grid, f.coeffs * np.exp(-0.05 * grid.eta_sq))

    return State(one(), (one(), one()))


# ---------------------------------------------------------------------------
# experiment: kernel algebra


def run_kernel_algebra(ctx: ExperimentContext) -> ExperimentResult:
    """Exact-identity suite: semigroup, generator, projectors, splitting."""
    name = "kernel-algebra"
    params = scaled_params(ctx.params)
    rng = np.random.default_rng(ctx.seed)
    reports = []

    builders = {
        "spar": spar_symbol,
        "s": s_symbol,
        "artificial-par": lambda t, e, p: artificial_symbol(t, e, p, False),
        "artificial": lambda t, e, p: artificial_symbol(t, e, p, True),
        "wave": wave_symbol,
    }
    for label, builder in builders.items():
        worst = 0.0
        for _ in range(100):
            eta = rng.uniform(-5, 5, size=2)
            t, s = rng.uniform(0.05, 2.0, size=2)
            prod = builder(t, eta, params) @ builder(s, eta, params)
            direct = builder(t + s, eta, params)
            scale = max(np.abs(direct).max(), 1e-300)
            worst = max(worst, float(np.abs(prod - direct).max() / scale))
        reports.append(
            ExperimentReport(name, f"semigroup-{label}", 0.0, worst, 1e-10, mode="bound")
        )

    # heat semigroup on a small grid
    small = make_grid(64, ctx.grid.L / 4)
    Xr = _hermitian_random_state(small, rng)
    a = heat_symbol_grid(0.6, small, params.mu).apply(
        heat_symbol_grid(0.9, small, params.mu).apply(Xr)
    )
    b = heat_symbol_grid(1.5, small, params.mu).apply(Xr)
    dev = max(
        np.abs((ca - cb).coeffs).max() / max(np.abs(cb.coeffs).max(), 1e-300)
        for ca, cb in zip(a.components(), b.components())
    )
    reports.append(ExperimentReport(name, "semigroup-heat", 0.0, float(dev), 1e-10, mode="bound"))

    for kind, builder in (("spar", spar_symbol), ("s", s_symbol)):
        worst = 0.0
        dt = 1e-6
        for _ in range(50):
            eta = rng.uniform(-2, 2, size=2)
            fd = (builder(dt, eta, params) - np.eye(3)) / dt
            gen = generator_block(kind, eta, params)
            worst = max(worst, float(np.abs(fd - gen).max() / max(np.abs(gen).max(), 1.0)))
        reports.append(
            ExperimentReport(name, f"generator-{kind}", 0.0, worst, 1e-5, mode="bound")
        )

    worst_idem = 0.0
    worst_orth = 0.0
    for _ in range(100):
        m = (_hermitian_random_state(small, rng).rho, _hermitian_random_state(small, rng).rho)
        perp, par = leray_decompose(m)
        perp2, par2 = leray_decompose(perp)
        scale = max(np.abs(m[0].coeffs).max(), np.abs(m[1].coeffs).max(), 1e-300)
        worst_idem = max(
            worst_idem,
            float(np.abs((perp2[0] - perp[0]).coeffs).max() / scale),
            float(np.abs((perp2[1] - perp[1]).coeffs).max() / scale),
            float(np.abs(par2[0].coeffs).max() / scale),
        )
        inner = sum(
            float(np.real(np.sum(a.coeffs * np.conj(b.coeffs))) / small.L**2)
            for a, b in zip(perp, par)
        )
        na = np.sqrt(sum(lp_norm(f, 2) ** 2 for f in perp))
        nb = np.sqrt(sum(lp_norm(f, 2) ** 2 for f in par))
        if na > 0 and nb > 0:
            worst_orth = max(worst_orth, abs(inner) / (na * nb))
    reports.append(
        ExperimentReport(name, "leray-idempotency", 0.0, worst_idem, 1e-12, mode="bound")
    )
    reports.append(
        ExperimentReport(name, "leray-orthogonality", 0.0, worst_orth, 1e-12, mode="bound")
    )

    sym = s_symbol_grid(0.8, small, params)
    lf, hf = split(sym, default_cutoff(params))
    rec = lf + hf
    dev = max(
        np.abs(rec.a00 - sym.a00).max(),
        np.abs(rec.a01 - sym.a01).max(),
        np.abs(rec.a10 - sym.a10).max(),
        np.abs(rec.a11 - sym.a11).max(),
    ) / max(sym.max_abs(), 1e-300)
    reports.append(
        ExperimentReport(name, "split-partition", 0.0, float(dev), 1e-15, mode="bound")
    )

    def symmetrize(c):
        return 0.5 * (c + np.conj(np.roll(c[::-1, ::-1], (1, 1), (0, 1))))

    Xs = State(
        SpectralField(small, symmetrize(Xr.rho.coeffs)),
        (
            SpectralField(small, symmetrize(Xr.m[0].coeffs)),
            SpectralField(small, symmetrize(Xr.m[1].coeffs)),
        ),
    )
    out = spar_symbol_grid(0.7, small, params).apply(Xs)
    defect = max(
        float(np.abs(c.coeffs - np.conj(np.roll(c.coeffs[::-1, ::-1], (1, 1), (0, 1)))).max())
        for c in out.components()
    )
    reports.append(ExperimentReport(name, "realness", 0.0, defect, 0.0, mode="bound"))

    return ExperimentResult(name, tuple(reports))


# ---------------------------------------------------------------------------
# experiment: kernel rates


def _localized_sound_state(grid: Grid) -> State:
    """Tightly localized state with density mass and curl-free momentum."""
    rho = sample(grid, lambda a, b: np.exp(-(a**2 + b**2) / 4.0))
    m = gradient(sample(grid, lambda a, b: np.exp(-(a**2 + b**2) / 6.0)))
    return State(rho, m)


def run_kernel_rates(ctx: ExperimentContext) -> ExperimentResult:
    """Fitted L^p decay exponents of the linear kernels against the formulas.

    Window and parameter choices keep the asymptotic regime inside the box:
    the artificial-kernel family runs at mu_par = 1/2 so the acoustic ring
    separates from its width well before it reaches the boundary, and the
    heat-flow families fit on t in [8, 128] where the age of the sampled
    profile data no longer biases the slope.
    """
    name = "kernel-rates"
    params = scaled_params(ctx.params)
    grid = ctx.grid
    rng = np.random.default_rng(ctx.seed)
    reports = []
    series = {}

    # artificial-viscosity kernel norms (diagonal entry, thin-ring viscosity)
    ring_params = FluidParams(mu=0.25, lam=0.0, rho_star=1.0, pressure=params.pressure)
    art_times = np.geomspace(4.0, 56.0, 9)
    for sigma in (0, 1):
        fields = {
            t: artificial_entry_fields(t, grid, ring_params, (sigma, 0)) for t in art_times
        }
        for p in (1.0, 2.0, np.inf):
            vals = []
            for t in art_times:
                mag = np.abs(fields[t][0])
                if np.isinf(p):
                    vals.append(float(mag.max()))
                else:
                    vals.append(float((np.sum(mag**p) * grid.dx**2) ** (1.0 / p)))
            label = f"artificial-p{p:g}-s{sigma}"
            series[label] = (art_times, np.array(vals))
            reports.append(
                _rate_report(
                    name,
                    label,
                    "artificial_kernel",
                    p,
                    sigma,
                    RateSeries(tuple(art_times), tuple(vals)),
                    0.1,
                    allow_log=(sigma == 0 and p in (1.0, np.inf)),
                )
            )

    # low-frequency curl-free kernel applied to a localized state
    X0 = _localized_sound_state(grid)
    spec = default_cutoff(params)
    lf_times = np.geomspace(6.0, 56.0, 9)
    lf_states = {}
    diff_vals = []
    for t in lf_times:
        lf, _ = split(spar_symbol_grid(t, grid, params), spec)
        lf_states[t] = lf.apply(X0)
        lf_art, _ = split(artificial_symbol_grid(t, grid, params), spec)
        diff_vals.append(lp_norm_state((lf - lf_art).apply(X0), 2))
    for p in (2.0, np.inf):
        for sigma in (0, 1):
            vals = [_state_norm_fields(lf_states[t], sigma, p) for t in lf_times]
            label = f"lf-kernel-p{p:g}-s{sigma}"
            series[label] = (lf_times, np.array(vals))
            reports.append(
                _rate_report(
                    name,
                    label,
                    "lf_kernel",
                    p,
                    sigma,
                    RateSeries(tuple(lf_times), tuple(vals)),
                    0.1,
                    # this estimate is an upper bound; it is saturated at p=2
                    # while the sup norm genuinely decays faster (ring spreading)
                    mode="match" if p == 2.0 else "bound",
                )
            )

    # kernel difference: LF parts of the true and artificial kernels
    series["kernel-difference-p2-s0"] = (lf_times, np.array(diff_vals))
    reports.append(
        _rate_report(
            name,
            "kernel-difference-p2-s0",
            "kernel_difference",
            2.0,
            0,
            RateSeries(tuple(lf_times), tuple(diff_vals)),
            0.1,
            mode="bound",
        )
    )

    # high-frequency exponential decay with fitted rate b
    hf_times = np.linspace(1.0, 10.0, 10)
    Xr = _hermitian_random_state(grid, rng)
    denom = np.sqrt(sum(lp_norm(c, 2) ** 2 for c in Xr.components()))
    hf_vals = []
    for t in hf_times:
        _, hf = split(spar_symbol_grid(t, grid, params), spec)
        hf_vals.append(lp_norm_state(hf.apply(Xr), 2) / denom)
    series["hf-decay"] = (hf_times, np.array(hf_vals))
    slope, intercept = np.polyfit(hf_times, np.log(hf_vals), 1)
    resid = np.log(hf_vals) - (slope * hf_times + intercept)
    ss_tot = float(np.sum((np.log(hf_vals) - np.mean(np.log(hf_vals))) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    reports.append(
        ExperimentReport(
            name,
            "hf-exponential-rate",
            0.0,
            float(-slope),
            0.0,
            r2=r2,
            mode="positive",
            meta={"envelope": "exp(-b t)"},
        )
    )

    # heat-Leray kernel norms (non-zero multi-index only; exact power laws)
    hl_times = np.geomspace(1.0, 16.0, 9)
    for p in (1.0, 2.0, np.inf):
        vals = [heat_leray_kernel_norms(t, (1, 0), p, grid, params) for t in hl_times]
        label = f"heat-leray-p{p:g}-s1"
        series[label] = (hl_times, np.array(vals))
        reports.append(
            _rate_report(
                name, label, "heat_leray", p, 1, RateSeries(tuple(hl_times), tuple(vals)), 0.1
            )
        )

    # heat flow of Biot-Savart data (fit past the age of the sampled profile)
    perp_times = np.geomspace(8.0, 128.0, 9)
    omega_dipole = dipole_vorticity_field(grid, 1, 1.0, params)
    m_dipole = biot_savart(omega_dipole)
    m_second = biot_savart(derivative(omega_dipole, (1, 0)))

    def heat_norm(m0, t, sigma, p, weight=None):
        h = np.exp(-params.mu * grid.eta_sq * t)
        comps = []
        for f in m0:
            g = SpectralField(grid, h * f.coeffs)
            if sigma:
                g = derivative(g, (sigma, 0))
            comps.append(g)
        if weight is None:
            return lp_norm_vector((comps[0], comps[1]), p)
        mag = np.hypot(comps[0].values(), comps[1].values()) * weight
        if np.isinf(p):
            return float(mag.max())
        return float((np.sum(mag**p) * grid.dx**2) ** (1.0 / p))

    for p in (2.0, np.inf):
        for sigma in (0, 1):
            vals = [heat_norm(m_dipole, t, sigma, p) for t in perp_times]
            label = f"perp-dipole-p{p:g}-s{sigma}"
            series[label] = (perp_times, np.array(vals))
            reports.append(
                _rate_report(
                    name,
                    label,
                    "heat_dipole_data",
                    p,
                    sigma,
                    RateSeries(tuple(perp_times), tuple(vals)),
                    0.1,
                )
            )

    for p in (2.0, np.inf):
        vals = [heat_norm(m_second, t, 0, p) for t in perp_times]
        label = f"perp-second-moment-p{p:g}-s0"
        series[label] = (perp_times, np.array(vals))
        reports.append(
            _rate_report(
                name,
                label,
                "heat_second_moment_data",
                p,
                0,
                RateSeries(tuple(perp_times), tuple(vals)),
                0.1,
            )
        )

    # weighted norm |x| K_mu m0 stays on the part-1 rate
    radius = np.hypot(grid.xc1, grid.xc2)
    vals = [heat_norm(m_second, t, 0, 2.0, weight=radius) for t in perp_times]
    series["perp-weighted-p2-s0"] = (perp_times, np.array(vals))
    reports.append(
        _rate_report(
            name,
            "perp-weighted-p2-s0",
            "heat_dipole_data",
            2.0,
            0,
            RateSeries(tuple(perp_times), tuple(vals)),
            0.1,
        )
    )

    # small-p interpolation corollary at p = 3/2
    vals = [heat_norm(m_second, t, 0, 1.5) for t in perp_times]
    series["perp-small-p1.5-s0"] = (perp_times, np.array(vals))
    reports.append(
        _rate_report(
            name,
            "perp-small-p1.5-s0",
            "heat_second_moment_data",
            1.5,
            0,
            RateSeries(tuple(perp_times), tuple(vals)),
            0.15,
        )
    )

    return ExperimentResult(name, tuple(reports), series)


# ---------------------------------------------------------------------------
# experiment: pointwise bounds


def run_pointwise_bound(ctx: ExperimentContext) -> ExperimentResult:
    """Two-regime envelope of the artificial kernel on the expanding ring.

    Runs on the half-size box: the kernel's heat width sqrt(2 mu_par t) needs
    a few grid points already at t = 1, and the ring stays far from the
    boundary for every sampled time.
    """
    name = "pointwise-bound"
    grid = make_grid(ctx.grid.n, ctx.grid.L / 2.0)
    reports = []
    extras = {}
    configs = [
        ("default", scaled_params(ctx.params), (1.0, 2.0, 4.0, 8.0)),
        # thinner ring: the peak visibly tracks |x| = c t
        ("resolved-ring", FluidParams(mu=0.25, lam=0.0), (2.0, 4.0, 8.0, 16.0)),
    ]
    for label, params, times in configs:
        rep = pointwise_bound_report(params, grid, times=times)
        extras[label] = {
            "samples": [
                {
                    "t": s.t,
                    "k_fit": s.k_fit,
                    "peak_radius": s.peak_radius,
                    "ring": [s.ring_lo, s.ring_hi],
                    "tail_ratio": s.tail_ratio,
                }
                for s in rep.samples
            ]
        }
        reports.append(
            ExperimentReport(
                name, f"{label}-k-stability", 2.0, rep.k_stability, 0.0, mode="bound"
            )
        )
        reports.append(
            ExperimentReport(
                name,
                f"{label}-ring-location",
                1.0,
                1.0 if rep.ring_ok else 0.0,
                0.0,
                mode="match",
            )
        )
        tail = max(s.tail_ratio for s in rep.samples)
        reports.append(
            ExperimentReport(name, f"{label}-far-tail", 0.0, tail, 1e-8, mode="bound")
        )
    return ExperimentResult(name, tuple(reports), extras=extras)


# ---------------------------------------------------------------------------
# solver-based experiments


def _generic_state(grid: Grid, eps: float) -> State:
    """Zero-mean localized state with sound and incompressible content.

    Width ~3 keeps the acoustic transit over the data below t = 1, so the
    quadratic interaction is developed when the fit windows open.
    """
    rho = sample(
        grid, lambda a, b: np.exp(-(a**2 + b**2) / 9.0) * (1.0 + 0.3 * b / 4.0)
    )
    c = rho.coeffs.copy()
    c[0, 0] = 0.0
    rho = SpectralField(grid, c)
    par = gradient(sample(grid, lambda a, b: np.exp(-(a**2 + b**2) / 12.0)))
    psi = sample(grid, lambda a, b: np.exp(-((a - 1.0) ** 2 + b**2) / 10.0))
    perp = (derivative(psi, (0, 1)) * -1.0, derivative(psi, (1, 0)))
    X = State(rho, (par[0] * 0.7 + perp[0] * 0.5, par[1] * 0.7 + perp[1] * 0.5))
    scale = max(
        lp_norm(X.rho, np.inf), lp_norm_vector(X.m, np.inf)
    )
    return (X * (eps / scale)).dealiased()


def _snapshot_times(T: float, n: int = 14) -> tuple[float, ...]:
    return tuple(np.geomspace(1.0, T, n))


def _acoustic_horizon(ctx: ExperimentContext, grid: Grid) -> float:
    """Largest horizon keeping the sound ring c T + 3 sqrt(mu_par T) inside
    0.45 L; protects measurements when a config requests a long run."""
    params = scaled_params(ctx.params)
    c, mu_par = params.c, params.mu_par
    root = (-3.0 * np.sqrt(mu_par) + np.sqrt(9.0 * mu_par + 1.8 * grid.L * c)) / (2.0 * c)
    return min(ctx.T, float(root**2))


def _diffusive_horizon(ctx: ExperimentContext, grid: Grid) -> float:
    """Largest horizon keeping three diffusive widths of age-1 profile data,
    2 sqrt(nu (T+1)) each, inside 0.45 L."""
    nu = ctx.params.nu
    return min(ctx.T, (0.075 * grid.L) ** 2 / nu - 1.0)


def run_sound_decay(ctx: ExperimentContext) -> ExperimentResult:
    """L^p decay of the curl-free part of a small-amplitude nonlinear run."""
    name = "sound-decay"
    grid = ctx.grid
    horizon = _acoustic_horizon(ctx, grid)
    times = _snapshot_times(horizon)
    cfg = SolverConfig(
        grid=grid,
        params=ctx.params,
        T=horizon,
        dt=ctx.dt,
        snapshot_times=times,
        epsilon=ctx.epsilon,
    )
    X0 = _generic_state(grid, ctx.epsilon)
    traj = simulate(X0, cfg)
    if traj.aborted:
        raise HarnessError(f"sound-decay run aborted: {traj.abort_reason}")
    reports = []
    series = {}
    t_arr = np.array(traj.times[1:])
    sound_states = []
    for X in traj.states[1:]:
        _, par = leray_decompose(X.m)
        sound_states.append(State(X.rho, par))
    for p in (2.0, np.inf, 1.0):
        vals = np.array([lp_norm_state(Xs, p) for Xs in sound_states])
        label = f"sound-p{p:g}-s0"
        series[label] = (t_arr, vals)
        reports.append(
            _rate_report(
                name,
                label,
                "sound_part",
                p,
                0,
                window(t_arr, vals, horizon / 4.0, horizon),
                0.15,
                allow_log=(p == 1.0),
            )
        )
    return ExperimentResult(name, tuple(reports), series, {"horizon": horizon})


def run_nonlinear_smallness(ctx: ExperimentContext) -> ExperimentResult:
    """Quadratic smallness of the deviation from the linear evolution."""
    name = "nonlinear-smallness"
    grid = ctx.grid
    params_lin = scaled_params(ctx.params)
    horizon = _acoustic_horizon(ctx, grid)
    times = _snapshot_times(horizon, 12)
    eps_sweep = (0.1 * ctx.epsilon, 0.3 * ctx.epsilon, ctx.epsilon)
    linear_symbols = {t: s_symbol_grid(t, grid, params_lin) for t in times}
    reports = []
    series = {}
    deviations = {}
    for eps in eps_sweep:
        X0 = _generic_state(grid, eps)
        cfg = SolverConfig(
            grid=grid,
            params=ctx.params,
            T=horizon,
            dt=ctx.dt,
            snapshot_times=times,
            epsilon=eps,
        )
        traj = simulate(X0, cfg)
        if traj.aborted:
            raise HarnessError(f"nonlinear run aborted at eps={eps}: {traj.abort_reason}")
        dev = []
        for t, X in zip(traj.times[1:], traj.states[1:]):
            lin = linear_symbols[t].apply(traj.states[0])
            dev.append(lp_norm_state(X - lin, 2))
        deviations[eps] = np.array(dev)
        series[f"deviation-eps{eps:g}"] = (np.array(times), deviations[eps])

    # amplitude scaling at a mid-horizon time
    mid = len(times) // 2
    eps_arr = np.array(eps_sweep)
    dmid = np.array([deviations[e][mid] for e in eps_sweep])
    slope = np.polyfit(np.log(eps_arr), np.log(dmid), 1)[0]
    reports.append(
        ExperimentReport(
            name,
            "amplitude-scaling",
            2.0,
            float(slope),
            0.2,
            p=2.0,
            sigma=0,
            mode="match",
            meta={"t_probe": times[mid]},
        )
    )

    # envelope-normalized boundedness at the largest amplitude
    t_arr = np.array(times)
    envelope = np.log1p(t_arr) * (1.0 + t_arr) ** predicted_exponent(
        "nonlinear_correction", 2.0, 0
    )
    normalized = deviations[ctx.epsilon] / envelope
    ratio = float(normalized.max() / normalized.min())
    series["envelope-normalized"] = (t_arr, normalized)
    reports.append(
        ExperimentReport(
            name, "envelope-boundedness", 3.0, ratio, 0.0, p=2.0, sigma=0, mode="bound"
        )
    )

    # linear-only control: the deviation vanishes identically
    X0 = _generic_state(grid, ctx.epsilon)
    cfg = SolverConfig(
        grid=grid,
        params=ctx.params,
        T=horizon,
        dt=ctx.dt,
        snapshot_times=times,
        epsilon=ctx.epsilon,
        nonlinear=False,
    )
    traj = simulate(X0, cfg)
    worst = 0.0
    for t, X in zip(traj.times[1:], traj.states[1:]):
        lin = linear_symbols[t].apply(traj.states[0])
        worst = max(worst, lp_norm_state(X - lin, 2))
    reports.append(
        ExperimentReport(name, "linear-control", 0.0, worst, 1e-12, mode="bound")
    )
    return ExperimentResult(name, tuple(reports), series)


def run_incompressible_limit(ctx: ExperimentContext) -> ExperimentResult:
    """Convergence of the divergence-free momentum to the dipole profile."""
    name = "incompressible-limit"
    # finer box: the profile data must be spectrally resolved from t ~ 1.
    # The measured fields are divergence-free (sound is projected out), so
    # the horizon is capped by the diffusive support, not the acoustic ring.
    grid = make_grid(ctx.grid.n, ctx.grid.L / 2.0)
    params = ctx.params
    rs = params.rho_star
    reports = []
    series = {}

    horizon = _diffusive_horizon(ctx, grid)
    times = tuple(np.geomspace(1.0, horizon, 12))

    # dipole-data case: zero circulation, nonzero first moments
    omega0 = dipole_vorticity_field(grid, 1, 1.0, params)
    u0 = biot_savart(omega0)
    amp = ctx.epsilon / lp_norm_vector(u0, np.inf)
    m0 = (u0[0] * (amp * rs), u0[1] * (amp * rs))
    X0 = State(SpectralField.zero(grid), m0).dealiased()
    moments = first_moments_beta(vorticity_of(X0.m, params), params)
    cfg = SolverConfig(
        grid=grid,
        params=params,
        T=horizon,
        dt=ctx.dt,
        snapshot_times=times,
        epsilon=ctx.epsilon,
    )
    traj = simulate(X0, cfg)
    if traj.aborted:
        raise HarnessError(f"incompressible run aborted: {traj.abort_reason}")

    profiles = {t: profile_superposition(moments, t, params, grid)[1] for t in times}
    for p in (2.0, np.inf):
        for sigma in (0, 1):
            vals = []
            for t, X in zip(traj.times[1:], traj.states[1:]):
                perp, _ = leray_decompose(X.m)
                uref = profiles[t]
                diff = (perp[0] - uref[0] * rs, perp[1] - uref[1] * rs)
                if sigma:
                    diff = (derivative(diff[0], (1, 0)), derivative(diff[1], (1, 0)))
                w = t ** predicted_exponent("incompressible_weight", p, sigma)
                vals.append(w * lp_norm_vector(diff, p))
            vals = np.array(vals)
            label = f"dipole-residual-p{p:g}-s{sigma}"
            series[label] = (np.array(times), vals)
            half = vals[np.array(times) >= horizon / 2.0 - 1e-9]
            ratios = half[1:] / half[:-1]
            reports.append(
                ExperimentReport(
                    name,
                    f"{label}-monotone",
                    1.0,
                    float(ratios.max()) if len(ratios) else 0.0,
                    0.0,
                    p=p,
                    sigma=sigma,
                    mode="bound",
                )
            )
            reports.append(
                ExperimentReport(
                    name,
                    f"{label}-final-fraction",
                    0.2,
                    float(vals[-1] / vals[0]),
                    0.0,
                    p=p,
                    sigma=sigma,
                    mode="bound",
                )
            )

    # moment consistency along the run (2% of the initial values), probed
    # while the vorticity is still compactly supported in the box
    probe = max(k for k, t in enumerate(traj.times) if t <= 8.0)
    late_moments = first_moments_beta(vorticity_of(traj.states[probe].m, params), params)
    beta_scale = max(abs(moments.beta[0]), abs(moments.beta[1]))
    drift = max(
        abs(late_moments.beta[0] - moments.beta[0]),
        abs(late_moments.beta[1] - moments.beta[1]),
    )
    reports.append(
        ExperimentReport(
            name,
            "beta-consistency",
            0.0,
            drift / beta_scale,
            0.02,
            mode="bound",
            meta={"t_probe": traj.times[probe]},
        )
    )

    # vortex-data control: nonzero circulation follows the vortex profile.
    # No rate is asserted for this limit, so the criterion is the weaker
    # "weighted residual decays": monotone over the last half, final below
    # half the t=1 value (the dipole case above carries the 20% threshold).
    omega_g = oseen_vorticity_field(grid, 1.0, params)
    cg = omega_g.coeffs.copy()
    alpha_val = float(cg[0, 0].real) / params.nu
    cg[0, 0] = 0.0
    ug = biot_savart(SpectralField(grid, cg))
    ampg = ctx.epsilon / lp_norm_vector(ug, np.inf)
    m0g = (ug[0] * (ampg * rs), ug[1] * (ampg * rs))
    X0g = State(SpectralField.zero(grid), m0g).dealiased()
    alpha_scaled = alpha_val * ampg
    trajg = simulate(X0g, cfg)
    if trajg.aborted:
        raise HarnessError(f"vortex-data run aborted: {trajg.abort_reason}")
    for p in (2.0, np.inf):
        vals = []
        for t, X in zip(trajg.times[1:], trajg.states[1:]):
            perp, _ = leray_decompose(X.m)
            wg = oseen_vorticity_field(grid, t, params)
            cwg = wg.coeffs.copy()
            cwg[0, 0] = 0.0
            uref = biot_savart(SpectralField(grid, cwg))
            diff = (
                perp[0] - uref[0] * (rs * alpha_scaled),
                perp[1] - uref[1] * (rs * alpha_scaled),
            )
            w = t ** predicted_exponent("incompressible_weight", p, 0)
            vals.append(w * lp_norm_vector(diff, p))
        vals = np.array(vals)
        label = f"vortex-residual-p{p:g}-s0"
        series[label] = (np.array(times), vals)
        half = vals[np.array(times) >= horizon / 2.0 - 1e-9]
        ratios = half[1:] / half[:-1]
        reports.append(
            ExperimentReport(
                name,
                f"{label}-monotone",
                1.0,
                float(ratios.max()) if len(ratios) else 0.0,
                0.0,
                p=p,
                sigma=0,
                mode="bound",
            )
        )
        reports.append(
            ExperimentReport(
                name,
                f"{label}-final-fraction",
                0.5,
                float(vals[-1] / vals[0]),
                0.0,
                p=p,
                sigma=0,
                mode="bound",
            )
        )
    extras = {
        "beta": list(moments.beta),
        "alpha_scaled": alpha_scaled,
        "grid": {"n": grid.n, "L": grid.L},
    }
    return ExperimentResult(name, tuple(reports), series, extras)


def run_vorticity_profiles(ctx: ExperimentContext) -> ExperimentResult:
    """Constant-density vorticity control: vortex exactness, dipole attraction."""
    name = "vorticity-profiles"
    grid = make_grid(ctx.grid.n, ctx.grid.L / 2.0)
    params = ctx.params
    nu = params.nu
    reports = []
    series = {}

    # exact self-similar vortex: the numerical flow tracks the shifted profile.
    # The full box keeps the finite-size strain of the circulation background
    # (which scales like 1/L^2) two orders below the 1e-6 criterion; the same
    # run on the half box is recorded to document that box-size sensitivity.
    times_a = (1.0, 2.0, 4.0, 8.0, 16.0)
    box_residuals = {}
    for vortex_grid in (ctx.grid, grid):
        omega0 = oseen_vorticity_field(vortex_grid, 2.0, params)
        traj = vorticity_simulate(omega0, nu, times_a, dt=0.25)
        worst = 0.0
        for t, w in zip(traj.times[1:], traj.omegas[1:]):
            ref = oseen_vorticity_field(vortex_grid, 2.0 + t, params)
            worst = max(worst, lp_norm(w - ref, 2) / lp_norm(ref, 2))
        box_residuals[vortex_grid.L] = worst
    reports.append(
        ExperimentReport(
            name,
            "vortex-exactness",
            0.0,
            box_residuals[ctx.grid.L],
            1e-6,
            mode="bound",
            meta={"box_sensitivity": box_residuals},
        )
    )

    # perturbed dipole: weighted residual against the first-moment profile
    T = max(ctx.T, 64.0)
    eps = ctx.epsilon
    base = dipole_vorticity_field(grid, 1, 1.0, params)
    pert = derivative(
        sample(grid, lambda a, b: np.exp(-((a - 2.0) ** 2 + (b - 1.0) ** 2) / 6.0)), (0, 1)
    )
    pscale = 0.3 * lp_norm(base, np.inf) / lp_norm(pert, np.inf)
    omega0 = (base + pert * pscale) * eps
    moments = first_moments_beta(omega0, params)
    times_b = tuple(np.geomspace(1.0, T, 12))
    traj = vorticity_simulate(omega0, nu, times_b, dt=0.25)
    t_arr = np.array(traj.times[1:])
    vals = []
    for t, w in zip(traj.times[1:], traj.omegas[1:]):
        ref, _ = profile_superposition(moments, t, params, grid)
        weight = t ** predicted_exponent("dipole_weight", 2.0, 0)
        vals.append(weight * lp_norm(w - ref, 2))
    vals = np.array(vals)
    series["dipole-residual-p2"] = (t_arr, vals)
    half = vals[t_arr >= T / 2.0 - 1e-9]
    ratios = half[1:] / half[:-1]
    reports.append(
        ExperimentReport(
            name,
            "dipole-residual-monotone",
            1.0,
            float(ratios.max()) if len(ratios) else 0.0,
            0.0,
            p=2.0,
            sigma=0,
            mode="bound",
        )
    )
    reports.append(
        ExperimentReport(
            name,
            "dipole-residual-final-fraction",
            0.2,
            float(vals[-1] / vals[0]),
            0.0,
            p=2.0,
            sigma=0,
            mode="bound",
        )
    )

    # moment conservation while the field is still well localized
    drift = 0.0
    beta_scale = max(abs(moments.beta[0]), abs(moments.beta[1]))
    for t, w in zip(traj.times[1:], traj.omegas[1:]):
        if t > 16.0:
            break
        m = first_moments_beta(w, params)
        drift = max(
            drift,
            abs(m.beta[0] - moments.beta[0]) / beta_scale,
            abs(m.beta[1] - moments.beta[1]) / beta_scale,
            abs(m.alpha - moments.alpha) / max(abs(moments.alpha), 1e-12),
        )
    reports.append(
        ExperimentReport(name, "moment-conservation", 0.0, drift, 1e-8, mode="bound")
    )
    return ExperimentResult(name, tuple(reports), series)


EXPERIMENTS = {
    "kernel-algebra": run_kernel_algebra,
    "kernel-rates": run_kernel_rates,
    "pointwise-bound": run_pointwise_bound,
    "sound-decay": run_sound_decay,
    "nonlinear-smallness": run_nonlinear_smallness,
    "incompressible-limit": run_incompressible_limit,
    "vorticity-profiles": run_vorticity_profiles,
}


def list_experiments() -> tuple[str, ...]:
    return tuple(EXPERIMENTS)


def run_experiment(name: str, ctx: ExperimentContext) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise HarnessError(
            f"unknown experiment {name!r}; available: {', '.join(EXPERIMENTS)}"
        ) from None
    return fn(ctx)


# ---------------------------------------------------------------------------
# report serialisation

REPORTS_HEADER = "# vortexlab reports v1"
SERIES_HEADER = "# vortexlab series v1"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if np.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def reports_to_csv(reports) -> str:
    lines = [REPORTS_HEADER, "experiment,p,sigma,predicted,fitted,r2,tolerance,pass"]
    for r in reports:
        lines.append(
            ",".join(
                [
                    f"{r.experiment}/{r.label}",
                    _fmt(float(r.p) if r.p is not None else None),
                    _fmt(r.sigma),
                    _fmt(float(r.predicted)),
                    _fmt(float(r.fitted)),
                    _fmt(float(r.r2) if r.r2 is not None else None),
                    _fmt(float(r.tolerance)),
                    "true" if r.passed else "false",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def series_to_csv(t, values) -> str:
    lines = [SERIES_HEADER, "t,value"]
    for ti, vi in zip(t, values):
        lines.append(f"{_fmt(float(ti))},{_fmt(float(vi))}")
    return "\n".join(lines) + "\n"


def summary_dict(results, ctx: ExperimentContext) -> dict:
    return {
        "version": 1,
        "context": {
            "n": ctx.grid.n,
            "L": ctx.grid.L,
            "mu": ctx.params.mu,
            "lam": ctx.params.lam,
            "rho_star": ctx.params.rho_star,
            "epsilon": ctx.epsilon,
            "T": ctx.T,
            "dt": ctx.dt,
            "seed": ctx.seed,
            "threads": ctx.threads,
        },
        "experiments": [
            {
                "name": res.name,
                "passed": res.passed,
                "reports": [
                    {
                        "label": r.label,
                        "p": None if r.p is None else ("inf" if np.isinf(r.p) else r.p),
                        "sigma": r.sigma,
                        "predicted": r.predicted,
                        "fitted": r.fitted,
                        "tolerance": r.tolerance,
                        "r2": r.r2,
                        "mode": r.mode,
                        "passed": r.passed,
                        "meta": r.meta,
                    }
                    for r in res.reports
                ],
                "extras": res.extras,
            }
            for res in results
        ],
        "passed": all(res.passed for res in results),
    }
