import numpy as np
import pytest

from vortexlab.kernels import (
    CutoffSpec,
    KernelError,
    KernelSymbol,
    apply,
    artificial_symbol,
    artificial_symbol_grid,
    cutoff,
    default_cutoff,
    eigenvalues,
    exp_divided_difference,
    generator_block,
    heat_leray_kernel_norms,
    heat_symbol_grid,
    phi,
    phi_divided_difference,
    pointwise_bound_report,
    s_symbol,
    s_symbol_grid,
    spar_symbol,
    spar_symbol_grid,
    split,
    wave_kernel_w,
    wave_symbol,
)
from vortexlab.profiles import FluidParams
from vortexlab.spectral import State, leray_decompose, make_grid, gradient, derivative
from conftest import random_field, random_state

PARAMS = FluidParams()  # mu = 1, lam = 0, rho_star = 1 -> mu_par = 2, c = 1
MU_PAR_ONE = FluidParams(mu=0.5)  # mu_par = 1, c = 1: double root at |eta| = 2


# ---------------------------------------------------------------------------
# scalar helpers


def test_phi_matches_series_and_closed_form():
    import math

    zs = np.array([0.0, 1e-8, 0.3j, -0.49, -2.0 + 1.0j, -40.0])
    for k in range(4):
        vals = phi(k, zs)
        for z, v in zip(zs, vals):
            # quadrature oracle: phi_k(z) = int_0^1 e^{z(1-s)} s^{k-1}/(k-1)! ds
            if k == 0:
                expected = np.exp(z)
            else:
                s = np.linspace(0, 1, 200001)
                f = np.exp(z * (1 - s)) * s ** (k - 1) / math.factorial(k - 1)
                expected = np.trapezoid(f, s)
            assert abs(v - expected) < 5e-10 * max(1.0, abs(expected))


def test_divided_difference_stable_across_threshold():
    a = -1.0 + 0.5j
    # exact reference: (e^a - e^{a-d})/d = -e^a expm1(-d)/d for real d;
    # the direct branch (|d| >= 1e-5) loses at most ~eps/|d| relative accuracy
    for d in (1e-3, 1e-4, 1.01e-5, 0.99e-5, 1e-7, 1e-9):
        v = exp_divided_difference(np.array([a]), np.array([a - d]))[0]
        exact = -np.exp(a) * np.expm1(-d) / d
        tol = 1e-9 if d >= 1e-5 else 1e-12
        assert abs(v - exact) < tol * abs(exact)
    # phi divided differences: both branches agree with the midpoint-derivative
    # value phi_k'((a+b)/2) up to the direct branch's ~eps/|d| noise
    from vortexlab.kernels import _phi_derivative

    for k in (1, 2, 3):
        for d in (1.1e-5, 0.9e-5):
            got = phi_divided_difference(k, np.array([a]), np.array([a - d]))[0]
            ref = _phi_derivative(k, np.array([a - d / 2]))[0]
            assert abs(got - ref) < 1e-10 * abs(ref)
        coarse = phi_divided_difference(k, np.array([a]), np.array([a - 1e-2]))[0]
        direct = (phi(k, a) - phi(k, a - 1e-2)) / 1e-2
        assert abs(coarse - direct) < 1e-12 * abs(direct)


# ---------------------------------------------------------------------------
# eigenvalues


def test_eigenvalues_double_root():
    lp, lm = eigenvalues((2.0, 0.0), MU_PAR_ONE)  # |eta| = 2 c / mu_par
    assert lp == pytest.approx(-2.0)
    assert lm == pytest.approx(-2.0)


def test_eigenvalues_oscillatory_pair():
    lp, lm = eigenvalues((1.0, 0.0), MU_PAR_ONE)
    assert lp == pytest.approx(-0.5 + 1j * np.sqrt(3) / 2)
    assert lm == pytest.approx(-0.5 - 1j * np.sqrt(3) / 2)
    assert lp == np.conj(lm)


def test_eigenvalues_real_negative_above_double_root(rng):
    for _ in range(10):
        eta = rng.uniform(2.5, 12.0) * np.array([1.0, 0.0])
        lp, lm = eigenvalues(eta, MU_PAR_ONE)
        assert abs(lp.imag) == 0.0 and abs(lm.imag) == 0.0
        assert lp.real < 0 and lm.real < 0


def test_eigenvalues_small_eta_expansion():
    # lambda_pm = -mu_par |eta|^2/2 +- i c |eta| + O(|eta|^3)
    mags = np.array([1e-3, 3e-3, 1e-2, 3e-2, 1e-1])
    for m in mags:
        lp, _ = eigenvalues((m, 0.0), MU_PAR_ONE)
        err = abs(lp - (-0.5 * MU_PAR_ONE.mu_par * m**2 + 1j * MU_PAR_ONE.c * m))
        assert err < 0.2 * m**3


def test_eigenvalues_zero():
    lp, lm = eigenvalues((0.0, 0.0), PARAMS)
    assert lp == 0.0 and lm == 0.0


# ---------------------------------------------------------------------------
# per-wavevector symbols


def test_spar_symbol_identity_at_zero_time(rng):
    for _ in range(5):
        eta = rng.uniform(-4, 4, size=2)
        block = spar_symbol(0.0, eta, PARAMS)
        assert np.abs(block - np.eye(3)).max() < 1e-12


def test_spar_symbol_mass_mode():
    for t in (0.5, 3.0):
        block = spar_symbol(t, (0.0, 0.0), PARAMS)
        assert block[0, 0] == pytest.approx(1.0)
        assert np.abs(block - np.eye(3)).max() < 1e-12


def test_spar_symbol_rejects_negative_time():
    with pytest.raises(KernelError):
        spar_symbol(-0.1, (1.0, 0.0), PARAMS)


def test_composed_and_artificial_identity_and_mass_mode(rng):
    for builder in (s_symbol, artificial_symbol):
        for _ in range(3):
            eta = rng.uniform(-4, 4, size=2)
            assert np.abs(builder(0.0, eta, PARAMS) - np.eye(3)).max() < 1e-12
        for t in (0.5, 2.0):
            block = builder(t, (0.0, 0.0), PARAMS)
            assert block[0, 0] == pytest.approx(1.0)


def _random_eta_t(rng):
    eta = rng.uniform(-5, 5, size=2)
    t = rng.uniform(0.05, 2.0)
    s = rng.uniform(0.05, 2.0)
    return eta, t, s


@pytest.mark.parametrize("builder", [spar_symbol, s_symbol, wave_symbol])
def test_symbol_semigroup_pointwise(builder, rng):
    worst = 0.0
    for _ in range(100):
        eta, t, s = _random_eta_t(rng)
        a = builder(t, eta, PARAMS) @ builder(s, eta, PARAMS)
        b = builder(t + s, eta, PARAMS)
        scale = max(np.abs(b).max(), 1e-300)
        worst = max(worst, np.abs(a - b).max() / scale)
    assert worst < 1e-10


@pytest.mark.parametrize("composed", [False, True])
def test_artificial_semigroup_pointwise(composed, rng):
    worst = 0.0
    for _ in range(100):
        eta, t, s = _random_eta_t(rng)
        a = artificial_symbol(t, eta, PARAMS, composed) @ artificial_symbol(
            s, eta, PARAMS, composed
        )
        b = artificial_symbol(t + s, eta, PARAMS, composed)
        worst = max(worst, np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))
    assert worst < 1e-10


def test_symbol_continuity_at_double_root():
    t = 1.3
    mag = 2.0 * PARAMS.c / PARAMS.mu_par
    at = spar_symbol(t, (mag, 0.0), PARAMS)
    for eps in (1e-9, -1e-9, 1e-7):
        near = spar_symbol(t, (mag + eps, 0.0), PARAMS)
        assert np.abs(near - at).max() < 1e-6
    # at the double root the divided difference collapses to t e^{lambda t}
    lam = -0.5 * PARAMS.mu_par * mag**2
    assert at[0, 1] == pytest.approx(1j * t * np.exp(lam * t) * mag, rel=1e-10)


def test_generator_consistency(rng):
    dt = 1e-6
    for kind, builder in (
        ("spar", spar_symbol),
        ("s", s_symbol),
        ("artificial_par", artificial_symbol),
    ):
        for _ in range(20):
            eta = rng.uniform(-2, 2, size=2)
            block = builder(dt, eta, PARAMS)
            fd = (block - np.eye(3)) / dt
            gen = generator_block(kind, eta, PARAMS)
            scale = max(np.abs(gen).max(), 1.0)
            assert np.abs(fd - gen).max() < 1e-5 * scale


def test_artificial_factorizes_into_wave_times_heat(rng):
    # S_tilde_par acts on curl-free data as the wave kernel damped by the
    # half-mu_par heat factor (the two parts commute)
    for _ in range(10):
        eta = rng.uniform(-4, 4, size=2)
        t = rng.uniform(0.1, 2.0)
        rho = rng.standard_normal() + 1j * rng.standard_normal()
        a = rng.standard_normal() + 1j * rng.standard_normal()
        v = np.array([rho, a * eta[0], a * eta[1]])  # curl-free momentum
        lhs = artificial_symbol(t, eta, PARAMS) @ v
        damp = np.exp(-0.5 * PARAMS.mu_par * (eta[0] ** 2 + eta[1] ** 2) * t)
        rhs = damp * (wave_symbol(t, eta, PARAMS) @ v)
        assert np.abs(lhs - rhs).max() < 1e-12 * max(np.abs(rhs).max(), 1e-300)


def test_artificial_symbol_eigenvalues(rng):
    # parallel-block eigenvalues are exp((-mu_par |eta|^2/2 +- i c |eta|) t)
    for _ in range(10):
        eta = rng.uniform(0.5, 4.0, size=2)
        t = rng.uniform(0.1, 2.0)
        mag = np.hypot(*eta)
        block = artificial_symbol(t, eta, PARAMS)
        eig = list(np.linalg.eigvals(block))
        lam = -0.5 * PARAMS.mu_par * mag**2
        for expected in (
            np.exp((lam + 1j * PARAMS.c * mag) * t),
            np.exp((lam - 1j * PARAMS.c * mag) * t),
            np.exp(lam * t),  # divergence-free extension
        ):
            j = int(np.argmin([abs(e - expected) for e in eig]))
            assert abs(eig[j] - expected) < 1e-10
            eig.pop(j)


def test_s_symbol_on_divergence_free_data(rng):
    # (0, m_perp) evolves by the mu-heat flow with density untouched
    grid = make_grid(32, 10.0)
    psi = random_field(grid, rng)
    m = (derivative(psi, (0, 1)) * -1.0, derivative(psi, (1, 0)))
    X = State(type(psi).zero(grid), m)
    out = s_symbol_grid(0.7, grid, PARAMS).apply(X)
    heat = np.exp(-PARAMS.mu * grid.eta_sq * 0.7)
    assert np.abs(out.rho.coeffs).max() < 1e-12
    for j in range(2):
        assert np.abs(out.m[j].coeffs - heat * m[j].coeffs).max() < 1e-12


def test_s_symbol_matches_spar_on_curl_free_data(rng):
    grid = make_grid(32, 10.0)
    rho = random_field(grid, rng)
    m = gradient(random_field(grid, rng))
    X = State(rho, m)
    t = 0.9
    a = s_symbol_grid(t, grid, PARAMS).apply(X)
    b = spar_symbol_grid(t, grid, PARAMS).apply(X)
    for ca, cb in zip(a.components(), b.components()):
        assert np.abs((ca - cb).coeffs).max() < 1e-11


def test_apply_rejects_grid_mismatch(rng):
    a = make_grid(32, 5.0)
    b = make_grid(64, 5.0)
    X = random_state(b, rng)
    with pytest.raises(KernelError):
        s_symbol_grid(1.0, a, PARAMS).apply(X)


def test_apply_identity_and_zero(rng):
    grid = make_grid(32, 5.0)
    X = random_state(grid, rng)
    out = KernelSymbol.identity(grid).apply(X)
    for ca, cb in zip(out.components(), X.components()):
        assert np.array_equal(ca.coeffs, cb.coeffs)
    zero = State.zero(grid)
    out = s_symbol_grid(1.0, grid, PARAMS).apply(zero)
    assert all(np.abs(c.coeffs).max() == 0.0 for c in out.components())


def test_apply_semigroup_on_grid(rng):
    grid = make_grid(32, 5.0)
    X = random_state(grid, rng)
    t, s = 0.4, 0.9
    one = s_symbol_grid(t + s, grid, PARAMS).apply(X)
    two = s_symbol_grid(t, grid, PARAMS).apply(s_symbol_grid(s, grid, PARAMS).apply(X))
    for ca, cb in zip(one.components(), two.components()):
        assert np.abs((ca - cb).coeffs).max() < 1e-10 * max(np.abs(ca.coeffs).max(), 1e-300)


def test_apply_preserves_hermitian_symmetry_exactly(rng):
    grid = make_grid(32, 5.0)
    X = random_state(grid, rng)

    def symm(c):
        return 0.5 * (c + np.conj(np.roll(c[::-1, ::-1], (1, 1), (0, 1))))

    X = State(
        type(X.rho)(grid, symm(X.rho.coeffs)),
        (type(X.rho)(grid, symm(X.m[0].coeffs)), type(X.rho)(grid, symm(X.m[1].coeffs))),
    )
    out = spar_symbol_grid(0.8, grid, PARAMS).apply(X)
    for comp in out.components():
        flipped = np.conj(np.roll(comp.coeffs[::-1, ::-1], (1, 1), (0, 1)))
        assert np.array_equal(comp.coeffs, flipped)


def test_grid_symbol_matches_pointwise(rng):
    grid = make_grid(16, 7.0)
    t = 0.6
    sym = s_symbol_grid(t, grid, PARAMS)
    for _ in range(10):
        i, j = rng.integers(0, grid.n, size=2)
        eta = np.array([grid.eta1_odd[i, j], grid.eta2_odd[i, j]])
        block = s_symbol(t, eta, PARAMS)
        got = np.array(
            [
                [sym.a00[i, j], sym.a01[0][i, j], sym.a01[1][i, j]],
                [sym.a10[0][i, j], sym.a11[0, 0][i, j], sym.a11[0, 1][i, j]],
                [sym.a10[1][i, j], sym.a11[1, 0][i, j], sym.a11[1, 1][i, j]],
            ]
        )
        assert np.abs(got - block).max() < 1e-12


# ---------------------------------------------------------------------------
# cutoff / split


def test_cutoff_plateaus():
    spec = CutoffSpec(3.0)
    assert cutoff((1.5, 0.0), spec) == 1.0
    assert cutoff((5.0, 0.0), spec) == 0.0
    assert cutoff(3.5, spec) == pytest.approx(0.5)
    mags = np.linspace(0, 6, 200)
    vals = cutoff(mags, spec)
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.all((vals >= 0) & (vals <= 1))


def test_cutoff_rejects_bad_radius():
    with pytest.raises(KernelError):
        CutoffSpec(0.0)


def test_split_partition_of_unity(rng):
    grid = make_grid(32, 5.0)
    sym = s_symbol_grid(0.7, grid, PARAMS)
    lf, hf = split(sym, default_cutoff(PARAMS))
    rec = lf + hf
    assert np.abs(rec.a00 - sym.a00).max() < 1e-15 * max(1.0, np.abs(sym.a00).max())
    assert np.abs(rec.a11 - sym.a11).max() < 1e-15 * max(1.0, np.abs(sym.a11).max())


# ---------------------------------------------------------------------------
# wave kernel


def test_wave_kernel_values():
    assert wave_kernel_w(1.0, (0.0, 0.0), 1.0) == pytest.approx(1.0 / (2 * np.pi))
    assert wave_kernel_w(1.0, (1.0, 0.0), 1.0) == 0.0
    assert wave_kernel_w(1.0, (2.0, 0.0), 1.0) == 0.0
    assert wave_kernel_w(2.0, (1.0, 0.0), 1.0) == pytest.approx(1.0 / (2 * np.pi * np.sqrt(3)))
    with pytest.raises(KernelError):
        wave_kernel_w(0.0, (0.0, 0.0), 1.0)


# ---------------------------------------------------------------------------
# heat-Leray kernel norms


def test_heat_leray_rejects_zero_multi_index():
    grid = make_grid(64, 50.0)
    with pytest.raises(KernelError):
        heat_leray_kernel_norms(1.0, (0, 0), 2.0, grid, PARAMS)


def test_interpolation_inequality_on_heat_flow():
    # ||f||_{3/2} <= C ||f||_2^{2/3} |||x| f||_2^{1/3} with a t-stable ratio:
    # the mechanism behind the small-p rate of second-moment-free data
    from vortexlab.profiles import biot_savart, dipole_vorticity_field
    from vortexlab.spectral import SpectralField, derivative, lp_norm_vector

    grid = make_grid(256, 200.0)
    omega = dipole_vorticity_field(grid, 1, 1.0, PARAMS)
    m0 = biot_savart(derivative(omega, (1, 0)))
    radius = np.hypot(grid.xc1, grid.xc2)
    ratios = []
    for t in (2.0, 8.0, 32.0, 128.0):
        h = np.exp(-PARAMS.mu * grid.eta_sq * t)
        f = (SpectralField(grid, h * m0[0].coeffs), SpectralField(grid, h * m0[1].coeffs))
        mag = np.hypot(f[0].values(), f[1].values())
        n32 = (np.sum(mag**1.5) * grid.dx**2) ** (2.0 / 3.0)
        n2 = lp_norm_vector(f, 2)
        nw = float(np.sqrt(np.sum((radius * mag) ** 2) * grid.dx**2))
        ratios.append(n32 / (n2 ** (2.0 / 3.0) * nw ** (1.0 / 3.0)))
    ratios = np.array(ratios)
    assert ratios.max() < 4.0
    assert ratios.max() / ratios.min() < 1.5


def test_heat_leray_decay_slopes():
    grid = make_grid(256, 200.0)
    times = np.geomspace(1.0, 16.0, 7)
    for p, expected in ((2.0, -1.0), (np.inf, -1.5)):
        vals = [heat_leray_kernel_norms(t, (1, 0), p, grid, PARAMS) for t in times]
        slope = np.polyfit(np.log(times), np.log(vals), 1)[0]
        assert abs(slope - expected) < 0.05


# ---------------------------------------------------------------------------
# pointwise bound report (smoke; full criterion in acceptance)


def test_pointwise_bound_smoke():
    grid = make_grid(256, 100.0)
    report = pointwise_bound_report(PARAMS, grid, times=(1.0, 2.0, 4.0))
    assert report.ring_ok
    assert report.tail_ok
    assert np.isfinite(report.k_stability)


def test_pointwise_bound_rejects_escaping_ring():
    grid = make_grid(64, 20.0)
    with pytest.raises(KernelError):
        pointwise_bound_report(PARAMS, grid, times=(16.0,))


def test_heat_symbol_semigroup(rng):
    grid = make_grid(32, 5.0)
    X = random_state(grid, rng)
    a = heat_symbol_grid(0.5, grid, 1.0).apply(heat_symbol_grid(0.25, grid, 1.0).apply(X))
    b = heat_symbol_grid(0.75, grid, 1.0).apply(X)
    for ca, cb in zip(a.components(), b.components()):
        assert np.abs((ca - cb).coeffs).max() < 1e-12
