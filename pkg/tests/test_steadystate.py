import cmath
import math

import pytest
from hypothesis import given, settings, strategies as st

from optoherald.errors import ConvergenceError, DomainError, NoSolutionError, RegimeWarning
from optoherald.policy import DEFAULT_POLICY
from optoherald.pulse import SystemParams
from optoherald.steadystate import (
    DriveTone,
    FilterSpec,
    SteadyStateReport,
    amplitude_bound,
    coherent_displacement,
    displacement_pair_occupation,
    effective_mechanics,
    filter_leakage,
    five_tone_plan,
    ideal_measurement_time,
    modified_k_R,
    self_energy,
    sideband_coefficients,
    solve_steady_state,
    thermal_budget,
    tone_self_energy,
)

P = SystemParams(kappa=1.0, gamma=1e-6, omega_m=10.0, g0=1e-3, n_th=50.0)


def test_tone_validation():
    with pytest.raises(ValueError):
        DriveTone(1.0, 1.0, "loud")
    with pytest.raises(DomainError):
        DriveTone(math.nan, 1.0)


def test_sideband_resonances():
    wm = P.omega_m
    (red,) = sideband_coefficients([DriveTone(-wm, 5.0, "cool")], P)
    a = 5.0 / (0.5 - 1j * (-wm))
    assert red.k_R == pytest.approx(-1j * P.g0 * a / 0.5)
    (blue,) = sideband_coefficients([DriveTone(wm, 5.0)], P)
    assert abs(blue.k_B) / abs(blue.k_R) == pytest.approx(math.sqrt((0.25 + 4 * wm ** 2) / 0.25))
    dark = SystemParams(kappa=1.0, gamma=0.0, omega_m=10.0, g0=0.0)
    assert sideband_coefficients([DriveTone(3.0, 7.0)], dark) == [(0j, 0j)]


def test_sideband_warns_outside_adiabatic_regime():
    with pytest.warns(RegimeWarning):
        sideband_coefficients([DriveTone(1.0, 1.0)], SystemParams(1.0, 0.0, 10.0, 0.5))


def test_cooling_tone_self_energy_closed_form():
    w, amp = 9.7, 100.0
    sigma = tone_self_energy(DriveTone(-w, amp, "cool"), P, w)
    expected = -4 * w * 1e-6 * amp ** 2 / (1.0 * (0.25 + w * w) * (0.5 - 2j * w))
    assert sigma == pytest.approx(expected, rel=1e-12)
    damping = 16 * w ** 2 * 1e-6 * amp ** 2 / ((0.25 + w ** 2) * (0.25 + 4 * w ** 2))
    assert -2 * sigma.imag == pytest.approx(damping, rel=1e-12)


def test_cooling_tone_damping():
    rep = effective_mechanics([DriveTone(-10.0, 100.0, "cool")], P)
    assert rep.gamma_eff - P.gamma == pytest.approx(3.99e-4, rel=2e-3)
    # the tone sits at the bare frequency, a relative 5e-7 away from -omega_m_eff
    w = rep.omega_m_eff
    expected = 16 * w ** 2 * 1e-6 * 1e4 / (1.0 * (0.25 + w ** 2) * (0.25 + 4 * w ** 2))
    assert rep.gamma_eff - P.gamma == pytest.approx(expected, rel=1e-5)


def test_fixed_point_is_self_consistent():
    tones = [DriveTone(-10.0, 1000.0, "cool"), DriveTone(4.0, 500.0)]
    rep = effective_mechanics(tones, P)
    back = P.omega_m + self_energy(tones, P, rep.omega_m_eff).real
    assert back == pytest.approx(rep.omega_m_eff, rel=1e-12)
    assert rep.fixed_point_iters <= DEFAULT_POLICY.fixed_point_maxiter


def test_non_adiabatic_drive_does_not_converge():
    # gamma_eff ~ kappa/3: the damped iteration contracts too slowly for 50 steps
    with pytest.raises(ConvergenceError) as exc:
        effective_mechanics([DriveTone(-10.0, 3000.0, "cool"), DriveTone(4.0, 500.0)], P)
    assert exc.value.iterations == DEFAULT_POLICY.fixed_point_maxiter
    assert 0 < exc.value.residual < 1e-6


def test_fixed_point_failure_reports_residual():
    policy = DEFAULT_POLICY.with_overrides({"fixed_point_maxiter": 1})
    with pytest.raises(ConvergenceError) as exc:
        effective_mechanics([DriveTone(-10.0, 3000.0, "cool")], P, policy)
    assert exc.value.residual > 0


def test_no_drives():
    rep = solve_steady_state([], P)
    assert rep.sigma == 0 and rep.gamma_eff == P.gamma and rep.omega_m_eff == P.omega_m
    assert rep.n_m == P.n_th and rep.n_o == 0


def test_symmetric_pair_cancels():
    pair = [DriveTone(5.0, 40.0), DriveTone(-5.0, 40.0 * cmath.exp(1.0j))]
    assert abs(self_energy(pair, P, P.omega_m)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(w=st.floats(-40, 40), amp=st.floats(0, 1e3), wm=st.floats(1, 50))
def test_self_energy_antisymmetric(w, amp, wm):
    s = tone_self_energy(DriveTone(w, amp), P, wm) + tone_self_energy(DriveTone(-w, amp), P, wm)
    assert abs(s) <= 1e-12 * max(1.0, abs(tone_self_energy(DriveTone(w, amp), P, wm)))


def test_displacement_pair_amplitude():
    rep = SteadyStateReport(gamma_eff=1e-3, omega_m_eff=10.0)
    p = SystemParams(kappa=1.0, gamma=1e-4, omega_m=10.0, g0=1e-3)
    tones = [DriveTone(5.0, 10.0, "displace_plus"), DriveTone(-5.0, 10.0, "displace_minus")]
    d = coherent_displacement(tones, p, rep)
    expected = -8j * 1e-3 * 100.0 / (1e-3 * (1.0 - 10.0j) ** 2)
    assert d.beta == pytest.approx(expected, rel=1e-12)
    assert abs(d.beta) == pytest.approx(7.92, rel=1e-3)
    assert d.residual > 0
    swapped = [DriveTone(5.0, 10.0j, "displace_plus"), DriveTone(-5.0, 10.0, "displace_minus")]
    assert abs(coherent_displacement(swapped, p, rep).beta) == pytest.approx(abs(d.beta))


def test_no_resonant_beat_gives_zero_beta():
    rep = SteadyStateReport(gamma_eff=1e-3, omega_m_eff=10.0)
    d = coherent_displacement([DriveTone(2.0, 10.0), DriveTone(-2.0, 10.0)], P, rep)
    assert d.beta == 0 and d.residual > 0
    assert d.b_c != 0


def test_cooling_limit():
    p = SystemParams(kappa=1.0, gamma=1e-6, omega_m=50.0, g0=1e-3)
    w = 50.0
    amp = math.sqrt(1e-3 * (0.25 + w * w) * (0.25 + 4 * w * w) / (16 * w * w * 1e-6))
    rep = solve_steady_state([DriveTone(-w, amp, "cool")], p)
    assert rep.gamma_eff / p.gamma == pytest.approx(1001, rel=1e-3)
    assert rep.n_o == pytest.approx((1 / (4 * rep.omega_m_eff)) ** 2, rel=0.01)


def test_displacement_pair_occupation_closed_form():
    p = SystemParams(kappa=1.0, gamma=1e-5, omega_m=10.0, g0=1e-3)
    rep = SteadyStateReport(gamma_eff=2e-3, omega_m_eff=10.0)
    tones = [DriveTone(5.0, 30.0, "displace_plus"), DriveTone(-5.0, 30.0, "displace_minus")]
    n_o, _ = thermal_budget(tones, p, rep)
    assert n_o == pytest.approx(displacement_pair_occupation(30.0, p, rep), rel=1e-12)


def test_occupation_without_coupling():
    p = SystemParams(kappa=1.0, gamma=1e-6, omega_m=10.0, g0=0.0, n_th=12.0)
    rep = solve_steady_state([DriveTone(-10.0, 1e3, "cool")], p)
    assert rep.n_m == 12.0 and rep.n_o == 0.0


def test_amplitude_bound():
    p = SystemParams(kappa=1.0, gamma=0.0, omega_m=6.0, g0=1e-4)
    exact = amplitude_bound(0.1, p)
    assert exact == pytest.approx(37 * 325 / (4e-4 * 181) * 0.1, rel=1e-12)
    assert amplitude_bound(0.2, p) == pytest.approx(2 * exact)
    wide = SystemParams(kappa=1.0, gamma=0.0, omega_m=100.0, g0=1e-4)
    ratio = amplitude_bound(1.0, wide) / amplitude_bound(1.0, wide, resolved=True)
    assert abs(ratio - 1) < 1e-3
    with pytest.raises(DomainError):
        amplitude_bound(0.0, p)


def test_amplitude_bound_matches_occupation_threshold():
    # at the bound, a displacement pair producing |beta| has n_o = epsilon
    p = SystemParams(kappa=1.0, gamma=1e-6, omega_m=6.0, g0=1e-4)
    rep = SteadyStateReport(gamma_eff=1e-3, omega_m_eff=6.0)
    eps = 0.05
    bound = amplitude_bound(eps, p, 6.0)
    # |beta| = 8 g0 Od^2 / (gamma |kappa - i w|^2) for the pair
    od2 = bound * rep.gamma_eff * (1 + 36) / (8 * p.g0)
    assert displacement_pair_occupation(math.sqrt(od2), p, rep) == pytest.approx(eps, rel=1e-12)


def test_filter_leakage():
    assert filter_leakage(0.0, 2.0) == 1
    assert abs(filter_leakage(1.0, 2.0)) == pytest.approx(1 / math.sqrt(2))
    assert abs(filter_leakage(1e12, 1.0)) < 1e-11
    mags = [abs(filter_leakage(d, 1.0)) for d in (0.0, 0.1, 1.0, 5.0, 50.0)]
    assert mags == sorted(mags, reverse=True)
    with pytest.raises(DomainError):
        FilterSpec(0.0, 0.0)


def test_filter_regime_warning():
    with pytest.warns(RegimeWarning):
        FilterSpec(0.0, 20.0).check_regime(P)


def test_measurement_time_trivial():
    beta, r = 3.0, 1.5
    k_b = 0.1
    k_r = k_b * (r - beta) / beta
    t = ideal_measurement_time(k_r, k_b, 0.0, 1.0, 0.5, r, beta)
    assert t.t_c == 0.0 and t.mismatch == 0.0


def test_measurement_time_with_cooling_source():
    beta, r, k_b, delta = 2.0 * cmath.exp(0.3j), 1.7, 0.05, 0.8
    target = k_b * (r - beta.conjugate()) / beta
    eta = filter_leakage(delta, 0.4)
    k_cool = target / eta * cmath.exp(-0.9j)
    t = ideal_measurement_time(0.0, k_b, k_cool, eta, delta, r, beta)
    assert 0 <= t.t_c < t.period
    assert t.period == pytest.approx(2 * math.pi / delta)
    expected = (cmath.phase(target / (eta * k_cool)) / delta) % t.period
    assert t.t_c == pytest.approx(expected)
    # substitute back
    lhs = modified_k_R(0.0, k_cool, eta, delta, t.t_c) / k_b
    assert lhs == pytest.approx((r - beta.conjugate()) / beta, rel=1e-12)
    faster = ideal_measurement_time(0.0, k_b, k_cool, eta, 2 * delta, r, beta)
    assert faster.period == pytest.approx(t.period / 2)


def test_measurement_time_unreachable():
    with pytest.raises(NoSolutionError) as exc:
        ideal_measurement_time(0.0, 0.05, 1e-4, 1.0, 0.5, 1.7, 2.0)
    assert exc.value.mismatch > 0.5
    assert exc.value.nearest is not None
    t = ideal_measurement_time(0.0, 0.05, 1e-4, 1.0, 0.5, 1.7, 2.0, allow_mismatch=True)
    assert t.mismatch == pytest.approx(exc.value.mismatch)


def test_five_tone_plan_pair_cancellation():
    p = SystemParams(kappa=1.0, gamma=1e-6, omega_m=20.0, g0=1e-3)
    tones = five_tone_plan(20.0, 30.0, 200.0, 5.0, 5.0, 0.0)
    rep = effective_mechanics(tones, p)
    by = rep.sigma_by_tag
    assert abs(by["displace_plus"] + by["displace_minus"]) < 1e-12
    assert abs(by["meas_red"] + by["meas_blue"]) < 1e-12
    assert rep.sigma == pytest.approx(by["cool"], abs=1e-12)
    shifted = effective_mechanics(five_tone_plan(20.0, 30.0, 200.0, 5.0, 5.0, 0.3), p)
    assert abs(shifted.sigma_by_tag["displace_plus"] + shifted.sigma_by_tag["displace_minus"]) < 1e-12
