import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from optoherald.errors import DomainError, RegimeError, RegimeWarning, UndefinedQError
from optoherald.fockspace import prepare_state
from optoherald.pulse import (
    DetectionModel,
    PulsePlan,
    SystemParams,
    cavity_amplitude,
    click_probabilities,
    distribution_q,
    plan_from_drives,
    plan_from_ratio,
    pulse_coefficients,
    q_from_clicks,
    readout_conversion,
    thin_distribution,
    transcendental_residual,
)


def root_find_kb2(plan):
    """|k_B|^2 from a bracketing solve of cos(sqrt(x)) = exp(-G_w tau) with x = |k_B|^2 (lam^2 - 1)."""
    lam2 = abs(plan.G_R / plan.G_B) ** 2
    target = math.exp(-plan.G_w * plan.tau_w)
    if lam2 > 1:
        f = lambda y: math.cos(math.sqrt(y * (lam2 - 1))) - target
        return brentq(f, 1e-300, math.pi ** 2 / (lam2 - 1), xtol=1e-300, rtol=1e-15)
    f = lambda y: math.cosh(math.sqrt(y * (1 - lam2))) - target
    return brentq(f, 1e-300, 50.0 / (1 - lam2), xtol=1e-300, rtol=1e-15)


def test_worked_example_against_root_find():
    plan = PulsePlan(math.sqrt(2) * 0.05, 0.05, 1.0, 1.0)
    k_r, k_b = pulse_coefficients(plan)
    kb2 = root_find_kb2(plan)
    assert abs(k_b) ** 2 == pytest.approx(kb2, rel=1e-12)
    assert abs(k_r) ** 2 == pytest.approx(2 * kb2, rel=1e-12)
    assert abs(k_b) ** 2 == pytest.approx(0.0099833, rel=1e-5)
    assert transcendental_residual(k_r, k_b, plan) < 1e-15


@pytest.mark.parametrize("g_r,g_b", [(0.03, 0.05), (0.05 * cmath.exp(0.4j), 0.02), (0.01, 0.0101)])
def test_both_branches_against_root_find(g_r, g_b):
    plan = PulsePlan(g_r, g_b, 2.0, 1.0)
    k_r, k_b = pulse_coefficients(plan)
    assert abs(k_b) ** 2 == pytest.approx(root_find_kb2(plan), rel=1e-10)
    assert k_r / k_b == pytest.approx(plan.G_R / plan.G_B, rel=1e-12)
    assert transcendental_residual(k_r, k_b, plan) < 1e-14


def test_balanced_rates_reduce_to_gamma_tau():
    plan = PulsePlan(0.05, 0.05, 1.0, 1.0)
    _, k_b = pulse_coefficients(plan)
    assert abs(k_b) ** 2 == pytest.approx(plan.gamma_B * plan.tau_w, rel=1e-15)


def test_tiny_imbalance_is_stable():
    plan = PulsePlan(0.05 * (1 + 1e-12), 0.05, 1.0, 1.0)
    _, k_b = pulse_coefficients(plan)
    assert abs(k_b) ** 2 == pytest.approx(0.01, rel=1e-9)


def test_zero_power_and_pure_subtraction():
    assert pulse_coefficients(PulsePlan(0, 0, 1.0, 1.0)) == (0j, 0j)
    k_r, k_b = pulse_coefficients(PulsePlan(0.05, 0, 1.0, 1.0))
    assert k_b == 0
    assert math.cos(abs(k_r)) == pytest.approx(math.exp(-0.005), rel=1e-14)


def test_strong_stokes_gain_stays_finite():
    plan = PulsePlan(0.0, 1.0, 1e4, 1.0)
    _, k_b = pulse_coefficients(plan)
    c = -plan.G_w * plan.tau_w
    expected = (c + math.log1p(math.sqrt(-math.expm1(-2 * c)))) ** 2
    assert abs(k_b) ** 2 == pytest.approx(expected, rel=1e-12)
    assert transcendental_residual(0.0, k_b, plan) < 1e-9
    with pytest.raises(RegimeError):
        pulse_coefficients(PulsePlan(0.0, 1.0, math.inf, 1.0))


def test_plan_phase_and_regime():
    plan = PulsePlan(0.01j, 0.02, 1.0, 1.0)
    assert (plan.G_R * plan.G_B).imag == pytest.approx(0.0, abs=1e-18)
    assert plan.G_R / plan.G_B == pytest.approx(0.5j)
    with pytest.warns(RegimeWarning):
        PulsePlan(0.5, 0.5, 1.0, 1.0).check_regime()


def test_plan_from_ratio():
    beta = 3.0 * cmath.exp(0.3j)
    plan = plan_from_ratio(0.8, 2.5, beta, 0.01, 1.0, 1.0)
    q = plan.G_R / plan.G_B
    assert abs(q) == pytest.approx(0.8)
    assert cmath.phase(q * beta ** 2) == pytest.approx(2.5)


def test_system_params():
    with pytest.raises(DomainError):
        SystemParams(kappa=-1.0, gamma=0.0, omega_m=1.0, g0=0.0)
    p = SystemParams(kappa=2.0, gamma=0.0, omega_m=1.0, g0=0.0)
    with pytest.warns(RegimeWarning):
        p.check_regime()


def test_cavity_amplitude_and_drive_plan():
    p = SystemParams(kappa=1.0, gamma=1e-6, omega_m=20.0, g0=1e-3)
    assert cavity_amplitude(0.0, 1.0, p) == pytest.approx(2.0)
    assert abs(cavity_amplitude(-20.0, 1.0, p)) == pytest.approx(1 / math.sqrt(0.25 + 400))
    plan = plan_from_drives(10.0, 10.0, p, 1.0)
    assert abs(plan.G_R) == pytest.approx(abs(plan.G_B))


def test_readout_conversion():
    assert readout_conversion(0.0, 1.0, 5.0) == 0.0
    g_r = 2 * 0.1 ** 2 / 1.0
    assert readout_conversion(0.1, 1.0, 3.0) == pytest.approx(1 - math.exp(-2 * g_r * 3.0))
    with pytest.raises(DomainError):
        readout_conversion(0.1, 1.0, -1.0)


def test_detection_model_domain():
    with pytest.raises(DomainError):
        DetectionModel(1.2, 0.5)
    assert DetectionModel(0.5, 0.2).eps_eta == pytest.approx(0.1)


@pytest.mark.parametrize("q", [1e-7, 1e-3, 0.2, 0.7, 1.0])
@pytest.mark.parametrize("split", [0.5, 0.3])
def test_clicks_for_coherent_state(q, split):
    beta = 2.0
    n = beta ** 2
    pn = prepare_state("coherent", beta).populations
    c = click_probabilities(pn, DetectionModel(1.0, q, split))
    a = -math.expm1(-q * split * n)
    b = -math.expm1(-q * (1 - split) * n)
    assert c.p0 == pytest.approx(math.exp(-q * n), rel=1e-10)
    assert c.p2 == pytest.approx(a * b, rel=1e-9)
    assert c.p1 == pytest.approx(a + b - 2 * a * b, rel=1e-9)
    assert c.p0 + c.p1 + c.p2 == pytest.approx(1.0, abs=1e-13)


def test_clicks_for_fock_states():
    det = DetectionModel(0.5, 0.2)
    one = click_probabilities(prepare_state("fock", n=1), det)
    assert one.p1 == pytest.approx(0.1) and one.p2 == pytest.approx(0.0, abs=1e-16)
    two = click_probabilities(prepare_state("fock", n=2), det)
    assert two.p2 == pytest.approx(0.01 * 2 * 0.25)


def test_thinning_identity():
    for kind, kw in (("thermal", {"n_m": 1.3}), ("coherent", {"beta": 2.5}), ("fock", {"n": 4}),
                     ("displaced_thermal", {"beta": 2.0, "n_m": 0.4})):
        pn = prepare_state(kind, **kw).populations
        for q in (0.005, 0.3, 0.9):
            assert distribution_q(thin_distribution(pn, q)) == pytest.approx(
                q * distribution_q(pn), abs=1e-10)


def test_thinned_coherent_stays_poissonian():
    pn = prepare_state("coherent", 3.0).populations
    out = thin_distribution(pn, 0.25)
    mean = out @ np.arange(out.size)
    assert mean == pytest.approx(0.25 * 9.0, rel=1e-12)


def test_click_estimator_on_classical_states():
    eps = 1e-3
    thermal = click_probabilities(prepare_state("thermal", n_m=1.0), DetectionModel(1.0, eps))
    assert q_from_clicks(thermal.p1, thermal.p2, eps) == pytest.approx(1.0, rel=0.01)
    coh = click_probabilities(prepare_state("coherent", 1.0), DetectionModel(1.0, eps))
    assert q_from_clicks(coh.p1, coh.p2, eps) == pytest.approx(0.0, abs=2e-3)
    with pytest.raises(UndefinedQError):
        q_from_clicks(0.0, 0.0, eps)


@settings(max_examples=30, deadline=None)
@given(n_m=st.floats(0.01, 2.0), q=st.floats(1e-6, 1.0))
def test_clicks_are_a_distribution(n_m, q):
    c = click_probabilities(prepare_state("thermal", n_m=n_m), DetectionModel(1.0, q))
    assert min(c) >= -1e-15
    assert sum(c) == pytest.approx(1.0, abs=1e-12)
