"""Self-check suite run by ``optoherald validate``.

Each check returns a measured error and the tolerance it must stay below.
"""

import math

import numpy as np

from . import __version__
from .fockspace import (
    displacement_operator,
    number_moments,
    prepare_state,
    required_dim,
)
from .herald import HeraldSpec, conditional_state, optimal_r_magnitude
from .mandel import mandel_q, q_conditioned_analytic, q_highdisp, thermal_threshold, wigner_at
from .policy import DEFAULT_POLICY, NumericPolicy
from .pulse import SystemParams, distribution_q, thin_distribution
from .steadystate import DriveTone, filter_leakage, tone_self_energy
from .table import ResultTable


def _unitarity(policy):
    d = displacement_operator(2.0 - 1.0j, required_dim(math.sqrt(5.0), policy=policy), policy)
    m = d.elements
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max()), policy.unitarity_tol


def _state_validity(policy):
    rho = prepare_state("displaced_thermal", 3.0, 0.5, policy=policy)
    ev = np.linalg.eigvalsh(rho.elements)
    err = max(float(np.abs(rho.elements - rho.elements.conj().T).max()),
              max(0.0, -float(ev.min())), abs(float(np.trace(rho.elements).real) - 1.0))
    return err, policy.positivity_tol


def _truncation(policy):
    d = required_dim(4.0, 1.0, policy=policy)
    a = number_moments(prepare_state("displaced_thermal", 4.0, 1.0, dim=d, policy=policy))
    b = number_moments(prepare_state("displaced_thermal", 4.0, 1.0, dim=2 * d, policy=policy))
    return max(abs(x - y) / abs(y) for x, y in zip(a, b)), 1e-8


def _wigner(policy):
    vac = prepare_state("fock", n=0, policy=policy)
    one = prepare_state("displaced_fock", 1.5, n=1, policy=policy)
    err = max(abs(wigner_at(vac, 0.0, policy) - 2.0 / math.pi),
              abs(wigner_at(one, 1.5, policy) + 2.0 / math.pi))
    return err, 1e-10


def _extrema(policy):
    err = max(abs(q_highdisp(math.sqrt(3.0), 0.0, 0.0) + 0.25), abs(q_highdisp(0.0, 0.0, 0.0) - 2.0))
    return err, 1e-12


def _threshold(policy):
    n = thermal_threshold()
    return abs(q_highdisp(optimal_r_magnitude(n), 0.0, n)), 1e-12


def _analytic_numeric(policy):
    beta, n_m, r = 2.0, 0.5, 1.3 * np.exp(0.4j)
    rho = prepare_state("displaced_thermal", beta, n_m, n=1, policy=policy)
    cond, _ = conditional_state(rho, HeraldSpec.from_r(r, beta), policy)
    qa = q_conditioned_analytic(r, beta, n_m, policy)
    return abs(qa - mandel_q(cond, policy).q) / abs(qa), 1e-6


def _antisymmetry(policy):
    p = SystemParams(kappa=1.0, gamma=1e-6, omega_m=10.0, g0=1e-3)
    s = tone_self_energy(DriveTone(3.0, 50.0), p, 10.0) + tone_self_energy(DriveTone(-3.0, 50.0), p, 10.0)
    return abs(s), 1e-12


def _thinning(policy):
    q = 0.3
    errs = []
    for kind, kw in (("thermal", {"n_m": 1.0}), ("coherent", {"beta": 2.0}), ("fock", {"n": 3})):
        pn = prepare_state(kind, policy=policy, **kw).populations
        src = distribution_q(pn)
        errs.append(abs(distribution_q(thin_distribution(pn, q)) - q * src))
    return max(errs), 1e-10


def _filter(policy):
    return abs(abs(filter_leakage(0.5, 1.0)) - 1.0 / math.sqrt(2.0)), 1e-14


CHECKS = {
    "displacement_unitarity": _unitarity,
    "displaced_thermal_validity": _state_validity,
    "truncation_convergence": _truncation,
    "wigner_anchors": _wigner,
    "q_highdisp_extrema": _extrema,
    "thermal_threshold_root": _threshold,
    "analytic_vs_numeric_q": _analytic_numeric,
    "self_energy_antisymmetry": _antisymmetry,
    "thinning_identity": _thinning,
    "filter_half_width": _filter,
}


def run_checks(policy: NumericPolicy = DEFAULT_POLICY) -> ResultTable:
    rows = []
    for name, fn in CHECKS.items():
        err, tol = fn(policy)
        rows.append((name, float(err), float(tol), "pass" if err <= tol else "fail"))
    meta = {"tool": f"optoherald {__version__}", "command": "validate"}
    return ResultTable(["check", "error", "tolerance", "status"], rows, meta)
