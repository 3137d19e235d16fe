"""Mandel Q: exact from density matrices and from the closed forms.

Closed forms covered:

* ``q_highdisp`` -- the |beta| -> infinity limit for a displaced thermal
  initial state (reduces to the pure-state result at n_m = 0);
* ``q_conditioned_analytic`` -- the finite-|beta| result assembled from the
  five conditioned noise correlators;
* ``delta_q_sensitivity`` -- the quadratic penalty for drive miscalibration.
"""

from dataclasses import dataclass
import math
import warnings
from typing import NamedTuple

import numpy as np

from .errors import DegenerateError, DomainError, UndefinedQError
from .fockspace import DensityMatrix, _displacement, number_moments, required_dim
from .policy import DEFAULT_POLICY, NumericPolicy

Q_METHODS = ("numeric", "highdisp_pure", "highdisp_thermal", "conditioned_analytic")


@dataclass(frozen=True)
class QReport:
    q: float
    mean_n: float
    var_n: float
    method: str = "numeric"


def mandel_q(rho: DensityMatrix, policy: NumericPolicy = DEFAULT_POLICY) -> QReport:
    mean, var = number_moments(rho)
    if mean <= policy.min_norm:
        raise UndefinedQError(f"<n> = {mean:.3e}: Mandel Q undefined near vacuum")
    return QReport(var / mean - 1.0, mean, var, "numeric")


def cos_2phi(r: complex, beta: complex) -> float:
    """cos(2 arg(beta r)) straight from the complex numbers; 1 when beta r = 0."""
    z = complex(beta) * complex(r)
    a = abs(z)
    if a == 0:
        return 1.0
    return (z.real * z.real - z.imag * z.imag) / (a * a)


def q_highdisp(r_mag: float, phi: float, n_m: float = 0.0) -> float:
    """High-displacement Q of the conditional state.

    2 [(1 + 2 n_m - |r|^2 cos 2phi) / (1 + 2 n_m + |r|^2)^2 + n_m]
    """
    if r_mag < 0 or n_m < 0:
        raise DomainError("r_mag and n_m must be >= 0")
    a = 1.0 + 2.0 * n_m
    r2 = r_mag * r_mag
    return 2.0 * ((a - r2 * math.cos(2.0 * phi)) / (a + r2) ** 2 + n_m)


def q_highdisp_pure(r_mag: float, phi: float) -> float:
    """The n_m = 0 special case, 2 (1 - |r|^2 cos 2phi) / (1 + |r|^2)^2."""
    r2 = r_mag * r_mag
    return 2.0 * (1.0 - r2 * math.cos(2.0 * phi)) / (1.0 + r2) ** 2


class ConditionedCorrelators(NamedTuple):
    """Noise moments <.>_c of b_n = b - beta in the heralded state."""

    n2: float          # <b_n^dag b_n^dag b_n b_n>_c
    n1_b: complex      # <b_n^dag b_n b_n>_c
    n1: float          # <b_n^dag b_n>_c
    bb: complex        # <b_n b_n>_c
    b: complex         # <b_n>_c
    D: float


def conditioned_correlators(r: complex, beta: complex, n_m: float,
                            policy: NumericPolicy = DEFAULT_POLICY) -> ConditionedCorrelators:
    """Conditioned thermal-noise correlators in closed form.

    With P ~ r + k b_n + b_n^dag, k = (r - beta*)/beta, and a thermal b_n,
    D = |beta|^2 <P^dag P> = |beta|^2 (1 + |r|^2) + (2|beta|^2 + |r|^2 - 2 Re(beta r)) n_m.
    The fourth-order moment carries 2 + 2 n_m (1 - |r|^2) in its bracket;
    checked against brute-force conditioning in tests/test_mandel.py.
    """
    if n_m < 0:
        raise DomainError("n_m must be >= 0")
    r, beta = complex(r), complex(beta)
    b2 = abs(beta) ** 2
    r2 = abs(r) ** 2
    D = b2 * (1.0 + r2) + (2.0 * b2 + r2 - 2.0 * (beta * r).real) * n_m
    if not D > policy.min_norm:
        raise DegenerateError(f"conditioning normalisation D = {D:.3e} vanishes")
    rc = r.conjugate()
    common = n_m * r * beta * (rc - beta) + rc * b2 * (1.0 + n_m)
    n2 = 2.0 * n_m * (3.0 * D * n_m + b2 * (2.0 + 2.0 * n_m * (1.0 - r2))) / D
    n1_b = 2.0 * n_m * common / D
    n1 = (2.0 * D * n_m + b2 * (1.0 + n_m * (1.0 - r2))) / D
    bb = 2.0 * n_m * (1.0 + n_m) * beta * (rc - beta) / D
    b = common / D
    return ConditionedCorrelators(n2, n1_b, n1, bb, b, D)


def q_conditioned_analytic(r: complex, beta: complex, n_m: float = 0.0,
                           policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """Finite-|beta| Q of the heralded displaced thermal state."""
    beta = complex(beta)
    c = conditioned_correlators(r, beta, n_m, policy)
    bc = beta.conjugate()
    b2 = abs(beta) ** 2
    x = c.n1 + 2.0 * (bc * c.b).real
    num = (2.0 * b2 * c.n1 + 2.0 * (bc * bc * c.bb).real + 4.0 * (bc * c.n1_b).real
           + c.n2 - x * x)
    mean = b2 + x
    if not mean > policy.min_norm:
        raise UndefinedQError("conditional state has <n> = 0")
    return num / mean


@dataclass(frozen=True)
class SensitivityInput:
    delta_lambda: float
    delta_theta: float
    beta: complex
    n_m: float = 0.0

    def __post_init__(self):
        if self.n_m < 0:
            raise DomainError("n_m must be >= 0")
        lim = DEFAULT_POLICY.sensitivity_soft_limit
        if abs(self.delta_lambda) > lim or abs(self.delta_theta) > lim:
            warnings.warn("drive deviations above 0.2: quadratic expansion unreliable",
                          stacklevel=2)


def delta_q_sensitivity(s: SensitivityInput) -> float:
    """Excess Q from drive miscalibration, |beta|^2/(4(1+2n_m)^2) (3/4 dl^2 + dth^2)."""
    b2 = abs(complex(s.beta)) ** 2
    return b2 / (4.0 * (1.0 + 2.0 * s.n_m) ** 2) * (
        0.75 * s.delta_lambda ** 2 + s.delta_theta ** 2)


def thermal_threshold() -> float:
    """Largest n_m with a negative optimal high-displacement Q: root of 8 n (1 + 2n) = 1."""
    return (math.sqrt(2.0) - 1.0) / 4.0


def wigner_at(rho: DensityMatrix, alpha: complex,
              policy: NumericPolicy = DEFAULT_POLICY) -> float:
    """W(alpha) = (2/pi) Tr[D(-alpha) rho D(alpha) Pi].

    The state is displaced inside a working space large enough for both its
    own support and |alpha|, so no level of the original state hits the edge.
    """
    alpha = complex(alpha)
    d = rho.dim
    if alpha == 0:
        par = (-1.0) ** np.arange(d)
        return float(2.0 / math.pi * (rho.elements.diagonal().real @ par))
    wd = max(d, required_dim(abs(alpha) + math.sqrt(d), policy=policy))
    work = np.zeros((wd, wd), dtype=complex)
    work[:d, :d] = rho.elements
    u = _displacement(-alpha, wd)
    shifted = u @ work @ u.conj().T
    par = (-1.0) ** np.arange(wd)
    val = complex(2.0 / math.pi * (shifted.diagonal() @ par))
    return float(val.real)
