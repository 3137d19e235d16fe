"""Pulsed write/read protocol: hardware rates to herald coefficients, readout
conversion, and Hanbury Brown-Twiss click statistics.

Detection model
---------------
Each phonon is converted and detected independently with probability
eps*eta (binomial thinning), each detected photon goes to detector A with
probability ``split``, and a detector clicks at most once per pulse (dead
time longer than the pulse). With G(z) = sum_n P(n) z^n,

    p0 = G(1 - q),  P(A silent) = G(1 - q s),  P(B silent) = G(1 - q (1-s)).

The counting statistics ignore the vacuum input of the readout beam
splitter relation, which does not contribute to normally ordered moments.
"""

from dataclasses import dataclass
import cmath
import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from .errors import DomainError, RegimeError, RegimeWarning, UndefinedQError
from .fockspace import DensityMatrix


@dataclass(frozen=True)
class SystemParams:
    """Hardware constants, all rates in rad/s."""

    kappa: float
    gamma: float
    omega_m: float
    g0: float
    n_th: float = 0.0
    delta_c: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0 or self.gamma < 0 or self.omega_m <= 0 or self.g0 < 0:
            raise DomainError("kappa, omega_m must be > 0 and gamma, g0 >= 0")
        if self.n_th < 0:
            raise DomainError("n_th must be >= 0")

    def check_regime(self) -> list[str]:
        msgs = []
        if not self.kappa < self.omega_m:
            msgs.append(f"not sideband resolved: kappa={self.kappa:.3g} >= omega_m={self.omega_m:.3g}")
        if abs(self.delta_c) > self.kappa / 10:
            msgs.append(f"|delta_c|={abs(self.delta_c):.3g} exceeds kappa/10")
        for m in msgs:
            warnings.warn(m, RegimeWarning, stacklevel=2)
        return msgs


@dataclass(frozen=True)
class PulsePlan:
    """Write pulse: enhanced couplings G = g0 a_bar, duration tau_w.

    A common cavity phase is removed on construction so that G_R G_B is real
    and non-negative; the physical ratio G_R/G_B is untouched.
    """

    G_R: complex
    G_B: complex
    tau_w: float
    kappa: float

    def __post_init__(self):
        gr, gb = complex(self.G_R), complex(self.G_B)
        if self.tau_w < 0 or self.kappa <= 0:
            raise DomainError("tau_w must be >= 0 and kappa > 0")
        prod = gr * gb
        if prod != 0:
            rot = cmath.exp(-0.5j * cmath.phase(prod))
            gr, gb = gr * rot, gb * rot
        object.__setattr__(self, "G_R", gr)
        object.__setattr__(self, "G_B", gb)

    @property
    def gamma_R(self) -> float:
        return 4.0 * abs(self.G_R) ** 2 / self.kappa

    @property
    def gamma_B(self) -> float:
        return 4.0 * abs(self.G_B) ** 2 / self.kappa

    @property
    def G_w(self) -> float:
        return 0.5 * (self.gamma_R - self.gamma_B)

    def check_regime(self) -> list[str]:
        msgs = []
        for name, g in (("G_R", self.G_R), ("G_B", self.G_B)):
            if abs(g) > self.kappa / 10:
                msgs.append(f"not adiabatic: |{name}|={abs(g):.3g} > kappa/10")
        for name, rate in (("gamma_R", self.gamma_R), ("gamma_B", self.gamma_B)):
            if rate * self.tau_w > 0.1:
                msgs.append(f"pulse not short: {name}*tau_w = {rate * self.tau_w:.3g} > 0.1")
        for m in msgs:
            warnings.warn(m, RegimeWarning, stacklevel=2)
        return msgs


@dataclass(frozen=True)
class DetectionModel:
    eta: float
    epsilon: float
    split: float = 0.5

    def __post_init__(self):
        for name in ("eta", "epsilon", "split"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    @property
    def eps_eta(self) -> float:
        return self.epsilon * self.eta


class ClickProbabilities(NamedTuple):
    p0: float
    p1: float
    p2: float


def cavity_amplitude(omega_drive: float, Omega: complex, p: SystemParams) -> complex:
    """Steady intracavity amplitude Omega / (kappa/2 - i(delta_c + omega_drive)).

    ``omega_drive`` is measured in the frame rotating at the average drive
    frequency; the red/blue tones sit at -/+ omega_m.
    """
    return complex(Omega) / (0.5 * p.kappa - 1j * (p.delta_c + omega_drive))


def plan_from_drives(Omega_R: complex, Omega_B: complex, p: SystemParams,
                     tau_w: float) -> PulsePlan:
    g_r = p.g0 * cavity_amplitude(-p.omega_m, Omega_R, p)
    g_b = p.g0 * cavity_amplitude(p.omega_m, Omega_B, p)
    return PulsePlan(g_r, g_b, tau_w, p.kappa)


def plan_from_ratio(lam: float, theta: float, beta: complex, G_B_abs: float,
                    tau_w: float, kappa: float) -> PulsePlan:
    """Couplings with |G_R/G_B| = lam and arg(G_R G_B* beta^2) = theta."""
    arg_ratio = theta - 2.0 * cmath.phase(complex(beta)) if beta != 0 else theta
    g_b = complex(G_B_abs)
    return PulsePlan(lam * G_B_abs * cmath.exp(1j * arg_ratio), g_b, tau_w, kappa)


def _branch_factor(a: float) -> float:
    """arccos(e^-a)^2 / (2a) for a > 0 and arccosh(e^|a|)^2 / (2|a|) for a < 0; 1 at a = 0.

    Written with expm1 and half-angle forms so it stays accurate as a -> 0.
    """
    if a == 0:
        return 1.0
    if a > 0:
        angle = 2.0 * math.asin(math.sqrt(-math.expm1(-a) / 2.0))
    elif a > -1.0:
        angle = 2.0 * math.asinh(math.sqrt(math.expm1(-a) / 2.0))
    else:
        # arccosh(e^c) = c + log(1 + sqrt(1 - e^{-2c})) without forming e^c
        c = -a
        angle = c + math.log1p(math.sqrt(-math.expm1(-2.0 * c)))
    return angle * angle / (2.0 * abs(a))


def pulse_coefficients(plan: PulsePlan) -> tuple[complex, complex]:
    """(k_R, k_B) with k_R/k_B = G_R/G_B and cos(sqrt(|k_R|^2 - |k_B|^2)) = exp(-G_w tau_w).

    Writing x = |k_R|^2 - |k_B|^2 and using |k_R| = lam |k_B| gives
    |k_B|^2 = gamma_B tau_w * h(G_w tau_w) with h from ``_branch_factor``
    (cosh branch for G_w < 0). k_B is returned real and non-negative.
    """
    gr, gb = plan.G_R, plan.G_B
    if gr == 0 and gb == 0:
        return 0j, 0j
    a = plan.G_w * plan.tau_w
    if not math.isfinite(a):
        raise RegimeError("G_w*tau_w is not finite")
    h = _branch_factor(a)
    if gb == 0:
        # pure anti-Stokes: x = |k_R|^2 directly
        kr2 = 2.0 * a * h
        return complex(math.sqrt(kr2)), 0j
    kb2 = plan.gamma_B * plan.tau_w * h
    kb = math.sqrt(kb2)
    kr = kb * (gr / gb)
    if not (math.isfinite(kb) and cmath.isfinite(kr)):
        raise RegimeError("pulse coefficients are not finite")
    return kr, complex(kb)


def transcendental_residual(k_R: complex, k_B: complex, plan: PulsePlan) -> float:
    """|f(|k_R|^2 - |k_B|^2) - exp(-G_w tau_w)| with f = cos(sqrt(.)) continued to x < 0."""
    x = abs(k_R) ** 2 - abs(k_B) ** 2
    a = plan.G_w * plan.tau_w
    if x >= 0:
        return abs(math.cos(math.sqrt(x)) - math.exp(-a))
    # compare logarithms on the cosh branch so large gains do not overflow
    s = math.sqrt(-x)
    log_cosh = s + math.log1p(math.exp(-2.0 * s)) - math.log(2.0)
    return abs(log_cosh + a)


def readout_conversion(G_R: complex, kappa: float, tau_r: float) -> float:
    """Fraction 1 - exp(-2 G_r tau_r) of the phonon mode swapped out, G_r = 2|G_R|^2/kappa."""
    if tau_r < 0:
        raise DomainError("tau_r must be >= 0")
    g_r = 2.0 * abs(complex(G_R)) ** 2 / kappa
    return -math.expm1(-2.0 * g_r * tau_r)


def _populations(source) -> np.ndarray:
    if isinstance(source, DensityMatrix):
        return source.populations
    p = np.asarray(source, dtype=float)
    if p.ndim != 1 or np.any(p < 0):
        raise DomainError("populations must be a non-negative 1-D array")
    return p


def click_probabilities(rho, det: DetectionModel) -> ClickProbabilities:
    """p0, p1, p2 for a two-detector HBT setup with per-detector saturation.

    ``rho`` may be a DensityMatrix or a phonon-number distribution.
    """
    p = _populations(rho)
    p = p / p.sum()
    q = det.eps_eta
    s = det.split
    n = np.arange(p.size, dtype=float)
    if q == 0:
        return ClickProbabilities(1.0, 0.0, 0.0)
    if q >= 0.5:
        u_n = (1.0 - q) ** n
        a_n = (1.0 - q * s) ** n             # A silent
        b_n = (1.0 - q * (1.0 - s)) ** n     # B silent
        p0 = float(p @ u_n)
        p1 = float(p @ (a_n + b_n - 2.0 * u_n))
        p2 = float(p @ (1.0 - a_n - b_n + u_n))
        return ClickProbabilities(p0, p1, p2)
    # small-q path avoids the cancellation in 1 - A^n - B^n + u^n
    u = 1.0 - q
    u_n = np.exp(n * math.log1p(-q))
    only_a = u_n * np.expm1(n * math.log1p(q * s / u))
    only_b = u_n * np.expm1(n * math.log1p(q * (1.0 - s) / u))
    fire_a = -np.expm1(n * math.log1p(-q * s))
    fire_b = -np.expm1(n * math.log1p(-q * (1.0 - s)))
    overlap = u_n * np.expm1(n * math.log1p(q * q * s * (1.0 - s) / u))
    p0 = float(p @ u_n)
    p1 = float(p @ (only_a + only_b))
    p2 = float(p @ (fire_a * fire_b - overlap))
    return ClickProbabilities(p0, p1, p2)


def thin_distribution(pn, q: float) -> np.ndarray:
    """Detected-photon distribution after independent loss with survival probability q."""
    p = _populations(pn)
    if not 0.0 <= q <= 1.0:
        raise DomainError("thinning probability must lie in [0, 1]")
    n = np.arange(p.size)
    k = np.arange(p.size)
    kernel = binom.pmf(k[:, None], n[None, :], q)
    return kernel @ p


def distribution_q(pn) -> float:
    """Mandel Q of a number distribution."""
    p = _populations(pn)
    p = p / p.sum()
    n = np.arange(p.size, dtype=float)
    mean = p @ n
    if mean <= 0:
        raise UndefinedQError("distribution has zero mean")
    var = p @ (n * n) - mean * mean
    return float(var / mean - 1.0)


def q_from_clicks(p1: float, p2: float, eps_eta: float) -> float:
    """Click-based estimate (4 p2/p1 - p1) / (eps eta) of the phonon Mandel Q."""
    if not p1 > 0:
        raise UndefinedQError("no single clicks: estimator undefined")
    if not eps_eta > 0:
        raise DomainError("eps_eta must be > 0")
    return (4.0 * p2 / p1 - p1) / eps_eta
