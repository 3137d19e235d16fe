"""Continuous-wave multi-tone operation.

Linearised, adiabatic steady state of a cavity driven by several coherent
tones: sideband coefficients, the mechanical self-energy and the
renormalised frequency and damping, optical heating, beat-note
displacement, and the filter/timing relations for measuring in steady state.

Frequencies ``omega`` of tones are measured from the cavity resonance, all
rates in rad/s. Drive amplitudes Omega are in sqrt(photon flux).
"""

from dataclasses import dataclass, field, replace
import cmath
import math
from typing import NamedTuple, Sequence
import warnings

from .errors import ConvergenceError, DomainError, NoSolutionError, RegimeWarning
from .policy import DEFAULT_POLICY, NumericPolicy
from .pulse import SystemParams

TONE_TAGS = ("cool", "displace_plus", "displace_minus", "meas_red", "meas_blue", "custom")


@dataclass(frozen=True)
class DriveTone:
    omega: float
    Omega: complex
    tag: str = "custom"

    def __post_init__(self):
        if self.tag not in TONE_TAGS:
            raise ValueError(f"unknown tone tag {self.tag!r}")
        om = complex(self.Omega)
        if not (math.isfinite(self.omega) and cmath.isfinite(om)):
            raise DomainError("tone fields must be finite")
        object.__setattr__(self, "Omega", om)


@dataclass(frozen=True)
class FilterSpec:
    center: float
    W: float

    def __post_init__(self):
        if not self.W > 0:
            raise DomainError("filter bandwidth W must be > 0")

    def check_regime(self, p: SystemParams) -> list[str]:
        msgs = []
        if not abs(p.delta_c) < self.W:
            msgs.append(f"filter bandwidth W={self.W:.3g} not above |delta_c|={abs(p.delta_c):.3g}")
        if not self.W < p.omega_m:
            msgs.append(f"filter bandwidth W={self.W:.3g} does not resolve omega_m={p.omega_m:.3g}")
        for m in msgs:
            warnings.warn(m, RegimeWarning, stacklevel=2)
        return msgs


@dataclass(frozen=True)
class SteadyStateReport:
    sigma: complex = 0j
    gamma_eff: float = 0.0
    omega_m_eff: float = 0.0
    n_o: float = 0.0
    n_m: float = 0.0
    beta: complex = 0j
    b_c: complex = 0j
    beta_residual: float = 0.0
    fixed_point_iters: int = 0
    sigma_by_tag: dict = field(default_factory=dict)


class ToneCoefficients(NamedTuple):
    k_R: complex
    k_B: complex


class Displacement(NamedTuple):
    beta: complex
    b_c: complex
    residual: float


class ThermalBudget(NamedTuple):
    n_o: float
    n_m: float


class MeasurementTiming(NamedTuple):
    t_c: float
    period: float
    mismatch: float


def tone_amplitude(tone: DriveTone, kappa: float) -> complex:
    """a_j = Omega_j / (kappa/2 - i omega_j)."""
    return tone.Omega / (0.5 * kappa - 1j * tone.omega)


def sideband_coefficients(tones: Sequence[DriveTone], p: SystemParams,
                          omega_m_eff: float | None = None) -> list[ToneCoefficients]:
    """Per-tone anti-Stokes and Stokes coefficients (Fourier components at omega_j)."""
    wm = p.omega_m if omega_m_eff is None else omega_m_eff
    half = 0.5 * p.kappa
    if p.g0 > p.kappa / 10 or p.gamma > p.kappa / 10:
        warnings.warn("not adiabatic: g0 and gamma should be well below kappa",
                      RegimeWarning, stacklevel=2)
    out = []
    for t in tones:
        a = tone_amplitude(t, p.kappa)
        k_r = -1j * p.g0 * a / (half - 1j * (t.omega + wm))
        k_b = -1j * p.g0 * a / (half - 1j * (t.omega - wm))
        out.append(ToneCoefficients(k_r, k_b))
    return out


def tone_self_energy(tone: DriveTone, p: SystemParams, omega_m_eff: float) -> complex:
    """Single-tone contribution to Sigma; odd in tone.omega."""
    half = 0.5 * p.kappa
    w = tone.omega
    pref = -1j * p.g0 ** 2 * abs(tone.Omega) ** 2 / (half * half + w * w)
    bracket = 1.0 / (half - 1j * (omega_m_eff + w)) - 1.0 / (half - 1j * (omega_m_eff - w))
    return pref * bracket


def self_energy(tones: Sequence[DriveTone], p: SystemParams, omega_m_eff: float) -> complex:
    return sum((tone_self_energy(t, p, omega_m_eff) for t in tones), 0j)


def effective_mechanics(tones: Sequence[DriveTone], p: SystemParams,
                        policy: NumericPolicy = DEFAULT_POLICY) -> SteadyStateReport:
    """Sigma, gamma_eff = gamma - 2 Im Sigma and omega_m_eff = omega_m + Re Sigma.

    omega_m_eff appears on both sides; it is found by damped fixed-point
    iteration started from the first-order shift omega_m + Re Sigma(omega_m).
    """
    wm = p.omega_m + self_energy(tones, p, p.omega_m).real
    iters = 0
    residual = math.inf
    for iters in range(1, policy.fixed_point_maxiter + 1):
        target = p.omega_m + self_energy(tones, p, wm).real
        residual = abs(target - wm)
        if residual <= policy.fixed_point_rtol * abs(wm):
            wm = target
            break
        wm = (1.0 - policy.fixed_point_damping) * wm + policy.fixed_point_damping * target
    else:
        raise ConvergenceError(f"mechanical frequency fixed point did not converge "
                               f"(residual {residual:.3e})", residual=residual, iterations=iters)
    sigma = self_energy(tones, p, wm)
    by_tag: dict[str, complex] = {}
    for t in tones:
        by_tag[t.tag] = by_tag.get(t.tag, 0j) + tone_self_energy(t, p, wm)
    return SteadyStateReport(sigma=sigma, gamma_eff=p.gamma - 2.0 * sigma.imag,
                             omega_m_eff=wm, fixed_point_iters=iters, sigma_by_tag=by_tag)


def coherent_displacement(tones: Sequence[DriveTone], p: SystemParams,
                          report: SteadyStateReport,
                          policy: NumericPolicy = DEFAULT_POLICY) -> Displacement:
    """Resonant beat-note amplitude beta and the static shift b_c.

    Pairs (j, k) whose beat frequency omega_j - omega_k lies within
    ``policy.resonance_window * gamma_eff`` of omega_m_eff drive the
    mechanics resonantly and add up to beta. All other pairs oscillate off
    resonance; the sum of their moduli is returned as ``residual``.
    """
    g, wm = report.gamma_eff, report.omega_m_eff
    amps = [tone_amplitude(t, p.kappa) for t in tones]
    window = policy.resonance_window * g
    beta = 0j
    residual = 0.0
    for j, tj in enumerate(tones):
        for k, tk in enumerate(tones):
            if j == k:
                continue
            beat = tj.omega - tk.omega
            term = -1j * p.g0 * amps[j] * amps[k].conjugate() / (0.5 * g + 1j * wm - 1j * beat)
            if abs(beat - wm) <= window:
                beta += term
            else:
                residual += abs(term)
    b_c = sum((-1j * p.g0 * abs(a) ** 2 / (0.5 * g + 1j * wm) for a in amps), 0j)
    return Displacement(beta, b_c, residual)


def optical_occupation(tones: Sequence[DriveTone], p: SystemParams,
                       report: SteadyStateReport) -> float:
    """Backaction heating n_o: per-tone Stokes scattering divided by gamma_eff.

    The Stokes resonance of tone j sits at omega_j = +omega_m_eff, matching the
    denominator of k_B. Cross terms between tones are dropped.
    """
    g, wm = report.gamma_eff, report.omega_m_eff
    q = 0.25 * p.kappa ** 2
    total = 0.0
    for t in tones:
        a2 = abs(tone_amplitude(t, p.kappa)) ** 2
        total += p.g0 ** 2 * p.kappa * a2 / (q + (t.omega - wm) ** 2)
    if total == 0.0:
        return 0.0
    if g <= 0:
        raise DomainError(f"effective damping {g:.3e} is not positive: mechanics unstable")
    return total / g


def thermal_budget(tones: Sequence[DriveTone], p: SystemParams,
                   report: SteadyStateReport) -> ThermalBudget:
    """n_m = (gamma / gamma_eff) n_th + n_o."""
    n_o = optical_occupation(tones, p, report)
    g = report.gamma_eff
    bath = p.n_th if g == p.gamma else p.gamma / g * p.n_th
    return ThermalBudget(n_o, bath + n_o)


def displacement_pair_occupation(Omega_d: float, p: SystemParams,
                                 report: SteadyStateReport) -> float:
    """n_o of two equal displacement tones at -/+ omega_m_eff/2, closed form."""
    k2, w2 = p.kappa ** 2, report.omega_m_eff ** 2
    return (16.0 * p.g0 ** 2 * p.kappa * abs(Omega_d) ** 2 / (report.gamma_eff * (k2 + w2))
            * (1.0 / (k2 + w2) + 1.0 / (k2 + 9.0 * w2)))


def solve_steady_state(tones: Sequence[DriveTone], p: SystemParams,
                       policy: NumericPolicy = DEFAULT_POLICY) -> SteadyStateReport:
    rep = effective_mechanics(tones, p, policy)
    if rep.gamma_eff < p.gamma:
        warnings.warn(f"net optical heating: gamma_eff={rep.gamma_eff:.3g} < gamma={p.gamma:.3g}",
                      RegimeWarning, stacklevel=2)
    disp = coherent_displacement(tones, p, rep, policy)
    budget = thermal_budget(tones, p, rep)
    return replace(rep, n_o=budget.n_o, n_m=budget.n_m, beta=disp.beta, b_c=disp.b_c,
                   beta_residual=disp.residual)


def amplitude_bound(epsilon: float, p: SystemParams, omega_m_eff: float | None = None,
                    resolved: bool = False) -> float:
    """Largest |beta| from a displacement pair that keeps n_o below epsilon."""
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")
    wm = p.omega_m if omega_m_eff is None else omega_m_eff
    k, g0 = p.kappa, p.g0
    if g0 == 0:
        return math.inf
    if resolved:
        return 9.0 * wm * wm / (20.0 * k * g0) * epsilon
    k2, w2 = k * k, wm * wm
    return (k2 + w2) * (k2 + 9.0 * w2) / (4.0 * g0 * k * (k2 + 5.0 * w2)) * epsilon


def filter_leakage(delta_proj: float, W: float) -> complex:
    """Complex transmission 1/(1 - 2i delta_proj/W) of a line delta_proj off the filter centre."""
    if not W > 0:
        raise DomainError("filter bandwidth W must be > 0")
    return 1.0 / (1.0 - 2j * delta_proj / W)


def modified_k_R(k_R: complex, k_cool: complex, eta: complex, delta_proj: float,
                 t: float) -> complex:
    """Anti-Stokes coefficient including leaked cooling sideband: k_R + eta k_cool e^{i delta t}."""
    return k_R + eta * k_cool * cmath.exp(1j * delta_proj * t)


def ideal_measurement_time(k_R: complex, k_B: complex, k_cool: complex, eta: complex,
                           delta_proj: float, r_target: complex, beta: complex,
                           policy: NumericPolicy = DEFAULT_POLICY,
                           allow_mismatch: bool = False) -> MeasurementTiming:
    """Earliest t_c >= 0 with (k_R + eta k_cool e^{i delta t_c}) / k_B = (r - beta*) / beta.

    The phase condition is solved exactly; the modulus condition must hold to
    ``policy.modulus_rtol``. Otherwise ``NoSolutionError`` is raised (or the
    closest-approach time is returned when ``allow_mismatch``).
    """
    beta = complex(beta)
    if beta == 0 or k_B == 0:
        raise NoSolutionError("need nonzero beta and k_B")
    target = complex(k_B) * (complex(r_target) - beta.conjugate()) / beta - complex(k_R)
    leak = complex(eta) * complex(k_cool)
    period = math.inf if delta_proj == 0 else 2.0 * math.pi / abs(delta_proj)
    scale = max(abs(target), abs(leak), abs(k_B) * 1e-300)
    mismatch = abs(abs(leak) - abs(target)) / scale
    if abs(leak) == 0 or abs(target) == 0:
        t_c = 0.0
    else:
        phase = cmath.phase(target / leak)
        if delta_proj == 0:
            t_c = 0.0
            mismatch = max(mismatch, abs(cmath.phase(target / leak)) / math.pi)
        else:
            t_c = (phase / delta_proj) % period
    if mismatch > policy.modulus_rtol and not allow_mismatch:
        raise NoSolutionError(f"cooling leakage cannot reach the target coefficient "
                              f"(relative mismatch {mismatch:.3e})",
                              mismatch=mismatch, nearest=t_c)
    return MeasurementTiming(t_c, period, mismatch)


def five_tone_plan(omega_m: float, Omega_d: complex, Omega_cool: complex,
                   Omega_R: complex, Omega_B: complex, delta_proj: float,
                   Omega_d_minus: complex | None = None) -> list[DriveTone]:
    """Displacement pair at +/-omega_m/2, cooling at -omega_m, measurement pair at
    -/+omega_m + delta_proj."""
    dm = Omega_d if Omega_d_minus is None else Omega_d_minus
    return [
        DriveTone(0.5 * omega_m, Omega_d, "displace_plus"),
        DriveTone(-0.5 * omega_m, dm, "displace_minus"),
        DriveTone(-omega_m, Omega_cool, "cool"),
        DriveTone(-omega_m + delta_proj, Omega_R, "meas_red"),
        DriveTone(omega_m + delta_proj, Omega_B, "meas_blue"),
    ]
