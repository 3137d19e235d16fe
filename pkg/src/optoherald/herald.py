"""Single-photon heralding: P = k_R b + k_B b^dag and its conditional state.

The primitive object is the pair (k_R, k_B). The superposition parameter
r = beta* + beta k_R / k_B is a derived view; it does not exist for pure
phonon subtraction (k_B = 0), which is still a valid herald.
"""

from dataclasses import dataclass
import cmath
import math
from typing import NamedTuple

import numpy as np

from .errors import DegenerateError, DomainError, TruncationError, ZeroLikelihoodError
from .fockspace import (
    DensityMatrix,
    OperatorMatrix,
    _crop,
    _displacement,
    _work_dim,
    ladder_matrix,
    required_dim,
)
from .policy import DEFAULT_POLICY, NumericPolicy


@dataclass(frozen=True)
class HeraldSpec:
    """Herald coefficients plus the initial displacement they refer to.

    The overall phase is irrelevant for the conditional state, so it is fixed
    on construction: k_B real and non-negative (k_R real non-negative when
    k_B = 0).
    """

    k_R: complex
    k_B: complex
    beta: complex = 0.0

    def __post_init__(self):
        kr, kb = complex(self.k_R), complex(self.k_B)
        if kr == 0 and kb == 0:
            raise ZeroLikelihoodError("herald operator vanishes: k_R = k_B = 0")
        ref = kb if kb != 0 else kr
        phase = ref.conjugate() / abs(ref)
        object.__setattr__(self, "k_R", kr * phase)
        object.__setattr__(self, "k_B", kb * phase)
        object.__setattr__(self, "beta", complex(self.beta))

    @classmethod
    def from_r(cls, r: complex, beta: complex) -> "HeraldSpec":
        """Coefficients realising a given r for displacement beta (k_B = 1)."""
        beta = complex(beta)
        if beta == 0:
            raise DegenerateError("r does not determine k_R/k_B when beta = 0")
        return cls((complex(r) - beta.conjugate()) / beta, 1.0, beta)

    @property
    def ratio(self) -> complex | None:
        return None if self.k_B == 0 else self.k_R / self.k_B

    @property
    def r(self) -> complex | None:
        """beta* + beta k_R/k_B, or None for pure phonon subtraction."""
        q = self.ratio
        return None if q is None else self.beta.conjugate() + self.beta * q


@dataclass(frozen=True)
class DriveRatio:
    """lam = |G_R/G_B| and theta = arg(G_R G_B* beta^2)."""

    lam: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"drive ratio must be finite and positive, got {self.lam}")
        th = math.remainder(float(self.theta), 2 * math.pi)
        if th == -math.pi:
            th = math.pi
        object.__setattr__(self, "theta", th)


class DriveMapping(NamedTuple):
    r: complex
    phi: float
    degenerate: bool


def herald_operator(spec: HeraldSpec, dim: int) -> OperatorMatrix:
    b = ladder_matrix(dim).elements
    return OperatorMatrix(spec.k_R * b + spec.k_B * b.conj().T, "herald")


def conditional_state(rho: DensityMatrix, spec: HeraldSpec,
                      policy: NumericPolicy = DEFAULT_POLICY) -> tuple[DensityMatrix, float]:
    """Post-herald state P rho P^dag / Tr[P^dag P rho] and its relative likelihood."""
    b = ladder_matrix(rho.dim).elements
    p = spec.k_R * b + spec.k_B * b.conj().T
    out = p @ rho.elements @ p.conj().T
    weight = float(np.trace(out).real)
    if not weight > policy.min_norm:
        raise ZeroLikelihoodError(f"herald likelihood {weight:.3e} is zero")
    return DensityMatrix(out / weight, trace_deficit=rho.trace_deficit, _normalised=True), weight


def r_from_drives(ratio: DriveRatio, beta: complex) -> DriveMapping:
    """r = beta* (1 + lam e^{i theta}); phi = arg(beta r), 0 and flagged when r = 0."""
    beta = complex(beta)
    if beta == 0:
        raise DegenerateError("r_from_drives needs a nonzero displacement")
    r = beta.conjugate() * (1.0 + ratio.lam * cmath.exp(1j * ratio.theta))
    if abs(r) <= 1e-15 * abs(beta):
        return DriveMapping(0j, 0.0, True)
    return DriveMapping(r, cmath.phase(beta * r), False)


def drive_ratio_from_coefficients(k_R: complex, k_B: complex, beta: complex) -> DriveRatio:
    """Inverse view: the (lam, theta) implied by k_R/k_B = G_R/G_B."""
    q = complex(k_R) / complex(k_B)
    return DriveRatio(abs(q), cmath.phase(q * complex(beta) ** 2))


def optimal_r_magnitude(n_m: float) -> float:
    """|r| minimising the high-displacement Q for occupation n_m."""
    if n_m < 0:
        raise DomainError("n_m must be >= 0")
    return math.sqrt(3.0 * (1.0 + 2.0 * n_m))


def optimal_drive_settings(r_target_mag: float | None = None, n_m: float = 0.0,
                           beta: complex = 1.0, branch: int = -1) -> DriveRatio:
    """Drive ratio giving |r| = r_target_mag with cos(2 phi) = 1.

    lam = 1 + branch |r|/|beta| and theta = pi. ``branch=-1`` (the default)
    puts beta r on the positive real axis (phi = 0), where the finite-|beta|
    Q is lowest; it falls back to ``+1`` when |r| >= |beta| would make lam
    non-positive.
    """
    if branch not in (-1, 1):
        raise ValueError("branch must be +1 or -1")
    b = abs(complex(beta))
    if b == 0:
        raise DegenerateError("optimal drive settings need a nonzero displacement")
    rt = optimal_r_magnitude(n_m) if r_target_mag is None else float(r_target_mag)
    if rt < 0:
        raise DomainError("target |r| must be >= 0")
    lam = 1.0 + branch * rt / b
    if lam <= 0:
        lam = 1.0 + rt / b
    return DriveRatio(lam, math.pi)


def ideal_superposition(r: complex, beta: complex, dim: int | None = None,
                        policy: NumericPolicy = DEFAULT_POLICY) -> DensityMatrix:
    """(r|beta> + |beta,1>)/sqrt(1+|r|^2) as a density matrix."""
    beta = complex(beta)
    need = required_dim(abs(beta), n=1, policy=policy)
    if dim is None:
        dim = need
    if dim < need:
        raise TruncationError(f"dim={dim} below truncation rule ({need})", required_dim=need)
    u = _displacement(beta, _work_dim(dim, abs(beta), policy))
    r = complex(r)
    if abs(r) > 1.0:
        # divide through by r so huge |r| does not swamp the |beta,1> amplitude
        psi = (u[:, 0] + u[:, 1] / r) / math.sqrt(1.0 + 1.0 / abs(r) ** 2)
    else:
        psi = (r * u[:, 0] + u[:, 1]) / math.sqrt(1.0 + abs(r) ** 2)
    return _crop(np.outer(psi, psi.conj()), dim, policy)
