"""Dense linear algebra on a truncated single-mode Fock space.

States live in span{|0>, ..., |dim-1>}. Displaced states are built in a
padded working space and then cropped, so that the truncated displacement
generator never distorts the retained block; the probability that falls
outside the kept levels is recorded as ``trace_deficit`` instead of being
silently renormalised away.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as la

from .errors import DomainError, InvalidDimensionError, ShapeError, TruncationError
from .policy import DEFAULT_POLICY, NumericPolicy

STATE_KINDS = ("coherent", "thermal", "displaced_thermal", "fock", "displaced_fock")
OPERATOR_KINDS = ("ladder", "number", "displacement", "herald", "parity", "generic")


def _readonly(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OperatorMatrix:
    elements: np.ndarray
    kind: str = "generic"

    def __post_init__(self):
        m = _readonly(self.elements)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"operator must be square, got shape {m.shape}")
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "elements", m)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.elements.conj().T, "generic")

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.elements @ other.elements, "generic")
        return self.elements @ other


@dataclass(frozen=True)
class DensityMatrix:
    """Normalised, Hermitian density matrix plus the probability lost to truncation."""

    elements: np.ndarray
    trace_deficit: float = 0.0
    _normalised: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.elements, dtype=complex, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"density matrix must be square, got shape {m.shape}")
        if m.shape[0] < 2:
            raise InvalidDimensionError("dim must be >= 2")
        m = 0.5 * (m + m.conj().T)
        if not self._normalised:
            tr = np.trace(m).real
            if not tr > 0:
                raise DomainError("density matrix has non-positive trace")
            m /= tr
        m.setflags(write=False)
        object.__setattr__(self, "elements", m)
        object.__setattr__(self, "trace_deficit", float(self.trace_deficit))

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def populations(self) -> np.ndarray:
        p = self.elements.diagonal().real.copy()
        p[p < 0] = 0.0
        return p

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.elements, self.elements).real)

    def check(self, policy: NumericPolicy = DEFAULT_POLICY) -> None:
        """Raise ``DomainError`` unless Hermitian, positive and unit trace."""
        m = self.elements
        herm = np.max(np.abs(m - m.conj().T))
        if herm > policy.hermitian_tol:
            raise DomainError(f"not Hermitian: max deviation {herm:.3e}")
        w = la.eigvalsh(m)
        if w.min() < -policy.positivity_tol:
            raise DomainError(f"negative eigenvalue {w.min():.3e}")
        if abs(np.trace(m).real - 1.0) > 1e-12:
            raise DomainError("trace differs from 1")

    def is_valid(self, policy: NumericPolicy = DEFAULT_POLICY) -> bool:
        try:
            self.check(policy)
        except DomainError:
            return False
        return True


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be an integer >= 2, got {dim}")
    return int(dim)


def required_dim(beta_abs: float = 0.0, n_m: float = 0.0, n: int = 0,
                 policy: NumericPolicy = DEFAULT_POLICY) -> int:
    """Smallest Fock dimension that keeps truncation losses below ~1e-12.

    dim = |b|^2 + s |b| sqrt(1 + 2 n_m) + t (n_m + 1) + n + margin with s, t
    from the policy (8 and 28 by default). The thermal term keeps the
    geometric tail below 1e-12 for n_m <~ 2 and the displacement term spans
    s standard deviations of the displaced-thermal number distribution.
    """
    if n_m < 0:
        raise DomainError("n_m must be >= 0")
    b = abs(beta_abs)
    d = (b * b + policy.trunc_disp_sigmas * b * math.sqrt(1.0 + 2.0 * n_m)
         + policy.trunc_thermal_levels * (n_m + 1.0) + n + policy.trunc_margin)
    return max(2, int(math.ceil(d)))


def ladder_matrix(dim: int) -> OperatorMatrix:
    """Annihilation operator b with <n-1|b|n> = sqrt(n)."""
    dim = _check_dim(dim)
    return OperatorMatrix(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1), "ladder")


def number_operator(dim: int) -> OperatorMatrix:
    dim = _check_dim(dim)
    return OperatorMatrix(np.diag(np.arange(dim, dtype=float)), "number")


def parity_operator(dim: int) -> OperatorMatrix:
    dim = _check_dim(dim)
    return OperatorMatrix(np.diag((-1.0) ** np.arange(dim)), "parity")


def _displacement(beta: complex, dim: int) -> np.ndarray:
    # i(beta b^dag - beta* b) is Hermitian, so D = V exp(-i w) V^dag is exactly unitary
    if beta == 0:
        return np.eye(dim, dtype=complex)
    off = np.sqrt(np.arange(1, dim, dtype=float))
    h = np.zeros((dim, dim), dtype=complex)
    h[np.arange(1, dim), np.arange(dim - 1)] = 1j * beta * off
    h[np.arange(dim - 1), np.arange(1, dim)] = -1j * np.conj(beta) * off
    w, v = la.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def displacement_operator(beta: complex, dim: int,
                          policy: NumericPolicy = DEFAULT_POLICY) -> OperatorMatrix:
    """D(beta) = exp(beta b^dag - beta* b) on the truncated space."""
    dim = _check_dim(dim)
    beta = complex(beta)
    if not (math.isfinite(beta.real) and math.isfinite(beta.imag)):
        raise DomainError("beta must be finite")
    need = required_dim(abs(beta), policy=policy)
    if dim < need:
        raise TruncationError(f"dim={dim} too small for |beta|={abs(beta):.4g}; need {need}",
                              required_dim=need)
    return OperatorMatrix(_displacement(beta, dim), "displacement")


def _crop(work: np.ndarray, dim: int, policy: NumericPolicy) -> DensityMatrix:
    kept = work[:dim, :dim]
    deficit = max(0.0, 1.0 - np.trace(kept).real)
    if deficit > policy.max_trace_deficit:
        raise TruncationError(f"truncation loses {deficit:.3e} of the state at dim={dim}")
    return DensityMatrix(kept, trace_deficit=deficit)


def _work_dim(dim: int, beta_abs: float, policy: NumericPolicy) -> int:
    return dim + policy.displacement_pad + int(math.ceil(4 * beta_abs))


def thermal_populations(n_m: float, dim: int) -> np.ndarray:
    """Geometric occupation n_m^n / (n_m+1)^(n+1), unnormalised (sum < 1)."""
    if n_m < 0:
        raise DomainError("n_m must be >= 0")
    k = np.arange(dim, dtype=float)
    if n_m == 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p
    return np.exp(k * math.log(n_m / (n_m + 1.0))) / (n_m + 1.0)


def prepare_state(kind: str, beta: complex = 0.0, n_m: float = 0.0, n: int = 0,
                  dim: int | None = None,
                  policy: NumericPolicy = DEFAULT_POLICY) -> DensityMatrix:
    """Build one of the standard states used by the protocol.

    ``coherent``: D(b)|0><0|D^dag(b); ``thermal``: geometric populations with
    mean n_m; ``displaced_thermal``: D(b) rho_th D^dag(b); ``fock``: |n><n|;
    ``displaced_fock``: D(b)|n><n|D^dag(b). When ``dim`` is omitted the
    truncation rule picks it.
    """
    if kind not in STATE_KINDS:
        raise ValueError(f"unknown state kind {kind!r}; expected one of {STATE_KINDS}")
    if n_m < 0:
        raise DomainError("n_m must be >= 0")
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    beta = complex(beta)
    b_abs = abs(beta) if kind in ("coherent", "displaced_thermal", "displaced_fock") else 0.0
    th = n_m if kind in ("thermal", "displaced_thermal") else 0.0
    nn = int(n) if kind in ("fock", "displaced_fock") else 0
    need = required_dim(b_abs, th, nn, policy)
    if dim is None:
        dim = need
    dim = _check_dim(dim)
    if dim < need:
        raise TruncationError(f"dim={dim} below truncation rule ({need}) for {kind}",
                              required_dim=need)

    if kind == "fock":
        m = np.zeros((dim, dim), dtype=complex)
        m[nn, nn] = 1.0
        return DensityMatrix(m, _normalised=True)

    if kind == "thermal":
        p = thermal_populations(th, dim)
        deficit = max(0.0, 1.0 - p.sum())
        if deficit > policy.max_trace_deficit:
            raise TruncationError(f"thermal tail {deficit:.3e} exceeds tolerance at dim={dim}")
        return DensityMatrix(np.diag(p), trace_deficit=deficit)

    wd = _work_dim(dim, b_abs, policy)
    u = _displacement(beta, wd)
    if kind == "coherent":
        psi = u[:, 0]
        return _crop(np.outer(psi, psi.conj()), dim, policy)
    if kind == "displaced_fock":
        psi = u[:, nn]
        return _crop(np.outer(psi, psi.conj()), dim, policy)
    # displaced_thermal: populations beyond dim carry < max_trace_deficit by the rule
    p = np.zeros(wd)
    p[:dim] = thermal_populations(th, dim)
    ud = u[:, :dim]
    work = (ud * p[:dim]) @ ud.conj().T
    return _crop(work, dim, policy)


def pure_state(psi, trace_deficit: float = 0.0) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex)
    return DensityMatrix(np.outer(psi, psi.conj()), trace_deficit=trace_deficit)


def _as_matrix(op):
    return op.elements if isinstance(op, OperatorMatrix) else np.asarray(op)


def expectation(rho: DensityMatrix, op) -> complex:
    """Tr[rho op]."""
    m = _as_matrix(op)
    if m.shape != rho.elements.shape:
        raise ShapeError(f"operator shape {m.shape} does not match state dim {rho.dim}")
    return complex(np.einsum("ij,ji->", rho.elements, m))


def number_moments(rho: DensityMatrix) -> tuple[float, float]:
    """Mean and variance of the phonon number."""
    p = rho.elements.diagonal().real
    k = np.arange(rho.dim, dtype=float)
    mean = float(p @ k)
    second = float(p @ (k * k))
    return mean, second - mean * mean


def _clip_spectrum(w):
    # round-off eigenvalues would otherwise add ~sqrt(eps) each under the square root
    floor = w.size * np.finfo(float).eps * max(float(w.max()), 0.0)
    return np.where(w > floor, w, 0.0)


def _psd_sqrt(m):
    w, v = la.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(_clip_spectrum(w))) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dim != sigma.dim:
        raise ShapeError("fidelity between states of different dimension")
    s = _psd_sqrt(rho.elements)
    inner = s @ sigma.elements @ s
    w = _clip_spectrum(la.eigvalsh(0.5 * (inner + inner.conj().T)))
    return float(np.sum(np.sqrt(w)) ** 2)


def embed(rho: DensityMatrix, dim: int) -> DensityMatrix:
    """Zero-pad (or crop) a state to a different dimension."""
    dim = _check_dim(dim)
    m = np.zeros((dim, dim), dtype=complex)
    k = min(dim, rho.dim)
    m[:k, :k] = rho.elements[:k, :k]
    return DensityMatrix(m, trace_deficit=rho.trace_deficit)
