"""Central numeric tolerances.

Every tolerance used by the library lives here so that a run configuration
can override them in one place (see ``RunConfig.policy``).
"""

from dataclasses import dataclass, fields, replace
from typing import Any, Mapping


@dataclass(frozen=True)
class NumericPolicy:
    hermitian_tol: float = 1e-12
    positivity_tol: float = 1e-10
    max_trace_deficit: float = 1e-8
    unitarity_tol: float = 1e-10
    imag_tol: float = 1e-12
    min_norm: float = 1e-14           # herald likelihood / D / <n> floors
    # truncation rule coefficients, see fockspace.required_dim
    trunc_disp_sigmas: float = 8.0
    trunc_thermal_levels: float = 28.0
    trunc_margin: int = 10
    displacement_pad: int = 64        # extra levels used while building displaced states
    fixed_point_rtol: float = 1e-12
    fixed_point_maxiter: int = 50
    fixed_point_damping: float = 0.5
    resonance_window: float = 1.0     # beat notes within this many gamma_eff count as resonant
    modulus_rtol: float = 1e-9
    sensitivity_soft_limit: float = 0.2

    def with_overrides(self, overrides: Mapping[str, Any]) -> "NumericPolicy":
        known = {f.name: f.type for f in fields(self)}
        unknown = set(overrides) - set(known)
        if unknown:
            raise KeyError(f"unknown numeric-policy fields: {sorted(unknown)}")
        cast = {k: type(getattr(self, k))(v) for k, v in overrides.items()}
        return replace(self, **cast)


DEFAULT_POLICY = NumericPolicy()
