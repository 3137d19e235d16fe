"""Grid runners behind the command-line subcommands.

Each runner expands the configured axes into a grid, evaluates every point
with pure functions (optionally in worker processes), and returns a
``ResultTable`` sorted lexicographically by the axis values. BLAS is pinned
to one thread in every evaluator so results do not depend on ``jobs``.
"""

from concurrent.futures import ProcessPoolExecutor
import cmath
from functools import lru_cache, partial
import itertools
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import RunConfig
from .errors import (
    ConfigError,
    DegenerateError,
    RegimeError,
    RegimeWarning,
    UndefinedQError,
    ZeroLikelihoodError,
)
from .fockspace import DensityMatrix, prepare_state, required_dim
from .herald import (
    DriveRatio,
    HeraldSpec,
    conditional_state,
    optimal_drive_settings,
    optimal_r_magnitude,
    r_from_drives,
)
from .mandel import SensitivityInput, delta_q_sensitivity, mandel_q, q_conditioned_analytic, q_highdisp
from .policy import NumericPolicy
from .pulse import (
    DetectionModel,
    PulsePlan,
    SystemParams,
    click_probabilities,
    plan_from_ratio,
    pulse_coefficients,
    q_from_clicks,
    readout_conversion,
)
from .steadystate import (
    DriveTone,
    amplitude_bound,
    filter_leakage,
    ideal_measurement_time,
    sideband_coefficients,
    solve_steady_state,
)
from .table import ResultTable


# ---------------------------------------------------------------- helpers

def grid_points(cfg: RunConfig) -> list[dict]:
    names = [a.name for a in cfg.axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(a.values for a in cfg.axes))]


def _clean(v):
    if v is None or isinstance(v, (str, int)) and not isinstance(v, bool):
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    return float(v)


def _pin_threads():
    threadpool_limits(1)


def _run_point(fn, cfg: RunConfig, point: dict):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        values, dim = fn(cfg, point)
    regime = sorted({str(w.message) for w in caught if issubclass(w.category, RegimeWarning)})
    return values, dim, regime


def evaluate(fn, cfg: RunConfig, points: list[dict]) -> list[tuple]:
    """Evaluate ``fn(cfg, point)`` over all points; order of the result follows ``points``."""
    task = partial(_run_point, fn, cfg)
    if cfg.jobs <= 1 or len(points) <= 1:
        with threadpool_limits(1):
            return [task(p) for p in points]
    chunk = max(1, len(points) // (4 * cfg.jobs))
    with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_pin_threads) as ex:
        return list(ex.map(task, points, chunksize=chunk))


def assemble(cfg: RunConfig, columns: list[str], results: list[tuple],
             points: list[dict], extra_meta: dict | None = None) -> ResultTable:
    axis_names = [a.name for a in cfg.axes]
    columns = [c for c in columns if c not in axis_names]
    cols = axis_names + columns
    rows, dims, regime = [], [], set()
    for point, (values, dim, msgs) in zip(points, results):
        rows.append(tuple(_clean(point[n]) for n in axis_names)
                    + tuple(_clean(values.get(c)) for c in columns))
        if dim is not None:
            dims.append(dim)
        regime.update(msgs)
    if regime and cfg.strict:
        raise RegimeError("; ".join(sorted(regime)))
    for m in sorted(regime):
        warnings.warn(m, RegimeWarning, stacklevel=2)
    meta = {
        "tool": f"optoherald {__version__}",
        "command": cfg.command,
        "config_hash": cfg.config_hash(),
        "dims": f"{min(dims)}-{max(dims)}" if dims else "none",
        "points": str(len(rows)),
        "regime_warnings": str(len(regime)),
    }
    meta.update(extra_meta or {})
    table = ResultTable(cols, rows, meta)
    return table.sort_by(axis_names) if axis_names else table


@lru_cache(maxsize=8)
def _displaced_thermal(beta: float, n_m: float, dim: int, policy: NumericPolicy) -> DensityMatrix:
    return prepare_state("displaced_thermal", beta, n_m, dim=dim, policy=policy)


def signed_r(r: float, phi: float) -> complex:
    """Complex r for a real displacement: r e^{i phi}; negative r flips the phase by pi."""
    return r * cmath.exp(1j * phi)


# ---------------------------------------------------------------- sweep-q

SWEEP_Q_COLUMNS = ["q_analytic", "q_numeric", "q_highdisp", "abs_diff"]


def _sweep_q_point(cfg: RunConfig, point: dict):
    vals = {"phi": 0.0, "n_m": 0.0, **cfg.params, **point}
    if "r" not in vals:
        raise ConfigError("sweep-q needs r as an axis or in params")
    r, phi, n_m = vals["r"], vals["phi"], vals["n_m"]
    beta = vals.get("beta")
    out = {"q_highdisp": q_highdisp(abs(r), phi, n_m)}
    if beta is None:
        return out, None
    rc = signed_r(r, phi)
    try:
        out["q_analytic"] = q_conditioned_analytic(rc, beta, n_m, cfg.policy)
    except (DegenerateError, UndefinedQError):
        pass
    dim = required_dim(abs(beta), n_m, 1, cfg.policy)
    if beta == 0 or dim > cfg.dim_cap:
        return out, None
    rho = _displaced_thermal(float(beta), float(n_m), dim, cfg.policy)
    spec = HeraldSpec.from_r(rc, beta)
    cond, _ = conditional_state(rho, spec, cfg.policy)
    out["q_numeric"] = mandel_q(cond, cfg.policy).q
    if "q_analytic" in out:
        out["abs_diff"] = abs(out["q_analytic"] - out["q_numeric"])
    return out, dim


def run_sweep_q(cfg: RunConfig) -> ResultTable:
    points = grid_points(cfg)
    mode = "finite_beta" if ("beta" in cfg.params or "beta" in {a.name for a in cfg.axes}) \
        else "high_displacement"
    return assemble(cfg, SWEEP_Q_COLUMNS, evaluate(_sweep_q_point, cfg, points), points,
                    {"mode": mode})


def zero_contour(table: ResultTable, along: str = "r", value: str = "q_analytic") -> ResultTable:
    """Zero crossings of ``value`` along one axis, for every setting of the other axes.

    Crossings are located by linear interpolation between neighbouring grid
    points; the output is itself a sorted table.
    """
    axes = [c for c in table.columns if c not in SWEEP_Q_COLUMNS and c != along]
    if along not in table.columns:
        raise ValueError(f"no axis {along!r} in table")
    ia, iv = table.columns.index(along), table.columns.index(value)
    ik = [table.columns.index(c) for c in axes]
    groups: dict[tuple, list] = {}
    for row in table.rows:
        groups.setdefault(tuple(row[i] for i in ik), []).append((row[ia], row[iv]))
    rows = []
    for key, pts in groups.items():
        pts = sorted(p for p in pts if p[1] is not None)
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if y0 == 0.0:
                rows.append(key + (x0,))
            elif y0 * y1 < 0:
                rows.append(key + (x0 + (x1 - x0) * y0 / (y0 - y1),))
        if pts and pts[-1][1] == 0.0:
            rows.append(key + (pts[-1][0],))
    meta = dict(table.metadata)
    meta["contour"] = f"{value} = 0 along {along}"
    return ResultTable(axes + [along], sorted(set(rows)), meta)


# ---------------------------------------------------------------- protocol

PROTOCOL_COLUMNS = [
    "k_R_re", "k_R_im", "k_B", "r_re", "r_im", "herald_prob_weight",
    "q_conditional_numeric", "epsilon", "p0", "p1", "p2", "q_from_clicks",
    "q_predicted_analytic", "status",
]


def _protocol_plan(cfg: RunConfig, vals: dict, beta: float, n_m: float) -> PulsePlan:
    p = cfg.system
    pulse = cfg.pulse
    tau_w = vals["tau_w"]
    explicit = "G_R" in pulse and "G_B" in pulse
    if ("lam" in vals or "theta" in vals) or not explicit:
        g_b = vals.get("G_B", pulse.get("G_B_abs"))
        if g_b is None:
            raise ConfigError("protocol needs pulse.G_B_abs (or a G_B axis) with lam/theta")
        if "lam" in vals and "theta" in vals:
            ratio = DriveRatio(vals["lam"], vals["theta"])
        else:
            ratio = optimal_drive_settings(vals.get("r_target_abs"), n_m, beta,
                                           int(vals.get("branch", -1)))
            ratio = DriveRatio(vals.get("lam", ratio.lam), vals.get("theta", ratio.theta))
        return plan_from_ratio(ratio.lam, ratio.theta, beta, g_b, tau_w, p.kappa)
    return PulsePlan(pulse["G_R"], pulse["G_B"], tau_w, p.kappa)


def _protocol_point(cfg: RunConfig, point: dict):
    if cfg.system is None:
        raise ConfigError("protocol needs a system block")
    vals = {"n_m": 0.0, "eta": 1.0, "split": 0.5,
            **{k: v for k, v in cfg.pulse.items() if k not in ("G_R", "G_B")},
            **cfg.detection, **cfg.params, **point}
    if "beta" not in vals or "tau_w" not in vals:
        raise ConfigError("protocol needs params.beta and pulse.tau_w")
    beta, n_m = vals["beta"], vals["n_m"]
    out: dict = {}
    plan = _protocol_plan(cfg, vals, beta, n_m)
    plan.check_regime()
    if "epsilon" in point or "G_R_read" not in vals:
        eps = vals.get("epsilon", 1.0)
    else:
        eps = readout_conversion(vals["G_R_read"], cfg.system.kappa, vals.get("tau_r", 0.0))
    out["epsilon"] = eps
    k_r, k_b = pulse_coefficients(plan)
    out.update(k_R_re=k_r.real, k_R_im=k_r.imag, k_B=k_b.real)
    try:
        spec = HeraldSpec(k_r, k_b, beta)
    except ZeroLikelihoodError:
        out["status"] = "zero_likelihood"
        return out, None
    r = spec.r
    if r is not None:
        out.update(r_re=r.real, r_im=r.imag)
        try:
            out["q_predicted_analytic"] = q_conditioned_analytic(r, beta, n_m, cfg.policy)
        except (DegenerateError, UndefinedQError):
            pass
    dim = required_dim(abs(beta), n_m, 1, cfg.policy)
    if cfg.dim_cap and dim > cfg.dim_cap:
        out["status"] = "dim_cap_exceeded"
        return out, None
    rho = _displaced_thermal(float(beta), float(n_m), dim, cfg.policy)
    try:
        cond, weight = conditional_state(rho, spec, cfg.policy)
    except ZeroLikelihoodError:
        out["status"] = "zero_likelihood"
        return out, dim
    out["herald_prob_weight"] = weight
    try:
        out["q_conditional_numeric"] = mandel_q(cond, cfg.policy).q
    except UndefinedQError:
        pass
    det = DetectionModel(vals["eta"], eps, vals["split"])
    clicks = click_probabilities(cond, det)
    out.update(p0=clicks.p0, p1=clicks.p1, p2=clicks.p2)
    try:
        out["q_from_clicks"] = q_from_clicks(clicks.p1, clicks.p2, det.eps_eta)
        out["status"] = "ok"
    except (UndefinedQError, ValueError):
        out["status"] = "no_clicks"
    return out, dim


def run_protocol(cfg: RunConfig) -> ResultTable:
    points = grid_points(cfg)
    return assemble(cfg, PROTOCOL_COLUMNS, evaluate(_protocol_point, cfg, points), points)


# ---------------------------------------------------------------- steady

STEADY_COLUMNS = [
    "sigma_re", "sigma_im", "gamma_eff", "omega_m_eff", "n_o", "n_m",
    "beta_re", "beta_im", "beta_abs", "b_c_re", "b_c_im", "beta_residual",
    "fixed_point_iters", "sigma_cool_contribution", "sigma_displacement_contribution",
    "sigma_measurement_contribution", "amplitude_bound", "filter_eta_re", "filter_eta_im",
    "filter_eta_abs", "t_c", "t_c_period", "t_c_mismatch", "status",
]

_SYSTEM_FIELDS = ("kappa", "gamma", "omega_m", "g0", "n_th", "delta_c")


def _steady_inputs(cfg: RunConfig, point: dict) -> tuple[SystemParams, list[DriveTone], dict]:
    if cfg.system is None:
        raise ConfigError("steady needs a system block")
    sysvals = {f: getattr(cfg.system, f) for f in _SYSTEM_FIELDS}
    sysvals.update({k: v for k, v in point.items() if k in _SYSTEM_FIELDS})
    p = SystemParams(**sysvals)
    vals = {**cfg.params, **{k: v for k, v in point.items() if k not in _SYSTEM_FIELDS}}
    tones = []
    for t in cfg.tones:
        omega, amp = t.omega, t.Omega
        if f"omega:{t.tag}" in vals:
            omega = vals[f"omega:{t.tag}"]
        if f"Omega:{t.tag}" in vals:
            amp = vals[f"Omega:{t.tag}"] * (cmath.exp(1j * cmath.phase(amp)) if amp else 1.0)
        if "delta_proj" in vals and t.tag in ("meas_red", "meas_blue"):
            omega = (-p.omega_m if t.tag == "meas_red" else p.omega_m) + vals["delta_proj"]
        tones.append(DriveTone(omega, amp, t.tag))
    return p, tones, vals


def _steady_point(cfg: RunConfig, point: dict):
    p, tones, vals = _steady_inputs(cfg, point)
    rep = solve_steady_state(tones, p, cfg.policy)
    out = {
        "sigma_re": rep.sigma.real, "sigma_im": rep.sigma.imag, "gamma_eff": rep.gamma_eff,
        "omega_m_eff": rep.omega_m_eff, "n_o": rep.n_o, "n_m": rep.n_m,
        "beta_re": rep.beta.real, "beta_im": rep.beta.imag, "beta_abs": abs(rep.beta),
        "b_c_re": rep.b_c.real, "b_c_im": rep.b_c.imag, "beta_residual": rep.beta_residual,
        "fixed_point_iters": rep.fixed_point_iters, "status": "ok",
    }
    by_tag = rep.sigma_by_tag
    if tones:
        out["sigma_cool_contribution"] = abs(by_tag.get("cool", 0j))
        out["sigma_displacement_contribution"] = abs(
            by_tag.get("displace_plus", 0j) + by_tag.get("displace_minus", 0j))
        out["sigma_measurement_contribution"] = abs(
            by_tag.get("meas_red", 0j) + by_tag.get("meas_blue", 0j))
    if "epsilon" in vals:
        out["amplitude_bound"] = amplitude_bound(vals["epsilon"], p, rep.omega_m_eff)

    tags = {t.tag: i for i, t in enumerate(tones)}
    delta = vals.get("delta_proj")
    if delta is None and "meas_red" in tags:
        delta = tones[tags["meas_red"]].omega + rep.omega_m_eff
    if "W" in vals and delta is not None:
        eta = filter_leakage(delta, vals["W"])
        out.update(filter_eta_re=eta.real, filter_eta_im=eta.imag, filter_eta_abs=abs(eta))
        if {"meas_red", "meas_blue", "cool"} <= tags.keys() and rep.beta != 0:
            coeffs = sideband_coefficients(tones, p, rep.omega_m_eff)
            r_t = vals.get("r_target")
            if r_t is None:
                r_t = optimal_r_magnitude(rep.n_m) * cmath.exp(-1j * cmath.phase(rep.beta))
            timing = ideal_measurement_time(
                coeffs[tags["meas_red"]].k_R, coeffs[tags["meas_blue"]].k_B,
                coeffs[tags["cool"]].k_R, eta, delta, r_t, rep.beta, cfg.policy,
                allow_mismatch=True)
            out.update(t_c=timing.t_c, t_c_period=timing.period, t_c_mismatch=timing.mismatch)
            if timing.mismatch > cfg.policy.modulus_rtol:
                out["status"] = "no_solution"
    return out, None


def run_steady(cfg: RunConfig) -> ResultTable:
    points = grid_points(cfg)
    return assemble(cfg, STEADY_COLUMNS, evaluate(_steady_point, cfg, points), points)


# ---------------------------------------------------------------- sensitivity

SENSITIVITY_COLUMNS = [
    "lam_opt", "d2q_lambda_fd", "d2q_lambda_formula", "rel_err_lambda",
    "d2q_theta_fd", "d2q_theta_formula", "rel_err_theta", "delta_q_formula", "delta_q_exact",
]


def q_at_drive_ratio(lam: float, theta: float, beta: complex, n_m: float,
                     policy: NumericPolicy | None = None) -> float:
    """Finite-|beta| conditioned Q for drive ratio (lam, theta)."""
    m = r_from_drives(DriveRatio(lam, theta), beta)
    kw = {} if policy is None else {"policy": policy}
    return q_conditioned_analytic(m.r, beta, n_m, **kw)


def second_differences(beta: float, n_m: float, h: float, branch: int = -1,
                       policy: NumericPolicy | None = None) -> tuple[float, float, float]:
    """Centred second differences of Q in lam and theta around the optimal settings."""
    opt = optimal_drive_settings(None, n_m, beta, branch)
    lam, th = opt.lam, opt.theta

    def q(l, t):
        return q_at_drive_ratio(l, t, beta, n_m, policy)

    q0 = q(lam, th)
    d2l = (q(lam + h, th) - 2.0 * q0 + q(lam - h, th)) / (h * h)
    d2t = (q(lam, th + h) - 2.0 * q0 + q(lam, th - h)) / (h * h)
    return lam, d2l, d2t


def _sensitivity_point(cfg: RunConfig, point: dict):
    vals = {"n_m": 0.0, "h": 1e-3, **cfg.params, **point}
    if "beta" not in vals:
        raise ConfigError("sensitivity needs beta as an axis or in params")
    beta, n_m, h = vals["beta"], vals["n_m"], vals["h"]
    branch = int(vals.get("branch", -1))
    lam, d2l, d2t = second_differences(beta, n_m, h, branch, cfg.policy)
    pref = abs(beta) ** 2 / (4.0 * (1.0 + 2.0 * n_m) ** 2)
    f_l, f_t = 2.0 * 0.75 * pref, 2.0 * pref
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dq = delta_q_sensitivity(SensitivityInput(h, h, beta, n_m))
    opt = optimal_drive_settings(None, n_m, beta, branch)
    exact = (q_at_drive_ratio(opt.lam + h, opt.theta + h, beta, n_m, cfg.policy)
             - q_at_drive_ratio(opt.lam, opt.theta, beta, n_m, cfg.policy))
    out = {
        "lam_opt": lam, "d2q_lambda_fd": d2l, "d2q_lambda_formula": f_l,
        "rel_err_lambda": abs(d2l - f_l) / f_l, "d2q_theta_fd": d2t,
        "d2q_theta_formula": f_t, "rel_err_theta": abs(d2t - f_t) / f_t,
        "delta_q_formula": dq, "delta_q_exact": exact,
    }
    return out, None


def run_sensitivity(cfg: RunConfig) -> ResultTable:
    points = grid_points(cfg)
    return assemble(cfg, SENSITIVITY_COLUMNS, evaluate(_sensitivity_point, cfg, points), points)


RUNNERS = {
    "sweep-q": run_sweep_q,
    "protocol": run_protocol,
    "steady": run_steady,
    "sensitivity": run_sensitivity,
}

__all__ = [
    "RUNNERS", "run_sweep_q", "run_protocol", "run_steady", "run_sensitivity", "zero_contour",
    "q_at_drive_ratio", "second_differences", "grid_points", "evaluate", "signed_r",
]
