"""Deterministic fixed-step integration of plant + controller compositions.

The integrator is classical RK4 with a fixed step, chosen over adaptive
schemes so acceptance numbers reproduce bit-for-bit on one platform.  A
step-doubling error estimate is logged every 100 steps and a warning is
emitted when it suggests the step is too coarse.

Disturbance activation times are snapped to the time grid, and a
disturbance is active from the first sample >= its scheduled time.  The
recorded energy/Lyapunov columns are evaluated against the disturbance
configuration active at each sample, so the certified decay property is
meaningful inside every constant-disturbance window; convergence checks
skip the record pairs that straddle an activation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .core import PhSystem
from .errors import ConfigurationError, ContractError, DivergenceError
from .iac import (
    ClosedLoop,
    EquilibriumPrediction,
    IacGains,
    build_closed_loop,
    check_assumption_min,
    detect_outputs,
    lyapunov_matched,
    lyapunov_mixed,
    lyapunov_unmatched,
)

CONTROLLERS = ("iac", "iac_wc", "baseline", "simplified", "none")


@dataclass(frozen=True)
class Scenario:
    """One simulation run: a plant, a controller selection, and a grid.

    ``controller`` picks the feedback realization:
      iac         canonical integral-action controller, state x_c
      iac_wc      equivalent realization whose state is the offset
                  w_c = x_a - x_c (exact for unmatched-only disturbances)
      baseline    plain integrator around the passive output
      simplified  damping-independent variant (needs kappa, r_c2)
      none        open loop, u = 0
    """

    name: str
    plant: PhSystem
    x0: np.ndarray
    xc0: np.ndarray
    t_end: float
    dt: float = 1e-3
    stride: int = 1
    controller: str = "iac"
    gains: IacGains | None = None
    kappa: float | None = None
    r_c2: Any = None
    k_i_baseline: Any = None
    prediction: EquilibriumPrediction | None = None
    tol: float = 1e-2
    record_lyapunov: bool = True
    validate_gains: bool = True
    config_dim: int | None = None  # l for mechanical plants (plot layout)
    rhs_factory: Any = None  # optional fused (plant) -> (rhs, u_fn, mc)

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ContractError("dt and t_end must be positive")
        if self.stride < 1:
            raise ContractError("record stride must be >= 1")
        if self.controller not in CONTROLLERS:
            raise ConfigurationError(f"unknown controller {self.controller!r}")
        if self.controller in ("iac", "iac_wc") and self.gains is None:
            raise ConfigurationError(f"controller {self.controller!r} needs gains")
        if self.controller == "simplified" and (self.kappa is None or self.r_c2 is None):
            raise ConfigurationError("simplified controller needs kappa and r_c2")
        if self.controller == "baseline" and self.k_i_baseline is None:
            raise ConfigurationError("baseline controller needs k_i_baseline")
        n = self.plant.partition.n
        m = self.plant.partition.m
        x0 = np.asarray(self.x0, dtype=float).reshape(n)
        mc = 0 if self.controller == "none" else m
        xc0 = np.asarray(self.xc0, dtype=float).reshape(mc)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xc0", xc0)


@dataclass
class Trajectory:
    """Time-stamped record of one integration."""

    name: str
    controller: str
    dt: float
    stride: int
    t: np.ndarray
    x: np.ndarray
    xc: np.ndarray
    u: np.ndarray
    h_cl: np.ndarray
    lyap: np.ndarray
    y_a_norm: np.ndarray
    y_u_norm: np.ndarray
    switch_times: tuple[float, ...] = ()
    config_dim: int | None = None
    meta: dict = field(default_factory=dict)

    def w_states(self) -> np.ndarray:
        """Closed-loop states w = (x, w_c) row-wise."""
        m = self.u.shape[1]
        if self.controller == "iac_wc":
            w_c = self.xc
        elif self.controller in ("iac", "simplified"):
            w_c = self.x[:, :m] - self.xc
        else:
            raise ContractError(
                f"controller {self.controller!r} has no closed-loop coordinates"
            )
        return np.hstack([self.x, w_c])

    def header(self) -> list[str]:
        n, mc, m = self.x.shape[1], self.xc.shape[1], self.u.shape[1]
        return (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"xc{i + 1}" for i in range(mc)]
            + [f"u{i + 1}" for i in range(m)]
            + ["H_cl", "W", "Ya_norm", "Yu_norm"]
        )

    def table(self) -> np.ndarray:
        cols = [self.t[:, None], self.x, self.xc, self.u,
                self.h_cl[:, None], self.lyap[:, None],
                self.y_a_norm[:, None], self.y_u_norm[:, None]]
        return np.hstack(cols)

    def to_csv(self, path) -> None:
        np.savetxt(
            path,
            self.table(),
            delimiter=",",
            header=",".join(self.header()),
            comments="",
            fmt="%.17g",
        )


@dataclass(frozen=True)
class ConvergenceVerdict:
    converged: bool
    final_error: float
    first_time_within_tol: float | None
    max_lyap_increase: float

    def as_dict(self) -> dict:
        return {
            "converged": bool(self.converged),
            "final_error": float(self.final_error),
            "first_time_within_tol": None
            if self.first_time_within_tol is None
            else float(self.first_time_within_tol),
            "max_lyap_increase": float(self.max_lyap_increase),
        }


@dataclass(frozen=True)
class SweepResult:
    scenario: Scenario
    trajectory: Trajectory | None
    verdict: ConvergenceVerdict | None
    error: str | None = None


def _snap_schedule(plant: PhSystem, dt: float) -> PhSystem:
    """Snap disturbance activation times to the integration grid."""
    dist = plant.dist
    changed = False
    if dist.matched is not None:
        snapped = round(dist.matched.t_on / dt) * dt
        if snapped != dist.matched.t_on:
            dist = replace(dist, matched=replace(dist.matched, t_on=snapped))
            changed = True
    if dist.unmatched is not None:
        snapped = round(dist.unmatched.t_on / dt) * dt
        if snapped != dist.unmatched.t_on:
            dist = replace(dist, unmatched=replace(dist.unmatched, t_on=snapped))
            changed = True
    return replace(plant, dist=dist) if changed else plant


def compose_rhs(scenario: Scenario, plant: PhSystem | None = None):
    """Build (rhs, u_fn, mc): the composed vector field over z = (x, xc),
    the input evaluator u_fn(t, x, xc), and the controller state size."""
    plant = scenario.plant if plant is None else plant
    part = plant.partition
    m, n = part.m, part.n
    j_aa, j_au, j_uu = plant.J.aa, plant.J.au, plant.J.uu
    r_aa, r_au, r_uu = plant.R.aa, plant.R.au, plant.R.uu
    grad = plant.H.grad
    d_a, d_u = plant.d_a, plant.d_u
    kind = scenario.controller
    gains = scenario.gains

    if kind in ("iac", "iac_wc"):
        if scenario.validate_gains:
            gains.validate(plant.x_star)
        gains_at = gains.at
        k_i = gains.k_i
    if kind == "simplified":
        kappa = float(scenario.kappa)
        r_c2_s = np.atleast_2d(np.asarray(scenario.r_c2, dtype=float))
    if kind == "baseline":
        k_i_b = np.atleast_2d(np.asarray(scenario.k_i_baseline, dtype=float))

    def u_fn(t, x, xc):
        g = np.asarray(grad(x), dtype=float)
        ga, gu = g[:m], g[m:]
        if kind == "iac":
            j1, r1, r2 = gains_at(x)
            jmr = j1 - r1
            return (r_aa(x) - j_aa(x) + jmr - r2) @ ga + jmr @ (
                k_i @ (x[:m] - xc)
            ) + 2.0 * (r_au(x) @ gu)
        if kind == "iac_wc":
            j1, r1, r2 = gains_at(x)
            jmr = j1 - r1
            return (r_aa(x) - j_aa(x) + jmr - r2) @ ga + jmr @ (
                k_i @ xc
            ) + 2.0 * (r_au(x) @ gu)
        if kind == "baseline":
            return -xc
        if kind == "simplified":
            return -(j_aa(x) @ ga) - r_c2_s @ ga - kappa * (x[:m] - xc)
        return np.zeros(m)

    def rhs(t, z):
        x = z[:n]
        xc = z[n:]
        g = np.asarray(grad(x), dtype=float)
        ga, gu = g[:m], g[m:]
        jaa, jau, juu = j_aa(x), j_au(x), j_uu(x)
        raa, rau, ruu = r_aa(x), r_au(x), r_uu(x)
        jr_au = jau + rau
        out = np.empty(z.size)
        if kind == "iac":
            j1, r1, r2 = gains_at(x)
            jmr = j1 - r1
            u = (raa - jaa + jmr - r2) @ ga + jmr @ (k_i @ (x[:m] - xc)) + 2.0 * (rau @ gu)
            out[n:] = -(r2 @ ga) + jr_au @ gu
        elif kind == "iac_wc":
            j1, r1, r2 = gains_at(x)
            jmr = j1 - r1
            kiwc = k_i @ xc
            u = (raa - jaa + jmr - r2) @ ga + jmr @ kiwc + 2.0 * (rau @ gu)
            out[n:] = jmr @ (ga + kiwc) - d_a(x, t)
        elif kind == "baseline":
            u = -xc
            out[n:] = k_i_b @ ga
        elif kind == "simplified":
            u = -(jaa @ ga) - r_c2_s @ ga - kappa * (x[:m] - xc)
            out[n:] = -(r_c2_s @ ga) + jau @ gu
        else:
            u = None
        out[:m] = (jaa - raa) @ ga + (jau - rau) @ gu - d_a(x, t)
        if u is not None:
            out[:m] += u
        out[m:n] = -(jr_au.T @ ga) + (juu - ruu) @ gu - d_u(x, t)
        return out

    mc = 0 if kind == "none" else m
    return rhs, u_fn, mc


@dataclass(frozen=True)
class _Regime:
    """One constant-disturbance window and its certificate ingredients."""

    t_start: float
    kind: str
    d_bar_a: np.ndarray | None
    d_bar_u: np.ndarray | None
    w_bar: np.ndarray | None


def _effective_matched_amount(plant: PhSystem, gains: IacGains) -> np.ndarray | None:
    """Constant d_bar_a such that the matched signal equals
    (J_c1 - R_c1) d_bar_a; None when no constant refactoring exists."""
    md = plant.dist.matched
    if md is None:
        return None
    x_ref = plant.x_star
    g_plant = np.atleast_2d(np.asarray(md.gain(x_ref), dtype=float))
    j1, r1, _ = gains.at(x_ref)
    g_gains = j1 - r1
    if np.allclose(g_plant, g_gains, rtol=1e-10, atol=1e-12):
        return np.asarray(md.amount, dtype=float)
    try:
        return np.linalg.solve(g_gains, g_plant @ np.asarray(md.amount, dtype=float))
    except np.linalg.LinAlgError:
        return None


def _lyapunov_schedule(closed: ClosedLoop) -> list[_Regime]:
    """Constant-disturbance windows with their equilibria, in time order."""
    plant, gains = closed.plant, closed.gains
    m = closed.m
    dist = plant.dist
    times = {0.0}
    if dist.matched is not None:
        times.add(dist.matched.t_on)
    if dist.unmatched is not None:
        times.add(dist.unmatched.t_on)
    regimes = []
    x_bar_cache: dict[bytes, np.ndarray] = {}
    for t0 in sorted(times):
        d_a = None
        if dist.matched is not None and t0 >= dist.matched.t_on:
            d_a = _effective_matched_amount(plant, gains)
            if d_a is None:
                regimes.append(_Regime(t0, "unknown", None, None, None))
                continue
        d_u = None
        if dist.unmatched is not None and t0 >= dist.unmatched.t_on:
            d_u = np.asarray(dist.unmatched.amount, dtype=float)
        if d_u is None:
            kind = "matched"
            x_bar = plant.x_star
        else:
            kind = "mixed" if d_a is not None else "unmatched"
            key = d_u.tobytes()
            if key not in x_bar_cache:
                report = check_assumption_min(plant, d_u)
                if not report.passed:
                    regimes.append(_Regime(t0, "unknown", None, None, None))
                    continue
                x_bar_cache[key] = report.data["x_bar"]
            x_bar = x_bar_cache[key]
        total = (d_a if d_a is not None else np.zeros(m)) + (
            d_u if d_u is not None else np.zeros(m)
        )
        w_bar = np.concatenate([x_bar, np.linalg.solve(gains.k_i, total)])
        regimes.append(_Regime(t0, kind, d_a, d_u, w_bar))
    return regimes


def _regime_at(regimes: list[_Regime], t: float) -> _Regime:
    current = regimes[0]
    for r in regimes:
        if t >= r.t_start:
            current = r
    return current


def integrate(scenario: Scenario) -> Trajectory:
    """Run the scenario on a fixed RK4 grid and record every ``stride`` steps."""
    plant = _snap_schedule(scenario.plant, scenario.dt)
    if scenario.rhs_factory is not None:
        rhs, u_fn, mc = scenario.rhs_factory(plant)
    else:
        rhs, u_fn, mc = compose_rhs(scenario, plant)
    part = plant.partition
    m, n = part.m, part.n
    dt = scenario.dt
    n_steps = int(round(scenario.t_end / dt))
    if abs(n_steps * dt - scenario.t_end) > 1e-9 * max(1.0, scenario.t_end):
        warnings.warn("t_end is not a multiple of dt; rounding the step count")

    closed = None
    regimes = None
    if (
        scenario.controller in ("iac", "iac_wc", "simplified")
        and scenario.gains is not None
        and scenario.record_lyapunov
    ):
        try:
            closed = (
                build_closed_loop(plant, scenario.gains)
                if scenario.validate_gains
                else ClosedLoop(plant, scenario.gains)
            )
            regimes = _lyapunov_schedule(closed)
        except ConfigurationError as exc:
            warnings.warn(f"Lyapunov recording disabled: {exc}")
            closed = None

    record_idx = list(range(0, n_steps + 1, scenario.stride))
    if record_idx[-1] != n_steps:
        record_idx.append(n_steps)
    n_rec = len(record_idx)
    rec_t = np.empty(n_rec)
    rec_x = np.empty((n_rec, n))
    rec_xc = np.empty((n_rec, mc))
    rec_u = np.empty((n_rec, m))
    rec_h = np.full(n_rec, np.nan)
    rec_w = np.full(n_rec, np.nan)
    rec_ya = np.full(n_rec, np.nan)
    rec_yu = np.full(n_rec, np.nan)

    def record(slot: int, k: int, z: np.ndarray) -> None:
        t = k * dt
        x, xc = z[:n], z[n:]
        rec_t[slot] = t
        rec_x[slot] = x
        rec_xc[slot] = xc
        rec_u[slot] = u_fn(t, x, xc)
        if closed is None:
            rec_h[slot] = plant.H.value(x)
            return
        w_c = xc if scenario.controller == "iac_wc" else x[:m] - xc
        w = np.concatenate([x, w_c])
        rec_h[slot] = closed.h_cl(w)
        reg = _regime_at(regimes, t)
        if reg.kind == "unknown":
            return
        d_a = reg.d_bar_a if reg.d_bar_a is not None else np.zeros(m)
        d_u = reg.d_bar_u if reg.d_bar_u is not None else np.zeros(m)
        if reg.kind == "matched":
            rec_w[slot] = lyapunov_matched(closed, d_a, w, w_bar=reg.w_bar)
        elif reg.kind == "unmatched":
            rec_w[slot] = lyapunov_unmatched(closed, d_u, w, w_bar=reg.w_bar)
        else:
            rec_w[slot] = lyapunov_mixed(closed, d_a, d_u, w, w_bar=reg.w_bar)
        y_a, y_u = detect_outputs(closed, d_a, d_u, w, w_bar_c=reg.w_bar[n:])
        rec_ya[slot] = np.linalg.norm(y_a)
        rec_yu[slot] = np.linalg.norm(y_u)

    z = np.concatenate([scenario.x0, scenario.xc0])
    slot = 0
    record(slot, 0, z)
    slot += 1
    half = 0.5 * dt
    sixth = dt / 6.0
    doubling_max = 0.0
    for k in range(n_steps):
        t = k * dt
        k1 = rhs(t, z)
        k2 = rhs(t + half, z + half * k1)
        k3 = rhs(t + half, z + half * k2)
        k4 = rhs(t + dt, z + dt * k3)
        z_next = z + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if k % 100 == 0:
            zh = _rk4_step(rhs, t, z, half)
            zh = _rk4_step(rhs, t + half, zh, half)
            est = float(np.max(np.abs(z_next - zh))) / 15.0
            if est > doubling_max:
                doubling_max = est
        z = z_next
        if not np.all(np.isfinite(z)):
            raise DivergenceError(
                f"non-finite state at t = {(k + 1) * dt:.6g}", t=(k + 1) * dt
            )
        if (k + 1) % scenario.stride == 0 or k + 1 == n_steps:
            if slot < n_rec and record_idx[slot] == k + 1:
                record(slot, k + 1, z)
                slot += 1
    if doubling_max > 1e-6 * (1.0 + float(np.max(np.abs(z)))):
        warnings.warn(
            f"step-doubling estimate {doubling_max:.3e} suggests dt = {dt} is coarse"
        )

    switch = []
    for d in (plant.dist.matched, plant.dist.unmatched):
        if d is not None and 0.0 < d.t_on <= scenario.t_end:
            switch.append(d.t_on)
    return Trajectory(
        name=scenario.name,
        controller=scenario.controller,
        dt=dt,
        stride=scenario.stride,
        t=rec_t,
        x=rec_x,
        xc=rec_xc,
        u=rec_u,
        h_cl=rec_h,
        lyap=rec_w,
        y_a_norm=rec_ya,
        y_u_norm=rec_yu,
        switch_times=tuple(sorted(set(switch))),
        config_dim=scenario.config_dim,
        meta={"step_doubling_max": doubling_max, "n_steps": n_steps},
    )


def _rk4_step(rhs, t, z, h):
    k1 = rhs(t, z)
    k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2)
    k4 = rhs(t + h, z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


LYAP_STEP_TOL = 1e-7


def check_convergence(
    traj: Trajectory, prediction: EquilibriumPrediction, tol: float = 1e-2
) -> ConvergenceVerdict:
    """Empirical verdict: distance of the recorded closed-loop state to the
    certified equilibrium, plus a Lyapunov monotonicity audit that skips
    record pairs straddling a disturbance activation."""
    w = traj.w_states()
    w_bar = np.asarray(prediction.w_bar, dtype=float)
    if w.shape[1] != w_bar.size:
        raise ContractError(
            f"trajectory states have dim {w.shape[1]}, prediction has {w_bar.size}"
        )
    err = np.linalg.norm(w - w_bar[None, :], axis=1)
    final_error = float(err[-1])
    inside = np.flatnonzero(err < tol)
    first_t = float(traj.t[inside[0]]) if inside.size else None
    max_inc = -np.inf
    vals = traj.lyap
    for i in range(len(vals) - 1):
        if np.isnan(vals[i]) or np.isnan(vals[i + 1]):
            continue
        if any(traj.t[i] < s <= traj.t[i + 1] for s in traj.switch_times):
            continue
        inc = vals[i + 1] - vals[i]
        if inc > max_inc:
            max_inc = inc
    if not np.isfinite(max_inc):
        max_inc = 0.0
    return ConvergenceVerdict(
        converged=final_error < tol,
        final_error=final_error,
        first_time_within_tol=first_t,
        max_lyap_increase=float(max_inc),
    )


def sweep(scenarios) -> list[SweepResult]:
    """Run scenarios independently; results keep the input order and
    per-scenario failures are collected instead of aborting the sweep."""
    results = []
    for sc in scenarios:
        try:
            traj = integrate(sc)
            verdict = (
                check_convergence(traj, sc.prediction, sc.tol)
                if sc.prediction is not None
                else None
            )
            results.append(SweepResult(sc, traj, verdict))
        except Exception as exc:  # collected, not fatal
            results.append(SweepResult(sc, None, None, error=f"{type(exc).__name__}: {exc}"))
    return results
