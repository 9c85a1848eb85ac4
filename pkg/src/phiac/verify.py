"""Audit suites: numerical certificates for the toolkit's five claims.

Each audit draws seeded random states from a box around the relevant
equilibrium (half-width 5 by default, which contains every example's
operating range), evaluates the claim's identities and inequalities, and
returns a Report whose summary passes only if every check does.  Audits
never mutate the system under test and are deterministic given the seed.

Claim numbering used throughout the toolkit and the CLI (--prop N):
  1  the controlled loop is port-Hamiltonian: structure matrices have the
     stated symmetry/definiteness and the closed-loop drift matches the
     composed plant + controller vector field,
  2  matched disturbances: the predicted equilibrium is stationary, the
     shifted energy is positive around it, decays along the flow at the
     certified rate, and the run converges,
  3  unmatched disturbances: ditto for the tilted energy, plus the
     disturbance factorization and tilted-minimum existence checks,
  4  both disturbances at once,
  5  mechanical plants: momentum-transform fidelity and the specialized
     controller, with the rest delegated to claim 2 machinery.
"""

from __future__ import annotations

import numpy as np

from . import sim
from .core import (
    PhSystem,
    check_assumption_matched,
    check_assumption_min,
    check_assumption_unmatched,
    check_structure,
    eval_drift,
    finite_diff_gradient,
    HamiltonianModel,
)
from .errors import ConfigurationError
from .iac import (
    IacGains,
    build_closed_loop,
    control_law,
    equilibrium_matched,
    equilibrium_mixed,
    equilibrium_unmatched,
    integrator_dynamics,
    lyapunov_matched,
    lyapunov_mixed,
    lyapunov_rate_bound,
    lyapunov_rate_bound_unmatched,
    lyapunov_unmatched,
)
from .mech import (
    MechanicalSystem,
    TransformedMech,
    body_drift,
    body_energy,
    check_transform_structure,
    mech_equilibrium,
    mech_iac,
    partition_mech,
)
from .reports import Check, Report

DEFAULT_BOX = 5.0
SHELL_DIRECTIONS = 200
SHELL_RADIUS = 0.1


def sample_box(rng: np.random.Generator, center: np.ndarray, count: int, radius: float = DEFAULT_BOX) -> np.ndarray:
    """Uniform samples with per-coordinate offsets in [-radius, radius]."""
    center = np.asarray(center, dtype=float)
    return center[None, :] + rng.uniform(-radius, radius, size=(count, center.size))


def _worst(name: str, margins, bad_detail: str = "") -> Check:
    margins = np.asarray(list(margins), dtype=float)
    idx = int(np.argmin(margins))
    worst = float(margins[idx])
    return Check(name, worst >= 0, margin=worst,
                 sample_index=None if worst >= 0 else idx, detail=bad_detail)


def _gain_check(gains: IacGains, x: np.ndarray) -> Check:
    try:
        gains.validate(x)
        return Check("gain predicates", True)
    except ConfigurationError as exc:
        return Check("gain predicates", False, detail=str(exc))


def _decay_checks(
    plant: PhSystem,
    gains: IacGains,
    controller: str,
    w_bar: np.ndarray,
    rng: np.random.Generator,
    t_sim: float,
    out_tol: float,
    out_col: str,
    label: str,
    d_bar_a: np.ndarray | None = None,
    d_bar_u: np.ndarray | None = None,
) -> list[Check]:
    """Shared simulated-decay audit: run from a perturbed start with the
    audited disturbance amounts active from t = 0, then check Lyapunov
    monotonicity, convergence to the predicted equilibrium, and decay of
    the detectability output.  The matched amount is injected through the
    controller pairing gain J_c1 - R_c1."""
    from dataclasses import replace

    from .core import DisturbanceModel, MatchedDisturbance, UnmatchedDisturbance, as_matrix_fn

    part = plant.partition
    m = part.m
    x0 = plant.x_star + rng.uniform(-0.5, 0.5, part.n)
    xc0 = np.zeros(m)
    matched = None
    if d_bar_a is not None and np.any(np.asarray(d_bar_a) != 0.0):
        j1, r1, _ = gains.at(plant.x_star)
        matched = MatchedDisturbance(
            gain=as_matrix_fn(j1 - r1, (m, m)),
            amount=np.asarray(d_bar_a, dtype=float),
        )
    unmatched = None
    if d_bar_u is not None and np.any(np.asarray(d_bar_u) != 0.0):
        unmatched = UnmatchedDisturbance(amount=np.asarray(d_bar_u, dtype=float))
    active = replace(plant, dist=DisturbanceModel(matched=matched, unmatched=unmatched))
    scenario = sim.Scenario(
        name=f"audit-{label}",
        plant=active,
        x0=x0,
        xc0=xc0,
        t_end=t_sim,
        dt=1e-3,
        stride=10,
        controller=controller,
        gains=gains,
    )
    traj = sim.integrate(scenario)
    vals = traj.lyap
    finite = vals[np.isfinite(vals)]
    max_inc = float(np.max(np.diff(finite))) if finite.size > 1 else 0.0
    w_final = traj.w_states()[-1]
    final_err = float(np.linalg.norm(w_final - w_bar))
    out = traj.y_a_norm if out_col == "y_a" else traj.y_u_norm
    out_final = float(out[-1]) if np.isfinite(out[-1]) else np.inf
    return [
        Check(f"{label}: Lyapunov non-increasing along run",
              max_inc <= sim.LYAP_STEP_TOL, margin=sim.LYAP_STEP_TOL - max_inc),
        Check(f"{label}: trajectory reaches predicted equilibrium",
              final_err < 1e-2, margin=1e-2 - final_err,
              detail=f"final |w - w_bar| = {final_err:.3e}"),
        Check(f"{label}: detectability output decays",
              out_final < out_tol, margin=out_tol - out_final,
              detail=f"final |{out_col}| = {out_final:.3e}"),
    ]


def audit_proposition1(plant: PhSystem, gains: IacGains, n_samples: int = 100, seed: int = 0) -> Report:
    """Closed-loop pH structure certificate."""
    rng = np.random.default_rng(seed)
    checks = [_gain_check(gains, plant.x_star)]
    if not checks[0].passed:
        return Report("claim 1: closed-loop pH structure", tuple(checks), seed=seed)
    closed = build_closed_loop(plant, gains)
    m, s = closed.m, closed.s
    structure = check_structure(plant, sample_box(rng, plant.x_star, n_samples))
    checks.extend(structure.checks)

    w_center = np.concatenate([plant.x_star, np.zeros(m)])
    w_samples = sample_box(rng, w_center, n_samples)
    t_act = plant.dist.horizon()
    skew_m, psd_m, ident_m, grad_m, push_m = [], [], [], [], []
    h_model = HamiltonianModel(value=closed.h_cl, grad=closed.grad_h_cl)
    for w in w_samples:
        J = closed.j_cl(w)
        R = closed.r_cl(w)
        skew_m.append(1e-12 * (1 + np.linalg.norm(J)) - np.linalg.norm(J + J.T))
        psd_m.append(np.linalg.eigvalsh(0.5 * (R + R.T)).min() + 1e-10)
        x = closed.x_of(w)
        lhs = closed.drift(w, t_act)
        d_a = plant.d_a(x, t_act)
        d_u = plant.d_u(x, t_act)
        lhs = lhs + np.concatenate([d_a, d_u, d_a])
        rhs = (J - R) @ closed.grad_h_cl(w)
        ident_m.append(1e-10 * (1 + np.linalg.norm(rhs)) - np.linalg.norm(lhs - rhs))
        g_fd = finite_diff_gradient(h_model, w)
        g = closed.grad_h_cl(w)
        grad_m.append(1e-6 - np.linalg.norm(g - g_fd) / (1 + np.linalg.norm(g_fd)))
        # pushforward: composed plant + controller drift in w-coordinates
        x_c = x[:m] - w[m + s:]
        u = control_law(plant, gains, x, x_c)
        xdot = eval_drift(plant, x, u, t_act)
        xcdot = integrator_dynamics(plant, gains, x, x_c)
        wdot = np.concatenate([xdot, xdot[:m] - xcdot])
        push_m.append(1e-10 * (1 + np.linalg.norm(wdot)) - np.linalg.norm(wdot - closed.drift(w, t_act)))
    checks.append(_worst("J_cl skew-symmetric", skew_m))
    checks.append(_worst("R_cl positive semidefinite", psd_m))
    checks.append(_worst("closed-loop pH identity", ident_m))
    checks.append(_worst("grad H_cl matches finite differences", grad_m))
    checks.append(_worst("drift equals composed plant+controller pushforward", push_m))
    return Report("claim 1: closed-loop pH structure", tuple(checks), seed=seed)


def audit_proposition2(
    plant: PhSystem,
    gains: IacGains,
    d_bar_a,
    n_samples: int = 100,
    seed: int = 0,
    t_sim: float = 20.0,
    out_tol: float = 1e-3,
) -> Report:
    """Matched-disturbance rejection certificate."""
    rng = np.random.default_rng(seed)
    checks = [_gain_check(gains, plant.x_star)]
    title = "claim 2: matched disturbance rejection"
    if not checks[0].passed:
        return Report(title, tuple(checks), seed=seed)
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(plant.partition.m)
    if plant.dist.matched is not None:
        rep = check_assumption_matched(plant, sample_box(rng, plant.x_star, n_samples))
        checks.extend(rep.checks)
    closed = build_closed_loop(plant, gains)
    try:
        pred = equilibrium_matched(plant, gains, d_bar_a)
        checks.append(Check("equilibrium drift residual", pred.residual < 1e-9,
                            margin=1e-9 - pred.residual,
                            detail=f"residual {pred.residual:.3e}"))
    except ConfigurationError as exc:
        checks.append(Check("equilibrium drift residual", False, detail=str(exc)))
        return Report(title, tuple(checks), seed=seed)
    w_bar = pred.w_bar

    dirs = rng.normal(size=(SHELL_DIRECTIONS, w_bar.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    shell = [lyapunov_matched(closed, d_bar_a, w_bar + SHELL_RADIUS * d, w_bar=w_bar) for d in dirs]
    checks.append(_worst("shifted energy positive on shell", shell))

    rate = []
    for w in sample_box(rng, w_bar, n_samples):
        wdot, bound = lyapunov_rate_bound(closed, gains, d_bar_a, w, w_bar=w_bar)
        rate.append(min(bound - wdot + 1e-9, -bound + 1e-9))
    checks.append(_worst("decay rate bound holds (and bound <= 0)", rate))

    checks.extend(
        _decay_checks(plant, gains, "iac", w_bar, rng, t_sim, out_tol, "y_a",
                      "matched run", d_bar_a=d_bar_a)
    )
    return Report(title, tuple(checks), seed=seed, data={"w_bar": w_bar})


def audit_proposition3(
    plant: PhSystem,
    gains: IacGains,
    d_bar_u,
    n_samples: int = 100,
    seed: int = 0,
    t_sim: float = 20.0,
    out_tol: float = 1e-3,
) -> Report:
    """Unmatched-disturbance rejection certificate (needs R_c2 = 0)."""
    rng = np.random.default_rng(seed)
    title = "claim 3: unmatched disturbance rejection"
    checks = [_gain_check(gains, plant.x_star)]
    if not checks[0].passed:
        return Report(title, tuple(checks), seed=seed)
    if not gains.r_c2_is_zero(plant.x_star):
        checks.append(Check("R_c2 = 0 precondition", False,
                            detail="unmatched rejection requires R_c2 = 0"))
        return Report(title, tuple(checks), seed=seed)
    checks.append(Check("R_c2 = 0 precondition", True))
    m = plant.partition.m
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)

    samples = sample_box(rng, plant.x_star, n_samples)
    fit = check_assumption_unmatched(plant, lambda x: plant.jr_au(x).T @ d_bar_u, samples)
    checks.extend(fit.checks)
    minimum = check_assumption_min(plant, d_bar_u)
    checks.extend(minimum.checks)
    if not minimum.passed:
        return Report(title, tuple(checks), seed=seed)
    x_bar = minimum.data["x_bar"]

    closed = build_closed_loop(plant, gains)
    try:
        pred = equilibrium_unmatched(plant, gains, d_bar_u, x_bar=x_bar)
        checks.append(Check("equilibrium drift residual", pred.residual < 1e-9,
                            margin=1e-9 - pred.residual,
                            detail=f"residual {pred.residual:.3e}"))
    except ConfigurationError as exc:
        checks.append(Check("equilibrium drift residual", False, detail=str(exc)))
        return Report(title, tuple(checks), seed=seed)
    w_bar = pred.w_bar

    ident = []
    for w in sample_box(rng, w_bar, n_samples):
        x = closed.x_of(w)
        j1x, r1x, _ = gains.at(x)
        push = np.zeros(w.size)
        push[:m] = (j1x - r1x) @ d_bar_u
        push[m + closed.s:] = (j1x - r1x) @ d_bar_u
        grad_t = closed.grad_h_cl(w).copy()
        grad_t[:m] += d_bar_u
        rhs = (closed.j_cl(w) - closed.r_cl(w)) @ grad_t - push
        lhs = closed.drift_static(w, None, d_bar_u)
        ident.append(1e-10 * (1 + np.linalg.norm(rhs)) - np.linalg.norm(lhs - rhs))
    checks.append(_worst("matched-form rewrite of the unmatched loop", ident))

    dirs = rng.normal(size=(SHELL_DIRECTIONS, w_bar.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    shell = [lyapunov_unmatched(closed, d_bar_u, w_bar + SHELL_RADIUS * d, w_bar=w_bar) for d in dirs]
    checks.append(_worst("tilted shifted energy positive on shell", shell))

    rate = []
    for w in sample_box(rng, w_bar, n_samples):
        wdot, bound = lyapunov_rate_bound_unmatched(closed, d_bar_u, w, w_bar=w_bar)
        rate.append(min(bound - wdot + 1e-9, -bound + 1e-9))
    checks.append(_worst("decay rate bound holds (and bound <= 0)", rate))

    checks.extend(
        _decay_checks(plant, gains, "iac", w_bar, rng, t_sim, out_tol, "y_u",
                      "unmatched run", d_bar_u=d_bar_u)
    )
    return Report(title, tuple(checks), seed=seed, data={"w_bar": w_bar, "x_bar": x_bar})


def audit_proposition4(
    plant: PhSystem,
    gains: IacGains,
    d_bar_a,
    d_bar_u,
    n_samples: int = 100,
    seed: int = 0,
    t_sim: float = 20.0,
) -> Report:
    """Simultaneous matched + unmatched rejection certificate."""
    rng = np.random.default_rng(seed)
    title = "claim 4: combined disturbance rejection"
    checks = [_gain_check(gains, plant.x_star)]
    if not checks[0].passed:
        return Report(title, tuple(checks), seed=seed)
    if not gains.r_c2_is_zero(plant.x_star):
        checks.append(Check("R_c2 = 0 precondition", False))
        return Report(title, tuple(checks), seed=seed)
    checks.append(Check("R_c2 = 0 precondition", True))
    m = plant.partition.m
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(m)
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)
    closed = build_closed_loop(plant, gains)
    try:
        pred = equilibrium_mixed(plant, gains, d_bar_a, d_bar_u)
        checks.append(Check("equilibrium drift residual", pred.residual < 1e-9,
                            margin=1e-9 - pred.residual,
                            detail=f"residual {pred.residual:.3e}"))
    except ConfigurationError as exc:
        checks.append(Check("equilibrium drift residual", False, detail=str(exc)))
        return Report(title, tuple(checks), seed=seed)
    w_bar = pred.w_bar
    dirs = rng.normal(size=(SHELL_DIRECTIONS, w_bar.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    shell = [lyapunov_mixed(closed, d_bar_a, d_bar_u, w_bar + SHELL_RADIUS * d, w_bar=w_bar) for d in dirs]
    checks.append(_worst("shifted energy positive on shell", shell))
    checks.extend(
        _decay_checks(plant, gains, "iac", w_bar, rng, t_sim, 1e-3, "y_u",
                      "combined run", d_bar_a=d_bar_a, d_bar_u=d_bar_u)
    )
    return Report(title, tuple(checks), seed=seed, data={"w_bar": w_bar})


def audit_proposition5(
    mech_sys: MechanicalSystem,
    gains: IacGains,
    n_samples: int = 100,
    seed: int = 0,
    t_sim: float = 20.0,
    out_tol: float = 1e-3,
    box: float = DEFAULT_BOX,
) -> Report:
    """Mechanical-plant certificate: transform fidelity plus matched rejection."""
    rng = np.random.default_rng(seed)
    title = "claim 5: mechanical integral action"
    tm = TransformedMech(mech_sys)
    l, m = mech_sys.l, mech_sys.m
    checks = [_gain_check(gains, np.concatenate([np.zeros(l), mech_sys.q_star]))]
    if not checks[0].passed:
        return Report(title, tuple(checks), seed=seed)

    q_samples = sample_box(rng, mech_sys.q_star, n_samples, radius=box)
    p_samples = rng.uniform(-box, box, size=(n_samples, l))
    pairs = list(zip(q_samples, p_samples))
    checks.extend(check_transform_structure(tm, pairs).checks)

    plant0 = partition_mech(tm)
    energy_m, drift_m = [], []
    u_probe = rng.uniform(-1, 1, size=(n_samples, m))
    for (q, pb), u in zip(pairs, u_probe):
        p = build_T_cached(tm, q) @ pb
        h_t = tm.hamiltonian().value(np.concatenate([p, q]))
        h_b = body_energy(mech_sys, q, pb)
        energy_m.append(1e-10 * (1 + abs(h_b)) - abs(h_t - h_b))
        drift_m.append(_pushforward_gap(tm, plant0, q, pb, u))
    checks.append(_worst("energy preserved by the momentum change", energy_m))
    checks.append(_worst("transformed drift pushes forward to the body drift", drift_m))

    plant = partition_mech(tm, gains)
    spec_m = []
    xc_probe = rng.uniform(-1, 1, size=(n_samples, m))
    for (q, pb), xc in zip(pairs, xc_probe):
        p = build_T_cached(tm, q) @ pb
        x = np.concatenate([p, q])
        u_mech, xc_dot_mech = mech_iac(tm, gains, q, p, xc)
        u_gen = control_law(plant, gains, x, xc)
        xc_dot_gen = integrator_dynamics(plant, gains, x, xc)
        gap = max(
            np.linalg.norm(u_mech - u_gen) / (1 + np.linalg.norm(u_gen)),
            np.linalg.norm(xc_dot_mech - xc_dot_gen) / (1 + np.linalg.norm(xc_dot_gen)),
        )
        spec_m.append(1e-12 - gap)
    checks.append(_worst("mechanical law specializes the general law", spec_m))

    try:
        pred = mech_equilibrium(tm, gains, mech_sys.d_bar_m)
        checks.append(Check("equilibrium drift residual", pred.residual < 1e-9,
                            margin=1e-9 - pred.residual,
                            detail=f"residual {pred.residual:.3e}"))
    except ConfigurationError as exc:
        checks.append(Check("equilibrium drift residual", False, detail=str(exc)))
        return Report(title, tuple(checks), seed=seed)
    j1, r1, _ = gains.at(np.zeros(0))
    d_bar_a = np.linalg.solve(j1 - r1, mech_sys.d_bar_m)
    checks.extend(
        _decay_checks(plant, gains, "iac", pred.w_bar, rng, t_sim, out_tol, "y_a",
                      "mechanical run", d_bar_a=d_bar_a)
    )
    return Report(title, tuple(checks), seed=seed, data={"w_bar": pred.w_bar})


def build_T_cached(tm: TransformedMech, q: np.ndarray) -> np.ndarray:
    return tm._entry(np.asarray(q, dtype=float), np.zeros(tm.sys.l)).T


def _pushforward_gap(tm: TransformedMech, plant: PhSystem, q, pb, u) -> float:
    """Margin for: transformed drift mapped back through pb = T^{-1} p equals
    the body drift, to 1e-8."""
    sys = tm.sys
    t_act = sys.dist_t_on
    e = tm._entry(np.asarray(q, dtype=float), build_T_cached(tm, q) @ pb)
    x = np.concatenate([e.p, e.q])
    xdot = eval_drift(plant, x, np.asarray(u, dtype=float), t_act)
    pdot, qdot = xdot[: sys.l], xdot[sys.l:]
    jac = sys.jac_tp(e.q, e.pb) if sys.jac_tp is not None else np.zeros((sys.l, sys.l))
    pbdot = e.T_inv @ (pdot - jac @ qdot)
    back = np.concatenate([qdot, pbdot])
    ref = body_drift(sys, e.q, e.pb, np.asarray(u, dtype=float), t_act)
    return 1e-8 * (1 + np.linalg.norm(ref)) - np.linalg.norm(back - ref)
