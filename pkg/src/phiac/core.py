"""Disturbed port-Hamiltonian plants and their structural checks.

A plant is ``xdot = [J(x) - R(x)] grad H(x) + col(u - d_a(x,t), -d_u(x,t))``
with the state split into actuated coordinates ``x_a`` (dim m) and
unactuated coordinates ``x_u`` (dim s).  J is skew-symmetric, R symmetric
positive semidefinite, both supplied block-wise as state-dependent
evaluator callbacks.  The regulated outputs are the gradient blocks
``y_a = grad_a H`` and ``y_u = grad_u H``.

Disturbances are constant vectors behind known structure:

* matched:   ``d_a(x,t) = G_d(x) d_bar_a`` with ``G_d`` full rank and
  negative definite in its symmetric part,
* unmatched: ``d_u(x,t) = (J_au(x) + R_au(x))^T d_bar_u``, recomputed from
  the current-state coupling blocks and never stored as a raw field.

Each disturbance switches on at a scheduled time and stays constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, ContractError, NumericsError
from .reports import Check, Report

MatrixFn = Callable[[np.ndarray], np.ndarray]

# Tolerances for the machine-precision structural identities.
SKEW_RTOL = 1e-12
SYM_RTOL = 1e-12
PSD_EIG_FLOOR = -1e-10
STATIONARITY_TOL = 1e-9


def as_matrix_fn(value, shape: tuple[int, int]) -> MatrixFn:
    """Wrap a constant array (or scalar for 1x1) into an evaluator callback."""
    if callable(value):
        return value
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.shape != shape:
        raise ContractError(f"constant block has shape {arr.shape}, expected {shape}")
    arr.setflags(write=False)
    return lambda x, _arr=arr: _arr


def zeros_fn(shape: tuple[int, int]) -> MatrixFn:
    return as_matrix_fn(np.zeros(shape), shape)


@dataclass(frozen=True)
class Partition:
    """Split of the state into m actuated and s unactuated coordinates."""

    m: int
    s: int

    def __post_init__(self):
        if self.m < 1 or self.s < 0:
            raise ContractError(f"need m >= 1 and s >= 0, got m={self.m}, s={self.s}")

    @property
    def n(self) -> int:
        return self.m + self.s

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ContractError(f"state has shape {x.shape}, expected ({self.n},)")
        return x[: self.m], x[self.m:]


@dataclass(frozen=True)
class PartitionedMatrix:
    """Block-partitioned state-dependent matrix with aa/au/ua/uu evaluators.

    Use the ``interconnection`` constructor for skew matrices (ua = -au^T)
    and ``dissipation`` for symmetric PSD ones (ua = au^T); both also make
    constant blocks callable.
    """

    partition: Partition
    aa: MatrixFn
    au: MatrixFn
    ua: MatrixFn
    uu: MatrixFn
    kind: str = "generic"

    @classmethod
    def interconnection(cls, partition: Partition, aa, au, uu) -> "PartitionedMatrix":
        m, s = partition.m, partition.s
        au_fn = as_matrix_fn(au, (m, s))
        return cls(
            partition,
            aa=as_matrix_fn(aa, (m, m)),
            au=au_fn,
            ua=lambda x: -au_fn(x).T,
            uu=as_matrix_fn(uu, (s, s)),
            kind="interconnection",
        )

    @classmethod
    def dissipation(cls, partition: Partition, aa, au, uu) -> "PartitionedMatrix":
        m, s = partition.m, partition.s
        au_fn = as_matrix_fn(au, (m, s))
        return cls(
            partition,
            aa=as_matrix_fn(aa, (m, m)),
            au=au_fn,
            ua=lambda x: au_fn(x).T,
            uu=as_matrix_fn(uu, (s, s)),
            kind="dissipation",
        )

    def full(self, x: np.ndarray) -> np.ndarray:
        """Assemble the full n x n matrix at state x."""
        m, n = self.partition.m, self.partition.n
        out = np.empty((n, n))
        out[:m, :m] = self.aa(x)
        out[:m, m:] = self.au(x)
        out[m:, :m] = self.ua(x)
        out[m:, m:] = self.uu(x)
        return out


@dataclass(frozen=True)
class HamiltonianModel:
    """Scalar energy with hand-coded gradient and optional Hessian.

    The gradient is expected to agree with central finite differences of
    ``value`` to relative tolerance 1e-6; ``check_gradient`` runs that
    audit at supplied sample states.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray] | None = None

    def check_gradient(self, samples, rtol: float = 1e-6) -> Report:
        checks = []
        worst = 0.0
        bad = None
        for k, x in enumerate(samples):
            g = np.asarray(self.grad(x), dtype=float)
            g_fd = finite_diff_gradient(self, x)
            err = np.linalg.norm(g - g_fd) / (1.0 + np.linalg.norm(g_fd))
            if err > worst:
                worst, bad = err, k
        ok = worst <= rtol
        checks.append(
            Check(
                "analytic gradient vs central differences",
                ok,
                margin=rtol - worst,
                sample_index=None if ok else bad,
                detail=f"worst relative error {worst:.3e}",
            )
        )
        return Report("hamiltonian gradient audit", tuple(checks))


@dataclass(frozen=True)
class MatchedDisturbance:
    """Matched channel d_a(x,t) = gain(x) @ amount, active for t >= t_on."""

    gain: MatrixFn
    amount: np.ndarray
    t_on: float = 0.0


@dataclass(frozen=True)
class UnmatchedDisturbance:
    """Unmatched channel d_u(x,t) = (J_au + R_au)(x)^T @ amount, t >= t_on."""

    amount: np.ndarray
    t_on: float = 0.0


@dataclass(frozen=True)
class DisturbanceModel:
    matched: MatchedDisturbance | None = None
    unmatched: UnmatchedDisturbance | None = None

    def horizon(self) -> float:
        """Earliest time at which every configured disturbance is active."""
        times = [0.0]
        if self.matched is not None:
            times.append(self.matched.t_on)
        if self.unmatched is not None:
            times.append(self.unmatched.t_on)
        return max(times)


NO_DISTURBANCE = DisturbanceModel()


@dataclass(frozen=True)
class PhSystem:
    """Disturbed pH plant around a shaped equilibrium x_star.

    x_star must be a stationary point of the Hamiltonian (the shaping step
    is assumed already done); construction rejects plants whose gradient
    at x_star exceeds 1e-9.  All evaluator callbacks must be re-entrant;
    instances are immutable and safe to share across threads.
    """

    partition: Partition
    J: PartitionedMatrix
    R: PartitionedMatrix
    H: HamiltonianModel
    dist: DisturbanceModel = NO_DISTURBANCE
    x_star: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        m, s = self.partition.m, self.partition.s
        x_star = np.asarray(self.x_star, dtype=float)
        if x_star.shape != (self.partition.n,):
            raise ConfigurationError(
                f"x_star has shape {x_star.shape}, expected ({self.partition.n},)"
            )
        x_star.setflags(write=False)
        object.__setattr__(self, "x_star", x_star)
        g = np.asarray(self.H.grad(x_star), dtype=float)
        if np.linalg.norm(g) > STATIONARITY_TOL:
            raise ConfigurationError(
                f"x_star is not a stationary point: |grad H| = {np.linalg.norm(g):.3e}"
            )
        if self.dist.matched is not None and np.shape(self.dist.matched.amount) != (m,):
            raise ConfigurationError("matched disturbance amount must be an m-vector")
        if self.dist.unmatched is not None and np.shape(self.dist.unmatched.amount) != (m,):
            raise ConfigurationError("unmatched disturbance amount must be an m-vector")

    # -- evaluation helpers -------------------------------------------------

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.partition.split(x)

    def grad_split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = np.asarray(self.H.grad(x), dtype=float)
        m = self.partition.m
        return g[:m], g[m:]

    def jr_au(self, x: np.ndarray) -> np.ndarray:
        """Coupling block J_au(x) + R_au(x) through which d_u enters."""
        return self.J.au(x) + self.R.au(x)

    def d_a(self, x: np.ndarray, t: float) -> np.ndarray:
        m = self.partition.m
        d = self.dist.matched
        if d is None or t < d.t_on:
            return np.zeros(m)
        return self.dist.matched.gain(x) @ d.amount

    def d_u(self, x: np.ndarray, t: float) -> np.ndarray:
        s = self.partition.s
        d = self.dist.unmatched
        if d is None or t < d.t_on:
            return np.zeros(s)
        return self.jr_au(x).T @ d.amount


def eval_drift(sys: PhSystem, x: np.ndarray, u: np.ndarray, t: float = 0.0) -> np.ndarray:
    """State derivative of the disturbed plant under input u at time t."""
    if t < 0:
        raise ContractError(f"time must be nonnegative, got {t}")
    m = sys.partition.m
    u = np.asarray(u, dtype=float)
    if u.shape != (m,):
        raise ContractError(f"input has shape {u.shape}, expected ({m},)")
    x = np.asarray(x, dtype=float)
    sys.partition.split(x)  # shape contract
    jr = sys.J.full(x) - sys.R.full(x)
    out = jr @ sys.H.grad(x)
    out[:m] += u - sys.d_a(x, t)
    out[m:] -= sys.d_u(x, t)
    return out


def eval_outputs(sys: PhSystem, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Regulated outputs (y_a, y_u), the gradient blocks of H."""
    return sys.grad_split(x)


def check_structure(sys: PhSystem, samples) -> Report:
    """Verify J skew-symmetric and R symmetric PSD at every sample.

    Never aborts mid-scan; the report carries the worst margin and the
    first offending sample per property.
    """
    samples = list(samples)
    if not samples:
        raise ContractError("need at least one sample state")
    worst = {"J skew-symmetric": np.inf, "R symmetric": np.inf, "R positive semidefinite": np.inf}
    first_bad = {k: None for k in worst}
    for k, x in enumerate(samples):
        J = sys.J.full(x)
        R = sys.R.full(x)
        skew_tol = SKEW_RTOL * (1.0 + np.linalg.norm(J))
        sym_tol = SYM_RTOL * (1.0 + np.linalg.norm(R))
        trios = (
            ("J skew-symmetric", skew_tol - np.linalg.norm(J + J.T)),
            ("R symmetric", sym_tol - np.linalg.norm(R - R.T)),
            (
                "R positive semidefinite",
                (np.linalg.eigvalsh(0.5 * (R + R.T)).min() - PSD_EIG_FLOOR) if R.size else np.inf,
            ),
        )
        for name, margin in trios:
            if margin < worst[name]:
                worst[name] = margin
            if margin < 0 and first_bad[name] is None:
                first_bad[name] = k
    checks = tuple(
        Check(name, worst[name] >= 0, margin=float(worst[name]), sample_index=first_bad[name])
        for name in worst
    )
    return Report("pH structure", checks, data={"n_samples": len(samples)})


def check_assumption_matched(sys: PhSystem, samples) -> Report:
    """Verify the matched-disturbance gain is invertible with negative
    definite symmetric part at every sample; reports the worst margins."""
    if sys.dist.matched is None:
        raise ConfigurationError("plant has no matched disturbance model")
    gain = sys.dist.matched.gain
    worst_negdef = np.inf
    worst_cond = 0.0
    bad_negdef = bad_cond = None
    for k, x in enumerate(samples):
        G = np.atleast_2d(np.asarray(gain(x), dtype=float))
        sym_max = np.linalg.eigvalsh(0.5 * (G + G.T)).max()
        cond = np.linalg.cond(G)
        if -sym_max < worst_negdef:
            worst_negdef = -sym_max
            if sym_max >= 0:
                bad_negdef = bad_negdef if bad_negdef is not None else k
        if cond > worst_cond:
            worst_cond = cond
            if not np.isfinite(cond) or cond > 1e12:
                bad_cond = bad_cond if bad_cond is not None else k
    cond_ok = np.isfinite(worst_cond) and worst_cond <= 1e12
    checks = (
        Check(
            "gain symmetric part negative definite",
            worst_negdef > 0,
            margin=float(worst_negdef),
            sample_index=bad_negdef,
        ),
        Check(
            "gain invertible",
            cond_ok,
            margin=float(1e12 - worst_cond) if np.isfinite(worst_cond) else -np.inf,
            detail=f"worst condition estimate {worst_cond:.3e}",
            sample_index=bad_cond,
        ),
    )
    return Report("matched disturbance structure", checks)


def check_assumption_unmatched(sys: PhSystem, d_u_raw: Callable[[np.ndarray], np.ndarray], samples) -> Report:
    """Fit one constant d_bar through d_u_raw(x) = (J_au+R_au)(x)^T d_bar.

    Stacks the per-sample linear systems into a single least-squares solve
    and passes iff every per-sample residual stays below 1e-8.  On success
    the recovered vector is attached as ``data["d_bar_u"]``.
    """
    samples = list(samples)
    m, s = sys.partition.m, sys.partition.s
    rows = []
    rhs = []
    for x in samples:
        rows.append(sys.jr_au(x).T)
        rhs.append(np.asarray(d_u_raw(x), dtype=float).reshape(s))
    A = np.vstack(rows) if rows else np.zeros((0, m))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    d_bar, *_ = np.linalg.lstsq(A, b, rcond=None)
    worst = 0.0
    bad = None
    for k, x in enumerate(samples):
        res = np.linalg.norm(rows[k] @ d_bar - rhs[k], ord=np.inf)
        if res > worst:
            worst, bad = res, k
    ok = worst < 1e-8
    checks = (
        Check(
            "constant vector fits all samples",
            ok,
            margin=float(1e-8 - worst),
            sample_index=None if ok else bad,
            detail=f"worst residual {worst:.3e}",
        ),
    )
    return Report(
        "unmatched disturbance factorization",
        checks,
        data={"d_bar_u": d_bar if ok else None, "residual": worst},
    )


def check_assumption_min(sys: PhSystem, d_bar_u: np.ndarray, max_iter: int = 200) -> Report:
    """Find the isolated minimizer of the tilted energy H(x) + x_a^T d_bar_u.

    Runs a damped Newton descent seeded at x_star (gradient fallback when
    the Hessian step is unusable), then certifies stationarity
    (|grad| < 1e-9) and positive definiteness of the Hessian.  The
    minimizer is attached as ``data["x_bar"]``.
    """
    m = sys.partition.m
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)
    tilt = np.concatenate([d_bar_u, np.zeros(sys.partition.s)])

    def f(x):
        return float(sys.H.value(x)) + float(x[:m] @ d_bar_u)

    def g(x):
        return np.asarray(sys.H.grad(x), dtype=float) + tilt

    def hess(x):
        if sys.H.hess is not None:
            return np.asarray(sys.H.hess(x), dtype=float)
        return finite_diff_jacobian(g, x)

    x = np.array(sys.x_star, dtype=float)
    converged = False
    for _ in range(max_iter):
        grad = g(x)
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-12:
            converged = True
            break
        Hm = hess(x)
        try:
            step = np.linalg.solve(Hm, -grad)
            if not np.all(np.isfinite(step)) or step @ grad >= 0:
                step = -grad
        except np.linalg.LinAlgError:
            step = -grad
        # backtracking on the tilted energy
        fx = f(x)
        alpha = 1.0
        for _ in range(60):
            x_new = x + alpha * step
            if f(x_new) <= fx + 1e-4 * alpha * (grad @ step):
                break
            alpha *= 0.5
        else:
            break
        x = x_new
    gnorm = float(np.linalg.norm(g(x)))
    stationary = gnorm < 1e-9
    Hm = 0.5 * (hess(x) + hess(x).T)
    min_eig = float(np.linalg.eigvalsh(Hm).min()) if Hm.size else np.inf
    definite = min_eig > 1e-10 * (1.0 + abs(min_eig))
    checks = (
        Check("stationary point found", stationary, margin=1e-9 - gnorm,
              detail=f"|grad| = {gnorm:.3e} after descent"),
        Check("Hessian positive definite", definite, margin=min_eig,
              detail="not a minimum" if not definite else ""),
    )
    return Report(
        "tilted energy minimum",
        checks,
        data={"x_bar": x, "grad_norm": gnorm, "hessian_min_eig": min_eig,
              "converged": converged},
    )


def finite_diff_gradient(H: HamiltonianModel, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of H.value, step h scaled by 1 + |x_i|."""
    if h <= 0:
        raise ContractError("step size must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        hi = h * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp, fm = H.value(xp), H.value(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericsError(f"non-finite energy when perturbing coordinate {i}")
        out[i] = (fp - fm) / (2.0 * hi)
    return out


def finite_diff_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian d f_i / d x_j of a vector field."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    out = np.empty((f0.size, x.size))
    for j in range(x.size):
        hj = h * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        out[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * hj)
    return out
