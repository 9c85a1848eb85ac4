"""Integral-action controller and the closed loop it induces.

The controller extends the plant with an integrator state ``x_c`` (one per
actuated coordinate) and feeds back

    u    = [-J_aa + R_aa + J_c1 - R_c1 - R_c2] grad_a H
           + [J_c1 - R_c1] K_i (x_a - x_c) + 2 R_au grad_u H
    xcdot = -R_c2 grad_a H + (J_au + R_au) grad_u H

with designer gains J_c1 skew, R_c1 symmetric positive definite, R_c2
symmetric PSD (possibly state-dependent) and K_i constant symmetric
positive definite.  In the coordinates ``w = (x_a, x_u, x_a - x_c)`` the
loop is again port-Hamiltonian, with energy
``H_cl(w) = H(w_a, w_u) + 0.5 w_c^T K_i w_c``, interconnection

    J_cl = [[ J_c1,           J_au + R_au,  J_c1 ],
            [ -(J_au+R_au)^T, J_uu,         0    ],
            [ J_c1,           0,            J_c1 ]]

and dissipation

    R_cl = [[ R_c1 + R_c2, 0,    R_c1 ],
            [ 0,           R_uu, 0    ],
            [ R_c1,        0,    R_c1 ]].

Note the open-loop coupling block R_au migrates from the dissipation into
the interconnection matrix.  Constant disturbances shift the equilibrium
integrator offset ``w_c`` but not the regulated plant coordinates; the
equilibrium predictions below state where, and every prediction is
re-verified by a drift-residual evaluation rather than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    MatrixFn,
    PhSystem,
    as_matrix_fn,
    check_assumption_min,
)
from .errors import ConfigurationError, ContractError

_SKEW_RTOL = 1e-12
_SYM_RTOL = 1e-12


def _as_gain(value, m: int) -> tuple[MatrixFn, np.ndarray | None]:
    """Normalize a gain to (evaluator, constant-array-or-None)."""
    if callable(value):
        return value, None
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.shape != (m, m):
        raise ConfigurationError(f"gain has shape {arr.shape}, expected ({m}, {m})")
    return as_matrix_fn(arr, (m, m)), arr


@dataclass(frozen=True)
class IacGains:
    """Controller parameters J_c1, R_c1, R_c2 (state-dependent allowed) and
    constant K_i.  Validation is explicit so that audits can exercise
    deliberately broken gain sets."""

    j_c1: MatrixFn | np.ndarray
    r_c1: MatrixFn | np.ndarray
    r_c2: MatrixFn | np.ndarray
    k_i: np.ndarray
    m: int

    def __post_init__(self):
        m = self.m
        j_fn, j_const = _as_gain(self.j_c1, m)
        r1_fn, r1_const = _as_gain(self.r_c1, m)
        r2_fn, r2_const = _as_gain(self.r_c2, m)
        k_i = np.atleast_2d(np.asarray(self.k_i, dtype=float))
        if k_i.shape != (m, m):
            raise ConfigurationError(f"K_i has shape {k_i.shape}, expected ({m}, {m})")
        object.__setattr__(self, "j_c1", j_fn)
        object.__setattr__(self, "r_c1", r1_fn)
        object.__setattr__(self, "r_c2", r2_fn)
        object.__setattr__(self, "k_i", k_i)
        object.__setattr__(self, "_consts", (j_const, r1_const, r2_const))
        object.__setattr__(self, "_validated", False)

    @property
    def is_constant(self) -> bool:
        return all(c is not None for c in self._consts)

    def at(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate (J_c1, R_c1, R_c2) at state x (cached when constant)."""
        j, r1, r2 = self._consts
        return (
            j if j is not None else np.atleast_2d(self.j_c1(x)),
            r1 if r1 is not None else np.atleast_2d(self.r_c1(x)),
            r2 if r2 is not None else np.atleast_2d(self.r_c2(x)),
        )

    def k_i_inv(self) -> np.ndarray:
        return np.linalg.inv(self.k_i)

    def r_c2_is_zero(self, x: np.ndarray | None = None) -> bool:
        r2_const = self._consts[2]
        if r2_const is not None:
            return bool(np.all(r2_const == 0.0))
        if x is None:
            raise ConfigurationError("state-dependent R_c2 needs a state to test at")
        return bool(np.all(np.asarray(self.r_c2(x)) == 0.0))

    def validate(self, x: np.ndarray | None = None) -> None:
        """Raise ConfigurationError naming the first violated predicate.

        Constant gains are validated once and the result memoized;
        state-dependent gains are validated at the supplied state.
        """
        if self._validated and self.is_constant:
            return
        if not self.is_constant and x is None:
            raise ConfigurationError(
                "state-dependent gains need a state to validate at"
            )
        j, r1, r2 = self.at(x if x is not None else np.zeros(0))
        if np.linalg.norm(j + j.T) > _SKEW_RTOL * (1.0 + np.linalg.norm(j)):
            raise ConfigurationError("J_c1 is not skew-symmetric")
        if np.linalg.norm(r1 - r1.T) > _SYM_RTOL * (1.0 + np.linalg.norm(r1)):
            raise ConfigurationError("R_c1 is not symmetric")
        if np.linalg.eigvalsh(0.5 * (r1 + r1.T)).min() <= 1e-12 * (1.0 + np.linalg.norm(r1)):
            raise ConfigurationError("R_c1 is not positive definite")
        if np.linalg.norm(r2 - r2.T) > _SYM_RTOL * (1.0 + np.linalg.norm(r2)):
            raise ConfigurationError("R_c2 is not symmetric")
        if np.linalg.eigvalsh(0.5 * (r2 + r2.T)).min() < -1e-10:
            raise ConfigurationError("R_c2 is not positive semidefinite")
        if np.linalg.norm(self.k_i - self.k_i.T) > _SYM_RTOL * (1.0 + np.linalg.norm(self.k_i)):
            raise ConfigurationError("K_i is not symmetric")
        if np.linalg.eigvalsh(self.k_i).min() <= 0:
            raise ConfigurationError("K_i is not positive definite")
        if self.is_constant:
            object.__setattr__(self, "_validated", True)


def matched_gains(g_d) -> tuple[np.ndarray, np.ndarray] | tuple[MatrixFn, MatrixFn]:
    """Split a sign-definite disturbance gain into (J_c1, R_c1).

    J_c1 is the skew part of G_d (exactly skew in floating point) and
    R_c1 = J_c1 - G_d, so the pairing identity J_c1 - R_c1 = G_d holds to
    within one rounding unit per entry (bit-exact whenever the skew part
    is representable, e.g. for the symmetric or integer-valued cases).
    Rejects gains whose symmetric part is not negative definite (R_c1
    would not be positive definite).  A callable G_d yields callable
    gains evaluated per state.
    """
    if callable(g_d):
        return (lambda x: matched_gains(g_d(x))[0],
                lambda x: matched_gains(g_d(x))[1])
    G = np.atleast_2d(np.asarray(g_d, dtype=float))
    if G.shape[0] != G.shape[1]:
        raise ConfigurationError("G_d must be square")
    j_c1 = 0.5 * (G - G.T)
    r_c1 = j_c1 - G
    min_eig = np.linalg.eigvalsh(0.5 * (r_c1 + r_c1.T)).min()
    if min_eig <= 1e-12 * (1.0 + np.linalg.norm(r_c1)):
        raise ConfigurationError(
            f"symmetric part of G_d is not negative definite (R_c1 eig {min_eig:.3e})"
        )
    return j_c1, r_c1


def control_law(plant: PhSystem, gains: IacGains, x: np.ndarray, x_c: np.ndarray) -> np.ndarray:
    """Feedback input of the integral-action controller at (x, x_c)."""
    gains.validate(x)
    ga, gu = plant.grad_split(x)
    j, r1, r2 = gains.at(x)
    jmr = j - r1
    u = (-plant.J.aa(x) + plant.R.aa(x) + jmr - r2) @ ga
    u += jmr @ (gains.k_i @ (x[: plant.partition.m] - x_c))
    u += 2.0 * (plant.R.au(x) @ gu)
    return u


def integrator_dynamics(plant: PhSystem, gains: IacGains, x: np.ndarray, x_c: np.ndarray) -> np.ndarray:
    """Integrator state derivative xcdot = -R_c2 grad_a H + (J_au+R_au) grad_u H."""
    gains.validate(x)
    ga, gu = plant.grad_split(x)
    _, _, r2 = gains.at(x)
    return -(r2 @ ga) + plant.jr_au(x) @ gu


def control_law_wc(
    plant: PhSystem,
    gains: IacGains,
    x: np.ndarray,
    w_c: np.ndarray,
    d_a: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Equivalent controller realization with integrator offset w_c = x_a - x_c.

    Intended for the unmatched-only case (d_a = 0), where it needs no
    measurement of grad_u H when R_au = 0; a nonzero d_a is accepted so the
    algebraic equivalence with ``control_law`` can be tested.
    """
    gains.validate(x)
    m = plant.partition.m
    d_a = np.zeros(m) if d_a is None else np.asarray(d_a, dtype=float)
    ga, gu = plant.grad_split(x)
    j, r1, r2 = gains.at(x)
    jmr = j - r1
    kiwc = gains.k_i @ w_c
    u = (-plant.J.aa(x) + plant.R.aa(x) + jmr - r2) @ ga + jmr @ kiwc
    u += 2.0 * (plant.R.au(x) @ gu)
    wc_dot = jmr @ (ga + kiwc) - d_a
    return u, wc_dot


def baseline_passive_iac(plant: PhSystem, k_i, x: np.ndarray, x_c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Plain integrator around the passive output: xcdot = K_i y_a, u = -x_c."""
    m = plant.partition.m
    k_i = np.atleast_2d(np.asarray(k_i, dtype=float))
    if np.linalg.eigvalsh(0.5 * (k_i + k_i.T)).min() <= 0:
        raise ConfigurationError("K_i is not positive definite")
    y_a, _ = plant.grad_split(x)
    return -np.asarray(x_c, dtype=float), k_i @ y_a


@dataclass(frozen=True)
class ClosedLoop:
    """The (n+m)-dimensional loop in coordinates w = (x_a, x_u, x_a - x_c).

    Immutable and re-entrant; controller state lives in the simulation
    loop, never here.
    """

    plant: PhSystem
    gains: IacGains

    @property
    def m(self) -> int:
        return self.plant.partition.m

    @property
    def s(self) -> int:
        return self.plant.partition.s

    @property
    def dim(self) -> int:
        return self.plant.partition.n + self.m

    def split(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ContractError(f"state has shape {w.shape}, expected ({self.dim},)")
        m, n = self.m, self.plant.partition.n
        return w[:m], w[m:n], w[n:]

    def x_of(self, w: np.ndarray) -> np.ndarray:
        return np.asarray(w, dtype=float)[: self.plant.partition.n]

    def h_cl(self, w: np.ndarray) -> float:
        _, _, w_c = self.split(w)
        return float(self.plant.H.value(self.x_of(w)) + 0.5 * w_c @ (self.gains.k_i @ w_c))

    def grad_h_cl(self, w: np.ndarray) -> np.ndarray:
        _, _, w_c = self.split(w)
        g = self.plant.H.grad(self.x_of(w))
        return np.concatenate([g, self.gains.k_i @ w_c])

    def j_cl(self, w: np.ndarray) -> np.ndarray:
        m, s, d = self.m, self.s, self.dim
        x = self.x_of(w)
        j, _, _ = self.gains.at(x)
        jr_au = self.plant.jr_au(x)
        out = np.zeros((d, d))
        out[:m, :m] = j
        out[:m, m:m + s] = jr_au
        out[:m, m + s:] = j
        out[m:m + s, :m] = -jr_au.T
        out[m:m + s, m:m + s] = self.plant.J.uu(x)
        out[m + s:, :m] = j
        out[m + s:, m + s:] = j
        return out

    def r_cl(self, w: np.ndarray) -> np.ndarray:
        m, s, d = self.m, self.s, self.dim
        x = self.x_of(w)
        _, r1, r2 = self.gains.at(x)
        out = np.zeros((d, d))
        out[:m, :m] = r1 + r2
        out[:m, m + s:] = r1
        out[m:m + s, m:m + s] = self.plant.R.uu(x)
        out[m + s:, :m] = r1
        out[m + s:, m + s:] = r1
        return out

    def drift(self, w: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Closed-loop vector field with the plant's scheduled disturbances."""
        x = self.x_of(w)
        return self._drift_with(w, self.plant.d_a(x, t), self.plant.d_u(x, t))

    def drift_static(self, w: np.ndarray, d_bar_a: np.ndarray | None, d_bar_u: np.ndarray | None) -> np.ndarray:
        """Vector field with explicitly given constant disturbance amounts.

        d_bar_a enters through the plant's matched gain G_d(x); d_bar_u
        through (J_au + R_au)(x)^T.  Schedules are ignored (always active).
        """
        x = self.x_of(w)
        m, s = self.m, self.s
        d_a_vec = np.zeros(m)
        if d_bar_a is not None and np.any(np.asarray(d_bar_a) != 0.0):
            if self.plant.dist.matched is None:
                raise ConfigurationError(
                    "nonzero matched amount but the plant has no matched gain"
                )
            d_a_vec = self.plant.dist.matched.gain(x) @ np.asarray(d_bar_a, dtype=float)
        d_u_vec = np.zeros(s)
        if d_bar_u is not None and np.any(np.asarray(d_bar_u) != 0.0):
            d_u_vec = self.plant.jr_au(x).T @ np.asarray(d_bar_u, dtype=float)
        return self._drift_with(w, d_a_vec, d_u_vec)

    def _drift_with(self, w: np.ndarray, d_a_vec: np.ndarray, d_u_vec: np.ndarray) -> np.ndarray:
        m, s = self.m, self.s
        x = self.x_of(w)
        w_c = np.asarray(w, dtype=float)[m + s:]
        ga, gu = self.plant.grad_split(x)
        gc = self.gains.k_i @ w_c
        j, r1, r2 = self.gains.at(x)
        jmr = j - r1
        jr_au = self.plant.jr_au(x)
        out = np.empty(self.dim)
        out[:m] = (jmr - r2) @ ga + jr_au @ gu + jmr @ gc - d_a_vec
        out[m:m + s] = -(jr_au.T @ ga) + (self.plant.J.uu(x) - self.plant.R.uu(x)) @ gu - d_u_vec
        out[m + s:] = jmr @ (ga + gc) - d_a_vec
        return out


def build_closed_loop(plant: PhSystem, gains: IacGains) -> ClosedLoop:
    """Assemble the closed loop after validating the gain predicates."""
    gains.validate(plant.x_star)
    if gains.m != plant.partition.m:
        raise ConfigurationError(
            f"gains sized for m={gains.m}, plant has m={plant.partition.m}"
        )
    return ClosedLoop(plant, gains)


@dataclass(frozen=True)
class EquilibriumPrediction:
    """A predicted closed-loop equilibrium plus its certified drift residual."""

    w_bar: np.ndarray
    kind: str  # matched | unmatched | mixed
    residual: float
    x_bar: np.ndarray = None  # type: ignore[assignment]
    data: dict = field(default_factory=dict)

    @property
    def w_bar_c(self) -> np.ndarray:
        return self.w_bar[-(len(self.w_bar) - len(self.x_bar)):]


RESIDUAL_HARD_LIMIT = 1e-6


def _certify(closed: ClosedLoop, w_bar, kind, x_bar, d_bar_a, d_bar_u, data=None) -> EquilibriumPrediction:
    residual = float(np.linalg.norm(closed.drift_static(w_bar, d_bar_a, d_bar_u)))
    if residual > RESIDUAL_HARD_LIMIT:
        raise ConfigurationError(
            f"{kind} equilibrium prediction fails its drift check "
            f"(residual {residual:.3e}); an upstream assumption is violated"
        )
    return EquilibriumPrediction(w_bar, kind, residual, x_bar=x_bar, data=data or {})


def equilibrium_matched(plant: PhSystem, gains: IacGains, d_bar_a) -> EquilibriumPrediction:
    """Predicted equilibrium (x_star, K_i^{-1} d_bar_a) under a matched
    disturbance, certified by a drift-residual evaluation."""
    closed = build_closed_loop(plant, gains)
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(closed.m)
    w_bar_c = np.linalg.solve(gains.k_i, d_bar_a)
    w_bar = np.concatenate([plant.x_star, w_bar_c])
    return _certify(closed, w_bar, "matched", plant.x_star, d_bar_a, None)


def equilibrium_unmatched(
    plant: PhSystem, gains: IacGains, d_bar_u, x_bar: np.ndarray | None = None
) -> EquilibriumPrediction:
    """Predicted equilibrium (x_bar, K_i^{-1} d_bar_u) under an unmatched
    disturbance; requires R_c2 = 0 and a minimizer of the tilted energy."""
    closed = build_closed_loop(plant, gains)
    _require_zero_r_c2(gains, plant)
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(closed.m)
    x_bar = _resolve_x_bar(plant, d_bar_u, x_bar)
    w_bar = np.concatenate([x_bar, np.linalg.solve(gains.k_i, d_bar_u)])
    return _certify(closed, w_bar, "unmatched", x_bar, None, d_bar_u)


def equilibrium_mixed(
    plant: PhSystem, gains: IacGains, d_bar_a, d_bar_u, x_bar: np.ndarray | None = None
) -> EquilibriumPrediction:
    """Predicted equilibrium (x_bar, K_i^{-1}[d_bar_a + d_bar_u]) under
    simultaneous disturbances; requires R_c2 = 0."""
    closed = build_closed_loop(plant, gains)
    _require_zero_r_c2(gains, plant)
    m = closed.m
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(m)
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)
    x_bar = _resolve_x_bar(plant, d_bar_u, x_bar)
    w_bar = np.concatenate([x_bar, np.linalg.solve(gains.k_i, d_bar_a + d_bar_u)])
    return _certify(closed, w_bar, "mixed", x_bar, d_bar_a, d_bar_u)


def _require_zero_r_c2(gains: IacGains, plant: PhSystem) -> None:
    _, _, r2 = gains.at(plant.x_star)
    if np.any(r2 != 0.0):
        raise ConfigurationError("this prediction requires R_c2 = 0")


def _resolve_x_bar(plant: PhSystem, d_bar_u: np.ndarray, x_bar: np.ndarray | None) -> np.ndarray:
    if x_bar is not None:
        return np.asarray(x_bar, dtype=float)
    report = check_assumption_min(plant, d_bar_u)
    if not report.passed:
        raise ConfigurationError(
            "tilted energy has no certified minimum:\n" + report.render_text()
        )
    return report.data["x_bar"]


# -- Lyapunov certificates ---------------------------------------------------


def lyapunov_matched(closed: ClosedLoop, d_bar_a, w, w_bar: np.ndarray | None = None) -> float:
    """Shifted closed-loop energy W(w) = H_cl(w) - d_bar_a^T (w_c - w_bar_c)
    - H_cl(w_bar); zero at the matched equilibrium and decaying along
    matched-disturbance trajectories."""
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(closed.m)
    if w_bar is None:
        w_bar = np.concatenate([closed.plant.x_star, np.linalg.solve(closed.gains.k_i, d_bar_a)])
    _, _, w_c = closed.split(w)
    w_bar_c = w_bar[closed.m + closed.s:]
    return closed.h_cl(w) - float(d_bar_a @ (w_c - w_bar_c)) - closed.h_cl(w_bar)


def lyapunov_rate_bound(
    closed: ClosedLoop, gains: IacGains, d_bar_a, w, w_bar: np.ndarray | None = None
) -> tuple[float, float]:
    """Analytic derivative of the matched Lyapunov value along the loop and
    its certified upper bound

        Wdot <= -|grad_a H_cl|^2_{R_c2} - |grad_a H_cl + K_i (w_c - w_bar_c)|^2_{R_c1} <= 0.

    Returns (Wdot, bound); the caller asserts Wdot <= bound + tol.
    """
    m = closed.m
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(m)
    if w_bar is None:
        w_bar = np.concatenate([closed.plant.x_star, np.linalg.solve(gains.k_i, d_bar_a)])
    x = closed.x_of(w)
    _, _, w_c = closed.split(w)
    grad_w = closed.grad_h_cl(w).copy()
    grad_w[m + closed.s:] -= d_bar_a  # gradient of the shifted energy
    wdot = float(grad_w @ closed.drift_static(w, d_bar_a, None))
    ga = grad_w[:m]
    resid = ga + gains.k_i @ (w_c - w_bar[m + closed.s:])
    _, r1, r2 = gains.at(x)
    bound = -float(ga @ (r2 @ ga)) - float(resid @ (r1 @ resid))
    return wdot, bound


def lyapunov_unmatched(
    closed: ClosedLoop,
    d_bar_u,
    w,
    x_bar: np.ndarray | None = None,
    w_bar: np.ndarray | None = None,
) -> float:
    """Shifted tilted energy for the unmatched case: the closed-loop energy
    built on H(x) + x_a^T d_bar_u, shifted to vanish at the equilibrium."""
    m = closed.m
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)
    if w_bar is None:
        x_bar = _resolve_x_bar(closed.plant, d_bar_u, x_bar)
        w_bar = np.concatenate([x_bar, np.linalg.solve(closed.gains.k_i, d_bar_u)])

    def h_cl_tilted(v):
        va = v[:m]
        return closed.h_cl(v) + float(va @ d_bar_u)

    _, _, w_c = closed.split(w)
    w_bar_c = w_bar[m + closed.s:]
    return h_cl_tilted(w) - float(d_bar_u @ (w_c - w_bar_c)) - h_cl_tilted(w_bar)


def lyapunov_rate_bound_unmatched(
    closed: ClosedLoop,
    d_bar_u,
    w,
    x_bar: np.ndarray | None = None,
    w_bar: np.ndarray | None = None,
) -> tuple[float, float]:
    """(Wdot, bound) for the unmatched certificate, with
    bound = -|grad_a H + d_bar_u + K_i (w_c - w_bar_c)|^2_{R_c1}."""
    m = closed.m
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)
    if w_bar is None:
        x_bar = _resolve_x_bar(closed.plant, d_bar_u, x_bar)
        w_bar = np.concatenate([x_bar, np.linalg.solve(closed.gains.k_i, d_bar_u)])
    x = closed.x_of(w)
    _, _, w_c = closed.split(w)
    grad_w = closed.grad_h_cl(w).copy()
    grad_w[:m] += d_bar_u
    grad_w[m + closed.s:] -= d_bar_u
    wdot = float(grad_w @ closed.drift_static(w, None, d_bar_u))
    resid = grad_w[:m] + closed.gains.k_i @ (w_c - w_bar[m + closed.s:])
    _, r1, _ = closed.gains.at(x)
    bound = -float(resid @ (r1 @ resid))
    return wdot, bound


def lyapunov_mixed(
    closed: ClosedLoop,
    d_bar_a,
    d_bar_u,
    w,
    x_bar: np.ndarray | None = None,
    w_bar: np.ndarray | None = None,
) -> float:
    """Shifted tilted energy when both disturbances act; the integrator
    offset shifts by K_i^{-1}(d_bar_a + d_bar_u)."""
    m = closed.m
    d_bar_a = np.asarray(d_bar_a, dtype=float).reshape(m)
    d_bar_u = np.asarray(d_bar_u, dtype=float).reshape(m)
    if w_bar is None:
        x_bar = _resolve_x_bar(closed.plant, d_bar_u, x_bar)
        w_bar = np.concatenate(
            [x_bar, np.linalg.solve(closed.gains.k_i, d_bar_a + d_bar_u)]
        )

    def h_cl_tilted(v):
        return closed.h_cl(v) + float(v[:m] @ d_bar_u)

    _, _, w_c = closed.split(w)
    w_bar_c = w_bar[m + closed.s:]
    total = d_bar_a + d_bar_u
    return h_cl_tilted(w) - float(total @ (w_c - w_bar_c)) - h_cl_tilted(w_bar)


def damping_free_iac(
    plant: PhSystem, kappa: float, r_c2, x: np.ndarray, x_c: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Controller variant that never reads the open-loop dissipation.

    Valid when R_aa is constant positive definite and R_au = 0; it equals
    the full controller under J_c1 = 0, R_c1 = R_aa, K_i = kappa R_aa^{-1}:

        u     = [-J_aa - R_c2] grad_a H - kappa (x_a - x_c)
        xcdot = -R_c2 grad_a H + J_au grad_u H
    """
    if kappa <= 0:
        raise ConfigurationError("kappa must be positive")
    m = plant.partition.m
    r_c2 = np.atleast_2d(np.asarray(r_c2(x) if callable(r_c2) else r_c2, dtype=float))
    ga, gu = plant.grad_split(x)
    u = -(plant.J.aa(x) @ ga) - r_c2 @ ga - kappa * (x[:m] - np.asarray(x_c, dtype=float))
    xc_dot = -(r_c2 @ ga) + plant.J.au(x) @ gu
    return u, xc_dot


def detect_outputs(
    closed: ClosedLoop, d_bar_a, d_bar_u, w, w_bar_c: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Outputs whose detectability upgrades stability to convergence:
    Y_a = (grad_a H_cl, w_c - w_bar_c) and Y_u = grad_a H + d_bar_u + K_i (w_c - w_bar_c)."""
    m = closed.m
    d_bar_a = np.zeros(m) if d_bar_a is None else np.asarray(d_bar_a, dtype=float).reshape(m)
    d_bar_u = np.zeros(m) if d_bar_u is None else np.asarray(d_bar_u, dtype=float).reshape(m)
    if w_bar_c is None:
        w_bar_c = np.linalg.solve(closed.gains.k_i, d_bar_a + d_bar_u)
    ga, _ = closed.plant.grad_split(closed.x_of(w))
    _, _, w_c = closed.split(w)
    w_t = w_c - w_bar_c
    y_a = np.concatenate([ga, w_t])
    y_u = ga + d_bar_u + closed.gains.k_i @ w_t
    return y_a, y_u
