"""Builders for the three worked examples, with named parameter presets.

* ``build_pmsm``        — an energy-shaped permanent-magnet synchronous
  motor in (i_q, i_d, omega) coordinates; the load torque and friction
  enter as an unmatched disturbance whose constant factor has the closed
  form (tau_L + R_m omega_star) / (J C23).
* ``build_manipulator`` — a fully actuated 2-DOF planar arm with unknown
  viscous damping, shaped by a quadratic potential around q_star.
* ``build_vtol``        — the planar vertical take-off and landing
  aircraft after energy shaping: underactuated (l=3, m=2), non-constant
  shaped inertia, with the closed-form momentum transform pinned
  analytically.

Electrical and inertia constants for the motor and the arm are plausible
defaults, not reference values; presets carry a provenance tag so the
distinction is machine-readable.  The VTOL preset reproduces a published
simulation scenario exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from .core import (
    DisturbanceModel,
    HamiltonianModel,
    Partition,
    PartitionedMatrix,
    PhSystem,
    UnmatchedDisturbance,
)
from .errors import ConfigurationError
from .iac import IacGains
from .mech import MechanicalSystem


# -- PMSM ---------------------------------------------------------------------


@dataclass(frozen=True)
class PmsmParams:
    """Motor constants plus the energy-shaping tuning gains.

    The cross-coupling free function C12 is fixed to zero: the unmatched
    disturbance can only be factored through the coupling row when the
    (i_q, i_d) interconnection vanishes.
    """

    l_d: float = 0.007      # d-axis inductance [H]
    l_q: float = 0.005      # q-axis inductance [H]
    r_s: float = 0.35       # stator resistance [ohm] (shaped loop does not use it)
    phi: float = 0.2        # back-emf constant [V s]
    inertia: float = 0.01   # rotor inertia [kg m^2]
    n_p: int = 3            # pole pairs
    r_m: float = 0.01       # mechanical friction
    tau_l: float = 0.2      # constant load torque
    r1: float = 5.0
    r2: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    c23: float = -50.0
    omega_star: float = 50.0
    k_i: float = 1.0

    def __post_init__(self):
        for name in ("l_d", "l_q", "phi", "inertia", "r1", "r2", "gamma1", "gamma2"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.c23 >= 0:
            raise ConfigurationError("c23 must be negative")
        if self.n_p < 1:
            raise ConfigurationError("n_p must be a positive integer")
        if self.r_m < 0:
            raise ConfigurationError("r_m must be nonnegative")

    @property
    def d_bar_u(self) -> float:
        """Constant unmatched factor (tau_L + R_m omega_star) / (J C23)."""
        return (self.tau_l + self.r_m * self.omega_star) / (self.inertia * self.c23)

    @property
    def i_q_bar(self) -> float:
        """Disturbed current equilibrium (tau_L + R_m omega_star) / (n_p phi)."""
        return (self.tau_l + self.r_m * self.omega_star) / (self.n_p * self.phi)


def build_pmsm(params: PmsmParams = PmsmParams()) -> PhSystem:
    """Shaped PMSM as a disturbed pH plant, state x = (i_q, i_d, omega)."""
    p = params
    part = Partition(m=1, s=2)
    a_q = -p.n_p * p.phi / (p.c23 * p.inertia)  # curvature of H in i_q (positive)
    c13_coef = -p.n_p * (p.l_d - p.l_q) / (p.inertia * p.gamma1)
    w_star = p.omega_star

    def h_value(x):
        return 0.5 * (a_q * x[0] ** 2 + p.gamma1 * x[1] ** 2 + p.gamma2 * (x[2] - w_star) ** 2)

    def h_grad(x):
        return np.array([a_q * x[0], p.gamma1 * x[1], p.gamma2 * (x[2] - w_star)])

    hess = np.diag([a_q, p.gamma1, p.gamma2])

    def j_au(x):
        return np.array([[0.0, p.c23]])

    def j_uu(x):
        c13 = c13_coef * x[0]
        return np.array([[0.0, c13], [-c13, 0.0]])

    J = PartitionedMatrix.interconnection(part, aa=np.zeros((1, 1)), au=j_au, uu=j_uu)
    R = PartitionedMatrix.dissipation(
        part,
        aa=np.array([[p.r2]]),
        au=np.zeros((1, 2)),
        uu=np.diag([p.r1, p.r_m / (p.inertia * p.gamma2)]),
    )
    dist = DisturbanceModel(unmatched=UnmatchedDisturbance(amount=np.array([p.d_bar_u])))
    return PhSystem(
        partition=part,
        J=J,
        R=R,
        H=HamiltonianModel(value=h_value, grad=h_grad, hess=lambda x: hess),
        dist=dist,
        x_star=np.array([0.0, 0.0, w_star]),
    )


def pmsm_gains(params: PmsmParams = PmsmParams()) -> IacGains:
    """The simplifying gain choice R_c1 = R_aa = r2, J_c1 = 0, R_c2 = 0, under
    which the control law collapses to u = -r2 K_i (i_q - x_c)."""
    return IacGains(
        j_c1=np.zeros((1, 1)),
        r_c1=np.array([[params.r2]]),
        r_c2=np.zeros((1, 1)),
        k_i=np.array([[params.k_i]]),
        m=1,
    )


# -- 2-DOF manipulator --------------------------------------------------------


@dataclass(frozen=True)
class ManipulatorParams:
    """Planar-arm inertia constants, shaping stiffness, and the hidden damping.

    r_d is the physical damping the controller must not rely on; kappa and
    r_c2 parameterize the damping-independent controller variant.
    """

    a_a: float = 2.0
    a_u: float = 1.0
    b: float = 0.5
    k_p: tuple = ((10.0, 0.0), (0.0, 10.0))
    r_d: tuple = ((1.0, 0.0), (0.0, 1.0))
    q_star: tuple = (0.5, -0.4)
    d_bar_a: tuple = (1.0, -1.0)
    kappa: float = 8.0
    r_c2: tuple = ((8.0, 0.0), (0.0, 8.0))

    def __post_init__(self):
        if self.a_a * self.a_u <= self.b ** 2:
            raise ConfigurationError("need a_a * a_u > b^2 for a positive definite inertia")
        for name in ("k_p", "r_d", "r_c2"):
            mat = np.asarray(getattr(self, name), dtype=float)
            if np.linalg.eigvalsh(0.5 * (mat + mat.T)).min() <= 0:
                raise ConfigurationError(f"{name} must be symmetric positive definite")
        if self.kappa <= 0:
            raise ConfigurationError("kappa must be positive")


def build_manipulator(params: ManipulatorParams = ManipulatorParams()) -> MechanicalSystem:
    """Fully actuated arm: G = I, shaped inertia equals the physical one."""
    p = params
    k_p = np.asarray(p.k_p, dtype=float)
    r_d = np.asarray(p.r_d, dtype=float)
    q_star = np.asarray(p.q_star, dtype=float)

    def mass(q):
        c = math.cos(q[1])
        return np.array(
            [[p.a_a + p.a_u + 2 * p.b * c, p.a_u + p.b * c], [p.a_u + p.b * c, p.a_u]]
        )

    def grad_mass(q):
        s = math.sin(q[1])
        d_theta = np.array([[-2 * p.b * s, -p.b * s], [-p.b * s, 0.0]])
        return np.stack([np.zeros((2, 2)), d_theta])

    eye2 = np.eye(2)
    return MechanicalSystem(
        l=2,
        m=2,
        mass=mass,
        mass_d=mass,
        grad_mass_d=grad_mass,
        v_d=lambda q: 0.5 * float((q - q_star) @ (k_p @ (q - q_star))),
        grad_v_d=lambda q: k_p @ (q - q_star),
        j2=lambda q, pb: np.zeros((2, 2)),
        r_d=lambda q: r_d,
        input_matrix=lambda q: eye2,
        annihilator=lambda q: np.zeros((0, 2)),
        t_fn=lambda q: eye2,  # G = I makes the stacked transform the identity
        jac_tp=lambda q, pb: np.zeros((2, 2)),
        q_star=q_star,
        d_bar_m=np.asarray(p.d_bar_a, dtype=float),
    )


def manipulator_gains(params: ManipulatorParams = ManipulatorParams()) -> IacGains:
    """Analysis-side gains equivalent to the damping-independent controller:
    J_c1 = 0, R_c1 = R_d, K_i = kappa R_d^{-1}.  Only audits use these; the
    simulated controller never reads R_d."""
    r_d = np.asarray(params.r_d, dtype=float)
    return IacGains(
        j_c1=np.zeros((2, 2)),
        r_c1=r_d,
        r_c2=np.asarray(params.r_c2, dtype=float),
        k_i=params.kappa * np.linalg.inv(r_d),
        m=2,
    )


# -- VTOL aircraft ------------------------------------------------------------


@dataclass(frozen=True)
class VtolParams:
    """Shaped VTOL constants; defaults reproduce the reference scenario
    (r0 = 1, eps = 1, k1 = 2, k2 = 1.1, k3 = 30, K_v = [[10,5],[5,10]],
    P = diag(0.03, 0.02)).  Gravity is not part of that parameter list and
    defaults to 9.81."""

    eps: float = 1.0
    g: float = 9.81
    k1: float = 2.0
    k2: float = 1.1
    k3: float = 30.0
    k_v: tuple = ((10.0, 5.0), (5.0, 10.0))
    p_gain: tuple = ((0.03, 0.0), (0.0, 0.02))
    r0: float = 1.0
    q_star: tuple = (5.0, 0.0, 0.0)
    d_bar_m: tuple = (5.0, -5.0)
    d_time: float = 30.0
    j_c1: tuple = ((0.0, 0.0), (0.0, 0.0))
    r_c1: tuple = ((10.0, 5.0), (5.0, 10.0))
    r_c2: tuple = ((10.0, 0.0), (0.0, 10.0))
    k_i: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        if abs(self.k1 - self.eps * self.k2) < 1e-12:
            raise ConfigurationError(
                "k1 - eps*k2 appears in denominators and must be nonzero"
            )
        if self.r0 <= 0 or self.eps == 0:
            raise ConfigurationError("r0 must be positive and eps nonzero")
        if self.q_star[2] != 0.0:
            raise ConfigurationError("the shaped potential assumes theta_star = 0")

    @property
    def gamma30(self) -> float:
        return self.k1 - self.eps * self.k2


def build_vtol(params: VtolParams = VtolParams()) -> MechanicalSystem:
    """Underactuated VTOL with every closed form hand-coded: shaped inertia,
    potential, gyroscopic matrix, input matrix, the explicit momentum
    transform T(q) and the analytic Jacobian of T(q) pb."""
    p = params
    eps, k1, k2, k3, g30 = p.eps, p.k1, p.k2, p.k3, p.gamma30
    k_v = np.asarray(p.k_v, dtype=float)
    p_gain = np.asarray(p.p_gain, dtype=float)
    q_star = np.asarray(p.q_star, dtype=float)
    eye3 = np.eye(3)

    def mass_d(q):
        c, s = math.cos(q[2]), math.sin(q[2])
        return np.array(
            [
                [k1 * eps * c * c + k3, k1 * eps * c * s, k1 * c],
                [k1 * eps * c * s, -k1 * eps * c * c + k3, k1 * s],
                [k1 * c, k1 * s, k2],
            ]
        )

    def grad_mass_d(q):
        th = q[2]
        c, s = math.cos(th), math.sin(th)
        c2, s2 = math.cos(2 * th), math.sin(2 * th)
        d_th = np.array(
            [
                [-k1 * eps * s2, k1 * eps * c2, -k1 * s],
                [k1 * eps * c2, k1 * eps * s2, k1 * c],
                [-k1 * s, k1 * c, 0.0],
            ]
        )
        out = np.zeros((3, 3, 3))
        out[2] = d_th
        return out

    def z_fn(q):
        th = q[2]
        return np.array(
            [
                q[0] - q_star[0] - (k3 / g30) * math.sin(th),
                q[1] - q_star[1] - ((k3 - k1 * eps) / g30) * (math.cos(th) - 1.0),
            ]
        )

    def v_d(q):
        z = z_fn(q)
        return p.g * (1.0 - math.cos(q[2])) / g30 + 0.5 * float(z @ (p_gain @ z))

    def grad_v_d(q):
        th = q[2]
        z = z_fn(q)
        pz = p_gain @ z
        jz_th = np.array([-(k3 / g30) * math.cos(th), ((k3 - k1 * eps) / g30) * math.sin(th)])
        return np.array(
            [pz[0], pz[1], float(jz_th @ pz) + p.g * math.sin(th) / g30]
        )

    half_kg = -0.5 * k1 * g30

    def j2_tilde(q, ptilde):
        c, s = math.cos(q[2]), math.sin(q[2])
        pa1 = half_kg * (2 * eps * (c * ptilde[0] + s * ptilde[1]) + ptilde[2])
        pa2 = half_kg * ptilde[1]   # alpha2 = half_kg * e2
        pa3 = -half_kg * ptilde[0]  # alpha3 = -half_kg * e1
        return np.array([[0.0, pa1, pa2], [-pa1, 0.0, pa3], [-pa2, -pa3, 0.0]])

    def j2(q, pb):
        return j2_tilde(q, np.linalg.solve(mass_d(q), pb))

    def input_matrix(q):
        c, s = math.cos(q[2]), math.sin(q[2])
        return np.array([[1.0, 0.0], [0.0, 1.0], [c / eps, s / eps]])

    def r_d(q):
        G = input_matrix(q)
        return G @ k_v @ G.T + p.r0 * mass_d(q)

    def annihilator(q):
        return np.array([[math.cos(q[2]), math.sin(q[2]), -eps]])

    den = eps * eps + 1.0

    def t_fn(q):
        th = q[2]
        c, s = math.cos(th), math.sin(th)
        s2 = math.sin(2 * th)
        return np.array(
            [
                [(eps * eps + s * s) / den, -s2 / (2 * den), eps * c / den],
                [-s2 / (2 * den), (eps * eps - s * s + 1.0) / den, eps * s / den],
                [c, s, -eps],
            ]
        )

    def dt_dth(th):
        c, s = math.cos(th), math.sin(th)
        c2, s2 = math.cos(2 * th), math.sin(2 * th)
        return np.array(
            [
                [s2 / den, -c2 / den, -eps * s / den],
                [-c2 / den, -s2 / den, eps * c / den],
                [-s, c, 0.0],
            ]
        )

    def jac_tp(q, pb):
        out = np.zeros((3, 3))
        out[:, 2] = dt_dth(q[2]) @ pb
        return out

    return MechanicalSystem(
        l=3,
        m=2,
        mass=lambda q: eye3,
        mass_d=mass_d,
        grad_mass_d=grad_mass_d,
        v_d=v_d,
        grad_v_d=grad_v_d,
        j2=j2,
        j2_tilde=j2_tilde,
        r_d=r_d,
        input_matrix=input_matrix,
        annihilator=annihilator,
        t_fn=t_fn,
        jac_tp=jac_tp,
        q_star=q_star,
        d_bar_m=np.asarray(p.d_bar_m, dtype=float),
        dist_t_on=p.d_time,
    )


def vtol_gains(params: VtolParams = VtolParams()) -> IacGains:
    return IacGains(
        j_c1=np.asarray(params.j_c1, dtype=float),
        r_c1=np.asarray(params.r_c1, dtype=float),
        r_c2=np.asarray(params.r_c2, dtype=float),
        k_i=np.asarray(params.k_i, dtype=float),
        m=2,
    )


# -- presets ------------------------------------------------------------------

PARAM_CLASSES = {
    "pmsm": PmsmParams,
    "manipulator": ManipulatorParams,
    "vtol": VtolParams,
}

BUILDERS = {
    "pmsm": build_pmsm,
    "manipulator": build_manipulator,
    "vtol": build_vtol,
}


@dataclass(frozen=True)
class Preset:
    """A named, provenance-tagged parameter file plus its scenario block."""

    name: str
    system: str
    provenance: str
    params: dict[str, Any]
    scenario: dict[str, Any]
    raw: dict[str, Any] = field(default_factory=dict)

    def make_params(self):
        cls = PARAM_CLASSES[self.system]
        kwargs = {
            k: tuple(map(tuple, v)) if isinstance(v, list) and v and isinstance(v[0], list)
            else tuple(v) if isinstance(v, list) else v
            for k, v in self.params.items()
        }
        return cls(**kwargs)

    def build(self):
        return BUILDERS[self.system](self.make_params())


def available_presets() -> list[str]:
    files = resources.files("phiac.presets")
    return sorted(
        f.name[: -len(".json")] for f in files.iterdir() if f.name.endswith(".json")
    )


def load_preset(name: str) -> Preset:
    path = resources.files("phiac.presets") / f"{name}.json"
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(available_presets())}"
        ) from None
    return preset_from_dict(data)


def preset_from_dict(data: dict[str, Any]) -> Preset:
    for key in ("name", "system", "provenance", "params", "scenario"):
        if key not in data:
            raise ConfigurationError(f"preset file is missing the {key!r} field")
    if data["system"] not in BUILDERS:
        raise ConfigurationError(f"unknown system kind {data['system']!r}")
    return Preset(
        name=data["name"],
        system=data["system"],
        provenance=data["provenance"],
        params=data["params"],
        scenario=data["scenario"],
        raw=data,
    )


def make_scenario(preset: Preset):
    """Materialize a preset into a runnable Scenario plus its certified
    equilibrium prediction and supporting objects.

    Returns (scenario, context) where context holds the built plant,
    analysis gains and, for mechanical systems, the body-coordinate system
    and its transform.  Body-frame initial momenta are mapped through
    p = T(q0) pb0.
    """
    from . import sim
    from .iac import equilibrium_unmatched
    from .mech import (
        TransformedMech,
        build_T,
        fast_rhs_factory,
        mech_equilibrium,
        partition_mech,
    )

    params = preset.make_params()
    sc = preset.scenario
    common = dict(
        name=preset.name,
        t_end=float(sc["t_end"]),
        dt=float(sc.get("dt", 1e-3)),
        stride=int(sc.get("stride", 1)),
        tol=float(sc.get("tol", 1e-2)),
    )
    if preset.system == "pmsm":
        plant = build_pmsm(params)
        gains = pmsm_gains(params)
        prediction = equilibrium_unmatched(plant, gains, np.array([params.d_bar_u]))
        scenario = sim.Scenario(
            plant=plant,
            x0=np.asarray(sc["x0"], dtype=float),
            xc0=np.asarray(sc["xc0"], dtype=float),
            controller=sc.get("controller", "iac"),
            gains=gains,
            prediction=prediction,
            **common,
        )
        context = {"plant": plant, "gains": gains, "params": params,
                   "prediction": prediction}
        return scenario, context

    mech = BUILDERS[preset.system](params)
    tm = TransformedMech(mech)
    q0 = np.asarray(sc["q0"], dtype=float)
    pb0 = np.asarray(sc["p0"], dtype=float)
    x0 = np.concatenate([build_T(mech, q0) @ pb0, q0])
    if preset.system == "manipulator":
        gains = manipulator_gains(params)
        plant = partition_mech(tm, gains)
        prediction = mech_equilibrium(tm, gains, mech.d_bar_m)
        controller = sc.get("controller", "simplified")
        scenario = sim.Scenario(
            plant=plant,
            x0=x0,
            xc0=np.asarray(sc["xc0"], dtype=float),
            controller=controller,
            gains=gains,
            kappa=params.kappa,
            r_c2=np.asarray(params.r_c2, dtype=float),
            prediction=prediction,
            config_dim=mech.l,
            rhs_factory=fast_rhs_factory(
                tm, gains, controller, kappa=params.kappa, r_c2=params.r_c2
            ),
            **common,
        )
    else:
        gains = vtol_gains(params)
        plant = partition_mech(tm, gains)
        prediction = mech_equilibrium(tm, gains, mech.d_bar_m)
        controller = sc.get("controller", "iac")
        scenario = sim.Scenario(
            plant=plant,
            x0=x0,
            xc0=np.asarray(sc["xc0"], dtype=float),
            controller=controller,
            gains=gains,
            prediction=prediction,
            config_dim=mech.l,
            rhs_factory=fast_rhs_factory(tm, gains, controller),
            **common,
        )
    context = {"plant": plant, "gains": gains, "params": params,
               "mech": mech, "tm": tm, "prediction": prediction}
    return scenario, context
