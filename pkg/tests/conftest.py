"""Shared builders and expensive session-scoped simulation runs."""

import numpy as np
import pytest

from phiac import core, sim, systems
from phiac.iac import IacGains


def make_decay_plant():
    """Scalar xdot = -x as a pH plant (J = 0, R = 1, H = x^2/2)."""
    part = core.Partition(m=1, s=0)
    return core.PhSystem(
        partition=part,
        J=core.PartitionedMatrix.interconnection(
            part, np.zeros((1, 1)), np.zeros((1, 0)), np.zeros((0, 0))
        ),
        R=core.PartitionedMatrix.dissipation(
            part, np.array([[1.0]]), np.zeros((1, 0)), np.zeros((0, 0))
        ),
        H=core.HamiltonianModel(value=lambda x: 0.5 * float(x @ x), grad=lambda x: x.copy()),
        x_star=np.zeros(1),
    )


def make_oscillator():
    """Undamped rotation: J = [[0,1],[-1,0]], R = 0, H = |x|^2/2."""
    part = core.Partition(m=1, s=1)
    return core.PhSystem(
        partition=part,
        J=core.PartitionedMatrix.interconnection(
            part, np.zeros((1, 1)), np.array([[1.0]]), np.zeros((1, 1))
        ),
        R=core.PartitionedMatrix.dissipation(
            part, np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1))
        ),
        H=core.HamiltonianModel(value=lambda x: 0.5 * float(x @ x), grad=lambda x: x.copy()),
        x_star=np.zeros(2),
    )


def make_quadratic_plant(m=2, s=1, seed=5, g_d=None, d_bar_a=None, d_bar_u=None):
    """Random stable quadratic-energy plant: H = x^T P x / 2 with P SPD."""
    rng = np.random.default_rng(seed)
    n = m + s
    part = core.Partition(m=m, s=s)
    A = rng.normal(size=(n, n))
    P = A @ A.T + n * np.eye(n)
    j_au = rng.normal(size=(m, s))
    sk = rng.normal(size=(m, m))
    j_aa = sk - sk.T
    r_aa = np.eye(m)
    r_uu = np.eye(s)
    matched = None
    if g_d is not None:
        matched = core.MatchedDisturbance(
            gain=core.as_matrix_fn(g_d, (m, m)),
            amount=np.zeros(m) if d_bar_a is None else np.asarray(d_bar_a, float),
        )
    unmatched = None
    if d_bar_u is not None:
        unmatched = core.UnmatchedDisturbance(amount=np.asarray(d_bar_u, float))
    plant = core.PhSystem(
        partition=part,
        J=core.PartitionedMatrix.interconnection(part, j_aa, j_au, np.zeros((s, s))),
        R=core.PartitionedMatrix.dissipation(part, r_aa, np.zeros((m, s)), r_uu),
        H=core.HamiltonianModel(
            value=lambda x: 0.5 * float(x @ (P @ x)),
            grad=lambda x: P @ x,
            hess=lambda x: P,
        ),
        dist=core.DisturbanceModel(matched=matched, unmatched=unmatched),
        x_star=np.zeros(n),
    )
    return plant, P


def default_gains(m, k_i=None):
    return IacGains(
        j_c1=np.zeros((m, m)),
        r_c1=np.eye(m),
        r_c2=np.zeros((m, m)),
        k_i=np.eye(m) if k_i is None else np.asarray(k_i, float),
        m=m,
    )


@pytest.fixture(scope="session")
def pmsm_setup():
    scenario, ctx = systems.make_scenario(systems.load_preset("pmsm.default"))
    return scenario, ctx


@pytest.fixture(scope="session")
def pmsm_run(pmsm_setup):
    scenario, ctx = pmsm_setup
    return sim.integrate(scenario), scenario, ctx


@pytest.fixture(scope="session")
def manipulator_setup():
    scenario, ctx = systems.make_scenario(systems.load_preset("manipulator.default"))
    return scenario, ctx


@pytest.fixture(scope="session")
def vtol_setup():
    scenario, ctx = systems.make_scenario(systems.load_preset("vtol.paper"))
    return scenario, ctx


@pytest.fixture(scope="session")
def vtol_run(vtol_setup):
    """The flagship 60 s benchmark run (the expensive fixture; ~25 s)."""
    import time

    scenario, ctx = vtol_setup
    t0 = time.perf_counter()
    traj = sim.integrate(scenario)
    wall = time.perf_counter() - t0
    return traj, wall, scenario, ctx
