import numpy as np
import numpy.testing as npt
import pytest

from phiac import core, iac, mech, systems
from phiac.errors import ConfigurationError, NumericsError, SingularityError


@pytest.fixture(scope="module")
def vtol():
    return systems.build_vtol()


@pytest.fixture(scope="module")
def vtol_tm(vtol):
    return mech.TransformedMech(vtol)


@pytest.fixture(scope="module")
def manipulator():
    return systems.build_manipulator()


def test_build_T_identity_for_full_actuation(manipulator):
    q = np.array([0.4, -1.2])
    npt.assert_allclose(mech.build_T(manipulator, q), np.eye(2))


def test_build_T_vtol_matches_pinned_closed_form(vtol):
    # the explicit T must coincide with the stacked pseudo-inverse +
    # annihilator construction it abbreviates
    rng = np.random.default_rng(0)
    for _ in range(25):
        q = rng.uniform(-np.pi, np.pi, 3)
        npt.assert_allclose(mech.build_T(vtol, q), mech.stacked_T(vtol, q), atol=1e-13)


def test_build_T_annihilation_identity(vtol):
    rng = np.random.default_rng(1)
    target = np.vstack([np.eye(2), np.zeros((1, 2))])
    for _ in range(100):
        q = rng.uniform(-4, 4, 3)
        T = mech.build_T(vtol, q)
        G = vtol.input_matrix(q)
        npt.assert_allclose(T @ G, target, atol=1e-12)
        assert np.linalg.norm(vtol.annihilator(q) @ G) < 1e-12


def test_build_T_rank_deficiency_raises(manipulator):
    from dataclasses import replace

    bad = replace(manipulator, input_matrix=lambda q: np.array([[1.0, 1.0], [1.0, 1.0]]),
                  t_fn=None)
    with pytest.raises(SingularityError):
        mech.stacked_T(bad, np.zeros(2))


def test_default_annihilator():
    rng = np.random.default_rng(2)
    for _ in range(20):
        G = rng.normal(size=(4, 2))
        perp = mech.default_annihilator(G)
        assert perp.shape == (2, 4)
        npt.assert_allclose(perp @ G, 0.0, atol=1e-12)
        npt.assert_allclose(perp @ perp.T, np.eye(2), atol=1e-12)
        for row in perp:
            nz = np.flatnonzero(np.abs(row) > 1e-12)
            assert row[nz[0]] > 0


def test_momentum_transform_point_and_energy(vtol):
    rng = np.random.default_rng(3)
    for _ in range(100):
        q = rng.uniform(-3, 3, 3)
        pb = rng.uniform(-3, 3, 3)
        p, tm = mech.momentum_transform(vtol, q, pb)
        npt.assert_allclose(p, mech.build_T(vtol, q) @ pb)
        h_t = tm.hamiltonian().value(np.concatenate([p, q]))
        h_b = mech.body_energy(vtol, q, pb)
        assert abs(h_t - h_b) < 1e-10 * (1 + abs(h_b))


def test_momentum_transform_rejects_bad_jacobian(vtol):
    from dataclasses import replace

    bad = replace(vtol, jac_tp=lambda q, pb: np.ones((3, 3)))
    with pytest.raises(NumericsError):
        mech.momentum_transform(bad, np.array([0.0, 0.0, 0.3]), np.ones(3))


def test_constant_inertia_identity_reduction():
    # T = I and constant masses leave only the gyroscopic term in C
    def j2(q, pb):
        return np.array([[0.0, pb[0]], [-pb[0], 0.0]])

    sys = mech.MechanicalSystem(
        l=2, m=2,
        mass=lambda q: np.diag([2.0, 3.0]),
        mass_d=lambda q: np.diag([1.5, 2.5]),
        grad_mass_d=lambda q: np.zeros((2, 2, 2)),
        v_d=lambda q: 0.5 * float(q @ q),
        grad_v_d=lambda q: q.copy(),
        j2=j2,
        r_d=lambda q: 0.1 * np.eye(2),
        input_matrix=lambda q: np.eye(2),
        annihilator=lambda q: np.zeros((0, 2)),
        t_fn=lambda q: np.eye(2),
        jac_tp=lambda q, pb: np.zeros((2, 2)),
        q_star=np.zeros(2),
        d_bar_m=np.zeros(2),
    )
    tm = mech.TransformedMech(sys)
    q = np.array([0.3, -0.8])
    p = np.array([1.0, 2.0])
    npt.assert_allclose(tm.C(q, p), j2(q, p), atol=1e-14)
    npt.assert_allclose(tm.D(q, p), 0.1 * np.eye(2), atol=1e-14)


def test_drift_pushforward_equivalence(vtol, vtol_tm):
    plant = mech.partition_mech(vtol_tm)
    rng = np.random.default_rng(4)
    for _ in range(100):
        q = rng.uniform(-5, 5, 3)
        pb = rng.uniform(-5, 5, 3)
        u = rng.uniform(-2, 2, 2)
        T = mech.build_T(vtol, q)
        p = T @ pb
        xdot = core.eval_drift(plant, np.concatenate([p, q]), u, t=vtol.dist_t_on)
        pdot, qdot = xdot[:3], xdot[3:]
        pbdot = np.linalg.solve(T, pdot - vtol.jac_tp(q, pb) @ qdot)
        ref = mech.body_drift(vtol, q, pb, u, t=vtol.dist_t_on)
        assert np.linalg.norm(np.concatenate([qdot, pbdot]) - ref) < 1e-8 * (
            1 + np.linalg.norm(ref)
        )


def test_transform_structure_report(vtol_tm):
    rng = np.random.default_rng(5)
    pairs = [(rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3)) for _ in range(100)]
    report = mech.check_transform_structure(vtol_tm, pairs)
    assert report.passed


def test_partition_blocks_vtol(vtol_tm):
    # the dissipation coupling block is [D_au 0] and is nonzero for this
    # plant because the damping couples actuated and unactuated momenta
    rng = np.random.default_rng(6)
    x = np.concatenate([rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)])
    plant = mech.partition_mech(vtol_tm)
    q, p = x[3:], x[:3]
    _, _, _, _, d_au, _, q_a, q_u = vtol_tm.blocks(q, p)
    r_au = plant.R.au(x)
    npt.assert_allclose(r_au[:, :1], d_au)
    npt.assert_allclose(r_au[:, 1:], 0.0)
    assert np.linalg.norm(d_au) > 1e-6
    j_au = plant.J.au(x)
    npt.assert_allclose(j_au[:, 1:], -q_a.T)


def test_partition_blocks_manipulator(manipulator):
    tm = mech.TransformedMech(manipulator)
    plant = mech.partition_mech(tm)
    x = np.array([0.5, -0.3, 0.2, 0.9])
    npt.assert_allclose(plant.J.aa(x), 0.0, atol=1e-12)
    npt.assert_allclose(plant.J.au(x), -np.eye(2), atol=1e-12)
    npt.assert_allclose(plant.J.uu(x), 0.0, atol=1e-12)
    npt.assert_allclose(plant.R.aa(x), np.asarray(systems.ManipulatorParams().r_d), atol=1e-12)
    npt.assert_allclose(plant.R.au(x), 0.0, atol=1e-12)
    npt.assert_allclose(plant.R.uu(x), 0.0, atol=1e-12)
    assert core.check_structure(plant, [x]).passed


def test_mech_iac_zero_at_rest(vtol, vtol_tm):
    gains = systems.vtol_gains()
    u, xc_dot = mech.mech_iac(vtol_tm, gains, vtol.q_star, np.zeros(3), np.zeros(2))
    npt.assert_allclose(u, 0.0, atol=1e-12)
    npt.assert_allclose(xc_dot, 0.0, atol=1e-12)


def test_mech_iac_specializes_general_law(vtol, vtol_tm):
    gains = systems.vtol_gains()
    plant = mech.partition_mech(vtol_tm, gains)
    rng = np.random.default_rng(7)
    for _ in range(100):
        q = rng.uniform(-3, 3, 3)
        pb = rng.uniform(-3, 3, 3)
        p = mech.build_T(vtol, q) @ pb
        x_c = rng.uniform(-2, 2, 2)
        x = np.concatenate([p, q])
        u_m, xc_dot_m = mech.mech_iac(vtol_tm, gains, q, p, x_c)
        u_g = iac.control_law(plant, gains, x, x_c)
        xc_dot_g = iac.integrator_dynamics(plant, gains, x, x_c)
        assert np.linalg.norm(u_m - u_g) <= 1e-12 * (1 + np.linalg.norm(u_g))
        assert np.linalg.norm(xc_dot_m - xc_dot_g) <= 1e-12 * (1 + np.linalg.norm(xc_dot_g))


def test_mech_iac_requires_strict_r_c2(vtol_tm):
    gains = iac.IacGains(j_c1=np.zeros((2, 2)), r_c1=np.eye(2),
                         r_c2=np.zeros((2, 2)), k_i=np.eye(2), m=2)
    with pytest.raises(ConfigurationError, match="R_c2"):
        mech.mech_iac(vtol_tm, gains, np.zeros(3), np.zeros(3), np.zeros(2))


def test_mech_equilibrium_cases(manipulator, vtol, vtol_tm):
    tm = mech.TransformedMech(manipulator)
    gains = iac.IacGains(j_c1=np.zeros((2, 2)), r_c1=np.eye(2), r_c2=np.eye(2),
                         k_i=np.eye(2), m=2)
    pred = mech.mech_equilibrium(tm, gains, np.zeros(2))
    npt.assert_allclose(pred.w_bar, np.concatenate([np.zeros(2), manipulator.q_star, np.zeros(2)]))
    assert pred.residual < 1e-9

    d_m = np.array([0.7, -0.2])
    pred = mech.mech_equilibrium(tm, gains, d_m)
    npt.assert_allclose(pred.w_bar[-2:], -d_m, atol=1e-12)  # K_i = I, G_d = -I
    assert pred.residual < 1e-9

    gains_v = systems.vtol_gains()
    pred_v = mech.mech_equilibrium(vtol_tm, gains_v, vtol.d_bar_m)
    expected = np.linalg.solve(
        np.asarray(systems.VtolParams().k_i),
        np.linalg.solve(-np.asarray(systems.VtolParams().r_c1), vtol.d_bar_m),
    )
    npt.assert_allclose(pred_v.w_bar[-2:], expected, atol=1e-12)
    npt.assert_allclose(pred_v.w_bar[-2:], [-1.0, 1.0], atol=1e-12)
    assert pred_v.residual < 1e-9


def test_jac_tp_matches_finite_differences(vtol):
    rng = np.random.default_rng(8)
    for _ in range(100):
        q = rng.uniform(-4, 4, 3)
        pb = rng.uniform(-4, 4, 3)
        jac = vtol.jac_tp(q, pb)
        jac_fd = core.finite_diff_jacobian(lambda qq: mech.build_T(vtol, qq) @ pb, q)
        assert np.linalg.norm(jac - jac_fd) <= 1e-5 * (1 + np.linalg.norm(jac_fd))


def test_fast_rhs_matches_generic_composition(vtol, vtol_tm):
    from dataclasses import replace
    import phiac.sim as sim

    scenario, ctx = systems.make_scenario(systems.load_preset("vtol.paper"))
    generic = replace(scenario, rhs_factory=None)
    rhs_fast, _, _ = scenario.rhs_factory(scenario.plant)
    rhs_gen, _, _ = sim.compose_rhs(generic)
    rng = np.random.default_rng(9)
    for _ in range(50):
        z = np.concatenate([rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3), rng.uniform(-2, 2, 2)])
        for t in (0.0, 45.0):
            npt.assert_allclose(rhs_fast(t, z), rhs_gen(t, z), atol=1e-12)
