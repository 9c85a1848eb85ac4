import numpy as np
import numpy.testing as npt
import pytest

from phiac import core, mech, systems
from phiac.errors import ConfigurationError, ContractError, NumericsError

from conftest import make_oscillator, make_quadratic_plant


def test_eval_drift_pure_rotation():
    plant = make_oscillator()
    xdot = core.eval_drift(plant, np.array([1.0, 0.0]), np.zeros(1), 0.0)
    npt.assert_allclose(xdot, [0.0, -1.0])


def test_eval_drift_zero_at_star():
    plant, _ = make_quadratic_plant()
    xdot = core.eval_drift(plant, plant.x_star, np.zeros(2), 0.0)
    npt.assert_allclose(xdot, 0.0)


def test_eval_drift_dimension_contract():
    plant = make_oscillator()
    with pytest.raises(ContractError):
        core.eval_drift(plant, np.zeros(3), np.zeros(1), 0.0)
    with pytest.raises(ContractError):
        core.eval_drift(plant, np.zeros(2), np.zeros(2), 0.0)
    with pytest.raises(ContractError):
        core.eval_drift(plant, np.zeros(2), np.zeros(1), -1.0)


def test_pmsm_drift_vanishes_at_disturbed_equilibrium():
    # closed-loop stationarity at the predicted operating point, using the
    # simplified feedback u = -r2 K_i (i_q - x_c)
    params = systems.PmsmParams()
    plant = systems.build_pmsm(params)
    x_bar = np.array([params.i_q_bar, 0.0, params.omega_star])
    xc_bar = np.array([params.i_q_bar - params.d_bar_u / params.k_i])
    u = -params.r2 * params.k_i * (x_bar[:1] - xc_bar)
    residual = core.eval_drift(plant, x_bar, u, t=0.0)
    assert np.linalg.norm(residual) < 1e-9


def test_eval_outputs_quadratic():
    plant = make_oscillator()
    y_a, y_u = core.eval_outputs(plant, np.array([2.0, 3.0]))
    npt.assert_allclose(y_a, [2.0])
    npt.assert_allclose(y_u, [3.0])


def test_eval_outputs_zero_at_star():
    plant, _ = make_quadratic_plant()
    y_a, y_u = core.eval_outputs(plant, plant.x_star)
    npt.assert_allclose(y_a, 0.0)
    npt.assert_allclose(y_u, 0.0)


def test_pmsm_output_is_scaled_current():
    params = systems.PmsmParams()
    plant = systems.build_pmsm(params)
    y_a, y_u = core.eval_outputs(plant, np.array([1.0, 0.0, params.omega_star]))
    expected = -params.n_p * params.phi / (params.inertia * params.c23)
    npt.assert_allclose(y_a, [expected])
    npt.assert_allclose(y_u, [0.0, 0.0])


def test_check_structure_pass_and_fail():
    plant = make_oscillator()
    report = core.check_structure(plant, [np.array([0.3, -0.7]), np.zeros(2)])
    assert report.passed

    part = core.Partition(m=1, s=1)
    bad = core.PhSystem(
        partition=part,
        J=plant.J,
        R=core.PartitionedMatrix.dissipation(
            part, np.array([[-1.0]]), np.zeros((1, 1)), np.array([[1.0]])
        ),
        H=plant.H,
        x_star=np.zeros(2),
    )
    report = core.check_structure(bad, [np.zeros(2)])
    assert not report.passed
    check = report.check("R positive semidefinite")
    assert not check.passed
    npt.assert_allclose(check.margin, -1.0 + 1e-10)


def test_check_structure_vtol_transformed():
    vtol = systems.build_vtol()
    plant = mech.partition_mech(mech.TransformedMech(vtol))
    rng = np.random.default_rng(11)
    samples = rng.uniform(-5, 5, size=(100, 6))
    assert core.check_structure(plant, samples).passed


def test_check_assumption_matched():
    g_d = -np.eye(2)
    plant, _ = make_quadratic_plant(g_d=g_d)
    report = core.check_assumption_matched(plant, [plant.x_star, plant.x_star + 1.0])
    assert report.passed
    npt.assert_allclose(report.check("gain symmetric part negative definite").margin, 1.0)

    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    plant_bad, _ = make_quadratic_plant(g_d=skew)
    report = core.check_assumption_matched(plant_bad, [plant_bad.x_star])
    assert not report.passed

    plant_none, _ = make_quadratic_plant()
    with pytest.raises(ConfigurationError):
        core.check_assumption_matched(plant_none, [plant_none.x_star])


def test_check_assumption_matched_gain_pairing():
    # the pairing used for mechanical plants: G_d = J_c1 - R_c1 with R_c1 > 0
    j_c1 = np.array([[0.0, 2.0], [-2.0, 0.0]])
    r_c1 = np.array([[3.0, 1.0], [1.0, 2.0]])
    plant, _ = make_quadratic_plant(g_d=j_c1 - r_c1)
    report = core.check_assumption_matched(plant, [plant.x_star])
    assert report.passed


def test_check_assumption_unmatched_zero_and_recovery():
    plant, _ = make_quadratic_plant(s=2)
    rng = np.random.default_rng(2)
    samples = rng.uniform(-3, 3, size=(10, 4))
    report = core.check_assumption_unmatched(plant, lambda x: np.zeros(2), samples)
    assert report.passed
    npt.assert_allclose(report.data["d_bar_u"], 0.0, atol=1e-12)

    # left inverse on constructed data
    for trial in range(5):
        d_bar = rng.normal(size=2)
        report = core.check_assumption_unmatched(
            plant, lambda x, d=d_bar: plant.jr_au(x).T @ d, samples
        )
        assert report.passed
        npt.assert_allclose(report.data["d_bar_u"], d_bar, atol=1e-10)


def test_check_assumption_unmatched_pmsm():
    params = systems.PmsmParams()
    plant = systems.build_pmsm(params)
    raw = np.array([0.0, (params.tau_l + params.r_m * params.omega_star) / params.inertia])
    rng = np.random.default_rng(3)
    samples = plant.x_star + rng.uniform(-5, 5, size=(20, 3))
    report = core.check_assumption_unmatched(plant, lambda x: raw, samples)
    assert report.passed
    npt.assert_allclose(report.data["d_bar_u"], [params.d_bar_u], rtol=1e-12)


def test_check_assumption_unmatched_fails_with_current_coupling():
    # a nonzero (i_q, i_d) coupling makes the injection direction state
    # dependent, so no constant factor can reproduce the constant raw field
    from dataclasses import replace

    params = systems.PmsmParams()
    plant = systems.build_pmsm(params)

    def j_au_coupled(x):
        return np.array([[-0.5 * x[1], params.c23]])

    J = core.PartitionedMatrix.interconnection(
        plant.partition, np.zeros((1, 1)), j_au_coupled, plant.J.uu
    )
    coupled = replace(plant, J=J)
    raw = np.array([0.0, (params.tau_l + params.r_m * params.omega_star) / params.inertia])
    rng = np.random.default_rng(4)
    samples = plant.x_star + rng.uniform(-5, 5, size=(20, 3))
    report = core.check_assumption_unmatched(coupled, lambda x: raw, samples)
    assert not report.passed


def test_check_assumption_min_trivial_and_pmsm():
    plant, _ = make_quadratic_plant()
    report = core.check_assumption_min(plant, np.zeros(2))
    assert report.passed
    npt.assert_allclose(report.data["x_bar"], plant.x_star, atol=1e-9)

    params = systems.PmsmParams()
    pmsm = systems.build_pmsm(params)
    report = core.check_assumption_min(pmsm, np.array([params.d_bar_u]))
    assert report.passed
    npt.assert_allclose(
        report.data["x_bar"],
        [params.i_q_bar, 0.0, params.omega_star],
        atol=1e-9,
    )


def test_check_assumption_min_quadratic_linear_solve():
    # oracle: stationarity of x^T P x / 2 + x_a^T d is the linear solve
    # x_bar = -P^{-1} col(d, 0)
    plant, P = make_quadratic_plant(m=2, s=1, seed=9)
    rng = np.random.default_rng(10)
    d = rng.normal(size=2)
    expected = -np.linalg.solve(P, np.concatenate([d, np.zeros(1)]))
    report = core.check_assumption_min(plant, d)
    assert report.passed
    npt.assert_allclose(report.data["x_bar"], expected, atol=1e-9)


def test_finite_diff_gradient_basics():
    H = core.HamiltonianModel(value=lambda x: 0.5 * float(x @ x), grad=lambda x: x)
    g = core.finite_diff_gradient(H, np.array([1.0, 2.0]))
    npt.assert_allclose(g, [1.0, 2.0], rtol=1e-8)

    flat = core.HamiltonianModel(value=lambda x: 3.0, grad=lambda x: np.zeros_like(x))
    npt.assert_allclose(core.finite_diff_gradient(flat, np.ones(3)), 0.0)

    with pytest.raises(ContractError):
        core.finite_diff_gradient(H, np.ones(2), h=0.0)

    bad = core.HamiltonianModel(value=lambda x: float("nan"), grad=lambda x: x)
    with pytest.raises(NumericsError):
        core.finite_diff_gradient(bad, np.ones(2))


def test_vtol_energy_gradient_matches_finite_differences():
    vtol = systems.build_vtol()
    q = np.array([0.0, 0.0, 0.1])
    pb = np.array([-0.1, -0.1, 0.1])

    def value(z):
        return mech.body_energy(vtol, z[:3], z[3:])

    def grad(z):
        qq, pp = z[:3], z[3:]
        ptilde = np.linalg.solve(vtol.mass_d(qq), pp)
        dmd = vtol.grad_mass_d(qq)
        gq = vtol.grad_v_d(qq) - 0.5 * ((dmd @ ptilde) @ ptilde)
        return np.concatenate([gq, ptilde])

    model = core.HamiltonianModel(value=value, grad=grad)
    z = np.concatenate([q, pb])
    g_fd = core.finite_diff_gradient(model, z)
    g = grad(z)
    assert np.linalg.norm(g - g_fd) / (1 + np.linalg.norm(g_fd)) < 1e-6


@pytest.mark.parametrize("builder_samples", [
    ("pmsm", 3),
    ("manipulator", 4),
    ("vtol", 6),
])
def test_gradient_audit_all_systems(builder_samples):
    name, n = builder_samples
    if name == "pmsm":
        plant = systems.build_pmsm()
        H = plant.H
        center = plant.x_star
    else:
        sysm = systems.build_manipulator() if name == "manipulator" else systems.build_vtol()
        tm = mech.TransformedMech(sysm)
        H = tm.hamiltonian()
        center = np.concatenate([np.zeros(sysm.l), sysm.q_star])
    rng = np.random.default_rng(12)
    samples = center + rng.uniform(-5, 5, size=(100, n))
    assert H.check_gradient(samples, rtol=1e-6).passed


def test_power_balance_decays_without_input(manipulator_setup):
    # with disturbances off and u = 0, the shaped energy never increases
    from dataclasses import replace
    import phiac.sim as sim

    scenario, ctx = manipulator_setup
    plant = ctx["plant"]
    quiet = replace(plant, dist=core.DisturbanceModel())
    scn = sim.Scenario(
        name="open-loop decay",
        plant=quiet,
        x0=np.array([0.4, -0.2, 0.1, 0.2]),
        xc0=np.zeros(0),
        t_end=5.0,
        dt=1e-3,
        stride=10,
        controller="none",
    )
    traj = sim.integrate(scn)
    dH = np.diff(traj.h_cl)
    assert dH.max() <= 1e-9


def test_hamiltonian_stationarity_enforced():
    part = core.Partition(m=1, s=0)
    with pytest.raises(ConfigurationError):
        core.PhSystem(
            partition=part,
            J=core.PartitionedMatrix.interconnection(
                part, np.zeros((1, 1)), np.zeros((1, 0)), np.zeros((0, 0))
            ),
            R=core.PartitionedMatrix.dissipation(
                part, np.eye(1), np.zeros((1, 0)), np.zeros((0, 0))
            ),
            H=core.HamiltonianModel(value=lambda x: 0.5 * float(x @ x), grad=lambda x: x),
            x_star=np.ones(1),
        )
