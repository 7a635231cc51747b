import math

import numpy as np
import pytest

from oracles import enumerate_transport_value
from slok import config
from slok.body import TrigSupport, d2h, radial_from_support, support_gradient
from slok.errors import Infeasible
from slok.spheremeas import (
    make_circle_grid,
    make_sym_directions,
    make_symmetric_density,
    uniform_density,
)
from slok.transport import (
    cost,
    cost_matrix,
    duals_to_body,
    feasibility_check,
    ma_residual,
    make_variation,
    sinkhorn,
    solve_plan,
    transport_angles,
    transport_map,
    variation_source,
    variation_target,
)


def test_cost_values():
    assert cost([1.0, 0.0], [1.0, 0.0]) == 0.0
    assert cost([1.0, 0.0], [0.0, 1.0]) == math.inf
    assert cost([1.0, 0.0], [-1.0, 0.0]) == math.inf
    x = [1.0, 0.0]
    y = [math.cos(0.5), math.sin(0.5)]
    assert abs(cost(x, y) + math.log(math.cos(0.5))) < 1e-15


def test_cost_matrix_mask():
    g = make_circle_grid(8)
    cm = cost_matrix(g.nodes, g.nodes)
    assert np.all(np.diag(cm.values) == 0.0)
    # each node sees strictly less than half of the circle plus itself
    assert cm.allowed.sum(axis=1).max() == 3


def test_identity_instance_zero_cost():
    g = make_circle_grid(16)
    sig = uniform_density(g)
    plan, duals = solve_plan(sig, sig)
    assert abs(plan.value) < 1e-12
    assert np.max(np.abs(duals.phi)) < 1e-10
    assert np.max(np.abs(duals.psi)) < 1e-10
    assert np.allclose(plan.coupling, np.diag(sig.node_weights), atol=1e-12)


def test_orthogonal_targets_infeasible_with_witness():
    g = make_circle_grid(8)
    nu = make_sym_directions([[1.0, 0.0]], [1.0])
    with pytest.raises(Infeasible) as exc:
        solve_plan(uniform_density(g), nu)
    w = exc.value.witness
    assert w["stranded_mu_indices"] == [2, 6]
    assert abs(w["cut_capacity"] - 0.75) < 1e-12


def test_poles_equator_instance_infeasible():
    # the three-dimensional pole/equator configuration
    poles = make_sym_directions([[0.0, 0.0, 1.0]], [1.0])
    eq = make_sym_directions([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [0.5, 0.5])
    res = feasibility_check(poles, eq)
    assert not res.feasible
    assert res.flow_value < 1e-12


def test_rotated_two_atom_instance_matches_oracle():
    g = make_circle_grid(8)
    th = math.pi / 8
    nu = make_sym_directions([[math.cos(th), math.sin(th)]], [1.0])
    plan, duals = solve_plan(uniform_density(g), nu)
    cm = cost_matrix(plan.mu.points, plan.nu.points)
    oracle = enumerate_transport_value(cm.values, cm.allowed,
                                       plan.mu.weights, plan.nu.weights)
    assert abs(plan.value - oracle) < 1e-9


def test_marginals_and_duality_random():
    g = make_circle_grid(40)
    mu = make_symmetric_density(g, np.exp(0.3 * np.cos(2 * g.angles)))
    nu = make_symmetric_density(g, np.exp(-0.2 * np.cos(4 * g.angles + 0.3)))
    plan, duals = solve_plan(mu, nu)
    assert np.max(np.abs(plan.coupling.sum(1) - plan.mu.weights)) < config.MARGINAL_TOL
    assert np.max(np.abs(plan.coupling.sum(0) - plan.nu.weights)) < config.MARGINAL_TOL
    dual_val = -(duals.phi @ plan.mu.weights) + (duals.psi @ plan.nu.weights)
    assert abs(dual_val - plan.value) < 1e-8
    # dual feasibility: psi_j - phi_i <= c_ij on allowed arcs
    cm = cost_matrix(plan.mu.points, plan.nu.points)
    slack = cm.values - (duals.psi[None, :] - duals.phi[:, None])
    assert slack[cm.allowed].min() > -config.DUAL_FEAS_TOL
    assert duals.phi[0] == 0.0


def test_enumeration_oracle_sweep_up_to_6x6():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 10:
        mp = int(rng.integers(1, 4))
        np_ = int(rng.integers(1, 4))
        mu = make_sym_directions(rng.normal(size=(mp, 2)),
                                 rng.uniform(0.2, 1.0, mp))
        nu = make_sym_directions(rng.normal(size=(np_, 2)),
                                 rng.uniform(0.2, 1.0, np_))
        if not feasibility_check(mu, nu).feasible:
            continue
        cm = cost_matrix(mu.points, nu.points)
        oracle = enumerate_transport_value(cm.values, cm.allowed,
                                           mu.weights, nu.weights)
        plan, _ = solve_plan(mu, nu)
        assert abs(plan.value - oracle) < 1e-9
        checked += 1


def test_sinkhorn_close_to_lp():
    g = make_circle_grid(32)
    mu = make_symmetric_density(g, np.exp(0.3 * np.cos(2 * g.angles)))
    nu = make_symmetric_density(g, np.exp(-0.4 * np.cos(4 * g.angles + 0.3)))
    plan, _ = solve_plan(mu, nu)
    res = sinkhorn(mu, nu, eps=0.01)
    assert res.converged
    assert res.marginal_error <= 1e-8
    assert res.value >= plan.value - res.lp_gap_guardrail
    with pytest.raises(ValueError):
        sinkhorn(mu, nu, eps=5.0)


def test_transport_map_identity_for_ball():
    g = make_circle_grid(64)
    from slok.body import smooth_support

    ball = smooth_support(g, np.ones(64))
    assert np.max(np.abs(transport_angles(ball) - g.angles)) < 1e-14
    T = transport_map(ball)
    assert np.max(np.abs(T - g.nodes)) < 1e-12


def test_transport_map_radial_identity():
    g = make_circle_grid(180)
    ts = TrigSupport(1.0, ((1, 0.1, 0.2), (2, 0.02, 1.1)))
    sf = ts.on_grid(g)
    h = sf.values
    hp = support_gradient(sf)
    rf = radial_from_support(sf)
    th_T = transport_angles(sf)
    # r(T(x)) = sqrt(h^2 + h'^2)
    tn = np.concatenate([g.angles, [g.angles[0] + 2 * math.pi]])
    vn = np.concatenate([rf.values, [rf.values[0]]])
    r_at_T = np.interp(np.mod(th_T, 2 * math.pi), tn, vn)
    assert np.max(np.abs(r_at_T - np.sqrt(h**2 + hp**2))) < 5e-4


def test_ma_residual_forward_instance():
    g = make_circle_grid(180)
    ts = TrigSupport(1.0, ((1, 0.1, 0.2), (2, 0.02, 1.1)))
    sf = ts.on_grid(g)
    rho_nu = make_symmetric_density(g, np.exp(0.2 * np.cos(2 * g.angles)))
    h, dd, hp = sf.values, d2h(sf), support_gradient(sf)
    th_T = transport_angles(sf)
    tn = np.concatenate([g.angles, [g.angles[0] + 2 * math.pi]])
    vn = np.concatenate([rho_nu.rho, [rho_nu.rho[0]]])
    rho_at_T = np.interp(np.mod(th_T, 2 * math.pi), tn, vn)
    rho_mu = make_symmetric_density(g, rho_at_T * h * dd / (h**2 + hp**2))
    assert ma_residual(sf, rho_mu, rho_nu) < 1e-4


def test_variation_formulas_match_lp_differences():
    g = make_circle_grid(40)
    mu = make_symmetric_density(g, np.exp(0.25 * np.cos(2 * g.angles)))
    nu = make_symmetric_density(g, np.exp(-0.2 * np.cos(4 * g.angles + 0.7)))
    _, duals = solve_plan(mu, nu)
    v = make_variation(g, np.cos(2 * g.angles + 0.4), mu)
    w = make_variation(g, np.sin(2 * g.angles) ** 2, nu)
    analytic_v = float(-(duals.phi @ (v.values * mu.node_weights)))
    analytic_w = float(duals.psi @ (w.values * nu.node_weights))
    eps = 1e-5

    def K_of(mu_d, nu_d):
        p, _ = solve_plan(mu_d, nu_d)
        return p.value

    fd_v = (K_of(make_symmetric_density(g, mu.rho * (1 + eps * v.values)), nu)
            - K_of(make_symmetric_density(g, mu.rho * (1 - eps * v.values)), nu)
            ) / (2 * eps)
    fd_w = (K_of(mu, make_symmetric_density(g, nu.rho * (1 + eps * w.values)))
            - K_of(mu, make_symmetric_density(g, nu.rho * (1 - eps * w.values)))
            ) / (2 * eps)
    assert abs(fd_v - analytic_v) < 1e-9
    assert abs(fd_w - analytic_w) < 1e-9
    # quadrature forms agree with the dual-potential forms
    sf, rf = duals_to_body(duals, gauge="h0_equals_1", grid=g)
    assert abs(variation_source(sf, v)
               - (analytic_v + duals.phi[0] * 0.0)) < 1e-6
    assert abs(variation_target(rf, w) - analytic_w) < 1e-6


def test_variation_field_validation():
    g = make_circle_grid(16)
    mu = uniform_density(g)
    v = make_variation(g, np.cos(2 * g.angles), mu)
    assert abs(v.values @ mu.node_weights) < 1e-14
    from slok.transport import VariationField

    with pytest.raises(ValueError):
        VariationField(grid=g, values=np.sin(g.angles), reference=mu)


def test_duals_to_body_gauges():
    g = make_circle_grid(16)
    sig = uniform_density(g)
    _, duals = solve_plan(sig, sig)
    sf, rf = duals_to_body(duals, gauge="unit_volume", grid=g)
    assert np.allclose(sf.values, 1.0 / math.sqrt(math.pi), atol=1e-12)
    assert np.allclose(rf.values, 1.0 / math.sqrt(math.pi), atol=1e-12)
    sf2, _ = duals_to_body(duals, gauge="h0_equals_1", grid=g)
    assert abs(sf2.values[0] - 1.0) < 1e-12
    with pytest.raises(ValueError):
        duals_to_body(duals, gauge="nope", grid=g)


def test_plan_csv_export():
    g = make_circle_grid(16)
    sig = uniform_density(g)
    plan, _ = solve_plan(sig, sig)
    text = plan.to_csv(header_lines=["grid_M=16"])
    lines = text.strip().split("\n")
    assert lines[0] == "# grid_M=16"
    assert lines[1] == "i,j,mass"
    assert len(lines) == 2 + plan.support_size
