import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slok.spheremeas import (
    AtomicMeasure,
    GridDensity,
    bin_to_grid,
    make_circle_grid,
    make_sym_directions,
    make_symmetric_density,
    measure_from_json,
    measure_to_json,
    uniform_density,
    unit_vector,
)


def test_unit_vector_normalizes():
    v = unit_vector([3.0, 4.0])
    assert np.allclose(v, [0.6, 0.8])
    assert abs(np.linalg.norm(unit_vector([1.0, 2.0, 2.0])) - 1.0) < 1e-14


def test_unit_vector_rejects_zero_and_bad_shapes():
    with pytest.raises(ValueError):
        unit_vector([0.0, 0.0])
    with pytest.raises(ValueError):
        unit_vector([1.0])
    with pytest.raises(ValueError):
        unit_vector([1.0, 0.0, 0.0, 0.0])


def test_circle_grid_antipodes_exact():
    g = make_circle_grid(16)
    assert g.size == 16 and g.dim == 2
    assert np.array_equal(g.nodes[g.antipode_index], -g.nodes)
    assert abs(g.sigma_weights.sum() - 1.0) < 1e-15


def test_circle_grid_rejects_odd_and_small():
    with pytest.raises(ValueError):
        make_circle_grid(15)
    with pytest.raises(ValueError):
        make_circle_grid(6)


def test_uniform_density_mass_and_symmetry():
    g = make_circle_grid(20)
    d = uniform_density(g)
    assert d.symmetric
    assert abs(d.node_weights.sum() - 1.0) < 1e-14


def test_make_symmetric_density_exact_evenness():
    g = make_circle_grid(32)
    # analytically even but only even up to round-off on the grid
    vals = np.exp(0.3 * np.cos(2 * g.angles + 0.7))
    d = make_symmetric_density(g, vals)
    assert np.array_equal(d.rho[g.antipode_index], d.rho)
    assert abs(d.rho @ g.sigma_weights - 1.0) < 1e-12


def test_density_rejects_negative_and_wrong_mass():
    g = make_circle_grid(8)
    with pytest.raises(ValueError):
        GridDensity(grid=g, rho=-np.ones(8))
    with pytest.raises(ValueError):
        GridDensity(grid=g, rho=2.0 * np.ones(8))


def test_sym_directions_mirrors_and_merges():
    m = make_sym_directions([[1.0, 0.0]], [1.0])
    assert m.size == 2
    assert np.allclose(sorted(m.weights), [0.5, 0.5])
    # passing both a point and its antipode collapses to the same pair
    m2 = make_sym_directions([[1.0, 0.0], [-1.0, 0.0]], [0.5, 0.5])
    assert m2.size == 2
    assert np.allclose(m2.weights, [0.5, 0.5])


def test_sym_directions_three_dim():
    m = make_sym_directions([[0, 0, 1.0], [1.0, 0, 0]], [1.0, 1.0])
    assert m.size == 4 and m.dim == 3
    assert np.allclose(m.weights, 0.25)


def test_atomic_measure_validation():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(ValueError):
        AtomicMeasure(points=pts, weights=np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        AtomicMeasure(points=2 * pts, weights=np.array([0.5, 0.5]))
    bad = AtomicMeasure(points=pts, weights=np.array([0.5, 0.5]))
    assert bad.size == 2


def test_bin_to_grid_conserves_mass_and_ties_go_low():
    g = make_circle_grid(8)
    m = make_sym_directions([[np.cos(0.3), np.sin(0.3)]], [1.0])
    d = bin_to_grid(m, g)
    assert abs(d.node_weights.sum() - 1.0) < 1e-12
    # an atom equidistant from nodes 0 and 1 lands on the lower index
    mid = np.pi / 8
    tie = make_sym_directions([[np.cos(mid), np.sin(mid)]], [1.0])
    dt = bin_to_grid(tie, g)
    assert dt.node_weights[0] > 0 and dt.node_weights[1] == 0


def test_measure_json_roundtrip_density():
    g = make_circle_grid(16)
    d = make_symmetric_density(g, np.exp(0.2 * np.cos(2 * g.angles)))
    d2 = measure_from_json(measure_to_json(d))
    assert isinstance(d2, GridDensity)
    assert np.array_equal(d.rho, d2.rho)
    assert d2.symmetric


def test_measure_json_roundtrip_atoms():
    m = make_sym_directions([[1.0, 0.0], [0.6, 0.8]], [0.25, 0.75])
    m2 = measure_from_json(measure_to_json(m))
    assert isinstance(m2, AtomicMeasure)
    assert np.array_equal(m.points, m2.points)
    assert np.array_equal(m.weights, m2.weights)
    assert m2.symmetric


def test_measure_json_malformed():
    with pytest.raises((ValueError, KeyError)):
        measure_from_json(json.dumps({"n": 2}))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 10.0), min_size=1, max_size=5),
       st.integers(0, 2**31 - 1))
def test_sym_directions_always_symmetric(weights, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(len(weights), 2))
    if np.any(np.linalg.norm(pts, axis=1) < 1e-6):
        return
    m = make_sym_directions(pts, weights)
    assert m.symmetric
    assert abs(m.weights.sum() - 1.0) < 1e-10
    assert m.size % 2 == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2**31 - 1))
def test_symmetric_density_roundtrip_bits(half_m, seed):
    g = make_circle_grid(2 * max(half_m, 4))
    rng = np.random.default_rng(seed)
    d = make_symmetric_density(g, rng.uniform(0.1, 2.0, g.size))
    d2 = measure_from_json(measure_to_json(d))
    assert np.array_equal(d.rho, d2.rho)
