import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mildbbm.asymptotics import ModelParams
from mildbbm.environment import (ObstacleField, empty_field, find_clearing,
                                 occupation_fraction_in_K, sample_environment)
from mildbbm.seeding import make_rng


@pytest.mark.parametrize("d", [1, 2, 3])
def test_index_matches_bruteforce(d):
    p = ModelParams(nu=0.8, a=0.6, beta1=0.0, beta2=1.0)
    f = sample_environment(d, p, 5.0, seed=d)
    pts = make_rng(100 + d).uniform(-6, 6, size=(4000, d))
    assert np.array_equal(f.contains(pts), f.contains_bruteforce(pts))


@given(st.integers(1, 3), st.floats(0.1, 2.0), st.floats(0.2, 1.5), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_index_matches_bruteforce_property(d, nu, a, seed):
    f = sample_environment(d, ModelParams(nu, a, 0.0, 1.0), 3.0, seed)
    pts = make_rng(seed + 1).uniform(-3.5, 3.5, size=(300, d))
    # points exactly on an obstacle boundary belong to K
    if f.n_centers:
        pts[0] = f.centers[0] + np.eye(d)[0] * a
        pts[0] = np.clip(pts[0], -3.0, 3.0)
    assert np.array_equal(f.contains(pts), f.contains_bruteforce(pts))


def test_closed_balls_and_outside_box():
    p = ModelParams(1.0, 0.5, 0.2, 1.0)
    f = ObstacleField(1, p, 2.0, [[0.0]])
    assert f.contains([[0.5], [-0.5], [0.0]]).all()
    assert not f.contains([[0.5000001]])[0]
    assert f.branching_rate([0.1]) == 0.2
    assert f.branching_rate([3.0]) == 1.0
    with pytest.raises(ValueError):
        ObstacleField(1, p, 2.0, [[2.5]])


def test_sample_is_seeded_and_poisson_mean():
    p = ModelParams(2.0, 0.5, 0.0, 1.0)
    a = sample_environment(2, p, 4.0, seed=3)
    b = sample_environment(2, p, 4.0, seed=3)
    assert np.array_equal(a.centers, b.centers)
    counts = [sample_environment(2, p, 4.0, seed=s).n_centers for s in range(200)]
    mean = 2.0 * 64
    assert abs(np.mean(counts) - mean) < 3 * np.sqrt(mean / 200)


def test_sample_cap_error():
    with pytest.raises(ValueError, match="box_half_width"):
        sample_environment(3, ModelParams(10.0, 0.5, 0.0, 1.0), 100.0, seed=0, max_centers=1000)


def test_json_roundtrip(tmp_path, field2):
    path = tmp_path / "f.json"
    field2.save(path)
    g = ObstacleField.load(path)
    assert g.params == field2.params and g.dim == 2
    assert np.array_equal(g.centers, field2.centers)


def test_with_params_keeps_geometry(field1):
    g = field1.with_params(ModelParams(1.0, 0.5, 0.3, 2.0))
    assert np.array_equal(g.centers, field1.centers)
    with pytest.raises(ValueError):
        field1.with_params(ModelParams(1.0, 0.7, 0.0, 1.0))


def test_clearing_certificate(field2):
    rep = find_clearing(field2, 0.5, 3.0)
    assert rep.found
    assert np.linalg.norm(rep.center) <= 3.0 + 1e-12
    assert field2.nearest_center_distance(rep.center)[0] >= 0.5 + field2.params.a
    probe = rep.center + make_rng(0).uniform(-0.5, 0.5, size=(2000, 2))
    inside = np.linalg.norm(probe - rep.center, axis=1) < 0.5
    assert not field2.contains(probe[inside]).any()


def test_clearing_not_found_and_bounds():
    p = ModelParams(1.0, 0.5, 0.0, 1.0)
    dense = ObstacleField(1, p, 5.0, np.arange(-5.0, 5.01, 0.5).reshape(-1, 1))
    assert not find_clearing(dense, 0.2, 1.0).found
    with pytest.raises(ValueError):
        find_clearing(dense, 0.2, 10.0)
    assert find_clearing(empty_field(1, p, 5.0), -1.0, 1.0).radius == 0.0


def test_occupation_fraction(params1):
    f = ObstacleField(1, params1, 5.0, [[0.0]])
    path = np.linspace(-2, 2, 401)
    occ = occupation_fraction_in_K(f, path, 0.01)
    assert occ == pytest.approx(0.01 * 100, abs=0.011)
    with pytest.raises(ValueError):
        occupation_fraction_in_K(f, [0.0], 0.1)


def test_tiny_intensity_gives_empty_field():
    p = ModelParams(1e-9, 0.5, 0.0, 1.0)
    assert all(sample_environment(2, p, 1.0, seed=s).n_centers == 0 for s in range(20))


def test_poisson_count_large_box():
    p = ModelParams(1.0, 0.5, 0.0, 1.0)
    counts = np.array([sample_environment(1, p, 500.0, seed=s).n_centers for s in range(100)])
    se = counts.std(ddof=1) / np.sqrt(counts.size)
    assert abs(counts.mean() - 1000) < 3 * se


def test_empty_field_rate_everywhere(params1):
    f = empty_field(2, ModelParams(1.0, 0.5, 0.2, 1.0), 3.0)
    assert all(f.branching_rate(x) == 1.0 for x in ([0, 0], [2.9, -2.9], [10, 10]))


def test_clearing_at_origin_cases(params1):
    assert np.array_equal(find_clearing(empty_field(2, params1, 5.0), 1.0, 2.0).center, [0, 0])
    f = ObstacleField(2, params1, 6.0, [[2.0, 0.0]])
    rep = find_clearing(f, 1.5, 1.0)
    assert rep.found and np.array_equal(rep.center, [0.0, 0.0])


def test_clearing_probability_grows_with_search_radius():
    p = ModelParams(1.0, 0.5, 0.0, 1.0)
    ls = (0.25, 1.0, 4.0)
    found = np.zeros(len(ls))
    for s in range(150):
        f = sample_environment(1, p, 10.0, seed=1000 + s)
        for k, l in enumerate(ls):
            found[k] += find_clearing(f, 0.25, l).found
    assert np.all(np.diff(found) >= 0) and found[-1] / 150 > 0.95


def test_occupation_full_cover_and_chord():
    p = ModelParams(1.0, 0.5, 0.0, 1.0)
    big = ObstacleField(1, ModelParams(1.0, 10.0, 0.0, 1.0), 10.0, [[0.0]])
    path = np.linspace(-1, 1, 101)
    assert occupation_fraction_in_K(big, path, 0.02) == pytest.approx(2.0)
    assert occupation_fraction_in_K(empty_field(1, p, 5.0), path, 0.02) == 0.0
    # straight path at speed v through an obstacle of radius a: chord time 2a/v
    f = ObstacleField(2, p, 5.0, [[0.0, 0.3]])
    v, a = 2.0, 0.5
    chord = 2 * math.sqrt(a * a - 0.3 ** 2) / v
    errs = []
    for h in (0.01, 0.005, 0.0025):
        s = np.arange(0, 2.0 + h / 2, h)
        pts = np.stack([-2.0 + v * s, np.zeros_like(s)], axis=1)
        errs.append(abs(occupation_fraction_in_K(f, pts, h) - chord))
    assert errs[-1] < 2 * 0.0025 and errs[-1] <= errs[0]


def test_queries_repeatable(field2):
    pts = make_rng(9).uniform(-8, 8, size=(1000, 2))
    assert np.array_equal(field2.contains(pts), field2.contains(pts))
