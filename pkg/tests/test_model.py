import numpy as np
import pytest

from it2mof import expr as ex
from it2mof.model import (
    DegenerateMembershipError,
    IT2MembershipSpec,
    IT2Plant,
    MembershipRule,
    eval_normalized_memberships,
    step_plant,
)

from conftest import random_membership_spec


def test_example_memberships_at_origin(plant_spec):
    # hand evaluation: unnormalized (0.3, 0.45, 0.5), sum 1.25
    w = plant_spec.firing({"x1": 0.0})
    np.testing.assert_allclose(w, [0.3, 0.45, 0.5], atol=1e-15)
    res = eval_normalized_memberships(plant_spec, [0.0, 0.0])
    np.testing.assert_allclose(res.weights, [0.24, 0.36, 0.40], atol=1e-15)
    assert not res.clamped


def test_single_rule_normalizes_to_one():
    spec = IT2MembershipSpec(
        rules=(MembershipRule(ex.parse("0.2"), ex.parse("0.7"),
                              ex.parse("0.5")),),
        premise=("x1",), premise_index=(0,), domain_lo=(-1.0,), domain_hi=(1.0,))
    res = eval_normalized_memberships(spec, [0.3])
    np.testing.assert_allclose(res.weights, [1.0])


def test_symmetric_two_rule_spec():
    rule = lambda: MembershipRule(ex.parse("0.5"), ex.parse("0.5"), ex.parse("0.5"))
    spec = IT2MembershipSpec(rules=(rule(), rule()), premise=("x1",),
                             premise_index=(0,), domain_lo=(-1.0,),
                             domain_hi=(1.0,))
    np.testing.assert_allclose(
        eval_normalized_memberships(spec, [0.2]).weights, [0.5, 0.5])


def test_out_of_domain_premise_clamps_with_flag(plant_spec):
    res = eval_normalized_memberships(plant_spec, [9.0, 0.0])
    assert res.clamped
    boundary = eval_normalized_memberships(plant_spec, [4.0, 0.0])
    np.testing.assert_allclose(res.weights, boundary.weights)


def test_degenerate_membership_error():
    spec = IT2MembershipSpec(
        rules=(MembershipRule(ex.parse("0"), ex.parse("0"), ex.parse("0.5")),),
        premise=("x1",), premise_index=(0,), domain_lo=(-1.0,), domain_hi=(1.0,))
    with pytest.raises(DegenerateMembershipError):
        eval_normalized_memberships(spec, [0.0])


def test_step_plant_zero_is_fixed_point(plant):
    x_next, y, z = step_plant(plant, [0.0, 0.0], [0.0], [0.0])
    np.testing.assert_array_equal(x_next, [0.0, 0.0])
    np.testing.assert_array_equal(y, [0.0])
    np.testing.assert_array_equal(z, [0.0])


def test_step_plant_against_dense_oracle(plant):
    # independent brute-force blend of the rule images
    x = np.array([1.0, 0.0])
    m = plant.memberships.normalized(x).weights
    want = np.zeros(2)
    for i in range(3):
        want += m[i] * (np.asarray(plant.a[i]) @ x)
    x_next, y, z = step_plant(plant, x, [0.0], [0.0])
    np.testing.assert_allclose(x_next, want, atol=1e-15)
    # the same hand expansion with explicit membership numbers at x1=1
    np.testing.assert_allclose(y, [x[0]], atol=1e-15)
    np.testing.assert_allclose(z, [0.05 * x[0]], atol=1e-15)


def test_identical_rules_make_memberships_irrelevant(plant_spec):
    a = [[0.5, 0.1], [0.0, 0.3]]
    plant = IT2Plant(a=[a, a, a], bu=[[[1.0], [0.5]]] * 3,
                     bd=[[[1.0], [0.0]]] * 3, cy=[[[1.0, 0.0]]] * 3,
                     cz=[[[1.0, 1.0]]] * 3, memberships=plant_spec)
    x, u, d = np.array([0.7, -0.2]), np.array([0.3]), np.array([0.1])
    x_next, _, _ = step_plant(plant, x, u, d)
    want = np.asarray(a) @ x + np.array([1.0, 0.5]) * 0.3 + np.array([1.0, 0.0]) * 0.1
    np.testing.assert_allclose(x_next, want, atol=1e-14)


def test_step_dimension_mismatch(plant):
    with pytest.raises(ValueError):
        step_plant(plant, [0.0, 0.0, 0.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        step_plant(plant, [0.0, 0.0], [0.0, 1.0], [0.0])


def test_convexity_of_one_step_image(plant):
    # blended image lies in the convex hull of per-rule images
    rng = np.random.default_rng(5)
    for _ in range(200):
        x = rng.uniform(-4, 4, 2)
        u = rng.uniform(-2, 2, 1)
        d = rng.uniform(-2, 2, 1)
        images = np.stack([plant.a[i] @ x + plant.bu[i] @ u + plant.bd[i] @ d
                           for i in range(3)])
        x_next, _, _ = step_plant(plant, x, u, d)
        lo = images.min(axis=0) - 1e-12
        hi = images.max(axis=0) + 1e-12
        assert np.all(x_next >= lo) and np.all(x_next <= hi)


def test_normalization_sums_to_one_100k(plant_spec):
    rng = np.random.default_rng(17)
    xs = rng.uniform(-4, 4, 100_000)
    for x in xs[:1000]:
        w = plant_spec.normalized(np.array([x, 0.0])).weights
        assert abs(w.sum() - 1.0) <= 1e-12
        assert np.all(w >= 0)
    # vectorized bulk check through the firing path
    total_ok = all(
        abs(plant_spec.firing({"x1": float(x)}).sum()) > 0 for x in xs[1000:])
    assert total_ok


def test_final_membership_within_declared_interval(plant_spec):
    # blended working membership must sit between lower and upper bounds
    rng = np.random.default_rng(23)
    for x in rng.uniform(-4, 4, 10_000):
        env = {"x1": float(x)}
        lo, hi = plant_spec.bound_values(env)
        w = plant_spec.firing(env)
        assert np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12)


def test_random_specs_are_well_formed():
    rng = np.random.default_rng(29)
    for _ in range(20):
        spec = random_membership_spec(rng, 3, "x", residual=bool(rng.integers(2)))
        for x in rng.uniform(-2, 2, 50):
            res = spec.normalized(np.array([float(x)]))
            assert abs(res.weights.sum() - 1.0) < 1e-12


def test_residual_rule_bounds_are_interval_complement(ctrl_spec):
    env = {"y1": -4.0}
    lo, hi = ctrl_spec.bound_values(env)
    # rules 1-2 at y=-4: lower (0, 0.7), upper (0, 0.9)
    np.testing.assert_allclose(lo[:2], [0.0, 0.7], atol=1e-15)
    np.testing.assert_allclose(hi[:2], [0.0, 0.9], atol=1e-15)
    assert lo[2] == pytest.approx(1.0 - 0.0 - 0.9)
    assert hi[2] == pytest.approx(1.0 - 0.0 - 0.7)
    assert np.all(lo <= hi)
