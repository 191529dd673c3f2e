import numpy as np
import pytest

from it2mof import expr as ex
from it2mof.controller import (
    ControllerGains,
    FailureConfig,
    apply_failure,
    compute_control,
)
from it2mof.model import IT2MembershipSpec, MembershipRule

from conftest import example_ctrl_spec, random_membership_spec


def single_rule_spec():
    return IT2MembershipSpec(
        rules=(MembershipRule(ex.parse("0.5"), ex.parse("0.5"),
                              ex.parse("0.5")),),
        premise=("y1",), premise_index=(0,), domain_lo=(-10.0,),
        domain_hi=(10.0,))


def test_zero_packet_gives_zero_control():
    gains = ControllerGains(np.ones((3, 2, 1, 1)), example_ctrl_spec())
    # kappa=2 here, so adapt: use 2-deep packet of zeros
    u = compute_control(gains, np.zeros((2, 1)))
    np.testing.assert_array_equal(u, [0.0])


def test_scalar_static_output_feedback():
    gains = ControllerGains(np.array([[[[2.5]]]]), single_rule_spec())
    u = compute_control(gains, np.array([[1.2]]))
    np.testing.assert_allclose(u, [3.0])


def test_two_deep_memory_against_double_sum_oracle():
    rng = np.random.default_rng(2)
    spec = random_membership_spec(rng, 2, "y", residual=False)
    kappa, nu, ny, q = 3, 2, 1, 2
    K = rng.normal(size=(q, kappa, nu, ny))
    gains = ControllerGains(K, spec)
    packet = rng.normal(size=(kappa, ny))
    n = spec.normalized(packet[0]).weights
    want = np.zeros(nu)
    for h in range(kappa):
        for j in range(q):
            want += n[j] * (K[j, h] @ packet[h])
    np.testing.assert_allclose(compute_control(gains, packet), want,
                               atol=1e-14)


def test_memberships_evaluated_at_newest_entry():
    spec = example_ctrl_spec()
    K = np.zeros((3, 2, 1, 1))
    K[0, 0, 0, 0] = 1.0  # only rule 1, newest slot
    gains = ControllerGains(K, spec)
    packet = np.array([[2.0], [-3.0]])
    n = spec.normalized(np.array([2.0])).weights
    np.testing.assert_allclose(compute_control(gains, packet), [n[0] * 2.0])


def test_frozen_membership_homogeneity():
    rng = np.random.default_rng(8)
    spec = random_membership_spec(rng, 2, "y")
    K = rng.normal(size=(2, 2, 1, 1))
    gains = ControllerGains(K, spec)
    packet = rng.normal(size=(2, 1))
    n = spec.normalized(packet[0]).weights
    u1 = compute_control(gains, packet, memberships=n)
    u2 = compute_control(gains, 3.0 * packet, memberships=n)
    np.testing.assert_allclose(u2, 3.0 * u1, atol=1e-13)


def test_packet_shape_checked():
    gains = ControllerGains(np.ones((1, 2, 1, 1)), single_rule_spec())
    with pytest.raises(ValueError):
        compute_control(gains, np.zeros((3, 1)))


def test_failure_scaling():
    assert apply_failure(np.array([2.0]), FailureConfig(0.0))[0] == 0.0
    assert apply_failure(np.array([2.0]), FailureConfig(1.0))[0] == 2.0
    assert apply_failure(np.array([2.0]), FailureConfig(0.5))[0] == 1.0


def test_failure_range_checked():
    with pytest.raises(ValueError):
        FailureConfig(1.5)
    with pytest.raises(ValueError):
        FailureConfig(-0.1)


def test_gain_shape_validation():
    with pytest.raises(ValueError):
        ControllerGains(np.ones((2, 2, 1, 1)), single_rule_spec())
