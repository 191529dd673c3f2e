import numpy as np
import pytest

from it2mof.trigger import (
    TriggerConfig,
    TriggerState,
    check_and_update,
    detm_check,
    validate,
)


def make_config(**kw):
    base = dict(rho=0.1, nu=2.0, mu=0.5, kappa=1, varrho=(1.0,),
                omega=np.array([[1.0]]), varpi0=1.0)
    base.update(kw)
    return TriggerConfig(**base)


def test_validate_boundary_and_products():
    assert validate(make_config(nu=2.0, mu=0.5)) == (1.0, True)
    assert validate(make_config(nu=1.0, mu=0.5)) == (0.5, False)
    assert validate(make_config(nu=10.0, mu=0.2)) == (2.0, True)


def test_config_range_checks():
    with pytest.raises(ValueError):
        make_config(rho=0.0)
    with pytest.raises(ValueError):
        make_config(mu=1.0)
    with pytest.raises(ValueError):
        make_config(kappa=0)
    with pytest.raises(ValueError):
        make_config(varpi0=-0.1)
    with pytest.raises(ValueError):
        make_config(kappa=2, varrho=(0.5, 0.4))  # does not sum to 1
    with pytest.raises(ValueError):
        make_config(kappa=2, varrho=(0.2, 0.8))  # newest must weigh most
    with pytest.raises(ValueError):
        make_config(omega=np.array([[0.0]]))


def test_zero_output_zero_varpi_triggers():
    cfg = make_config(varpi0=0.0)
    state = TriggerState(cfg)
    state.t = 3  # not the forced initial release
    decision = check_and_update(state, cfg, np.array([0.0]))
    assert decision.triggered  # 0 <= 0 is the equality case


def test_scalar_derived_example():
    # rho=0.1 nu=2 mu=0.5 omega=1 varpi=1 y=1 ehat=0.8:
    # check 0.5+0.1-0.64 = -0.04 <= 0 -> trigger; raw recursion value -0.04
    cfg = make_config()
    state = TriggerState(cfg)
    state.t = 5
    state.varpi = 1.0
    state.released[0] = 0.2
    decision = check_and_update(state, cfg, np.array([1.0]))
    assert decision.triggered
    assert decision.varpi_raw == pytest.approx(-0.04)
    # stored value after the release resets the error: mu*varpi + rho*qy
    assert decision.varpi_next == pytest.approx(0.6)
    np.testing.assert_array_equal(decision.packet, [[1.0]])


def test_literal_update_keeps_raw_value():
    cfg = make_config(literal_varpi_update=True)
    state = TriggerState(cfg)
    state.t = 5
    state.varpi = 1.0
    state.released[0] = 0.2
    decision = check_and_update(state, cfg, np.array([1.0]))
    assert decision.triggered
    assert decision.varpi_next == pytest.approx(-0.04)


def test_first_sample_always_released():
    cfg = make_config(varpi0=5.0)
    state = TriggerState(cfg)
    decision = check_and_update(state, cfg, np.array([3.0]))
    assert decision.triggered
    assert state.last_trigger == 0
    np.testing.assert_array_equal(decision.packet, [[3.0]])


def test_packet_is_kappa_most_recent_newest_first():
    # tiny threshold weight: the growing error forces a release every step
    cfg = make_config(rho=0.001, kappa=3, varrho=(0.5, 0.3, 0.2), varpi0=0.0)
    state = TriggerState(cfg)
    packets = []
    for t, y in enumerate([1.0, 2.0, 3.0, 4.0]):
        d = check_and_update(state, cfg, np.array([y]))
        packets.append(d.packet)
    assert all(p is not None for p in packets)
    np.testing.assert_array_equal(packets[3], [[4.0], [3.0], [2.0]])


def test_prehistory_filled_with_initial_output():
    cfg = make_config(kappa=3, varrho=(0.5, 0.3, 0.2))
    state = TriggerState(cfg)
    d = check_and_update(state, cfg, np.array([2.0]))
    np.testing.assert_array_equal(d.packet, [[2.0], [2.0], [2.0]])


def test_dimension_mismatch():
    cfg = make_config()
    state = TriggerState(cfg)
    with pytest.raises(ValueError):
        check_and_update(state, cfg, np.array([1.0, 2.0]))


def test_reduction_bit_identical_to_detm():
    rng = np.random.default_rng(42)
    for trial in range(25):
        cfg = make_config(varpi0=float(rng.uniform(0, 2)))
        s1 = TriggerState(cfg)
        s2 = TriggerState(cfg)
        for t in range(400):
            y = np.array([float(rng.normal())])
            d1 = check_and_update(s1, cfg, y)
            d2 = detm_check(s2, cfg, y)
            assert d1.triggered == d2.triggered
            # bit-identical auxiliary recursions, not approximately equal
            assert d1.varpi_next == d2.varpi_next
            assert d1.varpi_raw == d2.varpi_raw


def test_trigger_times_strictly_increasing():
    rng = np.random.default_rng(1)
    cfg = make_config(kappa=2, varrho=(0.7, 0.3), varpi0=1.0)
    state = TriggerState(cfg)
    times = []
    for t in range(500):
        d = check_and_update(state, cfg, np.array([float(rng.normal())]))
        if d.triggered:
            times.append(t)
    assert times[0] == 0
    assert all(b > a for a, b in zip(times, times[1:]))


def test_nonnegativity_guarantee_on_random_streams():
    # nu*mu >= 1 with the release-reset recursion keeps varpi nonnegative
    rng = np.random.default_rng(9)
    for trial in range(30):
        nu = float(rng.uniform(1.0, 10.0))
        mu = float(rng.uniform(1.0 / nu, 0.999))
        kappa = int(rng.integers(1, 4))
        w = np.sort(rng.uniform(0.1, 1.0, kappa))[::-1]
        cfg = make_config(nu=nu, mu=mu, kappa=kappa,
                          varrho=tuple(w / w.sum()),
                          varpi0=float(rng.uniform(0, 1)))
        assert validate(cfg).guarantee_holds
        state = TriggerState(cfg)
        worst = 0.0
        for t in range(2000):
            d = check_and_update(state, cfg, np.array([float(rng.normal())]))
            worst = min(worst, d.varpi_next)
        assert worst >= -1e-12
