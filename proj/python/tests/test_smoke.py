import math

import numpy as np
import pytest

import dissynth as ds


def coupled_scalars():
    one = np.ones((1, 1))
    subs = [ds.Subsystem(one, one, one, one) for _ in range(2)]
    return ds.Problem(subs, np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_first_order_lag_norm():
    assert ds.hinf_norm([[-1.0]], [[1.0]], [[1.0]], [[0.0]]) == pytest.approx(1.0, abs=1e-6)
    assert ds.hinf_norm([[-1.0]], [[1.0]], [[1.0]], [[0.5]]) == pytest.approx(1.5, abs=1e-6)


def test_svec_round_trip():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((4, 4))
    x = m + m.T
    v = ds.svec(x)
    assert v.shape == (10,)
    np.testing.assert_allclose(ds.smat(v), x, rtol=0, atol=1e-15)


def test_problem_json_round_trip():
    p = ds.example1()
    q = ds.Problem.from_json(p.to_json())
    assert len(q.subsystems) == 3
    for a, b in zip(p.subsystems, q.subsystems):
        np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(p.M_wy, q.M_wy)
    assert (q.n_d, q.n_z) == (1, 1)


def test_generator_is_deterministic():
    a = ds.generate_example2(n=3, seed=42)
    b = ds.generate_example2(n=3, seed=42)
    assert a.to_json() == b.to_json()
    for s in a.subsystems:
        assert ds.spectral_abscissa(s.A) == pytest.approx(1.0, abs=1e-9)


def test_bad_shapes_raise_value_error():
    one = np.ones((1, 1))
    with pytest.raises(ValueError):
        ds.Problem([ds.Subsystem(one, one, one, one)], np.ones((2, 2)))
    with pytest.raises(ValueError):
        ds.synthesize(coupled_scalars(), mode="fast")


def test_stabilizing_synthesis_verifies():
    p = coupled_scalars()
    r = ds.synthesize(p, accel=True)
    assert r.status == "verified"
    assert r.report.passed
    assert r.trace.shape == (r.iterations, 5)
    assert np.all(np.isnan(r.trace[:, 3]))
    A, _, _, _ = p.closed_loop(r.gains)
    assert ds.spectral_abscissa(A) < 0.0
    rep = ds.verify(p, r.gains, r.certificates)
    assert rep.passed


def test_hinf_guard_and_centralized_bound():
    p = ds.example1()
    with pytest.raises(ValueError, match="n_d = n_z = 0"):
        ds.synthesize(p, mode="stabilize")
    c = ds.centralized(p, mode="hinf")
    assert c.eta is not None and c.eta > 0.0
    assert c.bound == pytest.approx(math.sqrt(c.eta))


def test_gain_recovery_trap_is_reported():
    one, zero = np.ones((1, 1)), np.zeros((1, 1))
    trap = ds.Problem([ds.Subsystem(one, zero, zero, one)], zero)
    r = ds.synthesize(trap)
    assert r.status == "verification-failed"
    assert "gain recovery" in r.report.failures


def test_simulate_decay():
    t, x, z = ds.simulate([[-1.0]], np.zeros((1, 0)), [[1.0]], np.zeros((1, 0)), [1.0], 1.0, 1e-3)
    assert x.shape[1] == len(t)
    assert x[0, -1] == pytest.approx(math.exp(-1.0), rel=1e-9)
    np.testing.assert_allclose(z, x)
