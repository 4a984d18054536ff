"""VARMA machinery: stability diagnostics, Green's matrices, residuals."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varmarank.varma import (
    VarmaSpec,
    check_assumption_A,
    green_for_spec,
    green_matrices,
    residuals,
    residuals_green_oracle,
    simulate,
)


def random_stable_spec(rng, k=2, p=1, q=1, scale=0.35):
    A = tuple(scale * rng.uniform(-1, 1, (k, k)) / k + 0.2 * np.eye(k) for _ in range(p))
    B = tuple(scale * rng.uniform(-1, 1, (k, k)) / k for _ in range(q))
    spec = VarmaSpec(k, p, q, A, B)
    assert check_assumption_A(spec).passed
    return spec


class TestAssumptionA:
    def test_stable_var1(self):
        spec = VarmaSpec(2, 1, 0, (0.5 * np.eye(2),), ())
        rep = check_assumption_A(spec)
        assert rep.passed
        assert rep.min_root_modulus_ar == pytest.approx(2.0, rel=1e-8)
        assert rep.coprimeness_checked is False

    def test_unit_root_fails(self):
        spec = VarmaSpec(2, 1, 0, (np.eye(2),), ())
        rep = check_assumption_A(spec)
        assert not rep.passed
        assert rep.min_root_modulus_ar == pytest.approx(1.0, rel=1e-8)

    def test_white_noise_vacuous_pass(self):
        rep = check_assumption_A(VarmaSpec(3, 0, 0, (), ()))
        assert rep.passed
        assert rep.min_root_modulus_ar == np.inf

    def test_singular_leading_coefficient_flagged(self):
        a = np.array([[0.3, 0.0], [0.3, 0.0]])
        rep = check_assumption_A(VarmaSpec(2, 1, 0, (a,), ()))
        assert rep.leading_ar_singular and not rep.passed

    def test_ma_roots(self):
        spec = VarmaSpec(2, 0, 1, (), (0.5 * np.eye(2),))
        rep = check_assumption_A(spec)
        assert rep.min_root_modulus_ma == pytest.approx(2.0, rel=1e-8)


class TestGreenMatrices:
    def test_scalar_ma(self):
        H = green_matrices([0.5 * np.eye(2)], 6)
        for u in range(7):
            assert np.allclose(H[u], (-0.5) ** u * np.eye(2), atol=1e-14)

    def test_order_zero(self):
        H = green_matrices([], 4, k=3)
        assert np.allclose(H[0], np.eye(3))
        assert np.abs(H.mats[1:]).max() == 0.0

    def test_nilpotent(self):
        b = np.array([[0.0, 0.5], [0.0, 0.0]])
        H = green_matrices([b], 5)
        assert np.allclose(H[1], -b)
        assert np.abs(H.mats[2:]).max() == 0.0

    def test_recursion_identity(self, rng):
        spec = random_stable_spec(rng, k=3, p=0, q=2)
        H = green_matrices(list(spec.B), 30)
        B = [np.eye(3)] + list(spec.B)
        for u in range(31):
            acc = sum(B[i] @ H[u - i] for i in range(0, min(2, u) + 1))
            target = np.eye(3) if u == 0 else np.zeros((3, 3))
            assert np.allclose(acc, target, atol=1e-12)

    def test_transposed_identity(self, rng):
        spec = random_stable_spec(rng, k=2, p=0, q=2)
        H = green_matrices(list(spec.B), 20)
        B = [np.eye(2)] + list(spec.B)
        for u in (0, 1, 5, 13):
            acc = sum(B[i].T @ H[u - i].T for i in range(0, min(2, u) + 1))
            target = np.eye(2) if u == 0 else np.zeros((2, 2))
            assert np.allclose(acc, target, atol=1e-12)

    def test_exponential_decay(self, rng):
        spec = random_stable_spec(rng, k=2, p=2, q=1)
        G, H = green_for_spec(spec, 200)
        assert G.decay_index(1e-12) is not None
        assert H.decay_index(1e-12) is not None

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            green_matrices([0.5 * np.eye(2)], 0)


class TestResiduals:
    def test_pure_ar(self, rng):
        a = 0.4 * np.eye(2)
        spec = VarmaSpec(2, 1, 0, (a,), ())
        x = rng.normal(size=(10, 2))
        z = residuals(spec, x)
        assert np.allclose(z[0], x[0])
        for t in range(1, 10):
            assert np.allclose(z[t], x[t] - a @ x[t - 1])

    def test_pure_ma(self, rng):
        b = 0.3 * np.eye(2) + 0.1
        spec = VarmaSpec(2, 0, 1, (), (b,))
        x = rng.normal(size=(2, 2))
        z = residuals(spec, x)
        assert np.allclose(z[0], x[0])
        assert np.allclose(z[1], x[1] - b @ x[0])

    def test_matches_green_oracle(self, rng):
        for _ in range(6):
            k = int(rng.integers(1, 4))
            p = int(rng.integers(0, 3))
            q = int(rng.integers(0, 3))
            spec = random_stable_spec(rng, k=k, p=p, q=q)
            x = rng.normal(size=(40, k))
            assert np.abs(residuals(spec, x) - residuals_green_oracle(spec, x)).max() < 1e-10

    def test_dimension_mismatch(self, rng):
        spec = VarmaSpec(2, 0, 0, (), ())
        with pytest.raises(ValueError):
            residuals(spec, rng.normal(size=(5, 3)))

    def test_unstable_spec_rejected(self, rng):
        spec = VarmaSpec(2, 1, 0, (np.eye(2),), ())
        x = rng.normal(size=(5, 2))
        with pytest.raises(ValueError):
            residuals(spec, x)
        assert residuals(spec, x, check=False).shape == (5, 2)


class TestSimulate:
    def test_white_noise_identity(self, rng):
        spec = VarmaSpec(2, 0, 0, (), ())
        eps = rng.normal(size=(20, 2))
        assert np.array_equal(simulate(spec, eps), eps)

    def test_roundtrip(self, rng):
        for _ in range(6):
            spec = random_stable_spec(rng, k=2, p=int(rng.integers(0, 3)), q=int(rng.integers(0, 3)))
            eps = rng.normal(size=(60, 2))
            z = residuals(spec, simulate(spec, eps))
            assert np.abs(z - eps).max() < 1e-12

    @given(st.integers(min_value=0, max_value=2), st.integers(min_value=0, max_value=2),
           st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=20, deadline=None)
    def test_roundtrip_property(self, p, q, seed):
        rng = np.random.default_rng(seed)
        spec = random_stable_spec(rng, k=2, p=p, q=q)
        eps = rng.normal(size=(30, 2))
        assert np.abs(residuals(spec, simulate(spec, eps)) - eps).max() < 1e-12

    def test_burn_in_stationarity(self, rng):
        spec = VarmaSpec(1, 1, 0, (np.array([[0.9]]),), ())
        eps = rng.normal(size=(4000, 1))
        x = simulate(spec, eps, burn_in=500)
        # zero start underestimates early variance; after burn-in the first
        # and last segments should have comparable spread
        v1 = x[:1000].var()
        v2 = x[-1000:].var()
        assert 0.6 < v1 / v2 < 1.6

    def test_bad_burn_in(self, rng):
        spec = VarmaSpec(1, 0, 0, (), ())
        with pytest.raises(ValueError):
            simulate(spec, rng.normal(size=(5, 1)), burn_in=5)

    def test_perturbed_spec(self):
        spec = VarmaSpec(2, 1, 0, (0.4 * np.eye(2),), ())
        tau = np.arange(8.0)
        alt = spec.perturbed(tau, 2, 0, n=100)
        assert alt.p == 2 and alt.q == 0
        step = tau.reshape(2, 4) / 10.0
        assert np.allclose(alt.A[0], 0.4 * np.eye(2) + step[0].reshape(2, 2, order="F"))
        assert np.allclose(alt.A[1], step[1].reshape(2, 2, order="F"))

    def test_scalar_detection(self):
        assert VarmaSpec(2, 1, 0, (0.3 * np.eye(2),), ()).is_scalar()
        assert not VarmaSpec(2, 1, 0, (np.array([[0.3, 0.1], [0.0, 0.3]]),), ()).is_scalar()
