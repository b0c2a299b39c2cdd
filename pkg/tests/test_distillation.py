import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revree.composite_testing import CompositeConfig
from revree.distillation import (
    MeasurePrepareChannel,
    channel_from_test,
    distillation_exponent,
    nonentangling_audit,
    output_fidelity,
    test_from_channel,
)
from revree.operators import (
    DensityOperator,
    DomainError,
    isotropic_state,
    max_entangled,
    partial_transpose,
    random_density,
    random_hermitian,
    werner_state,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _random_effect(rng, d):
    w, v = np.linalg.eigh(random_hermitian(d, rng))
    return (v * rng.uniform(0, 1, size=d)) @ v.conj().T


class TestChannel:
    @pytest.mark.parametrize("m", [1, 2])
    def test_reject_everything(self, m, rng):
        ch = channel_from_test(np.zeros((4, 4)), m, (2, 2))
        rho = random_density((2, 2), rng)
        assert output_fidelity(ch, rho) == pytest.approx(1.0)
        assert np.allclose(ch.apply(rho).matrix, max_entangled(m).matrix)

    @pytest.mark.parametrize("m", [1, 2])
    def test_accept_everything(self, m, rng):
        ch = channel_from_test(np.eye(4), m, (2, 2))
        assert output_fidelity(ch, random_density((2, 2), rng)) == pytest.approx(0.0, abs=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.sampled_from([1, 2]))
    def test_fidelity_identity(self, seed, m):
        rng = np.random.default_rng(seed)
        eff = _random_effect(rng, 4)
        rho = random_density((2, 2), rng)
        ch = channel_from_test(eff, m, (2, 2))
        expected = float(np.real(np.trace((np.eye(4) - eff) @ rho.matrix)))
        assert abs(output_fidelity(ch, rho) - expected) <= 1e-10
        out = ch.apply(rho)
        assert out.dims == (2,) * (2 * m)
        assert abs(np.trace(out.matrix).real - 1) <= 1e-10

    def test_garbage_is_separable(self):
        for m in (1, 2):
            ch = channel_from_test(np.eye(4) / 2, m, (2, 2))
            g = ch.garbage
            assert np.real(np.vdot(ch.target, g)) == pytest.approx(0.0, abs=1e-14)
            # the PPT test on the A^m:B^m cut (exact for isotropic states)
            assert np.linalg.eigvalsh(partial_transpose(g, (2 ** m, 2 ** m)))[0] >= -1e-12

    def test_adjoint_duality(self, rng):
        eff = _random_effect(rng, 4)
        ch = channel_from_test(eff, 1, (2, 2))
        x = random_density((2, 2), rng).matrix
        y = random_hermitian(4, rng)
        lhs = np.real(np.vdot(y, ch.apply(x).matrix))
        rhs = np.real(np.vdot(ch.adjoint(y), x))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_invalid_effect(self):
        with pytest.raises(DomainError):
            channel_from_test(np.diag([1.5, 0, 0, 0]), 1)
        with pytest.raises(DomainError):
            MeasurePrepareChannel(np.eye(4) / 2, 1, (2, 3))
        with pytest.raises(ValueError):
            channel_from_test(np.eye(4) / 2, 0)


class TestRoundTrip:
    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_exact(self, seed):
        rng = np.random.default_rng(seed)
        eff = _random_effect(rng, 4)
        ch = channel_from_test(eff, 1, (2, 2))
        back = test_from_channel(ch)
        assert np.allclose(back, eff, atol=1e-12)
        rho = random_density((2, 2), rng)
        assert np.real(np.trace((np.eye(4) - back) @ rho.matrix)) == pytest.approx(
            output_fidelity(ch, rho), abs=1e-12)

    def test_prepare_target_unconditionally(self):
        phi = max_entangled(1).matrix
        adj = lambda y: np.real(np.vdot(phi, y)) * np.eye(4)  # noqa: E731
        assert np.allclose(test_from_channel(adj, 1), 0)

    def test_prepare_orthogonal_unconditionally(self):
        phi = max_entangled(1).matrix
        garbage = (np.eye(4) - phi) / 3
        adj = lambda y: np.real(np.vdot(garbage, y)) * np.eye(4)  # noqa: E731
        assert np.allclose(test_from_channel(adj, 1), np.eye(4))

    def test_invalid_adjoint(self):
        with pytest.raises(DomainError):
            test_from_channel(lambda y: 3 * np.eye(4), 1)
        with pytest.raises(ValueError):
            test_from_channel(lambda y: np.eye(4))


class TestAudit:
    def test_reject_all_fails(self):
        worst, verdict = nonentangling_audit(channel_from_test(np.zeros((4, 4)), 1, (2, 2)))
        assert verdict == "fail" and worst == pytest.approx(1.0)

    @pytest.mark.parametrize("m", [1, 2])
    def test_scaled_identity_passes(self, m):
        eff = (1 - 2.0 ** -m) * np.eye(4)
        worst, verdict = nonentangling_audit(channel_from_test(eff, m, (2, 2)))
        assert verdict == "heuristic-pass" and worst == pytest.approx(2.0 ** -m, abs=1e-12)

    def test_needs_bipartite_input(self):
        with pytest.raises(DomainError):
            nonentangling_audit(channel_from_test(np.eye(4) / 2, 1))


class TestExponent:
    def test_separable(self):
        rep = distillation_exponent(DensityOperator.maximally_mixed((2, 2)), 1, 2)
        assert rep.single_letter == pytest.approx(0.0, abs=1e-8)
        assert rep.per_copy_exponents == pytest.approx([1.0, 0.5], abs=1e-6)
        assert all(r.nonentangling_verdict == "heuristic-pass" for r in rep.reports)

    def test_pure_target_unbounded(self):
        rep = distillation_exponent(max_entangled(1), 1, 1)
        assert rep.target_unbounded and rep.single_letter == math.inf

    def test_werner_one_copy(self):
        rep = distillation_exponent(werner_state(0.8), 2, 1)
        assert rep.single_letter == pytest.approx(0.321928, abs=1e-5)
        r = rep.reports[0]
        assert r.nonentangling_verdict == "heuristic-pass"
        assert 0 <= r.fidelity <= 1
        assert rep.per_copy_exponents[0] <= rep.upper[0] + 1e-7

    @pytest.mark.slow
    def test_isotropic_two_copies(self):
        rep = distillation_exponent(isotropic_state(0.8), 2, 2, CompositeConfig())
        for r, a, u in zip(rep.reports, rep.per_copy_exponents, rep.upper):
            assert r.nonentangling_verdict == "heuristic-pass"
            assert a <= u + 1e-7

    def test_validation(self):
        with pytest.raises(ValueError):
            distillation_exponent(werner_state(0.8), 3, 1)
        with pytest.raises(ValueError):
            distillation_exponent(werner_state(0.8), 1, 4)
        with pytest.raises(DomainError):
            distillation_exponent(DensityOperator.maximally_mixed((2, 3)), 1, 1)
