import math

import numpy as np
import pytest

from revree.divergences import umegaki
from revree.operators import (
    Bipartition,
    DensityOperator,
    DimensionError,
    isotropic_state,
    max_entangled,
    partial_trace,
    random_density,
    werner_state,
)
from revree.ree import (
    FWConfig,
    SymmetricFamilyPoint,
    additivity_check,
    antisymmetric_pair_overlap,
    binary_kl,
    isotropic_reverse_ree,
    joint_state,
    reverse_ree,
    reverse_renyi_werner,
    werner_reverse_ree,
)
from revree.separability import ppt_check, random_separable

FAST = FWConfig(max_iters=150, restarts=8)


class TestClosedForms:
    def test_binary_kl(self):
        assert binary_kl(0.5, 0.75) == pytest.approx(0.207519, abs=1e-6)
        assert binary_kl(0.3, 0.3) == 0.0
        assert binary_kl(0.5, 1.0) == math.inf

    def test_werner(self):
        assert werner_reverse_ree(0.75).bits == pytest.approx(0.207519, abs=1e-6)
        assert werner_reverse_ree(0.4).bits == 0.0
        assert werner_reverse_ree(1.0).bits == math.inf

    def test_isotropic(self):
        assert isotropic_reverse_ree(0.8).bits == pytest.approx(binary_kl(0.5, 0.8))
        assert isotropic_reverse_ree(0.3, 3).bits == pytest.approx(0.0)
        assert isotropic_reverse_ree(1.0).bits == math.inf

    def test_family_point(self):
        assert SymmetricFamilyPoint("werner", 0.75).reverse_ree().bits == pytest.approx(0.207519, abs=1e-6)
        with pytest.raises(ValueError):
            SymmetricFamilyPoint("bell", 0.5)
        with pytest.raises(ValueError):
            SymmetricFamilyPoint("werner", 1.5)


class TestFrankWolfe:
    @pytest.mark.parametrize("delta", [0.6, 0.75, 0.9])
    def test_werner(self, delta):
        val, trace = reverse_ree(werner_state(delta), cfg=FAST)
        assert val.bits == pytest.approx(binary_kl(0.5, delta), abs=1e-4)
        assert trace.lower_bound <= val.bits + 1e-12

    @pytest.mark.parametrize("f", [0.6, 0.8])
    def test_isotropic(self, f):
        val, _ = reverse_ree(isotropic_state(f), cfg=FAST)
        assert val.bits == pytest.approx(binary_kl(0.5, f), abs=1e-4)

    def test_isotropic_qutrits(self):
        val, _ = reverse_ree(isotropic_state(0.6, 3), cfg=FAST)
        assert val.bits == pytest.approx(binary_kl(1 / 3, 0.6), abs=1e-4)

    def test_separable_is_zero(self):
        for seed in range(3):
            rho = random_separable((2, 2), 5, seed).density()
            assert reverse_ree(rho, cfg=FAST)[0].bits == pytest.approx(0.0, abs=1e-5)

    def test_pure_entangled_is_infinite(self):
        val, _ = reverse_ree(max_entangled(1), cfg=FAST)
        assert val.bits == math.inf

    def test_pure_product_is_zero(self):
        rho = DensityOperator.diagonal([1.0, 0.0, 0.0, 0.0], (2, 2))
        assert reverse_ree(rho, cfg=FAST)[0].bits == pytest.approx(0.0, abs=1e-8)

    def test_monotone_trace(self, rng):
        rho = random_density((2, 2), rng)
        _, trace = reverse_ree(rho, cfg=FAST)
        values = [it[0] for it in trace.iterates]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_optimum_is_separable_and_consistent(self):
        val, trace = reverse_ree(werner_state(0.8), cfg=FAST)
        sigma = trace.final_ensemble.density()
        assert ppt_check(sigma)[0]
        assert umegaki(sigma, werner_state(0.8)).bits == pytest.approx(val.bits, abs=1e-9)

    def test_upper_bounded_by_product_of_marginals(self, rng):
        rho = random_density((2, 2), rng)
        prod = np.kron(partial_trace(rho, [1]).matrix, partial_trace(rho, [0]).matrix)
        assert reverse_ree(rho, cfg=FAST)[0].bits <= umegaki(prod, rho).bits + 1e-9

    def test_oracle_against_cvxpy(self):
        # PPT equals separable for two qubits, so a quantum-entropy cone program is an exact oracle
        cp = pytest.importorskip("cvxpy")
        rho = random_density((2, 2), np.random.default_rng(3))
        w, v = np.linalg.eigh(rho.matrix)
        log_rho = (v * np.log2(w)) @ v.conj().T
        s = cp.Variable((4, 4), hermitian=True)
        obj = -cp.von_neumann_entr(s) / math.log(2) - cp.real(cp.trace(s @ log_rho))
        prob = cp.Problem(cp.Minimize(obj), [s >> 0, cp.real(cp.trace(s)) == 1,
                                             cp.partial_transpose(s, (2, 2), 1) >> 0])
        try:
            prob.solve(solver="CLARABEL")
        except cp.error.SolverError:
            pytest.skip("no exponential-cone solver")
        assert reverse_ree(rho, cfg=FAST)[0].bits == pytest.approx(prob.value, abs=2e-4)


class TestPPTPolish:
    @pytest.mark.parametrize("seed", [0, 3, 4])
    def test_gap_on_full_rank_qubits(self, seed):
        rho = random_density((2, 2), np.random.default_rng(seed), min_eig=0.02)
        val, trace = reverse_ree(rho)
        assert trace.gap <= 1e-4
        sigma = trace.polished_state
        if sigma is not None:
            assert ppt_check(sigma)[0]
            assert umegaki(sigma, rho).bits == pytest.approx(val.bits, abs=1e-12)
        # never worse than the plain Frank--Wolfe ensemble
        assert val.bits <= umegaki(trace.final_ensemble.density(), rho).bits + 1e-12

    def test_disabled(self):
        rho = random_density((2, 2), np.random.default_rng(0), min_eig=0.02)
        _, trace = reverse_ree(rho, cfg=FWConfig(max_iters=40, ppt_polish=0))
        assert trace.polished_state is None and len(trace.iterates) == 41

    @pytest.mark.parametrize("seed", range(6))
    def test_zero_exactly_on_ppt_inputs(self, seed):
        rng = np.random.default_rng(100 + seed)
        rho = random_density((2, 2), rng, min_eig=0.05 if seed % 2 else 0.01)
        val = reverse_ree(rho)[0].bits
        if ppt_check(rho)[0]:
            assert val <= 1e-5
        else:
            assert val > 1e-12


class TestAdditivity:
    def test_joint_state_ordering(self, rng):
        a = random_density((2, 2), rng)
        b = DensityOperator.maximally_mixed((2, 2))
        j = joint_state(a, b)
        assert j.dims == (2, 2, 2, 2)
        want = np.kron(partial_trace(a, [1]).matrix, np.eye(2) / 2)
        assert np.allclose(partial_trace(j, [2, 3]).matrix, want)

    def test_joint_state_needs_bipartite(self):
        with pytest.raises(DimensionError):
            joint_state(DensityOperator.maximally_mixed((2,)), DensityOperator.maximally_mixed((2, 2)))

    def test_maximally_mixed_pair(self):
        mixed = DensityOperator.maximally_mixed((2, 2))
        rep = additivity_check(mixed, mixed, FAST)
        assert rep.lhs == pytest.approx(0.0, abs=1e-6) and rep.rhs == pytest.approx(0.0, abs=1e-6)

    @pytest.mark.slow
    def test_werner_pair(self):
        rep = additivity_check(werner_state(0.75), werner_state(0.75), FAST)
        assert rep.rhs == pytest.approx(2 * 0.207519, abs=1e-3)
        assert rep.lhs == pytest.approx(2 * 0.207519, abs=1e-3)
        assert rep.gap >= -1e-4


class TestReverseRenyi:
    def test_one_copy_is_one_bit(self):
        assert reverse_renyi_werner(0.5, 3, 1).bits == 1.0
        assert reverse_renyi_werner(0.5, 2, 1).bits == 1.0

    def test_two_copy_strict_subadditivity(self):
        two = reverse_renyi_werner(0.5, 3, 2)
        assert two.certificate["p_max"] == pytest.approx(1 / 3, abs=1e-6)
        assert 2 * reverse_renyi_werner(0.5, 3, 1).bits - two.bits > 0.4

    def test_qubit_pair_overlap(self):
        # the control case: singlet pairs reach only the product-twirl baseline
        assert antisymmetric_pair_overlap(2) == pytest.approx(0.25, abs=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            reverse_renyi_werner(1.0)
        with pytest.raises(ValueError):
            reverse_renyi_werner(0.5, n=3)

    def test_scales_with_alpha(self):
        a = reverse_renyi_werner(0.25, 2, 1).bits
        b = reverse_renyi_werner(0.75, 2, 1).bits
        assert a == pytest.approx(1 / 3) and b == pytest.approx(3.0)


def test_cut_argument():
    rho = werner_state(0.8)
    swapped = reverse_ree(rho, Bipartition((1,), (0,)), FAST)[0].bits
    assert swapped == pytest.approx(binary_kl(0.5, 0.8), abs=1e-4)
