"""Composite hypothesis testing of ``rho^(x)n`` against all separable states.

``D_H^eps(S||rho) = -log2 min{Tr M rho : 0 <= M <= 1, Tr M sigma >= 1 - eps for all sigma in S}``

The infinitely many constraints are generated lazily (cutting planes).  Each
finite subproblem is a small semidefinite program solved by a log-barrier
path-following method on the primal.  The barrier multipliers are turned
into a certified lower bound through the Lagrange dual
``g(mu) = NegTr(rho - sum_i mu_i sigma_i) + (1 - eps) sum_i mu_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar, nnls

from .divergences import DivergenceValue, dh_classical
from .operators import (
    KERNEL_TOL,
    Bipartition,
    DensityOperator,
    copies,
    partial_trace,
    permute_factors,
    spectral_decompose,
    tensor,
)
from .ree import FWConfig, reverse_ree
from .separability import (
    SeesawConfig,
    ppt_check,
    random_separable,
    seesaw_all,
    to_cut_order,
)


SLACK_FLOOR = 1e-13
ROUNDOFF = 1e-12
CENTERING_TOL = 1e-12


@dataclass
class InnerResult:
    """Solution of the finite-constraint subproblem.

    ``primal`` is ``Tr M rho`` for the returned feasible ``effect``; ``dual``
    is the exact dual objective at ``mu`` and lower-bounds the optimum.
    """

    value: DivergenceValue
    effect: np.ndarray
    mu: np.ndarray
    primal: float
    dual: float
    newton_steps: int = 0

    @property
    def gap(self) -> float:
        return self.primal - self.dual


def dual_objective(eps: float, mu: np.ndarray, constraints: np.ndarray, rho: np.ndarray) -> float:
    """``NegTr(rho - sum_i mu_i sigma_i) + (1 - eps) sum_i mu_i``; a lower bound for any ``mu >= 0``."""
    x = rho - np.einsum("k,kij->ij", mu, constraints)
    w = np.linalg.eigvalsh(x)
    return float((1 - eps) * np.sum(mu) + np.sum(w[w < 0]))


def _barrier_solve(eps, sig, rho, tol, max_newton=400):
    """Path-following on ``t Tr M rho - logdet M - logdet(1-M) - sum log(Tr M sigma_i - b)``.

    Newton systems are solved in row-major vec space: ``X -> P X P`` becomes
    ``kron(P, P^T)``, and the whole Hessian is Hermitian positive definite,
    so its solution for a Hermitian right-hand side is Hermitian.
    """
    k, d = len(sig), rho.shape[0]
    b = 1 - eps
    v = sig.reshape(k, d * d)  # Tr[sigma_i X] = vdot(v_i, vec X) for Hermitian sigma_i
    one = np.eye(d)
    m = (1 - eps / 2) * one.astype(complex)
    n_barrier = 2 * d + k
    t = 1.0
    best = None
    steps = 0
    stalled = False

    def slacks(x):
        return np.real(v.conj() @ x.reshape(-1)) - b

    while steps < max_newton and not stalled:
        for _ in range(60):
            pinv = np.linalg.inv(m)
            qinv = np.linalg.inv(one - m)
            s = slacks(m)
            grad = (t * rho - pinv + qinv).reshape(-1) - (v.T * (1 / s)) @ np.ones(k)
            h = np.kron(pinv, pinv.T) + np.kron(qinv, qinv.T) + (v.T / s ** 2) @ v.conj()
            try:
                dx = -cho_solve(cho_factor(h), grad)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(h, grad, rcond=None)[0]
            steps += 1
            dm = dx.reshape(d, d)
            dm = (dm + dm.conj().T) / 2
            dec = float(-np.real(np.vdot(grad, dm.reshape(-1))))
            ds = slacks(dm) + b
            f0 = _barrier_value(m, s, t, rho)
            step = 1.0
            while step > 1e-12:
                m_new = m + step * dm
                s_new = s + step * ds
                if np.all(s_new > SLACK_FLOOR) and _is_interior(m_new):
                    if _barrier_value(m_new, s_new, t, rho) <= f0 - 0.25 * step * dec:
                        break
                step *= 0.5
            else:
                # no progress possible at working precision
                stalled = True
                break
            m = m_new
            if dec / 2 < CENTERING_TOL:
                break
        s = slacks(m)
        if np.any(s <= 0):
            break
        mu = 1 / (t * s)
        primal = float(np.real(np.vdot(rho, m)))
        dual = dual_objective(eps, mu, sig, rho)
        # primal and dual bounds are valid independently, keep the best of each
        if best is None:
            best = [m.copy(), primal, dual, mu]
        if primal < best[1]:
            best[0], best[1] = m.copy(), primal
        if dual > best[2]:
            best[2], best[3] = dual, mu
        if best[1] - best[2] > 0.5 * tol:
            mu_p, dual_p = _polish_dual(eps, sig, rho, m)
            if dual_p > best[2]:
                best[2], best[3] = dual_p, mu_p
        if best[1] - best[2] <= 0.5 * tol or n_barrier / t < 1e-14:
            break
        t *= 16.0
    return best, steps


def _polish_dual(eps, sig, rho, m):
    """Multipliers fitted to the complementarity pattern of a near-optimal ``M``.

    With ``X = rho - sum_i mu_i sigma_i``, optimality forces ``X`` to vanish on
    the eigenvectors where ``M`` is fractional and to be block diagonal between
    the ``M = 0`` and ``M = 1`` eigenspaces.  Those linear conditions are fitted
    by nonnegative least squares over the active constraints, for a few
    eigenvalue cutoffs.  Each candidate is scored by the exact dual, so a poor
    fit costs nothing but time.
    """
    w, u = np.linalg.eigh(m)
    s = np.real(np.einsum("kij,ji->k", sig, m)) - (1 - eps)
    best_mu, best_val = None, -math.inf
    for cutoff in (1e-3, 1e-4, 1e-5, 1e-6):
        u0, u1 = u[:, w < cutoff], u[:, w > 1 - cutoff]
        uf = u[:, (w >= cutoff) & (w <= 1 - cutoff)]
        act = np.where(s < 1e2 * cutoff)[0]
        if len(act) == 0:
            continue

        def blocks(x):
            return np.concatenate([(x @ uf).ravel(), (u1.conj().T @ x @ u0).ravel()])

        a = np.array([blocks(sig[i]) for i in act]).T
        y = blocks(rho)
        if a.shape[0] == 0:
            continue
        try:
            fit, _ = nnls(np.vstack([a.real, a.imag]), np.concatenate([y.real, y.imag]),
                          maxiter=50 * len(act))
        except RuntimeError:
            continue
        mu = np.zeros(len(sig))
        mu[act] = fit
        val = dual_objective(eps, mu, sig, rho)
        if val > best_val:
            best_mu, best_val = mu, val
    return best_mu, best_val


def _is_interior(m: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(m)
    return bool(w[0] > SLACK_FLOOR and w[-1] < 1 - SLACK_FLOOR)


def _barrier_value(m, s, t, rho) -> float:
    w = np.linalg.eigvalsh(m)
    return float(t * np.real(np.vdot(rho, m)) - np.sum(np.log(w)) - np.sum(np.log1p(-w)) - np.sum(np.log(s)))


def inner_dual_solve(eps: float, constraints: Sequence[np.ndarray], rho: np.ndarray,
                     tol: float = 1e-7) -> InnerResult:
    """Solve ``min Tr M rho`` subject to ``0 <= M <= 1`` and ``Tr M sigma_i >= 1 - eps``.

    Parameters
    ----------
    eps : float
        Type-I error budget in ``(0, 1)``.
    constraints : sequence of ndarray
        The operators ``sigma_i``.
    rho : ndarray
    tol : float
        Target primal-dual gap.

    Returns
    -------
    InnerResult
        Strictly feasible test, multipliers ``mu >= 0`` and both bounds.  The
        value is ``-log2`` of the primal; ``certificate["dual_bits"]`` is the
        matching certified upper bound.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly inside (0, 1)")
    if len(constraints) == 0:
        raise ValueError("at least one constraint is required")
    rho = np.asarray(rho, dtype=complex)
    sig = np.array([np.asarray(s, dtype=complex) for s in constraints])
    k = len(sig)

    # perfect test on the kernel of rho
    w, v = spectral_decompose(rho)
    ker = v[:, w <= KERNEL_TOL * float(w.max())]
    if ker.shape[1]:
        pk = ker @ ker.conj().T
        if np.all(np.real(np.einsum("kij,ji->k", sig, pk)) >= 1 - eps - 1e-12):
            return InnerResult(DivergenceValue(math.inf), pk, np.zeros(k), 0.0, 0.0)

    (m, primal, dual, mu), steps = _barrier_solve(eps, sig, rho, tol)
    val = -math.log2(primal) if primal > 0 else math.inf
    cert = {"dual_bits": -math.log2(dual) if dual > 0 else math.inf, "gap": primal - dual}
    return InnerResult(DivergenceValue(val, cert), m, mu, primal, dual, steps)


def inner_lp_oracle(eps: float, constraints: Sequence[np.ndarray], rho: np.ndarray) -> float:
    """LP value ``min Tr M rho`` for diagonal (commuting) inputs, ``M`` diagonal."""
    from scipy.optimize import linprog

    r = np.real(np.diag(rho))
    a = -np.array([np.real(np.diag(s)) for s in constraints])
    res = linprog(r, A_ub=a, b_ub=-(1 - eps) * np.ones(len(constraints)), bounds=[(0, 1)] * len(r),
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(res.message)
    return float(res.fun)


# -- cutting planes ------------------------------------------------------------------------

@dataclass(frozen=True)
class CompositeConfig:
    viol_tol: float = 1e-6
    max_outer: int = 150
    max_constraints: int = 200
    drop_after: int = 5
    batch: int = 4
    restarts: int = 16
    attack_restarts: int = 64
    attack_rounds: int = 4
    seesaw_iters: int = 300
    inner_tol: float = 1e-7
    loose_tol: float = 1e-5
    seed: int = 0

    def seesaw(self, k: int, restarts: int | None = None) -> SeesawConfig:
        return SeesawConfig(restarts=restarts or self.restarts, max_iters=self.seesaw_iters,
                            improvement_tol=1e-12, seed=self.seed * 1_000_003 + k)


@dataclass
class CompositeResult:
    """Outcome of the cutting-plane computation of the composite ``D_H^eps``.

    ``value`` is the optimum of the final finite relaxation.  ``upper_bits``
    is certified (dual of a relaxation); ``lower_bits`` comes from a test that
    survived a fresh seesaw attack, so it is only heuristic.
    """

    value: DivergenceValue
    effect: np.ndarray
    constraints: list
    upper_bits: float
    lower_bits: float
    history: list = field(default_factory=list)
    converged: bool = False
    gap: float = 0.0
    safe_effect: np.ndarray | None = None
    worst_overlap: float = 1.0


def _cut_state(rho: DensityOperator, cut: Bipartition | None):
    dims = rho.dims
    cut = cut or Bipartition.first(max(len(dims) // 2, 1), len(dims))
    da, db = cut.local_dims(dims)
    return to_cut_order(rho.matrix, dims, cut), da, db


def _bits(p: float) -> float:
    return -math.log2(p) if p > 0 else math.inf


def dh_composite(eps: float, rho: DensityOperator, cut: Bipartition | None = None,
                 cfg: CompositeConfig | None = None) -> CompositeResult:
    """Composite ``D_H^eps(S||rho)`` for the separable set on ``cut``.

    ``rho`` is typically ``copies(state, n)`` with the ``A^n:B^n`` cut.
    ``eps = 0`` returns 0 (only ``M = 1`` accepts every separable state).
    """
    cfg = cfg or CompositeConfig()
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    r, da, db = _cut_state(rho, cut)
    d = da * db
    if eps == 0.0:
        one = np.eye(d, dtype=complex)
        return CompositeResult(DivergenceValue(0.0), one, [], 0.0, 0.0, [0.0], True, 0.0, one, 1.0)
    cons = [np.eye(d, dtype=complex) / d]
    idle = [0]
    mu = None
    history = []
    converged = False
    res = None
    tight = False
    for it in range(cfg.max_outer):
        # loose solves while cuts are still being found, a tight one to confirm
        res = inner_dual_solve(eps, cons, r, tol=cfg.inner_tol if tight else cfg.loose_tol)
        mu = res.mu
        history.append(res.value.bits)
        alpha, beta, vals = seesaw_all(res.effect, (da, db), Bipartition((0,), (1,)), "min", cfg.seesaw(it))
        order = np.argsort(vals, kind="stable")
        if vals[order[0]] >= 1 - eps - cfg.viol_tol:
            if tight:
                converged = True
                break
            tight = True
            continue
        tight = False
        added = []
        for j in order:
            if vals[j] >= 1 - eps - cfg.viol_tol or len(added) >= cfg.batch:
                break
            x = np.kron(alpha[j], beta[j])
            if any(abs(np.vdot(y, x)) ** 2 > 1 - 1e-8 for y in added):
                continue
            added.append(x)
        # drop constraints that stayed inactive
        idle = [c + 1 if m_ < 1e-12 else 0 for c, m_ in zip(idle, mu)]
        keep = [i for i in range(len(cons)) if idle[i] < cfg.drop_after or i == 0]
        if len(cons) + len(added) > cfg.max_constraints:
            cons = [cons[i] for i in keep]
            mu = mu[keep]
            idle = [idle[i] for i in keep]
        cons += [np.outer(x, x.conj()) for x in added]
        idle += [0] * len(added)
        mu = np.concatenate([mu, np.zeros(len(added))])
    m = res.effect
    upper = math.inf if res.value.is_infinite else _bits(res.dual)
    # fresh attacks with more restarts and longer runs; mix in the identity until the test survives
    m_safe = m
    worst = math.inf
    for k in range(cfg.attack_rounds):
        att = SeesawConfig(restarts=cfg.attack_restarts, max_iters=max(cfg.seesaw_iters, 1000),
                           improvement_tol=1e-13, seed=cfg.seed * 1_000_003 + 10 ** 6 + k)
        _, _, vals = seesaw_all(m_safe, (da, db), Bipartition((0,), (1,)), "min", att)
        found = float(vals.min())
        if found >= 1 - eps - ROUNDOFF:
            worst = min(worst, found)
            break
        a = ((1 - eps) - found) / max(1 - found, 1e-300)
        m_safe = (1 - a) * m_safe + a * np.eye(d)
        worst = 1 - eps
    lower = _bits(float(np.real(np.trace(m_safe @ r))))
    return CompositeResult(res.value, m, cons, upper, lower, history, converged, res.gap, m_safe, worst)


# -- symmetric reduction oracle ------------------------------------------------------------------

def werner_composite_reduction(eps: float, delta: float, grid: int = 2001) -> float:
    """``min_{delta' <= 1/2} D_H^eps((1-delta', delta') || (1-delta, delta))`` in bits.

    Twirling maps every separable two-qubit state to a Werner state with
    ``delta' <= 1/2`` without increasing ``D_H``, and on Werner states the
    problem is classical.
    """
    q = (1 - delta, delta)

    def f(x):
        return dh_classical(eps, (1 - x, x), q).bits

    xs = np.linspace(0.0, 0.5, grid)
    vals = [f(x) for x in xs]
    i = int(np.argmin(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    best = vals[i]
    if hi > lo:
        r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(r.fun))
    return best


# -- exponent series ----------------------------------------------------------------------------------

@dataclass
class ExponentReport:
    n_values: list
    per_copy_exponents: list
    single_letter: float
    eps: float
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    converged: list = field(default_factory=list)

    def rows(self, quantity: str = "sanov_per_copy"):
        for n, v, lo, up, ok in zip(self.n_values, self.per_copy_exponents, self.lower, self.upper,
                                     self.converged):
            yield quantity, n, v, lo, up, ok


def composite_per_copy(rho: DensityOperator, eps: float, n: int,
                       cfg: CompositeConfig | None = None) -> CompositeResult:
    """``dh_composite`` on ``n`` copies of a bipartite ``rho`` (values are totals, not per copy)."""
    return dh_composite(eps, copies(rho, n), Bipartition.first(n, 2 * n), cfg)


def sanov_series(rho: DensityOperator, eps: float, n_max: int, cfg: CompositeConfig | None = None,
                 fw: FWConfig | None = None) -> ExponentReport:
    """``(1/n) D_H^eps(S||rho^(x)n)`` for ``n = 1..n_max`` next to ``D(S||rho)``."""
    if len(rho.dims) != 2:
        raise ValueError("sanov_series expects a bipartite state")
    limit = 3 if rho.dim <= 4 else 2
    if n_max > limit:
        raise ValueError(f"n_max is limited to {limit} for this dimension")
    target = reverse_ree(rho, cfg=fw)[0].bits
    rep = ExponentReport([], [], target, eps)
    for n in range(1, n_max + 1):
        res = composite_per_copy(rho, eps, n, cfg)
        rep.n_values.append(n)
        rep.per_copy_exponents.append(res.value.bits / n)
        rep.lower.append(res.lower_bits / n)
        rep.upper.append(res.upper_bits / n)
        rep.converged.append(res.converged)
    return rep


# -- axioms -----------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class AxiomRow:
    axiom: str
    status: str
    detail: str


def _audit_quantum(kind: str, seed: int, samples: int) -> list[AxiomRow]:
    rows = []
    dims = (2, 2)

    def member(state: DensityOperator, cut: Bipartition | None = None) -> bool:
        return ppt_check(state, cut)[0]

    states = [random_separable(dims, 3, seed + i).density() for i in range(samples)]
    mix = DensityOperator(0.5 * (states[0].matrix + states[1].matrix), dims)
    rows.append(AxiomRow("1 convex and closed", "pass" if member(mix) else "fail",
                         "mixture of two sampled members stays free"))
    mm = DensityOperator.maximally_mixed(dims)
    rows.append(AxiomRow("2 full-rank member", "pass" if member(mm) else "fail", "maximally mixed state"))
    ok = True
    for a, b in zip(states, states[1:]):
        # A B A' B' regrouped to A A' : B B', then A' B' discarded
        two = DensityOperator(permute_factors(np.kron(a.matrix, b.matrix), (2, 2, 2, 2), (0, 2, 1, 3)),
                              (2, 2, 2, 2))
        ok &= member(two, Bipartition.first(2, 4)) and member(partial_trace(two, (1, 3)))
    rows.append(AxiomRow("3 partial traces", "pass" if ok else "fail",
                         f"{samples - 1} two-copy members reduced to one copy"))
    ok = True
    for a, b in zip(states, states[1:]):
        t = tensor(a, b)
        regrouped = DensityOperator(permute_factors(t.matrix, t.dims, (0, 2, 1, 3)), (2, 2, 2, 2))
        ok &= member(regrouped, Bipartition.first(2, 4))
    rows.append(AxiomRow("4 tensor products", "pass" if ok else "fail",
                         "PPT across AA':BB' (a relaxation of separability at 4x4)"))
    ok = True
    for a, b in zip(states, states[1:]):
        t = tensor(a, b)
        swapped = DensityOperator(permute_factors(t.matrix, t.dims, (2, 3, 0, 1)), t.dims)
        regrouped = DensityOperator(permute_factors(swapped.matrix, swapped.dims, (0, 2, 1, 3)), (2, 2, 2, 2))
        ok &= member(regrouped, Bipartition.first(2, 4))
    rows.append(AxiomRow("5 permutations", "pass" if ok else "fail", "copies exchanged"))
    if kind == "separable":
        rows.append(AxiomRow("6 faithfulness", "asserted by citation",
                             "regularised relative entropy of entanglement is faithful (not computable)"))
    else:
        rows.append(AxiomRow("6 faithfulness", "not audited", "regularised quantity"))
    return rows


def _audit_counterexample(n_max: int) -> list[AxiomRow]:
    from fractions import Fraction
    from itertools import permutations

    from .types_classical import (
        SetPartition,
        counterexample_generators,
        marginal_drop_last,
        partition_generator,
    )

    def canon(dist):
        return {x: Fraction(w) for x, w in dist.items() if w}

    def is_generator(dist, n):
        gens = [canon(g.probs) for g in counterexample_generators(n)]
        return canon(dist) in gens

    rows = [AxiomRow("1 convex and closed", "pass", "convex hull of finitely many generators")]
    rows.append(AxiomRow("2 full-rank member", "pass", "r_1 = (1/2, 1/2) has full support"))
    ok = True
    for n in range(2, n_max + 1):
        for g in counterexample_generators(n):
            ok &= is_generator(marginal_drop_last(g.probs), n - 1)
    rows.append(AxiomRow("3 partial traces", "pass" if ok else "fail",
                         f"last-symbol marginal of every generator, n <= {n_max}"))
    ok = True
    for n in range(1, n_max):
        for m in range(1, n_max - n + 1):
            for g in counterexample_generators(n):
                for h in counterexample_generators(m):
                    blocks = g.partition.blocks + tuple(tuple(i + n for i in b) for b in h.partition.blocks)
                    prod = {x + y: wx * wy for x, wx in g.probs.items() for y, wy in h.probs.items()}
                    ok &= canon(prod) == canon(partition_generator(SetPartition(blocks)))
    rows.append(AxiomRow("4 tensor products", "pass" if ok else "fail",
                         f"products of generators, total length <= {n_max}"))
    ok = True
    for n in range(2, min(n_max, 4) + 1):
        for g in counterexample_generators(n):
            for perm in permutations(range(n)):
                moved = {tuple(x[perm[i]] for i in range(n)): w for x, w in g.probs.items()}
                ok &= is_generator(moved, n)
    rows.append(AxiomRow("5 permutations", "pass" if ok else "fail", "every permutation of every generator"))
    # D_max(e1^n || r_n) = 1 for all n although e1 is not free
    from .divergences import dmax

    vals = []
    for n in range(1, n_max + 1):
        r_n = np.zeros(2 ** n)
        r_n[0] = r_n[-1] = 0.5
        e1 = np.zeros(2 ** n)
        e1[-1] = 1.0
        vals.append(dmax(e1, r_n).bits)
    rows.append(AxiomRow("6 faithfulness", "violated",
                         "e1 is not free but D_max(e1^n||r_n) = " + ", ".join(f"{v:g}" for v in vals)
                         + " so the regularised divergence vanishes"))
    return rows


def axioms_audit(free_set: str, seed: int = 0, samples: int = 6, n_max: int = 5) -> list[AxiomRow]:
    """Spot-check the free-set axioms on sampled members.

    ``free_set`` is one of ``"separable"``, ``"ppt"`` (two-qubit, membership by
    partial transpose) or ``"counterexample"`` (the partition-mixture family).
    """
    if free_set in ("separable", "ppt"):
        return _audit_quantum(free_set, seed, samples)
    if free_set == "counterexample":
        return _audit_counterexample(n_max)
    raise ValueError(f"unknown free set {free_set!r}")


__all__ = [
    "InnerResult",
    "CompositeConfig",
    "CompositeResult",
    "ExponentReport",
    "AxiomRow",
    "dual_objective",
    "inner_dual_solve",
    "inner_lp_oracle",
    "dh_composite",
    "composite_per_copy",
    "werner_composite_reduction",
    "sanov_series",
    "axioms_audit",
]
