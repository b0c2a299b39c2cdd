"""Reverse relative entropy of entanglement ``min_{sigma in S} D(sigma||rho)``.

The minimisation runs Frank--Wolfe over the convex hull of product pure
states, using the seesaw as linear minimisation oracle and pairwise
(away-to-toward) corrections over the active vertex set.  Every step uses an
exact line search, so the objective never increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .divergences import DivergenceValue
from .operators import (
    KERNEL_TOL,
    Bipartition,
    DensityOperator,
    DimensionError,
    partial_transpose,
    permute_factors,
    spectral_decompose,
    werner_projectors,
)
from .separability import (
    ProductVector,
    SeesawConfig,
    SeparableEnsemble,
    from_cut_order,
    lmo_product,
    to_cut_order,
)

LOG_FLOOR = 1e-30
STEP_CAP = 1.0 - 1e-9
PENALTY = 1e10


@dataclass(frozen=True)
class FWConfig:
    """Frank--Wolfe settings.

    ``gap_tol`` is the stopping threshold on the Frank--Wolfe gap in bits;
    ``inner_steps`` bounds the pairwise corrections made between oracle calls.
    On a full-rank input whose cut has ``dA * dB <= ppt_polish``, Frank--Wolfe
    runs at most ``polish_after`` iterations and, if not yet converged, a
    barrier method over PPT states finishes the job.  PPT equals separable for
    ``dA * dB <= 6``; 0 disables the polish and 6 extends it to qubit-qutrit
    cuts.
    """

    max_iters: int = 300
    gap_tol: float = 1e-5
    inner_steps: int = 30
    line_search_steps: int = 40
    restarts: int = 16
    seesaw_iters: int = 200
    support_tol: float = 1e-6
    ppt_polish: int = 4
    polish_after: int = 60
    seed: int = 0

    def seesaw(self, k: int = 0, restarts: int | None = None) -> SeesawConfig:
        return SeesawConfig(restarts=restarts or self.restarts, max_iters=self.seesaw_iters,
                            improvement_tol=1e-11, seed=self.seed * 1_000_003 + k)


@dataclass
class FrankWolfeTrace:
    iterates: list = field(default_factory=list)  # (objective, lower bound, step)
    final_ensemble: SeparableEnsemble | None = None
    converged: bool = False
    polished_state: DensityOperator | None = None  # set when the PPT polish improved on the ensemble

    @property
    def objective(self) -> float:
        return self.iterates[-1][0] if self.iterates else math.nan

    @property
    def lower_bound(self) -> float:
        return self.iterates[-1][1] if self.iterates else math.nan

    @property
    def gap(self) -> float:
        return self.objective - self.lower_bound


def _eig_log(sig: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(sig)
    return w, v


def _log2_floor(sig: np.ndarray) -> np.ndarray:
    w, v = _eig_log(sig)
    return (v * np.log2(np.maximum(w, LOG_FLOOR))) @ v.conj().T


class _Problem:
    """``f(sigma) = D(sigma||rho)`` on the cut-ordered space."""

    def __init__(self, rho_cut: np.ndarray, proj: np.ndarray | None):
        w, v = spectral_decompose(rho_cut)
        keep = w > KERNEL_TOL * float(w.max())
        self.log_rho = (v[:, keep] * np.log2(w[keep])) @ v[:, keep].conj().T
        self.proj = proj

    def value(self, sig: np.ndarray) -> float:
        w = np.linalg.eigvalsh(sig)
        w = w[w > 0]
        return float(np.sum(w * np.log2(w)) - np.real(np.vdot(self.log_rho, sig)))

    def grad(self, sig: np.ndarray) -> np.ndarray:
        return _log2_floor(sig) - self.log_rho

    def slope(self, sig: np.ndarray, d: np.ndarray) -> float:
        return float(np.real(np.vdot(d, self.grad(sig))))


def _line_search(prob: _Problem, sig: np.ndarray, d: np.ndarray, gmax: float, steps: int) -> float:
    """Minimise ``t -> f(sig + t d)`` on ``[0, gmax]`` via the root of its monotone derivative.

    Brent's method replaces plain bisection; ``steps`` caps the iterations.
    """
    s0 = prob.slope(sig, d)
    if s0 >= 0:
        return 0.0
    if prob.slope(sig + gmax * d, d) <= 0:
        return gmax
    t, info = brentq(lambda t: prob.slope(sig + t * d, d), 0.0, gmax, xtol=1e-12 * gmax,
                     rtol=4 * np.finfo(float).eps, maxiter=max(steps, 1), full_output=True, disp=False)
    return float(t)


class _ActiveSet:
    def __init__(self, vecs: list[np.ndarray], weights: list[float]):
        self.vecs = list(vecs)
        self.w = list(weights)

    def matrix(self) -> np.ndarray:
        v = np.array(self.vecs)
        return (v.T * np.array(self.w)) @ v.conj()

    def index_of(self, x: np.ndarray) -> int | None:
        for i, v in enumerate(self.vecs):
            if abs(np.vdot(v, x)) ** 2 > 1 - 1e-12:
                return i
        return None

    def add(self, x: np.ndarray) -> int:
        i = self.index_of(x)
        if i is None:
            self.vecs.append(x)
            self.w.append(0.0)
            i = len(self.vecs) - 1
        return i

    def prune(self):
        keep = [i for i, w in enumerate(self.w) if w > 1e-15]
        self.vecs = [self.vecs[i] for i in keep]
        tot = sum(self.w[i] for i in keep)
        self.w = [self.w[i] / tot for i in keep]

    def scores(self, g: np.ndarray) -> np.ndarray:
        v = np.array(self.vecs)
        return np.real(np.einsum("ki,ij,kj->k", v.conj(), g, v))


def _pairwise(prob, act: _ActiveSet, sig, g, toward: int, away: int, cfg) -> tuple[np.ndarray, float]:
    vt, va = act.vecs[toward], act.vecs[away]
    d = np.outer(vt, vt.conj()) - np.outer(va, va.conj())
    gam = _line_search(prob, sig, d, act.w[away], cfg.line_search_steps)
    act.w[toward] += gam
    act.w[away] -= gam
    return sig + gam * d, gam


def _rank_one(x: np.ndarray, da: int, db: int) -> np.ndarray:
    u, s, vh = np.linalg.svd(x.reshape(da, db))
    return np.kron(u[:, 0], vh[0])


def _into_support(x: np.ndarray, proj: np.ndarray, da: int, db: int, sweeps: int = 100) -> np.ndarray:
    """Alternate projections onto the support and onto product vectors."""
    for _ in range(sweeps):
        y = proj @ x
        if np.linalg.norm(y - x) <= 1e-13:
            break
        x = _rank_one(y / np.linalg.norm(y), da, db)
    return x


def _product_vectors(vecs, da, db):
    out = []
    for x in vecs:
        u, s, vh = np.linalg.svd(x.reshape(da, db))
        out.append(ProductVector(u[:, 0] / np.linalg.norm(u[:, 0]), vh[0] / np.linalg.norm(vh[0])))
    return tuple(out)


def _frank_wolfe(prob: _Problem, act: _ActiveSet, da: int, db: int, cfg: FWConfig,
                 penalty: np.ndarray | None, trace: FrankWolfeTrace, iters: int):
    sig = act.matrix()
    f = prob.value(sig)
    for it in range(iters):
        g = prob.grad(sig)
        g_lmo = g if penalty is None else g + penalty
        vec, _ = lmo_product(g_lmo, (da, db), Bipartition((0,), (1,)), "min", cfg.seesaw(it))
        x = vec.cut_vector()
        sc = act.scores(g)
        val = float(np.real(np.vdot(x, g @ x)))
        gap = float(np.dot(act.w, sc)) - val
        trace.iterates.append((f, f - max(gap, 0.0), 0.0))
        if gap <= cfg.gap_tol:
            trace.converged = True
            break
        t = act.add(x)
        sc = np.append(sc, val) if t == len(sc) else sc
        a = int(np.argmax(np.where(np.array(act.w) > 0, sc, -np.inf)))
        # pairwise step toward the oracle vertex, or a plain FW step if that is better
        if a != t:
            sig, gam = _pairwise(prob, act, sig, g, t, a, cfg)
        else:
            gam = 0.0
        if gam == 0.0:
            d = np.outer(x, x.conj()) - sig
            gam = _line_search(prob, sig, d, STEP_CAP, cfg.line_search_steps)
            act.w = [w * (1 - gam) for w in act.w]
            act.w[t] += gam
            sig = sig + gam * d
        act.prune()
        # corrections inside the active set
        for _ in range(cfg.inner_steps):
            g = prob.grad(sig)
            sc = act.scores(g)
            lo, hi = int(np.argmin(sc)), int(np.argmax(sc))
            if sc[hi] - sc[lo] <= 0.1 * cfg.gap_tol or lo == hi:
                break
            sig, _ = _pairwise(prob, act, sig, g, lo, hi, cfg)
            act.prune()
        f_new = prob.value(sig)
        f = f_new
        trace.iterates[-1] = (trace.iterates[-1][0], trace.iterates[-1][1], gam)
    else:
        g = prob.grad(sig)
        sc = act.scores(g)
        g_lmo = g if penalty is None else g + penalty
        vec, _ = lmo_product(g_lmo, (da, db), Bipartition((0,), (1,)), "min", cfg.seesaw(iters))
        x = vec.cut_vector()
        gap = float(np.dot(act.w, sc)) - float(np.real(np.vdot(x, g @ x)))
        trace.iterates.append((f, f - max(gap, 0.0), 0.0))
    return sig


# -- PPT barrier polish (PPT equals separable for 2x2 and 2x3) ------------------------

def _herm_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the traceless Hermitian ``n x n`` matrices."""
    out = []
    r = 1 / math.sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = r
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = -1j * r, 1j * r
            out.append(e)
    for k in range(1, n):
        v = np.zeros(n)
        v[:k], v[k] = 1.0, -k
        out.append(np.diag(v / np.linalg.norm(v)).astype(complex))
    return np.array(out)


def _gram(x: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """``G[j, k] = Re Tr[x_j (kern * x_k)]`` for matrices written in an eigenbasis."""
    return np.real(np.einsum("jba,ab,kab->jk", x, kern, x))


def _ppt_polish(prob: _Problem, sig: np.ndarray, da: int, db: int, t0: float,
                tol: float = 1e-9, max_newton: int = 300) -> tuple[np.ndarray, float]:
    """Barrier path following for ``min D(sigma||rho)`` over PPT states.

    Minimises ``t f(sigma) - logdet sigma - logdet sigma^T_B`` by damped Newton
    steps in the traceless Hermitian directions, increasing ``t`` until the
    central-path bound ``2 d / t`` drops below ``tol``.  Returns the final
    state and ``t``.
    """
    n = da * db
    dims = (da, db)
    basis = _herm_basis(n)
    basis_pt = np.array([partial_transpose(b, dims) for b in basis])
    nu = 2 * n
    sig = (1 - 1e-6) * sig + 1e-6 * np.eye(n) / n

    def merit(x, t):
        w = np.linalg.eigvalsh(x)
        wp = np.linalg.eigvalsh(partial_transpose(x, dims))
        if w[0] <= 0 or wp[0] <= 0:
            return math.inf
        return t * prob.value(x) - float(np.sum(np.log(w)) + np.sum(np.log(wp)))

    t = t0
    for _ in range(max_newton):
        w, u = np.linalg.eigh(sig)
        wp, up = np.linalg.eigh(partial_transpose(sig, dims))
        inv = (u / w) @ u.conj().T
        pinv = (up / wp) @ up.conj().T
        g = t * prob.grad(sig) - inv - partial_transpose(pinv, dims)
        gv = np.real(np.einsum("kij,ji->k", basis, g))
        lw = np.log(w)
        dw = w[:, None] - w[None, :]
        same = np.abs(dw) <= 1e-14 * w[:, None]
        kern = np.where(same, 1 / w[:, None], (lw[:, None] - lw[None, :]) / np.where(same, 1.0, dw))
        bu = np.einsum("ia,kij,jb->kab", u.conj(), basis, u)
        bp = np.einsum("ia,kij,jb->kab", up.conj(), basis_pt, up)
        h = (t / math.log(2)) * _gram(bu, kern) + _gram(bu, 1 / np.outer(w, w)) + _gram(bp, 1 / np.outer(wp, wp))
        try:
            dc = -np.linalg.solve(h, gv)
        except np.linalg.LinAlgError:
            dc = -np.linalg.lstsq(h, gv, rcond=None)[0]
        dec = -float(gv @ dc)
        if dec / 2 <= 1e-10:
            if nu / t <= tol:
                break
            t *= 8
            continue
        d = np.einsum("k,kij->ij", dc, basis)
        m0 = merit(sig, t)
        step = 1.0
        while step > 1e-12:
            cand = sig + step * d
            if merit(cand, t) <= m0 - 0.25 * step * dec:
                break
            step *= 0.5
        else:
            if nu / t <= tol:
                break
            t *= 8
            continue
        sig = cand
    return sig, t


def _polish_into_trace(prob, sig, da, db, cfg, trace, dims, cut):
    f_fw = trace.objective
    t0 = 2 * da * db / max(trace.gap, 1e-8)
    pol, _ = _ppt_polish(prob, sig, da, db, t0)
    f_pol = prob.value(pol)
    if not f_pol < f_fw:
        return
    g = prob.grad(pol)
    vec, _ = lmo_product(g, (da, db), Bipartition((0,), (1,)), "min", cfg.seesaw(cfg.max_iters + 2))
    x = vec.cut_vector()
    gap = float(np.real(np.vdot(g, pol))) - float(np.real(np.vdot(x, g @ x)))
    trace.iterates.append((f_pol, f_pol - max(gap, 0.0), 0.0))
    trace.polished_state = DensityOperator(from_cut_order(pol, dims, cut), dims)
    trace.converged = gap <= cfg.gap_tol


def reverse_ree(rho: DensityOperator, cut: Bipartition | None = None,
                cfg: FWConfig | None = None) -> tuple[DivergenceValue, FrankWolfeTrace]:
    """``D(S||rho) = min over separable sigma of D(sigma||rho)`` in bits.

    Returns the best objective found together with the optimisation trace.
    ``trace.lower_bound`` equals ``f - gap``; it is a certified bound only if
    the seesaw found the true product minimum of the gradient.
    """
    cfg = cfg or FWConfig()
    dims = rho.dims
    cut = cut or Bipartition.first(max(len(dims) // 2, 1), len(dims))
    da, db = cut.local_dims(dims)
    r = to_cut_order(rho.matrix, dims, cut)
    trace = FrankWolfeTrace()
    w, v = spectral_decompose(r)
    keep = w > KERNEL_TOL * float(w.max())
    full_rank = bool(np.all(keep))
    if full_rank:
        basis = np.eye(da * db, dtype=complex)
        act = _ActiveSet(list(basis), [1.0 / (da * db)] * (da * db))
        prob = _Problem(r, None)
        penalty = None
    else:
        proj = v[:, keep] @ v[:, keep].conj().T
        vec, best = lmo_product(proj, (da, db), Bipartition((0,), (1,)), "max",
                                cfg.seesaw(cfg.max_iters + 1, restarts=max(cfg.restarts, 64)))
        if best < 1 - cfg.support_tol:
            trace.converged = True
            return DivergenceValue(math.inf, {"reason": "no product vector in the support",
                                              "max_support_overlap": best}), trace
        act = _ActiveSet([_into_support(vec.cut_vector(), proj, da, db)], [1.0])
        prob = _Problem(r, proj)
        penalty = PENALTY * (np.eye(da * db) - proj)
    polish = full_rank and da * db <= cfg.ppt_polish
    iters = min(cfg.max_iters, cfg.polish_after) if polish else cfg.max_iters
    sig = _frank_wolfe(prob, act, da, db, cfg, penalty, trace, iters)
    trace.final_ensemble = SeparableEnsemble(np.array(act.w), _product_vectors(act.vecs, da, db), dims, cut)
    if polish and not trace.converged:
        _polish_into_trace(prob, sig, da, db, cfg, trace, dims, cut)
    f = trace.objective
    return DivergenceValue(f, {"lower_bound": trace.lower_bound, "gap": trace.gap,
                               "converged": trace.converged, "lower_bound_kind": "heuristic"}), trace


# -- closed forms on symmetric families ------------------------------------------

def binary_kl(a: float, b: float) -> float:
    """``d(a||b)`` in bits for Bernoulli parameters."""
    out = 0.0
    for x, y in ((a, b), (1 - a, 1 - b)):
        if x > 0:
            if y <= 0:
                return math.inf
            out += x * math.log2(x / y)
    return out


@dataclass(frozen=True)
class SymmetricFamilyPoint:
    family: str
    parameter: float
    d: int = 2

    def __post_init__(self):
        if self.family not in ("werner", "isotropic"):
            raise ValueError("family must be 'werner' or 'isotropic'")
        if not 0.0 <= self.parameter <= 1.0 or self.d < 2:
            raise ValueError("parameter must lie in [0, 1] and d >= 2")

    def reverse_ree(self) -> DivergenceValue:
        if self.family == "werner":
            return werner_reverse_ree(self.parameter, self.d)
        return isotropic_reverse_ree(self.parameter, self.d)


def werner_reverse_ree(delta: float, d: int = 2) -> DivergenceValue:
    """``d(1/2||delta)`` above the separability threshold ``delta = 1/2``."""
    if not 0.0 <= delta <= 1.0 or d < 2:
        raise ValueError("delta must lie in [0, 1] and d >= 2")
    if delta <= 0.5:
        return DivergenceValue(0.0)
    if delta >= 1.0:
        return DivergenceValue(math.inf)
    return DivergenceValue(binary_kl(0.5, delta))


def isotropic_reverse_ree(f: float, d: int = 2) -> DivergenceValue:
    """``d(1/d||f)`` above the separability threshold ``f = 1/d``."""
    if not 0.0 <= f <= 1.0 or d < 2:
        raise ValueError("f must lie in [0, 1] and d >= 2")
    if f <= 1.0 / d:
        return DivergenceValue(0.0)
    if f >= 1.0:
        return DivergenceValue(math.inf)
    return DivergenceValue(binary_kl(1.0 / d, f))


# -- additivity -------------------------------------------------------------------

@dataclass(frozen=True)
class AdditivityReport:
    lhs: float
    rhs: float
    parts: tuple[float, float]
    converged: bool

    @property
    def gap(self) -> float:
        return self.lhs - self.rhs


def joint_state(rho: DensityOperator, omega: DensityOperator) -> DensityOperator:
    """``rho (x) omega`` regrouped as ``A A' : B B'``."""
    if len(rho.dims) != 2 or len(omega.dims) != 2:
        raise DimensionError("additivity check expects bipartite states")
    m = np.kron(rho.matrix, omega.matrix)
    dims = rho.dims + omega.dims
    m = permute_factors(m, dims, (0, 2, 1, 3))
    return DensityOperator(m, (dims[0], dims[2], dims[1], dims[3]))


def additivity_check(rho: DensityOperator, omega: DensityOperator,
                     cfg: FWConfig | None = None) -> AdditivityReport:
    """Compare ``D(S||rho (x) omega)`` on the joint cut with ``D(S||rho) + D(S||omega)``."""
    cfg = cfg or FWConfig()
    a, ta = reverse_ree(rho, cfg=cfg)
    b, tb = reverse_ree(omega, cfg=cfg)
    j, tj = reverse_ree(joint_state(rho, omega), Bipartition((0, 1), (2, 3)), cfg)
    return AdditivityReport(j.bits, a.bits + b.bits, (a.bits, b.bits),
                            ta.converged and tb.converged and tj.converged)


# -- reverse Renyi of the antisymmetric Werner state --------------------------------

def antisymmetric_pair_overlap(d: int, cfg: SeesawConfig | None = None) -> float:
    """Best separable value of ``Tr[(Q1 (x) Q1) sigma]`` on the ``AA':BB'`` cut."""
    _, q1 = werner_projectors(d)
    g = np.kron(q1, q1)  # factors A B A' B'
    cfg = cfg or SeesawConfig(restarts=256)
    return lmo_product(g, (d,) * 4, Bipartition((0, 2), (1, 3)), "max", cfg)[1]


def reverse_renyi_werner(alpha: float, d: int = 2, n: int = 1,
                         cfg: SeesawConfig | None = None) -> DivergenceValue:
    """``D_alpha(S||rho_1^(x)n) = alpha/(1-alpha) * (-log2 max_sigma P_1^n)`` for ``n`` in {1, 2}.

    For ``n = 1`` the maximum is the separability threshold ``1/2``.  For
    ``n = 2`` it is found by the seesaw, so the value is an upper bound.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if d < 2:
        raise ValueError("d must be at least 2")
    if n == 1:
        p = 0.5
    elif n == 2:
        p = antisymmetric_pair_overlap(d, cfg)
    else:
        raise ValueError("only n = 1 and n = 2 are supported")
    return DivergenceValue(alpha / (1 - alpha) * -math.log2(p), {"p_max": p, "n": n})


__all__ = [
    "FWConfig",
    "FrankWolfeTrace",
    "SymmetricFamilyPoint",
    "AdditivityReport",
    "reverse_ree",
    "binary_kl",
    "werner_reverse_ree",
    "isotropic_reverse_ree",
    "joint_state",
    "additivity_check",
    "antisymmetric_pair_overlap",
    "reverse_renyi_werner",
]
