"""Two-argument divergences in bits.

Arguments may be :class:`~revree.operators.DensityOperator` instances, square
arrays, or 1-D probability vectors (embedded as diagonal matrices).  Infinite
values are returned as ``math.inf`` exactly, never as a large float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .operators import (
    KERNEL_TOL,
    DensityOperator,
    DimensionError,
    as_hermitian,
    log2m,
    matrix_function,
    spectral_decompose,
)

NEG_TOL = 1e-9


@dataclass(frozen=True)
class DivergenceValue:
    """A divergence in bits, possibly ``inf``, with an optional certificate."""

    bits: float
    certificate: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        b = float(self.bits)
        if math.isnan(b):
            raise ValueError("divergence is NaN")
        if b < 0:
            if b < -NEG_TOL:
                raise ValueError(f"divergence {b!r} is negative beyond tolerance")
            b = 0.0
        object.__setattr__(self, "bits", b)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.bits)

    def __float__(self):
        return self.bits


def _op(x) -> np.ndarray:
    if isinstance(x, DensityOperator):
        return x.matrix
    a = np.asarray(x)
    if a.ndim == 1:
        return np.diag(a.astype(complex))
    return as_hermitian(a)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x, y = _op(a), _op(b)
    if x.shape != y.shape:
        raise DimensionError(f"operands have shapes {x.shape} and {y.shape}")
    return x, y


def _kernel_weight(x: np.ndarray, y: np.ndarray, kernel_tol: float) -> float:
    """``Tr[x P]`` where ``P`` projects onto the kernel of ``y``."""
    w, v = spectral_decompose(y)
    ker = v[:, w <= kernel_tol * float(np.max(np.abs(w)))]
    return float(np.real(np.trace(ker.conj().T @ x @ ker)))


def umegaki(rho, sigma, kernel_tol: float = KERNEL_TOL) -> DivergenceValue:
    """``D(rho||sigma) = Tr rho (log rho - log sigma)``; ``inf`` unless ``supp rho <= supp sigma``."""
    r, s = _pair(rho, sigma)
    if _kernel_weight(r, s, kernel_tol) > kernel_tol:
        return DivergenceValue(math.inf)
    val = np.trace(r @ (log2m(r, kernel_tol) - log2m(s, kernel_tol))).real
    return DivergenceValue(float(val))


def entropy(rho) -> float:
    """von Neumann entropy in bits."""
    w, _ = spectral_decompose(_op(rho))
    w = w[w > KERNEL_TOL * max(w.max(), 1e-300)]
    return float(-np.sum(w * np.log2(w)))


def _power(x: np.ndarray, a: float, kernel_tol: float) -> np.ndarray:
    return matrix_function(x, lambda w: np.clip(w, 0, None) ** a, kernel_tol=kernel_tol, kernel_value=0.0)


def petz_renyi(alpha: float, rho, sigma, kernel_tol: float = KERNEL_TOL) -> DivergenceValue:
    """Petz--Renyi ``D_alpha(rho||sigma) = log Tr[rho^alpha sigma^(1-alpha)] / (alpha - 1)``, alpha in (0, 1).

    Tends to :func:`umegaki` as ``alpha -> 1^-``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    r, s = _pair(rho, sigma)
    q = float(np.trace(_power(r, alpha, kernel_tol) @ _power(s, 1 - alpha, kernel_tol)).real)
    if q <= 1e-300:
        return DivergenceValue(math.inf)
    return DivergenceValue(math.log2(q) / (alpha - 1))


def dmax(sigma, rho, kernel_tol: float = KERNEL_TOL) -> DivergenceValue:
    """``D_max(sigma||rho)``: log of the least ``mu`` with ``sigma <= mu rho``."""
    s, r = _pair(sigma, rho)
    if _kernel_weight(s, r, kernel_tol) > kernel_tol:
        return DivergenceValue(math.inf)
    w, v = spectral_decompose(r)
    keep = w > kernel_tol * float(np.max(np.abs(w)))
    vk = v[:, keep] / np.sqrt(w[keep])
    lam = float(np.linalg.eigvalsh(vk.conj().T @ s @ vk)[-1])
    return DivergenceValue(math.log2(lam), {"mu": lam})


# -- classical smooth max-relative entropy -------------------------------------

def _prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("expected a normalised probability vector")
    return np.clip(p, 0.0, None)


def _excess(p: np.ndarray, q: np.ndarray, mu: float) -> float:
    return float(np.sum(np.clip(p - mu * q, 0.0, None)))


def dmax_smooth_classical(eps: float, p, q) -> DivergenceValue:
    """Smooth max-relative entropy ``D_max^eps(p||q)`` over the trace-distance ball.

    The optimum is ``log max(1, mu*)`` where ``mu*`` is the least root of the
    convex piecewise-linear ``h(mu) = sum_x (p(x) - mu q(x))_+ <= eps``; it is
    located exactly by walking the likelihood-ratio breakpoints.  The removed
    mass is always re-placeable below ``mu q`` once ``mu >= 1``.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    p, q = _prob(p), _prob(q)
    if p.shape != q.shape:
        raise DimensionError("probability vectors of different length")
    zero = q <= 0.0
    stuck = float(p[zero].sum())
    if stuck > eps + 1e-15:
        return DivergenceValue(math.inf, {"unremovable_mass": stuck})
    pos = ~zero & (p > 0)
    ratios = p[pos] / q[pos]
    order = np.argsort(-ratios, kind="stable")
    r, pp, qq = ratios[order], p[pos][order], q[pos][order]
    cp = np.concatenate([[0.0], np.cumsum(pp)])
    cq = np.concatenate([[0.0], np.cumsum(qq)])
    mu = 0.0
    for k in range(1, len(r) + 1):
        # on [r[k], r[k-1]] the active set is the top k ratios
        lo = r[k] if k < len(r) else 0.0
        h_lo = cp[k] - lo * cq[k] + stuck
        if h_lo > eps:
            mu = (cp[k] + stuck - eps) / cq[k]
            break
    mu_star = max(mu, 1.0)
    return DivergenceValue(math.log2(mu_star), {"mu": mu_star, "excess": _excess(p, q, mu_star) + stuck})


def dmax_smooth_classical_lp(eps: float, p, q) -> DivergenceValue:
    """Linear-programming oracle for :func:`dmax_smooth_classical`.

    Variables ``(p~, mu, s)``: minimise ``mu`` subject to ``p~ <= mu q``,
    ``|p~ - p| <= s``, ``sum s <= 2 eps``, ``sum p~ = 1``.
    """
    p, q = _prob(p), _prob(q)
    k = len(p)
    n = 2 * k + 1
    c = np.zeros(n)
    c[k] = 1.0
    rows, rhs = [], []
    for x in range(k):
        r = np.zeros(n); r[x] = 1.0; r[k] = -q[x]; rows.append(r); rhs.append(0.0)
        r = np.zeros(n); r[x] = 1.0; r[k + 1 + x] = -1.0; rows.append(r); rhs.append(p[x])
        r = np.zeros(n); r[x] = -1.0; r[k + 1 + x] = -1.0; rows.append(r); rhs.append(-p[x])
    r = np.zeros(n); r[k + 1:] = 1.0; rows.append(r); rhs.append(2 * eps)
    a_eq = np.zeros((1, n)); a_eq[0, :k] = 1.0
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        return DivergenceValue(math.inf)
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return DivergenceValue(math.log2(max(res.fun, 1.0)), {"mu": res.fun})


# -- hypothesis testing ---------------------------------------------------------

@dataclass(frozen=True)
class NeymanPearsonTest:
    """``M = P_+(sigma - t rho) + w P_0(sigma - t rho)`` with its dual certificate."""

    effect: np.ndarray
    threshold: float
    fractional_weight: float
    primal: float
    dual: float

    @property
    def gap(self) -> float:
        return self.primal - self.dual


def _np_split(sigma, rho, t, zero_tol):
    w, v = spectral_decompose(sigma - t * rho)
    # relative to the inputs, not to sigma - t rho, which may vanish identically
    scale = max(float(np.max(np.abs(np.linalg.eigvalsh(sigma)))),
                t * float(np.max(np.abs(np.linalg.eigvalsh(rho)))), 1e-300)
    pos = w > zero_tol * scale
    zer = np.abs(w) <= zero_tol * scale
    pp = v[:, pos] @ v[:, pos].conj().T
    p0 = v[:, zer] @ v[:, zer].conj().T
    return pp, p0


def _dual_value(eps, sigma, rho, t) -> float:
    """Lagrange dual ``lambda (1 - eps) - Tr(lambda sigma - rho)_+`` at ``lambda = 1/t``."""
    lam = 1.0 / t
    w, _ = spectral_decompose(lam * sigma - rho)
    return lam * (1 - eps) - float(np.sum(w[w > 0]))


def dh_two_state(eps: float, sigma, rho, rel_tol: float = 1e-12,
                 zero_tol: float = 1e-11) -> tuple[DivergenceValue, NeymanPearsonTest]:
    """Hypothesis-testing relative entropy ``D_H^eps(sigma||rho)``.

    ``-log min{Tr M rho : 0 <= M <= 1, Tr M sigma >= 1 - eps}``, solved by
    bisection on the threshold ``t`` of the Neyman--Pearson family.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps >= 1:
        return DivergenceValue(math.inf), NeymanPearsonTest(np.zeros_like(_op(rho)), math.inf, 0.0, 0.0, 0.0)
    s, r = _pair(sigma, rho)
    target = 1.0 - eps

    # perfect test: project onto ker(rho)
    w, v = spectral_decompose(r)
    ker = v[:, w <= KERNEL_TOL * float(np.max(np.abs(w)))]
    pk = ker @ ker.conj().T
    if np.trace(pk @ s).real >= target - 1e-14:
        return (DivergenceValue(math.inf, {"test": "kernel projector"}),
                NeymanPearsonTest(pk, math.inf, 0.0, 0.0, 0.0))

    def evaluate(t):
        pp, p0 = _np_split(s, r, t, zero_tol)
        lo = float(np.trace(pp @ s).real)
        return pp, p0, lo, lo + float(np.trace(p0 @ s).real)

    t_lo, t_hi = 0.0, 1.0
    while evaluate(t_hi)[2] > target:
        t_lo, t_hi = t_hi, 2 * t_hi
        if t_hi > 2.0 ** 400:
            raise RuntimeError("threshold search diverged")
    found = None
    for _ in range(400):
        t = 0.5 * (t_lo + t_hi)
        pp, p0, lo, hi = evaluate(t)
        if lo > target:
            t_lo = t
        elif hi < target:
            t_hi = t
        else:
            found = (t, pp, p0, lo, hi)
            break
        if t_hi - t_lo <= rel_tol * t_hi:
            break
    if found is None:
        # crossing sits inside the bracket; take the feasible side
        t = t_lo if t_lo > 0 else t_hi
        pp, p0, lo, hi = evaluate(t)
        if hi < target:
            t = t_lo
            pp, p0, lo, hi = evaluate(t)
        found = (t, pp, p0, lo, hi)
    t, pp, p0, lo, hi = found
    s0 = hi - lo
    wfrac = 0.0 if s0 <= 0 else min(max((target - lo) / s0, 0.0), 1.0)
    m = pp + wfrac * p0
    primal = float(np.trace(m @ r).real)
    dual = _dual_value(eps, s, r, t) if t > 0 else 0.0
    test = NeymanPearsonTest(m, t, wfrac, primal, dual)
    val = -math.log2(primal) if primal > 0 else math.inf
    return DivergenceValue(val, {"threshold": t, "weight": wfrac, "gap": primal - dual}), test


def dh_classical(eps: float, p, q) -> DivergenceValue:
    """Exact classical ``D_H^eps(p||q)`` by greedy likelihood-ratio filling."""
    p, q = _prob(p), _prob(q)
    target = 1.0 - eps
    if target <= 0:
        return DivergenceValue(math.inf)
    ratio = np.where(q > 0, p / np.where(q > 0, q, 1.0), np.inf)
    order = sorted(range(len(p)), key=lambda x: (-ratio[x], x))
    got, cost = 0.0, 0.0
    for x in order:
        if got >= target:
            break
        if p[x] <= 0:
            continue
        take = min(1.0, (target - got) / p[x])
        got += take * p[x]
        cost += take * q[x]
    return DivergenceValue(-math.log2(cost) if cost > 0 else math.inf)


def dh_classical_lp(eps: float, p, q) -> DivergenceValue:
    """LP oracle: ``min sum a q`` s.t. ``sum a p >= 1 - eps``, ``0 <= a <= 1``."""
    p, q = _prob(p), _prob(q)
    res = linprog(q, A_ub=-p[None, :], b_ub=[-(1 - eps)], bounds=[(0, 1)] * len(p), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return DivergenceValue(-math.log2(res.fun) if res.fun > 0 else math.inf)


# -- pinching -------------------------------------------------------------------

@dataclass(frozen=True)
class PinchingBound:
    lower: float
    upper: float
    pinched: float
    distinct_eigenvalues: int


def pinched_relent_bound(rho_k, sigma, k: int, group_tol: float = 1e-10) -> PinchingBound:
    """Sandwich ``D(rho_k||s) - log|spec s| <= D(P_s(rho_k)||s) <= D(rho_k||s)`` for ``s = sigma^(x)k``.

    ``P_s`` dephases in the eigenspaces of ``s``.
    """
    r, s1 = _op(rho_k), _op(sigma)
    d = s1.shape[0]
    if r.shape[0] != d ** k:
        raise DimensionError(f"rho_k has dimension {r.shape[0]}, expected {d}^{k}")
    w1, v1 = spectral_decompose(s1)
    vals = np.ones(1)
    vecs = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        vals = np.kron(vals, w1)
        vecs = np.kron(vecs, v1)
    s = (vecs * vals) @ vecs.conj().T
    order = np.argsort(vals)
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(vals[i] - vals[groups[-1][0]]) <= group_tol * max(abs(vals[i]), 1e-300):
            groups[-1].append(i)
        else:
            groups.append([i])
    pinched = np.zeros_like(r)
    for g in groups:
        vg = vecs[:, g]
        proj = vg @ vg.conj().T
        pinched += proj @ r @ proj
    upper = umegaki(r, s).bits
    dp = umegaki(pinched, s).bits
    lower = upper - math.log2(len(groups))
    if not (lower - 1e-9 <= dp <= upper + 1e-9):
        raise AssertionError(f"pinching sandwich violated: {lower} <= {dp} <= {upper}")
    return PinchingBound(lower, upper, dp, len(groups))


__all__ = [
    "DivergenceValue",
    "NeymanPearsonTest",
    "PinchingBound",
    "umegaki",
    "entropy",
    "petz_renyi",
    "dmax",
    "dmax_smooth_classical",
    "dmax_smooth_classical_lp",
    "dh_two_state",
    "dh_classical",
    "dh_classical_lp",
    "pinched_relent_bound",
]
