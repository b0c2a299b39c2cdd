"""Optimisation over the separable set of a bipartite system.

The workhorse is a batched seesaw (alternating eigenvector updates) over
product vectors.  Its maxima are feasible points, hence valid lower bounds on
the true separable maximum; exactness is only claimed where cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .operators import (
    Bipartition,
    DensityOperator,
    DimensionError,
    as_hermitian,
    partial_transpose,
    permute_factors,
    werner_projectors,
)

PPT_TOL = -1e-10


@dataclass(frozen=True)
class SeesawConfig:
    restarts: int = 64
    max_iters: int = 500
    improvement_tol: float = 1e-11
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass(frozen=True, eq=False)
class ProductVector:
    """``alpha (x) beta`` with ``alpha`` on the left group and ``beta`` on the right."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=complex).ravel()
        b = np.asarray(self.beta, dtype=complex).ravel()
        if abs(np.linalg.norm(a) - 1) > 1e-12 or abs(np.linalg.norm(b) - 1) > 1e-12:
            raise ValueError("product vector factors must be unit vectors")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def cut_vector(self) -> np.ndarray:
        """The vector in the left-then-right factor ordering."""
        return np.kron(self.alpha, self.beta)


def _inverse(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for k, p in enumerate(perm):
        inv[p] = k
    return tuple(inv)


def to_cut_order(g: np.ndarray, dims: Sequence[int], cut: Bipartition) -> np.ndarray:
    cut.check(len(dims))
    return permute_factors(g, dims, cut.order)


def from_cut_order(g: np.ndarray, dims: Sequence[int], cut: Bipartition) -> np.ndarray:
    cut_dims = tuple(dims[i] for i in cut.order)
    return permute_factors(g, cut_dims, _inverse(cut.order))


@dataclass(frozen=True, eq=False)
class SeparableEnsemble:
    weights: np.ndarray
    members: tuple[ProductVector, ...]
    dims: tuple[int, ...]
    cut: Bipartition

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
            raise ValueError("ensemble weights must be a probability vector")
        object.__setattr__(self, "weights", w)

    def matrix(self) -> np.ndarray:
        vecs = np.array([m.cut_vector() for m in self.members])
        m = (vecs.T * self.weights) @ vecs.conj()
        return from_cut_order(m, self.dims, self.cut)

    def density(self) -> DensityOperator:
        return DensityOperator(self.matrix(), self.dims)


def _default_cut(dims: Sequence[int]) -> Bipartition:
    n = len(dims)
    if n < 2:
        raise DimensionError("a bipartition needs at least two factors")
    return Bipartition.first(n // 2, n)


def _extremal(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Largest eigenvalue and eigenvector for a batch of Hermitian matrices."""
    w, v = np.linalg.eigh(h)
    return w[:, -1], v[:, :, -1]


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def seesaw_all(g, dims: Sequence[int], cut: Bipartition | None = None, sense: str = "max",
               cfg: SeesawConfig | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run every seesaw restart and return ``(alphas, betas, values)`` per restart."""
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    cfg = cfg or SeesawConfig()
    dims = tuple(dims)
    cut = cut or _default_cut(dims)
    da, db = cut.local_dims(dims)
    h = to_cut_order(as_hermitian(g), dims, cut)
    if sense == "min":
        h = -h
    g4 = h.reshape(da, db, da, db)
    # contraction matrices: (alpha* alpha) -> operator on B, (beta* beta) -> operator on A
    to_b = g4.transpose(0, 2, 1, 3).reshape(da * da, db * db)
    to_a = g4.transpose(1, 3, 0, 2).reshape(db * db, da * da)
    rng = np.random.default_rng(cfg.seed)
    r = cfg.restarts
    alpha = _unit_rows(rng.normal(size=(r, da)) + 1j * rng.normal(size=(r, da)))
    val = np.full(r, -np.inf)
    for _ in range(cfg.max_iters):
        wa = (alpha.conj()[:, :, None] * alpha[:, None, :]).reshape(r, da * da)
        _, beta = _extremal((wa @ to_b).reshape(r, db, db))
        wb = (beta.conj()[:, :, None] * beta[:, None, :]).reshape(r, db * db)
        new, alpha = _extremal((wb @ to_a).reshape(r, da, da))
        done = np.all(new - val <= cfg.improvement_tol)
        val = new
        if done:
            break
    return _unit_rows(alpha), _unit_rows(beta), (val if sense == "max" else -val)


def lmo_product(g, dims: Sequence[int], cut: Bipartition | None = None, sense: str = "max",
                cfg: SeesawConfig | None = None) -> tuple[ProductVector, float]:
    """Extremise ``<alpha beta| G |alpha beta>`` over product unit vectors.

    Parameters
    ----------
    g : array_like
        Hermitian operator on the full space with factor dimensions ``dims``.
    cut : Bipartition, optional
        Defaults to the first half of the factors versus the rest.
    sense : {"max", "min"}
    cfg : SeesawConfig, optional

    Returns
    -------
    (ProductVector, float)
        Best vector over all restarts and its value.  Ties are broken in
        favour of the lowest restart index.
    """
    alpha, beta, val = seesaw_all(g, dims, cut, sense, cfg)
    best = int(np.argmax(val) if sense == "max" else np.argmin(val))
    return ProductVector(alpha[best], beta[best]), float(val[best])


def sep_max_overlap(m, dims: Sequence[int], cut: Bipartition | None = None,
                    cfg: SeesawConfig | None = None) -> float:
    """Best separable value of ``Tr[M sigma]`` found by the seesaw."""
    return lmo_product(m, dims, cut, "max", cfg)[1]


def ppt_check(rho, cut: Bipartition | None = None, dims: Sequence[int] | None = None) -> tuple[bool, float]:
    """Positivity of the partial transpose, with the smallest eigenvalue."""
    if isinstance(rho, DensityOperator):
        dims = rho.dims
        rho = rho.matrix
    if dims is None:
        raise DimensionError("factor dims are required")
    cut = cut or _default_cut(dims)
    lam = float(np.linalg.eigvalsh(partial_transpose(rho, dims, cut))[0])
    return lam >= PPT_TOL, lam


def ppt_is_exact(dims: Sequence[int], cut: Bipartition | None = None) -> bool:
    """Whether PPT coincides with separability for this cut (``dA * dB <= 6``)."""
    cut = cut or _default_cut(dims)
    da, db = cut.local_dims(dims)
    return da * db <= 6


def gurvits_barnum_certify(x) -> bool:
    """``||X||_2 <= 1`` certifies that ``1 + X`` is in the separable cone."""
    return float(np.linalg.norm(np.asarray(x))) <= 1.0 + 1e-12


def twirl_werner(h, d: int, n: int) -> np.ndarray:
    """Weights ``P_a = Tr[H (Q_a1 (x) ... (x) Q_an)]`` for ``a`` in ``{0,1}^n``.

    ``H`` acts on ``(C^d (x) C^d)^n`` ordered ``A1 B1 A2 B2 ...``.  The result
    has shape ``(2,) * n``.
    """
    h = np.asarray(h)
    if h.shape != (d ** (2 * n),) * 2:
        raise DimensionError(f"operator of shape {h.shape} does not act on {n} copies of {d}x{d}")
    q = werner_projectors(d)
    out = np.zeros((2,) * n)
    for a in product((0, 1), repeat=n):
        proj = np.ones((1, 1))
        for ai in a:
            proj = np.kron(proj, q[ai])
        out[a] = float(np.real(np.vdot(proj, h)))
    return out


def werner_block_state(a: Sequence[int], d: int) -> np.ndarray:
    """``rho_a1 (x) ... (x) rho_an`` with ``rho_a = Q_a / Tr Q_a``."""
    q = werner_projectors(d)
    out = np.ones((1, 1))
    for ai in a:
        out = np.kron(out, q[ai] / np.trace(q[ai]).real)
    return out


def twirled_operator(weights: np.ndarray, d: int) -> np.ndarray:
    """``sum_a P_a rho_a1 (x) ... (x) rho_an``."""
    n = weights.ndim
    return sum(weights[a] * werner_block_state(a, d) for a in product((0, 1), repeat=n))


def _haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_separable(dims: Sequence[int], k_terms: int, seed: int,
                     cut: Bipartition | None = None) -> SeparableEnsemble:
    """Seeded mixture of ``k_terms`` random product pure states."""
    dims = tuple(dims)
    cut = cut or _default_cut(dims)
    da, db = cut.local_dims(dims)
    rng = np.random.default_rng(seed)
    members = tuple(ProductVector(_haar_vector(da, rng), _haar_vector(db, rng)) for _ in range(k_terms))
    return SeparableEnsemble(rng.dirichlet(np.ones(k_terms)), members, dims, cut)


__all__ = [
    "SeesawConfig",
    "ProductVector",
    "SeparableEnsemble",
    "lmo_product",
    "seesaw_all",
    "sep_max_overlap",
    "ppt_check",
    "ppt_is_exact",
    "gurvits_barnum_certify",
    "twirl_werner",
    "werner_block_state",
    "twirled_operator",
    "random_separable",
    "to_cut_order",
    "from_cut_order",
]
