"""Dense Hermitian linear algebra on tensor-structured finite-dimensional systems.

Operators are plain complex ``numpy`` arrays.  States additionally carry the
dimensions of their tensor factors (:class:`DensityOperator`), which is what
the partial trace, partial transpose and copy regrouping below operate on.
All logarithms in this package are base 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

#: relative eigenvalue cutoff separating genuine zeros from round-off
KERNEL_TOL = 1e-10
HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10


class DimensionError(ValueError):
    """Operands live on incompatible spaces."""


class DomainError(ValueError):
    """A scalar function was asked for a value outside its domain."""


class SpectralError(RuntimeError):
    """Eigendecomposition failed its reconstruction check."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class StateFileError(ValueError):
    """A state file could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


def as_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``a`` as a complex square array after checking Hermiticity.

    The check is ``max|A - A^dag| <= tol * max(max|A|, 1)``.  The returned
    array is exactly Hermitian (symmetrised).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    err = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if err > tol * max(scale, 1.0):
        raise ValueError(f"matrix is not Hermitian (asymmetry {err:.3e}, scale {scale:.3e})")
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True)
class Bipartition:
    """A split of tensor-factor indices into a left and a right group."""

    left: tuple[int, ...]
    right: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(int(i) for i in self.left))
        object.__setattr__(self, "right", tuple(int(i) for i in self.right))
        if set(self.left) & set(self.right):
            raise ValueError("bipartition groups overlap")
        if not self.left or not self.right:
            raise ValueError("both sides of a bipartition must be non-empty")

    @classmethod
    def first(cls, k: int, n_factors: int) -> "Bipartition":
        """Cut after the first ``k`` of ``n_factors`` factors."""
        return cls(tuple(range(k)), tuple(range(k, n_factors)))

    def check(self, n_factors: int) -> None:
        if sorted(self.left + self.right) != list(range(n_factors)):
            raise DimensionError(f"bipartition {self} does not cover {n_factors} factors")

    def local_dims(self, dims: Sequence[int]) -> tuple[int, int]:
        self.check(len(dims))
        return _prod(dims[i] for i in self.left), _prod(dims[i] for i in self.right)

    @property
    def order(self) -> tuple[int, ...]:
        return self.left + self.right


def _prod(xs: Iterable[int]) -> int:
    return reduce(lambda a, b: a * b, xs, 1)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A validated density matrix together with its tensor-factor dimensions."""

    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        m = as_hermitian(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims) or _prod(dims) != m.shape[0]:
            raise DimensionError(f"factor dims {dims} do not multiply to {m.shape[0]}")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > STATE_TOL:
            raise ValueError(f"trace {tr!r} differs from 1")
        lmin = float(np.linalg.eigvalsh(m)[0])
        if lmin < -STATE_TOL:
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {lmin:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vec, dims: Sequence[int]) -> "DensityOperator":
        v = np.asarray(vec, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), tuple(dims))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityOperator":
        d = _prod(dims)
        return cls(np.eye(d, dtype=complex) / d, tuple(dims))

    @classmethod
    def diagonal(cls, probs, dims: Sequence[int] | None = None) -> "DensityOperator":
        p = np.asarray(probs, dtype=float)
        return cls(np.diag(p).astype(complex), tuple(dims) if dims else (len(p),))

    def __repr__(self):
        return f"DensityOperator(dims={self.dims})"


def spectral_decompose(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    Raises
    ------
    SpectralError
        If ``V diag(w) V^dag`` fails to reproduce ``h`` to within
        ``1e-9 * dim * spectral radius``.
    """
    h = _matrix(h)
    w, v = np.linalg.eigh(h)
    d = h.shape[0]
    radius = float(np.max(np.abs(w))) if d else 0.0
    residual = float(np.max(np.abs((v * w) @ v.conj().T - h))) if d else 0.0
    if residual > 1e-9 * d * max(radius, 1e-300) and residual > 1e-300:
        raise SpectralError("eigendecomposition did not reconstruct its input", residual)
    return w, v


def _matrix(h) -> np.ndarray:
    if isinstance(h, DensityOperator):
        return h.matrix
    return as_hermitian(h)


def matrix_function(h, f: Callable[[np.ndarray], np.ndarray], kernel_tol: float | None = None,
                    kernel_value: float | None = None) -> np.ndarray:
    """Apply ``f`` to the spectrum of ``h``.

    Eigenvalues with ``|lambda| <= kernel_tol * spectral radius`` are treated as
    exact zeros.  If ``kernel_value`` is given they are mapped to it instead of
    ``f(0)`` (``log`` callers pass ``0.0`` to exclude the kernel from the
    support).  A non-finite value of ``f`` on a retained eigenvalue raises
    :class:`DomainError`.
    """
    w, v = spectral_decompose(h)
    w = w.copy()
    kernel = np.zeros_like(w, dtype=bool)
    if kernel_tol is not None:
        radius = float(np.max(np.abs(w))) if w.size else 0.0
        kernel = np.abs(w) <= kernel_tol * radius
        w[kernel] = 0.0
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w), dtype=float)
    if kernel_value is not None:
        fw = np.where(kernel, kernel_value, fw)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        raise DomainError(f"function undefined at eigenvalue {w[bad][0]!r}")
    return (v * fw) @ v.conj().T


def log2m(h, kernel_tol: float = KERNEL_TOL) -> np.ndarray:
    """Matrix base-2 logarithm on the support (kernel mapped to 0)."""
    w, v = spectral_decompose(h)
    radius = float(np.max(np.abs(w)))
    keep = w > kernel_tol * radius
    if np.any(w[~keep] < -kernel_tol * radius):
        raise DomainError(f"log of negative eigenvalue {w.min()!r}")
    fw = np.zeros_like(w)
    fw[keep] = np.log2(w[keep])
    return (v * fw) @ v.conj().T


def support_projector(h, kernel_tol: float = KERNEL_TOL) -> np.ndarray:
    w, v = spectral_decompose(h)
    keep = w > kernel_tol * float(np.max(np.abs(w)))
    vk = v[:, keep]
    return vk @ vk.conj().T


def tensor(a, b):
    """Kronecker product; factor dims are concatenated for density operators."""
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(np.kron(a.matrix, b.matrix), a.dims + b.dims)
    if isinstance(a, DensityOperator) or isinstance(b, DensityOperator):
        raise TypeError("tensor expects two operands of the same kind")
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def tensor_power(a, n: int):
    out = a
    for _ in range(n - 1):
        out = tensor(out, a)
    return out


def permute_factors(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new factor ``k`` is old factor ``perm[k]``."""
    dims = tuple(dims)
    perm = tuple(perm)
    if sorted(perm) != list(range(len(dims))):
        raise DimensionError(f"{perm} is not a permutation of {len(dims)} factors")
    n = len(dims)
    t = np.asarray(mat).reshape(dims + dims)
    t = t.transpose(perm + tuple(n + p for p in perm))
    d = _prod(dims)
    return t.reshape(d, d)


def partial_trace_matrix(mat: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    dims = tuple(dims)
    traced = sorted(set(int(i) for i in traced))
    if any(i < 0 or i >= len(dims) for i in traced):
        raise DimensionError(f"factor index out of range for dims {dims}")
    kept = [i for i in range(len(dims)) if i not in traced]
    if not kept:
        raise DimensionError("partial trace over every factor leaves a scalar")
    n = len(dims)
    t = np.asarray(mat).reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in traced:
        col[i] = row[i]
    out = "".join(row[i] for i in kept) + "".join(col[i] for i in kept)
    r = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = _prod(dims[i] for i in kept)
    return r.reshape(dk, dk)


def partial_trace(rho: DensityOperator, traced: Iterable[int]) -> DensityOperator:
    """Trace out the factors in ``traced``; kept factors stay in original order."""
    traced = sorted(set(traced))
    kept = tuple(d for i, d in enumerate(rho.dims) if i not in traced)
    if not traced:
        return rho
    return DensityOperator(partial_trace_matrix(rho.matrix, rho.dims, traced), kept)


def partial_transpose(h, dims: Sequence[int] | None = None, cut: Bipartition | None = None) -> np.ndarray:
    """Transpose the factors on the right side of ``cut``.

    For a :class:`DensityOperator` the dims are taken from the state and the
    default cut is first factor versus the rest.
    """
    if isinstance(h, DensityOperator):
        dims = h.dims if dims is None else dims
        h = h.matrix
    if dims is None:
        raise DimensionError("factor dims are required")
    dims = tuple(dims)
    cut = cut or Bipartition.first(1, len(dims))
    cut.check(len(dims))
    n = len(dims)
    t = np.asarray(h).reshape(dims + dims)
    axes = list(range(2 * n))
    for i in cut.right:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    return t.transpose(axes).reshape(h.shape)


def regroup_copies(rho_n: DensityOperator, d_a: int, d_b: int, n: int) -> DensityOperator:
    """Reorder ``(A B)^n`` into ``A_1..A_n B_1..B_n``; the cut is then ``Bipartition.first(n, 2n)``."""
    if rho_n.dims != (d_a, d_b) * n:
        raise DimensionError(f"expected factor dims {(d_a, d_b) * n}, got {rho_n.dims}")
    perm = tuple(range(0, 2 * n, 2)) + tuple(range(1, 2 * n, 2))
    m = permute_factors(rho_n.matrix, rho_n.dims, perm)
    return DensityOperator(m, (d_a,) * n + (d_b,) * n)


def copies(rho: DensityOperator, n: int) -> DensityOperator:
    """``rho^{(x)n}`` of a bipartite state, regrouped to the ``A^n:B^n`` cut."""
    if len(rho.dims) != 2:
        raise DimensionError("copies() expects a bipartite state")
    return regroup_copies(tensor_power(rho, n), rho.dims[0], rho.dims[1], n)


def max_entangled(m: int = 1) -> DensityOperator:
    """``Phi_+^{(x)m}`` on ``2m`` qubits, ordered ``A_1..A_m B_1..B_m``."""
    if m < 1:
        raise ValueError("m must be positive")
    d = 2 ** m
    v = np.eye(d, dtype=complex).ravel() / math.sqrt(d)
    return DensityOperator(np.outer(v, v.conj()), (2,) * (2 * m))


def flip_operator(d: int) -> np.ndarray:
    """The swap ``F = sum_ij |ij><ji|`` on ``C^d (x) C^d``."""
    f = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            f[i * d + j, j * d + i] = 1.0
    return f


def werner_projectors(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and antisymmetric projectors ``(1 +/- F)/2``."""
    f = flip_operator(d)
    one = np.eye(d * d, dtype=complex)
    return (one + f) / 2, (one - f) / 2


def werner_state(delta: float, d: int = 2) -> DensityOperator:
    """``(1 - delta) rho_0 + delta rho_1`` with ``rho_a = (1 + (-1)^a F) / (d (d + (-1)^a))``."""
    q0, q1 = werner_projectors(d)
    rho0 = q0 / (d * (d + 1) / 2)
    rho1 = q1 / (d * (d - 1) / 2)
    return DensityOperator((1 - delta) * rho0 + delta * rho1, (d, d))


def isotropic_state(f: float, d: int = 2) -> DensityOperator:
    """``f Phi + (1 - f) (1 - Phi) / (d^2 - 1)`` for the maximally entangled ``Phi``."""
    v = np.eye(d, dtype=complex).ravel() / math.sqrt(d)
    phi = np.outer(v, v.conj())
    rest = (np.eye(d * d) - phi) / (d * d - 1)
    return DensityOperator(f * phi + (1 - f) * rest, (d, d))


def trace_distance(rho, sigma) -> float:
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError("trace distance between operators of different size")
    w, _ = spectral_decompose(a - b)
    return 0.5 * float(np.sum(np.abs(w)))


def fidelity(rho, sigma) -> float:
    """``||sqrt(rho) sqrt(sigma)||_1^2``."""
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise DimensionError("fidelity between operators of different size")
    sa = matrix_function(a, lambda x: np.sqrt(np.clip(x, 0, None)))
    sb = matrix_function(b, lambda x: np.sqrt(np.clip(x, 0, None)))
    s = np.linalg.svd(sa @ sb, compute_uv=False)
    return float(np.sum(s)) ** 2


def negative_part_trace(h) -> float:
    """Sum of the negative eigenvalues of ``h`` (a non-positive number)."""
    w, _ = spectral_decompose(h)
    return float(np.sum(w[w < 0]))


# -- random fixtures ---------------------------------------------------------

def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def random_density(dims: Sequence[int], rng: np.random.Generator, rank: int | None = None,
                   min_eig: float = 0.0) -> DensityOperator:
    """Ginibre-distributed state, optionally mixed with white noise so that
    every eigenvalue is at least ``min_eig``."""
    d = _prod(dims)
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    m = m / np.trace(m).real
    if min_eig > 0:
        lam = float(np.linalg.eigvalsh(m)[0])
        if lam < min_eig:
            # (1-p) m + p/d has min eigenvalue (1-p) lam + p/d
            p = (min_eig - lam) / (1.0 / d - lam)
            m = (1 - p) * m + p * np.eye(d) / d
    return DensityOperator(m, tuple(dims))


# -- state files ---------------------------------------------------------------

def state_to_json(rho: DensityOperator) -> str:
    entries = [[float(z.real), float(z.imag)] for z in rho.matrix.ravel()]
    return json.dumps({"factor_dims": list(rho.dims), "entries": entries})


def save_state(rho: DensityOperator, path) -> None:
    Path(path).write_text(state_to_json(rho) + "\n")


def load_state(path) -> DensityOperator:
    """Read ``{"factor_dims": [...], "entries": [[re, im], ...]}`` (row-major)."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(exc.msg, exc.lineno) from exc
    return state_from_obj(obj)


def state_from_obj(obj) -> DensityOperator:
    if not isinstance(obj, dict) or "factor_dims" not in obj or "entries" not in obj:
        raise StateFileError("expected an object with 'factor_dims' and 'entries'")
    dims = obj["factor_dims"]
    if not isinstance(dims, list) or not all(isinstance(d, int) and d > 0 for d in dims):
        raise StateFileError("'factor_dims' must be a list of positive integers")
    d = _prod(dims)
    entries = obj["entries"]
    if not isinstance(entries, list) or len(entries) != d * d:
        raise StateFileError(f"'entries' must hold {d * d} [re, im] pairs")
    try:
        vals = np.array([complex(float(re), float(im)) for re, im in entries])
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"bad entry: {exc}") from exc
    try:
        return DensityOperator(vals.reshape(d, d), tuple(dims))
    except ValueError as exc:
        raise StateFileError(str(exc)) from exc
