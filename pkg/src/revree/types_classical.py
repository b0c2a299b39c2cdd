"""Method of types, blurring, and the partition-mixture counterexample family.

Permutation-symmetric distributions on ``X^n`` are stored by the weight they
put on each type class.  The counterexample computations run in exact
rational arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .divergences import dmax_smooth_classical


class PreconditionError(ValueError):
    """An input violates the premise of an inequality being checked."""


# -- types -------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class TypeVector:
    counts: tuple[int, ...]

    def __post_init__(self):
        c = tuple(int(x) for x in self.counts)
        if any(x < 0 for x in c):
            raise ValueError("type counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    def distribution(self) -> np.ndarray:
        n = self.n
        return np.array(self.counts, dtype=float) / n if n else np.zeros(len(self.counts))


@lru_cache(maxsize=None)
def enumerate_types(n: int, k: int) -> tuple[TypeVector, ...]:
    """All compositions of ``n`` into ``k`` non-negative parts, in lexicographic order."""
    if n < 0 or k < 1:
        raise ValueError("need n >= 0 and k >= 1")

    def rec(rest: int, slots: int):
        if slots == 1:
            yield (rest,)
            return
        for c in range(rest + 1):
            for tail in rec(rest - c, slots - 1):
                yield (c,) + tail

    return tuple(TypeVector(c) for c in rec(n, k))


def type_class_size(t: TypeVector) -> int:
    """Multinomial coefficient ``n! / prod_x c_x!``."""
    out = math.factorial(t.n)
    for c in t.counts:
        out //= math.factorial(c)
    return out


def iid_type_weight(p, t: TypeVector) -> float:
    """``p^(x)n(T_t) = |T_t| prod_x p(x)^c_x``."""
    p = np.asarray(p, dtype=float)
    logw = math.log(type_class_size(t))
    for px, c in zip(p, t.counts):
        if c:
            if px <= 0:
                return 0.0
            logw += c * math.log(px)
    return math.exp(logw)


@dataclass(frozen=True, eq=False)
class SymmetricTypeDistribution:
    """A permutation-symmetric distribution on ``X^n`` given by its type-class weights.

    ``weights[i]`` is the mass of the type class ``enumerate_types(n, k)[i]``.
    """

    weights: np.ndarray
    n: int
    alphabet_size: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        types = enumerate_types(self.n, self.alphabet_size)
        if w.shape != (len(types),):
            raise ValueError(f"expected {len(types)} type weights, got shape {w.shape}")
        if np.any(w < -1e-15) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("type weights must form a probability vector")
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))

    @property
    def types(self) -> tuple[TypeVector, ...]:
        return enumerate_types(self.n, self.alphabet_size)

    @classmethod
    def iid(cls, p, n: int) -> "SymmetricTypeDistribution":
        p = np.asarray(p, dtype=float)
        w = np.array([iid_type_weight(p, t) for t in enumerate_types(n, len(p))])
        return cls(w / w.sum(), n, len(p))

    @classmethod
    def point(cls, counts: Sequence[int]) -> "SymmetricTypeDistribution":
        t = TypeVector(tuple(counts))
        types = enumerate_types(t.n, t.alphabet_size)
        w = np.zeros(len(types))
        w[types.index(t)] = 1.0
        return cls(w, t.n, t.alphabet_size)

    def sequence_probability(self, seq: Sequence[int]) -> float:
        """``q(x^n) = weight(t) / |T_t|`` for the type ``t`` of ``seq``."""
        counts = [0] * self.alphabet_size
        for x in seq:
            counts[x] += 1
        t = TypeVector(tuple(counts))
        return float(self.weights[self.types.index(t)]) / type_class_size(t)

    def mass(self, predicate: Callable[[TypeVector], bool]) -> float:
        return float(sum(w for w, t in zip(self.weights, self.types) if predicate(t)))

    def to_json(self) -> str:
        rows = [{"counts": list(t.counts), "w": float(w)} for t, w in zip(self.types, self.weights)]
        return json.dumps({"alphabet_size": self.alphabet_size, "n": self.n, "type_weights": rows})

    @classmethod
    def from_json(cls, text: str) -> "SymmetricTypeDistribution":
        obj = json.loads(text)
        n, k = int(obj["n"]), int(obj["alphabet_size"])
        types = enumerate_types(n, k)
        w = np.zeros(len(types))
        for row in obj["type_weights"]:
            w[types.index(TypeVector(tuple(row["counts"])))] += float(row["w"])
        return cls(w, n, k)

    @classmethod
    def load(cls, path) -> "SymmetricTypeDistribution":
        return cls.from_json(Path(path).read_text())


# -- Sanov's estimate ------------------------------------------------------------------

def kl_bits(q, p) -> float:
    q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
    out = 0.0
    for qx, px in zip(q, p):
        if qx > 0:
            if px <= 0:
                return math.inf
            out += qx * math.log2(qx / px)
    return out


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{q : a . q >= b}`` of probability vectors."""

    a: tuple[float, ...]
    b: float

    def __call__(self, q) -> bool:
        return float(np.dot(self.a, q)) >= self.b - 1e-12

    def divergence_from(self, p) -> float:
        """``D(A||p) = min_{q in A} D(q||p)`` via exponential tilting ``q ~ p 2^(lam a)``."""
        a = np.asarray(self.a, dtype=float)
        p = np.asarray(p, dtype=float)
        supp = p > 0
        if float(np.dot(a, p)) >= self.b:
            return 0.0
        top = float(a[supp].max())
        if self.b > top + 1e-15:
            return math.inf
        if self.b >= top - 1e-15:
            return -math.log2(float(p[supp & (a >= top - 1e-15)].sum()))

        def tilt(lam):
            z = a[supp] * lam
            w = p[supp] * np.exp2(z - z.max())
            return w / w.sum()

        lo, hi = 0.0, 1.0
        while float(np.dot(a[supp], tilt(hi))) < self.b:
            lo, hi = hi, 2 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(np.dot(a[supp], tilt(mid))) < self.b:
                lo = mid
            else:
                hi = mid
        q = np.zeros_like(p)
        q[supp] = tilt(hi)
        return kl_bits(q, p)


@dataclass(frozen=True)
class SanovCheck:
    lhs: float
    rhs: float
    divergence: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12)


def sanov_bound_check(p, region: Callable, n: int, divergence: float | None = None) -> SanovCheck:
    """Check ``p^(x)n(types in A) <= (n+1)^(|X|-1) 2^(-n D(A||p))``.

    ``divergence`` is ``D(A||p)``; it is computed automatically when ``region``
    is a :class:`HalfSpace`.
    """
    p = np.asarray(p, dtype=float)
    k = len(p)
    if divergence is None:
        if not isinstance(region, HalfSpace):
            raise ValueError("D(A||p) must be supplied for a general region")
        divergence = region.divergence_from(p)
    lhs = sum(iid_type_weight(p, t) for t in enumerate_types(n, k) if region(t.distribution()))
    rhs = 0.0 if math.isinf(divergence) else (n + 1) ** (k - 1) * 2.0 ** (-n * divergence)
    return SanovCheck(float(lhs), float(rhs), float(divergence))


# -- blurring ------------------------------------------------------------------------------

def _type_array(n: int, k: int) -> np.ndarray:
    return np.array([t.counts for t in enumerate_types(n, k)], dtype=float)


def blurring_kernel(n: int, m: int, k: int) -> np.ndarray:
    """Column-stochastic kernel ``K[t', t]`` of the blurring map on ``n``-types.

    Add ``m`` copies of every symbol to a sequence of type ``t`` and keep a
    uniformly random sub-multiset of size ``n``:
    ``K(t'|t) = prod_x C(c_x + m, k_x) / C(n + m k, n)``, evaluated through
    log-gamma.
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    c = _type_array(n, k)
    top, bot = np.broadcast_arrays(c[None, :, :] + m, c[:, None, :])  # [t', t, x]
    ok = np.all(bot <= top, axis=2)
    diff = np.where(bot <= top, top - bot, 0.0)
    logc = gammaln(top + 1) - gammaln(bot + 1) - gammaln(diff + 1)
    total = gammaln(n + m * k + 1) - gammaln(n + 1) - gammaln(m * k + 1)
    out = np.where(ok, np.exp(logc.sum(axis=2) - total), 0.0)
    return out


def blurring_kernel_exact(n: int, m: int, k: int) -> list[list[Fraction]]:
    """The same kernel in exact rational arithmetic (small cases)."""
    types = enumerate_types(n, k)
    total = math.comb(n + m * k, n)
    out = [[Fraction(0)] * len(types) for _ in types]
    for j, t in enumerate(types):
        for i, s in enumerate(types):
            num = 1
            for c, kx in zip(t.counts, s.counts):
                num *= math.comb(c + m, kx)
            out[i][j] = Fraction(num, total)
    return out


def apply_blurring(q: SymmetricTypeDistribution, m: int) -> SymmetricTypeDistribution:
    w = blurring_kernel(q.n, m, q.alphabet_size) @ q.weights
    return SymmetricTypeDistribution(w / w.sum(), q.n, q.alphabet_size)


def bosonic_entropy(x: float) -> float:
    """``g(x) = (x+1) log2(x+1) - x log2 x``."""
    if x <= 0:
        return 0.0
    return (x + 1) * math.log2(x + 1) - x * math.log2(x)


@dataclass(frozen=True)
class BlurringCheck:
    lhs: float
    rhs: float
    m: int
    ball_mass_p: float
    ball_mass_q: float

    @property
    def holds(self) -> bool:
        return math.isinf(self.rhs) or self.lhs <= self.rhs + 1e-9


def in_ball(s, delta: float) -> Callable[[TypeVector], bool]:
    s = np.asarray(s, dtype=float)
    return lambda t: float(np.max(np.abs(t.distribution() - s))) <= delta + 1e-12


def blurring_lemma_check(s, q: SymmetricTypeDistribution, delta: float, eta: float) -> BlurringCheck:
    """Evaluate both sides of the one-shot blurring inequality for ``p_n = s^(x)n``.

    ``D_max^eta(s^(x)n || B_{n,m}(q)) <= -log2 q(ball) + n g((2 delta + 1/n)|X|)``
    with ``m = ceil(2 delta n)`` and ``ball`` the ``delta``-ball of types around
    ``s`` in the sup norm.
    """
    s = np.asarray(s, dtype=float)
    n, k = q.n, q.alphabet_size
    if len(s) != k:
        raise ValueError("s and q live on different alphabets")
    p = SymmetricTypeDistribution.iid(s, n)
    ball = in_ball(s, delta)
    mp = p.mass(ball)
    if mp < 1 - eta - 1e-12:
        raise PreconditionError(f"s^n puts only {mp:.6f} < 1 - eta on the delta-ball")
    m = math.ceil(2 * delta * n - 1e-12)
    blurred = apply_blurring(q, m)
    lhs = dmax_smooth_classical(eta, p.weights, blurred.weights).bits
    mq = q.mass(ball)
    fudge = n * bosonic_entropy((2 * delta + 1.0 / n) * k)
    rhs = math.inf if mq <= 0 else -math.log2(mq) + fudge
    return BlurringCheck(lhs, rhs, m, mp, mq)


def sequence_distribution(q: SymmetricTypeDistribution) -> np.ndarray:
    """Expand to the full ``|X|^n`` sequence space (small ``n`` only)."""
    return np.array([q.sequence_probability(x) for x in product(range(q.alphabet_size), repeat=q.n)])


# -- the partition-mixture counterexample -------------------------------------------------------

def set_partitions(n: int):
    """All set partitions of ``{0..n-1}`` as tuples of sorted blocks."""
    if n == 0:
        yield ()
        return
    for part in set_partitions(n - 1):
        for i in range(len(part)):
            yield part[:i] + (part[i] + (n - 1,),) + part[i + 1:]
        yield part + ((n - 1,),)


@dataclass(frozen=True)
class SetPartition:
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        flat = sorted(i for b in self.blocks for i in b)
        if flat != list(range(len(flat))):
            raise ValueError("blocks must partition {0..n-1}")

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)


MAX_GENERATOR_N = 12


def partition_generator(part: SetPartition) -> dict[tuple[int, ...], Fraction]:
    """``r_J1 (x) ... (x) r_Jk``: each block is all-0 or all-1 with probability 1/2."""
    n = part.n
    w = Fraction(1, 2 ** len(part.blocks))
    out = {}
    for bits in product((0, 1), repeat=len(part.blocks)):
        x = [0] * n
        for b, blk in zip(bits, part.blocks):
            for i in blk:
                x[i] = b
        out[tuple(x)] = w
    return out


@dataclass(frozen=True)
class Generator:
    partition: SetPartition
    probs: dict  # sequence -> Fraction
    type_weights: tuple[Fraction, ...]  # symmetrised, indexed by number of ones

    def dense(self, n: int) -> list[Fraction]:
        return [self.probs.get(x, Fraction(0)) for x in product((0, 1), repeat=n)]


def counterexample_generators(n: int) -> list[Generator]:
    """Extreme points of ``F_n``, one per set partition of ``{0..n-1}`` (Bell(n) of them)."""
    if not 1 <= n <= MAX_GENERATOR_N:
        raise ValueError(f"n must lie in 1..{MAX_GENERATOR_N}")
    out = []
    for blocks in set_partitions(n):
        part = SetPartition(blocks)
        probs = partition_generator(part)
        tw = [Fraction(0)] * (n + 1)
        for x, w in probs.items():
            tw[sum(x)] += w
        out.append(Generator(part, probs, tuple(tw)))
    return out


def rational_simplex_max(c, a_ub, b_ub) -> tuple[Fraction, list[Fraction]]:
    """``max c.x`` s.t. ``A x <= b``, ``x >= 0`` with ``b >= 0``, in exact arithmetic.

    Dense tableau with Bland's rule; the origin is the starting vertex.
    """
    m, n = len(a_ub), len(c)
    if any(b < 0 for b in b_ub):
        raise ValueError("origin must be feasible (b >= 0)")
    tab = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(m)] + [Fraction(b)]
           for i, (row, b) in enumerate(zip(a_ub, b_ub))]
    obj = [Fraction(-v) for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]
    while True:
        col = next((j for j in range(n + m) if obj[j] < 0), None)
        if col is None:
            break
        best, row = None, None
        for i in range(m):
            if tab[i][col] > 0:
                ratio = tab[i][-1] / tab[i][col]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[row]):
                    best, row = ratio, i
        if row is None:
            raise ValueError("LP is unbounded")
        piv = tab[row][col]
        tab[row] = [v / piv for v in tab[row]]
        for i in range(m):
            if i != row and tab[i][col] != 0:
                f = tab[i][col]
                tab[i] = [a - f * b for a, b in zip(tab[i], tab[row])]
        f = obj[col]
        obj = [a - f * b for a, b in zip(obj, tab[row])]
        basis[row] = col
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = tab[i][-1]
    return obj[-1], x


def counterexample_closed_form(eps) -> float:
    """``min_{q in F_n} D_H^eps(q||e1^(x)n) = -log2(1 - 2 eps)`` for ``eps < 1/2``."""
    eps = float(eps)
    return -math.log2(1 - 2 * eps) if eps < 0.5 else math.inf


def counterexample_test_lp(eps: Fraction, n: int) -> Fraction:
    """Least type-II error ``a(1^n)`` of a test accepting every member of ``F_n`` w.p. ``>= 1 - eps``.

    Written for ``b = 1 - a``: maximise ``b(1^n)`` s.t. ``sum_x b(x) q_j(x) <= eps``
    for each generator ``q_j`` and ``b <= 1``.
    """
    eps = Fraction(eps)
    gens = counterexample_generators(n)
    seqs = list(product((0, 1), repeat=n))
    ones = seqs.index((1,) * n)
    c = [Fraction(int(i == ones)) for i in range(len(seqs))]
    rows = [g.dense(n) for g in gens]
    rhs = [eps] * len(rows)
    for i in range(len(seqs)):
        rows.append([Fraction(int(j == i)) for j in range(len(seqs))])
        rhs.append(Fraction(1))
    best, _ = rational_simplex_max(c, rows, rhs)
    return 1 - best


@dataclass(frozen=True)
class CounterexampleValue:
    closed_form: float
    brute_force: float
    type_two_error: Fraction

    @property
    def agree(self) -> bool:
        if math.isinf(self.closed_form) or math.isinf(self.brute_force):
            return self.closed_form == self.brute_force
        return abs(self.closed_form - self.brute_force) <= 1e-9


def counterexample_dh(eps, n: int) -> CounterexampleValue:
    """Closed form against the exact composite test LP over ``F_n`` (``n <= 5``)."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    if n > 5:
        raise ValueError("brute force is limited to n <= 5")
    a = counterexample_test_lp(Fraction(eps), n)
    brute = -math.log2(a) if a > 0 else math.inf
    return CounterexampleValue(counterexample_closed_form(eps), brute, a)


def np_test_exact(eps: Fraction, p: Sequence[Fraction], q: Sequence[Fraction]) -> Fraction:
    """Exact ``min sum a q`` s.t. ``sum a p >= 1 - eps`` by likelihood-ratio filling."""
    target = 1 - Fraction(eps)
    order = sorted(range(len(p)), key=lambda x: (q[x] / p[x] if p[x] > 0 else math.inf, x))
    got, cost = Fraction(0), Fraction(0)
    for x in order:
        if got >= target or p[x] == 0:
            continue
        take = min(Fraction(1), (target - got) / p[x])
        got += take * p[x]
        cost += take * q[x]
    return cost


def counterexample_stein(eps, q: dict, n: int) -> float:
    """``D_H^eps(e1^(x)n || q) = -log2(1 - eps) - log2 q(1^n)``."""
    q1 = float(q.get((1,) * n, 0))
    if q1 <= 0:
        return math.inf
    return -math.log2(1 - float(eps)) - math.log2(q1)


def counterexample_stein_brute(eps, q: dict, n: int) -> float:
    seqs = list(product((0, 1), repeat=n))
    e1 = [Fraction(int(x == (1,) * n)) for x in seqs]
    qq = [Fraction(q.get(x, 0)) for x in seqs]
    cost = np_test_exact(Fraction(eps), e1, qq)
    return -math.log2(cost) if cost > 0 else math.inf


def marginal_drop_last(dist: dict) -> dict:
    """Discard the last symbol of a distribution on sequences."""
    out: dict = {}
    for x, w in dist.items():
        out[x[:-1]] = out.get(x[:-1], 0) + w
    return out


__all__ = [
    "PreconditionError",
    "TypeVector",
    "SymmetricTypeDistribution",
    "HalfSpace",
    "SanovCheck",
    "BlurringCheck",
    "SetPartition",
    "Generator",
    "CounterexampleValue",
    "enumerate_types",
    "type_class_size",
    "iid_type_weight",
    "kl_bits",
    "sanov_bound_check",
    "blurring_kernel",
    "blurring_kernel_exact",
    "apply_blurring",
    "bosonic_entropy",
    "in_ball",
    "blurring_lemma_check",
    "sequence_distribution",
    "set_partitions",
    "partition_generator",
    "counterexample_generators",
    "rational_simplex_max",
    "counterexample_closed_form",
    "counterexample_test_lp",
    "counterexample_dh",
    "np_test_exact",
    "counterexample_stein",
    "counterexample_stein_brute",
    "marginal_drop_last",
]
