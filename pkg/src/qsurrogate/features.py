"""Trigonometric monomial features, frequency sets and the truncated kernel.

A frequency vector ``w`` in {-1, 0, +1}^d selects, per coordinate, the factor
1 (0), cos (+1) or sin (-1). Members of every set are kept in one canonical
order: by hamming weight, then lexicographically with +1 < -1 < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Sequence

import numpy as np

from .errors import GuardError

ENUM_GUARD = 10**7
EXTRACT_MAX_D = 8
_LEX_KEY = {1: 0, -1: 1, 0: 2}
_LEX_VAL = (1, -1, 0)
# column of the [1, cos, sin] table used by each entry value
_CODE = {0: 0, 1: 1, -1: 2}


# ---------------------------------------------------------------------------
# Counting, ranking, enumeration
# ---------------------------------------------------------------------------


def _check_args(d: int, lam: int):
    if d < 0 or lam < 0:
        raise ValueError("d and Lambda must be non-negative")
    if lam > d:
        raise ValueError(f"Lambda={lam} exceeds d={d}")


def cardinality(d: int, lam: int, mode: str = "C") -> int:
    """Exact size of C(Lambda) (hamming <= Lambda) or S(Lambda) (sine count <= Lambda)."""
    _check_args(d, lam)
    if mode == "C":
        return sum(math.comb(d, k) * 2**k for k in range(lam + 1))
    if mode == "S":
        return sum(math.comb(d, a) * 2 ** (d - a) for a in range(lam + 1))
    raise ValueError(f"unknown mode {mode!r}")


def _block_count(slots: int, k: int) -> int:
    if k < 0 or k > slots:
        return 0
    return math.comb(slots, k) * 2**k


def unrank_c(d: int, rank: int) -> tuple[int, ...]:
    """The ``rank``-th member of C(d) in canonical order."""
    k = 0
    while True:
        size = _block_count(d, k)
        if rank < size:
            break
        rank -= size
        k += 1
        if k > d:
            raise IndexError("rank out of range")
    out = []
    left = k
    for j in range(d):
        rest = d - j - 1
        for v in _LEX_VAL:
            need = left - (v != 0)
            cnt = _block_count(rest, need)
            if rank < cnt:
                out.append(v)
                left = need
                break
            rank -= cnt
    return tuple(out)


def rank_c(w: Sequence[int]) -> int:
    d = len(w)
    k = sum(v != 0 for v in w)
    r = sum(_block_count(d, j) for j in range(k))
    left = k
    for j, v in enumerate(w):
        rest = d - j - 1
        for u in _LEX_VAL:
            if u == v:
                break
            r += _block_count(rest, left - (u != 0))
        left -= v != 0
    return r


def _sort_key(w):
    return (sum(v != 0 for v in w), tuple(_LEX_KEY[v] for v in w))


def _enumerate(d: int, lam: int, mode: str) -> np.ndarray:
    size = cardinality(d, lam, mode)
    if size > ENUM_GUARD:
        raise GuardError(f"|{mode}({lam})| = {size} exceeds the enumeration guard {ENUM_GUARD}")
    rows = []
    if mode == "C":
        for k in range(lam + 1):
            for pos in combinations(range(d), k):
                for vals in product((1, -1), repeat=k):
                    w = [0] * d
                    for p, v in zip(pos, vals):
                        w[p] = v
                    rows.append(tuple(w))
    else:
        for a in range(lam + 1):
            for neg in combinations(range(d), a):
                free = [j for j in range(d) if j not in neg]
                for vals in product((0, 1), repeat=len(free)):
                    w = [0] * d
                    for j in neg:
                        w[j] = -1
                    for j, v in zip(free, vals):
                        w[j] = v
                    rows.append(tuple(w))
    rows.sort(key=_sort_key)
    return np.array(rows, dtype=np.int8).reshape(len(rows), d)


@dataclass(frozen=True)
class FrequencySet:
    """Mode "C", "S" or "Omega" (uniform subsample of C(Lambda)).

    Members are re-derived from the descriptor; they are never serialized.
    """

    mode: str
    d: int
    lam: int
    m: int | None = None
    seed: int | None = None
    _members: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        _check_args(self.d, self.lam)
        if self.mode not in ("C", "S", "Omega"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "Omega":
            total = cardinality(self.d, self.lam, "C")
            if self.m is None or self.seed is None:
                raise ValueError("Omega sets need m and seed")
            if not 1 <= self.m <= total:
                raise ValueError(f"m={self.m} must lie in [1, |C(Lambda)|={total}]")
            members = _sample_members(self.d, self.lam, self.m, self.seed)
        else:
            members = _enumerate(self.d, self.lam, self.mode)
        members.setflags(write=False)
        object.__setattr__(self, "_members", members)

    @property
    def members(self) -> np.ndarray:
        return self._members

    def __len__(self) -> int:
        return self._members.shape[0]

    def hamming(self) -> np.ndarray:
        return (self._members != 0).sum(axis=1)

    def descriptor(self) -> dict:
        out = {"mode": self.mode, "d": self.d, "lambda": self.lam}
        if self.mode == "Omega":
            out.update(m=self.m, seed=self.seed)
        return out

    @classmethod
    def from_descriptor(cls, d: dict) -> "FrequencySet":
        return cls(d["mode"], d["d"], d["lambda"], d.get("m"), d.get("seed"))


def enumerate_frequency_set(d: int, lam: int, mode: str = "C") -> FrequencySet:
    return FrequencySet(mode, d, lam)


def _sample_ranks(total: int, m: int, rng: np.random.Generator) -> list[int]:
    """Sparse Fisher-Yates: m distinct ranks drawn uniformly from range(total)."""
    if total >= 2**63:
        raise GuardError("frequency set too large to index")
    swap: dict[int, int] = {}
    out = []
    for i in range(m):
        j = int(rng.integers(i, total))
        vi = swap.get(i, i)
        vj = swap.get(j, j)
        swap[j] = vi
        out.append(vj)
    return sorted(out)


def _sample_members(d: int, lam: int, m: int, seed: int) -> np.ndarray:
    total = cardinality(d, lam, "C")
    rng = np.random.default_rng(seed)
    ranks = _sample_ranks(total, m, rng)
    return np.array([unrank_c(d, r) for r in ranks], dtype=np.int8).reshape(m, d)


def sample_feature_subset(d: int, lam: int, m: int, seed: int) -> FrequencySet:
    return FrequencySet("Omega", d, lam, m, seed)


# ---------------------------------------------------------------------------
# Monomials
# ---------------------------------------------------------------------------


def phi(w: Sequence[int], x: Sequence[float]) -> float:
    w = np.asarray(w)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise ValueError("frequency vector and x differ in length")
    out = 1.0
    for wj, xj in zip(w, x):
        if wj == 1:
            out *= math.cos(xj)
        elif wj == -1:
            out *= math.sin(xj)
    return out


def feature_matrix(members: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Phi_w(x) for every row of X (B, d) and member w; shape (B, M)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != members.shape[1]:
        raise ValueError(f"expected {members.shape[1]} coordinates, got {X.shape[1]}")
    table = np.stack([np.ones_like(X), np.cos(X), np.sin(X)], axis=-1)  # (B, d, 3)
    codes = np.where(members == 0, 0, np.where(members == 1, 1, 2))  # (M, d)
    out = np.ones((X.shape[0], members.shape[0]))
    for j in range(members.shape[1]):
        out *= table[:, j, codes[:, j]]
    return out


# ---------------------------------------------------------------------------
# Correlated (layer-shared) parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollapsedFeatureSet:
    """Distinct monomials prod_j cos^{N+_j} sin^{N-_j} over base coordinates.

    ``mult[j]`` is the number of gates sharing coordinate j; members satisfy
    N+_j + N-_j <= mult[j] and sum_j (N+_j + N-_j) <= Lambda. With ``m`` and
    ``seed`` set, m members are drawn uniformly without replacement.
    """

    mult: tuple[int, ...]
    lam: int
    m: int | None = None
    seed: int | None = None
    _powers: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mult", tuple(int(v) for v in self.mult))
        if self.lam < 0 or any(v < 0 for v in self.mult):
            raise ValueError("Lambda and multiplicities must be non-negative")
        full = _enumerate_collapsed(self.mult, self.lam)
        if self.m is not None:
            if self.seed is None:
                raise ValueError("subsampled collapsed sets need a seed")
            if not 1 <= self.m:
                raise ValueError("m must be >= 1")
            if self.m < full.shape[0]:
                rng = np.random.default_rng(self.seed)
                pick = np.sort(rng.choice(full.shape[0], self.m, replace=False))
                full = full[pick]
        full.setflags(write=False)
        object.__setattr__(self, "_powers", full)

    @property
    def powers(self) -> np.ndarray:
        """(M, d_base, 2) array of (N+, N-) per coordinate."""
        return self._powers

    @property
    def d(self) -> int:
        return len(self.mult)

    def __len__(self) -> int:
        return self._powers.shape[0]

    def descriptor(self) -> dict:
        out = {"mode": "collapsed", "mult": list(self.mult), "lambda": self.lam}
        if self.m is not None:
            out.update(m=self.m, seed=self.seed)
        return out

    @classmethod
    def from_descriptor(cls, d: dict) -> "CollapsedFeatureSet":
        return cls(tuple(d["mult"]), d["lambda"], d.get("m"), d.get("seed"))


def collapsed_cardinality(mult: Sequence[int], lam: int) -> int:
    # number of (a, b) with a + b = t is t + 1; convolve over coordinates
    counts = [1] + [0] * lam
    for L in mult:
        new = [0] * (lam + 1)
        for s, c in enumerate(counts):
            if not c:
                continue
            for t in range(0, min(L, lam - s) + 1):
                new[s + t] += c * (t + 1)
        counts = new
    return sum(counts)


def _enumerate_collapsed(mult: Sequence[int], lam: int) -> np.ndarray:
    size = collapsed_cardinality(mult, lam)
    if size > ENUM_GUARD:
        raise GuardError(f"collapsed feature set of size {size} exceeds the guard")
    d = len(mult)
    rows: list[list[tuple[int, int]]] = [[]]
    budget = [lam]
    for L in mult:
        nrows, nbud = [], []
        for r, left in zip(rows, budget):
            for t in range(0, min(L, left) + 1):
                for a in range(t, -1, -1):
                    nrows.append(r + [(a, t - a)])
                    nbud.append(left - t)
        rows, budget = nrows, nbud
    arr = np.array(rows, dtype=np.int16).reshape(len(rows), d, 2)
    deg = arr.sum(axis=(1, 2))
    order = np.lexsort(tuple(arr.reshape(len(rows), -1).T[::-1]) + (deg,))
    return arr[order]


def phi_collapsed(powers: np.ndarray, x_base: Sequence[float]) -> float:
    powers = np.asarray(powers)
    x = np.asarray(x_base, dtype=float)
    if powers.shape != (x.shape[0], 2):
        raise ValueError("power table and x_base differ in length")
    return float(np.prod(np.cos(x) ** powers[:, 0] * np.sin(x) ** powers[:, 1]))


def collapsed_feature_matrix(powers: np.ndarray, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != powers.shape[1]:
        raise ValueError(f"expected {powers.shape[1]} coordinates, got {X.shape[1]}")
    c = np.cos(X)
    s = np.sin(X)
    out = np.ones((X.shape[0], powers.shape[0]))
    for j in range(powers.shape[1]):
        a = powers[:, j, 0]
        b = powers[:, j, 1]
        if np.any(a):
            out *= c[:, j : j + 1] ** a
        if np.any(b):
            out *= s[:, j : j + 1] ** b
    return out


def expand_layer_shared(x_base: Sequence[float], mult: Sequence[int]) -> np.ndarray:
    """Full per-gate vector with coordinate j repeated mult[j] times."""
    return np.repeat(np.asarray(x_base, dtype=float), mult)


def collapse_frequency(w: Sequence[int], mult: Sequence[int]) -> np.ndarray:
    """(N+, N-) table of an expanded frequency vector."""
    w = np.asarray(w)
    out = np.zeros((len(mult), 2), dtype=int)
    start = 0
    for j, L in enumerate(mult):
        seg = w[start : start + L]
        out[j] = ((seg == 1).sum(), (seg == -1).sum())
        start += L
    return out


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------


def _esp(z: np.ndarray, lam: int) -> np.ndarray:
    """Elementary symmetric polynomials e_0..e_lam over the last axis of z."""
    e = np.zeros((lam + 1,) + z.shape[:-1])
    e[0] = 1.0
    for j in range(z.shape[-1]):
        zj = z[..., j]
        for k in range(lam, 0, -1):
            e[k] = e[k] + zj * e[k - 1]
    return e


def kernel(x: Sequence[float], xp: Sequence[float], lam: int) -> float:
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape or x.ndim != 1:
        raise ValueError("kernel inputs must be vectors of equal length")
    _check_args(x.shape[0], lam)
    return float(_esp(2 * np.cos(x - xp), lam).sum(axis=0))


def kernel_matrix(XA: np.ndarray, XB: np.ndarray, lam: int) -> np.ndarray:
    XA = np.atleast_2d(np.asarray(XA, dtype=float))
    XB = np.atleast_2d(np.asarray(XB, dtype=float))
    if XA.shape[1] != XB.shape[1]:
        raise ValueError("dimension mismatch")
    _check_args(XA.shape[1], lam)
    z = 2 * np.cos(XA[:, None, :] - XB[None, :, :])
    return _esp(z, lam).sum(axis=0)


def kernel_bruteforce(x, xp, lam: int) -> float:
    """Direct sum over C(Lambda) of 2^|w| Phi_w(x) Phi_w(x'); test oracle."""
    fs = enumerate_frequency_set(len(x), lam, "C")
    fa = feature_matrix(fs.members, np.asarray(x)[None, :])[0]
    fb = feature_matrix(fs.members, np.asarray(xp)[None, :])[0]
    return float(np.sum(2.0 ** fs.hamming() * fa * fb))


def kernel_gradients(x: Sequence[float], XB: np.ndarray, lam: int) -> np.ndarray:
    """d kappa(x, x_i)/dx for every row x_i of XB; shape (n, d).

    Uses prefix/suffix ESP tables so no division by z_j is needed.
    """
    x = np.asarray(x, dtype=float)
    XB = np.atleast_2d(np.asarray(XB, dtype=float))
    n, d = XB.shape
    if x.shape != (d,):
        raise ValueError("dimension mismatch")
    _check_args(d, lam)
    if lam == 0:
        return np.zeros((n, d))
    delta = x[None, :] - XB
    z = 2 * np.cos(delta)
    fwd = np.zeros((d + 1, lam, n))  # e_k(z_0..z_{j-1}), k < lam
    fwd[0, 0] = 1.0
    for j in range(d):
        fwd[j + 1] = fwd[j]
        fwd[j + 1, 1:] += z[:, j] * fwd[j, :-1]
    bwd = np.zeros((d + 1, lam, n))  # e_k(z_j..z_{d-1})
    bwd[d, 0] = 1.0
    for j in range(d - 1, -1, -1):
        bwd[j] = bwd[j + 1]
        bwd[j, 1:] += z[:, j] * bwd[j + 1, :-1]
    grad = np.empty((n, d))
    for j in range(d):
        # sum_{k=0}^{lam-1} e_k(z without j) = sum_{a+b <= lam-1} fwd[j,a] bwd[j+1,b]
        cum = np.cumsum(bwd[j + 1], axis=0)  # cum[t] = sum_{b<=t} bwd
        s = np.einsum("an,an->n", fwd[j], cum[::-1])
        grad[:, j] = -2 * np.sin(delta[:, j]) * s
    return grad


def kernel_gradient(x, xp, lam: int) -> np.ndarray:
    return kernel_gradients(x, np.asarray(xp, dtype=float)[None, :], lam)[0]


# ---------------------------------------------------------------------------
# Coefficient extraction oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientTable:
    """All 3^d expansion coefficients, members in canonical order."""

    members: np.ndarray
    alpha: np.ndarray

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in w): float(a) for w, a in zip(self.members, self.alpha)}

    def evaluate(self, X: np.ndarray, lam: int | None = None) -> np.ndarray:
        keep = np.ones(len(self.alpha), bool)
        if lam is not None:
            keep = (self.members != 0).sum(axis=1) <= lam
        return feature_matrix(self.members[keep], X) @ self.alpha[keep]

    def truncated(self, keep: np.ndarray) -> "CoefficientTable":
        return CoefficientTable(self.members[keep], self.alpha[keep])


_INV = np.array([[0.5, 0.0, 0.5], [0.5, 0.0, -0.5], [-0.5, 1.0, -0.5]])  # rows: alpha_0, alpha_+, alpha_-


def extract_coefficients(f: Callable[[np.ndarray], np.ndarray], d: int) -> CoefficientTable:
    """Exact expansion coefficients from 3^d evaluations on {0, pi/2, pi}^d.

    ``f`` maps an (B, d) array of points to (B,) values.
    """
    if d > EXTRACT_MAX_D:
        raise GuardError(f"coefficient extraction limited to d <= {EXTRACT_MAX_D}")
    grid = np.array(list(product((0.0, math.pi / 2, math.pi), repeat=d))).reshape(-1, d)
    vals = np.asarray(f(grid), dtype=float).reshape((3,) * d) if d else np.asarray(f(grid), float).reshape(())
    for axis in range(d):
        vals = np.moveaxis(np.tensordot(_INV, vals, axes=([1], [axis])), 0, axis)
    # tensor index per axis: 0 -> w=0, 1 -> w=+1, 2 -> w=-1
    fs = enumerate_frequency_set(d, d, "C")
    idx = tuple(np.where(fs.members == 0, 0, np.where(fs.members == 1, 1, 2)).T)
    alpha = vals[idx] if d else np.array([float(vals)])
    return CoefficientTable(np.array(fs.members), np.asarray(alpha, dtype=float))
