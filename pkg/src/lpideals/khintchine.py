"""Rademacher systems in l_p(2^n), measured Khintchine constants, the
flat-vector search in sections of c_0 and finitely-strictly-singular witnesses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .bounds import BoundReport, digest
from .errors import CapacityError, DegenerateInputError, DomainError, SearchFailure
from .lp_core import DEFAULT_TOL, BlockOperator, BlockSpace, Exponent, ExponentLike, duality_map, lp_norm
from .opnorm import NormBracket, PowerIterConfig, opnorm_bracket, opnorm_power

__all__ = [
    "rademacher_vector", "rademacher_matrix", "KhintchineSystem", "khintchine_system",
    "equivalence_constants", "projection_norm", "FlatVectorWitness", "flat_vector_search",
    "FSSWitness", "fss_witness", "fss_bound",
]

DIM_CAP = 8192
FLAT_CAP_N = 6
FLAT_CAP_M = 14


def rademacher_vector(n: int, i: int) -> np.ndarray:
    """The i-th dyadic sign vector of length ``2^n`` (``1 <= i <= n``).

    ``r_i`` alternates sign in runs of ``2^(n-i)``: ``r_1 = (1,..,1,-1,..,-1)``.
    """
    if n < 1 or not 1 <= i <= n:
        raise DomainError(f"need 1 <= i <= n, got n={n}, i={i}")
    j = np.arange(2 ** n)
    return np.where((j >> (n - i)) & 1, -1, 1).astype(np.int64)


def rademacher_matrix(n: int) -> np.ndarray:
    """Rows ``r_1 .. r_n`` as an ``n x 2^n`` integer matrix."""
    j = np.arange(2 ** n)
    shifts = n - np.arange(1, n + 1)
    return np.where((j[None, :] >> shifts[:, None]) & 1, -1, 1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class KhintchineSystem:
    """``x_i = 2^(-n/p) r_i`` in l_p(2^n) with duals ``x*_i = 2^(-n/p') r_i``.

    The measured constants are computed lazily on first access.
    """

    n: int
    p: Exponent
    signs: np.ndarray
    cfg: PowerIterConfig = PowerIterConfig(restarts=6)
    samples: int = 4096

    @property
    def k(self) -> int:
        return 2 ** self.n

    @cached_property
    def vectors(self) -> np.ndarray:
        """``n x k`` array whose rows are the ``x_(n,i)``."""
        return self.signs * 2.0 ** (-self.n * float(self.p.reciprocal))

    @cached_property
    def duals(self) -> np.ndarray:
        return self.signs * 2.0 ** (-self.n * float(self.p.dual().reciprocal))

    @cached_property
    def projection(self) -> np.ndarray:
        # sum_i x_i (x) x*_i  ==  2^-n R^T R
        return (self.signs.T @ self.signs) / float(self.k)

    def biorthogonality(self) -> np.ndarray:
        """Integer Gram matrix ``R R^T`` scaled by ``2^-n``; exactly the identity."""
        gram = self.signs @ self.signs.T
        return gram / float(self.k)

    @cached_property
    def constants(self) -> tuple[float, float]:
        return equivalence_constants(self)

    @cached_property
    def projection_bracket(self) -> NormBracket:
        return projection_norm(self)

    @cached_property
    def measured_C(self) -> float:
        lo, hi = self.constants
        return max(hi, 1.0 / lo, self.projection_bracket.upper)


def khintchine_system(n: int, p: ExponentLike, *, cap: int = DIM_CAP,
                      cfg: PowerIterConfig | None = None, samples: int = 4096) -> KhintchineSystem:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if 2 ** n > cap:
        raise CapacityError(f"2^{n} exceeds the dimension cap {cap}")
    p = Exponent.of(p)
    return KhintchineSystem(n, p, rademacher_matrix(n), cfg or PowerIterConfig(restarts=6), samples)


def _ratio_and_grad(a: np.ndarray, G: np.ndarray, p: Exponent):
    na = float(np.linalg.norm(a))
    y = G @ a
    val = lp_norm(y, p)
    if val == 0 or na == 0:
        return 0.0, np.zeros_like(a)
    g = G.T @ duality_map(y, p)
    return val / na, g / na - val * a / na ** 3


def equivalence_constants(sys: KhintchineSystem, *, samples: int | None = None,
                          seed: int = 0) -> tuple[float, float]:
    """Extreme values ``(lo, hi)`` of ``|sum a_i x_i|_p`` over ``|a|_2 = 1``.

    ``hi`` combines power iteration on ``a -> sum a_i x_i`` with sampling;
    ``lo`` combines sampling with local refinement from the best samples.
    Both are attained by explicit coefficient vectors, so ``lo`` may
    overestimate and ``hi`` underestimate the true extremes.  The basis
    vectors are always among the candidates, hence ``lo <= 1 <= hi``.
    """
    n, p = sys.n, sys.p
    if p == Exponent.of(2) or n == 1:
        return 1.0, 1.0
    G = sys.vectors.T
    samples = sys.samples if samples is None else samples
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
    cand = np.vstack([np.eye(n), np.ones((1, n)), rng.standard_normal((samples, n))])
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    vals = lp_norm(cand @ G.T, p, axis=1)
    est = opnorm_power(BlockOperator.between(G, 2, p), sys.cfg)
    hi = max(float(vals.max()), est.value)
    lo = float(vals.min())
    if not p.is_inf:
        for idx in np.argsort(vals)[:4]:
            res = minimize(lambda a: _ratio_and_grad(a, G, p), cand[idx], jac=True,
                           method="L-BFGS-B", options={"maxiter": 200})
            a = res.x / np.linalg.norm(res.x)
            lo = min(lo, float(lp_norm(G @ a, p)))
    return lo, hi


def projection_norm(sys: KhintchineSystem) -> NormBracket:
    """Bracket of ``|P|_{p->p}`` for the biorthogonal projection."""
    P = BlockOperator.between(sys.projection, sys.p, sys.p)
    return opnorm_bracket(P, sys.cfg)


@dataclass(frozen=True)
class FlatVectorWitness:
    x: np.ndarray
    attaining_set: tuple[int, ...]
    coefficients: np.ndarray
    subset: tuple[int, ...] = ()
    signs: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "attaining_set": list(self.attaining_set),
            "coefficients": [float(v) for v in self.coefficients],
            "subset": list(self.subset),
            "signs": list(self.signs),
        }


def _sign_patterns(n: int) -> np.ndarray:
    """All sign vectors with first entry +1, lexicographic with +1 before -1."""
    rest = list(itertools.product((1.0, -1.0), repeat=n - 1))
    return np.array([(1.0,) + s for s in rest])


def flat_vector_search(basis, *, tol: float = DEFAULT_TOL, cap_n: int = FLAT_CAP_N,
                       cap_m: int = FLAT_CAP_M) -> FlatVectorWitness:
    """Find ``x`` in the row span of ``basis`` attaining ``|x|_inf = 1`` on ``>= n`` coordinates.

    Exhaustive over coordinate subsets ``J`` with ``|J| = n`` and sign
    patterns ``sigma`` (``-x`` is as good as ``x``, so ``sigma_1 = +1``).
    Each pair fixes ``x|_J = sigma``; the pair is accepted when the whole
    vector satisfies ``|x|_inf <= 1 + tol``.  Results are the first accepted
    pair in lexicographic order of ``(J, sigma)``.
    """
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    n, m = B.shape
    if n > cap_n or m > cap_m:
        raise CapacityError(f"flat-vector search is capped at n <= {cap_n}, m <= {cap_m}")
    if n > m or np.linalg.matrix_rank(B) != n:
        raise DegenerateInputError("basis rows must be linearly independent")
    combos = np.array(list(itertools.combinations(range(m), n)))
    signs = _sign_patterns(n)                               # (S, n)
    sub = np.transpose(B[:, combos], (1, 2, 0))             # (C, |J|, n): sub[c] @ coef = x|_J
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(sub)
    good = np.flatnonzero(np.isfinite(cond) & (cond < 1e12))
    if good.size:
        coef = np.linalg.solve(sub[good], np.broadcast_to(signs.T, (good.size, n, len(signs))))
        X = np.einsum("cks,km->csm", coef, B)                # (C', S, m)
        ok = np.abs(X).max(axis=-1) <= 1.0 + tol
        hits = np.argwhere(ok)
        if hits.size:
            c, s = hits[0]
            x = X[c, s]
            scale = np.abs(x).max()
            x = x / scale
            a = coef[c, :, s] / scale
            att = tuple(int(i) for i in np.flatnonzero(np.abs(x) >= 1.0 - tol))
            return FlatVectorWitness(x, att, a, tuple(int(j) for j in combos[good[c]]),
                                     tuple(int(v) for v in signs[s]))
    raise SearchFailure("no flat vector found; the basis is numerically degenerate")


def fss_bound(p: ExponentLike, q: ExponentLike, n: int) -> float:
    """``n^(-(1/p - 1/q))``, the bound on ``|x|_q`` for the flat unit vector."""
    p, q = Exponent.of(p), Exponent.of(q)
    return float(n) ** (-float(p.reciprocal - q.reciprocal))


class FSSWitness(NamedTuple):
    x: np.ndarray
    bound_check: BoundReport
    sup_check: BoundReport


def fss_witness(p: ExponentLike, q: ExponentLike, basis, *, tol: float = DEFAULT_TOL,
                cap_n: int = FLAT_CAP_N, cap_m: int = FLAT_CAP_M) -> FSSWitness:
    """A unit vector of ``span(basis)`` in l_p that the inclusion into l_q shrinks.

    The flat vector attains its sup norm on ``n`` coordinates, which forces
    ``|x|_inf <= n^(-1/p)`` once ``|x|_p = 1`` and then
    ``|x|_q <= n^(-(1/p - 1/q))`` by interpolating between l_p and l_inf.
    """
    p, q = Exponent.of(p), Exponent.of(q)
    if not p < q:
        raise DomainError(f"need p < q, got p={p}, q={q}")
    flat = flat_vector_search(basis, tol=tol, cap_n=cap_n, cap_m=cap_m)
    n = np.atleast_2d(basis).shape[0]
    x = flat.x / lp_norm(flat.x, p)
    dg = digest(np.atleast_2d(np.asarray(basis, dtype=float)), str(p), str(q))
    consts = {"p": str(p), "q": str(q), "n": n, "attaining": len(flat.attaining_set)}
    sup = BoundReport.check(lp_norm(x, math.inf), float(n) ** (-float(p.reciprocal)),
                            label="fss-sup", constants=consts, inputs_digest=dg, tol=tol)
    bound = BoundReport.check(lp_norm(x, q), fss_bound(p, q, n), label="fss-q",
                              constants=consts, inputs_digest=dg, tol=tol)
    return FSSWitness(x, bound, sup)
