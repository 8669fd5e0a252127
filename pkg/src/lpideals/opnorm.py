"""Brackets for ``|T|_{X -> Y}`` between finite (block) l_p spaces.

Computing ``|T|_{p->q}`` is NP-hard in general, so nothing here claims an
exact value except the classical closed forms:

* ``|T|_{1->Y}``   = largest column norm,
* ``|T|_{X->inf}`` = largest row norm in the dual of ``X``,
* ``|T|_{2->2}``   = largest singular value,
* ``|T|_{inf->Y}`` = largest image of a sign vector (small domains only).

Everything else is a :class:`NormBracket`: a lower bound realised by an
explicit witness vector and an upper bound from closed forms, Riesz-Thorin
interpolation between them, Hölder relaxations and block-norm reduction.

Interpolation only ever uses anchors from the first three families.  For
those the real and the complex operator norms coincide, so the (complex)
Riesz-Thorin theorem applies with constant one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, InterpolationError
from .lp_core import (
    DEFAULT_TOL, INF, ONE, TWO, BlockOperator, BlockSpace, Exponent, ExponentLike,
    block_duality_map, block_norm,
)

logger = logging.getLogger(__name__)

__all__ = [
    "NormBracket", "PowerIterConfig", "PowerEstimate",
    "opnorm_exact_1_to_q", "opnorm_exact_from_inf", "opnorm_exact_to_inf",
    "opnorm_power", "opnorm_upper_interpolation", "opnorm_upper", "opnorm_bracket",
    "ratio",
]

SIGN_ENUM_CAP = 22


@dataclass(frozen=True)
class PowerIterConfig:
    max_iters: int = 200
    tol: float = 1e-10
    restarts: int = 4
    seed: int = 0
    endpoint_eps: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1 or self.restarts < 1 or not self.tol > 0:
            raise DomainError("need max_iters >= 1, restarts >= 1 and tol > 0")
        if not 0 < self.endpoint_eps < 0.5:
            raise DomainError("endpoint_eps must lie in (0, 0.5)")


@dataclass(frozen=True)
class NormBracket:
    """Certified interval ``[lower, upper]`` for an operator norm."""

    lower: float
    upper: float
    witness: np.ndarray
    method_tags: tuple[str, ...] = ()

    def contains(self, value: float, tol: float = DEFAULT_TOL) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    @property
    def is_tight(self) -> bool:
        return self.upper - self.lower <= DEFAULT_TOL * max(1.0, self.upper)

    def to_json(self) -> dict:
        return {
            "lower": float(self.lower),
            "upper": float(self.upper),
            "witness": [float(v) for v in self.witness],
            "method_tags": list(self.method_tags),
        }


@dataclass(frozen=True)
class PowerEstimate:
    """Best lower estimate found by the power iteration."""

    value: float
    witness: np.ndarray
    converged: bool
    iterations: int
    history: tuple[float, ...] = ()
    method_tags: tuple[str, ...] = field(default=())


def ratio(T: BlockOperator, x) -> float:
    """``|Tx|_Y / |x|_X`` with the operator's own spaces."""
    x = np.asarray(x, dtype=float)
    nx = block_norm(x, T.domain)
    if nx == 0:
        return 0.0
    return block_norm(T.matrix @ x, T.codomain) / nx


def _codomain(T: BlockOperator, q) -> BlockSpace:
    return T.codomain if q is None else BlockSpace.lp(q, T.shape[0])


def opnorm_exact_1_to_q(T: BlockOperator, q: ExponentLike | None = None, *,
                        return_witness: bool = False):
    """``|T|_{1->q}``: the largest column norm.

    ``q=None`` measures columns in ``T.codomain`` (any block space works).
    """
    if T.domain.plain_exponent != ONE:
        raise DomainError(f"domain must be plain l_1, got {T.domain}")
    cols = block_norm(T.matrix, _codomain(T, q), axis=0)
    j = int(np.argmax(cols))
    value = float(cols[j])
    if return_witness:
        w = np.zeros(T.shape[1])
        w[j] = 1.0
        return value, w
    return value


def opnorm_exact_to_inf(T: BlockOperator, p: ExponentLike | None = None, *,
                        return_witness: bool = False):
    """``|T|_{p->inf}``: the largest row norm measured in the dual of the domain."""
    if T.codomain.plain_exponent != INF:
        raise DomainError(f"codomain must be plain l_inf, got {T.codomain}")
    dom = T.domain if p is None else BlockSpace.lp(p, T.shape[1])
    rows = block_norm(T.matrix.T, dom.dual(), axis=0)
    i = int(np.argmax(rows))
    value = float(rows[i])
    if return_witness:
        if value == 0:
            return value, np.eye(T.shape[1])[0]
        return value, block_duality_map(T.matrix[i], dom.dual())
    return value


def opnorm_exact_from_inf(T: BlockOperator, q: ExponentLike | None = None, *,
                          cap: int = SIGN_ENUM_CAP, return_witness: bool = False):
    """``|T|_{inf->q}`` by enumerating sign vectors.

    A convex function on the cube peaks at a vertex, so the maximum over
    ``sigma in {-1, 1}^m`` is exact.  Since ``sigma`` and ``-sigma`` give the
    same value only ``sigma_1 = +1`` is visited.  Among maximisers the
    lexicographically smallest one is returned, ordering ``+1`` before
    ``-1``.
    """
    if T.domain.plain_exponent != INF:
        raise DomainError(f"domain must be plain l_inf, got {T.domain}")
    m = T.shape[1]
    if m > cap:
        raise CapacityError(f"sign enumeration over {m} coordinates exceeds the cap {cap}")
    cod = _codomain(T, q)
    M = T.matrix
    free = m - 1
    low = min(free, 16)
    high = free - low
    # columns of low_signs enumerate the last `low` coordinates, +1 first
    idx = np.arange(2 ** low)
    bits = (idx[None, :] >> np.arange(low - 1, -1, -1)[:, None]) & 1
    low_signs = 1.0 - 2.0 * bits
    low_part = M[:, m - low:] @ low_signs if low else np.zeros((M.shape[0], 1))
    best_val, best_sigma = -1.0, None
    for k in range(2 ** high):
        head = np.ones(1 + high)
        for b in range(high):
            if (k >> (high - 1 - b)) & 1:
                head[1 + b] = -1.0
        base = M[:, :1 + high] @ head
        vals = block_norm(base[:, None] + low_part, cod, axis=0)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_sigma = np.concatenate([head, low_signs[:, j]]) if low else head.copy()
    if return_witness:
        return best_val, best_sigma
    return best_val


def _perturbed(space: BlockSpace, eps: float) -> tuple[BlockSpace, bool]:
    """Move endpoint exponents inward: ``1 -> 1 + eps`` and ``inf -> 1/eps``."""
    lo = Exponent.of(1.0 + eps)
    hi = Exponent(Fraction(1) / Fraction(repr(eps)))
    changed = False

    def fix(e: Exponent) -> Exponent:
        nonlocal changed
        if e.is_inf:
            changed = True
            return hi
        if e == ONE:
            changed = True
            return lo
        return e

    outer = fix(space.outer)
    blocks = tuple((fix(e), d) for e, d in space.blocks)
    return BlockSpace(outer, blocks), changed


def _restart_vectors(m: int, cfg: PowerIterConfig):
    yield np.ones(m)
    if cfg.restarts >= 2:
        e = np.zeros(m)
        e[0] = 1.0
        yield e
    for r in range(2, cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(r,)))
        yield rng.standard_normal(m)


def _power_run(T, dom_it, cod_it, x0, cfg):
    M = T.matrix
    dom_it_dual = dom_it.dual()
    x = x0 / block_norm(x0, dom_it)
    best_val, best_x = ratio(T, x), x
    history = []
    stable, prev, converged = 0, None, False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        y = M @ x
        if not y.any():
            converged = True
            break
        obj = block_norm(y, cod_it)
        history.append(obj)
        if prev is not None and abs(obj - prev) <= cfg.tol * obj:
            stable += 1
            if stable >= 3:
                converged = True
                break
        else:
            stable = 0
        prev = obj
        w = M.T @ block_duality_map(y, cod_it)
        if not w.any():
            converged = True
            break
        x = block_duality_map(w, dom_it_dual)
        r = ratio(T, x)
        if r > best_val:
            best_val, best_x = r, x
    return best_val, best_x, converged, it, tuple(history)


def opnorm_power(T: BlockOperator, cfg: PowerIterConfig = PowerIterConfig()) -> PowerEstimate:
    """Lower estimate of ``|T|`` by a Boyd-type nonlinear power iteration.

    Each step maps ``x`` to the norming vector of ``T^t J(Tx)``, where ``J``
    is the blockwise duality map of the codomain.  The iteration objective
    never decreases.  Endpoint exponents are replaced by ``1 + eps`` or
    ``1/eps`` for the iteration only; the returned value is the exact ratio
    at the witness in the original spaces.
    """
    m = T.shape[1]
    dom_it, d_changed = _perturbed(T.domain, cfg.endpoint_eps)
    cod_it, c_changed = _perturbed(T.codomain, cfg.endpoint_eps)
    tags = ["power"]
    if d_changed or c_changed:
        tags.append(f"endpoint-perturbed:{cfg.endpoint_eps:g}")
    if not T.matrix.any():
        return PowerEstimate(0.0, np.eye(m)[0], True, 0, (), tuple(tags + ["zero"]))
    best = None
    for x0 in _restart_vectors(m, cfg):
        run = _power_run(T, dom_it, cod_it, x0, cfg)
        # strict comparison keeps the earliest restart on ties
        if best is None or run[0] > best[0]:
            best = run
    value, x, converged, iters, history = best
    if not converged:
        tags.append("unconverged")
        logger.debug("power iteration hit max_iters=%d", cfg.max_iters)
    return PowerEstimate(float(value), x, converged, iters, history, tuple(tags))


def _solve_theta(x0, y0, x1, y1, x, y, tol=1e-9):
    if abs(x0 - x1) > 1e-15:
        theta = (x0 - x) / (x0 - x1)
    elif abs(x - x0) > tol:
        raise InterpolationError("target p is not between the anchors")
    elif abs(y0 - y1) > 1e-15:
        theta = (y0 - y) / (y0 - y1)
    elif abs(y - y0) <= tol:
        theta = 0.0
    else:
        raise InterpolationError("target q is not between the anchors")
    if theta < -1e-12 or theta > 1 + 1e-12:
        raise InterpolationError(f"interpolation parameter {theta} outside [0, 1]")
    theta = min(max(theta, 0.0), 1.0)
    if abs((1 - theta) * y0 + theta * y1 - y) > tol:
        raise InterpolationError("the q-equation is inconsistent with the p-equation")
    return theta


def _rt(b0: float, b1: float, theta: float) -> float:
    if theta == 0.0:
        return b0
    if theta == 1.0:
        return b1
    return b0 ** (1.0 - theta) * b1 ** theta


def opnorm_upper_interpolation(T: BlockOperator, p: ExponentLike, q: ExponentLike,
                               anchors: Sequence[tuple]) -> float:
    """Riesz-Thorin upper bound for ``|T|_{p->q}`` from two anchors.

    ``anchors`` holds two ``(p_i, q_i, bound_i)`` triples with
    ``|T|_{p_i->q_i} <= bound_i``.  A ``bound_i`` of ``None`` is filled in
    with the exact closed form, which must exist at that anchor.  Returns
    ``bound_0^(1-theta) bound_1^theta`` where ``theta`` solves
    ``1/p = (1-theta)/p_0 + theta/p_1`` and, consistently, the same for q.
    """
    if len(anchors) != 2:
        raise InterpolationError("exactly two anchors are needed")
    pts = []
    for pa, qa, b in anchors:
        pa, qa = Exponent.of(pa), Exponent.of(qa)
        if b is None:
            b = _closed_form_at(T.matrix, float(pa.reciprocal), float(qa.reciprocal))
            if b is None:
                raise InterpolationError(f"no closed form for |T|_({pa}->{qa})")
        pts.append((float(pa.reciprocal), float(qa.reciprocal), float(b)))
    p, q = Exponent.of(p), Exponent.of(q)
    (x0, y0, b0), (x1, y1, b1) = pts
    theta = _solve_theta(x0, y0, x1, y1, float(p.reciprocal), float(q.reciprocal))
    return _rt(b0, b1, theta)


def _norms_by_reciprocal(a: np.ndarray, recip: float, axis: int) -> np.ndarray:
    """l_r norms of nonnegative ``a`` along ``axis`` where ``recip = 1/r``."""
    if recip <= 0.0:
        return a.max(axis=axis)
    if recip >= 1.0:
        return a.sum(axis=axis)
    r = 1.0 / recip
    scale = a.max(axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    out = np.sum((a / safe) ** r, axis=axis, keepdims=True) ** recip * scale
    return np.squeeze(out, axis=axis)


class _PlainNorms:
    """Memoised closed forms for one matrix as a map between plain spaces.

    Points are ``(x, y) = (1/p, 1/q)`` in the unit square.
    """

    def __init__(self, M: np.ndarray):
        self.A = np.abs(M)
        self.M = M
        self._col: dict[float, float] = {}
        self._row: dict[float, float] = {}
        self._sigma = None

    def col(self, y: float) -> float:
        """``|M|_{1 -> 1/y}``."""
        key = round(y, 14)
        if key not in self._col:
            self._col[key] = float(_norms_by_reciprocal(self.A, y, axis=0).max())
        return self._col[key]

    def row(self, x: float) -> float:
        """``|M|_{1/x -> inf}``; rows are measured in the dual exponent."""
        key = round(x, 14)
        if key not in self._row:
            self._row[key] = float(_norms_by_reciprocal(self.A, 1.0 - x, axis=1).max())
        return self._row[key]

    @property
    def sigma(self) -> float:
        if self._sigma is None:
            self._sigma = float(np.linalg.norm(self.M, 2))
        return self._sigma

    def exact(self, x: float, y: float):
        if x >= 1.0:
            return self.col(y)
        if y <= 0.0:
            return self.row(x)
        if x == 0.5 and y == 0.5:
            return self.sigma
        return None


def _closed_form_at(M: np.ndarray, x: float, y: float):
    return _PlainNorms(M).exact(x, y)


def _base_bound(nm: _PlainNorms, x: float, y: float, grid: int) -> tuple[float, str]:
    """Best interpolation bound at exactly ``(x, y)``."""
    ex = nm.exact(x, y)
    if ex is not None:
        return ex, "closed-form"
    best, tag = math.inf, ""
    # ray from (1/2, 1/2) through the target to the first edge it meets
    dx, dy = x - 0.5, y - 0.5
    exits = []
    if dx > 0:
        exits.append((0.5 / dx, "x1"))
    if dx < 0:
        exits.append((-0.5 / dx, "x0"))
    if dy < 0:
        exits.append((-0.5 / dy, "y0"))
    if dy > 0:
        exits.append((0.5 / dy, "y1"))
    if exits:
        s = min(e[0] for e in exits)
        usable = [k for v, k in exits if abs(v - s) <= 1e-15 and k in ("x1", "y0")]
        if usable:
            ex_x = min(1.0, max(0.0, 0.5 + s * dx))
            ex_y = min(1.0, max(0.0, 0.5 + s * dy))
            if usable[0] == "x1":
                ex_x = 1.0
            else:
                ex_y = 0.0
            edge_val = nm.exact(ex_x, ex_y)
            val = _rt(nm.sigma, edge_val, 1.0 / s)
            if val < best:
                best, tag = val, "riesz-thorin:center-ray"
    # segments from (1, a) on the l_1-domain edge to (b, 0) on the l_inf-codomain edge
    if 0.0 < x and y <= x:
        a_lo = y / x
        for a in np.linspace(a_lo, 1.0, grid):
            if a <= 0:
                continue
            one_minus_theta = y / a
            theta = 1.0 - one_minus_theta
            if theta <= 0:
                continue
            b = (x - one_minus_theta) / theta
            b = min(max(b, 0.0), 1.0)
            val = _rt(nm.col(a), nm.row(b), theta)
            if val < best:
                best, tag = val, "riesz-thorin:edge-edge"
    return best, tag


def _plain_upper(M: np.ndarray, p: Exponent, q: Exponent, grid: int = 9) -> tuple[float, str]:
    """Upper bound for ``|M|_{p->q}`` between plain spaces."""
    nm = _PlainNorms(M)
    d, m = M.shape
    x, y = float(p.reciprocal), float(q.reciprocal)

    def cost(x2, y2):
        # |v|_{p2} <= m^{max(0, 1/p2 - 1/p)} |v|_p and |w|_q <= d^{max(0, 1/q - 1/q2)} |w|_{q2}
        return m ** max(0.0, x2 - x) * d ** max(0.0, y - y2)

    lin = list(np.linspace(0.0, 1.0, 5))
    xs = {x, 1.0, 1.0 - y, y, 0.5, *lin}
    ys = {y, 0.0, 1.0 - x, x, 0.5, *lin}
    pts = {(x, y), (0.5, 0.5)}
    pts.update((x2, y) for x2 in xs if 0.0 <= x2 <= 1.0)
    pts.update((x, y2) for y2 in ys if 0.0 <= y2 <= 1.0)
    best, best_tag = math.inf, ""
    for x2, y2 in sorted(pts):
        c = cost(x2, y2)
        if c >= best:
            continue
        val, tag = _base_bound(nm, x2, y2, grid)
        val *= c
        if val < best:
            best = val
            best_tag = tag if (x2, y2) == (x, y) else f"{tag}+holder"
    return best, best_tag


def _l2_comparison(space: BlockSpace) -> tuple[float, float]:
    """Constants ``a, b`` with ``|v|_2 <= a |v|_X`` and ``|v|_X <= b |v|_2``."""
    if space.plain_exponent is not None:
        n, r = space.total_dim, float(space.plain_exponent.reciprocal)
        return n ** max(0.0, 0.5 - r), n ** max(0.0, r - 0.5)
    P = float(space.outer.reciprocal)
    N = space.n_blocks
    a_in = max(d ** max(0.0, 0.5 - float(e.reciprocal)) for e, d in space.blocks)
    b_in = max(d ** max(0.0, float(e.reciprocal) - 0.5) for e, d in space.blocks)
    return a_in * N ** max(0.0, 0.5 - P), b_in * N ** max(0.0, P - 0.5)


def opnorm_upper(T: BlockOperator, *, sign_enum_cap: int = 12) -> tuple[float, list[str]]:
    """Certified upper bound for ``|T|`` together with the tags of what achieved it."""
    M = T.matrix
    if not M.any():
        return 0.0, ["zero"]
    dom, cod = T.domain, T.codomain
    pd, pc = dom.plain_exponent, cod.plain_exponent
    cands: list[tuple[float, str]] = []
    if pd == ONE:
        cands.append((opnorm_exact_1_to_q(T), "exact:l1-domain"))
    if pc == INF:
        cands.append((opnorm_exact_to_inf(T), "exact:linf-codomain"))
    if pd == INF and M.shape[1] <= sign_enum_cap:
        cands.append((opnorm_exact_from_inf(T, cap=sign_enum_cap), "exact:sign-enumeration"))
    if pd is not None and pc is not None and not cands:
        cands.append(_plain_upper(M, pd, pc))
    if pd is None or pc is None or dom.n_blocks > 1 or cod.n_blocks > 1:
        # valid for any declared block partition, and sharp for block-diagonal maps
        cands.append((_block_reduction_upper(T), "block-reduction"))
    a = _l2_comparison(dom)[0]
    b = _l2_comparison(cod)[1]
    cands.append((b * float(np.linalg.norm(M, 2)) * a, "l2-comparison"))
    val, tag = min(cands, key=lambda c: c[0])
    return float(val), [tag]


def _block_reduction_upper(T: BlockOperator) -> float:
    """``|T| <= |(|T_ab|)_ab|_{l_P -> l_Q}`` for the matrix of block norms."""
    dom, cod = T.domain, T.codomain
    nb = np.zeros((cod.n_blocks, dom.n_blocks))
    for a, (qa, _) in enumerate(cod.blocks):
        for b, (pb, _) in enumerate(dom.blocks):
            blk = T.block(a, b)
            if not blk.any():
                continue
            sub = BlockOperator(blk, BlockSpace.lp(pb, blk.shape[1]), BlockSpace.lp(qa, blk.shape[0]))
            nb[a, b] = opnorm_upper(sub)[0]
    outer = BlockOperator(nb, BlockSpace.lp(dom.outer, dom.n_blocks), BlockSpace.lp(cod.outer, cod.n_blocks))
    return opnorm_upper(outer)[0]


def _candidate_witnesses(T: BlockOperator):
    """Witnesses from closed forms: basis vectors, norming rows, singular vectors, sign vectors."""
    M = T.matrix
    dom, cod = T.domain, T.codomain
    cols = block_norm(M, cod, axis=0)
    e = np.zeros(M.shape[1])
    e[int(np.argmax(cols))] = 1.0
    yield e, "basis-probe"
    rows = block_norm(M.T, dom.dual(), axis=0)
    i = int(np.argmax(rows))
    if rows[i] > 0:
        yield block_duality_map(M[i], dom.dual()), "row-norming"
    if min(M.shape) <= 2048:
        _, _, vt = np.linalg.svd(M, full_matrices=False)
        yield vt[0], "singular-vector"
    if dom.plain_exponent == INF and M.shape[1] <= 12:
        yield opnorm_exact_from_inf(T, return_witness=True)[1], "sign-enumeration"


def opnorm_bracket(T: BlockOperator, cfg: PowerIterConfig = PowerIterConfig(), *,
                   sign_enum_cap: int = 12) -> NormBracket:
    """Lower bound from the best witness, upper bound from :func:`opnorm_upper`."""
    m = T.shape[1]
    if not T.matrix.any():
        return NormBracket(0.0, 0.0, np.eye(m)[0], ("zero",))
    est = opnorm_power(T, cfg)
    best_val, best_x, best_tag = est.value, est.witness, "power"
    for x, tag in _candidate_witnesses(T):
        r = ratio(T, x)
        if r > best_val:
            best_val, best_x, best_tag = r, x, tag
    upper, up_tags = opnorm_upper(T, sign_enum_cap=sign_enum_cap)
    tags = [f"lower:{best_tag}"] + [f"upper:{t}" for t in up_tags]
    if "unconverged" in est.method_tags:
        tags.append("power-unconverged")
    tags.extend(t for t in est.method_tags if t.startswith("endpoint"))
    witness = best_x / block_norm(best_x, T.domain)
    return NormBracket(float(ratio(T, witness)), upper, witness, tuple(tags))
