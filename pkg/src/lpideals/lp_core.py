"""Exponents, finite l_p sums and dense operators between them.

Everything here is real, dense and double precision.  A vector in a
:class:`BlockSpace` is a flat ``numpy`` array; the space only records how
the coordinates are grouped and which exponents apply.

>>> p = Exponent.of("4/3")
>>> p.dual()
Exponent('4')
>>> lp_norm([3.0, 4.0], 2)
5.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import CompositionError, DegenerateInputError, DimensionError, DomainError

__all__ = [
    "Exponent", "ONE", "TWO", "INF", "DEFAULT_TOL",
    "BlockSpace", "BlockOperator",
    "lp_norm", "dual_exponent", "duality_map", "block_norm", "block_duality_map",
    "apply", "compose", "direct_sum", "adjoint", "identity",
    "operator_to_json", "operator_from_json",
]

DEFAULT_TOL = 1e-9

ExponentLike = Union["Exponent", int, float, Fraction, str]


@total_ordering
@dataclass(frozen=True)
class Exponent:
    """A Hölder exponent in ``[1, inf]``.

    Finite values are stored as exact :class:`~fractions.Fraction` so that
    ``p.dual().dual() == p`` holds exactly.  ``value is None`` encodes
    infinity; it is never stored as a float.
    """

    value: Fraction | None

    def __post_init__(self):
        if self.value is not None:
            if not isinstance(self.value, Fraction):
                raise TypeError("Exponent.value must be a Fraction or None")
            if self.value < 1:
                raise DomainError(f"exponent must be >= 1, got {self.value}")

    @classmethod
    def of(cls, x: ExponentLike) -> "Exponent":
        """Coerce ints, floats, fractions and strings (``"inf"``, ``"4/3"``, ``"1.5"``)."""
        if isinstance(x, Exponent):
            return x
        if isinstance(x, str):
            s = x.strip().lower()
            if s in ("inf", "infinity", "∞", "+inf"):
                return cls(None)
            return cls(Fraction(s))
        if isinstance(x, bool):
            raise TypeError("bool is not an exponent")
        if isinstance(x, (int, Fraction)):
            return cls(Fraction(x))
        if isinstance(x, (float, np.floating)):
            x = float(x)
            if math.isnan(x):
                raise DomainError("exponent is NaN")
            if math.isinf(x):
                if x < 0:
                    raise DomainError("exponent must be >= 1")
                return cls(None)
            # decimal spelling, so 1.2 becomes 6/5 rather than its binary expansion
            return cls(Fraction(repr(x)))
        if isinstance(x, np.integer):
            return cls(Fraction(int(x)))
        raise TypeError(f"cannot interpret {x!r} as an exponent")

    @property
    def is_inf(self) -> bool:
        return self.value is None

    @property
    def reciprocal(self) -> Fraction:
        """``1/p`` (zero for infinity)."""
        return Fraction(0) if self.value is None else 1 / self.value

    def dual(self) -> "Exponent":
        """The conjugate exponent ``p'`` with ``1/p + 1/p' = 1``."""
        if self.value is None:
            return ONE
        if self.value == 1:
            return INF
        return Exponent(self.value / (self.value - 1))

    def __float__(self) -> float:
        return math.inf if self.value is None else float(self.value)

    def __lt__(self, other):
        other = Exponent.of(other) if not isinstance(other, Exponent) else other
        if self.value is None:
            return False
        if other.value is None:
            return True
        return self.value < other.value

    def __str__(self) -> str:
        return "inf" if self.value is None else str(self.value)

    def __repr__(self) -> str:
        return f"Exponent('{self}')"


ONE = Exponent(Fraction(1))
TWO = Exponent(Fraction(2))
INF = Exponent(None)


def dual_exponent(p: ExponentLike) -> Exponent:
    return Exponent.of(p).dual()


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {x.shape}")
    if x.size == 0:
        raise DimensionError("empty vector")
    return x


def _pnorm(a: np.ndarray, p: Exponent, axis=None) -> np.ndarray | float:
    """l_p norm of a nonnegative array ``a`` along ``axis`` (overflow-safe)."""
    if p.is_inf:
        return a.max(axis=axis)
    if p.value == 1:
        return a.sum(axis=axis)
    if p.value == 2:
        scale = a.max(axis=axis, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        r = np.sqrt(np.sum((a / safe) ** 2, axis=axis, keepdims=True)) * scale
        return r.item() if axis is None else np.squeeze(r, axis=axis)
    pf = float(p.value)
    scale = a.max(axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    r = np.sum((a / safe) ** pf, axis=axis, keepdims=True) ** (1.0 / pf) * scale
    return r.item() if axis is None else np.squeeze(r, axis=axis)


def lp_norm(x, p: ExponentLike, axis=None):
    """``(sum |x_i|^p)^(1/p)``, or ``max |x_i|`` for ``p = inf``.

    With ``axis`` given, ``x`` may be a matrix and the norms of its slices
    are returned.
    """
    p = Exponent.of(p)
    if axis is None:
        x = _as_vector(x)
        return float(_pnorm(np.abs(x), p))
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DimensionError("empty array")
    return _pnorm(np.abs(x), p, axis=axis)


def _unit_dual(x: np.ndarray, p: Exponent) -> np.ndarray:
    """Norming functional of a nonzero ``x`` in ``l_p``: ``<y, x> = |x|_p`` and ``|y|_{p'} = 1``."""
    a = np.abs(x)
    m = a.max()
    if p.is_inf:
        y = np.zeros_like(x)
        j = int(np.argmax(a))
        y[j] = np.sign(x[j])
        return y
    if p.value == 1:
        return np.sign(x)
    pf = float(p.value)
    u = a / m
    nrm = np.sum(u ** pf) ** (1.0 / pf)
    return np.sign(x) * (u / nrm) ** (pf - 1.0)


def duality_map(x, p: ExponentLike) -> np.ndarray:
    """The norming functional of ``x`` in ``l_p``.

    For ``1 < p < inf`` this is ``sign(x) |x|^(p-1) / |x|_p^(p-1)``.  At
    ``p = 1`` the sign vector is used and at ``p = inf`` the first
    coordinate of maximal modulus is selected.
    """
    x = _as_vector(x)
    if not np.any(x):
        raise DegenerateInputError("duality map of the zero vector")
    return _unit_dual(x, Exponent.of(p))


@dataclass(frozen=True)
class BlockSpace:
    """A finite l_P-sum ``(⊕ l_{p_n}(d_n))_P``.

    ``blocks`` is an ordered tuple of ``(inner_exponent, dim)`` pairs.
    """

    outer: Exponent
    blocks: tuple[tuple[Exponent, int], ...]
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        outer = Exponent.of(self.outer)
        blocks = tuple((Exponent.of(e), int(d)) for e, d in self.blocks)
        if not blocks:
            raise DimensionError("a BlockSpace needs at least one block")
        for _, d in blocks:
            if d < 1:
                raise DimensionError(f"block dimensions must be positive, got {d}")
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "blocks", blocks)
        offs = [0]
        for _, d in blocks:
            offs.append(offs[-1] + d)
        object.__setattr__(self, "_offsets", tuple(offs))

    @classmethod
    def lp(cls, p: ExponentLike, dim: int) -> "BlockSpace":
        p = Exponent.of(p)
        return cls(p, ((p, dim),))

    @classmethod
    def sum(cls, outer: ExponentLike, blocks: Iterable[tuple[ExponentLike, int]]) -> "BlockSpace":
        return cls(Exponent.of(outer), tuple((Exponent.of(e), d) for e, d in blocks))

    @property
    def total_dim(self) -> int:
        return self._offsets[-1]

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def offsets(self) -> tuple[int, ...]:
        return self._offsets

    def block_slice(self, index: int) -> slice:
        return slice(self._offsets[index], self._offsets[index + 1])

    @property
    def plain_exponent(self) -> Exponent | None:
        """``p`` if this space is isometrically plain ``l_p(total_dim)``, else ``None``."""
        if all(e == self.outer or d == 1 for e, d in self.blocks):
            return self.outer
        if self.n_blocks == 1:
            return self.blocks[0][0]
        return None

    def canonical(self) -> tuple:
        """A normal form: equal for spaces with the same norm on the same coordinates."""
        p = self.plain_exponent
        if p is not None:
            return ("plain", p, self.total_dim)
        # a block normed like the outer sum splits into one-dimensional blocks
        flat = []
        for e, d in self.blocks:
            if e == self.outer or d == 1:
                flat.extend([(self.outer, 1)] * d)
            else:
                flat.append((e, d))
        return ("sum", self.outer, tuple(flat))

    def equivalent(self, other: "BlockSpace") -> bool:
        return self.canonical() == other.canonical()

    def dual(self) -> "BlockSpace":
        return BlockSpace(self.outer.dual(), tuple((e.dual(), d) for e, d in self.blocks))

    def norm(self, x) -> float:
        return block_norm(x, self)

    def to_json(self) -> dict:
        return {"outer": str(self.outer), "blocks": [[str(e), d] for e, d in self.blocks]}

    @classmethod
    def from_json(cls, obj: dict) -> "BlockSpace":
        return cls.sum(obj["outer"], [(e, int(d)) for e, d in obj["blocks"]])

    def __str__(self) -> str:
        p = self.plain_exponent
        if p is not None:
            return f"l_{p}({self.total_dim})"
        inner = ", ".join(f"l_{e}({d})" for e, d in self.blocks)
        return f"({inner})_{self.outer}"


def _block_norms(a: np.ndarray, space: BlockSpace) -> np.ndarray:
    """Inner norms of each block; ``a`` is ``|x|`` with blocks along axis 0."""
    rows = [np.atleast_1d(_pnorm(a[space.block_slice(k)], e, axis=0))
            for k, (e, _) in enumerate(space.blocks)]
    return np.stack(rows, axis=0)


def block_norm(x, space: BlockSpace, axis=None):
    """Outer l_P norm of the vector of inner block norms.

    With ``axis=0`` every column of a matrix is measured.
    """
    if axis is None:
        x = _as_vector(x)
        if x.size != space.total_dim:
            raise DimensionError(f"vector of length {x.size} in a space of dim {space.total_dim}")
        p = space.plain_exponent
        a = np.abs(x)
        if p is not None:
            return float(_pnorm(a, p))
        return float(_pnorm(_block_norms(a, space)[:, 0], space.outer))
    if axis != 0:
        raise ValueError("block_norm only measures columns (axis=0)")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != space.total_dim:
        raise DimensionError(f"matrix of shape {x.shape} in a space of dim {space.total_dim}")
    a = np.abs(x)
    p = space.plain_exponent
    if p is not None:
        return _pnorm(a, p, axis=0)
    return _pnorm(_block_norms(a, space), space.outer, axis=0)


def block_duality_map(x, space: BlockSpace) -> np.ndarray:
    """Norming functional of ``x`` in a block space, built blockwise.

    Returns ``y`` in the dual space with ``<y, x> = |x|`` and ``|y|_* = 1``.
    """
    x = _as_vector(x)
    if x.size != space.total_dim:
        raise DimensionError(f"vector of length {x.size} in a space of dim {space.total_dim}")
    if not np.any(x):
        raise DegenerateInputError("duality map of the zero vector")
    p = space.plain_exponent
    if p is not None:
        return _unit_dual(x, p)
    a = np.abs(x)
    inner = _block_norms(a, space)[:, 0]
    weights = _unit_dual(inner, space.outer)
    y = np.zeros_like(x)
    for k, (e, _) in enumerate(space.blocks):
        if weights[k] == 0 or inner[k] == 0:
            continue
        sl = space.block_slice(k)
        y[sl] = weights[k] * _unit_dual(x[sl], e)
    return y


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """A dense matrix together with its domain and codomain spaces."""

    matrix: np.ndarray
    domain: BlockSpace
    codomain: BlockSpace

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.ndim != 2:
            raise DimensionError(f"operator matrix must be 2-D, got shape {m.shape}")
        if m.shape != (self.codomain.total_dim, self.domain.total_dim):
            raise DimensionError(
                f"matrix shape {m.shape} does not match spaces "
                f"{self.codomain.total_dim} x {self.domain.total_dim}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def between(cls, matrix, p: ExponentLike, q: ExponentLike) -> "BlockOperator":
        """Wrap a plain matrix as an operator ``l_p(cols) -> l_q(rows)``."""
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(m, BlockSpace.lp(p, m.shape[1]), BlockSpace.lp(q, m.shape[0]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def block(self, row: int, col: int) -> np.ndarray:
        return self.matrix[self.codomain.block_slice(row), self.domain.block_slice(col)]

    def with_spaces(self, domain: BlockSpace, codomain: BlockSpace) -> "BlockOperator":
        return BlockOperator(self.matrix, domain, codomain)

    def __call__(self, x) -> np.ndarray:
        return apply(self, x)

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        return compose(self, other)

    def __mul__(self, c: float) -> "BlockOperator":
        return BlockOperator(self.matrix * float(c), self.domain, self.codomain)

    __rmul__ = __mul__

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        _check_same_spaces(self, other)
        return BlockOperator(self.matrix + other.matrix, self.domain, self.codomain)

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        _check_same_spaces(self, other)
        return BlockOperator(self.matrix - other.matrix, self.domain, self.codomain)

    def __eq__(self, other):
        if not isinstance(other, BlockOperator):
            return NotImplemented
        return (self.domain == other.domain and self.codomain == other.codomain
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None

    def __repr__(self) -> str:
        return f"BlockOperator({self.domain} -> {self.codomain})"


def _check_same_spaces(a: BlockOperator, b: BlockOperator):
    if not (a.domain.equivalent(b.domain) and a.codomain.equivalent(b.codomain)):
        raise CompositionError("operators act between different spaces")


def identity(space: BlockSpace, codomain: BlockSpace | None = None) -> BlockOperator:
    """The coordinatewise identity, optionally into a differently normed codomain."""
    codomain = space if codomain is None else codomain
    if codomain.total_dim != space.total_dim:
        raise DimensionError("identity needs equal dimensions")
    return BlockOperator(np.eye(space.total_dim), space, codomain)


def apply(T: BlockOperator, x) -> np.ndarray:
    x = _as_vector(x)
    if x.size != T.domain.total_dim:
        raise DimensionError(f"vector of length {x.size} for an operator on dim {T.domain.total_dim}")
    return T.matrix @ x


def compose(A: BlockOperator, B: BlockOperator) -> BlockOperator:
    """``A ∘ B``; requires ``B.codomain`` and ``A.domain`` to be the same space."""
    if not B.codomain.equivalent(A.domain):
        raise CompositionError(f"cannot compose: {B.codomain} is not {A.domain}")
    return BlockOperator(A.matrix @ B.matrix, B.domain, A.codomain)


def direct_sum(T1: BlockOperator, T2: BlockOperator) -> BlockOperator:
    """Block-diagonal sum; the outer exponents of the two operators must agree."""
    if T1.domain.outer != T2.domain.outer or T1.codomain.outer != T2.codomain.outer:
        raise CompositionError("direct sum needs matching outer exponents")
    r1, c1 = T1.shape
    r2, c2 = T2.shape
    m = np.zeros((r1 + r2, c1 + c2))
    m[:r1, :c1] = T1.matrix
    m[r1:, c1:] = T2.matrix
    dom = BlockSpace(T1.domain.outer, T1.domain.blocks + T2.domain.blocks)
    cod = BlockSpace(T1.codomain.outer, T1.codomain.blocks + T2.codomain.blocks)
    return BlockOperator(m, dom, cod)


def block_diagonal(blocks: Sequence[BlockOperator], outer_domain: ExponentLike,
                   outer_codomain: ExponentLike) -> BlockOperator:
    """Block-diagonal operator from single-block pieces, with the given outer exponents."""
    dom_blocks, cod_blocks = [], []
    for b in blocks:
        dom_blocks.extend(b.domain.blocks)
        cod_blocks.extend(b.codomain.blocks)
    dom = BlockSpace.sum(outer_domain, dom_blocks)
    cod = BlockSpace.sum(outer_codomain, cod_blocks)
    m = np.zeros((cod.total_dim, dom.total_dim))
    r = c = 0
    for b in blocks:
        h, w = b.shape
        m[r:r + h, c:c + w] = b.matrix
        r += h
        c += w
    return BlockOperator(m, dom, cod)


def adjoint(T: BlockOperator) -> BlockOperator:
    """Transpose acting between the dual spaces."""
    return BlockOperator(T.matrix.T, T.codomain.dual(), T.domain.dual())


def operator_to_json(T: BlockOperator) -> dict:
    rows, cols = T.shape
    return {
        "rows": rows,
        "cols": cols,
        "data": [float(v) for v in T.matrix.ravel(order="C")],
        "domain": T.domain.to_json(),
        "codomain": T.codomain.to_json(),
    }


def operator_from_json(obj: dict) -> BlockOperator:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != rows * cols:
        raise DimensionError(f"data has {data.size} entries, expected {rows * cols}")
    m = data.reshape(rows, cols)
    dom = BlockSpace.from_json(obj["domain"]) if "domain" in obj else BlockSpace.lp(2, cols)
    cod = BlockSpace.from_json(obj["codomain"]) if "codomain" in obj else BlockSpace.lp(2, rows)
    return BlockOperator(m, dom, cod)
