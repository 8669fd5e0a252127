"""Finite truncations of the concrete operators: Hadamard blocks, formal
identities, the block-diagonal ``U``, ``T(p,q)`` and the pair ``S``, ``T``
built from Rademacher systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConfigError, DomainError
from .khintchine import DIM_CAP, KhintchineSystem, khintchine_system
from .lp_core import BlockOperator, BlockSpace, Exponent, ExponentLike, block_diagonal, identity

__all__ = [
    "TruncationPlan", "hadamard", "scaled_hadamard_block", "hadamard_scale", "build_U",
    "formal_identity_section", "build_Tpq", "build_S", "build_T", "check_pq",
]

RULES = ("linear", "hadamard", "khintchine")


@dataclass(frozen=True)
class TruncationPlan:
    """Number of blocks and the rule for their dimensions.

    ``linear``: d_n = n; ``hadamard``: d_n = 2^n; ``khintchine``: 2^n on
    the wide side paired with n on the narrow side.
    """

    n_max: int = 8
    block_dim_rule: str = "hadamard"
    cap: int = DIM_CAP

    def __post_init__(self):
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")
        if self.block_dim_rule not in RULES:
            raise ConfigError(f"unknown block rule {self.block_dim_rule!r}")
        if self.total_dim > self.cap:
            raise CapacityError(f"total dimension {self.total_dim} exceeds the cap {self.cap}")

    @property
    def narrow_dims(self) -> list[int]:
        return list(range(1, self.n_max + 1))

    @property
    def wide_dims(self) -> list[int]:
        return [2 ** n for n in range(1, self.n_max + 1)]

    @property
    def block_dims(self) -> list[int]:
        return self.narrow_dims if self.block_dim_rule == "linear" else self.wide_dims

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)


def check_pq(p: ExponentLike, q: ExponentLike) -> tuple[Exponent, Exponent]:
    p, q = Exponent.of(p), Exponent.of(q)
    if not (Exponent.of(1) < p < Exponent.of(2) < q) or q.is_inf:
        raise ConfigError(f"need 1 < p < 2 < q < inf, got p={p}, q={q}")
    return p, q


def hadamard(n: int, cap: int = DIM_CAP) -> np.ndarray:
    """Sylvester matrix ``H_n`` of size ``2^n``, integer entries ±1."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if 2 ** n > cap:
        raise CapacityError(f"2^{n} exceeds the dimension cap {cap}")
    H = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        H = np.block([[H, H], [H, -H]])
    return H


def hadamard_scale(n: int, p: ExponentLike, q: ExponentLike) -> float:
    """``2^(-n / min(p', q))``."""
    p, q = Exponent.of(p), Exponent.of(q)
    m = min(p.dual(), q)
    return 2.0 ** (-n * float(m.reciprocal))


def scaled_hadamard_block(n: int, p: ExponentLike, q: ExponentLike, cap: int = DIM_CAP) -> BlockOperator:
    """``U_n = 2^(-n/min(p',q)) H_n`` as an operator ``l_p(2^n) -> l_q(2^n)``; norm at most one."""
    p, q = check_pq(p, q)
    return BlockOperator.between(hadamard(n, cap) * hadamard_scale(n, p, q), p, q)


def build_U(p: ExponentLike, q: ExponentLike, plan: TruncationPlan) -> BlockOperator:
    """Block diagonal of ``U_1 .. U_{n_max}`` from the l_p-sum into the l_q-sum."""
    p, q = check_pq(p, q)
    if plan.block_dim_rule != "hadamard":
        raise ConfigError("build_U needs the hadamard block rule")
    blocks = [scaled_hadamard_block(n, p, q, plan.cap) for n in range(1, plan.n_max + 1)]
    return block_diagonal(blocks, p, q)


def formal_identity_section(p: ExponentLike, q: ExponentLike, m: int) -> BlockOperator:
    """The inclusion ``l_p(m) -> l_q(m)`` for ``p < q``."""
    p, q = Exponent.of(p), Exponent.of(q)
    if not p < q:
        raise DomainError(f"need p < q, got p={p}, q={q}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    return identity(BlockSpace.lp(p, m), BlockSpace.lp(q, m))


def build_Tpq(p: ExponentLike, q: ExponentLike, plan: TruncationPlan) -> BlockOperator:
    """Identity from the l_p-sum of l_2(n) into the l_q-sum of the same blocks."""
    if plan.block_dim_rule != "linear":
        raise ConfigError("build_Tpq needs the linear block rule")
    blocks = [(2, n) for n in plan.narrow_dims]
    return identity(BlockSpace.sum(p, blocks), BlockSpace.sum(q, blocks))


def _systems(systems, exponent: Exponent, plan: TruncationPlan) -> list[KhintchineSystem]:
    if systems is None:
        return [khintchine_system(n, exponent, cap=plan.cap) for n in range(1, plan.n_max + 1)]
    systems = list(systems)
    if len(systems) != plan.n_max:
        raise ConfigError(f"expected {plan.n_max} systems, got {len(systems)}")
    for n, sys in enumerate(systems, start=1):
        if sys.n != n or sys.p != exponent:
            raise ConfigError(f"system {n} is the ({sys.n}, {sys.p}) system, expected ({n}, {exponent})")
    return systems


def _khintchine_rule(plan: TruncationPlan):
    if plan.block_dim_rule not in ("khintchine", "hadamard"):
        raise ConfigError("S and T need wide blocks of dimension 2^n")


def build_S(p: ExponentLike, q: ExponentLike, plan: TruncationPlan,
            systems: Sequence[KhintchineSystem] | None = None) -> BlockOperator:
    """Block n sends ``x in l_p(2^n)`` to ``(<x*_(n,i), x>)_i in l_q(n)``."""
    p, q = check_pq(p, q)
    _khintchine_rule(plan)
    systems = _systems(systems, p, plan)
    blocks = [BlockOperator(s.duals, BlockSpace.lp(p, s.k), BlockSpace.lp(q, s.n)) for s in systems]
    return block_diagonal(blocks, p, q)


def build_T(p: ExponentLike, q: ExponentLike, plan: TruncationPlan,
            systems: Sequence[KhintchineSystem] | None = None) -> BlockOperator:
    """Block n sends the unit vector ``e_(n,i)`` of l_p(n) to ``y_(n,i) in l_q(2^n)``."""
    p, q = check_pq(p, q)
    _khintchine_rule(plan)
    systems = _systems(systems, q, plan)
    blocks = [BlockOperator(s.vectors.T, BlockSpace.lp(p, s.n), BlockSpace.lp(q, s.k)) for s in systems]
    return block_diagonal(blocks, p, q)
