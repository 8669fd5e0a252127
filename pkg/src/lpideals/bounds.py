"""Checks of the counting bound, the average-decay bound and the
factorization lower bound on explicit finite matrices.

All checks are built from the sound side of an operator-norm bracket, so a
passing :class:`BoundReport` is a genuine verification of that instance.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DegenerateInputError, DimensionError, DomainError
from .lp_core import DEFAULT_TOL, BlockOperator, BlockSpace, Exponent, ExponentLike, duality_map, lp_norm
from .opnorm import NormBracket, PowerIterConfig, opnorm_bracket, opnorm_upper

__all__ = [
    "BoundReport", "BasisGrowthProfile",
    "decay_exponent_r", "counting_exponent",
    "verify_lemma25", "verify_cor26", "lemma25_worst_ratio", "adversarial_lemma25",
    "HillClimbConfig", "factorization_delta", "factorization_lower_bound",
    "perturbed_factorization_bound", "campaign", "random_matrix", "digest",
]


def digest(*parts: Any) -> str:
    """Short sha256 digest of arrays and plain values."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part, dtype=float).tobytes())
            h.update(str(part.shape).encode())
        else:
            h.update(repr(part).encode())
        h.update(b"|")
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class BoundReport:
    """One checked inequality ``lhs <= rhs``."""

    lhs: float
    rhs: float
    passed: bool
    margin: float
    label: str = ""
    constants: Mapping[str, Any] = field(default_factory=dict)
    inputs_digest: str = ""
    tol: float = DEFAULT_TOL

    @classmethod
    def check(cls, lhs: float, rhs: float, *, label: str = "", constants=None,
              inputs_digest: str = "", tol: float = DEFAULT_TOL) -> "BoundReport":
        lhs, rhs = float(lhs), float(rhs)
        return cls(lhs, rhs, bool(lhs <= rhs + tol), rhs - lhs, label,
                   dict(constants or {}), inputs_digest, tol)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constants": dict(self.constants),
            "pass": self.passed,
            "margin": self.margin,
            "inputs_digest": self.inputs_digest,
        }


@dataclass(frozen=True)
class BasisGrowthProfile:
    """Growth exponents of the domain and codomain bases, ``1 <= t < s``.

    With exact l_s and l_t unit bases all three constants are one.
    """

    s: float
    t: float
    c1: float = 1.0
    c2: float = 1.0
    cu: float = 1.0

    def __post_init__(self):
        if not (1.0 <= self.t < self.s < math.inf):
            raise DomainError(f"need 1 <= t < s < inf, got s={self.s}, t={self.t}")
        if min(self.c1, self.c2, self.cu) <= 0:
            raise DomainError("growth constants must be positive")

    @property
    def unit_constants(self) -> bool:
        return self.c1 == self.c2 == self.cu == 1.0


def _check_st(s: float, t: float):
    if not (s > 1.0 and 1.0 <= t < s):
        raise DomainError(f"need s > 1 and 1 <= t < s, got s={s}, t={t}")


def decay_exponent_r(s: float, t: float) -> float:
    """``r(s,t) = (s-1)(s-t) / ((s-1)(s-t) + s^2)``, strictly inside (0, 1)."""
    s, t = float(s), float(t)
    _check_st(s, t)
    den = (s - 1.0) * (s - t)
    return den / (den + s * s)


def counting_exponent(s: float, t: float) -> float:
    """``s^2 / ((s-1)(s-t))``: the counting bound is ``rho`` to minus this power."""
    s, t = float(s), float(t)
    _check_st(s, t)
    return s * s / ((s - 1.0) * (s - t))


def _as_operator(T, profile: BasisGrowthProfile | None) -> tuple[BlockOperator, float, float]:
    if not isinstance(T, BlockOperator):
        if profile is None:
            raise ConfigError("a raw matrix needs a BasisGrowthProfile")
        T = BlockOperator.between(T, profile.s, profile.t)
    s_exp, t_exp = T.domain.plain_exponent, T.codomain.plain_exponent
    if s_exp is None or t_exp is None or s_exp.is_inf or t_exp.is_inf:
        raise ConfigError("the counting bounds need plain l_s and l_t spaces with finite exponents")
    s, t = float(s_exp), float(t_exp)
    if profile is not None:
        if not (math.isclose(profile.s, s) and math.isclose(profile.t, t)):
            raise ConfigError(f"profile (s={profile.s}, t={profile.t}) does not match {T}")
        if not profile.unit_constants:
            raise ConfigError("only unit growth constants (c = 1) are supported")
    _check_st(s, t)
    return T, s, t


def _column_sups(T: BlockOperator) -> np.ndarray:
    return np.abs(T.matrix).max(axis=0)


def verify_lemma25(T, rho: float, profile: BasisGrowthProfile | None = None, *,
                   bracket: NormBracket | None = None,
                   cfg: PowerIterConfig = PowerIterConfig(),
                   tol: float = DEFAULT_TOL) -> BoundReport:
    """Count columns with ``|T e_i|_inf >= |T| rho`` and compare with ``rho^(-s^2/((s-1)(s-t)))``.

    The threshold uses the bracket's lower end, which can only enlarge the
    counted set; a pass is therefore a verification.  The count at the
    upper end is reported alongside.
    """
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    T, s, t = _as_operator(T, profile)
    br = bracket if bracket is not None else opnorm_bracket(T, cfg)
    sups = _column_sups(T)
    count = int(np.count_nonzero(sups >= br.lower * rho))
    count_upper = int(np.count_nonzero(sups >= br.upper * rho))
    alpha = counting_exponent(s, t)
    rhs = rho ** (-alpha)
    return BoundReport.check(
        count, rhs, label="lemma25", tol=tol,
        constants={"s": s, "t": t, "rho": rho, "exponent": alpha, "c": 1.0,
                   "norm_lower": br.lower, "norm_upper": br.upper,
                   "count_at_upper": count_upper},
        inputs_digest=digest(T.matrix, s, t, rho))


def lemma25_worst_ratio(T: BlockOperator, norm: float, s: float, t: float) -> float:
    """``max_k k (v_k / norm)^alpha`` over the sorted column sup-norms ``v_1 >= v_2 >= ...``.

    This is the largest ``count / rhs`` over all thresholds ``rho``.
    """
    if norm <= 0:
        return 0.0
    v = np.sort(_column_sups(T))[::-1] / norm
    k = np.arange(1, v.size + 1)
    return float(np.max(k * v ** counting_exponent(s, t)))


def verify_cor26(T, profile: BasisGrowthProfile | None = None, *,
                 bracket: NormBracket | None = None,
                 cfg: PowerIterConfig = PowerIterConfig(),
                 tol: float = DEFAULT_TOL) -> BoundReport:
    """Average of the column sup-norms against ``|T| (1 + c) m^(-r(s,t))`` with ``c = 1``."""
    T, s, t = _as_operator(T, profile)
    m = T.shape[1]
    if bracket is None:
        upper = opnorm_upper(T)[0]
        lower = math.nan
    else:
        upper, lower = bracket.upper, bracket.lower
    r = decay_exponent_r(s, t)
    lhs = float(_column_sups(T).mean())
    rhs = upper * 2.0 * m ** (-r)
    return BoundReport.check(
        lhs, rhs, label="cor26", tol=tol,
        constants={"s": s, "t": t, "m": m, "r": r, "c": 1.0,
                   "norm_upper": upper, "norm_lower": lower},
        inputs_digest=digest(T.matrix, s, t))


@dataclass(frozen=True)
class HillClimbConfig:
    restarts: int = 5
    sweeps: int = 200
    steps: tuple[float, ...] = (0.5, 0.9, 1.1, 2.0)
    entries_per_sweep: int | None = None
    warm_iters: int = 6
    seed: int = 0


def _fast_norm(M: np.ndarray, s: Exponent, t: Exponent, x0: np.ndarray, iters: int):
    """A few warm-started power steps for ``|M|_{s->t}``; returns (estimate, witness)."""
    sd = s.dual()
    x = x0 / lp_norm(x0, s)
    best, best_x = lp_norm(M @ x, t), x
    for _ in range(iters):
        y = M @ x
        if not y.any():
            break
        w = M.T @ duality_map(y, t)
        if not w.any():
            break
        x = duality_map(w, sd)
        val = lp_norm(M @ x, t)
        if val > best:
            best, best_x = val, x
    cols = np.array([lp_norm(M[:, j], t) for j in range(M.shape[1])])
    j = int(np.argmax(cols))
    if cols[j] > best:
        best_x = np.eye(M.shape[1])[j]
        best = cols[j]
    return best, best_x


def adversarial_lemma25(s: float, t: float, m: int, n: int,
                        cfg: HillClimbConfig = HillClimbConfig(), *,
                        max_dim: int = 128, return_matrix: bool = False):
    """Search for matrices that push the counting bound towards equality.

    Coordinate-wise multiplicative hill climbing on the matrix entries,
    maximising :func:`lemma25_worst_ratio`.  During the climb the norm is a
    warm-started power estimate; the final matrix is re-measured with a
    full bracket and its lower end (the sound direction).  The result
    should never exceed one.
    """
    _check_st(s, t)
    if not (1 <= m <= max_dim and 1 <= n <= max_dim):
        raise DomainError(f"dimensions must lie in [1, {max_dim}]")
    se, te = Exponent.of(s), Exponent.of(t)
    alpha = counting_exponent(s, t)
    best_ratio, best_M = -1.0, None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(restart,)))
        M = rng.standard_normal((n, m))
        if restart % 2 == 1:
            # start from a near-permutation to reach the equality regime sooner
            M = 0.05 * M
            M[np.arange(min(m, n)), np.arange(min(m, n))] = 1.0
        x = np.ones(m)

        def objective(A, x0):
            nrm, wit = _fast_norm(A, se, te, x0, cfg.warm_iters)
            v = np.sort(np.abs(A).max(axis=0))[::-1] / nrm
            return float(np.max(np.arange(1, m + 1) * v ** alpha)), wit

        cur, x = objective(M, x)
        entries = [(i, j) for i in range(n) for j in range(m)]
        for _ in range(cfg.sweeps):
            if cfg.entries_per_sweep is not None and cfg.entries_per_sweep < len(entries):
                pick = rng.choice(len(entries), size=cfg.entries_per_sweep, replace=False)
                order = [entries[k] for k in sorted(pick)]
            else:
                order = entries
            improved = False
            for i, j in order:
                old = M[i, j]
                best_step = None
                for step in cfg.steps:
                    M[i, j] = old * step
                    val, wit = objective(M, x)
                    if val > cur + 1e-15:
                        cur, best_step, x_new = val, step, wit
                M[i, j] = old if best_step is None else old * best_step
                if best_step is not None:
                    x = x_new
                    improved = True
            if not improved:
                break
        T = BlockOperator.between(M, s, t)
        br = opnorm_bracket(T, PowerIterConfig(restarts=12, seed=cfg.seed))
        final = lemma25_worst_ratio(T, br.lower, s, t)
        if final > best_ratio:
            best_ratio, best_M = final, M.copy()
    if return_matrix:
        return best_ratio, best_M
    return best_ratio


def _square_operator(V, p, q) -> BlockOperator:
    if isinstance(V, BlockOperator):
        M = V.matrix
    else:
        M = np.atleast_2d(np.asarray(V, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"V must be square, got shape {M.shape}")
    return BlockOperator.between(M, p, q)


def _inverse(M: np.ndarray) -> np.ndarray:
    if np.linalg.cond(M) >= 1e12:
        raise DegenerateInputError("V is singular or too badly conditioned (cond >= 1e12)")
    return np.linalg.inv(M)


def factorization_delta(V, r: ExponentLike,
                        exponent_pair: tuple[ExponentLike, ExponentLike] | None = None) -> float:
    """Upper bound for ``delta = |V^{-1}|`` between the configured exponents.

    The default pair is ``(r', r')``.
    """
    M = V.matrix if isinstance(V, BlockOperator) else np.atleast_2d(np.asarray(V, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"V must be square, got shape {M.shape}")
    rd = Exponent.of(r).dual()
    a, b = exponent_pair if exponent_pair is not None else (rd, rd)
    inv = BlockOperator.between(_inverse(M), a, b)
    return opnorm_upper(inv)[0]


def factorization_lower_bound(V, r: ExponentLike,
                              exponent_pair: tuple[ExponentLike, ExponentLike] | None = None) -> float:
    """``1/delta``: every factorization ``V = AB`` through ``l_r`` has ``|A| |B| >= 1/delta``.

    ``delta`` is taken from the upper end of a bracket, so the returned
    value never overstates the bound.
    """
    return 1.0 / factorization_delta(V, r, exponent_pair)


def perturbed_factorization_bound(V, V_tilde, p: ExponentLike, q: ExponentLike, r: ExponentLike,
                                  exponent_pair=None) -> BoundReport:
    """Check the perturbation radius and, when it holds, report ``1/(2 delta)``.

    ``lhs`` is an upper bound for ``|V~ - V|_{p->q}``, ``rhs`` the radius
    ``(2 max_i |V^{-1} e_i|_p)^{-1}``.  ``passed`` means the hypothesis is
    met and the bound in ``constants["lower_bound"]`` applies.
    """
    Vop = _square_operator(V, p, q)
    Vt = _square_operator(V_tilde, p, q)
    if Vt.shape != Vop.shape:
        raise DimensionError("V and V~ must have the same shape")
    inv = _inverse(Vop.matrix)
    radius = 1.0 / (2.0 * float(lp_norm(inv, p, axis=0).max()))
    diff_upper = opnorm_upper(Vt - Vop)[0]
    delta = factorization_delta(Vop.matrix, r, exponent_pair)
    applicable = diff_upper <= radius
    return BoundReport(
        lhs=diff_upper, rhs=radius, passed=bool(applicable), margin=radius - diff_upper,
        label="perturbation",
        constants={"delta": delta, "applicable": bool(applicable),
                   "lower_bound": 1.0 / (2.0 * delta) if applicable else None,
                   "p": str(Exponent.of(p)), "q": str(Exponent.of(q)), "r": str(Exponent.of(r))},
        inputs_digest=digest(Vop.matrix, Vt.matrix, str(p), str(q), str(r)))


ENSEMBLES = ("gaussian", "sparse", "spiky", "signs")


def random_matrix(rng: np.random.Generator, rows: int, cols: int, kind: str) -> np.ndarray:
    """Random test matrices; ``spiky`` ones have a few dominant entries."""
    if kind == "gaussian":
        return rng.standard_normal((rows, cols))
    if kind == "sparse":
        return rng.standard_normal((rows, cols)) * (rng.random((rows, cols)) < 0.3)
    if kind == "spiky":
        M = 0.1 * rng.standard_normal((rows, cols))
        k = int(rng.integers(1, min(rows, cols) + 1))
        M[rng.choice(rows, size=k), rng.choice(cols, size=k, replace=False)] += rng.choice([-1, 1], size=k)
        return M
    if kind == "signs":
        return rng.choice([-1.0, 1.0], size=(rows, cols))
    raise ConfigError(f"unknown ensemble {kind!r}")


def campaign(trials: int, seed: int, *, s_grid: Sequence[float] = (1.8, 2.0, 3.0),
             t_grid: Sequence[float] = (1.2, 1.5),
             rho_grid: Sequence[float] = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8),
             max_dim: int = 12, ensembles: Iterable[str] = ENSEMBLES,
             cfg: PowerIterConfig = PowerIterConfig(restarts=6)) -> list[dict]:
    """Fuzz the counting and average bounds on random normalized matrices.

    Every trial draws its own seed from ``(seed, trial)``, so each output row
    can be reproduced on its own.  Returns one dict per trial holding both
    checks.
    """
    ensembles = tuple(ensembles)
    rows = []
    for trial in range(trials):
        tseed = int(np.random.SeedSequence(seed, spawn_key=(trial,)).generate_state(1, dtype=np.uint64)[0])
        rng = np.random.default_rng(tseed)
        s = float(rng.choice(s_grid))
        t = float(rng.choice(t_grid))
        rho = float(rng.choice(rho_grid))
        m = int(rng.integers(1, max_dim + 1))
        n = int(rng.integers(1, max_dim + 1))
        kind = ensembles[int(rng.integers(len(ensembles)))]
        M = random_matrix(rng, n, m, kind)
        if not M.any():
            M[0, 0] = 1.0
        T = BlockOperator.between(M, s, t)
        M = M / opnorm_upper(T)[0]
        T = BlockOperator.between(M, s, t)
        br = opnorm_bracket(T, PowerIterConfig(cfg.max_iters, cfg.tol, cfg.restarts, tseed % 2**32,
                                               cfg.endpoint_eps))
        lem = verify_lemma25(T, rho, bracket=br)
        cor = verify_cor26(T, bracket=br)
        rows.append({"seed": tseed, "m": m, "n": n, "s": s, "t": t, "rho": rho, "kind": kind,
                     "lemma25": lem, "cor26": cor})
    return rows
