"""The block functionals phi_n and psi_n that separate the two ideals, and
the sampled decay experiments on operators factoring through I(p,2) and I(2,q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bounds import decay_exponent_r
from .constructions import TruncationPlan, build_S, build_T, check_pq
from .errors import ConfigError, DimensionError, DomainError
from .khintchine import KhintchineSystem, fss_witness, khintchine_system
from .lp_core import DEFAULT_TOL, BlockOperator, BlockSpace, Exponent, ExponentLike, lp_norm
from .opnorm import opnorm_upper

__all__ = [
    "FunctionalSpec", "phi_spec", "psi_spec", "phi_n", "psi_n",
    "SamplerConfig", "DecayRow", "DecayTable", "loglog_slope",
    "phi_chain", "psi_chain", "phi_bound", "psi_bounds",
    "decay_experiment_phi", "decay_experiment_psi", "separation_certificate",
]


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str
    n: int
    p: Exponent
    q: Exponent
    system: KhintchineSystem

    def __post_init__(self):
        if self.kind not in ("phi", "psi"):
            raise ConfigError(f"kind must be phi or psi, got {self.kind!r}")
        if self.n < 1 or self.system.n != self.n:
            raise ConfigError("n must be >= 1 and match the system")
        want = self.p if self.kind == "phi" else self.q
        if self.system.p != want:
            raise ConfigError(f"{self.kind} needs the system at exponent {want}, got {self.system.p}")


def phi_spec(n: int, p: ExponentLike, q: ExponentLike, system: KhintchineSystem | None = None) -> FunctionalSpec:
    p, q = Exponent.of(p), Exponent.of(q)
    return FunctionalSpec("phi", n, p, q, system or khintchine_system(n, p))


def psi_spec(n: int, p: ExponentLike, q: ExponentLike, system: KhintchineSystem | None = None) -> FunctionalSpec:
    p, q = Exponent.of(p), Exponent.of(q)
    return FunctionalSpec("psi", n, p, q, system or khintchine_system(n, q))


def _diag_block(U: BlockOperator, n: int, rows: int, cols: int) -> np.ndarray:
    if U.domain.n_blocks < n or U.codomain.n_blocks < n:
        raise DimensionError(f"operator has fewer than {n} blocks")
    V = U.block(n - 1, n - 1)
    if V.shape != (rows, cols):
        raise DimensionError(f"block {n} has shape {V.shape}, expected {(rows, cols)}")
    return V


def phi_n(U: BlockOperator, spec: FunctionalSpec) -> float:
    """``(1/n) sum_i (U_nn x_(n,i))_i`` on the n-th diagonal block (``n x 2^n``)."""
    sys = spec.system
    V = _diag_block(U, spec.n, sys.n, sys.k)
    return float(np.sum(V * sys.vectors)) / spec.n


def psi_n(U: BlockOperator, spec: FunctionalSpec) -> float:
    """``(1/n) sum_i <y*_(n,i), U_nn e_i>`` on the n-th diagonal block (``2^n x n``)."""
    sys = spec.system
    V = _diag_block(U, spec.n, sys.k, sys.n)
    return float(np.sum(V.T * sys.duals)) / spec.n


@dataclass(frozen=True)
class SamplerConfig:
    samples: int = 50
    seed: int = 0
    ensemble: str = "gaussian"

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError("need at least one sample per n")
        if self.ensemble != "gaussian":
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")


@dataclass
class DecayRow:
    n: int
    sample_id: int
    measured: float
    bound: float
    C: float
    chain: dict = field(default_factory=dict)
    chain_pass: bool = True
    tol: float = DEFAULT_TOL

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + self.tol


@dataclass
class DecayTable:
    kind: str
    p: float
    q: float
    rows: list[DecayRow]
    ensemble: str = "gaussian"

    @property
    def all_pass(self) -> bool:
        return all(r.passed and r.chain_pass for r in self.rows)

    def ns(self) -> list[int]:
        return sorted({r.n for r in self.rows})

    def medians(self) -> dict[int, float]:
        return {n: float(np.median([r.measured for r in self.rows if r.n == n])) for n in self.ns()}

    def slope(self) -> float | None:
        med = self.medians()
        return loglog_slope(list(med), list(med.values()))

    def summary(self) -> list[dict]:
        out = []
        for n in self.ns():
            rs = [r for r in self.rows if r.n == n]
            out.append({"n": n, "median": float(np.median([r.measured for r in rs])),
                        "max": max(r.measured for r in rs), "bound": rs[0].bound, "C": rs[0].C,
                        "pass": all(r.passed for r in rs), "chain_pass": all(r.chain_pass for r in rs)})
        return out


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float | None:
    """Least-squares slope of ``log value`` against ``log n``; None when undefined."""
    ns, values = np.asarray(ns, float), np.asarray(values, float)
    keep = values > 0
    ns, values = ns[keep], values[keep]
    if ns.size < 2 or np.ptp(ns) == 0:
        return None
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def phi_bound(C: float, p: float, n: int) -> float:
    r = decay_exponent_r(2.0, p)
    return C ** (p / 2) * (2 * C) ** ((2 - p) / 2) * n ** (-r * (2 - p) / 2)


def psi_bounds(C: float, q: float, n: int) -> tuple[float, float]:
    """Both constants for the psi bound: with ``2C`` and with ``C + 1``."""
    qd = q / (q - 1)
    r = decay_exponent_r(2.0, qd)
    decay = n ** (-r * (2 - qd) / 2)
    return (C ** (qd / 2) * (2 * C) ** ((2 - qd) / 2) * decay,
            C ** (qd / 2) * (C + 1) ** ((2 - qd) / 2) * decay)


def _chain(vecs: np.ndarray, outer: np.ndarray, value: float, C: float, e: float, n: int,
           tol: float) -> tuple[dict, bool]:
    """Inequality chain shared by both functionals.

    ``vecs`` holds the vectors ``B x_i`` (or ``A* y*_i``) as columns, measured
    in l_e with ``1 <= e < 2``; ``outer`` holds the norms of the paired
    factor applied to the unit vectors.  Each step is checked on its own.
    """
    h = (2 - e) / 2
    r = decay_exponent_r(2.0, e)
    sup = np.abs(vecs).max(axis=0)
    l2 = np.linalg.norm(vecs, axis=0)
    le = lp_norm(vecs, e, axis=0)
    mean_sup = float(sup.mean())
    mean_sup_h = float((sup ** h).mean())
    pair = float(np.mean(outer * l2))
    steps = {
        "average_decay": (mean_sup, 2 * C * n ** (-r)),
        "concavity": (mean_sup_h, mean_sup ** h),
        "power_decay": (mean_sup ** h, (2 * C) ** h * n ** (-r * h)),
        "interpolation": (float(np.max(l2 - sup ** h * le ** (e / 2))), 0.0),
        "vector_bound": (float(np.max(sup ** h * le ** (e / 2) - C ** (e / 2) * sup ** h)), 0.0),
        "pairing": (abs(value), pair),
        "pairing_bound": (pair, C ** (e / 2) * mean_sup_h),
    }
    ok = all(lhs <= rhs + tol for lhs, rhs in steps.values())
    chain = {k: {"lhs": float(a), "rhs": float(b)} for k, (a, b) in steps.items()}
    return chain, ok


def phi_chain(A: np.ndarray, B: np.ndarray, sys: KhintchineSystem, C: float, tol: float = DEFAULT_TOL):
    """Chain for ``phi_n(A I(p,2) B)`` with ``B: l_p(2^n) -> l_p(D)``, ``A: l_2(D) -> l_q(n)``."""
    n, p = sys.n, float(sys.p)
    value = float(np.sum((A @ B) * sys.vectors)) / n
    vecs = B @ sys.vectors.T
    outer = np.linalg.norm(A, axis=1)
    return value, _chain(vecs, outer, value, C, p, n, tol)


def psi_chain(A: np.ndarray, B: np.ndarray, sys: KhintchineSystem, C: float, tol: float = DEFAULT_TOL):
    """Chain for ``psi_n(A I(2,q) B)`` with ``B: l_p(n) -> l_2(D)``, ``A: l_q(D) -> l_q(2^n)``."""
    n, qd = sys.n, float(sys.p.dual())
    value = float(np.sum((A @ B).T * sys.duals)) / n
    vecs = A.T @ sys.duals.T
    outer = np.linalg.norm(B, axis=0)
    return value, _chain(vecs, outer, value, C, qd, n, tol)


def _normalized(rng, rows, cols, p, q) -> np.ndarray:
    G = rng.standard_normal((rows, cols))
    return G / opnorm_upper(BlockOperator.between(G, p, q))[0]


def _embed(V: np.ndarray, n: int, dom_inner, dom_dims, cod_inner, cod_dims, p, q) -> BlockOperator:
    dom = BlockSpace.sum(p, [(dom_inner, d) for d in dom_dims])
    cod = BlockSpace.sum(q, [(cod_inner, d) for d in cod_dims])
    M = np.zeros((cod.total_dim, dom.total_dim))
    M[cod.block_slice(n - 1), dom.block_slice(n - 1)] = V
    return BlockOperator(M, dom, cod)


def _rng(seed: int, kind: str, n: int, sample: int) -> np.random.Generator:
    tag = 0 if kind == "phi" else 1
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, n, sample)))


def decay_experiment_phi(p: ExponentLike, q: ExponentLike, n_range: Iterable[int],
                         sampler_cfg: SamplerConfig = SamplerConfig(), *,
                         systems: dict[int, KhintchineSystem] | None = None,
                         tol: float = DEFAULT_TOL) -> DecayTable:
    """Sample ``A I(p,2) B`` with ``|A|, |B| <= 1`` and check ``|phi_n|`` against its decay bound.

    ``B`` maps the n-th block l_p(2^n) into l_p(2^n) and ``A`` maps l_2(2^n)
    into l_q(n); both are Gaussian, divided by a certified norm upper bound.
    """
    pe, qe = check_pq(p, q)
    pf = float(pe)
    rows = []
    for n in n_range:
        sys = (systems or {}).get(n) or khintchine_system(n, pe)
        C = sys.measured_C
        spec = FunctionalSpec("phi", n, pe, qe, sys)
        bound = phi_bound(C, pf, n)
        k = sys.k
        for j in range(sampler_cfg.samples):
            rng = _rng(sampler_cfg.seed, "phi", n, j)
            B = _normalized(rng, k, k, pe, pe)
            A = _normalized(rng, n, k, 2, qe)
            U = _embed(A @ B, n, pe, [2 ** m for m in range(1, n + 1)], qe, list(range(1, n + 1)), pe, qe)
            measured = abs(phi_n(U, spec))
            value, (chain, ok) = phi_chain(A, B, sys, C, tol)
            ok = ok and abs(value - phi_n(U, spec)) <= 1e-12 * max(1.0, abs(value))
            rows.append(DecayRow(n, j, measured, bound, C, chain, ok, tol))
    return DecayTable("phi", pf, float(qe), rows, sampler_cfg.ensemble)


def decay_experiment_psi(p: ExponentLike, q: ExponentLike, n_range: Iterable[int],
                         sampler_cfg: SamplerConfig = SamplerConfig(), *,
                         systems: dict[int, KhintchineSystem] | None = None,
                         tol: float = DEFAULT_TOL) -> DecayTable:
    """Sample ``A I(2,q) B`` with ``|A|, |B| <= 1`` and check ``|psi_n|`` against its decay bound.

    The bound is asserted with the larger of the two constants ``2C`` and
    ``C + 1``; both values are kept in each row's chain record.
    """
    pe, qe = check_pq(p, q)
    qf = float(qe)
    rows = []
    for n in n_range:
        sys = (systems or {}).get(n) or khintchine_system(n, qe)
        C = sys.measured_C
        spec = FunctionalSpec("psi", n, pe, qe, sys)
        b2c, bc1 = psi_bounds(C, qf, n)
        bound = max(b2c, bc1)
        k = sys.k
        for j in range(sampler_cfg.samples):
            rng = _rng(sampler_cfg.seed, "psi", n, j)
            B = _normalized(rng, k, n, pe, 2)
            A = _normalized(rng, k, k, qe, qe)
            U = _embed(A @ B, n, pe, list(range(1, n + 1)), qe, [2 ** m for m in range(1, n + 1)], pe, qe)
            measured = abs(psi_n(U, spec))
            value, (chain, ok) = psi_chain(A, B, sys, C, tol)
            chain["bound_2C"] = {"lhs": measured, "rhs": b2c}
            chain["bound_C_plus_1"] = {"lhs": measured, "rhs": bc1}
            ok = ok and abs(value - psi_n(U, spec)) <= 1e-12 * max(1.0, abs(value))
            rows.append(DecayRow(n, j, measured, bound, C, chain, ok, tol))
    return DecayTable("psi", float(pe), qf, rows, sampler_cfg.ensemble)


def _fss_probes(p: Exponent, q: Exponent, n_max: int, seed: int) -> list[dict]:
    out = []
    for d in range(1, min(n_max, 5) + 1):
        m = min(12, 2 * d + 2)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, d)))
        basis = rng.standard_normal((d, m))
        for label, (a, b) in (("I(2,q)", (Exponent.of(2), q)), ("I(p,2)", (p, Exponent.of(2)))):
            w = fss_witness(a, b, basis)
            out.append({"section": label, "n": d, "m": m,
                        "bound_check": w.bound_check.to_json(), "sup_check": w.sup_check.to_json()})
    return out


def separation_certificate(p: ExponentLike, q: ExponentLike, n_max: int, *, seed: int = 0,
                           samples: int = 50) -> tuple[dict, DecayTable, DecayTable]:
    """Finite-scale evidence that the two ideals are incomparable.

    Returns the certificate dict and the two decay tables.  The certificate
    holds the exact values ``phi_n(S)`` and ``psi_n(T)``, per-n summaries of
    both decay tables and flat-vector witnesses for the sections of I(2,q)
    and I(p,2).
    """
    pe, qe = check_pq(p, q)
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    plan = TruncationPlan(n_max, "khintchine")
    sys_p = [khintchine_system(n, pe) for n in range(1, n_max + 1)]
    sys_q = [khintchine_system(n, qe) for n in range(1, n_max + 1)]
    S = build_S(pe, qe, plan, sys_p)
    T = build_T(pe, qe, plan, sys_q)
    phi_S = [phi_n(S, FunctionalSpec("phi", n, pe, qe, sys_p[n - 1])) for n in range(1, n_max + 1)]
    psi_T = [psi_n(T, FunctionalSpec("psi", n, pe, qe, sys_q[n - 1])) for n in range(1, n_max + 1)]
    exact_err = max(abs(v - 1.0) for v in phi_S + psi_T)
    cfg = SamplerConfig(samples, seed)
    ns = range(1, n_max + 1)
    tphi = decay_experiment_phi(pe, qe, ns, cfg, systems={s.n: s for s in sys_p})
    tpsi = decay_experiment_psi(pe, qe, ns, cfg, systems={s.n: s for s in sys_q})
    fss = _fss_probes(pe, qe, n_max, seed)
    fss_ok = all(f["bound_check"]["pass"] and f["sup_check"]["pass"] for f in fss)
    cert = {
        "p": float(pe), "q": float(qe), "n_max": n_max, "seed": seed, "samples": samples,
        "exact": {"phi_S": phi_S, "psi_T": psi_T, "max_error": exact_err, "pass": exact_err <= 1e-10},
        "decay_phi": {"rows": tphi.summary(), "slope": tphi.slope(), "pass": tphi.all_pass},
        "decay_psi": {"rows": tpsi.summary(), "slope": tpsi.slope(), "pass": tpsi.all_pass},
        "measured_C": {"p": [s.measured_C for s in sys_p], "q": [s.measured_C for s in sys_q]},
        "fss": fss,
    }
    cert["pass"] = bool(exact_err <= 1e-10 and tphi.all_pass and tpsi.all_pass and fss_ok)
    return cert, tphi, tpsi
