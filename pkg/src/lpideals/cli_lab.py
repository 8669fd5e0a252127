"""Command-line harness: configuration, seeding, experiments and output files.

Every option can also be given in a flat ``key = value`` config file passed
with ``--config``; options on the command line win.  Outputs go to
``--out``, else to ``$LPIDEALS_OUT``, else to ``./lpideals-out``.

Exit codes: 0 success, 2 configuration error, 3 capacity exceeded,
4 a verification failed (all outputs are still written).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .bounds import campaign, factorization_lower_bound
from .constructions import (
    TruncationPlan, build_S, build_T, build_Tpq, build_U, formal_identity_section, hadamard,
)
from .errors import CapacityError, LabError
from .ideal_functionals import (
    DecayTable, SamplerConfig, decay_experiment_phi, decay_experiment_psi, loglog_slope,
    separation_certificate,
)
from .khintchine import fss_witness, flat_vector_search, khintchine_system
from .lp_core import BlockOperator, BlockSpace, operator_from_json, operator_to_json
from .opnorm import PowerIterConfig, opnorm_bracket, opnorm_upper

log = logging.getLogger("lpideals")

ENV_OUT = "LPIDEALS_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_FAIL = 0, 2, 3, 4


# ---------------------------------------------------------------- serialization

def _fmt(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    return "%.17g" % v


def to_json_text(obj: Any, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(to_json_text(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json_text(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _fmt(float(v)) if math.isfinite(v) else ""
    return "" if v is None else str(v)


def write_csv(path: Path, header: list[str], rows: list[list[Any]]):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def write_json(path: Path, obj: Any):
    Path(path).write_text(to_json_text(obj) + "\n")


def emit_plot_data(table: DecayTable, path) -> float | None:
    """Write per-n medians ``(n, measured, bound)`` and return the log-log slope.

    The slope is None when it is undefined (fewer than two distinct n).
    """
    if not table.rows:
        raise ValueError("empty decay table")
    summary = table.summary()
    write_csv(Path(path), ["n", "measured", "bound"],
              [[s["n"], s["median"], s["bound"]] for s in summary])
    return loglog_slope([s["n"] for s in summary], [s["median"] for s in summary])


# ---------------------------------------------------------------- configuration

# dest -> (type, default, help); each entry is both a flag and a config key
OPTIONS: dict[str, tuple[Callable, Any, str]] = {
    "seed": (int, 0, "global 64-bit seed"),
    "p": (float, None, "domain exponent"),
    "q": (float, None, "codomain exponent"),
    "r": (float, 2.0, "factorization exponent"),
    "s": (float, None, "domain exponent of the counting bounds"),
    "t": (float, None, "codomain exponent of the counting bounds"),
    "n": (int, 3, "dimension / block index"),
    "m": (int, 8, "ambient dimension"),
    "n_max": (int, 6, "number of blocks"),
    "samples": (int, 50, "samples per n"),
    "trials": (int, 100, "number of random trials"),
    "max_dim": (int, 12, "largest random matrix dimension"),
    "restarts": (int, 6, "power iteration restarts"),
    "matrix": (str, None, "operator JSON file"),
    "basis": (str, None, "JSON list of basis rows"),
    "name": (str, "U", "operator to construct: U, Tpq, S, T, hadamard, identity"),
}

COMMAND_OPTIONS = {
    "opnorm": ["matrix", "p", "q", "restarts", "seed"],
    "construct": ["name", "p", "q", "n_max", "n", "m"],
    "khintchine": ["n", "p", "restarts"],
    "fss": ["p", "q", "n", "m", "trials", "seed"],
    "flat-vector": ["basis", "n", "m", "trials", "seed"],
    "lemma25": ["s", "t", "trials", "max_dim", "restarts", "seed"],
    "cor26": ["s", "t", "trials", "max_dim", "restarts", "seed"],
    "factor-bound": ["p", "q", "r", "n_max", "trials", "seed"],
    "phi": ["p", "q", "n_max", "samples", "seed"],
    "psi": ["p", "q", "n_max", "samples", "seed"],
    "certify": ["p", "q", "n_max", "samples", "seed"],
}


class ConfigFailure(LabError):
    pass


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; keys may use dashes or underscores."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigFailure(f"cannot parse config file {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


@dataclass
class ExperimentConfig:
    command: str
    params: dict[str, Any]
    out: Path
    version: str = __version__

    def canonical(self) -> dict:
        return {"command": self.command, "params": dict(sorted(self.params.items())), "version": self.version}

    def digest(self) -> str:
        return hashlib.sha256(to_json_text(self.canonical()).encode()).hexdigest()


@dataclass
class RunManifest:
    config: ExperimentConfig
    results: list[dict] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    exit: int = EXIT_OK
    wall_clock: float | None = None

    def to_json(self) -> dict:
        out = {"config": self.config.canonical(), "digest": self.config.digest(),
               "version": self.config.version, "results": self.results,
               "files": sorted(self.files), "exit": self.exit}
        if self.wall_clock is not None:
            out["wall_clock"] = self.wall_clock
        return out


def resolve_config(command: str, args: argparse.Namespace) -> ExperimentConfig:
    file_vals = read_config_file(args.config) if args.config else {}
    params = {}
    for dest in COMMAND_OPTIONS[command]:
        typ, default, _ = OPTIONS[dest]
        val = getattr(args, dest, None)
        if val is None and dest in file_vals:
            try:
                val = typ(file_vals[dest])
            except ValueError as exc:
                raise ConfigFailure(f"bad value for {dest}: {file_vals[dest]!r}") from exc
        params[dest] = default if val is None else val
    unknown = set(file_vals) - set(OPTIONS)
    if unknown:
        raise ConfigFailure(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = args.out or os.environ.get(ENV_OUT) or "lpideals-out"
    return ExperimentConfig(command, params, Path(out))


def _need(params, *keys):
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise ConfigFailure(f"missing required option(s): {', '.join(missing)}")


# ---------------------------------------------------------------- experiments

def _cfg(params) -> PowerIterConfig:
    return PowerIterConfig(restarts=params.get("restarts", 6), seed=params.get("seed", 0) % 2 ** 32)


def run_opnorm(cfg: ExperimentConfig, man: RunManifest):
    P = cfg.params
    _need(P, "matrix")
    T = operator_from_json(json.loads(Path(P["matrix"]).read_text()))
    if P["p"] is not None or P["q"] is not None:
        p = P["p"] if P["p"] is not None else 2.0
        q = P["q"] if P["q"] is not None else 2.0
        T = BlockOperator.between(T.matrix, p, q)
    br = opnorm_bracket(T, _cfg(P))
    _emit(cfg, man, "opnorm.json", {"operator": str(T), **br.to_json()})
    man.results.append({"check": "opnorm", "lower": br.lower, "upper": br.upper})


def run_construct(cfg: ExperimentConfig, man: RunManifest):
    P = cfg.params
    name = P["name"]
    if name == "hadamard":
        H = hadamard(P["n"])
        T = BlockOperator.between(H, 1, math.inf)
    elif name == "identity":
        _need(P, "p", "q")
        T = formal_identity_section(P["p"], P["q"], P["m"])
    elif name in ("U", "Tpq", "S", "T"):
        _need(P, "p", "q")
        if name == "U":
            T = build_U(P["p"], P["q"], TruncationPlan(P["n_max"], "hadamard"))
        elif name == "Tpq":
            T = build_Tpq(P["p"], P["q"], TruncationPlan(P["n_max"], "linear"))
        elif name == "S":
            T = build_S(P["p"], P["q"], TruncationPlan(P["n_max"], "khintchine"))
        else:
            T = build_T(P["p"], P["q"], TruncationPlan(P["n_max"], "khintchine"))
    else:
        raise ConfigFailure(f"unknown operator name {name!r}")
    _emit(cfg, man, f"{name}.json", operator_to_json(T))
    man.results.append({"check": "construct", "name": name, "shape": list(T.shape)})


def run_khintchine(cfg: ExperimentConfig, man: RunManifest):
    P = cfg.params
    _need(P, "p")
    sys_ = khintchine_system(P["n"], P["p"], cfg=_cfg(P))
    lo, hi = sys_.constants
    bio = float(np.abs(sys_.biorthogonality() - np.eye(sys_.n)).max())
    _emit(cfg, man, "khintchine.json", {
        "n": sys_.n, "p": float(sys_.p), "k": sys_.k, "lo": lo, "hi": hi,
        "projection": sys_.projection_bracket.to_json(), "measured_C": sys_.measured_C,
        "biorthogonality_error": bio})
    man.results.append({"check": "khintchine", "measured_C": sys_.measured_C})


def _random_bases(params, label: int):
    n, m = params["n"], params["m"]
    for trial in range(params["trials"]):
        rng = np.random.default_rng(np.random.SeedSequence(params["seed"], spawn_key=(label, trial)))
        yield trial, rng.standard_normal((n, m))


def run_fss(cfg: ExperimentConfig, man: RunManifest):
    P = cfg.params
    _need(P, "p", "q")
    rows, fails = [], 0
    for trial, basis in _random_bases(P, 10):
        w = fss_witness(P["p"], P["q"], basis)
        ok = w.bound_check.passed and w.sup_check.passed
        fails += not ok
        rows.append([trial, P["n"], P["m"], w.bound_check.lhs, w.bound_check.rhs,
                     w.sup_check.lhs, w.sup_check.rhs, ok])
    _emit_csv(cfg, man, "fss.csv", ["trial", "n", "m", "lhs", "rhs", "sup", "sup_bound", "pass"], rows)
    _tally(man, "fss", len(rows), fails)


def run_flat_vector(cfg: ExperimentConfig, man: RunManifest):
    P = cfg.params
    if P["basis"]:
        bases = [(0, np.asarray(json.loads(Path(P["basis"]).read_text()), dtype=float))]
    else:
        bases = list(_random_bases(P, 11))
    out, fails = [], 0
    for trial, basis in bases:
        w = flat_vector_search(basis)
        ok = len(w.attaining_set) >= basis.shape[0]
        fails += not ok
        out.append({"trial": trial, "n": basis.shape[0], "m": basis.shape[1], "pass": ok, **w.to_json()})
    _emit(cfg, man, "flat_vector.json", out)
    _tally(man, "flat-vector", len(out), fails)


def _campaign_rows(P, check: str):
    grid = {}
    if P["s"] is not None:
        grid["s_grid"] = (P["s"],)
    if P["t"] is not None:
        grid["t_grid"] = (P["t"],)
    rows = campaign(P["trials"], P["seed"], max_dim=P["max_dim"],
                    cfg=PowerIterConfig(restarts=P["restarts"]), **grid)
    out, fails = [], 0
    for r in rows:
        rep = r[check]
        fails += not rep.passed
        out.append([r["seed"], r["m"], r["n"], r["s"], r["t"], r["rho"], rep.lhs, rep.rhs, rep.passed])
    return out, fails


def run_counting(cfg: ExperimentConfig, man: RunManifest, check: str):
    rows, fails = _campaign_rows(cfg.params, check)
    _emit_csv(cfg, man, f"{check}.csv", ["seed", "m", "n", "s", "t", "rho", "lhs", "rhs", "pass"], rows)
    _tally(man, check, len(rows), fails)


def run_factor_bound(cfg: ExperimentConfig, man: RunManifest):
    """Random factorizations ``U_n = (U_n B^+) B`` through l_r against ``1/delta``."""
    from .constructions import scaled_hadamard_block
    P = cfg.params
    _need(P, "p", "q")
    rows, fails, trend = [], 0, []
    for n in range(1, P["n_max"] + 1):
        V = scaled_hadamard_block(n, P["p"], P["q"]).matrix
        m = V.shape[0]
        bound = factorization_lower_bound(V, P["r"])
        trend.append(bound)
        for trial in range(P["trials"]):
            rng = np.random.default_rng(np.random.SeedSequence(P["seed"], spawn_key=(12, n, trial)))
            k = int(rng.integers(m, 2 * m + 3))
            B = rng.standard_normal((k, m))
            A = V @ np.linalg.pinv(B)
            prod = (opnorm_upper(BlockOperator.between(A, P["r"], P["q"]))[0]
                    * opnorm_upper(BlockOperator.between(B, P["p"], P["r"]))[0])
            ok = prod >= bound - 1e-6
            fails += not ok
            rows.append([n, trial, k, prod, bound, ok])
    _emit_csv(cfg, man, "factor_bound.csv", ["n", "trial", "k", "product_upper", "inverse_delta", "pass"], rows)
    monotone = all(b2 >= b1 - 1e-12 for b1, b2 in zip(trend, trend[1:]))
    _tally(man, "factor-bound", len(rows), fails, inverse_delta=trend, nondecreasing=monotone)


def _decay_outputs(cfg: ExperimentConfig, man: RunManifest, table: DecayTable, stem: str):
    rows = [[r.n, r.sample_id, r.measured, r.bound, r.C, r.passed and r.chain_pass] for r in table.rows]
    _emit_csv(cfg, man, f"{stem}.csv", ["n", "sample_id", "measured", "bound", "C", "pass"], rows)
    path = cfg.out / f"{stem}_plot.csv"
    slope = emit_plot_data(table, path)
    man.files.append(path.name)
    return {"kind": table.kind, "p": table.p, "q": table.q, "ensemble": table.ensemble,
            "rows": table.summary(), "slope": slope, "slope_undefined": slope is None,
            "pass": table.all_pass}


def run_functional(cfg: ExperimentConfig, man: RunManifest, kind: str):
    P = cfg.params
    _need(P, "p", "q")
    sc = SamplerConfig(P["samples"], P["seed"])
    ns = range(1, P["n_max"] + 1)
    exp = decay_experiment_phi if kind == "phi" else decay_experiment_psi
    table = exp(P["p"], P["q"], ns, sc)
    summary = _decay_outputs(cfg, man, table, f"decay_{kind}")
    _emit(cfg, man, f"decay_{kind}.json", summary)
    _tally(man, f"decay-{kind}", len(table.rows), sum(not (r.passed and r.chain_pass) for r in table.rows),
           slope=summary["slope"])


def run_certify(cfg: ExperimentConfig, man: RunManifest):
    P = cfg.params
    _need(P, "p", "q")
    cert, tphi, tpsi = separation_certificate(P["p"], P["q"], P["n_max"], seed=P["seed"], samples=P["samples"])
    _decay_outputs(cfg, man, tphi, "decay_phi")
    _decay_outputs(cfg, man, tpsi, "decay_psi")
    _emit(cfg, man, "certificate.json", cert)
    man.results.append({"check": "certify", "pass": cert["pass"]})
    if not cert["pass"]:
        man.exit = EXIT_FAIL


def _emit(cfg, man, name, obj):
    write_json(cfg.out / name, obj)
    man.files.append(name)


def _emit_csv(cfg, man, name, header, rows):
    write_csv(cfg.out / name, header, rows)
    man.files.append(name)


def _tally(man: RunManifest, check: str, total: int, fails: int, **extra):
    man.results.append({"check": check, "total": total, "passed": total - fails, "failed": fails, **extra})
    log.info("%s: %d/%d pass", check, total - fails, total)
    if fails or extra.get("nondecreasing") is False:
        man.exit = EXIT_FAIL


RUNNERS = {
    "opnorm": run_opnorm,
    "construct": run_construct,
    "khintchine": run_khintchine,
    "fss": run_fss,
    "flat-vector": run_flat_vector,
    "lemma25": lambda c, m: run_counting(c, m, "lemma25"),
    "cor26": lambda c, m: run_counting(c, m, "cor26"),
    "factor-bound": run_factor_bound,
    "phi": lambda c, m: run_functional(c, m, "phi"),
    "psi": lambda c, m: run_functional(c, m, "psi"),
    "certify": run_certify,
}


def run(cfg: ExperimentConfig, record_time: bool = False) -> RunManifest:
    """Run one experiment and write its outputs plus ``manifest.json``."""
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigFailure(f"cannot create output directory {cfg.out}: {exc}") from exc
    if not os.access(cfg.out, os.W_OK):
        raise ConfigFailure(f"output directory {cfg.out} is not writable")
    man = RunManifest(cfg)
    start = time.perf_counter()
    RUNNERS[cfg.command](cfg, man)
    if record_time:
        man.wall_clock = time.perf_counter() - start
    write_json(cfg.out / "manifest.json", man.to_json())
    return man


# ---------------------------------------------------------------- argument parsing

def _add_options(parser: argparse.ArgumentParser, command: str):
    for dest in COMMAND_OPTIONS[command]:
        typ, default, help_ = OPTIONS[dest]
        parser.add_argument("--" + dest.replace("_", "-"), dest=dest, type=typ, default=None,
                            help=f"{help_} (default: {default})")
    parser.set_defaults(command=command)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or ./lpideals-out)")
    common.add_argument("--record-time", action="store_true",
                        help="store wall-clock time in the manifest (breaks byte-identical reruns)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lpideals", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="group", required=True)
    for name in ("opnorm", "construct", "khintchine", "fss", "flat-vector", "certify"):
        _add_options(sub.add_parser(name, parents=[common]), name)
    verify = sub.add_parser("verify", help="fuzz campaigns for the quantitative bounds")
    vsub = verify.add_subparsers(dest="which", required=True)
    for name in ("lemma25", "cor26", "factor-bound"):
        _add_options(vsub.add_parser(name, parents=[common]), name)
    func = sub.add_parser("functionals", help="decay experiments for phi_n and psi_n")
    fsub = func.add_subparsers(dest="which", required=True)
    for name in ("phi", "psi"):
        _add_options(fsub.add_parser(name, parents=[common]), name)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args.command, args)
        man = run(cfg, record_time=args.record_time)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (LabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for res in man.results:
        print(json.dumps(res, default=lambda o: o.item() if hasattr(o, "item") else str(o)))
    return man.exit


if __name__ == "__main__":
    sys.exit(main())
