"""``sobolab`` command line: run an experiment, write a CSV or JSON report.

Configuration precedence is flags, then ``--config`` JSON, then defaults.
Reports carry the resolved configuration, the package version and the
ladder descriptor, and contain no timestamps, so equal inputs give
byte-identical files (the ``bench`` timings excepted).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    TestSuite,
    commutator_weak_scan,
    conjecture_probe,
    counterexample_probe,
    domination_scan,
    poincare_suite_scan,
    sharpness_scan,
)
from .grid import (
    CubeLadder,
    ExponentSet,
    Grid,
    GridFunction,
    brute_force_max_averages,
    load_grid_function,
    sample,
    window_max_averages,
)
from .norms import LorentzIndex
from .operators import (
    ConvolutionCZ,
    SphereKernel,
    commutator,
    hl_maximal,
    iterated_maximal,
    lorentz_maximal,
    nonlinear_commutator,
    power_maximal,
    riesz_potential,
    rough_singular,
)
from .weights import a1q_constant, ainfty_constant, ap_constant, apq_constant, sharpness_closures

SUBCOMMANDS = (
    "constants",
    "operator",
    "sharpness",
    "dominate",
    "poincare",
    "commutator-weak",
    "probe-conjecture",
    "bench",
)
OUT_ENV = "SOBOLAB_OUT"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    dim: int = 2
    N: int = 64
    L: float = 8.0
    p: float | None = None
    q: float | None = None
    alpha: float = 1.0
    deltas: list = field(default_factory=lambda: [0.4, 0.3, 0.22, 0.16, 0.12])
    mode: str = "cell"
    seed: int = 0
    count: int = 20
    op: str = "maximal"
    tags: list = field(default_factory=lambda: ["abs", "M", "M^2", "M_{n'}"])
    kernel: str | None = None
    weight: str = "one"
    function: str = "suite:0"
    b: str = "coord:0"
    m: int = 1
    r: float = 2.0
    s: float = 2.0
    definition: str | None = None
    epsilon: float | None = None
    refinements: int = 3
    out: str | None = None
    format: str = "csv"


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _strings(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="sobolab", description="Weighted Sobolev and maximal-function experiments on uniform grids.")
    parser.add_argument("--version", action="version", version=f"sobolab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file with default settings", default=S)
        p.add_argument("--dim", type=int, default=S)
        p.add_argument("--N", type=int, default=S, help="nodes per axis (power of two)")
        p.add_argument("--L", type=float, default=S, help="box half-width")
        p.add_argument("--out", default=S, help=f"report path (default: ${OUT_ENV} or the current directory)")
        p.add_argument("--format", choices=("csv", "json"), default=S)
        return p

    def suite_flags(p):
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--count", type=int, default=S, help="test functions in the suite")

    c = common(sub.add_parser("constants", help="weight constants over the cube ladder"))
    c.add_argument("--weight", default=S, help="one | power:A | decay:A | sharp:DELTA | file:PATH")
    c.add_argument("--p", type=float, default=S)
    c.add_argument("--q", type=float, default=S)
    c.add_argument("--definition", choices=("A_p", "A_pq", "A_1q", "A_inf"), default=S)

    o = common(sub.add_parser("operator", help="apply one operator to one function"))
    o.add_argument(
        "--op",
        choices=("maximal", "iterated", "power", "lorentz", "riesz", "singular", "commutator", "nonlinear"),
        default=S,
    )
    o.add_argument("--function", default=S, help="suite:I | gauss | indicator | file:PATH")
    o.add_argument("--kernel", default=S, help="builtin kernel name or file:PATH")
    o.add_argument("--b", default=S, help="coord:K | log | file:PATH")
    o.add_argument("--alpha", type=float, default=S)
    o.add_argument("--m", type=int, default=S)
    o.add_argument("--r", type=float, default=S)
    o.add_argument("--s", type=float, default=S)
    o.add_argument("--q", type=float, default=S)
    suite_flags(o)

    s = common(sub.add_parser("sharpness", help="power-weight scaling slopes"))
    s.add_argument("--p", type=float, default=S)
    s.add_argument("--deltas", type=_floats, default=S)
    s.add_argument("--mode", choices=("cell", "point"), default=S)

    d = common(sub.add_parser("dominate", help="pointwise domination by I_1(|grad f|)"))
    d.add_argument("--tags", type=_strings, default=S, help="comma list of abs, M, M^2, M_{n'}, M_{n',1}, M_r, T")
    d.add_argument("--kernel", default=S)
    d.add_argument("--alpha", type=float, default=S)
    d.add_argument("--r", type=float, default=S)
    d.add_argument("--epsilon", type=float, default=S, help="run the M_{n'+epsilon} refinement probe instead")
    d.add_argument("--refinements", type=int, default=S)
    suite_flags(d)

    pc = common(sub.add_parser("poincare", help="Poincare-Sobolev Lorentz ratios"))
    pc.add_argument("--p", type=float, default=S)
    suite_flags(pc)

    cw = common(sub.add_parser("commutator-weak", help="weak-type commutator ratios"))
    cw.add_argument("--kernel", default=S)
    cw.add_argument("--weight", default=S)
    cw.add_argument("--b", default=S)
    cw.add_argument("--m", type=int, default=S)
    cw.add_argument("--p", type=float, default=S)
    suite_flags(cw)

    pr = common(sub.add_parser("probe-conjecture", help="nonlinear commutator ratios (report only)"))
    pr.add_argument("--kernel", default=S)
    pr.add_argument("--weight", default=S)
    pr.add_argument("--p", type=float, default=S)
    pr.add_argument("--refinements", type=int, default=S)
    suite_flags(pr)

    common(sub.add_parser("bench", help="fast against brute-force maximal function"))
    return parser


def _resolve(ns: argparse.Namespace) -> RunConfig:
    cfg = asdict(RunConfig())
    flags = vars(ns).copy()
    command = flags.pop("command")
    path = flags.pop("config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update(flags)
    if command in ("commutator-weak", "probe-conjecture") and "p" not in flags and cfg["p"] is None:
        cfg["p"] = 1.0
    rc = RunConfig(**cfg)
    for key in ("deltas",):
        if isinstance(getattr(rc, key), str):
            setattr(rc, key, _floats(getattr(rc, key)))
    if isinstance(rc.tags, str):
        rc.tags = _strings(rc.tags)
    return rc


# --------------------------------------------------------------------------
# object factories from tags
# --------------------------------------------------------------------------


def _grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.dim, cfg.L, cfg.N)


def _file_function(path: str, grid: Grid) -> GridFunction:
    f = load_grid_function(path)
    if f.grid != grid:
        raise ValueError(f"{path} holds a {f.grid.describe()} function, run grid is {grid.describe()}")
    return f


def _weight_closure(tag: str, dim: int, p: float | None):
    kind, _, arg = tag.partition(":")
    if kind == "one":
        return lambda x: np.ones(x.shape[:-1])
    if kind == "power":
        a = float(arg)
        return lambda x: np.sqrt(np.sum(x**2, axis=-1)) ** a
    if kind == "decay":
        a = float(arg)
        return lambda x: (1 + np.sqrt(np.sum(x**2, axis=-1))) ** a
    if kind == "sharp":
        if p is None:
            raise ValueError("weight sharp:DELTA needs --p")
        return sharpness_closures(float(arg), ExponentSet(dim, p))[0]
    raise ValueError(f"unknown weight {tag!r}")


def _weight(tag: str, grid: Grid, p: float | None) -> GridFunction:
    if tag.startswith("file:"):
        return _file_function(tag[5:], grid)
    return sample(_weight_closure(tag, grid.dim, p), grid)


def _function(tag: str, grid: Grid, seed: int, count: int) -> GridFunction:
    kind, _, arg = tag.partition(":")
    if kind == "suite":
        i = int(arg or 0)
        members = TestSuite(seed, max(count, i + 1), grid).members()
        return members[i].on(grid)[0]
    if kind == "gauss":
        return sample(lambda x: np.exp(-np.sum(x**2, axis=-1)), grid)
    if kind == "indicator":
        return sample(lambda x: np.all(np.abs(x) <= 1, axis=-1).astype(float), grid)
    if kind == "file":
        return _file_function(arg, grid)
    raise ValueError(f"unknown function {tag!r}")


def _symbol(tag: str, grid: Grid) -> GridFunction:
    kind, _, arg = tag.partition(":")
    if kind == "coord":
        k = int(arg or 0)
        if not 0 <= k < grid.dim:
            raise ValueError(f"coordinate index {k} out of range for dim {grid.dim}")
        return sample(lambda x: x[..., k], grid)
    if kind == "log":
        return sample(lambda x: np.log(np.sqrt(np.sum(x**2, axis=-1))), grid)
    if kind == "const":
        return GridFunction(grid, np.full(grid.shape, float(arg or 1.0)))
    if kind == "file":
        return _file_function(arg, grid)
    raise ValueError(f"unknown symbol {tag!r}")


def _kernel(tag: str | None, dim: int) -> ConvolutionCZ:
    if tag is None:
        tag = "hilbert" if dim == 1 else "riesz-1"
    if tag.startswith("file:"):
        k = SphereKernel.from_csv(tag[5:])
        if k.dim != dim:
            raise ValueError(f"kernel file is {k.dim}-dimensional, grid is {dim}-dimensional")
        return ConvolutionCZ(k)
    return ConvolutionCZ.builtin(tag, dim)


# --------------------------------------------------------------------------
# report writing
# --------------------------------------------------------------------------


@dataclass
class Report:
    columns: list
    rows: list
    ladder: str
    summary: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return ";".join(str(int(x)) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _render(report: Report, cfg: RunConfig, command: str) -> str:
    resolved = {k: _jsonable(v) for k, v in asdict(cfg).items() if k not in ("out", "format")}
    resolved["command"] = command
    if cfg.format == "json":
        payload = {
            "columns": report.columns,
            "rows": [dict(zip(report.columns, [_jsonable(v) for v in row])) for row in report.rows],
            "summary": _jsonable(report.summary),
            "config": resolved,
            "version": __version__,
            "ladder": report.ladder,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_fmt(v) for v in row])
    for key in sorted(report.summary):
        buf.write(f"# {key}: {json.dumps(_jsonable(report.summary[key]), sort_keys=True)}\n")
    buf.write(f"# config: {json.dumps(resolved, sort_keys=True)}\n")
    buf.write(f"# version: {__version__}\n")
    buf.write(f"# ladder: {report.ladder}\n")
    return buf.getvalue()


def _out_path(cfg: RunConfig, command: str) -> Path:
    if cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get(OUT_ENV, ".")) / f"{command}.{cfg.format}"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _cmd_constants(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    w = _weight(cfg.weight, grid, cfg.p)
    ladder = CubeLadder(grid)
    definition = cfg.definition
    if definition is None:
        if cfg.p is None:
            raise ValueError("constants needs --p (or --definition A_inf)")
        definition = "A_1q" if cfg.p == 1 else ("A_pq" if cfg.q is not None else "A_p")
    if definition == "A_p":
        rep = ap_constant(w, cfg.p, ladder)
    elif definition == "A_pq":
        rep = apq_constant(w, cfg.p, cfg.q, ladder)
    elif definition == "A_1q":
        q = cfg.q if cfg.q is not None else grid.dim / (grid.dim - 1)
        rep = a1q_constant(w, q, ladder)
    else:
        rep = ainfty_constant(w, ladder)
    row = [rep.definition_tag, rep.p, rep.q, rep.constant, rep.attaining_cube.anchor, rep.attaining_cube.side]
    return Report(["definition_tag", "p", "q", "constant", "anchor", "side_cells"], [row], rep.family), 0


def _cmd_operator(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    f = _function(cfg.function, grid, cfg.seed, cfg.count)
    op = cfg.op
    if op == "maximal":
        out = hl_maximal(f)
    elif op == "iterated":
        out = iterated_maximal(f, cfg.m)
    elif op == "power":
        out = power_maximal(f, cfg.r)
    elif op == "lorentz":
        out = lorentz_maximal(f, LorentzIndex(cfg.s, cfg.q if cfg.q is not None else cfg.s))
    elif op == "riesz":
        out = riesz_potential(f.abs(), cfg.alpha)
    elif op == "singular":
        out = rough_singular(f, _kernel(cfg.kernel, grid.dim))
    elif op == "commutator":
        out = commutator(f, _symbol(cfg.b, grid), _kernel(cfg.kernel, grid.dim), cfg.m)
    elif op == "nonlinear":
        out = nonlinear_commutator(f, _kernel(cfg.kernel, grid.dim))
    else:
        raise ValueError(f"unknown operator {op!r}")
    pts = grid.points().reshape(-1, grid.dim)
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    rows = [[tuple(i), *map(float, x), float(v)] for i, x, v in zip(idx, pts, out.values.ravel())]
    cols = ["node", *[f"x{k}" for k in range(grid.dim)], "value"]
    return Report(cols, rows, CubeLadder(grid).describe(), {"max_abs": float(np.max(np.abs(out.values)))}), 0


def _cmd_sharpness(cfg: RunConfig) -> tuple[Report, int]:
    if cfg.p is None:
        raise ValueError("sharpness needs --p")
    exps = ExponentSet(cfg.dim, cfg.p)
    grid = _grid(cfg)
    rep = sharpness_scan(exps, cfg.deltas, grid, mode=cfg.mode)
    rows = [[d, *(rep.values[k][i] for k in rep.labels)] for i, d in enumerate(rep.deltas)]
    summary = {
        f"fit_{k}": {
            "slope": rep.slopes[k],
            "stderr": rep.stderr[k],
            "expected": rep.expected[k],
            "margin": rep.margin[k],
            "pass": rep.passed(k),
        }
        for k in rep.labels
    }
    summary["mode"] = rep.mode
    return Report(["delta", *rep.labels], rows, CubeLadder(grid).describe(), summary), (0 if rep.all_passed else 2)


def _cmd_dominate(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    suite = TestSuite(cfg.seed, cfg.count, grid)
    if cfg.epsilon is not None:
        reps = counterexample_probe(cfg.epsilon, suite, cfg.refinements, cfg.alpha)
        rows = []
        for k, rep in enumerate(reps):
            n_k = grid.N * 2**k
            rows += [[rep.label, n_k, i, r, rep.taus[i]] for i, r in enumerate(rep.ratios)]
        summary = {"trend": reps[0].trend, "note": "report only"}
        return Report(["tag", "N", "function", "ratio", "tau"], rows, CubeLadder(grid).describe(), summary), 0
    rows, summary = [], {}
    kernel = _kernel(cfg.kernel, grid.dim) if any(t in ("T", "T_Omega") for t in cfg.tags) else None
    for tag in cfg.tags:
        rep = domination_scan(tag, suite, cfg.alpha, T=kernel, r=cfg.r)
        rows += [[rep.label, grid.N, i, r, rep.taus[i]] for i, r in enumerate(rep.ratios)]
        summary[f"suite_max[{rep.label}]"] = {
            "value": rep.suite_max,
            "function": rep.attaining_function,
            "node": list(rep.attaining_location),
        }
    return Report(["tag", "N", "function", "ratio", "tau"], rows, CubeLadder(grid).describe(), summary), 0


def _cmd_poincare(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    exps = ExponentSet(cfg.dim, cfg.p if cfg.p is not None else 1.0)
    rep = poincare_suite_scan(TestSuite(cfg.seed, cfg.count, grid), exps)
    rows = []
    for i, r in enumerate(rep.ratios):
        rows.append([i, r, rep.skipped[i]])
    summary = {"suite_max": rep.suite_max, "function": rep.attaining_function}
    return Report(["function", "ratio", "skipped_cubes"], rows, CubeLadder(grid).describe(), summary), 0


def _cmd_commutator_weak(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    suite = TestSuite(cfg.seed, cfg.count, grid)
    w = _weight(cfg.weight, grid, cfg.p)
    rep = commutator_weak_scan(_symbol(cfg.b, grid), w, cfg.m, _kernel(cfg.kernel, grid.dim), suite)
    rows = [[i, r] for i, r in enumerate(rep.ratios)]
    summary = {"suite_max": rep.suite_max, "function": rep.attaining_function, "factors": rep.factors}
    return Report(["function", "ratio"], rows, CubeLadder(grid).describe(), summary), 0


def _cmd_probe_conjecture(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    suite = TestSuite(cfg.seed, cfg.count, grid)
    kernel = _kernel(cfg.kernel, grid.dim)
    if cfg.weight.startswith("file:"):
        w = _weight(cfg.weight, grid, cfg.p)
    else:
        w = _weight_closure(cfg.weight, grid.dim, cfg.p)
    rep = conjecture_probe(w, kernel, suite, max(1, cfg.refinements))
    rows = [[i, r] for i, r in enumerate(rep.ratios)]
    summary = {"suite_max": rep.suite_max, "trend": rep.trend, "note": rep.note, "factors": rep.factors}
    return Report(["function", "ratio"], rows, CubeLadder(grid).describe(), summary), 0


def _cmd_bench(cfg: RunConfig) -> tuple[Report, int]:
    grid = _grid(cfg)
    f = GridFunction(grid, np.random.default_rng(cfg.seed).normal(size=grid.shape))
    t0 = time.perf_counter()
    slow = brute_force_max_averages(f)
    t1 = time.perf_counter()
    fast = window_max_averages(f)
    t2 = time.perf_counter()
    diff = float(np.max(np.abs(slow.values - fast.values)))
    rows = [["brute-force", t1 - t0, 0.0], ["sliding-window", t2 - t1, diff]]
    return Report(["method", "seconds", "max_abs_diff"], rows, CubeLadder(grid).describe(), {"max_abs_diff": diff}), 0


_DISPATCH = {
    "constants": _cmd_constants,
    "operator": _cmd_operator,
    "sharpness": _cmd_sharpness,
    "dominate": _cmd_dominate,
    "poincare": _cmd_poincare,
    "commutator-weak": _cmd_commutator_weak,
    "probe-conjecture": _cmd_probe_conjecture,
    "bench": _cmd_bench,
}


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
        command = ns.command
        cfg = _resolve(ns)
        report, status = _DISPATCH[command](cfg)
    except UsageError as exc:
        print(f"sobolab: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, OSError) as exc:
        print(f"sobolab: {exc}", file=sys.stderr)
        return 1
    path = _out_path(cfg, command)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_render(report, cfg, command))
    print(f"wrote {path}")
    if status == 2:
        print("sobolab: sharpness slopes outside the acceptance margin", file=sys.stderr)
    return status


def main() -> None:
    sys.exit(run())
