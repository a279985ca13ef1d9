"""Command-line front end: ``opinionfix {gen,theory,sweep,arbitrate}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 resource guard.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import coalescence, dynamics, netgraph, theory
from .coalescence import CONVENTIONS, LINEAGE, PAPER_LITERAL, TableCache
from .errors import NoFiniteThreshold, OpinionFixError, ValidationError
from .model import GameScores

log = logging.getLogger("opinionfix")

CONFIG_ENV = "OPINIONFIX_CONFIG"
DEFAULT_CONFIG = "opinionfix-config.json"
CACHE_ENV = "OPINIONFIX_CACHE"
SWEEP_FIELDS = ["ratio", "rho_hat", "se", "n_rho", "threshold"]


# -- shared helpers --------------------------------------------------------------------

def _config_path(args) -> Path:
    return Path(getattr(args, "config", None) or os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG)


def read_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        return {}
    return json.loads(path.read_text())


def resolve_conventions(choice: str, config_path) -> List[str]:
    """``auto`` means the arbitrated convention if one was recorded, else both."""
    if choice == "both":
        return list(CONVENTIONS)
    if choice == "auto":
        conv = read_config(config_path).get("convention")
        return [conv] if conv in CONVENTIONS else list(CONVENTIONS)
    coalescence.check_convention(choice)
    return [choice]


def _cache(args) -> Optional[TableCache]:
    directory = getattr(args, "cache_dir", None) or os.environ.get(CACHE_ENV)
    return TableCache(directory) if directory else None


def solve_tables(g, conventions, cache: Optional[TableCache] = None, tol=coalescence.DEFAULT_TOL):
    if cache is not None:
        pair = cache.pair(g, tol=tol)
        return pair, {c: cache.triple(g, pair, c, tol=tol) for c in conventions}
    pair = coalescence.pair_times(g, tol=tol)
    return pair, {c: coalescence.triple_times(g, pair, c, tol=tol) for c in conventions}


def _add_graph_source(p: argparse.ArgumentParser, positional: bool = True):
    if positional:
        p.add_argument("graph", nargs="?", help="edge-list file")
    p.add_argument("--family", choices=["complete", "nw", "ba", "ring", "star", "path"],
                   help="generate the graph instead of reading a file")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--p", type=float, default=0.4)
    p.add_argument("--m0", type=int, default=3)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--graph-seed", type=int, default=1)


def _add_scores(p: argparse.ArgumentParser, d_default: float = 0.0, c_default: float = 0.0):
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--c", type=float, default=c_default)
    p.add_argument("--d", type=float, default=d_default)
    p.add_argument("--delta-a", type=float, default=0.0)
    p.add_argument("--delta-b", type=float, default=0.0)


def _scores(args) -> GameScores:
    return GameScores(args.a, args.b, args.c, args.d, args.delta_a, args.delta_b)


def generate(family: str, n: int, k: int = 8, p: float = 0.4, m0: int = 3, m: int = 3, seed: int = 1):
    if n is None:
        raise ValidationError("--n is required to generate a graph")
    if family == "complete":
        return netgraph.complete(n)
    if family == "nw":
        return netgraph.newman_watts(n, k, p, seed)
    if family == "ba":
        return netgraph.barabasi_albert(n, m0, m, seed)
    if family == "ring":
        return netgraph.ring(n)
    if family == "star":
        return netgraph.star(n)
    if family == "path":
        return netgraph.path(n)
    raise ValidationError(f"unknown graph family {family!r}")


def _load_graph(args):
    if getattr(args, "graph", None):
        if args.family:
            raise ValidationError("give either an edge-list file or --family, not both")
        return netgraph.load(args.graph)
    if not args.family:
        raise ValidationError("no graph given: pass an edge-list file or --family")
    return generate(args.family, args.n, args.k, args.p, args.m0, args.m, args.graph_seed)


def _threshold(fn, *a):
    try:
        return fn(*a)
    except NoFiniteThreshold as exc:
        log.info("%s", exc)
        return math.nan


# -- gen -----------------------------------------------------------------------------------

def cmd_gen(args, out) -> int:
    g = generate(args.family, args.n, args.k, args.p, args.m0, args.m, args.seed)
    params = {"complete": "", "ring": "", "star": "", "path": "",
              "nw": f" k={args.k} p={args.p} seed={args.seed}",
              "ba": f" m0={args.m0} m={args.m} seed={args.seed}"}[args.family]
    header = [f"opinionfix gen {args.family} n={args.n}{params}",
              f"edges={g.num_edges} hash={g.content_hash()}"]
    text = netgraph.write_edge_list(g, header)
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {g.num_edges} edges to {args.output} (hash {g.content_hash()[:16]})", file=out)
    else:
        out.write(text)
    return 0


# -- theory ----------------------------------------------------------------------------------

def theory_document(g, scores: GameScores, conventions, cache=None) -> dict:
    pair, triples = solve_tables(g, conventions, cache)
    doc = {"graph_hash": g.content_hash(), "n": g.n, "scores": scores.to_dict(),
           "pair_residual": pair.residual, "conventions": {}}
    for conv, trip in triples.items():
        rep = theory.dprime_expectation(g, scores, pair, trip)
        entry = rep.to_dict()
        entry["triple_residual"] = trip.residual
        entry["critical_ad"] = _threshold(theory.critical_ratio_ad, g, pair, trip)
        entry["critical_bc"] = _threshold(theory.critical_ratio_bc, g, pair, trip)
        doc["conventions"][conv] = entry
    return doc


def cmd_theory(args, out) -> int:
    g = _load_graph(args)
    scores = _scores(args)
    scores.sign_warnings()
    convs = resolve_conventions(args.convention, _config_path(args))
    doc = theory_document(g, scores, convs, _cache(args))
    print(f"input {doc['graph_hash']}  n={g.n}  W={g.total_weight:g}", file=out)
    case_ii = scores.b == 0 and scores.c == 0 and scores.delta_A == scores.delta_B
    case_iii = scores.a == 0 and scores.d == 0 and scores.delta_A == scores.delta_B
    for conv, e in doc["conventions"].items():
        print(f"[{conv}] dprime = {e['dprime']:.12g}", file=out)
        print(f"[{conv}] rho_A(beta) = 1/{g.n} + beta * {e['dprime']:.12g}", file=out)
        print(f"[{conv}] favored = {str(e['favored']).lower()}", file=out)
        if case_ii:
            print(f"[{conv}] critical a/d = {_fmt_threshold(e['critical_ad'])}", file=out)
        if case_iii:
            print(f"[{conv}] critical b/c = {_fmt_threshold(e['critical_bc'])}", file=out)
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2, default=_json_default))
    return 0


def _fmt_threshold(x: float) -> str:
    return f"{x:.12g}" if math.isfinite(x) else "none (denominator <= 0)"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


# -- sweep ---------------------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    ratio: str                 # "ad" or "bc"
    grid: Sequence[float]
    template: GameScores
    beta: float = 0.01
    runs: int = 10_000
    seed: int = 0
    relative: bool = False     # grid holds multiples of the theoretical threshold

    def __post_init__(self):
        if self.ratio not in ("ad", "bc"):
            raise ValidationError(f"swept ratio must be 'ad' or 'bc', got {self.ratio!r}")
        if len(self.grid) == 0 or any(not (x > 0 and math.isfinite(x)) for x in self.grid):
            raise ValidationError("grid must be nonempty and strictly positive")
        if self.runs < 1:
            raise ValidationError("runs must be >= 1")
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if self.ratio == "ad" and self.template.d == 0:
            raise ValidationError("sweeping a/d needs a nonzero d")
        if self.ratio == "bc" and self.template.c == 0:
            raise ValidationError("sweeping b/c needs a nonzero c")

    def scores_at(self, ratio: float) -> GameScores:
        v = self.template.vector
        if self.ratio == "ad":
            v[0] = ratio * v[3]
        else:
            v[1] = ratio * v[2]
        return GameScores.from_vector(v)


def parse_grid(text: str, log_scale: bool = False) -> List[float]:
    """``min:max:points`` (linear, or geometric with ``log_scale``) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid must look like min:max:points, got {text!r}")
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
        if pts < 1:
            raise ValidationError("grid needs at least one point")
        if log_scale:
            if lo <= 0 or hi <= 0:
                raise ValidationError("log grid bounds must be positive")
            return np.geomspace(lo, hi, pts).tolist()
        return np.linspace(lo, hi, pts).tolist()
    return [float(x) for x in text.split(",") if x.strip()]


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_sweep(g, spec: SweepSpec, threshold: float, workers=None) -> List[dict]:
    rows = []
    grid = [x * threshold for x in spec.grid] if spec.relative else list(spec.grid)
    for idx, ratio in enumerate(grid):
        est = dynamics.estimate_fixation(g, spec.scores_at(ratio), spec.beta, spec.runs,
                                         point_seed(spec.seed, idx), workers=workers)
        rows.append({"ratio": ratio, "rho_hat": est.rho_hat, "se": est.se,
                     "n_rho": g.n * est.rho_hat, "threshold": threshold})
    return rows


def write_sweep_csv(rows, footer: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(float(row[k])) for k in SWEEP_FIELDS})
    for key, value in footer.items():
        buf.write(f"# {key},{value}\n")
    return buf.getvalue()


def read_sweep_csv(text: str):
    """Parse sweep output back into (rows, footer); the plotting-side reader."""
    body = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    footer = {}
    for ln in text.splitlines():
        if ln.startswith("# "):
            key, _, value = ln[2:].partition(",")
            footer[key] = value
    rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(body)]
    return rows, footer


def cmd_sweep(args, out) -> int:
    g = _load_graph(args)
    grid = parse_grid(args.grid, args.log)
    template = _scores(args)
    spec = SweepSpec(args.ratio, grid, template, args.beta, args.runs, args.seed, args.relative)
    conv = resolve_conventions(args.convention, _config_path(args))
    if len(conv) != 1:
        # no arbitration on record: the lineage form is the one the exact chain supports
        conv = [LINEAGE]
    pair, triples = solve_tables(g, conv, _cache(args))
    fn = theory.critical_ratio_ad if spec.ratio == "ad" else theory.critical_ratio_bc
    thr = _threshold(fn, g, pair, triples[conv[0]])
    if spec.relative and not math.isfinite(thr):
        raise ValidationError("relative grid requested but the threshold is not finite")
    rows = run_sweep(g, spec, thr, args.workers)
    footer = {"threshold": repr(thr), "ratio": spec.ratio, "convention": conv[0],
              "graph_hash": g.content_hash(), "beta": spec.beta, "runs": spec.runs, "seed": spec.seed}
    text = write_sweep_csv(rows, footer)
    if args.output:
        Path(args.output).write_text(text)
        print(f"input {g.content_hash()}  wrote {len(rows)} rows to {args.output}", file=out)
    else:
        out.write(text)
    return 0


# -- arbitrate ------------------------------------------------------------------------------------

DEFAULT_ARBITRATION_SCORES = [
    GameScores(1.0, -0.3, -0.6, 0.8, 0.25, 0.0),
    GameScores(3.0, 0.0, 0.0, 1.0, 0.0, 0.0),
    GameScores(0.0, -1.0, -0.4, 0.0, 0.1, 0.3),
]


def default_arbitration_graphs():
    return {
        "complete5": netgraph.complete(5),
        "ring6": netgraph.ring(6),
        "star6": netgraph.star(6),
        "random7w": netgraph.random_connected(7, 0.3, seed=11, weighted=True),
        "random8": netgraph.random_connected(8, 0.3, seed=12),
    }


SLOPE_FLOOR = 1e-9


def arbitrate(graphs: dict, score_sets: Sequence[GameScores], rel_tol: float = 0.005) -> dict:
    """Compare both conventions against the exact-chain slope on every instance.

    The winner is the unique convention within ``rel_tol`` on every instance,
    or None when no single convention qualifies.
    """
    if not graphs:
        raise ValidationError("arbitration needs at least one graph")
    if not score_sets:
        raise ValidationError("arbitration needs at least one score vector")
    rows = []
    for name, g in graphs.items():
        pair, triples = solve_tables(g, CONVENTIONS)
        for scores in score_sets:
            slope = dynamics.weak_slope_oracle(g, scores)
            row = {"graph": name, "n": g.n, "graph_hash": g.content_hash(),
                   "scores": scores.to_dict(), "exact_slope": slope}
            # floor keeps a vanishing slope from turning roundoff into a relative error
            scale = max(abs(slope), SLOPE_FLOOR)
            for conv in CONVENTIONS:
                val = theory.dprime_expectation(g, scores, pair, triples[conv]).dprime
                row[conv] = val
                row[f"{conv}_rel_err"] = abs(val - slope) / scale
            rows.append(row)
    passing = [c for c in CONVENTIONS if all(r[f"{c}_rel_err"] <= rel_tol for r in rows)]
    winner = passing[0] if len(passing) == 1 else None
    return {"rows": rows, "rel_tol": rel_tol, "passing": passing, "winner": winner}


def cmd_arbitrate(args, out) -> int:
    if args.graphs is None:
        graphs = default_arbitration_graphs()
    else:
        graphs = {Path(p).stem: netgraph.load(p) for p in args.graphs}
    scores = DEFAULT_ARBITRATION_SCORES if not args.scores else [
        GameScores.from_vector([float(x) for x in s.split(",")]) for s in args.scores
    ]
    for s in args.scores or []:
        if len(s.split(",")) != 6:
            raise ValidationError(f"score vector needs 6 comma-separated values, got {s!r}")
    report = arbitrate(graphs, scores, args.rel_tol)
    print(f"{'graph':<12}{'exact slope':>16}{'paper-literal':>16}{'err':>10}{'lineage':>16}{'err':>10}", file=out)
    for r in report["rows"]:
        print(f"{r['graph']:<12}{r['exact_slope']:>16.9g}{r[PAPER_LITERAL]:>16.9g}"
              f"{r[PAPER_LITERAL + '_rel_err']:>10.2e}{r[LINEAGE]:>16.9g}{r[LINEAGE + '_rel_err']:>10.2e}",
              file=out)
    print(f"winner: {report['winner']}", file=out)
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, default=_json_default))
    if report["winner"] is not None and not args.no_config:
        path = _config_path(args)
        cfg = read_config(path)
        cfg.update(convention=report["winner"], instances=len(report["rows"]),
                   rel_tol=report["rel_tol"])
        path.write_text(json.dumps(cfg, indent=2))
        print(f"recorded convention in {path}", file=out)
    return 0


# -- entry point ------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opinionfix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a generated graph as an edge list")
    p.add_argument("family", choices=["complete", "nw", "ba", "ring", "star", "path"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--p", type=float, default=0.4)
    p.add_argument("--m0", type=int, default=3)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("theory", help="weak-selection prediction for one graph and score vector")
    _add_graph_source(p)
    _add_scores(p)
    p.add_argument("--convention", default="auto", choices=["auto", "both", *CONVENTIONS])
    p.add_argument("--config")
    p.add_argument("--cache-dir")
    p.add_argument("--json", help="write the full report here")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("sweep", help="Monte Carlo fixation probability over a score-ratio grid")
    _add_graph_source(p)
    _add_scores(p, d_default=1.0, c_default=-1.0)
    p.add_argument("--ratio", choices=["ad", "bc"], default="ad")
    p.add_argument("--grid", required=True, help="min:max:points or comma list")
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.add_argument("--relative", action="store_true", help="grid values multiply the threshold")
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--convention", default="auto", choices=["auto", "both", *CONVENTIONS])
    p.add_argument("--config")
    p.add_argument("--cache-dir")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("arbitrate", help="pick the triple-time convention matching the exact chain")
    p.add_argument("--graphs", nargs="*", help="edge-list files (n <= 14); default: built-in set")
    p.add_argument("--scores", nargs="*", help="score vectors a,b,c,d,dA,dB")
    p.add_argument("--rel-tol", type=float, default=0.005)
    p.add_argument("--config")
    p.add_argument("--no-config", action="store_true", help="do not record the winner")
    p.add_argument("--json")
    p.set_defaults(func=cmd_arbitrate)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except OpinionFixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
