"""Command-line harness: generate benchmarks, solve networks, run evaluations, summarize.

Subcommands::

    modgap gen specs.json -o DIR
    modgap solve EDGELIST ALGORITHM [--gamma R] [--seed N] [--tolerance E] [--time-limit S]
    modgap run config.json -o DIR
    modgap report records.csv -o DIR
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import benchgen
from .exact import SolveConfig, branch_and_bound_max, solve_all_optima
from .graph import Graph, GraphError, ModularityParams, Partition, load_edge_list, modularity, serialize_edge_list
from .heuristics import HEURISTICS, HeuristicConfig
from .metrics import GOP_GUARD, MetricError, similarity_report

logger = logging.getLogger("modgap")

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3
MU_WARN = 0.5
RECORD_FIELDS = (
    "network,algorithm,seed,q_alg,q_star,gop,ami,rmi,ecs,k_alg,k_star,"
    "optima_count,solve_seconds,gap,rmi_approximate,baseline_unavailable"
).split(",")
QUARTILE_METHOD = "linear interpolation between closest ranks"
SOLVE_TIME_BINS = 4


class ConfigError(ValueError):
    pass


def algorithm_ids() -> list[str]:
    return sorted(HEURISTICS) + ["exact", "bnb:<tolerance>"]


def parse_algorithm(name: str) -> tuple[str, float | None]:
    """Split an algorithm id into (kind, tolerance); raises ConfigError when unknown."""
    if name in HEURISTICS:
        return name, None
    if name == "exact":
        return "exact", 0.0
    if name.startswith("bnb:"):
        try:
            eps = float(name[4:])
        except ValueError:
            raise ConfigError(f"bad tolerance in {name!r}") from None
        if not 0 <= eps < 1:
            raise ConfigError(f"tolerance in {name!r} must lie in [0, 1)")
        return "bnb", eps
    raise ConfigError(f"unknown algorithm {name!r}; valid ids: {', '.join(algorithm_ids())}")


@dataclass
class AlgorithmOutcome:
    partition: Partition
    q: Fraction
    seconds: float
    gap: float | None = None
    limited: bool = False
    result: object = None


def run_algorithm(
    name: str,
    g: Graph,
    params: ModularityParams,
    seed: int = 0,
    time_limit: float | None = None,
    node_limit: int | None = None,
) -> AlgorithmOutcome:
    kind, eps = parse_algorithm(name)
    if kind in HEURISTICS:
        cfg = HeuristicConfig(seed=seed, gamma=params.gamma)
        start = time.perf_counter()
        x = HEURISTICS[kind](g, cfg)
        seconds = time.perf_counter() - start
        return AlgorithmOutcome(x, modularity(g, x, params), seconds)
    cfg = SolveConfig(tolerance=eps, time_limit=time_limit, node_limit=node_limit, seed=seed)
    start = time.perf_counter()
    res = branch_and_bound_max(g, params, cfg)
    seconds = time.perf_counter() - start
    limited = not res.proven_optimal and res.gap > eps
    return AlgorithmOutcome(res.optima[0], res.q_lb, seconds, res.gap, limited, res)


# ---------------------------------------------------------------- gen


def _load_specs(path: Path) -> list[tuple[str, dict]]:
    data = json.loads(path.read_text())
    if isinstance(data, dict):
        data = data.get("specs", [])
    if not isinstance(data, list) or not data:
        raise ConfigError("spec file must hold a non-empty list of specs (or {\"specs\": [...]})")
    out = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ConfigError(f"spec {i} is not an object")
        entry = dict(entry)
        name = str(entry.pop("name", f"{benchgen.FAMILY}_{i:03d}"))
        out.append((name, entry))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ConfigError("spec names must be unique")
    return out


def _make_spec(i: int, name: str, fields: dict) -> benchgen.BenchmarkSpec:
    mu = fields.get("mu", benchgen.BenchmarkSpec.__dataclass_fields__["mu"].default)
    if float(mu) >= 1:
        raise ConfigError(f"spec {i} ({name}): mu={mu} must be below 1")
    if float(mu) > MU_WARN:
        logger.warning("spec %d (%s): mu=%s exceeds %.1f, graph is unlikely to be modular", i, name, mu, MU_WARN)
    try:
        return benchgen.spec_from_dict(fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"spec {i} ({name}): {exc}") from exc


def generate_instances(specs: list[tuple[str, dict]]) -> list[tuple[str, benchgen.PlantedGraph]]:
    out = []
    for i, (name, fields) in enumerate(specs):
        spec = _make_spec(i, name, fields)
        try:
            out.append((name, benchgen.generate(spec)))
        except benchgen.GenerationError as exc:
            raise ConfigError(f"spec {i} ({name}): generation failed at {exc}") from exc
    return out


def cmd_gen(args) -> int:
    specs = _load_specs(Path(args.specs))
    instances = generate_instances(specs)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, pg in instances:
        (out / f"{name}.txt").write_text(serialize_edge_list(pg.graph))
        (out / f"{name}.json").write_text(benchgen.sidecar_json(pg))
        manifest.append({"name": name, "edges": f"{name}.txt", "sidecar": f"{name}.json", "n": pg.graph.n, "m": pg.graph.m})
    doc = {"schema_version": SCHEMA_VERSION, "family": benchgen.FAMILY, "instances": manifest}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {len(manifest)} instance(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- solve


def cmd_solve(args) -> int:
    try:
        kind, eps = parse_algorithm(args.algorithm)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    if args.tolerance is not None:
        if kind in HEURISTICS:
            logger.warning("--tolerance ignored for heuristic %s", kind)
        else:
            eps = args.tolerance
    g = load_edge_list(Path(args.edgelist).read_text())
    params = ModularityParams(Fraction(args.gamma))
    if kind in HEURISTICS:
        res = run_algorithm(kind, g, params, args.seed)
        doc = {
            "schema_version": SCHEMA_VERSION,
            "algorithm": kind,
            "assignment": list(res.partition.assignment),
            "q": float(res.q),
            "q_exact": str(res.q),
            "elapsed": res.seconds,
        }
        print(json.dumps(doc))
        return EXIT_OK
    cfg = SolveConfig(tolerance=eps, time_limit=args.time_limit, node_limit=args.node_limit, seed=args.seed)
    res = branch_and_bound_max(g, params, cfg)
    doc = res.to_json()
    doc["algorithm"] = args.algorithm
    print(json.dumps(doc))
    within = res.proven_optimal or (eps > 0 and res.gap <= eps)
    return EXIT_OK if within else EXIT_LIMIT


# ---------------------------------------------------------------- run


@dataclass
class NetworkSource:
    name: str
    graph: Graph


@dataclass
class RunConfig:
    networks: list[NetworkSource]
    algorithms: list[str]
    gamma: Fraction = Fraction(1)
    seeds: list[int] = field(default_factory=lambda: [0])
    time_limit: float | None = None
    node_limit: int | None = None
    success_threshold: float = 1 - GOP_GUARD
    best_of_seeds: bool = False
    timing: bool = True

    def __post_init__(self):
        if not self.networks:
            raise ConfigError("at least one network is required")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            parse_algorithm(a)
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        names = [n.name for n in self.networks]
        if len(set(names)) != len(names):
            raise ConfigError("network names must be unique")


def load_run_config(path: Path) -> RunConfig:
    data = json.loads(Path(path).read_text())
    base = Path(path).parent
    known = {
        "schema_version", "networks", "generate", "algorithms", "gamma", "seeds", "solver",
        "success_threshold", "best_of_seeds", "timing",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    networks = []
    for entry in data.get("networks", []):
        if isinstance(entry, str):
            entry = {"path": entry}
        p = base / entry["path"]
        name = entry.get("name", Path(entry["path"]).stem)
        networks.append(NetworkSource(name, load_edge_list(p.read_text())))
    if "generate" in data:
        for name, pg in generate_instances(_spec_list(data["generate"])):
            networks.append(NetworkSource(name, pg.graph))
    solver = data.get("solver", {})
    return RunConfig(
        networks=networks,
        algorithms=list(data.get("algorithms", [])),
        gamma=Fraction(str(data.get("gamma", 1))),
        seeds=[int(s) for s in data.get("seeds", [0])],
        time_limit=solver.get("time_limit"),
        node_limit=solver.get("node_limit"),
        success_threshold=float(data.get("success_threshold", 1 - GOP_GUARD)),
        best_of_seeds=bool(data.get("best_of_seeds", False)),
        timing=bool(data.get("timing", True)),
    )


def _spec_list(entries) -> list[tuple[str, dict]]:
    out = []
    for i, entry in enumerate(entries):
        entry = dict(entry)
        out.append((str(entry.pop("name", f"{benchgen.FAMILY}_{i:03d}")), entry))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (Fraction, float)):
        return repr(float(value))
    return str(value)


@dataclass
class Baseline:
    q_star: Fraction | None
    optima: list[Partition]
    gap: float
    reason: str = ""

    @property
    def usable(self) -> bool:
        return not self.reason


def compute_baseline(g: Graph, cfg: RunConfig) -> Baseline:
    params = ModularityParams(cfg.gamma)
    scfg = SolveConfig(enumerate_all=True, time_limit=cfg.time_limit, node_limit=cfg.node_limit)
    res = solve_all_optima(g, params, scfg)
    if not (res.proven_optimal and res.complete):
        return Baseline(None, list(res.optima), res.gap, "exact stage hit its limit")
    if res.q_lb <= 0:
        return Baseline(res.q_lb, list(res.optima), res.gap, "maximum modularity is not positive")
    return Baseline(res.q_lb, list(res.optima), res.gap)


def evaluate_network(net: NetworkSource, cfg: RunConfig) -> list[dict]:
    params = ModularityParams(cfg.gamma)
    base = compute_baseline(net.graph, cfg)
    if not base.usable:
        logger.warning("network %s: baseline unavailable (%s)", net.name, base.reason)
    rows = []
    for alg in cfg.algorithms:
        outcomes = [(seed, run_algorithm(alg, net.graph, params, seed, cfg.time_limit, cfg.node_limit)) for seed in cfg.seeds]
        if cfg.best_of_seeds:
            # first seed wins ties so the choice does not depend on timing
            outcomes = [max(outcomes, key=lambda so: (so[1].q, -cfg.seeds.index(so[0])))]
        for seed, out in outcomes:
            row = {
                "network": net.name,
                "algorithm": alg,
                "seed": seed,
                "q_alg": out.q,
                "q_star": base.q_star,
                "k_alg": out.partition.k,
                "solve_seconds": out.seconds if cfg.timing else 0.0,
                "gap": out.gap,
                "baseline_unavailable": not base.usable,
            }
            if base.q_star is not None:
                row.update(optima_count=len(base.optima), k_star=base.optima[0].k)
            if base.usable:
                rep = similarity_report(out.partition, out.q, base.optima, base.q_star)
                row.update(
                    gop=rep.gop, ami=rep.ami, rmi=rep.rmi, ecs=rep.ecs, k_star=rep.k_star,
                    optima_count=rep.optima_count, rmi_approximate=rep.rmi_approximate,
                )
            rows.append(row)
    return rows


def execute_run(cfg: RunConfig) -> tuple[list[dict], list[dict], list[dict]]:
    """Returns (records, failures, network metadata); records are sorted deterministically."""
    records, failures, meta = [], [], []
    for net in cfg.networks:
        meta.append({"network": net.name, "n": net.graph.n, "m": net.graph.m})
        try:
            records.extend(evaluate_network(net, cfg))
        except (GraphError, MetricError, ValueError) as exc:
            logger.error("network %s failed: %s", net.name, exc)
            failures.append({"network": net.name, "error": str(exc)})
    records.sort(key=lambda r: (r["network"], r["algorithm"], r["seed"]))
    meta.sort(key=lambda r: r["network"])
    return records, failures, meta


def records_csv(records: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([_fmt(r.get(k)) for k in RECORD_FIELDS])
    return buf.getvalue()


def cmd_run(args) -> int:
    cfg = load_run_config(Path(args.config))
    records, failures, meta = execute_run(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_csv(records))
    with open(out / "networks.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["network", "n", "m"], lineterminator="\n")
        w.writeheader()
        w.writerows(meta)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "records": [{k: _json_value(r.get(k)) for k in RECORD_FIELDS} for r in records],
        "failures": failures,
        "networks": meta,
    }
    (out / "records.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{len(records)} record(s), {len(failures)} failed network(s) -> {out}")
    return EXIT_ERROR if failures and not records else EXIT_OK


def _json_value(v):
    if isinstance(v, Fraction):
        return float(v)
    return v


# ---------------------------------------------------------------- report


def read_records(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RECORD_FIELDS if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"records file lacks column(s): {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise ConfigError("records file holds no records")
    for r in rows:
        for k in ("q_alg", "q_star", "gop", "ami", "rmi", "ecs", "solve_seconds", "gap"):
            r[k] = float(r[k]) if r[k] != "" else None
        for k in ("rmi_approximate", "baseline_unavailable"):
            r[k] = r[k] == "true"
    return rows


def quartiles(values: Sequence[float]) -> dict:
    """Box-plot summary; whiskers reach the furthest point within 1.5 IQR of the nearest hinge."""
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    iqr = q3 - q1
    lo = v[v >= q1 - 1.5 * iqr].min()
    hi = v[v <= q3 + 1.5 * iqr].max()
    return {
        "count": len(v), "min": float(v[0]), "q1": float(q1), "median": float(med), "q3": float(q3),
        "max": float(v[-1]), "whisker_low": float(lo), "whisker_high": float(hi),
        "outliers": int(((v < lo) | (v > hi)).sum()),
    }


def success_rates(rows: Sequence[dict], threshold: float = 1 - GOP_GUARD) -> dict[str, float]:
    """Per algorithm, the fraction of networks where some run reached the optimum."""
    hits: dict[str, dict[str, bool]] = {}
    for r in rows:
        if r["baseline_unavailable"]:
            continue
        nets = hits.setdefault(r["algorithm"], {})
        nets[r["network"]] = nets.get(r["network"], False) or r["gop"] >= threshold
    return {alg: sum(nets.values()) / len(nets) for alg, nets in sorted(hits.items())}


def scatter_rows(rows: Sequence[dict], threshold: float = 1 - GOP_GUARD) -> list[dict]:
    out = []
    for r in rows:
        if r["baseline_unavailable"] or r["gop"] >= threshold:
            continue
        for m in ("ami", "rmi", "ecs"):
            out.append({
                "network": r["network"], "algorithm": r["algorithm"], "seed": r["seed"], "measure": m,
                "gop": r["gop"], "similarity": r[m], "above_45": r[m] <= r["gop"],
            })
    return out


def solve_time_bins(rows: Sequence[dict], edges: dict[str, int], nbins: int = SOLVE_TIME_BINS) -> list[dict]:
    """Solve-time summaries per algorithm over log-spaced edge-count bins."""
    ms = sorted({edges[r["network"]] for r in rows if r["network"] in edges})
    if not ms:
        return []
    lo, hi = math.log10(ms[0]), math.log10(ms[-1])
    if hi == lo:
        hi = lo + 1e-9
    bounds = np.logspace(lo, hi, nbins + 1)
    out = []
    for alg in sorted({r["algorithm"] for r in rows}):
        for b in range(nbins):
            times = [
                r["solve_seconds"] for r in rows
                if r["algorithm"] == alg and r["network"] in edges
                and (np.searchsorted(bounds, edges[r["network"]], side="right") - 1 == b
                     or (b == nbins - 1 and edges[r["network"]] == ms[-1]))
            ]
            row = {"algorithm": alg, "bin": b, "m_low": float(bounds[b]), "m_high": float(bounds[b + 1])}
            if times:
                row.update(quartiles(times))
            else:
                row["count"] = 0
            out.append(row)
    return out


def build_report(rows: Sequence[dict], edges: dict[str, int] | None = None, subset: Sequence[str] | None = None) -> dict:
    rates = success_rates(rows)
    chosen = [a for a in (subset or rates) if a in rates]
    dist = []
    for alg in sorted({r["algorithm"] for r in rows}):
        usable = [r for r in rows if r["algorithm"] == alg and not r["baseline_unavailable"]]
        for m in ("gop", "ami", "rmi", "ecs"):
            vals = [r[m] for r in usable if r[m] is not None]
            if vals:
                dist.append({"algorithm": alg, "measure": m, **quartiles(vals)})
    return {
        "schema_version": SCHEMA_VERSION,
        "quartile_method": QUARTILE_METHOD,
        "success_rates": rates,
        "average_success_rate": float(np.mean([rates[a] for a in chosen])) if chosen else None,
        "average_over": chosen,
        "scatter": scatter_rows(rows),
        "distributions": dist,
        "solve_times": solve_time_bins(rows, edges) if edges else [],
    }


def _write_csv(path: Path, rows: list[dict], header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        if not rows:
            return
        cols = list(rows[0])
        for r in rows[1:]:
            cols += [c for c in r if c not in cols]
        w = csv.DictWriter(fh, cols, lineterminator="\n")
        w.writeheader()
        w.writerows({k: _fmt(v) if not isinstance(v, str) else v for k, v in r.items()} for r in rows)


def cmd_report(args) -> int:
    path = Path(args.records)
    rows = read_records(path)
    edges = None
    net_file = Path(args.networks) if args.networks else path.with_name("networks.csv")
    if net_file.exists():
        with open(net_file, newline="") as fh:
            edges = {r["network"]: int(r["m"]) for r in csv.DictReader(fh)}
    else:
        logger.warning("no network metadata at %s; solve-time bins skipped", net_file)
    rep = build_report(rows, edges, args.subset)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "success_rates.csv", [{"algorithm": a, "success_rate": v} for a, v in rep["success_rates"].items()])
    _write_csv(out / "scatter.csv", rep["scatter"])
    _write_csv(out / "distributions.csv", rep["distributions"], f"quartile method: {QUARTILE_METHOD}")
    _write_csv(out / "solve_times.csv", rep["solve_times"], f"quartile method: {QUARTILE_METHOD}")
    (out / "summary.json").write_text(json.dumps(rep, indent=2) + "\n")
    for alg, rate in rep["success_rates"].items():
        print(f"{alg:>12s}  {rate:.3f}")
    if rep["average_success_rate"] is not None:
        print(f"average success rate: {rep['average_success_rate']:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modgap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate planted-partition benchmark graphs")
    p.add_argument("specs")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run one algorithm on one edge list")
    p.add_argument("edgelist")
    p.add_argument("algorithm", help="one of: " + ", ".join(algorithm_ids()))
    p.add_argument("--gamma", default="1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--node-limit", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", help="evaluate algorithms against exact optima")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a records table")
    p.add_argument("records")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--networks", help="network metadata CSV (default: networks.csv next to the records)")
    p.add_argument("--subset", nargs="+", help="algorithms averaged in the summary line")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GraphError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
