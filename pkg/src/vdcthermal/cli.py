"""Command-line entry point: ``vdcthermal <subcommand> --config FILE [options] [--key=value ...]``.

Every subcommand writes deterministic files under the output directory, named
by scenario, case, algorithm and seed.  Failures print one line to stderr::

    vdcthermal: error: kind=<ExceptionName> message="<text>"

and exit non-zero (2 config/usage, 3 validation failed, 4 instance too large,
1 anything else).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .config import ALGORITHMS, ConfigError, RunConfig, dump_config, load_config
from .embedding import Embedding
from .exactopt import (
    InstanceTooLarge,
    MilpInstance,
    brute_force_optimal,
    emit_milp,
    read_solution,
    solution_from_embeddings,
    validate_solution,
    write_solution,
)
from .simulation import dynamic_replication, run_dynamic, run_static, static_replication
from .topology import topology_csv
from .workload import read_batch, read_trace, write_batch, write_trace

EXIT_CONFIG, EXIT_INVALID, EXIT_TOO_LARGE = 2, 3, 4


class ValidationFailed(RuntimeError):
    pass


# --------------------------------------------------------------------- helpers


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_fmt) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    print(path)
    return path


def _num_tag(x: float | None) -> str:
    if x is None:
        return "none"
    return str(int(x)) if float(x).is_integer() else str(x).replace(".", "p")


def _parse_overrides(extra: list[str]) -> dict[str, str]:
    """Turn leftover ``--key=value`` / ``--key value`` tokens into a dict."""
    out: dict[str, str] = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or tok == "--":
            raise ConfigError(f"unexpected argument {tok!r}")
        key, sep, value = tok[2:].partition("=")
        if not sep:
            if i + 1 >= len(extra) or extra[i + 1].startswith("--"):
                raise ConfigError(f"override --{key} needs a value")
            value = extra[i + 1]
            i += 1
        out[key] = value
        i += 1
    return out


def _algorithms(args, cfg: RunConfig) -> list[str]:
    if args.algorithm == "both":
        return list(ALGORITHMS)
    return [args.algorithm or cfg.algorithm]


def _seeds(args, cfg: RunConfig) -> list[int]:
    return list(args.seed) if args.seed else list(cfg.seeds)


def _setup(args, extra: list[str]) -> RunConfig:
    overrides = _parse_overrides(extra)
    if args.alpha is not None:
        overrides["run.alpha"] = str(args.alpha)
    if args.output is not None:
        overrides["run.output"] = args.output
    if getattr(args, "algorithm", None) and args.algorithm != "both":
        overrides["run.algorithm"] = args.algorithm
    return load_config(args.config, overrides)


# --------------------------------------------------------------------- commands


def cmd_gen_topology(args, cfg: RunConfig) -> None:
    out = Path(cfg.output)
    for seed in _seeds(args, cfg):
        state, _ = static_replication(replace(cfg, n_vdcs=0), seed)
        nodes, links = topology_csv(state)
        _write(out, f"topology_{cfg.case}_seed{seed}_nodes.csv", nodes)
        _write(out, f"topology_{cfg.case}_seed{seed}_links.csv", links)


def cmd_gen_workload(args, cfg: RunConfig) -> None:
    out = Path(cfg.output)
    for seed in _seeds(args, cfg):
        if args.dynamic:
            for lam in args.lam or [cfg.dynamic.lam]:
                _, trace = dynamic_replication(cfg, seed, lam)
                out.mkdir(parents=True, exist_ok=True)
                path = out / f"trace_{cfg.case}_lam{_num_tag(lam)}_seed{seed}.jsonl"
                write_trace(path, trace)
                print(path)
        else:
            _, vdcs = static_replication(cfg, seed)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"workload_{cfg.case}_n{cfg.n_vdcs}_seed{seed}.jsonl"
            write_batch(path, vdcs)
            print(path)


def _static_inputs(args, cfg: RunConfig, seed: int):
    state, vdcs = static_replication(cfg, seed)
    if args.workload:
        vdcs = read_batch(args.workload)
    return state, vdcs


def cmd_run_static(args, cfg: RunConfig) -> None:
    out = Path(cfg.output)
    for alg in _algorithms(args, cfg):
        rows = []
        for seed in _seeds(args, cfg):
            state, vdcs = _static_inputs(args, cfg, seed)
            rep = run_static(state, vdcs, alg)
            stem = f"static_{cfg.case}_{alg}_seed{seed}"
            _write(out, f"{stem}_racks.csv", rep.thermal.to_csv())
            _write(
                out,
                f"{stem}_histogram.csv",
                _csv(["bin_lo_c", "bin_hi_c", "racks"], [[lo, lo + 0.5, n] for lo, n in rep.histogram.items()]),
            )
            _write(out, f"{stem}_embeddings.jsonl", "".join(e.to_json() + "\n" for e in rep.embeddings))
            summary = {"seed": seed, "case": cfg.case, **rep.summary()}
            _write(out, f"{stem}.json", _json(summary))
            rows.append(
                [seed, len(vdcs), rep.n_failed, rep.max_outlet, rep.thermal.min_outlet,
                 rep.thermal.active_spread(), rep.total_it_power]
            )
        header = ["seed", "n_vdcs", "n_failed", "max_outlet_c", "min_outlet_c", "active_spread_c", "total_it_power_kw"]
        _write(out, f"static_{cfg.case}_{alg}_summary.csv", _csv(header, rows))
        _write(out, f"static_{cfg.case}_{alg}_summary.json", _json([dict(zip(header, r)) for r in rows]))


def cmd_run_dynamic(args, cfg: RunConfig) -> None:
    out = Path(cfg.output)
    lams = args.lam or [cfg.dynamic.lam]
    thresholds = args.threshold or [cfg.dynamic.threshold]
    header = [
        "lambda", "threshold_c", "seed", "arrivals", "measured_arrivals", "rejected_resources",
        "rejected_temperature", "rejection_ratio", "mean_gap_active_c", "mean_gap_all_c", "mean_power_kw",
    ]
    for alg in _algorithms(args, cfg):
        rows, summaries = [], []
        for lam in lams:
            for thr in thresholds:
                for seed in _seeds(args, cfg):
                    state, trace = dynamic_replication(cfg, seed, lam)
                    if args.trace:
                        trace = read_trace(args.trace)
                    rep = run_dynamic(state, trace, alg, thr, warmup=cfg.dynamic.warmup, record_series=True)
                    s = rep.summary()
                    rows.append(
                        [lam, "none" if thr is None else thr, seed, rep.arrivals, rep.measured_arrivals,
                         rep.measured_rejected_resources, rep.measured_rejected_temperature,
                         rep.rejection_ratio, s["mean_gap_active_c"], s["mean_gap_all_c"], s["mean_power_kw"]]
                    )
                    summaries.append({"lambda": lam, "seed": seed, "case": cfg.case, **s})
                    if args.series:
                        stem = f"dynamic_{cfg.case}_{alg}_lam{_num_tag(lam)}_thr{_num_tag(thr)}_seed{seed}"
                        _write(out, f"{stem}_series.csv", rep.series_csv())
        _write(out, f"dynamic_{cfg.case}_{alg}_ratios.csv", _csv(header, rows))
        _write(out, f"dynamic_{cfg.case}_{alg}_ratios.json", _json(summaries))


def _instance(args, cfg: RunConfig, seed: int) -> MilpInstance:
    state, vdcs = _static_inputs(args, cfg, seed)
    return MilpInstance(state=state, vdcs=tuple(vdcs), alpha=cfg.alpha)


def cmd_emit_milp(args, cfg: RunConfig) -> None:
    out = Path(cfg.output)
    for seed in _seeds(args, cfg):
        _write(out, f"milp_{cfg.case}_seed{seed}.lp", emit_milp(_instance(args, cfg, seed)))


def cmd_oracle(args, cfg: RunConfig) -> None:
    out = Path(cfg.output)
    for seed in _seeds(args, cfg):
        inst = _instance(args, cfg, seed)
        exact = brute_force_optimal(inst, max_path_hops=args.max_hops)
        result = {"seed": seed, "case": cfg.case, "alpha": cfg.alpha, "feasible": exact.feasible,
                  "exact_objective": exact.objective if exact.feasible else None}
        if exact.feasible:
            result["exact_t_max"] = exact.t_max
            result["exact_total_power_kw"] = exact.total_power
            result["exact_placement"] = {str(i): {str(v): n for v, n in p.items()} for i, p in exact.placement.items()}
            _write(out, f"oracle_{cfg.case}_seed{seed}_solution.txt", write_solution(
                {**exact.assignment(inst), "objective": exact.objective}))
        for alg in ALGORITHMS:
            # same seed, same topology: a fresh copy for each heuristic
            state, _ = _static_inputs(args, cfg, seed)
            rep = run_static(state, list(inst.vdcs), alg)
            entry = {"n_failed": rep.n_failed}
            if rep.n_failed == 0:
                sol = solution_from_embeddings(inst, rep.embeddings)
                entry["objective"] = sol.objective
                if exact.feasible:
                    entry["gap"] = (sol.objective - exact.objective) / exact.objective
            result[alg] = entry
        _write(out, f"oracle_{cfg.case}_seed{seed}.json", _json(result))


def cmd_validate(args, cfg: RunConfig) -> None:
    if not args.solution and not args.embeddings:
        raise ConfigError("validate needs --solution or --embeddings")
    out = Path(cfg.output)
    failed = []
    for seed in _seeds(args, cfg):
        inst = _instance(args, cfg, seed)
        if args.solution:
            candidate = read_solution(Path(args.solution).read_text(encoding="utf-8"))
            source = Path(args.solution).stem
        else:
            lines = Path(args.embeddings).read_text(encoding="utf-8").splitlines()
            candidate = [Embedding.from_dict(json.loads(l), inst.state) for l in lines if l.strip()]
            source = Path(args.embeddings).stem
        rep = validate_solution(inst, candidate)
        _write(out, f"validate_{cfg.case}_{source}_seed{seed}.json", _json(rep.to_dict()))
        for fam in rep.failed():
            failed.append(f"seed {seed} {fam}: {rep.families[fam].first_violation}")
    if failed:
        raise ValidationFailed("; ".join(failed))


def cmd_dump_config(args, cfg: RunConfig) -> None:
    sys.stdout.write(dump_config(cfg))


COMMANDS = {
    "gen-topology": cmd_gen_topology,
    "dump-topology": cmd_gen_topology,
    "gen-workload": cmd_gen_workload,
    "run-static": cmd_run_static,
    "run-dynamic": cmd_run_dynamic,
    "emit-milp": cmd_emit_milp,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
    "dump-config": cmd_dump_config,
}


def _threshold(raw: str) -> float | None:
    return None if raw.lower() in ("none", "inf", "off") else float(raw)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.exit(EXIT_CONFIG, f'vdcthermal: error: kind=UsageError message="{message}"\n')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vdcthermal", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI-style config file (defaults apply when omitted)")
    common.add_argument("--seed", type=int, action="append", help="replication seed (repeatable)")
    common.add_argument("--algorithm", choices=list(ALGORITHMS) + ["both"])
    common.add_argument("--alpha", type=float, help="weight of total IT power in the objective")
    common.add_argument("--output", help="output directory")
    common.add_argument("--workload", help="JSONL batch to use instead of generating one")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("gen-workload", "run-dynamic"):
            p.add_argument("--lambda", dest="lam", type=float, action="append", help="arrivals per hour (repeatable)")
        if name == "gen-workload":
            p.add_argument("--dynamic", action="store_true", help="write an arrival trace instead of a batch")
        if name == "run-dynamic":
            p.add_argument("--threshold", type=_threshold, action="append", help="outlet limit in C, or 'none'")
            p.add_argument("--trace", help="JSONL trace to replay instead of generating one")
            p.add_argument("--series", action="store_true", help="also write per-event temperature series")
        if name == "oracle":
            p.add_argument("--max-hops", type=int, default=6)
        if name == "validate":
            p.add_argument("--solution", help="name=value file")
            p.add_argument("--embeddings", help="JSONL embeddings file")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = _setup(args, extra)
        COMMANDS[args.command](args, cfg)
    except (ConfigError, FileNotFoundError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except ValidationFailed as exc:
        return _fail(exc, EXIT_INVALID)
    except InstanceTooLarge as exc:
        return _fail(exc, EXIT_TOO_LARGE)
    except (ValueError, OSError, RuntimeError) as exc:
        return _fail(exc, 1)
    return 0


def _fail(exc: BaseException, code: int) -> int:
    msg = str(exc).replace("\n", " ").replace('"', "'")
    print(f'vdcthermal: error: kind={type(exc).__name__} message="{msg}"', file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
