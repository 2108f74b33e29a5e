"""``compobs`` command-line front end.

Every experiment subcommand reads a flat JSON config (``--config``), applies
``key=value`` overrides (values parsed as JSON, falling back to plain
strings) and writes versioned CSV files into ``--out``.  ``COMPOBS_SEED``
replaces ``master_seed`` unless an explicit override sets it.

Exit codes: 0 success, 2 bad invocation or config, 3 infeasible recovery,
4 I/O failure.  Errors go to stderr as one line ``compobs: error: <kind>: <detail>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import Regime, RipBoundInput, rip_measurement_count
from .errors import CompobsError
from .experiments import (
    ExperimentConfig,
    com_verification_suite,
    multi_time_sweep,
    noise_histogram,
    phase_transition,
    simulate,
)
from .recovery import Status, solve_bp, solve_bpdn
from .svg import histogram_svg, line_chart_svg

CSV_MAGIC = "# compobs-csv v1"
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
EXPERIMENTS = ("simulate", "phase", "multitime", "noise", "com-verify")


class CliError(Exception):
    def __init__(self, code: int, kind: str, detail: str):
        super().__init__(detail)
        self.code, self.kind, self.detail = code, kind, detail


# -- config handling --------------------------------------------------------


def builtin_config(name: str) -> Path | None:
    """Path of a shipped config such as ``fig3a`` (``.json`` optional)."""
    stem = name[:-5] if name.endswith(".json") else name
    for candidate in (stem, stem.removeprefix("paper_")):
        res = resources.files("compobs") / "configs" / f"{candidate}.json"
        if res.is_file():
            return Path(str(res))
    return None


def parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise CliError(EXIT_CONFIG, "bad-override", f"expected key=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_override(data: dict, key: str, value) -> None:
    """Set a possibly dotted ``key``; every segment must already exist."""
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise CliError(EXIT_CONFIG, "bad-override", f"unknown config key {key!r}")
        node = node[part]
    if parts[-1] not in node:
        raise CliError(EXIT_CONFIG, "bad-override", f"unknown config key {key!r}")
    node[parts[-1]] = value


def load_config(path: str | None, overrides: list[str], experiment: str) -> ExperimentConfig:
    data = ExperimentConfig(experiment=experiment).to_dict()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            p = builtin_config(path) or p
        if not p.is_file():
            raise CliError(EXIT_CONFIG, "config", f"config not found: {path}")
        try:
            loaded = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_CONFIG, "config", f"{p}: invalid JSON ({exc})") from None
        except OSError as exc:
            raise CliError(EXIT_IO, "io", f"{p}: {exc.strerror}") from None
        if not isinstance(loaded, dict):
            raise CliError(EXIT_CONFIG, "config", f"{p}: top level must be an object")
        unknown = sorted(set(loaded) - set(data))
        if unknown:
            raise CliError(EXIT_CONFIG, "config", f"{p}: unknown keys {', '.join(unknown)}")
        data.update(loaded)
    seed_env = os.environ.get("COMPOBS_SEED")
    if seed_env is not None:
        try:
            data["master_seed"] = int(seed_env)
        except ValueError:
            raise CliError(EXIT_CONFIG, "config", f"COMPOBS_SEED must be an integer, got {seed_env!r}") from None
    for item in overrides:
        apply_override(data, *parse_override(item))
    if data.get("experiment") != experiment:
        raise CliError(EXIT_CONFIG, "config",
                       f"config describes a {data.get('experiment')!r} experiment, not {experiment!r}")
    try:
        return ExperimentConfig.from_dict(data)
    except CompobsError as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from None


# -- output -----------------------------------------------------------------


def csv_text(fields: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(CSV_MAGIC + "\n")
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"{path}: {exc.strerror}") from None
    return path


def _fmt(v: float) -> str:
    return repr(float(v))


def _omega_label(omega) -> str:
    return " ".join(str(k) for k in omega)


# -- subcommands ------------------------------------------------------------


def cmd_phase(cfg: ExperimentConfig, out: Path, threads: int | None, svg: bool) -> list[Path]:
    written = []
    series = []
    for curve in phase_transition(cfg, threads):
        kind, k = curve[0].measurement, curve[0].omega[0]
        rows = [{"M": p.M, "rate": _fmt(p.rate), "trials": p.trials, "seed": p.seed} for p in curve]
        written.append(write_text(out / f"phase_{kind}_k{k}.csv", csv_text(["M", "rate", "trials", "seed"], rows)))
        trial_rows = [r.csv_row() for p in curve for r in p.records]
        written.append(write_text(out / f"phase_{kind}_k{k}_trials.csv",
                                  csv_text(list(curve[0].records[0].CSV_FIELDS), trial_rows)))
        series.append((f"{kind} k={k}", [(p.M, p.rate) for p in curve]))
    if svg:
        written.append(write_text(out / "phase.svg", line_chart_svg(series, "M", "recovery rate", y_range=(0.0, 1.0))))
    return written


def cmd_multitime(cfg: ExperimentConfig, out: Path, threads: int | None, svg: bool) -> list[Path]:
    points = multi_time_sweep(cfg, threads)
    ids = {tuple(o): i + 1 for i, o in enumerate(cfg.omega_sets)}
    fields = ["measurement", "omega_set_id", "omega", "M", "rate", "trials", "seed"]
    rows = [
        {"measurement": p.measurement, "omega_set_id": ids[p.omega], "omega": _omega_label(p.omega), "M": p.M,
         "rate": _fmt(p.rate), "trials": p.trials, "seed": p.seed}
        for p in points
    ]
    written = [write_text(out / "multitime.csv", csv_text(fields, rows))]
    if svg:
        series = [(kind, [(ids[p.omega], p.rate) for p in points if p.measurement == kind]) for kind in cfg.measurements]
        written.append(write_text(out / "multitime.svg",
                                  line_chart_svg(series, "sample set", "recovery rate", y_range=(0.0, 1.0))))
    return written


def cmd_noise(cfg: ExperimentConfig, out: Path, threads: int | None, svg: bool) -> list[Path]:
    points = noise_histogram(cfg, threads)
    fields = ["measurement", "omega", "M", "trial_index", "seed", "noise_std", "eta", "l2_error", "solver_status"]
    rows = [
        {"measurement": p.measurement, "omega": _omega_label(p.omega), "M": p.M, "trial_index": r.trial_index,
         "seed": r.seed, "noise_std": repr(r.noise_std), "eta": _fmt(r.eta), "l2_error": _fmt(r.l2_error),
         "solver_status": r.solver_status}
        for p in points
        for r in p.records
    ]
    summary = [
        {"measurement": p.measurement, "omega": _omega_label(p.omega), "M": p.M, "trials": p.trials, "seed": p.seed,
         "median_l2_error": _fmt(statistics.median(r.l2_error for r in p.records))}
        for p in points
    ]
    written = [
        write_text(out / "noise.csv", csv_text(fields, rows)),
        write_text(out / "noise_summary.csv",
                   csv_text(["measurement", "omega", "M", "trials", "seed", "median_l2_error"], summary)),
    ]
    if svg:
        groups = [(f"{p.measurement} k={_omega_label(p.omega)} M={p.M}", [r.l2_error for r in p.records]) for p in points]
        written.append(write_text(out / "noise.svg", histogram_svg(groups, "recovery error")))
    return written


def cmd_com(cfg: ExperimentConfig, out: Path, threads: int | None, svg: bool) -> list[Path]:
    reports = com_verification_suite(cfg, threads)
    fields = ["regime", "M", "K", "epsilon", "bound", "empirical", "trials", "seed"]
    rows = []
    for r in reports:
        row = r.row()
        row.update(epsilon=repr(row["epsilon"]), bound=_fmt(row["bound"]), empirical=_fmt(row["empirical"]))
        rows.append(row)
    return [write_text(out / "com.csv", csv_text(fields, rows))]


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int | None, svg: bool) -> list[Path]:
    times, states = simulate(cfg)
    fields = ["time", "node", "value"]
    rows = [{"time": int(k), "node": j, "value": _fmt(v)} for k, x in zip(times, states) for j, v in enumerate(x)]
    written = [write_text(out / "simulate.csv", csv_text(fields, rows))]
    if svg:
        series = [(f"k={int(k)}", list(enumerate(x.tolist()))) for k, x in zip(times, states)]
        written.append(write_text(out / "simulate.svg", line_chart_svg(series, "node", "concentration")))
    return written


def _load_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except OSError as exc:
        raise CliError(EXIT_IO, "io", f"{path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, "input", f"{path}: {exc}") from None


def cmd_recover(args) -> int:
    Phi = _load_matrix(args.matrix)
    y = _load_matrix(args.measurements).ravel()
    if Phi.shape[0] != y.size:
        raise CliError(EXIT_CONFIG, "input", f"matrix has {Phi.shape[0]} rows but there are {y.size} measurements")
    res = solve_bpdn(Phi, args.eta, y) if args.eta > 0 else solve_bp(Phi, y)
    if res.status is Status.INFEASIBLE:
        raise CliError(EXIT_INFEASIBLE, "infeasible", "measurements are inconsistent with the matrix")
    rows = [{"index": i, "value": _fmt(v)} for i, v in enumerate(res.x_hat)]
    path = write_text(Path(args.out) / "recovered.csv", csv_text(["index", "value"], rows))
    print(f"status={res.status.value} iterations={res.iterations} certified={res.certified} wrote={path}")
    return EXIT_OK


def cmd_rip_bound(args) -> int:
    try:
        inp = RipBoundInput(N=args.N, S=args.S, delta=args.delta, nu=args.nu, a=args.a, K=args.K, lam=args.lam,
                            delta_S=args.delta_S, k0=args.k0, k_last=args.k_last, rho=args.rho)
        value = rip_measurement_count(inp, args.regime)
    except CompobsError as exc:
        raise CliError(EXIT_CONFIG, "parameters", str(exc)) from None
    inputs = {k: v for k, v in vars(args).items() if k in RipBoundInput.__dataclass_fields__ and v is not None}
    print(f"regime={args.regime}")
    for k, v in inputs.items():
        print(f"{k}={v}")
    print(f"MK_min={value:.17g}")
    return EXIT_OK


EXPERIMENT_COMMANDS = {
    "phase": cmd_phase,
    "multitime": cmd_multitime,
    "noise": cmd_noise,
    "com-verify": cmd_com,
    "simulate": cmd_simulate,
}


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compobs", description="Sparse initial-state recovery experiments.")
    parser.add_argument("--version", action="version", version=f"compobs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", help="JSON config file or shipped config name (e.g. fig3a)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: available CPUs)")
        p.add_argument("--svg", action="store_true", help="also render an SVG chart")
        p.add_argument("--fast", action="store_true", help="cap trials at 50")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")

    p = sub.add_parser("recover", help="recover a sparse vector from measurement files")
    p.add_argument("--matrix", required=True, help="CSV measurement matrix")
    p.add_argument("--measurements", required=True, help="CSV measurement vector")
    p.add_argument("--eta", type=float, default=0.0, help="l2 noise budget (0 for exact recovery)")
    p.add_argument("--out", default=".")

    p = sub.add_parser("rip-bound", help="sufficient measurement count for the RIP")
    p.add_argument("--regime", required=True, choices=[r.value for r in Regime if r.value not in
                                                       ("independent", "identical")])
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--a", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--delta-S", dest="delta_S", type=float)
    p.add_argument("--k0", type=int, default=0)
    p.add_argument("--k-last", dest="k_last", type=int)
    p.add_argument("--rho", type=float)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "recover":
        return cmd_recover(args)
    if args.command == "rip-bound":
        return cmd_rip_bound(args)
    cfg = load_config(args.config, args.overrides, args.command)
    if args.fast:
        cfg.trials = min(cfg.trials, 50)
    if args.threads is not None and args.threads < 1:
        raise CliError(EXIT_CONFIG, "usage", "--threads must be positive")
    for path in EXPERIMENT_COMMANDS[args.command](cfg, Path(args.out), args.threads, args.svg):
        print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except CliError as exc:
        print(f"compobs: error: {exc.kind}: {exc.detail}", file=sys.stderr)
        return exc.code
    except CompobsError as exc:
        print(f"compobs: error: invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"compobs: error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
