"""Command-line front end.

Each subcommand resolves its parameters from built-in defaults, then an
optional flat ``key=value`` config file, then explicit flags, runs one
experiment and writes ``<stem>.json`` and ``<stem>.csv`` to the output
directory (``--out``, else ``$DYNWALK_OUTPUT_DIR``, else the working
directory).

Exit codes: 0 all verdicts Pass, 1 any Fail, 2 usage or validation error,
3 Underpowered present under ``--strict``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .analytic import DomainError, GrowthEnvelope
from .clocks import sample_clocks
from . import experiments as ex
from .report import ReportIOError, emit_report
from .walk import path_sup, simulate_path, write_path_csv

OUTPUT_ENV = "DYNWALK_OUTPUT_DIR"


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (parser, default, help); booleans become store_true flags
COMMON = {
    "seed": (int, 0, "master seed"),
    "workers": (int, 1, "worker processes (does not change results)"),
    "strict": (_bool, False, "treat Underpowered as a failure (exit 3)"),
    "stem": (str, "", "output file stem"),
}

SUBCOMMANDS = {
    "tail-sweep": ("annealed sup-tail estimates against the tail band", {
        "n": (int, 10_000, "walk length"),
        "z": (_floats, [2.0, 2.5], "comma-separated z values"),
        "paths": (int, 100_000, "annealed paths"),
        "slack_low": (float, ex.DEFAULT_SLACK[0], "lower band slack"),
        "slack_high": (float, ex.DEFAULT_SLACK[1], "upper band slack"),
        "shard_size": (int, ex.DEFAULT_SHARD, "paths per shard"),
        "allow_rare": (_bool, False, "permit fewer than 20 expected hits"),
    }),
    "quenched-tail": ("quenched sup-tail estimates for fixed clock logs", {
        "n": (int, 10_000, "walk length"),
        "z": (float, 2.5, "threshold z"),
        "clock_seeds": (_ints, [1, 2, 3, 4, 5], "comma-separated clock seeds"),
        "paths": (int, 100_000, "deviate resamples per log"),
        "eps": (float, 0.5, "upper band slack epsilon"),
        "slack_low": (float, ex.DEFAULT_SLACK[0], "lower band slack"),
        "shard_size": (int, ex.DEFAULT_SHARD, "paths per shard"),
        "allow_rare": (_bool, False, "permit fewer than 20 expected hits"),
    }),
    "clock-verify": ("uniform concentration of the changed-coordinate counts", {
        "n": (int, 100_000, "number of clocks"),
        "delta": (float, 0.05, "minimum window length"),
        "alpha": (float, 0.2, "deviation threshold"),
        "reps": (int, 100, "replicate logs"),
        "small_logs": (int, 50, "small logs for the exact-vs-grid comparison"),
    }),
    "fdd-cov": ("covariance of the rescaled field on a grid", {
        "n": (int, 2000, "walk length"),
        "s_grid": (_floats, [0.0, 0.5, 1.0], "dynamical times"),
        "t_grid": (_floats, [0.25, 0.5, 1.0], "size fractions"),
        "reps": (int, 10_000, "replicates"),
    }),
    "block-moment": ("fourth moments of neighbouring block increments", {
        "n": (int, 1000, "walk length"),
        "reps": (int, 10_000, "replicates"),
    }),
    "ou-tail": ("OU sup-tail estimate with the step-halving diagnostic", {
        "z": (float, 2.5, "threshold z"),
        "h": (float, 1e-3, "grid step"),
        "paths": (int, 100_000, "paths"),
        "K": (float, 10.0, "band constant"),
        "no_halving": (_bool, False, "skip the step-halving diagnostic"),
        "allow_rare": (_bool, False, "permit fewer than 20 expected hits"),
    }),
    "integral-test": ("classify growth envelopes by the integral and sum tests", {
        "family": (str, "corollary", "corollary or scaled_lil"),
        "a": (_floats, [4.5, 5.5], "corollary parameters"),
        "c": (_floats, [0.9, 1.2], "scaled_lil parameters"),
        "n_max": (int, 20_000, "Erdős sequence length for the sum test"),
    }),
    "erdos-suite": ("classifications, localization ratios and the Q table", {
        "n_max": (int, 20_000, "Erdős sequence length"),
        "paths": (int, 100_000, "multi-level paths"),
        "cap": (int, 10_000, "largest e_j simulated"),
        "shard_size": (int, ex.DEFAULT_SHARD, "paths per shard"),
    }),
    "simulate-path": ("simulate one path and dump its segments", {
        "n": (int, 1000, "walk length"),
        "horizon": (float, 1.0, "time horizon"),
        "clock_seed": (int, 0, "clock seed"),
    }),
    "pz-check": ("occupation-time moments and the Paley-Zygmund bound", {
        "n": (int, 10_000, "walk length"),
        "z": (float, 2.0, "threshold z"),
        "clock_seed": (int, 0, "clock seed"),
        "paths": (int, 100_000, "deviate resamples"),
        "alpha": (float, 0.5, "good-event deviation threshold"),
    }),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynwalk", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for cmd, (help_text, params) in SUBCOMMANDS.items():
        p = sub.add_parser(cmd, help=help_text, description=help_text)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
        for name, (kind, default, text) in {**COMMON, **params}.items():
            if kind is _bool:
                p.add_argument(_flag(name), dest=name, action="store_true",
                               default=argparse.SUPPRESS, help=text)
            else:
                p.add_argument(_flag(name), dest=name, type=kind, default=argparse.SUPPRESS,
                               help=f"{text} (default {default})")
    return parser


def read_config(path: str | os.PathLike) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{k}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve_config(command: str, flags: dict, file_values: dict | None = None) -> dict:
    """Defaults, then config-file values, then flags."""
    params = {**COMMON, **SUBCOMMANDS[command][1]}
    cfg = {name: default for name, (_, default, _) in params.items()}
    for key, raw in (file_values or {}).items():
        if key not in params:
            raise ValueError(f"unknown config key {key!r} for {command}")
        cfg[key] = params[key][0](raw)
    for key, value in flags.items():
        if key in params:
            cfg[key] = value
    return cfg


def _family(cfg: dict) -> list:
    if cfg["family"] == "corollary":
        return [(f"corollary a={a}", GrowthEnvelope.corollary(a)) for a in cfg["a"]]
    if cfg["family"] == "scaled_lil":
        return [(f"scaled_lil c={c}", GrowthEnvelope.scaled_lil(c)) for c in cfg["c"]]
    raise DomainError(f"unknown family {cfg['family']!r}")


def run_command(command: str, cfg: dict, out_dir: Path) -> ex.ExperimentReport:
    seed, workers = cfg["seed"], cfg["workers"]
    if workers < 1:
        raise DomainError("workers must be >= 1")
    if command == "tail-sweep":
        return ex.run_tail_sweep(cfg["n"], cfg["z"], cfg["paths"], seed,
                                 slack=(cfg["slack_low"], cfg["slack_high"]), workers=workers,
                                 shard_size=cfg["shard_size"], allow_rare=cfg["allow_rare"])
    if command == "quenched-tail":
        return ex.run_quenched_family(cfg["n"], cfg["z"], cfg["clock_seeds"], cfg["paths"], seed,
                                      eps=cfg["eps"], slack_low=cfg["slack_low"],
                                      workers=workers, shard_size=cfg["shard_size"],
                                      allow_rare=cfg["allow_rare"])
    if command == "clock-verify":
        return ex.run_clock_verification(cfg["n"], cfg["delta"], cfg["alpha"], cfg["reps"], seed,
                                         small_logs=cfg["small_logs"], workers=workers)
    if command == "fdd-cov":
        return ex.run_fdd_covariance(cfg["n"], cfg["s_grid"], cfg["t_grid"], cfg["reps"], seed,
                                     workers=workers)
    if command == "block-moment":
        return ex.run_block_moment_check(cfg["n"], reps=cfg["reps"], seed=seed, workers=workers)
    if command == "ou-tail":
        return ex.run_ou_tail(cfg["z"], cfg["h"], cfg["paths"], seed, K=cfg["K"],
                              halving=not cfg["no_halving"], allow_rare=cfg["allow_rare"])
    if command == "integral-test":
        return ex.run_integral_tests(_family(cfg), cfg["n_max"])
    if command == "erdos-suite":
        return ex.run_erdos_suite(None, cfg["n_max"], cfg["paths"], seed, cap=cfg["cap"],
                                  workers=workers, shard_size=cfg["shard_size"])
    if command == "simulate-path":
        log = sample_clocks(cfg["n"], cfg["horizon"], cfg["clock_seed"])
        path = simulate_path(cfg["n"], log, seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        dest = out_dir / f"{cfg['stem'] or 'path'}-segments.csv"
        write_path_csv(path, dest)
        table = {"path": [{"events": len(log), "sup": path_sup(path),
                           "final": float(path.values[-1]), "segments": str(dest.name)}]}
        return ex.ExperimentReport("simulate-path", {}, seed, [], [], table)
    if command == "pz-check":
        log = sample_clocks(cfg["n"], 1.0, cfg["clock_seed"])
        return ex.paley_zygmund_check(log, cfg["n"], cfg["z"], cfg["paths"], seed,
                                      alpha=cfg["alpha"], workers=workers)
    raise DomainError(f"unknown command {command!r}")


def _summary(report: ex.ExperimentReport) -> list[str]:
    lines = [f"{report.experiment}: {report.verdict}"]
    for b in report.bands:
        e = b.estimate
        lines.append(f"  {b.verdict:<12} {b.parameter}: p={e.p_hat:.6g} "
                     f"ci=[{e.ci_low:.6g}, {e.ci_high:.6g}] band=[{b.band[0]:.6g}, {b.band[1]:.6g}]")
    for c in report.checks:
        note = f"  ({c.note})" if c.note else ""
        lines.append(f"  {c.verdict:<12} {c.name}: {c.value:.6g} in [{c.low:.6g}, {c.high:.6g}]{note}")
    return lines


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 2
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    try:
        file_values = read_config(args.config) if args.config else {}
        cfg = resolve_config(args.command, flags, file_values)
        out_dir = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
        report = run_command(args.command, cfg, out_dir)
        report.config = {**report.config, "resolved": {"command": args.command, **cfg}}
        report.__post_init__()
        js, cs = emit_report(report, out_dir, cfg["stem"] or None)
    except (DomainError, ValueError, OSError, ReportIOError) as exc:
        print(f"dynwalk: error: {exc}", file=sys.stderr)
        return 2
    for line in _summary(report):
        print(line)
    print(f"wrote {js} and {cs}")
    return report.exit_code(cfg["strict"])


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
