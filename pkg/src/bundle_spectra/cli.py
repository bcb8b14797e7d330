"""Command-line entry point: ``bundle-spectra <command> [options]``.

Exit codes: 0 when every verdict passes, 1 on a failing verdict or solver
failure (a partial report is still written), 2 on invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace

from .config import ConfigError, SolverConfig, load_config
from .constants import GeometricBounds, assemble_constants
from .lattice import build_links
from .pipeline import convergence_study, derive_bounds, run_config
from .report import Report, emit_report, write_report

log = logging.getLogger("bundle_spectra")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bundle-spectra",
                                description="Eigensection bound constants and lattice verification on flat tori.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, metavar="PATH", help="JSON run configuration")
        sp.add_argument("--format", choices=("csv", "json"), help="output format (default: config, else csv)")
        sp.add_argument("--out", metavar="PATH", help="output file (default: config, else stdout)")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    c = common(sub.add_parser("constants", help="print the constant ledger for given n, K, d, r"), False)
    c.add_argument("--n", type=int)
    c.add_argument("--K", type=float, default=0.0)
    c.add_argument("--d", type=float)
    c.add_argument("--r", type=float)

    for name, text in (("spectrum", "smallest eigenpairs"),
                       ("verify", "eigenpairs plus the configured inequality checks"),
                       ("holonomy", "holonomy beta and its spectral bounds (flat bundles)"),
                       ("moser-trace", "per-iteration Moser chain rows"),
                       ("converge", "eigenvalue convergence over grid refinements")):
        sp = common(sub.add_parser(name, help=text))
        sp.add_argument("--seed", type=int, help="override every case's solver seed")
        sp.add_argument("--timing", action="store_true", help="include wall-clock timings (breaks byte reproducibility)")
        if name == "converge":
            sp.add_argument("--refinements", help="comma-separated grid scale factors, e.g. 1,2,4")
    return p


def _constants_output(args) -> tuple[dict, str]:
    if args.config:
        cfg = load_config(args.config)
        case = cfg.cases[0]
        _, bounds = derive_bounds(case, build_links(case.torus, case.bundle))
        fmt = args.format or cfg.output_format
    else:
        missing = [f"--{k}" for k in ("n", "d", "r") if getattr(args, k) is None]
        if missing:
            raise ConfigError(",".join(missing), "required without --config")
        try:
            bounds = GeometricBounds(args.n, args.K, args.d, args.r)
        except ValueError as exc:
            raise ConfigError("--n/--K/--d/--r", str(exc)) from exc
        fmt = args.format or "csv"
    return assemble_constants(bounds).ledger(), fmt


def _emit_constants(ledger: dict, fmt: str) -> bytes:
    if fmt == "json":
        return (json.dumps(ledger, indent=2) + "\n").encode()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("name", "value"))
    for k, v in ledger.items():
        w.writerow((k, format(float(v), ".17g")))
    return buf.getvalue().encode()


def _write(data: bytes, path: str | None) -> None:
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _parse_refinements(text):
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError("--refinements", f"expected comma-separated integers, got {text!r}") from exc


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "constants":
            ledger, fmt = _constants_output(args)
            _write(_emit_constants(ledger, fmt), args.out)
            return EXIT_OK

        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", "must be nonnegative")
            cases = []
            for c in cfg.cases:
                raw = {**c.raw, "solver": {**(c.raw.get("solver") or {}), "seed": args.seed}}
                cases.append(replace(c, solver=replace(c.solver, seed=args.seed), raw=raw))
            cfg = replace(cfg, cases=cases)
        fmt = args.format or cfg.output_format
        out = args.out or cfg.output_path

        if args.command == "converge":
            refinements = _parse_refinements(args.refinements)
            parts = [convergence_study(c, refinements, timing=args.timing) for c in cfg.cases]
            statuses = [p.status for p in parts]
            status = next((s for s in ("solver_failure", "verdict_failure") if s in statuses), "ok")
            report = Report("converge", [c for p in parts for c in p.cases], status)
        else:
            report = run_config(cfg, args.command, timing=args.timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if out:
            write_report(report, fmt, out)
        else:
            _write(emit_report(report, fmt), None)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if report.status == "solver_failure":
        print("solver failed to converge; partial report written", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
