"""Experiment orchestration: one case -> links, bounds, constants, eigenpairs, verdicts."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import verify
from .config import CaseConfig, ConfigError, RunConfig
from .constants import GeometricBounds, assemble_constants, main_bound
from .eigensolver import ConvergenceError, smallest_eigenpairs
from .holonomy import beta_flat
from .lattice import build_links, flat_spectrum, magnetic_spectrum, plaquette_curvature, torus_metrics
from .report import CaseReport, Report

__all__ = ["run_case", "run_config", "convergence_study", "worker_count", "COMMAND_CHECKS"]

log = logging.getLogger(__name__)

# checks each subcommand runs; None means "what the case config asks for"
COMMAND_CHECKS = {
    "verify": None,
    "spectrum": (),
    "holonomy": ("holonomy",),
    "moser-trace": ("moser",),
}


def worker_count() -> int:
    raw = os.environ.get("BUNDLE_SPECTRA_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def derive_bounds(case: CaseConfig, links):
    """Auto bounds (K = 0, d = half diagonal, r = measured) and the overridden ones."""
    d = torus_metrics(case.torus)["diameter"]
    _, r = plaquette_curvature(links, case.torus)
    auto = GeometricBounds(case.torus.n, 0.0, d, r)
    values = {"K": auto.K, "d": auto.d, "r": auto.r}
    for key, value in case.overrides.items():
        # plaquette r carries rounding noise
        floor = values[key] * (1 - 1e-12) if key == "r" else values[key]
        if value < floor:
            raise ConfigError(f"{case.case_id}.overrides.{key}",
                              f"override {value} is below the derived value {values[key]}; overrides may only increase")
        values[key] = value
    return auto, GeometricBounds(case.torus.n, values["K"], values["d"], values["r"])


def analytic_eigenvalues(case: CaseConfig, count: int, discrete: bool):
    torus, bundle = case.torus, case.bundle
    if bundle.kind == "flat":
        return [m.lam for m in flat_spectrum(torus, bundle, count, discrete=discrete)]
    if bundle.kind == "magnetic" and not discrete:
        try:
            return magnetic_spectrum(torus, bundle, count)
        except ValueError:
            return None
    return None


def _sorted_rows(rows):
    return sorted(rows, key=lambda r: (r.check_id, r.context.get("lambda", 0.0)))


def run_case(case: CaseConfig, command: str = "verify", timing: bool = False) -> CaseReport:
    t0 = time.perf_counter()
    links = build_links(case.torus, case.bundle)
    auto, bounds = derive_bounds(case, links)
    constants = assemble_constants(bounds)
    report = CaseReport(case_id=case.case_id, config=case.raw, constants=constants.ledger())
    diag = report.diagnostics
    diag["measured_r"] = auto.r
    diag["diameter"] = auto.d
    diag["volume"] = torus_metrics(case.torus)["volume"]
    diag["bundle_kind"] = case.bundle.kind

    t1 = time.perf_counter()
    try:
        pairs = smallest_eigenpairs(links, case.torus, case.solver.num_pairs, tol=case.solver.tol,
                                    max_iter=case.solver.max_iter, seed=case.solver.seed)
    except ConvergenceError as exc:
        diag["solver_status"] = "failed"
        diag["solver_best_residual"] = exc.best_residual
        return report
    diag["solver_status"] = "converged"
    t2 = time.perf_counter()

    discrete = analytic_eigenvalues(case, len(pairs), discrete=True)
    continuum = analytic_eigenvalues(case, len(pairs), discrete=False)
    for i, p in enumerate(pairs):
        entry = {"index": i, "lambda": p.lam, "residual": p.residual}
        if discrete is not None:
            entry["analytic_discrete"] = discrete[i]
        if continuum is not None:
            entry["analytic_continuum"] = continuum[i]
        report.eigenvalues.append(entry)

    checks = COMMAND_CHECKS.get(command)
    checks = case.checks if checks is None else checks
    rows = []
    if "eigenpair" in checks:
        for p in pairs:
            rows += verify.check_eigenpair(p, links, case.torus, constants)
        if case.overrides and pairs[0].lam > 0:
            auto_constants = assemble_constants(auto)
            gain = main_bound(constants, pairs[0].lam) - main_bound(auto_constants, pairs[0].lam)
            rows.append(verify.make_row("bounds_override", 1.0, gain, {"lambda": pairs[0].lam}))
    if "moser" in checks:
        for p in pairs:
            rows += verify.check_moser_chain(p, links, case.torus, constants, case.moser_j_max)
    if "holonomy" in checks:
        beta = beta_flat(case.torus, case.bundle, case.beta_search_radius)
        diag["beta"] = {
            "beta": beta.beta,
            "witness_m": list(beta.witness_m),
            "search_radius": beta.search_radius,
            "tail_bound": beta.tail_bound,
            "pure_beta": beta.pure_beta,
            "mixture_weights": list(beta.mixture_weights),
        }
        rows += verify.check_holonomy_bound(pairs[0].lam, beta, constants)
        rows += [verify.check_holonomy_gradient(p, beta, links, case.torus) for p in pairs]
    if "near_orthonormal" in checks:
        D, nrows = verify.check_near_orthonormal(pairs, l2_tol=max(10 * case.solver.tol, 1e-10))
        diag["near_orthonormal_D"] = D.tolist()
        rows += nrows
    if "frame" in checks:
        try:
            frame = verify.gram_schmidt_frame(pairs[: case.bundle.rank], links, case.torus)
        except verify.FrameError as exc:
            rows.append(verify.make_row("frame.exists", 1.0, -math.inf, {"lambda": pairs[0].lam,
                                                                         "site": [int(i) for i in exc.site]}))
        else:
            diag["frame_deviation"] = frame.deviation
            diag["frame_gradient"] = frame.frame_gradient
            rows += frame.rows
    report.verdicts = _sorted_rows(rows)
    if timing:
        diag["timing"] = {
            "setup_s": t1 - t0,
            "solve_s": t2 - t1,
            "checks_s": time.perf_counter() - t2,
        }
    return report


def _status(cases):
    if any(c.diagnostics.get("solver_status") == "failed" for c in cases):
        return "solver_failure"
    if not all(c.passed for c in cases):
        return "verdict_failure"
    return "ok"


def _map_cases(fn, cases):
    workers = min(worker_count(), len(cases))
    if workers <= 1:
        return [fn(c) for c in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cases))


def run_config(config: RunConfig, command: str = "verify", timing: bool = False) -> Report:
    if command not in COMMAND_CHECKS:
        raise ValueError(f"unknown command {command!r}")
    cases = _map_cases(lambda c: run_case(c, command, timing), config.cases)
    return Report(command=command, cases=cases, status=_status(cases))


def _orders(errors, hs):
    pairwise = []
    for a in range(len(errors) - 1):
        e0, e1 = errors[a], errors[a + 1]
        if e0 > 0 and e1 > 0:
            pairwise.append(math.log(e0 / e1) / math.log(hs[a] / hs[a + 1]))
        else:
            pairwise.append(None)
    good = [(h, e) for h, e in zip(hs, errors) if e > 0]
    fitted = None
    if len(good) >= 2:
        fitted = float(np.polyfit(np.log([g[0] for g in good]), np.log([g[1] for g in good]), 1)[0])
    return pairwise, fitted


def convergence_study(base: CaseConfig, refinements=None, timing: bool = False) -> Report:
    """Eigenvalues across grid refinements with observed convergence orders.

    ``refinements`` are integer scale factors of the base grid. With an
    analytic continuum target the errors against it are fitted; otherwise
    only successive differences (self-convergence) are reported.
    """
    factors = tuple(refinements if refinements is not None else base.refinements)
    if len(factors) < 3:
        raise ConfigError(f"{base.case_id}.refinements", "need at least 3 refinement levels")
    if list(factors) != sorted(set(factors)):
        raise ConfigError(f"{base.case_id}.refinements", "scale factors must be strictly increasing")
    k = base.solver.num_pairs
    target = analytic_eigenvalues(base, k, discrete=False)
    levels, case_reports = [], []
    for f in factors:
        case = replace(base, torus=base.torus.scaled(f), checks=())
        rep = run_case(case, "spectrum", timing)
        if rep.diagnostics.get("solver_status") == "failed":
            case_reports.append(rep)
            break
        levels.append({"factor": f, "grid": list(case.torus.grid), "h": max(case.torus.spacing),
                       "eigenvalues": [e["lambda"] for e in rep.eigenvalues]})
        case_reports.append(rep)

    first = case_reports[0]
    out = CaseReport(case_id=base.case_id, config=base.raw, constants=first.constants,
                     diagnostics={"solver_status": case_reports[-1].diagnostics.get("solver_status")})
    hs = [lv["h"] for lv in levels]
    per_index = []
    rows = []
    for i in range(k if len(levels) == len(factors) else 0):
        lams = [lv["eigenvalues"][i] for lv in levels]
        entry = {"index": i, "lambdas": lams,
                 "differences": [lams[a + 1] - lams[a] for a in range(len(lams) - 1)]}
        if target is not None:
            errors = [abs(lam - target[i]) for lam in lams]
            pairwise, fitted = _orders(errors, hs)
            entry.update({"target": target[i], "errors": errors, "pairwise_order": pairwise, "fitted_order": fitted})
            seq = errors
            label = "convergence.error"
        else:
            seq = [abs(d) for d in entry["differences"]]
            label = "convergence.difference"
        for a in range(1, len(seq)):
            rows.append(verify.make_row(f"{label}[{i}:{a}]", seq[a], math.log(seq[a - 1]) if seq[a - 1] > 0 else -math.inf,
                                        {"lambda": lams[a]}))
        per_index.append(entry)
    out.eigenvalues = [{"index": e["index"], "lambda": e["lambdas"][-1]} for e in per_index]
    out.convergence = {"levels": levels, "target_available": target is not None, "per_index": per_index}
    out.verdicts = _sorted_rows(rows)
    return Report(command="converge", cases=[out], status=_status(case_reports + [out]))
