"""``gridseer`` command line.

Every command prints (or writes with ``--out``) one JSON report::

    {"command", "version", "inputs_digest", "results", "timings"}

Exit codes: 0 success, 1 usage, 2 invalid input, 3 infeasible or
unobservable, 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attack import AttackInfeasible, AttackTarget, min_cut_attack
from .caseio import parse_case, parse_meters
from .estimator import (BddConfig, EstimatorConfig, UnobservableError, estimate_and_check,
                        simulate_measurements, verify_undetectable)
from .export import attack_to_dict, attack_to_dot, emst_to_dict, emst_to_dot, plan_to_dict
from .grid import GridError, MeterSet, measured_subgraph
from .observability import construct_emst, find_basic_set, is_observable, validate_emst
from .protection import ProtectionInfeasible, protect_exact, protect_tph, verify_protection

log = logging.getLogger("gridseer")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = range(5)


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class Infeasible(Exception):
    """Carries the partial results (certificate, barrier...) for the report."""

    def __init__(self, msg: str, results: dict):
        super().__init__(msg)
        self.results = results


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- inputs

def _id_list(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _targets(text: str | None) -> list[int]:
    ids = _id_list(text)
    if not ids:
        raise UsageError("--targets needs at least one bus id, e.g. --targets 5,8")
    try:
        return sorted({int(t) for t in ids})
    except ValueError:
        raise UsageError(f"--targets expects integers, got {text!r}") from None


def _load_json(path: str) -> object:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from None


class Inputs:
    """Case, meters and the digest of everything that determines the results."""

    def __init__(self, args):
        self.blobs: list[bytes] = []
        case = Path(args.case)
        if not case.is_file():
            raise InputError(f"case file not found: {args.case}")
        self.blobs.append(case.read_bytes())
        self.network, meters = parse_case(case, getattr(args, "format", None))
        self.all_meters = meters
        self.subset = None
        spec = args.meters
        if spec and Path(spec).is_file():
            self.blobs.append(Path(spec).read_bytes())
            meters = parse_meters(self.network, Path(spec))
            self.all_meters = meters
        elif spec:
            self.subset = meters.ordered(_id_list(spec))
        if getattr(args, "costs", None):
            self.blobs.append(Path(args.costs).read_bytes())
            meters = meters.with_costs({str(k): float(v) for k, v in _load_json(args.costs).items()})
            self.all_meters = meters
        self.meters = meters if self.subset is None else meters.subset(self.subset)

    def digest(self, options: dict) -> str:
        h = hashlib.sha256()
        for blob in self.blobs:
            h.update(hashlib.sha256(blob).digest())
        h.update(json.dumps(options, sort_keys=True).encode())
        return h.hexdigest()


def _secured_ids(value: str | None) -> list[str]:
    """``--secured`` takes meter ids or a JSON file: a plan, a list, or a
    ``protect`` report (the exact plan wins over the heuristic one)."""
    if not value:
        return []
    if not Path(value).is_file():
        return _id_list(value)
    doc = _load_json(value)
    if isinstance(doc, list):
        return [str(x) for x in doc]
    if "results" in doc:
        plans = doc["results"].get("plans", {})
        for mode in ("exact", "tph"):
            if mode in plans:
                return list(plans[mode]["meters"])
        raise InputError(f"{value}: report holds no protection plan")
    if "meters" in doc:
        return list(doc["meters"])
    raise InputError(f"{value}: expected a meter list, a plan or a protect report")


def _write_text(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


# ---------------------------------------------------------------- commands

def cmd_inspect(args, inp: Inputs, timings: dict) -> dict:
    net, meters = inp.network, inp.meters
    t = time.perf_counter()
    full = is_observable(meters)
    timings["observability_s"] = time.perf_counter() - t
    sub = measured_subgraph(meters)
    return {
        "buses": len(net.buses),
        "n": net.n,
        "m": len(meters),
        "lines": len(net.lines),
        "reference": net.reference,
        "meter_kinds": {k: sum(1 for mt in meters if mt.kind == k) for k in ("flow", "injection")},
        "observable": full.observable,
        "certificate": None if full.certificate is None else full.certificate.tolist(),
        "unobservable_buses": list(full.unobservable_buses),
        "measured_buses": sorted(sub.vertices),
        "measured_lines": [list(e) for e in sorted(sub.edges)],
    }


def cmd_emst(args, inp: Inputs, timings: dict) -> dict:
    meters = inp.all_meters
    ids = meters.ids if inp.subset is None else inp.subset
    # scope: the buses measured by every meter of the case, plus --targets
    scope = set(measured_subgraph(meters).vertices) - {meters.network.reference}
    if args.targets:
        scope |= set(_targets(args.targets))
    t = time.perf_counter()
    obs = is_observable(meters, ids, targets=scope)
    if not obs:
        cert = None if obs.certificate is None else obs.certificate.tolist()
        raise Infeasible("meter subset does not observe the requested buses",
                         {"observable": False, "certificate": cert,
                          "unobservable_buses": list(obs.unobservable_buses)})
    basic = find_basic_set(meters, ids)
    emst = construct_emst(meters, measured_subgraph(meters, ids), basic)
    timings["emst_s"] = time.perf_counter() - t
    ok, problems = validate_emst(meters, emst)
    if not ok:
        raise RuntimeError("constructed tree failed validation: " + "; ".join(problems))
    _write_text(args.dot, emst_to_dot(meters.network, emst))
    unused = sorted(set(measured_subgraph(meters, ids).edges) - set(emst.tree_edges))
    return {"observable": True, "basic_set": list(basic.meter_ids),
            "emst": emst_to_dict(emst), "spanning": len(emst.vertices) == len(meters.network.buses),
            "unused_lines": [list(e) for e in unused], "valid": ok}


def _plan_report(meters: MeterSet, plan, D) -> dict:
    d = plan_to_dict(plan)
    d["verified"] = verify_protection(meters, plan, D)
    d["stats"] = {k: v for k, v in plan.stats.items() if k != "elapsed"}
    return d


def cmd_protect(args, inp: Inputs, timings: dict) -> dict:
    D = _targets(args.targets)
    meters = inp.meters
    modes = ("exact", "tph") if args.mode == "both" else (args.mode,)
    plans, objs = {}, {}
    trace = None
    if log.isEnabledFor(logging.DEBUG):
        def trace(event):
            log.debug(json.dumps(event, sort_keys=True))
    try:
        for mode in modes:
            t = time.perf_counter()
            if mode == "exact":
                plan = protect_exact(meters, D, time_limit=args.timeout, trace=trace)
            else:
                plan = protect_tph(meters, D)
            timings[f"{mode}_s"] = time.perf_counter() - t
            plans[mode] = _plan_report(meters, plan, D)
            objs[mode] = plan
    except ProtectionInfeasible as exc:
        raise Infeasible(str(exc), {"targets": D, "disconnected": list(exc.disconnected)}) from None
    except UnobservableError as exc:
        raise Infeasible(str(exc), {"targets": D, "unobservable_buses": list(exc.buses)}) from None
    except TimeoutError as exc:
        raise Infeasible(str(exc), {"targets": D}) from None
    if args.dot:
        best = objs.get("exact") or objs["tph"]
        _write_text(args.dot, emst_to_dot(meters.network, best.witness))
    out = {"targets": D, "plans": plans}
    if len(plans) == 2:
        out["tph_ge_exact"] = plans["tph"]["cost"] >= plans["exact"]["cost"] - 1e-9
    return out


def _demo(meters: MeterSet, a: np.ndarray, c: np.ndarray, rng, sigma: float) -> dict | None:
    H = meters.jacobian
    m, n = H.matrix.shape
    if not is_observable(meters):
        return None
    theta = rng.uniform(-0.2, 0.2, n)
    z = simulate_measurements(H, theta, sigma, rng)
    bdd = BddConfig.chi_square(m, n, sigma) if m > n and sigma > 0 else None
    tau = bdd.tau if bdd else float("inf")
    clean = estimate_and_check(H, z, EstimatorConfig(noise_sigma=sigma), BddConfig(tau))
    bad = estimate_and_check(H, z + a, EstimatorConfig(noise_sigma=sigma), BddConfig(tau))
    return {
        "tau": bdd.tau if bdd else None,
        "clean_residual_norm": clean.residual_norm,
        "attacked_residual_norm": bad.residual_norm,
        "residual_difference": abs(clean.residual_norm - bad.residual_norm),
        "clean_detected": clean.detected if bdd else None,
        "attacked_detected": bad.detected if bdd else None,
        "theta_shift_error": float(np.max(np.abs(bad.theta_hat - clean.theta_hat - c))),
    }


def cmd_attack(args, inp: Inputs, timings: dict) -> dict:
    D = _targets(args.targets)
    secured = _secured_ids(args.secured)
    meters = inp.meters
    try:
        meters = meters.with_secured(secured)
    except (KeyError, ValueError) as exc:
        raise InputError(f"--secured: {exc}") from None
    t = time.perf_counter()
    try:
        plan = min_cut_attack(meters, AttackTarget(D), delta=args.delta)
    except AttackInfeasible as exc:
        raise Infeasible(str(exc), {"targets": D, "secured": sorted(secured),
                                    "barrier": [list(e) for e in exc.barrier]}) from None
    timings["attack_s"] = time.perf_counter() - t
    _write_text(args.dot, attack_to_dot(meters.network, plan))
    out = {"targets": D, "secured": sorted(secured), **attack_to_dict(plan)}
    out["undetectable"] = verify_undetectable(meters.jacobian, plan.vector)
    out["demo"] = _demo(meters, plan.vector.a, plan.bias, np.random.default_rng(args.seed), args.sigma)
    return out


def _attack_vector(path: str, m: int) -> np.ndarray:
    doc = _load_json(path)
    if isinstance(doc, dict) and "results" in doc:
        doc = doc["results"]
    a = doc.get("a") if isinstance(doc, dict) else doc
    if a is None:
        raise InputError(f"{path}: no attack vector 'a'")
    a = np.asarray(a, dtype=float)
    if a.shape != (m,):
        raise InputError(f"attack vector has {a.size} entries but the case has {m} meters")
    return a


def _theta(path: str, n: int) -> np.ndarray:
    doc = _load_json(path)
    theta = np.asarray(doc["theta"] if isinstance(doc, dict) else doc, dtype=float)
    if theta.shape != (n,):
        raise InputError(f"true state has {theta.size} entries but the case has {n} state buses")
    return theta


def cmd_estimate(args, inp: Inputs, timings: dict) -> dict:
    meters = inp.meters
    H = meters.jacobian
    m, n = H.matrix.shape
    a = _attack_vector(args.attack, m) if args.attack else None
    theta_true = _theta(args.theta, n) if args.theta else None
    gross = None
    if args.gross_error:
        if args.gross_error not in meters:
            raise InputError(f"--gross-error: unknown meter {args.gross_error!r}")
        gross = meters.position[args.gross_error]
    # the detector's noise model defaults to the simulated one; a noise-free
    # run still gets a threshold so "detected" stays meaningful
    bdd_sigma = args.bdd_sigma or args.sigma or 0.01
    if args.tau is not None:
        bdd = BddConfig(args.tau)
    elif m > n:
        bdd = BddConfig.chi_square(m, n, bdd_sigma)
    else:
        bdd = None
    tau = bdd.tau if bdd else float("inf")
    est = EstimatorConfig(noise_sigma=args.sigma)

    def run(seq):
        rng = np.random.default_rng(seq)
        theta = theta_true if theta_true is not None else rng.uniform(-0.2, 0.2, n)
        z = simulate_measurements(H, theta, args.sigma, rng)
        if gross is not None:
            z[gross] += args.gross_size * args.sigma
        res = estimate_and_check(H, z, est, BddConfig(tau))
        out = {"theta_true": theta.tolist(), **res.to_dict(z)}
        out["detected"] = res.detected if bdd else None
        if a is not None:
            att = estimate_and_check(H, z + a, est, BddConfig(tau))
            out["attacked"] = {**att.to_dict(z + a), "detected": att.detected if bdd else None}
            out["theta_shift"] = (att.theta_hat - res.theta_hat).tolist()
            out["same_detection"] = out["attacked"]["detected"] == out["detected"]
        return out

    seqs = np.random.SeedSequence(args.seed).spawn(args.trials)
    t = time.perf_counter()
    try:
        if args.jobs > 1 and args.trials > 1:
            with ThreadPoolExecutor(args.jobs) as pool:
                runs = list(pool.map(run, seqs))
        else:
            runs = [run(s) for s in seqs]
    except UnobservableError as exc:
        raise Infeasible(str(exc), {"observable": False, "certificate": exc.certificate.tolist(),
                                    "unobservable_buses": list(exc.buses)}) from None
    timings["estimate_s"] = time.perf_counter() - t
    head = {"m": m, "n": n, "sigma": args.sigma, "tau": bdd.tau if bdd else None,
            "seed": args.seed, "trials": args.trials}
    if args.trials == 1:
        return {**head, **runs[0]}
    summary = {"detections": sum(bool(r["detected"]) for r in runs)}
    if a is not None:
        summary["attacked_detections"] = sum(bool(r["attacked"]["detected"]) for r in runs)
    return {**head, **summary, "runs": runs}


COMMANDS = {"inspect": cmd_inspect, "emst": cmd_emst, "protect": cmd_protect,
            "attack": cmd_attack, "estimate": cmd_estimate}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gridseer", description="Graph-based security analysis for DC state estimation.")
    p.add_argument("--version", action="version", version=f"gridseer {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--case", required=True, help="native JSON or MATPOWER case file")
        sp.add_argument("--format", choices=("native-json", "matpower-subset"))
        sp.add_argument("--meters", help="meter JSON file, or comma-separated meter ids of the case")
        sp.add_argument("--costs", help="JSON object mapping meter id to cost")
        sp.add_argument("--out", help="write the report here instead of stdout")
        return sp

    common(sub.add_parser("inspect", help="network summary and observability"))
    sp = common(sub.add_parser("emst", help="basic set and edge-measured Steiner tree"))
    sp.add_argument("--targets", help="extra buses the tree must reach")
    sp.add_argument("--dot", help="write a Graphviz rendering")

    sp = common(sub.add_parser("protect", help="meters to secure for target buses"))
    sp.add_argument("--targets")
    sp.add_argument("--mode", choices=("exact", "tph", "both"), default="exact")
    sp.add_argument("--timeout", type=float, default=60.0, help="exact solver limit (s)")
    sp.add_argument("--dot")

    sp = common(sub.add_parser("attack", help="cheapest undetectable attack on target buses"))
    sp.add_argument("--targets")
    sp.add_argument("--secured", help="meter ids or a plan/report JSON file")
    sp.add_argument("--delta", type=float, default=0.1, help="angle bias (rad)")
    sp.add_argument("--seed", type=int, default=0, help="seed of the estimator demo")
    sp.add_argument("--sigma", type=float, default=0.01)
    sp.add_argument("--dot")

    sp = common(sub.add_parser("estimate", help="simulate, estimate and run bad data detection"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sigma", type=float, default=0.01)
    sp.add_argument("--theta", help="JSON file with the true state")
    sp.add_argument("--attack", help="attack report or JSON with vector 'a'")
    sp.add_argument("--tau", type=float, help="detection threshold (default: chi-square, p=0.99)")
    sp.add_argument("--bdd-sigma", type=float,
                    help="noise level assumed by the chi-square threshold (default: --sigma, or 0.01)")
    sp.add_argument("--gross-error", help="meter id that receives a gross error")
    sp.add_argument("--gross-size", type=float, default=10.0, help="gross error in sigmas")
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--jobs", type=int, default=1)
    return p


def _options(args) -> dict:
    skip = {"out", "dot", "case", "meters", "costs", "timeout"}
    opts = {k: v for k, v in vars(args).items() if k not in skip}
    if args.meters and not Path(args.meters).is_file():
        opts["meters"] = args.meters
    return opts


def _configure_logging() -> None:
    level = os.environ.get("GRIDSEER_LOG", "").lower()
    if level in ("debug", "info"):
        logging.basicConfig(stream=sys.stderr, format="%(name)s %(levelname)s %(message)s",
                            level=logging.DEBUG if level == "debug" else logging.INFO)


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=1) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "trials", 1) < 1 or getattr(args, "jobs", 1) < 1:
            raise UsageError("--trials and --jobs must be positive")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    timings: dict = {}
    start = time.perf_counter()
    report = {"command": args.command, "version": __version__}
    try:
        inp = Inputs(args)
        report["inputs_digest"] = inp.digest(_options(args))
        results = COMMANDS[args.command](args, inp, timings)
        code = EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GridError, InputError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"invalid input: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        results = {"error": str(exc), **exc.results}
        code = EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001 - last-resort guard for exit code 4
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    timings["total_s"] = time.perf_counter() - start
    report["results"] = results
    report["timings"] = timings
    _emit(report, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
