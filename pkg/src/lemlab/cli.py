"""Command-line interface: ``lemlab <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input or usage, 2 for numerical failure.
"""

import argparse
import json
import logging
import sys
import time

import numpy as np

from . import ensembles, experiment, potential, render, topology
from .critical import hausdorff_multiset, oracle_critical_points, solve_critical_points
from .errors import NumericalError, SchemaError, ValidationError

log = logging.getLogger("lemlab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _common(suppress):
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="master seed")
    p.add_argument("--workers", type=int, default=d if suppress else 1, help="worker processes")
    p.add_argument("--out", default=d, help="output path (default: stdout)")
    p.add_argument("--quiet", action="store_true", default=d if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lemlab", description="Random polynomial lemniscates.", parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    com = [_common(True)]

    p = sub.add_parser("sample", parents=com, help="draw a random polynomial (roots JSON)")
    p.add_argument("--family", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("critical", parents=com, help="critical points of a roots JSON")
    p.add_argument("roots")

    p = sub.add_parser("count", parents=com, help="number of lemniscate components")
    p.add_argument("roots")
    p.add_argument("--method", choices=("exact", "grid", "both"), default="exact")
    p.add_argument("--resolution", type=int, default=2048, help="grid target resolution")

    p = sub.add_parser("certify", parents=com, help="isolated / good-root tallies")
    p.add_argument("roots")
    p.add_argument("--isolated-radius", type=float, default=None)
    p.add_argument("--good-radius", type=float, default=None)

    p = sub.add_parser("experiment", parents=com, help="run a campaign from a config JSON")
    p.add_argument("config")

    p = sub.add_parser("sweep", parents=com, help="mean count across scales")
    p.add_argument("--family", required=True)
    p.add_argument("--r", type=float, nargs="+", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=50)

    p = sub.add_parser("analyze", parents=com, help="potential and moments at points")
    p.add_argument("--family", required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--z", nargs="+", required=True, help="points such as 0.5 or 0.3+0.4j")
    p.add_argument("--p", type=float, nargs="*", default=[], help="moment orders for F_p")

    p = sub.add_parser("render", parents=com, help="SVG of the lemniscate")
    p.add_argument("roots")
    p.add_argument("--resolution", type=int, default=512)
    p.add_argument("--size", type=int, default=800)
    p.add_argument("--no-roots", action="store_true")
    p.add_argument("--critical", action="store_true", help="mark critical points")
    p.add_argument("--reference", type=float, default=None, help="radius of a reference circle")

    p = sub.add_parser("selftest", parents=com, help="oracle-equivalence and invariant checks")
    p.add_argument("--instances", type=int, default=100)
    return parser


def _read_roots(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return ensembles.loads(fh.read())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
        log.info("wrote %s", args.out)
    else:
        print(text)


def _finite(obj):
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json(obj):
    # strict JSON: NaN becomes null
    return json.dumps(_finite(obj), indent=1)


def _cmd_sample(args):
    spec = ensembles.EnsembleSpec(args.family, args.r, args.n)
    seed = ensembles.SeedPolicy(args.seed or 0, args.trial)
    _emit(args, ensembles.dumps(ensembles.sample_polynomial(spec, seed)))


def _cmd_critical(args):
    poly = _read_roots(args.roots)
    _emit(args, _json(solve_critical_points(poly).to_dict()))


def _cmd_count(args):
    poly = _read_roots(args.roots)
    out = {}
    if args.method in ("exact", "both"):
        out["exact"] = topology.count_components_exact(poly).to_dict()
    if args.method in ("grid", "both"):
        g = topology.count_components_grid(poly, target_resolution=args.resolution)
        out["grid"] = dict(g.to_dict(), resolution=g.resolution, unstable=bool(g.unstable))
    if args.method == "both":
        doc = dict(out["exact"], grid=out["grid"], agree=out["exact"]["count"] == out["grid"]["count"])
    else:
        doc = out[args.method]
    _emit(args, _json(doc))


def _cmd_certify(args):
    poly = _read_roots(args.roots)
    n = poly.degree
    ri = args.isolated_radius if args.isolated_radius is not None else n ** -6.0
    rg = args.good_radius if args.good_radius is not None else n ** -0.75
    good = 0
    if n >= 2:
        cps = solve_critical_points(poly)
        good = int(np.sum(topology.good_root_mask(poly, cps, rg)))
    doc = {"n": n, "isolated": topology.count_isolated(poly, ri), "isolated_radius": ri,
           "good": good, "good_radius": rg}
    _emit(args, _json(doc))


def _cmd_experiment(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid config JSON: {exc}") from None
    cfg = experiment.ExperimentConfig.from_dict(doc)
    if args.seed is not None:
        cfg = experiment.ExperimentConfig(cfg.family, cfg.r, cfg.degrees, cfg.trials_per_degree, args.seed,
                                          cfg.count_method, cfg.outputs)
    outputs = dict(cfg.outputs)
    if args.out:
        stem = args.out[:-5] if args.out.endswith(".json") else args.out
        outputs = {"json": stem + ".json", "csv": stem + ".csv"}
    t0 = time.perf_counter()
    res = experiment.run_experiment(cfg, workers=args.workers or 1)
    log.info("%d trials in %.1f s, %d failures", res.total_trials, time.perf_counter() - t0, res.failures)
    if "json" in outputs:
        experiment.persist(res, outputs["json"])
        log.info("wrote %s", outputs["json"])
    else:
        print(_json(experiment.result_to_dict(res)))
    if "csv" in outputs:
        experiment.export_csv(res, outputs["csv"])
        log.info("wrote %s", outputs["csv"])
    if not res.valid:
        raise NumericalError(f"{res.failures} of {res.total_trials} trials failed; result marked invalid")


def _cmd_sweep(args):
    rows = experiment.phase_sweep(args.family, args.r, args.n, args.trials, args.seed or 0, args.workers or 1)
    doc = [{"family": r.family, "r": r.r, "n": r.n, "trials": r.trials, "phase": r.phase,
            "mean_count": r.mean_count, "stderr": r.stderr, "ratio": r.ratio, "frac_one": r.frac_one,
            "degenerate_rate": r.degenerate_rate, "passed": r.passed, "rule": r.rule} for r in rows]
    _emit(args, _json(doc))


def _parse_z(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ValidationError(f"cannot parse point {text!r}") from None


def _cmd_analyze(args):
    spec = ensembles.EnsembleSpec(args.family, args.r, 1)
    out = []
    for s in args.z:
        z = _parse_z(s)
        f = potential.cauchy_transform(z, spec)
        row = {"z": [z.real, z.imag], "U": potential.potential(z, spec), "cauchy": [f.real, f.imag]}
        if spec.r == 1.0 and abs(z) <= 1.0:
            row["sigma2"] = potential.sigma2(z, spec)
            row["F_p"] = {str(p): potential.moment_F_p(z, p, spec) for p in args.p}
        out.append(row)
    _emit(args, _json(out))


def _cmd_render(args):
    poly = _read_roots(args.roots)
    cs = render.extract_contours(poly, args.resolution)
    ov = render.Overlays(None if args.no_roots else poly.roots,
                         cs.critical_points if args.critical else None, args.reference)
    doc = render.svg_document(cs, ov, args.size)
    if cs.near_degenerate:
        log.warning("contour passes close to a critical point; topology may be resolution dependent")
    _emit(args, doc)


def selftest(instances: int = 100, seed: int = 2024) -> dict:
    """Small-degree oracle agreement and a few closed-form identities."""
    checks = {}
    bad_count = bad_crit = 0
    worst = 0.0
    for k in range(instances):
        fam = "disk" if k % 2 else "circle"
        n = 2 + k % 11
        poly = ensembles.sample_polynomial(ensembles.EnsembleSpec(fam, 1.0, n), ensembles.SeedPolicy(seed, k))
        cps = solve_critical_points(poly)
        d = hausdorff_multiset(cps.points, oracle_critical_points(poly).points)
        worst = max(worst, d)
        bad_crit += d >= 1e-7
        ex = topology.count_components_exact(poly, cps)
        gr = topology.count_components_grid(poly)
        bad_count += ex.count != gr.count and not (ex.degenerate or gr.degenerate)
    checks["solver_vs_oracle"] = {"passed": bad_crit == 0, "worst_distance": worst}
    checks["exact_vs_grid"] = {"passed": bad_count == 0, "unflagged_disagreements": int(bad_count)}
    m2 = max(abs(potential.circle_inverse_square_moment(t) - 1 / (1 - t * t)) for t in (0.3, 0.6, 0.9))
    checks["circle_inverse_square"] = {"passed": m2 < 1e-8, "max_error": m2}
    im = potential.inverse_moment(0.0, 1.0)
    checks["inverse_moment_origin"] = {"passed": abs(im - 2.0) < 1e-8, "value": im}
    f1 = potential.moment_F_p(0.0, 1, "disk")
    checks["disk_log_moment_origin"] = {"passed": abs(f1 - 0.5) < 1e-8, "value": f1}
    return checks


def _cmd_selftest(args):
    checks = selftest(args.instances, args.seed if args.seed is not None else 2024)
    ok = all(c["passed"] for c in checks.values())
    for name, c in checks.items():
        log.info("%s %s", "PASS" if c["passed"] else "FAIL", name)
    _emit(args, _json({"passed": ok, "checks": checks}))
    return 0 if ok else 2


_COMMANDS = {
    "sample": _cmd_sample,
    "critical": _cmd_critical,
    "count": _cmd_count,
    "certify": _cmd_certify,
    "experiment": _cmd_experiment,
    "sweep": _cmd_sweep,
    "analyze": _cmd_analyze,
    "render": _cmd_render,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="lemlab: %(message)s",
                        stream=sys.stderr, force=True)
    try:
        rc = _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"lemlab: invalid input: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"lemlab: numerical failure: {exc}", file=sys.stderr)
        return 2
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
