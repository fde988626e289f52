"""Command-line entry point: ``stablerec {certify,sweep,probe,examples}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .certify import CertifyConfig, diagnose
from .errors import InvalidInputError
from .fixtures import GOLDEN
from .harness import SweepConfig, emit_plot, load_instance, run_sweep
from .solvers import SolverConfig, adversarial_sequence, stability_probe

# expected classification and certificate value for each bundled example
EXPECTED = {
    "nonsharp_stable": ("strong_nonsharp_stable", 0.0),
    "strong_unstable": ("strong_nonsharp_uncertified", 1.0),
    "four_group_stable": ("strong_nonsharp_stable", 1.0),
    "four_group_sharp": ("sharp", 0.5),
}


def _certify_config(args) -> CertifyConfig:
    return CertifyConfig(solver=SolverConfig(kkt_tol=args.kkt_tol, seed=args.seed),
                         theta=args.theta, seed=args.seed)


def cmd_certify(args) -> int:
    inst = load_instance(args.instance)
    cfg = _certify_config(args)
    cfg.probe = args.probe
    print(json.dumps(diagnose(inst, cfg).to_json(), indent=2))
    return 0


def cmd_sweep(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        doc["seed"] = args.seed
    doc.setdefault("kkt_tol", args.kkt_tol)
    doc.setdefault("theta", args.theta)
    cfg = SweepConfig.from_json(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    def report(rec):
        print(f"m={rec.m:4d} recovered={rec.recovered}/{rec.trials} sharp={rec.sharp} "
              f"strong_nonsharp={rec.strong_nonsharp} "
              f"certified={rec.stable_certified_nonsharp} failed={rec.failed} "
              f"[{time.perf_counter() - t0:.0f}s]", flush=True)

    records = run_sweep(cfg, out / "sweep.csv", threads=args.threads, timings=args.timings,
                        progress=report)
    emit_plot(records, out / "sweep.svg")
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep.svg'}")
    return 0


def cmd_probe(args) -> int:
    inst = load_instance(args.instance)
    deltas = [float(t) for t in args.deltas.split(",") if t.strip()]
    res = stability_probe(inst, args.c, deltas, args.dirs, args.seed,
                          SolverConfig(kkt_tol=args.kkt_tol, seed=args.seed))
    print(f"{'delta':>10} {'mu':>10} {'max ratio':>12}")
    for delta, ratio in sorted(res.max_by_delta().items(), reverse=True):
        print(f"{delta:10.3g} {args.c * delta:10.3g} {ratio:12.6g}")
    print(f"max_ratio = {res.max_ratio:.6g}  unconverged rows = {res.failures}")
    return 0


def cmd_examples(args) -> int:
    cfg = _certify_config(args)
    ok_all = True
    print(f"{'example':<20} {'classification':<30} {'rho':>8}  result")
    for name, factory in GOLDEN.items():
        d = diagnose(factory(), cfg)
        want_cls, want_rho = EXPECTED[name]
        rho = float("nan") if d.rho is None else d.rho
        ok = d.classification == want_cls and abs(rho - want_rho) <= 1e-6
        ok_all &= ok
        print(f"{name:<20} {d.classification:<30} {rho:8.5f}  {'PASS' if ok else 'FAIL'}")
    steps = adversarial_sequence(0.25, [1e-1, 1e-2, 1e-3, 1e-4])
    ratios = [s.ratio for s in steps]
    ok = (all(s.residual <= 1e-8 for s in steps) and ratios[-1] > 100
          and all(b > a for a, b in zip(ratios, ratios[1:])))
    ok_all &= ok
    print(f"{'unstable sequence':<20} {'ratios ' + ', '.join(f'{r:.1f}' for r in ratios):<30} "
          f"{'':>8}  {'PASS' if ok else 'FAIL'}")
    return 0 if ok_all else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--kkt-tol", type=float, default=1e-8)
    common.add_argument("--theta", type=float, default=0.99,
                        help="certificate norm above which an inactive group joins K")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="stablerec", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", parents=[common], help="diagnose one instance (JSON)")
    c.add_argument("instance")
    c.add_argument("--probe", action="store_true", help="also run the stability probe")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("sweep", parents=[common], help="phase-transition sweep")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--timings", action="store_true",
                   help="fill the timing columns (makes the CSV run-dependent)")
    s.set_defaults(func=cmd_sweep, seed=None)

    pr = sub.add_parser("probe", parents=[common], help="empirical stability probe")
    pr.add_argument("instance")
    pr.add_argument("--c", type=float, default=1.0)
    pr.add_argument("--deltas", default="1e-1,1e-2,1e-3,1e-4")
    pr.add_argument("--dirs", type=int, default=20)
    pr.set_defaults(func=cmd_probe)

    e = sub.add_parser("examples", parents=[common], help="run the bundled analytic examples")
    e.set_defaults(func=cmd_examples)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (InvalidInputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
