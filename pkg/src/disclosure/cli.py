"""Command-line entry point: ``disclosure {simulate,attack,theory,experiment}``."""

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import formats
from .attacks import AttackKind, SingularSystemError, lsda, run_attack
from .core import MixConfig, ValidationError, clamp_and_normalize, validate
from .harness import SpecError, load_spec, run_experiment
from .metrics import EmptyReportError, mse_summary
from .theory import UndefinedPrediction, theory_report
from .traffic import ring_profiles, simulate, skewed_frequencies

log = logging.getLogger("disclosure")


def _add_population(p):
    p.add_argument("--users", "-N", type=int, default=100, help="population size")
    p.add_argument("--threshold", "-t", type=int, default=10, help="messages per round")
    p.add_argument("--rounds", type=int, default=20000, help="rounds observed")
    p.add_argument("--friends", "-M", type=int, default=10, help="friends per user on the ring")
    p.add_argument("--skew", type=float, default=0.0, help="sender-frequency skew (0 = uniform)")
    p.add_argument("--no-self-send", dest="self_send", action="store_false",
                   help="ring friends start at the next user instead of the sender")
    p.add_argument("--profiles", help="CSV/JSON profile matrix instead of the ring")


def _ground_truth(args):
    freqs = skewed_frequencies(args.users, args.skew)
    if args.profiles:
        profiles = formats.load_profiles(args.profiles)
    else:
        profiles = ring_profiles(args.users, args.friends, self_send=args.self_send)
    problems = validate(None, freqs, profiles)
    if problems:
        raise ValidationError(problems)
    return freqs, profiles


def _emit(text, out):
    if out:
        formats.write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    config = MixConfig(args.users, args.threshold, args.rounds, args.seed)
    freqs, profiles = _ground_truth(args)
    obs = simulate(config, freqs, profiles)
    _emit(formats.dumps_observations(obs, args.format, seed=args.seed), args.out)
    if args.truth_out:
        formats.save_profiles(profiles, args.truth_out)
    return 0


def cmd_attack(args):
    obs, meta = formats.load_observations(args.trace, args.trace_format)
    kind = AttackKind.parse(args.kind)
    if kind is AttackKind.LSDA:
        res = lsda(obs, min_norm=args.min_norm)
        est = res.profiles
        log.info("lsda: rank %d, condition number %.4g", res.rank, res.condition_number)
    else:
        est = run_attack(kind, obs)
    if args.clamp:
        est = clamp_and_normalize(est)
    if est.undefined_users:
        log.warning("%s: no estimate for users %s", kind.value, sorted(est.undefined_users))
    _emit(formats.dumps_estimate(est, args.format, seed=meta.get("seed")), args.out)
    if args.truth:
        report = mse_summary(formats.load_profiles(args.truth), est)
        print(f"average_mse={report.average!r} n_defined={report.n_defined}", file=sys.stderr)
    return 0


def cmd_theory(args):
    freqs, profiles = _ground_truth(args)
    rep = theory_report(profiles, freqs, args.threshold, args.rounds)
    if args.format == "json":
        _emit(json.dumps(rep.to_dict(), indent=2) + "\n", args.out)
    else:
        lines = ["user,mse_lsda,mse_sda2,uniformity,background_uniformity"]
        cols = (rep.per_user_mse_lsda, rep.per_user_mse_sda2, rep.uniformities, rep.background_uniformities)
        for i in range(freqs.n_users):
            fields = [repr(float(c[i])) if np.isfinite(c[i]) else "" for c in cols]
            lines.append(",".join([str(i), *fields]))
        body = "\n".join(lines) + "\n"
        if args.out:
            formats.write_text(args.out, body)
        else:
            print(f"average_mse_lsda={rep.average('lsda')!r}")
            print(f"average_mse_sda2={rep.average('sda2')!r}")
    return 0


def cmd_experiment(args):
    spec = load_spec(args.spec)
    changes = {}
    if args.out:
        changes["output"] = args.out
    if args.seed is not None:
        changes["base"] = replace(spec.base, seed=args.seed)
    if changes:
        spec = replace(spec, **changes)
    result = run_experiment(spec, jobs=args.jobs)
    for cell in result.cells:
        box = cell["box"]
        mean = "n/a" if box is None else f"{box['mean']:.6g}"
        print(f"{cell['attack']:>5} {spec.sweep}={cell['value']}: mean={mean} "
              f"theory_lsda={cell['theory']['lsda']:.6g} theory_sda2={cell['theory']['sda2']:.6g}")
    if result.failures:
        print(f"{len(result.failures)} failure records; see the JSON summary", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="disclosure", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a threshold mix and emit the trace")
    _add_population(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--truth-out", help="also write the true profile matrix here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="run one attack on a trace file")
    p.add_argument("trace")
    p.add_argument("--kind", required=True, choices=[k.value for k in AttackKind])
    p.add_argument("--trace-format", choices=("csv", "json"))
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--truth", help="true profile matrix; prints the average MSE")
    p.add_argument("--min-norm", action="store_true", help="LSDA: minimum-norm solution if singular")
    p.add_argument("--clamp", action="store_true", help="clip estimates to [0,1] and renormalize")
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("theory", help="print the asymptotic MSE predictions")
    _add_population(p)
    p.add_argument("--out", help="write per-user predictions here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("experiment", help="run an experiment file")
    p.add_argument("spec")
    p.add_argument("--out", help="CSV output path (JSON summary goes alongside)")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, formats.FormatError, SpecError, SingularSystemError,
            EmptyReportError, UndefinedPrediction, ValueError) as exc:
        print(f"disclosure {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
