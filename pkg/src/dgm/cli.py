"""``dgm`` command line.

Exit codes: 0 success, 1 usage or other error, 2 certificate invalid or
replay mismatch, 3 missing artifact or unresolvable hash, 4 budget exceeded.
"""
import argparse
import json
import sys
from pathlib import Path

from . import textio
from .errors import DGMError, MissingArtifactError, UnresolvableHashError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_MISSING, EXIT_BUDGET = 0, 1, 2, 3, 4


def _common(p, out_required=False):
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--domain", choices=("circuit", "pipeline"), help="design domain")
    p.add_argument("--out", required=out_required, help="run directory")
    p.add_argument("--rules", help="rule set file overriding the configuration's")


def build_parser():
    parser = argparse.ArgumentParser(prog="dgm", description="Certified self-improving design search.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run episodes and the propose-certify-switch loop")
    _common(run, out_required=True)
    run.add_argument("--switch-limit", type=int, help="maximum number of switches")
    run.add_argument("--quiet", action="store_true")

    cert = sub.add_parser("certify", help="certify a proposal against its basis snapshot")
    _common(cert, out_required=True)
    cert.add_argument("--proposal", required=True, help="proposal file")
    cert.add_argument("--models", help="model set file (default: the configuration's)")
    cert.add_argument("--mode", choices=("all-models", "weighted-mean"))

    check = sub.add_parser("check", help="re-verify a certificate from stored artifacts")
    _common(check)
    check.add_argument("--certificate", required=True, help="certificate file")
    check.add_argument("--store", help="artifact store (default: <out>/store or next to the certificate)")

    rep = sub.add_parser("replay", help="rebuild and re-execute a run from its artifacts")
    _common(rep)
    rep.add_argument("--trace", help="trace file (default: <out>/trace.jsonl)")
    rep.add_argument("--shallow", action="store_true", help="only rebuild the report from the trace")

    orc = sub.add_parser("oracle", help="run a brute-force oracle")
    _common(orc)
    orc.add_argument("kind", choices=("enumerate", "truth-table", "equivalence", "reward"))
    orc.add_argument("--bound", type=int, default=2, help="node bound for enumerate")
    orc.add_argument("--concept", help="concept file for truth-table and reward")
    orc.add_argument("--horizon", type=int, default=4, help="horizon for equivalence")
    return parser


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _store_for(args, near=None):
    if getattr(args, "store", None):
        return textio.Store(args.store)
    if args.out:
        return textio.Store(Path(args.out) / "store")
    if near is not None:
        p = Path(near).resolve().parent
        return textio.Store(p.parent if p.name == "certificates" else p / "store")
    raise UsageError("give --store or --out")


def cmd_run(args):
    from .runner import RunConfig, execute

    cfg = RunConfig.load(args.config, args.domain, args.seed, args.rules, args.switch_limit)
    log = None if args.quiet else (lambda m: print(m, file=sys.stderr))
    report = execute(cfg, args.out, log)
    _emit({"out": str(args.out), "episodes": len(report["episodes"]),
           "switches": len(report["switches"]),
           "certified_min_utilities": report["certified_min_utilities"]})
    return EXIT_OK


def cmd_certify(args):
    from .environment import ModelSet
    from .explore import MachineState
    from .runner import RunConfig
    from .transform import Certifier, RewriteProposal

    path = Path(args.proposal)
    if not path.exists():
        raise MissingArtifactError(f"proposal {path} not found")
    store = _store_for(args)
    p = RewriteProposal.from_obj(textio.read(path))
    if args.models:
        models = ModelSet.load(args.models)
    else:
        models = RunConfig.load(args.config, args.domain, args.seed, args.rules).model_set()
    basis = MachineState.from_obj(store.get("snapshots", p.basis))
    cert = Certifier(models, store).certify(p, basis, args.mode)
    h = store.put("certificates", cert.to_obj())
    _emit({"certificate": str(store.root / "certificates" / f"{h}.json"), **cert.to_obj()})
    return EXIT_OK if cert.conclusion else EXIT_INVALID


def cmd_check(args):
    from .transform import check_certificate

    path = Path(args.certificate)
    if not path.exists():
        raise MissingArtifactError(f"certificate {path} not found")
    ok = check_certificate(textio.read(path), _store_for(args, near=path))
    _emit({"certificate": str(path), "valid": ok})
    return EXIT_OK if ok else EXIT_INVALID


def cmd_replay(args):
    from .runner import replay

    if args.trace:
        out = Path(args.trace).parent
    elif args.out:
        out = Path(args.out)
    else:
        raise UsageError("give --out or --trace")
    report = replay(out, deep=not args.shallow)
    _emit({"out": str(out), "replayed": True, "switches": len(report["switches"])})
    return EXIT_OK


def cmd_oracle(args):
    from . import oracles
    from .environment import ModelSet
    from .language import Concept, RuleSet, canonical_form, interpret
    from .runner import RunConfig, data_dir

    cfg = RunConfig.load(args.config, args.domain, args.seed, args.rules)
    if args.kind == "enumerate":
        rules = RuleSet.load(cfg.rules)
        engine = len(interpret(rules, args.bound))
        brute = len(oracles.enumerate_concepts(rules, args.bound))
        _emit({"bound": args.bound, "interpret": engine, "oracle": brute, "match": engine == brute})
        return EXIT_OK if engine == brute else EXIT_INVALID
    if cfg.domain != "circuit":
        raise UsageError(f"oracle {args.kind} is defined for the circuit domain")
    concept_path = Path(args.concept) if args.concept else data_dir("circuit") / "half_adder.json"
    if not concept_path.exists():
        raise MissingArtifactError(f"concept {concept_path} not found")
    c = Concept.from_obj(textio.read(concept_path))
    if args.kind == "truth-table":
        rows = [{"A": a, "B": b, **outs} for a, b, outs in oracles.truth_table(c)]
        _emit({"concept": canonical_form(c).digest, "rows": rows})
        return EXIT_OK
    if args.kind == "reward":
        models = ModelSet.load(cfg.models)
        out = []
        for m in models:
            brute = oracles.circuit_reward(c, m.requirements, m.params.get("cost_weight", 0.0), m.partial_credit)
            out.append({"model": m.id, "oracle": brute, "engine": m.reward(c), "match": brute == m.reward(c)})
        _emit({"rewards": out})
        return EXIT_OK if all(r["match"] for r in out) else EXIT_INVALID
    from .library import and_gate, nand, not_as_nand, tie
    from .machines import connect, equivalent

    h = args.horizon
    left, right = connect(nand(h), not_as_nand(h), tie()), and_gate(h)
    engine, brute = equivalent(left, right, h), oracles.brute_equivalent(left, right, h)
    _emit({"left": "NAND then NAND(x, x)", "right": "AND", "horizon": h,
           "engine": engine, "oracle": brute, "match": engine == brute})
    return EXIT_OK if engine == brute else EXIT_INVALID


COMMANDS = {"run": cmd_run, "certify": cmd_certify, "check": cmd_check, "replay": cmd_replay,
            "oracle": cmd_oracle}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UnresolvableHashError as exc:
        print(f"dgm: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except DGMError as exc:
        print(f"dgm: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"dgm: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
