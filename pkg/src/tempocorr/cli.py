"""Command-line front end: ``tempocorr {simulate,certify,bound,dc,clock,reproduce}``.

Exit codes: 0 success (including rejected verdicts), 2 input error,
3 numerical failure, 4 size guard. Errors go to stderr as JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import AotViolationError, NumericalError, SizeGuardError
from .quantum import InvariantError

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_SIZE = 0, 2, 3, 4


class InputError(ValueError):
    """Bad command-line arguments."""


def _out(args, doc: dict, human: list[str]) -> None:
    if args.json:
        sys.stdout.write(io.dumps(doc))
    else:
        sys.stdout.write("\n".join(human) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# ---------------------------------------------------------------------- schedule


def parse_schedule(spec: str | None, model) -> list[tuple[str, ...]]:
    """Comma-separated setting words (``110,011``), ``lgi:N`` for the chain pairs, ``all:N``, or empty."""
    from .expressions import lgi_n
    from .models import full_schedule

    if spec is None or spec.strip() == "":
        return []
    spec = spec.strip()
    if spec.startswith("lgi:"):
        return lgi_n(int(spec[4:])).sequences()
    if spec.startswith("all:"):
        settings = tuple(s for s in model.settings)
        return full_schedule(int(spec[4:]), settings)
    out = []
    for w in spec.split(","):
        w = w.strip()
        if "." in w:
            out.append(tuple(w.split(".")))
        else:
            out.append(tuple(w))
    return out


# ---------------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    from .quantum import behavior_from_model

    model = io.model_from_json(io.load_json(args.model))
    schedule = parse_schedule(args.schedule, model)
    b = behavior_from_model(model, schedule)
    doc = io.behavior_to_json(b)
    if args.output:
        Path(args.output).write_text(io.dumps(doc))
        _out(args, io.report("simulate", {"output": args.output, "sequences": len(b)}),
             [f"wrote {len(b)} sequences to {args.output}"])
    else:
        sys.stdout.write(io.dumps(doc))
    return EXIT_OK


def _known_expressions(b):
    from .expressions import lgi_n, lgi_stationary

    if b.scenario.idle is None or b.scenario.outcome_values is None:
        return []
    out = []
    for e in [lgi_n(n) for n in range(3, 9)] + [lgi_stationary(-1), lgi_stationary(1)]:
        if e.scenario.length == b.scenario.length and all(s in b for s in e.sequences()):
            out.append(e)
    return out


def certify_behavior(b, tol: float) -> dict:
    from .behavior import check_aot, check_nsit
    from .expressions import evaluate
    from .macrorealism import is_macrorealist

    aot = check_aot(b, tol)
    nsit = check_nsit(b, tol)
    result: dict = {
        "aot": {"pass": aot.ok, "max_deviation": aot.max_deviation,
                "violations": [{"first": list(d.first), "second": list(d.second), "prefix": d.prefix, "deviation": d.deviation}
                               for d in aot.violations],
                "untestable": [{"prefix": list(p), "setting": x} for p, x in aot.untestable]},
        "nsit": {"pass": nsit.ok, "by_position": {str(k): v for k, v in sorted(nsit.by_position().items())},
                 "untestable": [{"settings": list(s), "position": i} for s, i in nsit.untestable]},
    }
    try:
        mr = is_macrorealist(b, max(tol, 1e-7))
        entry = {"applicable": True, "accepted": mr.accepted, "residual": mr.residual}
        if mr.certificate is not None:
            c = mr.certificate
            entry["certificate"] = {"bound": c.bound, "value": c.value, "gap": c.gap,
                                    "terms": [{"settings": list(s), "outcomes": list(q), "coefficient": v}
                                              for (s, q), v in sorted(c.coefficients.items())]}
        result["macrorealism"] = entry
    except AotViolationError as exc:
        result["macrorealism"] = {"applicable": False, "reason": str(exc)}
    exprs = {}
    for e in _known_expressions(b):
        v = evaluate(e, b)
        exprs[e.name] = {"value": v, "classical_bound": e.classical_bound, "sense": e.sense, "violated": e.is_violated(v)}
    result["expressions"] = exprs
    return result


def cmd_certify(args) -> int:
    b = io.behavior_from_json(io.load_json(args.behavior))
    res = certify_behavior(b, args.tol)
    human = [
        f"AoT: {'pass' if res['aot']['pass'] else 'FAIL'} (max deviation {_fmt(res['aot']['max_deviation'])}, "
        f"{len(res['aot']['untestable'])} untestable)",
        f"NSIT: {'pass' if res['nsit']['pass'] else 'FAIL'} "
        + ", ".join(f"pos {k}: {_fmt(v)}" for k, v in res["nsit"]["by_position"].items())
        + f" ({len(res['nsit']['untestable'])} untestable)",
    ]
    mr = res["macrorealism"]
    if not mr["applicable"]:
        human.append(f"MR: not applicable ({mr['reason']})")
    elif mr["accepted"]:
        human.append(f"MR: accepted (residual {_fmt(mr['residual'])})")
    else:
        c = mr["certificate"]
        human.append(f"MR: rejected; certificate value {_fmt(c['value'])} exceeds bound {_fmt(c['bound'])} by {_fmt(c['gap'])}")
        for t in c["terms"]:
            human.append(f"  {t['coefficient']:+.6g} p({''.join(t['outcomes'])}|{''.join(t['settings'])})")
    for name, e in res["expressions"].items():
        human.append(f"{name}: {_fmt(e['value'])} (classical bound {_fmt(e['classical_bound'])}{', VIOLATED' if e['violated'] else ''})")
    _out(args, io.report("certify", res), human)
    return EXIT_OK


def _load_expression(ref: str):
    from .expressions import builtin

    p = Path(ref)
    if p.exists() or ref.endswith(".json"):
        return io.expression_from_json(io.load_json(ref))
    return builtin(ref)


def cmd_bound(args) -> int:
    from .automata import OptimizerConfig, max_expression_classical, max_expression_deterministic
    from .macrorealism import classical_bound
    from .momentmatrix import build_moment_matrix, max_expression_projective, to_sdpa
    from .seesaw import SeesawConfig, max_expression_quantum_seesaw

    expr = _load_expression(args.expression)
    start = time.perf_counter()
    cls = args.model_class
    if cls in ("classical-d", "quantum-d") and args.dim is None:
        raise InputError(f"--class {cls} requires --dim")
    if args.export_sdpa and cls != "qproj":
        raise InputError("--export-sdpa only applies to --class qproj")
    extra: dict = {}
    if cls in ("mr", "aot"):
        r = classical_bound(expr, "macrorealist" if cls == "mr" else "aot")
        value, method, certified = r.value, "enumeration", True
    elif cls == "qproj":
        level = args.length
        r = max_expression_projective(expr, level=level)
        value, method, certified = r.value, "sdp", False
        extra = {"level": r.moments.level, "matrix_size": r.moments.size, "free_variables": r.moments.n_free}
        if args.export_sdpa:
            Path(args.export_sdpa).write_text(to_sdpa(expr, build_moment_matrix(expr.scenario, r.moments.level)))
            extra["sdpa"] = args.export_sdpa
    elif cls == "classical-d":
        if args.deterministic:
            r = max_expression_deterministic(expr, args.dim)
        else:
            r = max_expression_classical(expr, args.dim, OptimizerConfig(restarts=args.restarts, seed=args.seed))
        value, method, certified = r.value, r.method, r.certified
    else:
        r = max_expression_quantum_seesaw(expr, args.dim, SeesawConfig(restarts=args.restarts, seed=args.seed, rank=args.rank))
        value, method, certified = r.value, r.method, r.certified
    runtime = time.perf_counter() - start
    res = {"expression": expr.name, "class": cls, "value": value, "method": method, "certified": certified,
           "lower_bound_only": cls in ("classical-d", "quantum-d") and not certified,
           "seed": args.seed, "dim": args.dim, "runtime_s": runtime, **extra}
    kind = "lower bound" if res["lower_bound_only"] else ("exact" if certified else "upper bound")
    _out(args, io.report("bound", res), [f"{expr.name} [{cls}]: {_fmt(value)} ({method}, {kind}, {runtime:.2f} s)"])
    return EXIT_OK


def cmd_dc(args) -> int:
    from .automata import deterministic_complexity

    seq = args.sequence.strip()
    if not seq:
        raise InputError("sequence must be nonempty")
    r = deterministic_complexity(seq)
    res = {"sequence": seq, "dc": r.value, "transient": r.transient, "period": r.period, "certified": r.certified,
           "machine": io.machine_to_json(r.machine)}
    _out(args, io.report("dc", res),
         [f"DC({seq}) = {r.value} (transient {r.transient}, period {r.period}"
          f"{', minimality certified' if r.certified else ''})"])
    return EXIT_OK


def cmd_clock(args) -> int:
    from .automata import DeterministicClock, clock_accuracy, machine_tick_distribution

    m = io.machine_from_json(io.load_json(args.machine))
    dist = machine_tick_distribution(m, args.tmax)
    acc = clock_accuracy(dist, args.max_tail)
    res = {"tmax": args.tmax, "p": dist.p.tolist(), "tail": dist.tail, "mean": dist.mean, "variance": dist.variance}
    if isinstance(acc, DeterministicClock):
        res["deterministic_clock"] = True
        res["accuracy"] = None
        last = f"deterministic clock (period {_fmt(acc.period)}); accuracy undefined"
    else:
        res["deterministic_clock"] = False
        res["accuracy"] = acc.accuracy
        last = f"R = {_fmt(acc.accuracy)}"
    human = [f"{t:>4d}  {p:.6g}" for t, p in zip(dist.times, dist.p) if p > 0]
    human += [f"mean = {_fmt(dist.mean)}, variance = {_fmt(dist.variance)}, tail = {dist.tail:.3e}", last]
    _out(args, io.report("clock", res), human)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .reproduce import run_all

    results = run_all(quick=args.quick)
    lines = []
    for r in results:
        lines.append(f"=== {r['name']}")
        lines.append(f"value: {r['value']}")
        lines.append(f"target: {r['target']}")
        lines.append(f"status: {'PASS' if r['pass'] else 'FAIL'}")
    doc = io.report("reproduce", {"results": results})
    if args.output:
        Path(args.output).write_text(io.dumps(doc))
    _out(args, doc, lines)
    return EXIT_OK


# -------------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tempocorr", description="Temporal correlation bounds and certificates.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable report on stdout")
        return sp

    s = common(sub.add_parser("simulate", help="tabulate a model's behavior over a schedule"))
    s.add_argument("model", help="model file (bundled names are found automatically)")
    s.add_argument("--schedule", default="", help="e.g. '110,011,101', 'lgi:3' or 'all:3'")
    s.add_argument("-o", "--output", help="write the behavior file here instead of stdout")
    s.set_defaults(func=cmd_simulate)

    s = common(sub.add_parser("certify", help="AoT, NSIT, macrorealism and witnesses for a behavior"))
    s.add_argument("behavior")
    s.add_argument("--tol", type=float, default=1e-7)
    s.set_defaults(func=cmd_certify)

    s = common(sub.add_parser("bound", help="bound a linear expression over a model class"))
    s.add_argument("expression", help="expression file or built-in name (lgi3, lgi_5, single_bit_witness, ...)")
    s.add_argument("--class", dest="model_class", required=True, choices=["mr", "aot", "qproj", "classical-d", "quantum-d"])
    s.add_argument("--dim", type=int)
    s.add_argument("--length", type=int, help="moment-matrix word length (default: longest sequence)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=20)
    s.add_argument("--rank", type=int, default=1, help="Kraus operators per outcome in the see-saw")
    s.add_argument("--deterministic", action="store_true", help="exhaustive search over deterministic machines")
    s.add_argument("--export-sdpa", help="write the moment-matrix SDP in SDPA sparse format")
    s.set_defaults(func=cmd_bound)

    s = common(sub.add_parser("dc", help="deterministic complexity of an output sequence"))
    s.add_argument("sequence")
    s.set_defaults(func=cmd_dc)

    s = common(sub.add_parser("clock", help="tick distribution and accuracy of a machine"))
    s.add_argument("machine")
    s.add_argument("--tmax", type=int, default=64)
    s.add_argument("--max-tail", type=float, default=1e-9)
    s.set_defaults(func=cmd_clock)

    s = common(sub.add_parser("reproduce", help="recompute every bundled reference number"))
    s.add_argument("--quick", action="store_true", help="fewer restarts")
    s.add_argument("-o", "--output", help="also write the JSON report here")
    s.set_defaults(func=cmd_reproduce)
    return p


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    try:
        return args.func(args)
    except SizeGuardError as exc:
        return _fail(EXIT_SIZE, exc)
    except (NumericalError, InvariantError) as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except np.linalg.LinAlgError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except (ValueError, KeyError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INPUT, exc)


if __name__ == "__main__":
    raise SystemExit(main())
