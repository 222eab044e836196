"""Command-line entry point.

Machine-readable JSON goes to stdout, a one-line human summary to stderr.
Exit codes: 0 yes, 1 no, 2 unknown (or no within bounds), 3 usage or
parse error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor

from .protocol import (
    RECV, SEND, ParseError, Protocol, Transition, check_single_wait_only,
    check_wait_only, classify, parse_protocol, serialize_protocol,
)
from .semantics import (
    FORMAT, Lasso, Semantics, StepError, Trace, Validation, validate_lasso, validate_trace,
)

EXIT_YES, EXIT_NO, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _protocol(path: str) -> Protocol:
    return parse_protocol(_read(path))


def parse_transition(text: str) -> Transition:
    """``"src !!m dst"`` or ``"src ?m dst"`` (commas also accepted)."""
    toks = text.replace(",", " ").replace("(", " ").replace(")", " ").split()
    if len(toks) != 3:
        raise UsageError(f"transition must look like 'src !!msg dst', got {text!r}")
    src, op, dst = toks
    if op.startswith("!!") and len(op) > 2:
        return Transition(src, SEND, op[2:], dst)
    if op.startswith("?") and len(op) > 1:
        return Transition(src, RECV, op[1:], dst)
    raise UsageError(f"bad operation {op!r}; use !!msg or ?msg")


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("bounds must be positive")
    return v


def _nonnegative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 0:
        raise argparse.ArgumentTypeError("value must be nonnegative")
    return v


def _combine(answers: list) -> int:
    if any(a not in ("yes", "no") for a in answers):
        return EXIT_UNKNOWN
    return EXIT_YES if all(a == "yes" for a in answers) else EXIT_NO


# sub-queries; module level so that --jobs can ship them to worker processes

def _q_synchro(text, target, a):
    from .solvers import solve_synchro
    v = solve_synchro(parse_protocol(text), target, n_max=a["n_max"],
                      counter_cap=a["counter_cap"], step_cap=a["step_cap"],
                      max_configs=a["max_configs"])
    return dict(v.to_json(), target=target)


def _q_synchro_explicit(text, target, a):
    from .oracle import synchro_explicit
    r = synchro_explicit(parse_protocol(text), target, n_max=a["max_processes"],
                         max_depth=a["max_depth"], max_states=a["max_states"])
    return dict(_search_json(r), target=target)


def _q_repcover(text, t, a):
    from .solvers import solve_repcover
    v = solve_repcover(parse_protocol(text), t, n_max=a["n_max"], max_states=a["max_states"],
                       max_nodes=a["max_nodes"])
    return dict(v.to_json(), transition=t.to_json())


def _q_repcover_swo(text, t, a):
    from .solvers import solve_repcover_swo
    v = solve_repcover_swo(parse_protocol(text), t, witness_n=a["witness_n"])
    return dict(v.to_json(), transition=t.to_json())


def _q_repcover_explicit(text, t, a):
    from .oracle import repcover_explicit
    r = repcover_explicit(parse_protocol(text), t, n_max=a["max_processes"],
                          semantics=Semantics(a["semantics"]), max_states=a["max_states"])
    return dict(_search_json(r), transition=t.to_json())


def _search_json(r) -> dict:
    d = {"answer": "yes" if r.yes else "unknown", "method": "explicit",
         "bounds": dict(r.bounds)}
    if not r.yes:
        d["detail"] = r.answer
    if r.witness is not None:
        d["witness"] = r.witness.to_json()
        d["n"] = r.n
    return d


def _run_queries(fn, text, items, a, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, [text] * len(items), items, [a] * len(items)))
    return [fn(text, x, a) for x in items]


def _emit_results(results: list) -> int:
    if len(results) == 1:
        _out(results[0])
    else:
        _out({"format": FORMAT, "results": results})
    for r in results:
        what = r.get("target") or _tr_text(r.get("transition"))
        _say(f"{what}: {r['answer']} ({r['method']})")
    return _combine([r["answer"] for r in results])


def _tr_text(d) -> str:
    if d is None:
        return "?"
    op = "!!" if d["op"] == "send" else "?"
    return f"({d['src']},{op}{d['msg']},{d['dst']})"


def _out(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# commands

def cmd_check(a) -> int:
    p = _protocol(a.protocol)
    cls = classify(p)
    wo, bad = check_wait_only(p)
    swo, bad_swo = check_single_wait_only(p)
    _out({"format": FORMAT, "wait_only": wo, "violations": bad,
          "single_wait_only": swo, "single_wait_only_violations": bad_swo,
          "waiting": sorted(cls.waiting), "action": sorted(cls.action),
          "states": len(p.states), "transitions": len(p.transitions)})
    _say(f"{p.name}: {'Wait-Only' if wo else 'not Wait-Only'}"
         f"{', Single-Wait-Only' if swo else ''}")
    return EXIT_YES if wo else EXIT_NO


def _query_args(a) -> dict:
    return {k: v for k, v in vars(a).items() if k not in ("func", "protocol")}


def cmd_synchro(a) -> int:
    text = _read(a.protocol)
    parse_protocol(text)
    fn = _q_synchro_explicit if a.command == "synchro-explicit" else _q_synchro
    return _emit_results(_run_queries(fn, text, a.target, _query_args(a), a.jobs))


def cmd_repcover(a) -> int:
    text = _read(a.protocol)
    parse_protocol(text)
    ts = [parse_transition(t) for t in a.transition]
    fn = {"repcover": _q_repcover, "repcover-swo": _q_repcover_swo,
          "repcover-explicit": _q_repcover_explicit}[a.command]
    return _emit_results(_run_queries(fn, text, ts, _query_args(a), a.jobs))


def cmd_build_vass(a) -> int:
    from .summary import build_action_vass, build_smiley_vass, build_synchro_vass, location_name
    from .vass import serialize_vass
    p = _protocol(a.protocol)
    if a.variant == "smiley":
        if not a.transition:
            raise UsageError("--variant smiley needs --transition")
        con = build_smiley_vass(p, parse_transition(a.transition))
    else:
        if not a.target:
            raise UsageError(f"--variant {a.variant} needs --target")
        build = build_synchro_vass if a.variant == "synchro" else build_action_vass
        con = build(p, a.target)
    v = con.to_vass(a.limit)
    complete = a.limit is None or len(v.locations) < a.limit
    _out({"format": FORMAT, "variant": a.variant, "counters": list(v.counters),
          "locations": len(v.locations), "edges": len(v.transitions), "complete": complete,
          "vass": serialize_vass(v, loc_name=location_name)})
    _say(f"{a.variant} VASS: {len(v.counters)} counters, {len(v.locations)} locations, "
         f"{len(v.transitions)} edges{'' if complete else ' (truncated)'}")
    return EXIT_YES


def cmd_generate(a) -> int:
    from . import reductions as R
    from .vass import is_unit, parse_vass, split_unit
    rng = random.Random(a.seed)
    target = None
    if a.kind == "minsky":
        if not a.input:
            raise UsageError("generate minsky needs --input")
        p, q_f = R.gen_minsky_protocol(R.parse_minsky(_read(a.input)))
        target = {"target": q_f}
    elif a.kind == "vass":
        v = parse_vass(_read(a.input)) if a.input else R.random_vass(rng)
        final = a.final
        if final is None:
            raise UsageError("generate vass needs --final")
        if final not in v.locations:
            raise UsageError(f"unknown location {final!r}")
        if not is_unit(v):
            v = split_unit(v)
        p, q_f = R.gen_vass_protocol(v, final, dashed=a.dashed)
        target = {"target": q_f}
    else:
        fam = R.parse_dfas(_read(a.input)) if a.input else R.random_dfa_family(rng)
        if a.kind == "dfa-repcover":
            p, t_f = R.gen_dfa_repcover_protocol(fam)
            target = {"transition": t_f.to_json()}
        else:
            p, q_f = R.gen_dfa_swo_synchro_protocol(fam)
            target = {"target": q_f}
        nonempty, word = R.dfa_product_nonempty(fam)
        target["product_nonempty"] = nonempty
        if word is not None:
            target["word"] = "".join(word)
    text = serialize_protocol(p)
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    _out(dict({"format": FORMAT, "kind": a.kind, "protocol": text,
               "states": len(p.states), "transitions": len(p.transitions)}, **target))
    _say(f"generated {a.kind}: {len(p.states)} states, {len(p.transitions)} transitions")
    return EXIT_YES


def cmd_replay(a) -> int:
    p = _protocol(a.protocol)
    try:
        data = json.loads(_read(a.trace))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{a.trace}: invalid JSON: {exc}") from exc
    if "witness" in data:
        data = data["witness"]
    if data.get("format", FORMAT) != FORMAT:
        raise UsageError(f"unsupported format {data.get('format')!r}")
    sem = Semantics(a.semantics)
    try:
        if "cycle_start" in data:
            lasso = Lasso.from_json(p, data, sem)
            if a.transition:
                v = validate_lasso(p, lasso, parse_transition(a.transition), sem)
            else:
                v = validate_trace(p, lasso.trace, sem, grounded=True)
                if v and lasso.trace.configs[lasso.cycle_start] != lasso.trace.last:
                    v = Validation(False, lasso.cycle_start, "cycle does not close")
            steps = len(lasso.trace.steps)
        else:
            tr = Trace.from_json(p, data, sem)
            v = validate_trace(p, tr, sem, grounded=not a.ungrounded)
            steps = len(tr.steps)
    except (StepError, KeyError, ValueError, TypeError) as exc:
        _out({"format": FORMAT, "valid": False, "reason": str(exc)})
        _say(f"invalid witness: {exc}")
        return EXIT_NO
    res = {"format": FORMAT, "valid": bool(v), "steps": steps}
    if not v:
        res.update(step=v.index, reason=v.reason)
    _out(res)
    _say("witness replays" if v else f"invalid witness at step {v.index}: {v.reason}")
    return EXIT_YES if v else EXIT_NO


def cmd_bound(a) -> int:
    from .vass import big_to_str, run_length_bound, run_length_bound_log10
    value = big_to_str(run_length_bound(a.counters, a.locations))
    _out({"format": FORMAT, "counters": a.counters, "locations": a.locations,
          "bound": value, "log10": run_length_bound_log10(a.counters, a.locations)})
    _say(f"bound has {len(value)} decimal digits")
    return EXIT_YES


# parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="waitonly",
                                 description="Verification of Wait-Only broadcast protocols.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="Wait-Only / Single-Wait-Only report")
    c.add_argument("--protocol", required=True)
    c.set_defaults(func=cmd_check)

    def jobs(sp):
        sp.add_argument("--jobs", type=_positive, default=1,
                        help="worker processes for independent targets")

    c = sub.add_parser("synchro", help="synchronization through the summary VASS")
    c.add_argument("--protocol", required=True)
    c.add_argument("--target", required=True, nargs="+")
    c.add_argument("--n-max", type=_positive, default=6)
    c.add_argument("--counter-cap", type=_positive, default=None)
    c.add_argument("--step-cap", type=_positive, default=10_000)
    c.add_argument("--max-configs", type=_positive, default=100_000)
    jobs(c)
    c.set_defaults(func=cmd_synchro)

    c = sub.add_parser("synchro-explicit", help="bounded explicit-state synchronization")
    c.add_argument("--protocol", required=True)
    c.add_argument("--target", required=True, nargs="+")
    c.add_argument("--max-processes", type=_positive, default=4)
    c.add_argument("--max-depth", type=_positive, default=10_000)
    c.add_argument("--max-states", type=_positive, default=1_000_000)
    jobs(c)
    c.set_defaults(func=cmd_synchro)

    c = sub.add_parser("repcover", help="repeated coverability through the smiley VASS")
    c.add_argument("--protocol", required=True)
    c.add_argument("--transition", required=True, nargs="+", help="'src !!msg dst'")
    c.add_argument("--n-max", type=_positive, default=6)
    c.add_argument("--max-states", type=_positive, default=200_000)
    c.add_argument("--max-nodes", type=_positive, default=50_000)
    jobs(c)
    c.set_defaults(func=cmd_repcover)

    c = sub.add_parser("repcover-swo", help="repeated coverability for Single-Wait-Only")
    c.add_argument("--protocol", required=True)
    c.add_argument("--transition", required=True, nargs="+")
    c.add_argument("--witness-n", type=_nonnegative, default=0,
                   help="also search an explicit witness with this many processes")
    jobs(c)
    c.set_defaults(func=cmd_repcover)

    c = sub.add_parser("repcover-explicit", help="bounded explicit-state lasso search")
    c.add_argument("--protocol", required=True)
    c.add_argument("--transition", required=True, nargs="+")
    c.add_argument("--max-processes", type=_positive, default=4)
    c.add_argument("--max-states", type=_positive, default=1_000_000)
    c.add_argument("--semantics", choices=[s.value for s in Semantics], default="broadcast")
    jobs(c)
    c.set_defaults(func=cmd_repcover)

    c = sub.add_parser("build-vass", help="print a constructed VASS")
    c.add_argument("--protocol", required=True)
    c.add_argument("--variant", choices=["synchro", "action", "smiley"], default="synchro")
    c.add_argument("--target")
    c.add_argument("--transition")
    c.add_argument("--limit", type=_positive, default=None,
                   help="stop after this many locations")
    c.set_defaults(func=cmd_build_vass)

    c = sub.add_parser("generate", help="reduction gadgets")
    c.add_argument("kind", choices=["minsky", "vass", "dfa-repcover", "dfa-swo"])
    c.add_argument("--input", help="machine, VASS or DFA file; random instance if omitted")
    c.add_argument("--final", help="final location (vass)")
    c.add_argument("--dashed", action="store_true", help="add the dashed edge (vass)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--output", help="also write the protocol DSL here")
    c.set_defaults(func=cmd_generate)

    c = sub.add_parser("replay", help="validate a witness file")
    c.add_argument("--protocol", required=True)
    c.add_argument("--trace", required=True)
    c.add_argument("--semantics", choices=[s.value for s in Semantics], default="broadcast")
    c.add_argument("--transition", help="target transition for lasso witnesses")
    c.add_argument("--ungrounded", action="store_true",
                   help="do not require the run to start in the initial state")
    c.set_defaults(func=cmd_replay)

    c = sub.add_parser("bound", help="run length bound for mutual reachability")
    c.add_argument("--counters", type=_nonnegative, required=True)
    c.add_argument("--locations", type=_nonnegative, required=True)
    c.set_defaults(func=cmd_bound)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_YES
    try:
        return a.func(a)
    except (UsageError, ParseError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except ValueError as exc:
        # bad targets, non-Wait-Only inputs and the like
        _say(f"error: {exc}")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
