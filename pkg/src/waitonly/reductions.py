"""Hardness gadgets as protocol generators, with their ground-truth oracles.

Each generator returns the protocol together with its target (a state for
synchronization, a transition for repeated coverability).  The oracles
(`run_minsky`, `dfa_product_nonempty`, plain VASS search) answer the source
problem directly, so generated instances come labelled.
"""

from __future__ import annotations

import random
import re
from collections import deque
from dataclasses import dataclass, field
from itertools import product

from .protocol import ParseError, Protocol, Transition, check_single_wait_only, \
    check_wait_only, recv, send, tokenize_line
from .vass import Vass, VassError, is_unit

FROWN = "frown"

_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def _ident(tok: str, lineno: int, col: int) -> str:
    if not _NAME.match(tok):
        raise ParseError(f"bad identifier {tok!r}", lineno, col)
    return tok


# Two-counter machines

OPS = ("inc", "dec", "zero")
COUNTERS = ("x1", "x2")


@dataclass(frozen=True)
class MinskyMachine:
    states: frozenset
    initial: str
    final: str
    transitions: tuple  # (src, op, counter, dst)
    name: str = "machine"

    def __post_init__(self):
        if self.initial not in self.states or self.final not in self.states:
            raise ValueError("initial and final must be machine states")
        seen = {}
        for s, op, x, d in self.transitions:
            if op not in OPS or x not in COUNTERS:
                raise ValueError(f"bad operation {op} {x}")
            if s not in self.states or d not in self.states:
                raise ValueError(f"transition {s} -> {d} uses an unknown state")
            if s == self.final:
                raise ValueError("the final state must have no outgoing transition")
            seen.setdefault(s, []).append((op, x))
        # determinism: from a state, at most one transition is enabled in any
        # configuration (a zero test and a decrement of the same counter are
        # mutually exclusive)
        for s, ops in seen.items():
            if len(ops) == 1:
                continue
            if len(ops) == 2 and ops[0][1] == ops[1][1] and {ops[0][0], ops[1][0]} == {"dec", "zero"}:
                continue
            raise ValueError(f"machine is not deterministic at {s}")


@dataclass
class MinskyRun:
    status: str  # "halted", "stuck" or "running"
    config: tuple  # (state, x1, x2)
    steps: int
    max_sum: int
    trace: list = field(default_factory=list)


def run_minsky(m: MinskyMachine, step_cap: int = 10_000) -> MinskyRun:
    s, c = m.initial, {"x1": 0, "x2": 0}
    out = {}
    for t in m.transitions:
        out.setdefault(t[0], []).append(t)
    trace = [(s, 0, 0)]
    best = 0
    for k in range(step_cap + 1):
        if s == m.final:
            status = "halted"
            break
        fired = None
        for _, op, x, d in out.get(s, ()):
            if op == "inc":
                c[x] += 1
            elif op == "dec":
                if c[x] == 0:
                    continue
                c[x] -= 1
            elif c[x] != 0:
                continue
            fired = d
            break
        if fired is None:
            status = "stuck"
            break
        if k == step_cap:
            status = "running"
            break
        s = fired
        best = max(best, c["x1"] + c["x2"])
        trace.append((s, c["x1"], c["x2"]))
    return MinskyRun(status, (s, c["x1"], c["x2"]), len(trace) - 1, best, trace)


def parse_minsky(text: str) -> MinskyMachine:
    name = "machine"
    init = final = None
    trans = []
    states = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize_line(raw)
        if not toks:
            continue
        head, col = toks[0]
        args = [a for a, _ in toks[1:]]
        if head == "format":
            if args != ["1"]:
                raise ParseError("unsupported format version", lineno, col)
        elif head == "machine":
            if len(args) > 1:
                raise ParseError("expected: machine [name]", lineno, col)
            if args:
                name = _ident(args[0], lineno, toks[1][1])
        elif head in ("init", "final"):
            if len(args) != 1:
                raise ParseError(f"expected: {head} <state>", lineno, col)
            st = _ident(args[0], lineno, toks[1][1])
            states.add(st)
            if head == "init":
                init = st
            else:
                final = st
        elif head == "trans":
            if len(args) != 4 or args[1] not in OPS or args[2] not in COUNTERS:
                raise ParseError("expected: trans <s> inc|dec|zero x1|x2 <t>", lineno, col)
            s = _ident(args[0], lineno, toks[1][1])
            d = _ident(args[3], lineno, toks[4][1])
            states |= {s, d}
            trans.append((s, args[1], args[2], d))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, col)
    if init is None or final is None:
        raise ParseError("machine needs init and final")
    try:
        return MinskyMachine(frozenset(states), init, final, tuple(trans), name)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def serialize_minsky(m: MinskyMachine) -> str:
    lines = ["format 1", f"machine {m.name}", f"init {m.initial}", f"final {m.final}"]
    lines += [f"trans {s} {op} {x} {d}" for s, op, x, d in m.transitions]
    return "\n".join(lines) + "\n"


def _mstate(s: str) -> str:
    return "M_" + s


def gen_minsky_protocol(m: MinskyMachine) -> tuple[Protocol, str]:
    """Leader election, counter processes in zero/x1/x2, the machine block
    driven by receptions, and a final gather on ``d``."""
    ts = [
        send("q_in", "l", _mstate(m.initial)),
        recv("q_in", "l", "zero"),
        recv("zero", "d", _mstate(m.final)),
        send(_mstate(m.final), "d", _mstate(m.final)),
    ]
    for x in COUNTERS:
        ts += [
            send("zero", f"inc_{x}", x),
            send(x, f"dec_{x}", "zero"),
            recv(x, f"{x}_is_0", FROWN),
            recv(x, "d", FROWN),
        ]
    for s, op, x, d in m.transitions:
        if op == "zero":
            ts.append(send(_mstate(s), f"{x}_is_0", _mstate(d)))
        else:
            ts.append(recv(_mstate(s), f"{op}_{x}", _mstate(d)))
    for s in m.states:
        for x in COUNTERS:
            for op in ("inc", "dec"):
                ts.append(recv(_mstate(s), f"{op}_{x}", FROWN))
    p = Protocol.build(f"minsky_{m.name}", "q_in", ts,
                       states=[_mstate(s) for s in m.states] + [FROWN])
    return p, _mstate(m.final)


# VASS to protocol

def _loc(loc) -> str:
    return f"L_{loc}"


def gen_vass_protocol(v: Vass, l_f, dashed: bool = False) -> tuple[Protocol, str]:
    """Protocol whose synchronization on q_f encodes (l0,0) ->* (l_f,0).

    With ``dashed`` the policing edges into err and err' are dropped and
    (l_f, ?start, err) is added; q_f then is an action state and the question
    becomes coverability of l_f.
    """
    if not is_unit(v):
        raise VassError("gen_vass_protocol needs unit updates; split the VASS first")
    if l_f not in v.locations:
        raise VassError(f"unknown location {l_f!r}")
    names = {loc: _loc(loc) for loc in v.locations}
    for nm in names.values():
        if not _NAME.match(nm):
            raise VassError(f"location name {nm!r} is not usable as a state")
    ts = [
        send("q_in", "start", names[v.initial]),
        send("q_in", "dollar", "q1"),
        recv("q1", "start", "zero"),
        send("zero", "end", "z_end"),
        recv("z_end", "verif", "q_f"),
        recv(names[l_f], "end", "lf_prime"),
        send("lf_prime", "verif", "q_f"),
    ]
    for x in v.counters:
        ts += [send("zero", f"inc_{x}", f"unit_{x}"), send(f"unit_{x}", f"dec_{x}", "zero")]
    for e in v.transitions:
        (i, d), = e.delta
        op = "inc" if d > 0 else "dec"
        ts.append(recv(names[e.src], f"{op}_{v.counters[i]}", names[e.dst]))
    for loc in v.locations:
        for x in v.counters:
            ts += [recv(names[loc], f"inc_{x}", FROWN), recv(names[loc], f"dec_{x}", FROWN)]
    if dashed:
        ts.append(recv(names[l_f], "start", "err"))
    else:
        ts.append(recv("q_f", "verif", "err"))
        for x in v.counters:
            ts += [recv("z_end", f"inc_{x}", "err_prime"), recv("z_end", f"dec_{x}", "err_prime")]
    p = Protocol.build(f"vass_{v.name}" + ("_dashed" if dashed else ""), "q_in", ts,
                       states=list(names.values()) + [FROWN])
    return p, "q_f"


# Deterministic finite automata

@dataclass(frozen=True)
class Dfa:
    name: str
    alphabet: tuple
    states: tuple
    initial: str
    accept: str
    delta: dict = field(hash=False, compare=True)  # (state, letter) -> state

    def __post_init__(self):
        if self.initial not in self.states or self.accept not in self.states:
            raise ValueError("init and accept must be automaton states")
        if any("__" in s for s in self.states):
            raise ValueError("automaton state names may not contain '__'")
        for s in self.states:
            for a in self.alphabet:
                if (s, a) not in self.delta:
                    raise ValueError(f"automaton {self.name} is not complete: no step {s} {a}")
        for (s, a), t in self.delta.items():
            if s not in self.states or t not in self.states or a not in self.alphabet:
                raise ValueError(f"bad step {s} {a} {t}")

    def run(self, word) -> str:
        s = self.initial
        for a in word:
            s = self.delta[(s, a)]
        return s

    def accepts(self, word) -> bool:
        return self.run(word) == self.accept


def parse_dfas(text: str) -> list:
    """Parse one or more automata; each block starts with ``dfa <name>``."""
    out = []
    cur = None

    def close():
        if cur is None:
            return
        if cur["init"] is None or cur["accept"] is None or cur["alphabet"] is None:
            raise ParseError(f"automaton {cur['name']} needs alphabet, init and accept")
        states = set(cur["states"]) | {cur["init"], cur["accept"]}
        try:
            out.append(Dfa(cur["name"], tuple(cur["alphabet"]), tuple(sorted(states)),
                           cur["init"], cur["accept"], dict(cur["delta"])))
        except ValueError as exc:
            raise ParseError(str(exc)) from exc

    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize_line(raw)
        if not toks:
            continue
        head, col = toks[0]
        if head == "format":
            if [a for a, _ in toks[1:]] != ["1"]:
                raise ParseError("unsupported format version", lineno, col)
            continue
        args = [_ident(a, lineno, c) for a, c in toks[1:]]
        if head == "dfa":
            close()
            if len(args) != 1:
                raise ParseError("expected: dfa <name>", lineno, col)
            cur = {"name": args[0], "alphabet": None, "init": None, "accept": None,
                   "states": set(), "delta": {}}
            continue
        if cur is None:
            raise ParseError("expected a dfa declaration first", lineno, col)
        if head == "alphabet":
            cur["alphabet"] = args
        elif head in ("init", "accept"):
            if len(args) != 1:
                raise ParseError(f"expected: {head} <state>", lineno, col)
            cur[head] = args[0]
        elif head == "step":
            if len(args) != 3:
                raise ParseError("expected: step <s> <letter> <t>", lineno, col)
            s, a, t = args
            if (s, a) in cur["delta"] and cur["delta"][(s, a)] != t:
                raise ParseError(f"nondeterministic step {s} {a}", lineno, col)
            cur["delta"][(s, a)] = t
            cur["states"] |= {s, t}
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, col)
    close()
    if not out:
        raise ParseError("no automaton found")
    return out


def serialize_dfas(automata) -> str:
    lines = ["format 1"]
    for d in automata:
        lines += [f"dfa {d.name}", "alphabet " + " ".join(d.alphabet),
                  f"init {d.initial}", f"accept {d.accept}"]
        lines += [f"step {s} {a} {d.delta[(s, a)]}" for s in d.states for a in d.alphabet]
    return "\n".join(lines) + "\n"


def _check_alphabet(automata) -> tuple:
    if not automata:
        raise ValueError("need at least one automaton")
    alpha = tuple(automata[0].alphabet)
    for d in automata[1:]:
        if set(d.alphabet) != set(alpha):
            raise ValueError(f"alphabet mismatch between {automata[0].name} and {d.name}")
    return alpha


def dfa_product_nonempty(automata) -> tuple[bool, tuple | None]:
    """BFS on the product; returns a shortest common accepted word if any."""
    alpha = _check_alphabet(automata)
    start = tuple(d.initial for d in automata)
    goal = tuple(d.accept for d in automata)
    prev = {start: None}
    q = deque([start])
    while q:
        cur = q.popleft()
        if cur == goal:
            word = []
            while prev[cur] is not None:
                cur, a = prev[cur]
                word.append(a)
            return True, tuple(reversed(word))
        for a in alpha:
            nxt = tuple(d.delta[(s, a)] for d, s in zip(automata, cur))
            if nxt not in prev:
                prev[nxt] = (cur, a)
                q.append(nxt)
    return False, None


def random_dfa(rng: random.Random, alphabet, n_states: int, name: str = "A") -> Dfa:
    states = tuple(f"s{i}" for i in range(n_states))
    delta = {(s, a): rng.choice(states) for s in states for a in alphabet}
    return Dfa(name, tuple(alphabet), states, states[0], rng.choice(states), delta)


def random_dfa_family(rng: random.Random, max_automata: int = 3, max_states: int = 4,
                      max_letters: int = 3) -> list:
    k = rng.randint(1, max_automata)
    alphabet = tuple("abc"[:rng.randint(1, max_letters)])
    return [random_dfa(rng, alphabet, rng.randint(1, max_states), f"A{i + 1}")
            for i in range(k)]


def _letter(a: str) -> str:
    return "m_" + a


def _astate(i: int, s: str) -> str:
    return f"A{i}_{s}"


def gen_dfa_repcover_protocol(automata) -> tuple[Protocol, Transition]:
    """Repeated coverability instance: t_f recurs iff the languages intersect."""
    alpha = _check_alphabet(automata)
    n = len(automata)
    letters = [_letter(a) for a in alpha]
    ends = [f"end_{i}" for i in range(1, n + 1)]
    gos = [f"go_{i}" for i in range(1, n + 1)]
    sigma = ["hash", "dollar", "smile"] + letters + ends + gos
    r = [None] + [f"r{j}" for j in range(1, n + 3)]  # r[1] .. r[n+2]
    t_f = send(r[n + 2], "smile", r[1])
    ts = [send("q_in", "hash", r[1]), send("q_in", "dollar", "q_in")]
    ts += [send("q_in", m, "q_in") for m in letters]
    ts += [send("q_in", gos[i - 1], _astate(i, automata[i - 1].initial)) for i in range(1, n + 1)]
    # leader chain
    ts += [recv(r[1], "hash", FROWN), recv(r[1], "dollar", r[2])]
    ts += [recv(r[1], e, FROWN) for e in ends]
    for j in range(2, n + 2):
        ts.append(recv(r[j], ends[j - 2], r[j + 1]))
        ts += [recv(r[j], m, FROWN) for m in sigma]
    ts.append(t_f)
    # one box per automaton
    for i, d in enumerate(automata, start=1):
        for (s, a), t in d.delta.items():
            ts.append(recv(_astate(i, s), _letter(a), _astate(i, t)))
        for s in d.states:
            for m in ["dollar", gos[i - 1]] + ends:
                ts.append(recv(_astate(i, s), m, FROWN))
        ts.append(recv(_astate(i, d.accept), "dollar", f"A{i}__dollar"))
        ts.append(send(f"A{i}__dollar", ends[i - 1], f"A{i}__e"))
        ts.append(recv(f"A{i}__e", "smile", _astate(i, d.initial)))
        allowed = set(ends[i:])
        ts += [recv(f"A{i}__e", m, FROWN) for m in sigma if m not in allowed]
    p = Protocol.build("dfa_repcover", "q_in", ts, messages=sigma)
    ok, bad = check_wait_only(p)
    assert ok, bad
    return p, t_f


def _gstate(i: int, s: str, a: str | None = None, k: int = 0) -> str:
    return f"A{i}_{s}" if a is None else f"A{i}_{s}__{a}_{k}"


def gen_dfa_swo_synchro_protocol(automata) -> tuple[Protocol, str]:
    """Single-Wait-Only synchronization instance built on acknowledgments.

    A leader collects one registration per automaton, then broadcasts a word
    letter by letter; each automaton process guesses the next letter, reads
    it, and acknowledges.  The end phase counts exactly n end messages.
    """
    alpha = _check_alphabet(automata)
    n = len(automata)
    lead = [None] + [f"lead{j}" for j in range(1, n + 2)]  # lead1 .. lead{n+1}
    ts = [send("q_in", "dollar", lead[1])]
    for i in range(1, n + 1):
        ts.append(send("q_in", f"go_{i}", _gstate(i, automata[i - 1].initial)))
        ts.append(recv(lead[i], f"go_{i}", lead[i + 1]))
    for a in alpha:
        # lead{n+1} !!a, then acknowledgments ack_a_1 .. ack_a_n in order
        wait = [f"wait_{a}_{j}" for j in range(1, n + 1)] + [lead[n + 1]]
        ts.append(send(lead[n + 1], _letter(a), wait[0]))
        for j in range(n):
            ts.append(recv(wait[j], f"ack_{a}_{j + 1}", wait[j + 1]))
    # end phase of the leader: n end receptions after its own
    ends = [f"end{j}" for j in range(1, n + 1)] + ["q_f"]
    ts.append(send(lead[n + 1], "end", ends[0]))
    for j in range(n):
        ts.append(recv(ends[j], "end", ends[j + 1]))
    ts.append(recv("q_f", "end", "err"))
    for i, d in enumerate(automata, start=1):
        for s in d.states:
            for a in alpha:
                ts.append(send(_gstate(i, s), "dollar", _gstate(i, s, a, 1)))
                ts.append(recv(_gstate(i, s, a, 1), _letter(a), _gstate(i, d.delta[(s, a)], a, 2)))
                ts.append(send(_gstate(i, s, a, 2), f"ack_{a}_{i}", _gstate(i, s)))
        ts.append(send(_gstate(i, d.accept), "dollar", "p1"))
    ts += [recv("p1", "end", "p2"), send("p2", "end", "p3"), send("p3", "dollar", "q_f")]
    p = Protocol.build("dfa_swo_synchro", "q_in", ts)
    ok, bad = check_single_wait_only(p)
    assert ok, bad
    return p, "q_f"


def swo_witness_steps(n_automata: int, word_length: int) -> int:
    """Index of the final configuration in the canonical witness."""
    n, k = n_automata, word_length
    return n * (2 * k + 4) + k + 2


# small random VASS used by tests and benchmarks

def random_vass(rng: random.Random, max_counters: int = 3, max_locations: int = 4,
                max_edges: int = 6, max_update: int = 2, name: str = "rand") -> Vass:
    k = rng.randint(1, max_counters)
    counters = [f"c{i}" for i in range(k)]
    locs = [f"l{i}" for i in range(rng.randint(1, max_locations))]
    edges = []
    for _ in range(rng.randint(1, max_edges)):
        d = {c: rng.randint(-max_update, max_update) for c in counters}
        edges.append((rng.choice(locs), d, rng.choice(locs)))
    return Vass.build(name, counters, locs[0], edges, locs)


def all_words(alphabet, max_len: int):
    for k in range(max_len + 1):
        yield from product(alphabet, repeat=k)
