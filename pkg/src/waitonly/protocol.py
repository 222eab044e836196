"""Broadcast protocols: data model, DSL, classification and normalizations."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

SEND = "!!"
RECV = "?"

RESERVED_PREFIX = "__"
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")
_RESERVED_IDENT = re.compile(r"(__)?[A-Za-z0-9][A-Za-z0-9_]*\Z")


class ParseError(ValueError):
    """Raised for malformed DSL input; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class Transition(NamedTuple):
    src: str
    kind: str  # SEND or RECV
    msg: str
    dst: str

    @property
    def is_send(self) -> bool:
        return self.kind == SEND

    def __str__(self) -> str:
        return f"({self.src},{self.kind}{self.msg},{self.dst})"

    def to_json(self) -> dict:
        return {"src": self.src, "op": "send" if self.is_send else "recv",
                "msg": self.msg, "dst": self.dst}

    @staticmethod
    def from_json(d: dict) -> "Transition":
        op = d["op"]
        if op in ("send", SEND):
            kind = SEND
        elif op in ("recv", "receive", RECV):
            kind = RECV
        else:
            raise ValueError(f"unknown op {op!r}")
        return Transition(d["src"], kind, d["msg"], d["dst"])


def send(src: str, msg: str, dst: str) -> Transition:
    return Transition(src, SEND, msg, dst)


def recv(src: str, msg: str, dst: str) -> Transition:
    return Transition(src, RECV, msg, dst)


@dataclass(frozen=True)
class Protocol:
    name: str
    states: frozenset
    messages: frozenset
    initial: str
    transitions: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial!r} not a state")
        for t in self.transitions:
            if t.src not in self.states or t.dst not in self.states:
                raise ValueError(f"transition {t} uses an unknown state")
            if t.msg not in self.messages:
                raise ValueError(f"transition {t} uses an unknown message")
            if t.kind not in (SEND, RECV):
                raise ValueError(f"transition {t} has a bad operation")

    @staticmethod
    def build(name: str, initial: str, transitions: Iterable[Transition],
              states: Iterable[str] = (), messages: Iterable[str] = ()) -> "Protocol":
        """Build a protocol, inferring states and messages from the transitions."""
        ts = list(transitions)
        st = set(states) | {initial}
        ms = set(messages)
        for t in ts:
            st.add(t.src)
            st.add(t.dst)
            ms.add(t.msg)
        return Protocol(name, frozenset(st), frozenset(ms), initial, frozenset(ts))

    # indices used everywhere in the search code

    @cached_property
    def sends(self) -> tuple:
        return tuple(sorted(t for t in self.transitions if t.is_send))

    @cached_property
    def receives(self) -> tuple:
        return tuple(sorted(t for t in self.transitions if not t.is_send))

    @cached_property
    def sends_from(self) -> dict:
        out: dict = {q: [] for q in self.states}
        for t in self.sends:
            out[t.src].append(t)
        return {q: tuple(v) for q, v in out.items()}

    @cached_property
    def recv_targets(self) -> dict:
        """state -> message -> sorted tuple of reception targets."""
        out: dict = {}
        for t in self.receives:
            out.setdefault(t.src, {}).setdefault(t.msg, []).append(t.dst)
        return {q: {m: tuple(sorted(set(v))) for m, v in d.items()} for q, d in out.items()}

    def targets(self, state: str, msg: str) -> tuple:
        return self.recv_targets.get(state, {}).get(msg, ())

    def can_receive(self, state: str, msg: str) -> bool:
        return msg in self.recv_targets.get(state, {})

    @cached_property
    def classification(self) -> "Classification":
        return classify(self)

    @property
    def waiting(self) -> frozenset:
        return self.classification.waiting

    @property
    def action(self) -> frozenset:
        return self.classification.action

    def with_transitions(self, transitions: Iterable[Transition], states=(), messages=(),
                         name: str | None = None) -> "Protocol":
        return Protocol(name or self.name, self.states | frozenset(states),
                        self.messages | frozenset(messages), self.initial,
                        frozenset(transitions))

    def __str__(self) -> str:
        return serialize_protocol(self)


@dataclass(frozen=True)
class Classification:
    waiting: frozenset
    action: frozenset
    receivable: dict


def classify(p: Protocol) -> Classification:
    receivable = {q: frozenset() for q in p.states}
    for t in p.transitions:
        if not t.is_send:
            receivable[t.src] = receivable[t.src] | {t.msg}
    waiting = frozenset(q for q, r in receivable.items() if r)
    return Classification(waiting, frozenset(p.states) - waiting, receivable)


def check_wait_only(p: Protocol) -> tuple[bool, list]:
    senders = {t.src for t in p.transitions if t.is_send}
    receivers = {t.src for t in p.transitions if not t.is_send}
    bad = sorted(senders & receivers)
    return not bad, bad


def check_single_wait_only(p: Protocol) -> tuple[bool, list]:
    """Wait-Only, and each waiting state has exactly one outgoing transition."""
    ok, bad = check_wait_only(p)
    out_degree: dict = {}
    for t in p.transitions:
        out_degree[t.src] = out_degree.get(t.src, 0) + 1
    bad = set(bad)
    for q in p.classification.waiting:
        if out_degree.get(q, 0) != 1:
            bad.add(q)
    return not bad, sorted(bad)


def fresh_name(taken: Iterable[str], stem: str) -> str:
    taken = set(taken)
    name = f"{RESERVED_PREFIX}{stem}"
    i = 0
    while name in taken:
        i += 1
        name = f"{RESERVED_PREFIX}{stem}{i}"
    return name


@dataclass(frozen=True)
class Normalization:
    """Result of self-loop removal, with the data needed to map traces back."""

    protocol: Protocol
    tick: str | None
    # fresh state -> original self-loop transition
    loops: dict

    def lift(self, t: Transition) -> Transition:
        """Image of an original transition in the normalized protocol."""
        if t.is_send and t.src == t.dst:
            for p, loop in self.loops.items():
                if loop == t:
                    return Transition(t.src, SEND, t.msg, p)
        return t


def normalize_self_loops_ex(p: Protocol) -> Normalization:
    loops = sorted(t for t in p.transitions if t.is_send and t.src == t.dst)
    if not loops:
        return Normalization(p, None, {})
    tick = fresh_name(p.messages, "tick")
    taken = set(p.states)
    new_ts = set(t for t in p.transitions if not (t.is_send and t.src == t.dst))
    fresh = {}
    for t in loops:
        mid = fresh_name(taken, f"{t.src}_{t.msg}")
        taken.add(mid)
        fresh[mid] = t
        new_ts.add(Transition(t.src, SEND, t.msg, mid))
        new_ts.add(Transition(mid, SEND, tick, t.src))
    q = Protocol(p.name, frozenset(taken), p.messages | {tick}, p.initial, frozenset(new_ts))
    return Normalization(q, tick, fresh)


def normalize_self_loops(p: Protocol) -> Protocol:
    return normalize_self_loops_ex(p).protocol


def add_uncoverable_state(p: Protocol) -> tuple[Protocol, str]:
    qu = fresh_name(p.states, "qu")
    return Protocol(p.name, p.states | {qu}, p.messages, p.initial, p.transitions), qu


# DSL

def _check_ident(tok: str, lineno: int, col: int, allow_reserved: bool) -> str:
    if _IDENT.match(tok):
        return tok
    if allow_reserved and _RESERVED_IDENT.match(tok):
        return tok
    if tok.startswith(RESERVED_PREFIX):
        raise ParseError(f"identifier {tok!r} uses the reserved '__' prefix", lineno, col)
    raise ParseError(f"bad identifier {tok!r}", lineno, col)


def strip_comment(line: str) -> str:
    """Drop a comment: '#' at the start of the line or after whitespace."""
    m = re.search(r"(^|\s)#", line)
    return line[:m.start()] if m else line


def tokenize_line(line: str) -> list[tuple[str, int]]:
    """Split a DSL line into (token, 1-based column), dropping comments."""
    line = strip_comment(line)
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def parse_protocol(text: str, allow_reserved: bool = False) -> Protocol:
    name = None
    initial = None
    declared_states = None
    declared_messages = set()
    trans: list[tuple[Transition, int]] = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize_line(raw)
        if not toks:
            continue
        head, col = toks[0]
        args = toks[1:]
        ident = lambda tc: _check_ident(tc[0], lineno, tc[1], allow_reserved)  # noqa: E731
        if head == "format":
            if len(args) != 1 or args[0][0] not in ("1", "1:"):
                raise ParseError("unsupported format version", lineno, col)
        elif head == "protocol":
            if len(args) != 1:
                raise ParseError("expected: protocol <name>", lineno, col)
            if name is not None:
                raise ParseError("duplicate protocol declaration", lineno, col)
            name = ident(args[0])
        elif head == "init":
            if len(args) != 1:
                raise ParseError("expected: init <state>", lineno, col)
            if initial is not None:
                raise ParseError("duplicate init declaration", lineno, col)
            initial = ident(args[0])
        elif head == "states":
            declared_states = (declared_states or set()) | {ident(a) for a in args}
        elif head == "messages":
            declared_messages |= {ident(a) for a in args}
        elif head == "trans":
            if len(args) != 3:
                raise ParseError("expected: trans <src> !!<msg>|?<msg> <dst>", lineno, col)
            (src_tok, op_tok, dst_tok) = args
            src = ident(src_tok)
            dst = ident(dst_tok)
            op, op_col = op_tok
            if op.startswith(SEND):
                kind, msg = SEND, op[2:]
                mcol = op_col + 2
            elif op.startswith(RECV):
                kind, msg = RECV, op[1:]
                mcol = op_col + 1
            else:
                raise ParseError(f"expected !!msg or ?msg, got {op!r}", lineno, op_col)
            msg = _check_ident(msg, lineno, mcol, allow_reserved)
            t = Transition(src, kind, msg, dst)
            if t in seen:
                raise ParseError(f"duplicate transition {t}", lineno, col)
            seen.add(t)
            trans.append((t, lineno))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, col)
    if name is None:
        raise ParseError("missing protocol declaration")
    if initial is None:
        raise ParseError("missing init declaration")
    if declared_states is not None:
        for t, lineno in trans:
            for s in (t.src, t.dst):
                if s not in declared_states:
                    raise ParseError(f"unknown state {s!r} in transition", lineno, 1)
        if initial not in declared_states:
            raise ParseError(f"unknown initial state {initial!r}")
    return Protocol.build(name, initial, (t for t, _ in trans),
                          states=declared_states or (), messages=declared_messages)


def serialize_protocol(p: Protocol) -> str:
    lines = ["format 1", f"protocol {p.name}", f"init {p.initial}"]
    mentioned = {p.initial}
    used_msgs = set()
    for t in p.transitions:
        mentioned.add(t.src)
        mentioned.add(t.dst)
        used_msgs.add(t.msg)
    if set(p.states) - mentioned:
        lines.append("states " + " ".join(sorted(p.states)))
    if set(p.messages) - used_msgs:
        lines.append("messages " + " ".join(sorted(p.messages)))
    for t in sorted(p.transitions):
        lines.append(f"trans {t.src} {t.kind}{t.msg} {t.dst}")
    return "\n".join(lines) + "\n"
