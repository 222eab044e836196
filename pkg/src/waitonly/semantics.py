"""Step relations on process-indexed configurations, traces and lassos.

Process indices are 1-based everywhere in the public API, as in the
usual notation C(e) for e in [1, ||C||].
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .protocol import Protocol, Transition

FORMAT = 1
UNCOVERABLE = "__qu"


class Semantics(str, Enum):
    BROADCAST = "broadcast"
    RBN = "rbn"


class StepError(ValueError):
    pass


IndexedConfig = tuple  # tuple of state names


@dataclass(frozen=True)
class Step:
    sender: int
    t: Transition
    receivers: frozenset = frozenset()
    choices: Mapping[int, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {"sender": self.sender, "t": self.t.to_json()}
        if self.receivers:
            d["receivers"] = sorted(self.receivers)
        if self.choices:
            d["choices"] = {str(k): v for k, v in sorted(self.choices.items())}
        return d

    @staticmethod
    def from_json(d: dict) -> "Step":
        return Step(int(d["sender"]), Transition.from_json(d["t"]),
                    frozenset(int(x) for x in d.get("receivers", ())),
                    {int(k): v for k, v in d.get("choices", {}).items()})


def _resolve(p: Protocol, state: str, msg: str, e: int, choices: Mapping[int, str]) -> str:
    targets = p.targets(state, msg)
    if e in choices:
        dst = choices[e]
        if dst not in targets:
            raise StepError(f"process {e} cannot go from {state} to {dst} on ?{msg}")
        return dst
    if len(targets) == 1:
        return targets[0]
    raise StepError(f"unresolved reception for process {e} at {state} on ?{msg}")


def broadcast_step(p: Protocol, c: Sequence[str], sender: int, t: Transition,
                   choices: Mapping[int, str] | None = None) -> IndexedConfig:
    """One broadcast step: every able process other than the sender receives."""
    choices = choices or {}
    _check_sender(p, c, sender, t)
    out = list(c)
    out[sender - 1] = t.dst
    for e, s in enumerate(c, start=1):
        if e != sender and p.can_receive(s, t.msg):
            out[e - 1] = _resolve(p, s, t.msg, e, choices)
    return tuple(out)


def rbn_step(p: Protocol, c: Sequence[str], sender: int, t: Transition,
             receivers: Iterable[int], choices: Mapping[int, str] | None = None) -> IndexedConfig:
    """One reconfigurable step: only the chosen receivers take a reception."""
    choices = choices or {}
    receivers = set(receivers)
    _check_sender(p, c, sender, t)
    if sender in receivers:
        raise StepError("sender cannot be a receiver")
    out = list(c)
    out[sender - 1] = t.dst
    for e in sorted(receivers):
        if not 1 <= e <= len(c):
            raise StepError(f"no process {e}")
        s = c[e - 1]
        if not p.can_receive(s, t.msg):
            raise StepError(f"process {e} at {s} cannot receive {t.msg}")
        out[e - 1] = _resolve(p, s, t.msg, e, choices)
    return tuple(out)


def _check_sender(p: Protocol, c, sender, t):
    if not t.is_send:
        raise StepError(f"{t} is not a send transition")
    if t not in p.transitions:
        raise StepError(f"{t} is not a transition of the protocol")
    if not 1 <= sender <= len(c):
        raise StepError(f"no process {sender}")
    if c[sender - 1] != t.src:
        raise StepError(f"sender {sender} is at {c[sender - 1]}, not {t.src}")


def able_receivers(p: Protocol, c: Sequence[str], sender: int, msg: str) -> frozenset:
    return frozenset(e for e, s in enumerate(c, start=1)
                     if e != sender and p.can_receive(s, msg))


def make_step(p: Protocol, before: Sequence[str], after: Sequence[str], sender: int,
              t: Transition) -> Step:
    """Step label recording every reception that happened between two configs."""
    recvs = frozenset(e for e in range(1, len(before) + 1)
                      if e != sender and p.can_receive(before[e - 1], t.msg)
                      and (after[e - 1] != before[e - 1]
                           or after[e - 1] in p.targets(before[e - 1], t.msg)))
    choices = {e: after[e - 1] for e in recvs}
    return Step(sender, t, recvs, choices)


@dataclass
class Trace:
    """A finite execution: the configurations and the step labels between them."""

    configs: list
    steps: list

    def __post_init__(self):
        self.configs = [tuple(c) for c in self.configs]
        if len(self.configs) != len(self.steps) + 1:
            raise ValueError("a trace has one more configuration than steps")

    def __len__(self) -> int:
        """Number of configurations, i.e. |rho|."""
        return len(self.configs)

    @property
    def initial(self) -> IndexedConfig:
        return self.configs[0]

    @property
    def last(self) -> IndexedConfig:
        return self.configs[-1]

    @property
    def n(self) -> int:
        return len(self.configs[0])

    def process(self, e: int) -> list:
        return [c[e - 1] for c in self.configs]

    def to_json(self) -> dict:
        return {"format": FORMAT, "initial": list(self.configs[0]),
                "steps": [s.to_json() for s in self.steps]}

    @staticmethod
    def replay(p: Protocol, initial: Sequence[str], steps: Iterable[Step],
               semantics: Semantics = Semantics.BROADCAST) -> "Trace":
        configs = [tuple(initial)]
        steps = list(steps)
        for s in steps:
            configs.append(apply_step(p, configs[-1], s, semantics))
        return Trace(configs, steps)

    @staticmethod
    def from_json(p: Protocol, d: dict, semantics: Semantics = Semantics.BROADCAST) -> "Trace":
        return Trace.replay(p, d["initial"], [Step.from_json(s) for s in d["steps"]], semantics)


def apply_step(p: Protocol, c, s: Step, semantics: Semantics) -> IndexedConfig:
    if semantics == Semantics.BROADCAST:
        return broadcast_step(p, c, s.sender, s.t, s.choices)
    return rbn_step(p, c, s.sender, s.t, s.receivers, s.choices)


@dataclass(frozen=True)
class Validation:
    ok: bool
    index: int = -1
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def validate_trace(p: Protocol, tr: Trace, semantics: Semantics = Semantics.BROADCAST,
                   grounded: bool = False) -> Validation:
    """Check that each configuration follows from its predecessor.

    Under broadcast semantics the recorded receiver set is ignored and the
    successor must match the forced receptions.  Under RBN semantics a
    process that moved must be a legal receiver.
    """
    if tr.n < 1:
        return Validation(False, 0, "no processes")
    for c in tr.configs:
        if len(c) != tr.n:
            return Validation(False, 0, "configurations differ in size")
        for s in c:
            if s not in p.states:
                return Validation(False, 0, f"unknown state {s}")
    if grounded and any(s != p.initial for s in tr.configs[0]):
        return Validation(False, 0, "initial configuration is not all on the initial state")
    for i, s in enumerate(tr.steps):
        before, after = tr.configs[i], tr.configs[i + 1]
        try:
            _check_sender(p, before, s.sender, s.t)
        except StepError as ex:
            return Validation(False, i, str(ex))
        if after[s.sender - 1] != s.t.dst:
            return Validation(False, i, "sender did not reach the transition target")
        for e in range(1, tr.n + 1):
            if e == s.sender:
                continue
            a, b = before[e - 1], after[e - 1]
            able = p.can_receive(a, s.t.msg)
            moved_ok = able and b in p.targets(a, s.t.msg)
            if semantics == Semantics.BROADCAST:
                if able and not moved_ok:
                    return Validation(False, i, f"process {e} must receive {s.t.msg} at {a}")
                if not able and a != b:
                    return Validation(False, i, f"process {e} moved without a reception")
            else:
                if a != b and not moved_ok:
                    return Validation(False, i, f"process {e} moved illegally")
                if a == b and e in s.receivers and not moved_ok:
                    return Validation(False, i, f"process {e} cannot receive {s.t.msg}")
    return Validation(True)


# next actions, future sets, well-formedness

class NextAction:
    """Precomputed next-action table of a trace: na(rho, j, e)."""

    def __init__(self, p: Protocol, tr: Trace, qu: str = UNCOVERABLE):
        self.tr = tr
        self.qu = qu
        self.waiting = p.classification.waiting
        length = len(tr)
        # idx[e][k] = least k' >= k with configs[k'][e] action, else |rho|
        self.idx = []
        for e in range(tr.n):
            col = [length] * (length + 1)
            nxt = length
            for k in range(length - 1, -1, -1):
                if tr.configs[k][e] not in self.waiting:
                    nxt = k
                col[k] = nxt
            self.idx.append(col)

    def __call__(self, j: int, e: int) -> tuple[str, int]:
        k = self.idx[e - 1][j]
        if k == len(self.tr):
            return self.qu, k
        return self.tr.configs[k][e - 1], k

    def future(self, j: int, qa: str) -> set:
        out = set()
        for e in range(1, self.tr.n + 1):
            if self.tr.configs[j][e - 1] in self.waiting:
                s, k = self(j, e)
                if s == qa:
                    out.add(k)
        return out

    def groups(self, j: int) -> dict:
        """(q_a, index) -> set of processes waiting at j with that next action."""
        out: dict = {}
        for e in range(1, self.tr.n + 1):
            if self.tr.configs[j][e - 1] in self.waiting:
                out.setdefault(self(j, e), set()).add(e)
        return out


def next_action(p: Protocol, tr: Trace, j: int, e: int, qu: str = UNCOVERABLE) -> tuple[str, int]:
    if tr.configs[j][e - 1] not in p.classification.waiting:
        raise ValueError(f"process {e} is not in a waiting state at {j}")
    return NextAction(p, tr, qu)(j, e)


def future_index_set(p: Protocol, tr: Trace, j: int, qa: str, qu: str = UNCOVERABLE) -> set:
    return NextAction(p, tr, qu).future(j, qa)


def _first_violation(p: Protocol, tr: Trace, na: NextAction, start: int = 0):
    waiting = p.classification.waiting
    for i in range(start, len(tr)):
        cfg = tr.configs[i]
        by_key: dict = {}
        for e in range(1, tr.n + 1):
            s = cfg[e - 1]
            if s in waiting:
                by_key.setdefault((s, na(i, e)[0]), []).append(e)
        bad = None
        for members in by_key.values():
            if len(members) < 2:
                continue
            for a_pos, e1 in enumerate(members):
                end1 = na(i, e1)[1]
                for e2 in members[a_pos + 1:]:
                    end = max(end1, na(i, e2)[1])
                    end = min(end, len(tr) - 1)
                    if any(tr.configs[k][e1 - 1] != tr.configs[k][e2 - 1]
                           for k in range(i, end + 1)):
                        cand = (i, e1, e2)
                        if bad is None or cand < bad:
                            bad = cand
                        break
        if bad is not None:
            return bad
    return None


def is_well_formed(p: Protocol, tr: Trace, qu: str = UNCOVERABLE):
    """Return (True, None) or (False, (i, e1, e2)) for the first violation."""
    v = _first_violation(p, tr, NextAction(p, tr, qu))
    return v is None, v


def well_formize(p: Protocol, tr: Trace, j: int, e1: int, e2: int,
                 qu: str = UNCOVERABLE) -> Trace:
    """Make e2 follow e1 from j until their common next action.

    e2 copies e1's states up to e1's next-action index j1 and then stays on
    the action state q until its own next-action index j2.  When neither ever
    acts (q is the uncoverable marker) e2 copies e1 to the end.
    """
    if e1 == e2:
        return tr
    na = NextAction(p, tr, qu)
    if tr.configs[j][e1 - 1] != tr.configs[j][e2 - 1] or \
            tr.configs[j][e1 - 1] not in p.classification.waiting:
        raise ValueError("processes are not on a common waiting state")
    (q1, j1), (q2, j2) = na(j, e1), na(j, e2)
    if q1 != q2:
        raise ValueError(f"different next action states {q1} and {q2}")
    if j1 > j2:
        raise ValueError("the first process must act no later than the second")
    configs = [list(c) for c in tr.configs]
    last = len(tr) - 1
    for k in range(j + 1, min(j1, last) + 1):
        configs[k][e2 - 1] = configs[k][e1 - 1]
    if q1 != qu:
        for k in range(j1 + 1, min(j2, last) + 1):
            configs[k][e2 - 1] = q1
    steps = []
    for k, s in enumerate(tr.steps):
        steps.append(make_step(p, configs[k], configs[k + 1], s.sender, s.t))
    return Trace(configs, steps)


def well_formize_all(p: Protocol, tr: Trace, qu: str = UNCOVERABLE) -> Trace:
    """Resolve violations at the earliest index first until well-formed.

    At a violating index all processes sharing the waiting state and next
    action state are aligned on the member that acts first, one pair at a time.
    """
    start = 0
    while True:
        na = NextAction(p, tr, qu)
        v = _first_violation(p, tr, na, start)
        if v is None:
            return tr
        i, e1, _ = v
        key = (tr.configs[i][e1 - 1], na(i, e1)[0])
        cls = [e for e in range(1, tr.n + 1)
               if tr.configs[i][e - 1] == key[0] and na(i, e)[0] == key[1]]
        leader = min(cls, key=lambda e: (na(i, e)[1], e))
        for e in cls:
            if e != leader:
                tr = well_formize(p, tr, i, leader, e, qu)
        start = i


# lassos

@dataclass
class Lasso:
    """Finite prefix plus a cycle; configs[cycle_start] == configs[-1]."""

    trace: Trace
    cycle_start: int
    tracked: int

    def to_json(self) -> dict:
        d = self.trace.to_json()
        d["cycle_start"] = self.cycle_start
        d["tracked"] = self.tracked
        return d

    @staticmethod
    def from_json(p: Protocol, d: dict, semantics: Semantics = Semantics.BROADCAST) -> "Lasso":
        return Lasso(Trace.from_json(p, d, semantics), int(d["cycle_start"]), int(d["tracked"]))

    @property
    def cycle_steps(self) -> list:
        return self.trace.steps[self.cycle_start:]

    def takes(self, p: Protocol, t_f: Transition) -> list:
        """Cycle step indices where the tracked process takes t_f."""
        out = []
        e = self.tracked
        for k in range(self.cycle_start, len(self.trace.steps)):
            s = self.trace.steps[k]
            before, after = self.trace.configs[k], self.trace.configs[k + 1]
            if t_f.is_send:
                if s.sender == e and s.t == t_f:
                    out.append(k)
            elif s.sender != e and s.t.msg == t_f.msg and before[e - 1] == t_f.src \
                    and after[e - 1] == t_f.dst and p.can_receive(before[e - 1], t_f.msg):
                out.append(k)
        return out

    def dead_processes(self) -> set:
        """Processes that never move along the cycle (dead from cycle_start on)."""
        cyc = self.trace.configs[self.cycle_start:]
        return {e for e in range(1, self.trace.n + 1)
                if len({c[e - 1] for c in cyc}) == 1
                and all(s.sender != e for s in self.cycle_steps)}


def validate_lasso(p: Protocol, lasso: Lasso, t_f: Transition,
                   semantics: Semantics = Semantics.BROADCAST) -> Validation:
    v = validate_trace(p, lasso.trace, semantics, grounded=True)
    if not v:
        return v
    if not 0 <= lasso.cycle_start < len(lasso.trace.steps):
        return Validation(False, lasso.cycle_start, "empty cycle")
    if lasso.trace.configs[lasso.cycle_start] != lasso.trace.last:
        return Validation(False, lasso.cycle_start, "cycle does not close")
    if not lasso.takes(p, t_f):
        return Validation(False, lasso.cycle_start, "tracked process never takes the target")
    return Validation(True)


# counting abstraction

def to_multiset(c: Sequence[str]) -> dict:
    return dict(Counter(c))


def from_multiset(m: Mapping[str, int]) -> IndexedConfig:
    out = []
    for s in sorted(m):
        out.extend([s] * m[s])
    return tuple(out)
