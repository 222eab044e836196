"""Summaries, coherent sets and the VASS built from a Wait-Only protocol.

A summary (pr, q_a, k) stands for a group of processes in waiting states
that will reach the action state q_a at the same moment.  Locations of the
constructed VASS are coherent sets of summaries; counters are x_q for
action states and x_(q,k) for summary labels.  Locations are generated on
demand by ``Construction.edges``.

Three variants share the construction:

  synchro  target is a waiting state q_f; reach (s_f, 0)
  action   target is an action state q_f; reach (s_f, 0), with a reset to s0
  smiley   repeated coverability of a transition t_f via tagged locations
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product
from typing import NamedTuple

import networkx as nx

from .protocol import (
    Normalization, Protocol, Transition, add_uncoverable_state, check_wait_only,
    normalize_self_loops_ex,
)
from .semantics import NextAction, Step, Trace, broadcast_step, is_well_formed
from .vass import Edge, Vass, VassError, apply_delta

DONE = "Done"
S0 = "s0"
SF = "s_f"
SF1 = "s'_f"


class Summary(NamedTuple):
    print: tuple  # sorted waiting states
    exit: str
    id: int

    @property
    def label(self) -> tuple:
        return (self.exit, self.id)

    def text(self) -> str:
        return f"{','.join(self.print)}>{self.exit}#{self.id}"


def summary(print_states, exit: str, id: int) -> Summary:
    return Summary(tuple(sorted(print_states)), exit, id)


class SummaryStep(NamedTuple):
    """One way a summary evolves on a broadcast."""

    kind: str  # "plain", "joined" or "done"
    result: object  # Summary, or DONE
    choices: tuple  # ((print state, reception target), ...)


class Smiley(NamedTuple):
    """A tagged copy of a coherent set."""

    cs: tuple


def coherent(summaries) -> bool:
    by_exit: dict = {}
    for s in summaries:
        by_exit.setdefault(s.exit, []).append(s)
    for group in by_exit.values():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                if a.id == b.id or set(a.print) & set(b.print):
                    return False
    return True


def coherent_set(summaries) -> tuple:
    cs = tuple(sorted(summaries, key=lambda s: (s.exit, s.id, s.print)))
    if not coherent(cs):
        raise ValueError("summaries are not coherent")
    return cs


@lru_cache(maxsize=500_000)
def labels(cs) -> frozenset:
    return frozenset(s.label for s in cs)


def location_name(loc) -> str:
    if isinstance(loc, Smiley):
        return "SMILEY" + location_name(loc.cs)
    if isinstance(loc, tuple):
        return "{" + ";".join(s.text() for s in loc) + "}"
    return str(loc)


# preparing a protocol

@dataclass(frozen=True)
class Prepared:
    """A Wait-Only protocol with self-loops removed and q_u added."""

    original: Protocol
    norm: Normalization
    protocol: Protocol
    qu: str


def prepare(p: Protocol) -> Prepared:
    ok, bad = check_wait_only(p)
    if not ok:
        raise ValueError(f"protocol is not Wait-Only: {', '.join(bad)}")
    norm = normalize_self_loops_ex(p)
    q, qu = add_uncoverable_state(norm.protocol)
    return Prepared(p, norm, q, qu)


def _check_ready(p: Protocol):
    ok, bad = check_wait_only(p)
    if not ok:
        raise ValueError(f"protocol is not Wait-Only: {', '.join(bad)}")
    if any(t.is_send and t.src == t.dst for t in p.transitions):
        raise ValueError("protocol has broadcast self-loops; normalize it first")


def summary_successors(p: Protocol, s: Summary, t: Transition) -> list:
    """All S' with S ~t~> S', S ~t,+q'~> S' and S ~t~> Done.

    Each print state hosts one process, and each process picks its own
    reception target, so all processes on one print state move together.
    """
    _check_ready(p)
    if not t.is_send:
        raise ValueError(f"{t} is not a send transition")
    return list(_summary_successors(p, s, t))


@lru_cache(maxsize=200_000)
def _summary_successors(p: Protocol, s: Summary, t: Transition) -> tuple:
    waiting = p.classification.waiting
    options = []
    for q in s.print:
        tg = p.targets(q, t.msg)
        options.append(tg if tg else (q,))
    out = []
    seen = set()
    for combo in product(*options):
        image = frozenset(combo)
        choices = tuple(zip(s.print, combo))
        if image <= waiting:
            key = ("plain", image)
            if key not in seen:
                seen.add(key)
                out.append(SummaryStep("plain", summary(image, s.exit, s.id), choices))
            if t.dst in waiting:
                key = ("joined", image)
                if key not in seen:
                    seen.add(key)
                    out.append(SummaryStep("joined", summary(image | {t.dst}, s.exit, s.id),
                                           choices))
        elif image == {s.exit}:
            if "done" not in seen:
                seen.add("done")
                out.append(SummaryStep("done", DONE, choices))
    return tuple(out)


# the construction

class EdgeInfo(NamedTuple):
    kind: str
    t: Transition | None = None
    parts: tuple = ()  # ((old summary, SummaryStep), ...)
    joined: int = -1  # index into parts of the summary the sender joins
    new: Summary | None = None  # summary created by the sender
    label: tuple | None = None  # drained label for kind "e"


class Construction:
    """The VASS of a prepared protocol, materialized lazily.

    Options used by the solvers (all off by default, which gives the exact
    construction):

      canonical   a new summary takes the smallest id unused for its exit;
                  q_u summaries only use id 1
      prune       a new summary's exit must be reachable from the sender's
                  target through waiting states (q_u: only if the target
                  state q_f is, for synchro)
      drains      emit the drain transitions (off: the caller drains eagerly)
    """

    def __init__(self, prep: Prepared, variant: str, target, canonical: bool = False,
                 prune: bool = False, drains: bool = True):
        self.prep = prep
        p = self.p = prep.protocol
        self.qu = prep.qu
        self.variant = variant
        self.canonical = canonical
        self.prune = prune
        self.drains = drains
        cls = p.classification
        self.waiting = cls.waiting
        self.action = cls.action
        self.Q_W = sorted(cls.waiting)
        self.Q_A = sorted(cls.action)
        self.nw = len(self.Q_W)
        self.ids = range(1, self.nw + 2)
        if p.initial in self.waiting:
            raise ValueError("the initial state is a waiting state")
        names = [f"x_{q}" for q in self.Q_A]
        self.xq = {q: i for i, q in enumerate(self.Q_A)}
        self.xl = {}
        for q in self.Q_A:
            for k in self.ids:
                self.xl[(q, k)] = len(names)
                names.append(f"k{k}_{q}")
        self.counters = tuple(names)
        self.initial = S0
        self.t_f = None
        self.q_f = None
        if variant == "synchro":
            if target not in self.waiting:
                raise ValueError(f"{target} is not a waiting state")
            self.q_f = target
            self.S_f = (summary({target}, self.qu, 1),)
        elif variant == "action":
            if target not in self.action or target == self.qu:
                raise ValueError(f"{target} is not an action state")
            self.q_f = target
        elif variant == "smiley":
            if target not in p.transitions:
                raise ValueError(f"{target} is not a transition of the protocol")
            self.t_f = target
        else:
            raise ValueError(f"unknown variant {variant!r}")
        self._cache: dict = {}
        self._special: dict = {}
        self._tcache: dict = {}
        self._reach = self._waiting_reach()

    @property
    def dim(self) -> int:
        return len(self.counters)

    def counter_name(self, i: int) -> str:
        return self.counters[i]

    def _waiting_reach(self) -> dict:
        """Waiting state -> action states reachable through waiting states."""
        out = {}
        for w in self.Q_W:
            seen = {w}
            stack = [w]
            acts = set()
            while stack:
                s = stack.pop()
                for t in self.p.receives:
                    if t.src == s:
                        if t.dst in self.waiting:
                            if t.dst not in seen:
                                seen.add(t.dst)
                                stack.append(t.dst)
                        else:
                            acts.add(t.dst)
            out[w] = (frozenset(acts), frozenset(seen))
        return out

    # edges

    def edges(self, loc) -> list:
        hit = self._cache.get(loc)
        if hit is None:
            hit = self._cache[loc] = self._edges(loc)
        return hit

    def special_edges(self, loc) -> list:
        """Edges of ``loc`` other than the Delta_t ones."""
        hit = self._special.get(loc)
        if hit is None:
            hit = self._special[loc] = [e for e in self._edges(loc, with_t=False)]
        return hit

    def t_edges(self, cs, t: Transition) -> list:
        key = (cs, t)
        hit = self._tcache.get(key)
        if hit is None:
            hit = self._tcache[key] = self._t_edges(cs, t)
        return hit

    def _edges(self, loc, with_t: bool = True) -> list:
        xq = self.xq
        out = []
        if loc == S0:
            out.append(Edge(S0, ((xq[self.p.initial], 1),), S0, EdgeInfo("pump")))
            out.append(Edge(S0, (), (), EdgeInfo("enter")))
            return out
        if loc == SF:
            if self.variant == "synchro":
                out.append(Edge(SF, ((self.xl[(self.qu, 1)], -1),), SF, EdgeInfo("drain_f")))
            else:
                out.append(Edge(SF, ((xq[self.q_f], -1),), SF, EdgeInfo("drain_f")))
                out.append(Edge(SF, (), S0, EdgeInfo("reset")))
            return out
        if loc == SF1:
            out.append(Edge(SF1, ((xq[self.q_f], 1),), SF, EdgeInfo("to_sf")))
            return out
        if isinstance(loc, Smiley):
            out.append(Edge(loc, (), loc.cs, EdgeInfo("unsmile")))
            return out
        cs = loc
        if self.variant == "synchro" and cs == self.S_f:
            out.append(Edge(cs, (), SF, EdgeInfo("final")))
        if self.variant == "action" and cs == ():
            out.append(Edge(cs, ((xq[self.q_f], -1),), SF1, EdgeInfo("to_sf1")))
        if with_t:
            for t in self.p.sends:
                out.extend(self.t_edges(cs, t))
        if self.drains:
            present = labels(cs)
            for (q, k), i in self.xl.items():
                if (q, k) not in present:
                    out.append(Edge(cs, tuple(sorted(((i, -1), (xq[q], 1)))), cs,
                                    EdgeInfo("e", label=(q, k))))
        return out

    def _tagged(self, t: Transition, parts) -> bool:
        tf = self.t_f
        if tf is None:
            return False
        if tf.is_send:
            return t == tf
        if t.msg != tf.msg:
            return False
        return any(q == tf.src and d == tf.dst
                   for _, st in parts for q, d in st.choices)

    def _emit(self, cs, t, parts, delta, joined=-1, new=None):
        """Build the Delta_t edge(s) for one combination, or nothing if incoherent."""
        res = [st.result for _, st in parts if st.result is not DONE]
        if new is not None:
            res.append(new)
        if not coherent(res):
            return None
        dst = tuple(sorted(res, key=lambda s: (s.exit, s.id, s.print)))
        info = EdgeInfo("t", t, tuple(parts), joined, new)
        if self._tagged(t, parts):
            dst = Smiley(dst)
        return Edge(cs, tuple(sorted(delta)), dst, info)

    def _t_edges(self, cs, t: Transition) -> list:
        p = self.p
        xq = self.xq
        steps = [_summary_successors(p, s, t) for s in cs]
        plain = [[st for st in opts if st.kind != "joined"] for opts in steps]
        out = []
        seen = set()

        def add(e):
            if e is not None and (e.delta, e.dst) not in seen:
                seen.add((e.delta, e.dst))
                out.append(e)

        if t.dst in self.action:
            if any(not opts for opts in plain):
                return out
            delta = ((xq[t.src], -1), (xq[t.dst], 1))
            for combo in product(*plain):
                add(self._emit(cs, t, tuple(zip(cs, combo)), delta))
            return out
        # the sender lands in a waiting state: join an existing summary ...
        for i, s in enumerate(cs):
            joins = [st for st in steps[i] if st.kind == "joined"]
            if not joins:
                continue
            others = plain[:i] + [joins] + plain[i + 1:]
            if any(not opts for opts in others):
                continue
            if self.prune and not self._exit_ok(t.dst, s.exit):
                continue
            delta = ((xq[t.src], -1), (self.xl[s.label], 1))
            for combo in product(*others):
                add(self._emit(cs, t, tuple(zip(cs, combo)), delta, joined=i))
        # ... or create a new one
        if any(not opts for opts in plain):
            return out
        used = labels(cs)
        for qa in self.Q_A:
            if self.prune and not self._exit_ok(t.dst, qa):
                continue
            for k in self._new_ids(qa, used):
                new = summary({t.dst}, qa, k)
                delta = ((xq[t.src], -1), (self.xl[(qa, k)], 1))
                for combo in product(*plain):
                    add(self._emit(cs, t, tuple(zip(cs, combo)), delta, new=new))
        return out

    def _exit_ok(self, w: str, qa: str) -> bool:
        acts, seen = self._reach[w]
        if qa == self.qu:
            if self.variant == "synchro":
                return self.q_f in seen
            return True
        return qa in acts

    def _new_ids(self, qa: str, used) -> list:
        free = [k for k in self.ids if (qa, k) not in used]
        if not self.canonical:
            return free
        if qa == self.qu:
            return [1] if 1 in free else []
        return free[:1]

    # locations and sizes

    @cached_property
    def label_of_index(self) -> dict:
        return {i: lab for lab, i in self.xl.items()}

    @property
    def known_locations(self) -> int:
        """Number of locations whose edges have been generated so far."""
        return len(set(self._cache) | set(self._special))

    def reachable_locations(self, limit: int | None = None) -> list:
        """Locations reachable in the control graph (counters ignored)."""
        seen = {S0}
        order = [S0]
        i = 0
        while i < len(order):
            loc = order[i]
            i += 1
            for e in self.edges(loc):
                if e.dst not in seen:
                    seen.add(e.dst)
                    order.append(e.dst)
                    if limit is not None and len(order) >= limit:
                        return order
        return order

    def to_vass(self, limit: int | None = None) -> Vass:
        locs = self.reachable_locations(limit)
        keep = set(locs)
        edges = [e for loc in locs for e in self.edges(loc) if e.dst in keep]
        return Vass(f"{self.p.name}_{self.variant}", self.counters, S0, edges, frozenset(locs))

    def targets(self):
        """Target predicate on locations for repeated coverability."""
        return lambda loc: isinstance(loc, Smiley)


def build_synchro_vass(p: Protocol, q_f: str, **opts) -> Construction:
    return Construction(prepare(p), "synchro", q_f, **opts)


def build_action_vass(p: Protocol, q_f: str, **opts) -> Construction:
    return Construction(prepare(p), "action", q_f, **opts)


def build_smiley_vass(p: Protocol, t_f: Transition, **opts) -> Construction:
    prep = prepare(p)
    return Construction(prep, "smiley", prep.norm.lift(t_f), **opts)


def dump_vass(c: Construction, limit: int | None = None) -> str:
    from .vass import serialize_vass
    return serialize_vass(c.to_vass(limit), loc_name=location_name)


# implementation and representatives

def check_implementation(c: Construction, cs, val, config) -> dict | None:
    """A witness map process -> counter index meeting CondImpl1-3, or None.

    Solved as a transportation problem with a max-flow.
    """
    if sum(val) != len(config):
        raise ValueError("counter total differs from the number of processes")
    present = {s.label: s for s in cs}
    allowed = {}
    for q, i in c.xq.items():
        allowed[i] = {q}
    for lab, i in c.xl.items():
        s = present.get(lab)
        allowed[i] = (set(s.print) | {lab[0]}) if s else {lab[0]}
    by_state: dict = {}
    for e, q in enumerate(config, start=1):
        by_state.setdefault(q, []).append(e)
    g = nx.DiGraph()
    for q, procs in by_state.items():
        g.add_edge("src", ("q", q), capacity=len(procs))
    for i, v in enumerate(val):
        if v:
            g.add_edge(("x", i), "snk", capacity=v)
            for q in allowed[i]:
                if q in by_state:
                    g.add_edge(("q", q), ("x", i), capacity=v)
    if not len(config):
        return {}
    if "src" not in g or "snk" not in g:
        return None
    value, flow = nx.maximum_flow(g, "src", "snk")
    if value != len(config):
        return None
    f = {}
    for q, procs in by_state.items():
        it = iter(procs)
        for (_, i), amount in sorted(flow[("q", q)].items(), key=lambda kv: kv[0][1]):
            for _ in range(int(amount)):
                f[next(it)] = i
    return f


def check_representative(c: Construction, tr: Trace, i: int, cs, val) -> dict | None:
    """Injections r[q_a]: next-action index -> id meeting CondRepr1-3, or None."""
    na = NextAction(c.p, tr, c.qu)
    cfg = tr.configs[i]
    for q, x in c.xq.items():
        if val[x] != sum(1 for s in cfg if s == q):
            return None
    groups = na.groups(i)
    by_exit: dict = {}
    for (qa, j), procs in groups.items():
        by_exit.setdefault(qa, []).append((j, frozenset(cfg[e - 1] for e in procs), len(procs)))
    present: dict = {}
    for s in cs:
        present.setdefault(s.exit, []).append(s)
    if set(present) - set(by_exit):
        return None
    r = {}
    for qa, items in by_exit.items():
        summaries = present.get(qa, [])
        if len(summaries) != len(items):
            return None
        assign = _match(items, summaries, c, qa, val)
        if assign is None:
            return None
        r[qa] = assign
    for (qa, k), x in c.xl.items():
        if k not in r.get(qa, {}).values() and val[x] != 0:
            return None
    return r


def _match(items, summaries, c, qa, val):
    """Bijection between E-sets and summaries of one exit with equal prints and counts."""
    items = sorted(items, key=lambda it: it[0])

    def go(k, used, acc):
        if k == len(items):
            return dict(acc)
        j, pr, size = items[k]
        for s in summaries:
            if s.id in used or frozenset(s.print) != pr or val[c.xl[s.label]] != size:
                continue
            acc.append((j, s.id))
            got = go(k + 1, used | {s.id}, acc)
            if got is not None:
                return got
            acc.pop()
        return None

    return go(0, frozenset(), [])


# translators

class SimState:
    """A protocol configuration with a witness map, driven by VASS edges."""

    def __init__(self, c: Construction, n: int):
        self.c = c
        self.config = [c.p.initial] * n
        self.f = {e: c.xq[c.p.initial] for e in range(1, n + 1)}
        self.steps: list = []
        self.configs = [tuple(self.config)]

    def _pick(self, counter: int) -> int:
        for e in sorted(self.f):
            if self.f[e] == counter:
                return e
        raise VassError("no process carries the counter")

    def apply(self, edge: Edge):
        info = edge.meta
        c = self.c
        if info.kind == "e":
            qa, k = info.label
            e = self._pick(c.xl[(qa, k)])
            self.f[e] = c.xq[qa]
            return None
        if info.kind != "t":
            return None
        t = info.t
        sender = self._pick(c.xq[t.src])
        # reception choices, per (summary label, print state)
        choose = {}
        for s, st in info.parts:
            for q, d in st.choices:
                choose[(s.label, q)] = d
        choices = {}
        for e, q in enumerate(self.config, start=1):
            if e == sender or not c.p.can_receive(q, t.msg):
                continue
            lab = self._label_of(e)
            choices[e] = choose[(lab, q)]
        new = broadcast_step(c.p, self.config, sender, t, choices)
        step = Step(sender, t, frozenset(choices), choices)
        if t.dst in c.action:
            self.f[sender] = c.xq[t.dst]
        elif info.joined >= 0:
            self.f[sender] = c.xl[info.parts[info.joined][0].label]
        else:
            self.f[sender] = c.xl[info.new.label]
        self.config = list(new)
        self.steps.append(step)
        self.configs.append(new)
        return step

    def _label_of(self, e: int):
        i = self.f[e]
        for lab, x in self.c.xl.items():
            if x == i:
                return lab
        raise VassError(f"waiting process {e} is not in a summary")

    def trace(self) -> Trace:
        return Trace(list(self.configs), list(self.steps))


def translate_run_to_execution(c: Construction, run: list) -> Trace:
    """Protocol execution implementing a VASS run from (s0, 0).

    Drain steps reassign the witness map and take no protocol step; every
    Delta_t step is one broadcast whose receptions follow the summary steps
    recorded on the edge.
    """
    n = sum(1 for e in run if e.meta.kind == "pump")
    if n == 0:
        raise VassError("the run never adds a process")
    pos = 0
    while pos < len(run) and run[pos].meta.kind == "pump":
        pos += 1
    if any(e.meta.kind == "pump" for e in run[pos:]) and c.variant != "action":
        raise VassError("processes must all be added before the run leaves s0")
    sim = SimState(c, n)
    for e in run[pos:]:
        if e.meta.kind in ("pump", "reset"):
            break
        sim.apply(e)
    return sim.trace()


def _cs_of(summaries) -> tuple:
    return tuple(sorted(summaries, key=lambda s: (s.exit, s.id, s.print)))


def translate_execution_to_run(c: Construction, tr: Trace, check: bool = False) -> list:
    """VASS run for a grounded well-formed execution ending on q_f.

    With ``check`` every intermediate S-configuration is verified to be a
    representative of the matching configuration.
    """
    if c.variant not in ("synchro", "action"):
        raise ValueError("translation targets the synchro or action construction")
    ok, bad = is_well_formed(c.p, tr, c.qu)
    if not ok:
        raise ValueError(f"trace is not well-formed at {bad}")
    if any(s != c.p.initial for s in tr.initial):
        raise ValueError("trace does not start on the initial state")
    if any(s != c.q_f for s in tr.last):
        raise ValueError("trace does not end with every process on the target")
    na = NextAction(c.p, tr, c.qu)
    n = tr.n
    run: list = []
    cs: tuple = ()
    val = [0] * c.dim
    for e in c.edges(S0):
        if e.meta.kind == "pump":
            run.extend([e] * n)
    run.append(next(e for e in c.edges(S0) if e.meta.kind == "enter"))
    val[c.xq[c.p.initial]] = n
    # r[(q_a, j)] = id of the summary for the group heading to q_a at j
    r: dict = {}
    reprs = [(cs, tuple(val))]
    if check and check_representative(c, tr, 0, cs, tuple(val)) is None:
        raise AssertionError("initial S-configuration is not a representative")
    for i, step in enumerate(tr.steps):
        t = step.t
        before, after = tr.configs[i], tr.configs[i + 1]
        by_label = {s.label: s for s in cs}
        groups = na.groups(i)
        parts_want = {}
        for (qa, j), procs in groups.items():
            lab = (qa, r[(qa, j)])
            s = by_label[lab]
            choice = {}
            for e in procs:
                q = before[e - 1]
                if c.p.can_receive(q, t.msg) and e != step.sender:
                    choice[q] = after[e - 1]
                else:
                    choice[q] = q
            states = frozenset(after[e - 1] for e in procs)
            if j == i + 1:
                kind, res = "done", DONE
            else:
                kind, res = "plain", summary(states, qa, lab[1])
            parts_want[lab] = (kind, res, tuple(sorted(choice.items())))
        joined_lab = None
        new = None
        sender_dst = after[step.sender - 1]
        if sender_dst in c.action:
            delta = ((c.xq[t.src], -1), (c.xq[t.dst], 1))
        else:
            qb, jb = na(i + 1, step.sender)
            if (qb, jb) in r:
                joined_lab = (qb, r[(qb, jb)])
                kind, res, ch = parts_want[joined_lab]
                res = summary(set(res.print) | {sender_dst}, qb, joined_lab[1])
                parts_want[joined_lab] = ("joined", res, ch)
                delta = ((c.xq[t.src], -1), (c.xl[joined_lab], 1))
            else:
                used = labels(cs)
                if qb == c.qu:
                    k = 1
                else:
                    k = min(k for k in c.ids if (qb, k) not in used)
                r[(qb, jb)] = k
                new = summary({sender_dst}, qb, k)
                delta = ((c.xq[t.src], -1), (c.xl[(qb, k)], 1))
        want_dst = [res for kind, res, _ in parts_want.values() if res is not DONE]
        if new is not None:
            want_dst.append(new)
        want_dst = _cs_of(want_dst)
        edge = _find_t_edge(c, cs, t, tuple(sorted(delta)), want_dst, parts_want)
        if edge is None:
            raise AssertionError(f"no VASS transition matches step {i}")
        run.append(edge)
        nv = apply_delta(tuple(val), edge.delta)
        if nv is None:
            raise AssertionError("counter underflow while translating")
        val = list(nv)
        if isinstance(edge.dst, Smiley):
            run.append(c.edges(edge.dst)[0])
        cs = want_dst
        # drain the counters of summaries that just finished
        for lab, (kind, _, _) in parts_want.items():
            if kind == "done":
                drain = next(e for e in c.edges(cs) if e.meta.kind == "e" and e.meta.label == lab)
                amount = val[c.xl[lab]]
                run.extend([drain] * amount)
                val[c.xl[lab]] = 0
                val[c.xq[lab[0]]] += amount
        for (qa, j) in [key for key in r if key[1] == i + 1]:
            del r[(qa, j)]
        reprs.append((cs, tuple(val)))
        if check and check_representative(c, tr, i + 1, cs, tuple(val)) is None:
            raise AssertionError(f"S-configuration after step {i} is not a representative")
    if c.variant == "synchro":
        if cs != c.S_f:
            raise AssertionError("translation did not end on the final summary")
        run.append(next(e for e in c.edges(cs) if e.meta.kind == "final"))
        run.extend([c.edges(SF)[0]] * val[c.xl[(c.qu, 1)]])
    else:
        if cs != ():
            raise AssertionError("translation did not end without summaries")
        run.append(next(e for e in c.edges(cs) if e.meta.kind == "to_sf1"))
        run.append(c.edges(SF1)[0])
        run.extend([next(e for e in c.edges(SF) if e.meta.kind == "drain_f")] * n)
    return run


def _find_t_edge(c, cs, t, delta, want_dst, parts_want):
    for e in c.edges(cs):
        if e.meta.kind != "t" or e.meta.t != t or e.delta != delta:
            continue
        dst = e.dst.cs if isinstance(e.dst, Smiley) else e.dst
        if dst == want_dst:
            return e
    # several combinations can share (delta, dst); rebuild the one we need
    for e in _all_t_edges(c, cs, t):
        dst = e.dst.cs if isinstance(e.dst, Smiley) else e.dst
        if e.delta == delta and dst == want_dst and all(
                (st.kind, st.result, st.choices) == parts_want[s.label] for s, st in e.meta.parts):
            return e
    return None


def _all_t_edges(c, cs, t):
    """Every combination for one transition, without de-duplication."""
    p = c.p
    xq = c.xq
    steps = [_summary_successors(p, s, t) for s in cs]
    plain = [[st for st in opts if st.kind != "joined"] for opts in steps]
    if t.dst in c.action:
        delta = ((xq[t.src], -1), (xq[t.dst], 1))
        for combo in product(*plain):
            e = c._emit(cs, t, tuple(zip(cs, combo)), delta)
            if e is not None:
                yield e
        return
    for i, s in enumerate(cs):
        joins = [st for st in steps[i] if st.kind == "joined"]
        others = plain[:i] + [joins] + plain[i + 1:]
        delta = ((xq[t.src], -1), (c.xl[s.label], 1))
        for combo in product(*others):
            e = c._emit(cs, t, tuple(zip(cs, combo)), delta, joined=i)
            if e is not None:
                yield e
    used = labels(cs)
    for qa in c.Q_A:
        for k in c.ids:
            if (qa, k) in used:
                continue
            new = summary({t.dst}, qa, k)
            delta = ((xq[t.src], -1), (c.xl[(qa, k)], 1))
            for combo in product(*plain):
                e = c._emit(cs, t, tuple(zip(cs, combo)), delta, new=new)
                if e is not None:
                    yield e
