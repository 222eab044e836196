"""Decision procedures built on the summary constructions.

Only complete procedures answer "no": the repeated-coverability pipeline
(Karp-Miller plus circulation search), the Single-Wait-Only algorithm, and
a few structural shortcuts.  Bounded searches answer "unknown".
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .oracle import rbn_reachable_states, repcover_explicit
from .protocol import Protocol, Transition, check_single_wait_only, check_wait_only
from .semantics import Lasso, Semantics, Step, Trace, validate_lasso, validate_trace
from .summary import (
    S0, SF, Construction, EdgeInfo, Summary, Prepared, Smiley, labels, prepare,
    translate_run_to_execution, SimState,
)
from .vass import (
    Edge, KarpMiller, RunResult, VassConfig, apply_delta, bounded_reachability,
    repeated_coverability_vass, run_length_bound_log10,
)


@dataclass
class Verdict:
    answer: str  # "yes", "no" or "unknown"
    method: str
    witness: object = None  # Trace or Lasso over the original protocol
    bounds: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def yes(self) -> bool:
        return self.answer == "yes"

    def to_json(self) -> dict:
        d = {"answer": self.answer, "method": self.method}
        if self.witness is not None:
            d["witness"] = self.witness.to_json()
        if self.bounds:
            d["bounds"] = self.bounds
        if self.stats:
            d["stats"] = self.stats
        return d


# mapping executions of the normalized protocol back

def contract_trace(prep: Prepared, tr: Trace) -> tuple[Trace, list]:
    """Undo self-loop normalization; also returns old step index -> new index."""
    loops = prep.norm.loops
    tick = prep.norm.tick

    def state(q):
        return loops[q].src if q in loops else q

    configs = [tuple(state(q) for q in tr.configs[0])]
    steps = []
    index = []
    for k, s in enumerate(tr.steps):
        index.append(len(steps))
        if tick is not None and s.t.msg == tick:
            continue
        t = loops[s.t.dst] if s.t.dst in loops else s.t
        steps.append(Step(s.sender, t, s.receivers, dict(s.choices)))
        configs.append(tuple(state(q) for q in tr.configs[k + 1]))
    index.append(len(steps))
    return Trace(configs, steps), index


def _trivial_trace(p: Protocol) -> Trace:
    return Trace([(p.initial,)], [])


# eager-drain successors for bounded search

def _enabled_edges(con: Construction, loc, val):
    """Edges of ``loc`` whose sender counter is positive; Delta_t edges are
    built on demand, one send at a time."""
    yield from con.special_edges(loc)
    if isinstance(loc, tuple) and not isinstance(loc, Smiley):
        xq = con.xq
        for t in con.p.sends:
            if val[xq[t.src]] > 0:
                yield from con.t_edges(loc, t)


def _macro_successors(con: Construction):
    def succ(loc, val):
        for e in _enabled_edges(con, loc, val):
            kind = e.meta.kind
            if kind == "e":
                continue
            nv = apply_delta(val, e.delta)
            if nv is None:
                continue
            if kind == "drain_f":
                amount = min(val[i] for i, d in e.delta if d < 0)
                nv = list(val)
                for i, d in e.delta:
                    nv[i] += d * amount
                yield (e,) * amount, e.dst, tuple(nv)
            elif kind == "t" and not isinstance(e.dst, Smiley):
                drains, nv = _drain_all(con, e.dst, nv)
                yield (e, *drains), e.dst, nv
            else:
                yield (e,), e.dst, nv

    return succ


# With a fixed population at most n counters are nonzero, so the population
# searches keep valuations sparse: sorted (counter index, value) pairs.

def _sparse_apply(d: dict, delta) -> dict | None:
    nd = dict(d)
    for i, v in delta:
        k = nd.get(i, 0) + v
        if k < 0:
            return None
        if k:
            nd[i] = k
        else:
            nd.pop(i, None)
    return nd


def _sparse_drain(con: Construction, loc, d: dict):
    present = labels(loc)
    lab_of = con.label_of_index
    edges = []
    for i, k in sorted(d.items()):
        lab = lab_of.get(i)
        if lab is None or lab in present:
            continue
        j = con.xq[lab[0]]
        e = Edge(loc, tuple(sorted(((i, -1), (j, 1)))), loc, EdgeInfo("e", label=lab))
        edges.extend([e] * k)
        del d[i]
        d[j] = d.get(j, 0) + k
    return edges


def _drain_all(con: Construction, loc, val: tuple):
    d = {i: k for i, k in enumerate(val) if k}
    edges = _sparse_drain(con, loc, d)
    nv = [0] * len(val)
    for i, k in d.items():
        nv[i] = k
    return edges, tuple(nv)


def _sparse_successors(con: Construction):
    xq = con.xq

    def enabled(loc, d):
        yield from con.special_edges(loc)
        if isinstance(loc, tuple) and not isinstance(loc, Smiley):
            for t in con.p.sends:
                if d.get(xq[t.src], 0) > 0:
                    yield from con.t_edges(loc, t)

    def succ(loc, val):
        d = dict(val)
        for e in enabled(loc, d):
            kind = e.meta.kind
            if kind in ("e", "pump", "enter"):
                continue
            if kind == "drain_f":
                (i, _), = e.delta
                amount = d.get(i, 0)
                if not amount:
                    continue
                nd = dict(d)
                del nd[i]
                yield (e,) * amount, e.dst, tuple(sorted(nd.items())), False
                continue
            nd = _sparse_apply(d, e.delta)
            if nd is None:
                continue
            edges = (e,)
            dst = e.dst
            if kind == "t" and isinstance(dst, Smiley):
                back = con.special_edges(dst)[0]
                dst = dst.cs
                edges = edges + (back,) + tuple(_sparse_drain(con, dst, nd))
                yield edges, dst, tuple(sorted(nd.items())), True
                continue
            if kind == "t":
                edges = edges + tuple(_sparse_drain(con, dst, nd))
            yield edges, dst, tuple(sorted(nd.items())), False

    return succ


# Summaries with the same exit are interchangeable up to their ids, so the
# population searches run on classes: within each exit, ids are renumbered
# 1..m in order of print sets.  A class path is turned back into a real run
# one step at a time.

def _canon(con: Construction, loc, val: tuple):
    if not isinstance(loc, tuple) or isinstance(loc, Smiley) or not loc:
        return loc, val
    ren = {}
    out = []
    xl = con.xl
    k = 0
    prev = None
    for s in sorted(loc, key=lambda s: (s.exit, s.print)):
        k = k + 1 if s.exit == prev else 1
        prev = s.exit
        if s.id != k:
            ren[xl[s.label]] = xl[(s.exit, k)]
            s = Summary(s.print, s.exit, k)
        out.append(s)
    if not ren:
        return loc, val
    nv = tuple(sorted((ren.get(i, i), v) for i, v in val))
    return tuple(sorted(out, key=lambda s: (s.exit, s.id, s.print))), nv


def _class_successors(con: Construction):
    succ = _sparse_successors(con)

    def csucc(loc, val):
        for _, dst, nv, tagged in succ(loc, val):
            yield _canon(con, dst, nv), tagged

    return csucc


def _concretize(con: Construction, start, path):
    """Follow ``path`` = [(class, tagged), ...] from the concrete key ``start``."""
    succ = _sparse_successors(con)
    run = []
    key = start
    for cls, tagged in path:
        for edges, dst, nv, tg in succ(*key):
            if tg == tagged and _canon(con, dst, nv) == cls:
                run.extend(edges)
                key = (dst, nv)
                break
        else:
            raise AssertionError("class path has no concrete counterpart")
    return run, key


def _start_edges(con: Construction, n: int) -> list:
    pump = next(e for e in con.edges(S0) if e.meta.kind == "pump")
    enter = next(e for e in con.edges(S0) if e.meta.kind == "enter")
    return [pump] * n + [enter]


def _bounded_solve(con: Construction, counter_cap: int, step_cap: int, max_configs: int):
    target = VassConfig(SF, (0,) * con.dim)
    return bounded_reachability(con, target, counter_cap, step_cap,
                                successors=_macro_successors(con), max_configs=max_configs)


def _control_reaches(con: Construction, goal, limit: int) -> bool | None:
    """Is ``goal`` reachable in the control graph?  None if the slice is too big."""
    locs = con.reachable_locations(limit)
    if len(locs) >= limit:
        return None
    return goal in set(locs)


# Synchro

def solve_synchro(p: Protocol, q_f: str, n_max: int = 6, counter_cap: int | None = None,
                  step_cap: int = 10_000, max_configs: int = 100_000,
                  control_limit: int = 2_000) -> Verdict:
    """Synchronization through the summary VASS.

    Runs are searched population by population (n <= n_max); with
    ``counter_cap`` a search over all populations with counters capped
    follows.  "no" comes only from the control graph of the VASS.
    """
    if q_f not in p.states:
        raise ValueError(f"unknown state {q_f!r}")
    ok, bad = check_wait_only(p)
    if not ok:
        raise ValueError(f"protocol is not Wait-Only: {', '.join(bad)}")
    if q_f == p.initial:
        return Verdict("yes", "trivial", _trivial_trace(p))
    if p.initial in p.classification.waiting:
        # nobody can ever send: the initial configuration is the only one
        return Verdict("no", "structural")
    prep = prepare(p)
    if q_f in prep.protocol.classification.action:
        return solve_synchro_action(p, q_f, n_max, counter_cap, step_cap, max_configs,
                                    control_limit, prep=prep)
    con = Construction(prep, "synchro", q_f, canonical=True, prune=True, drains=False)
    return _finish_synchro(prep, con, q_f, n_max, counter_cap, step_cap, max_configs,
                           control_limit, "synchro-vass")


def _population_run(con: Construction, n: int, step_cap: int, max_configs: int):
    """Breadth-first search with exactly n processes; the total is conserved
    until s_f, so this graph is finite."""
    succ = _class_successors(con)
    root = ((), ((con.xq[con.p.initial], n),))
    goal = (SF, ())
    parent = {root: None}
    frontier = deque([(root, 0)])
    bounds = {"n": n, "step_cap": step_cap}
    found = None
    while frontier and found is None:
        key, depth = frontier.popleft()
        if depth >= step_cap:
            continue
        for nk, tagged in succ(*key):
            if nk in parent:
                continue
            parent[nk] = (key, tagged)
            if nk == goal:
                found = nk
                break
            if len(parent) >= max_configs:
                return RunResult("no-within-bounds", None, dict(bounds, max_configs=max_configs),
                                 {"explored": len(parent)})
            frontier.append((nk, depth + 1))
    if found is None:
        return RunResult("no-within-bounds", None, bounds, {"explored": len(parent)})
    path = []
    while parent[found] is not None:
        prev, tagged = parent[found]
        path.append((found, tagged))
        found = prev
    run, _ = _concretize(con, root, reversed(path))
    return RunResult("yes", _start_edges(con, n) + run, bounds, {"explored": len(parent)})


def _finish_synchro(prep, con, q_f, n_max, counter_cap, step_cap, max_configs, control_limit,
                    method):
    bounds = {"n_max": n_max, "step_cap": step_cap, "max_configs": max_configs}
    stats: dict = {"explored": 0}
    res = None
    for n in range(1, n_max + 1):
        budget = max_configs - stats["explored"]
        if budget <= 0:
            break
        res = _population_run(con, n, step_cap, budget)
        stats["explored"] += res.stats["explored"]
        if res.yes:
            stats["population"] = n
            break
    if (res is None or not res.yes) and counter_cap:
        bounds["counter_cap"] = counter_cap
        res = _bounded_solve(con, counter_cap, step_cap, max_configs)
        stats["explored"] += res.stats["explored"]
    if res is None or not res.yes:
        if _control_reaches(con, SF, control_limit) is False:
            return Verdict("no", method + "/control-graph", None, bounds,
                           {"locations": len(con.reachable_locations())})
        return Verdict("unknown", method, None, bounds, stats)
    exact = Construction(prep, con.variant, q_f)
    tr = translate_run_to_execution(exact, res.run)
    if not validate_trace(prep.protocol, tr, Semantics.BROADCAST, grounded=True) \
            or any(s != q_f for s in tr.last):
        raise AssertionError("translated execution does not synchronize")
    out, _ = contract_trace(prep, tr)
    stats["vass_run_length"] = len(res.run)
    return Verdict("yes", method, out, bounds, stats)


def solve_synchro_action(p: Protocol, q_f: str, n_max: int = 6, counter_cap: int | None = None,
                         step_cap: int = 10_000, max_configs: int = 100_000,
                         control_limit: int = 2_000, prep: Prepared | None = None) -> Verdict:
    prep = prep or prepare(p)
    if q_f not in prep.protocol.classification.action:
        raise ValueError(f"{q_f} is not an action state")
    if q_f == p.initial:
        return Verdict("yes", "trivial", _trivial_trace(p))
    con = Construction(prep, "action", q_f, canonical=True, prune=True, drains=False)
    v = _finish_synchro(prep, con, q_f, n_max, counter_cap, step_cap, max_configs,
                        control_limit, "action-vass")
    locs = con.known_locations
    v.bounds["sufficient_cap_log10"] = run_length_bound_log10(con.dim, locs + 3)
    v.bounds["sufficient_cap_inputs"] = {"counters": con.dim, "locations": locs + 3}
    if v.yes:
        # the way back is the reset transition, always available from (s_f, 0)
        v.stats["back_run"] = ["reset"]
    return v


# Repeated coverability

class _Projected:
    """A construction with the counters of sink action states removed.

    Such counters are never decremented except by drains into another
    ignored counter, so they do not affect which runs exist.
    """

    def __init__(self, con: Construction):
        self.con = con
        p = con.p
        senders = {t.src for t in p.sends}
        sinks = {q for q in con.Q_A if q not in senders}
        drop = {con.xq[q] for q in sinks} | {i for (q, _), i in con.xl.items() if q in sinks}
        keep = [i for i in range(con.dim) if i not in drop]
        self.remap = {old: new for new, old in enumerate(keep)}
        self.counters = tuple(con.counters[i] for i in keep)
        self.initial = con.initial
        self._cache: dict = {}

    def edges(self, loc):
        hit = self._cache.get(loc)
        if hit is None:
            hit = []
            for e in self.con.edges(loc):
                d = tuple((self.remap[i], v) for i, v in e.delta if i in self.remap)
                if not d and e.meta.kind == "e":
                    continue
                hit.append(Edge(e.src, d, e.dst, e))
            self._cache[loc] = hit
        return hit


def population_lasso(con: Construction, n: int, max_states: int = 200_000,
                     max_rounds: int = 10_000):
    """Explicit lasso search in the smiley VASS with exactly n processes.

    Any cycle of the partially explored graph is a real one, so strongly
    connected components are checked at geometric checkpoints as well as at
    the end.  Returns ((vass prefix, vass cycle) or None, exhausted?).
    """
    succ = _class_successors(con)
    root = ((), ((con.xq[con.p.initial], n),))
    ids = {root: 0}
    nodes = [root]
    adj: list = [[]]
    parent = [None]
    tagged_edges = []
    complete = True
    checkpoint = 1024
    i = 0
    found = None
    while i < len(nodes) and found is None:
        for key, tagged in succ(*nodes[i]):
            j = ids.get(key)
            if j is None:
                if len(nodes) >= max_states:
                    complete = False
                    continue
                j = ids[key] = len(nodes)
                nodes.append(key)
                adj.append([])
                parent.append((i, tagged))
            adj[i].append((j, tagged))
            if tagged:
                tagged_edges.append((i, j))
        i += 1
        if i == checkpoint and tagged_edges:
            checkpoint *= 2
            found = _tagged_cycle(adj, parent, tagged_edges)
            complete = complete and found is None
    if found is None:
        found = _tagged_cycle(adj, parent, tagged_edges)
    if found is None:
        return None, complete
    prefix, cycle = found
    pre, key = _concretize(con, root, [(nodes[j], t) for j, t in prefix])
    cyc = [(nodes[j], t) for j, t in cycle]
    starts = {key: 0}
    rounds = []
    for _ in range(max_rounds):
        run, key = _concretize(con, key, cyc)
        rounds.append(run)
        if key in starts:
            k = starts[key]
            pre += [e for r in rounds[:k] for e in r]
            return (_start_edges(con, n) + pre, [e for r in rounds[k:] for e in r]), complete
        starts[key] = len(rounds)
    raise AssertionError("class cycle does not close concretely")


def _tagged_cycle(adj, parent, tagged_edges):
    """A class lasso through a tagged edge: (prefix, cycle) as [(node, tagged)]."""
    if not tagged_edges:
        return None
    rows, cols = [], []
    for a, out in enumerate(adj):
        for b, _ in out:
            rows.append(a)
            cols.append(b)
    m = len(adj)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
    _, comp = connected_components(graph, directed=True, connection="strong")
    for a, b in tagged_edges:
        if comp[a] == comp[b]:
            return _root_path(parent, a), [(b, True)] + _path_within(adj, comp, b, a)
    return None


def _root_path(parent, a) -> list:
    out = []
    while parent[a] is not None:
        prev, tagged = parent[a]
        out.append((a, tagged))
        a = prev
    return out[::-1]


def _path_within(adj, comp, s, t) -> list:
    if s == t:
        return []
    prev = {s: None}
    q = deque([s])
    while q:
        a = q.popleft()
        for b, tagged in adj[a]:
            if comp[b] != comp[s] or b in prev:
                continue
            prev[b] = (a, tagged)
            if b == t:
                out = []
                while prev[b] is not None:
                    a2, tg = prev[b]
                    out.append((b, tg))
                    b = a2
                return out[::-1]
            q.append(b)
    raise AssertionError("no path inside a strongly connected component")


def solve_repcover(p: Protocol, t_f: Transition, n_max: int = 6, max_states: int = 200_000,
                   max_nodes: int = 50_000, max_cycle_repeats: int = 10_000) -> Verdict:
    """Repeated coverability through the smiley VASS.

    A cheap necessary condition answers some "no" instances; a lasso search
    with growing populations finds "yes" witnesses; Karp-Miller plus a
    circulation search is the complete fallback, within a node budget.
    """
    ok, bad = check_wait_only(p)
    if not ok:
        raise ValueError(f"protocol is not Wait-Only: {', '.join(bad)}")
    if t_f not in p.transitions:
        raise ValueError(f"{t_f} is not a transition of the protocol")
    if p.initial in p.classification.waiting:
        return Verdict("no", "structural")
    if t_f not in swo_core(p):
        return Verdict("no", "transition-core")
    prep = prepare(p)
    tf = prep.norm.lift(t_f)
    con = Construction(prep, "smiley", tf, canonical=True, prune=True, drains=False)
    bounds = {"n_max": n_max, "max_states": max_states, "max_nodes": max_nodes}
    stats: dict = {}
    for n in range(1, n_max + 1):
        found, _ = population_lasso(con, n, max_states)
        if found:
            stats["population"] = n
            return _repcover_yes(prep, con, tf, found[0], found[1], "smiley-vass/population",
                                 bounds, stats, max_cycle_repeats)
    full = Construction(prep, "smiley", tf, canonical=True, prune=True)
    proj = _Projected(full)
    km = KarpMiller(proj, max_nodes)
    res = repeated_coverability_vass(proj, lambda loc: isinstance(loc, Smiley), km=km)
    stats.update(res.stats, counters=len(proj.counters))
    if res.answer == "no":
        return Verdict("no", "smiley-vass/karp-miller", None, bounds, stats)
    if not res.yes:
        return Verdict("unknown", "smiley-vass/karp-miller", None, bounds, stats)
    prefix = [e.meta for e in res.lasso.prefix]
    cycle = [e.meta for e in res.lasso.cycle]
    return _repcover_yes(prep, full, tf, prefix, cycle, "smiley-vass/karp-miller", bounds, stats,
                         max_cycle_repeats)


def _repcover_yes(prep, con, tf, prefix, cycle, method, bounds, stats, max_cycle_repeats):
    lasso = lasso_from_vass(prep, con, prefix, cycle, tf, max_cycle_repeats)
    if lasso is None:
        raise AssertionError("VASS lasso did not close as a protocol lasso")
    v = validate_lasso(prep.protocol, lasso, tf)
    if not v:
        raise AssertionError(f"translated lasso is invalid: {v.reason}")
    stats = dict(stats, vass_prefix=len(prefix), vass_cycle=len(cycle))
    return Verdict("yes", method, contract_lasso(prep, lasso), bounds, stats)


def lasso_from_vass(prep: Prepared, con: Construction, prefix: list, cycle: list,
                    tf: Transition, max_repeats: int) -> Lasso | None:
    """Replay a VASS lasso in the protocol, repeating the cycle until the
    configuration and witness map come back."""
    n = sum(1 for e in prefix if e.meta.kind == "pump")
    sim = SimState(con, n)
    for e in prefix:
        sim.apply(e)
    seen = {}
    marks = []
    for rep in range(max_repeats + 1):
        key = (tuple(sim.config), tuple(sorted(sim.f.items())))
        if key in seen:
            start = marks[seen[key]]
            tr = sim.trace()
            for e in _takers(prep.protocol, tr, start, tf):
                return Lasso(tr, start, e)
            return None
        seen[key] = rep
        marks.append(len(sim.steps))
        for e in cycle:
            sim.apply(e)
    return None


def _takers(p, tr: Trace, start: int, tf: Transition) -> list:
    out = []
    for e in range(1, tr.n + 1):
        if Lasso(tr, start, e).takes(p, tf):
            out.append(e)
    return out


def contract_lasso(prep: Prepared, lasso: Lasso) -> Lasso:
    tr, index = contract_trace(prep, lasso.trace)
    return Lasso(tr, index[lasso.cycle_start], lasso.tracked)


# Single-Wait-Only repeated coverability under reconfigurable semantics

def rbn_saturate(p: Protocol) -> frozenset:
    return rbn_reachable_states(p)


def swo_core(p: Protocol) -> frozenset:
    """Greatest set R of transitions inside the saturated states such that
    every reception in R is fed by a send in R and every transition of R
    lies on a cycle of R."""
    reach = rbn_saturate(p)
    r = {t for t in p.transitions if t.src in reach and t.dst in reach}
    while True:
        sent = {t.msg for t in r if t.is_send}
        r2 = {t for t in r if t.is_send or t.msg in sent}
        g = nx.MultiDiGraph()
        for t in r2:
            g.add_edge(t.src, t.dst)
        comp = {}
        for k, scc in enumerate(nx.strongly_connected_components(g)):
            for q in scc:
                comp[q] = k
        r2 = {t for t in r2 if comp[t.src] == comp[t.dst]}
        if r2 == r:
            return frozenset(r)
        r = r2


def swo_core_valid(r) -> bool:
    """Conditions (i) and (ii) on a transition set."""
    sent = {t.msg for t in r if t.is_send}
    if any(not t.is_send and t.msg not in sent for t in r):
        return False
    g = nx.MultiDiGraph()
    for t in r:
        g.add_edge(t.src, t.dst)
    comp = {}
    for k, scc in enumerate(nx.strongly_connected_components(g)):
        for q in scc:
            comp[q] = k
    return all(comp[t.src] == comp[t.dst] for t in r)


def solve_repcover_swo(p: Protocol, t_f: Transition, witness_n: int = 0) -> Verdict:
    """Polynomial-time answer for Single-Wait-Only protocols.

    With ``witness_n`` > 0 a lasso is searched with the explicit oracle up
    to that many processes and attached to a yes verdict when found.
    """
    ok, bad = check_single_wait_only(p)
    if not ok:
        raise ValueError(f"protocol is not Single-Wait-Only: {', '.join(bad)}")
    if t_f not in p.transitions:
        raise ValueError(f"{t_f} is not a transition of the protocol")
    core = swo_core(p)
    stats = {"saturated_states": len(rbn_saturate(p)), "core_transitions": len(core)}
    if t_f not in core:
        return Verdict("no", "swo-rbn", None, {}, stats)
    witness = None
    if witness_n > 0:
        res = repcover_explicit(p, t_f, n_max=witness_n)
        if res.yes:
            witness = res.witness
    return Verdict("yes", "swo-rbn", witness, {}, stats)
