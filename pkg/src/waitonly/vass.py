"""Vector addition systems with states.

Explicit VASS and the lazily generated ones built from protocols share one
interface: ``counters`` (ordered names), ``initial`` and ``edges(loc)``.
Deltas are sparse tuples of (counter index, value) pairs and valuations are
dense tuples.  Karp-Miller labels use ``OMEGA`` (math.inf) for unbounded
components.
"""

from __future__ import annotations

import math
import re
import sys
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, NamedTuple

import networkx as nx
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .protocol import ParseError, strip_comment, tokenize_line

OMEGA = math.inf
FORMAT = 1


class Edge(NamedTuple):
    src: Hashable
    delta: tuple  # sparse: ((counter index, value), ...)
    dst: Hashable
    meta: object = None


class VassError(ValueError):
    pass


def apply_delta(val: tuple, delta: tuple) -> tuple | None:
    """val + delta, or None when a component would become negative."""
    out = list(val)
    for i, d in delta:
        v = out[i] + d
        if v < 0:
            return None
        out[i] = v
    return tuple(out)


@dataclass
class Vass:
    """An explicit VASS with named counters."""

    name: str
    counters: tuple
    initial: Hashable
    transitions: list = field(default_factory=list)  # list of Edge
    locations: frozenset = frozenset()

    def __post_init__(self):
        locs = set(self.locations) | {self.initial}
        for e in self.transitions:
            locs.add(e.src)
            locs.add(e.dst)
        self.locations = frozenset(locs)
        self._out: dict = {}
        for e in self.transitions:
            self._out.setdefault(e.src, []).append(e)

    def edges(self, loc) -> list:
        return self._out.get(loc, [])

    @property
    def dim(self) -> int:
        return len(self.counters)

    def delta_dict(self, e: Edge) -> dict:
        return {self.counters[i]: v for i, v in e.delta}

    @staticmethod
    def build(name: str, counters: Iterable[str], initial, transitions, locations=()) -> "Vass":
        """transitions: iterable of (src, {counter: value}, dst)."""
        counters = tuple(counters)
        idx = {c: i for i, c in enumerate(counters)}
        edges = []
        for src, d, dst in transitions:
            delta = tuple(sorted((idx[c], v) for c, v in d.items() if v))
            edges.append(Edge(src, delta, dst))
        return Vass(name, counters, initial, edges, frozenset(locations))


@dataclass(frozen=True)
class VassConfig:
    location: Hashable
    valuation: tuple


def vass_step(v, c: VassConfig, e: Edge) -> VassConfig:
    if c.location != e.src:
        raise VassError(f"transition leaves {e.src!r}, configuration is at {c.location!r}")
    new = apply_delta(c.valuation, e.delta)
    if new is None:
        raise VassError("a counter would become negative")
    return VassConfig(e.dst, new)


def zero(v) -> tuple:
    return (0,) * len(v.counters)


def replay_run(v, run: list, start: VassConfig | None = None) -> list:
    """Configurations visited by a run; raises VassError if it is not a run."""
    c = start or VassConfig(v.initial, zero(v))
    out = [c]
    for e in run:
        c = vass_step(v, c, e)
        out.append(c)
    return out


# bounded reachability

@dataclass
class RunResult:
    answer: str  # "yes" or "no-within-bounds"
    run: list | None = None
    bounds: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def yes(self) -> bool:
        return self.answer == "yes"


def _default_succ(v):
    def succ(loc, val):
        for e in v.edges(loc):
            new = apply_delta(val, e.delta)
            if new is not None:
                yield (e,), e.dst, new
    return succ


def bounded_reachability(v, target, counter_cap: int, step_cap: int,
                         start: VassConfig | None = None, successors=None,
                         canon=None, max_configs: int | None = None) -> RunResult:
    """BFS over configurations with every counter <= counter_cap.

    ``target`` is a VassConfig or a predicate on (location, valuation).
    ``successors(loc, val)`` may yield macro steps (a tuple of edges each);
    ``canon`` maps a configuration to a representative of its symmetry class.
    The step cap bounds the number of macro steps.
    """
    succ = successors or _default_succ(v)
    if isinstance(target, VassConfig):
        goal = (target.location, target.valuation)
        is_goal = lambda loc, val: (loc, val) == goal  # noqa: E731
    else:
        is_goal = target
    start = start or VassConfig(v.initial, zero(v))
    key0 = (start.location, start.valuation)
    if canon:
        key0 = canon(*key0)
    parents = {key0: None}
    frontier = deque([(start.location, start.valuation, 0)])
    bounds = {"counter_cap": counter_cap, "step_cap": step_cap}
    if is_goal(start.location, start.valuation):
        return RunResult("yes", [], bounds, {"explored": 1})
    while frontier:
        loc, val, depth = frontier.popleft()
        if depth >= step_cap:
            continue
        here = canon(loc, val) if canon else (loc, val)
        for edges, nloc, nval in succ(loc, val):
            if max(nval, default=0) > counter_cap:
                continue
            key = canon(nloc, nval) if canon else (nloc, nval)
            if key in parents:
                continue
            parents[key] = (here, edges, (loc, val), (nloc, nval))
            if is_goal(nloc, nval):
                return RunResult("yes", _rebuild(v, parents, key, start, succ, canon), bounds,
                                 {"explored": len(parents)})
            frontier.append((nloc, nval, depth + 1))
            if max_configs is not None and len(parents) >= max_configs:
                return RunResult("no-within-bounds", None, dict(bounds, max_configs=max_configs),
                                 {"explored": len(parents)})
    return RunResult("no-within-bounds", None, bounds, {"explored": len(parents)})


def _rebuild(v, parents, key, start, succ, canon):
    """Recover a concrete run; with symmetry reduction, re-find matching edges."""
    chain = []
    while parents[key] is not None:
        prev, edges, raw_from, raw_to = parents[key]
        chain.append((edges, raw_from, raw_to))
        key = prev
    chain.reverse()
    if not canon:
        return [e for edges, _, _ in chain for e in edges]
    # the stored edges start at some member of the class; walk the real run
    run = []
    loc, val = start.location, start.valuation
    for _, _, raw_to in chain:
        want = canon(*raw_to)
        for edges, nloc, nval in succ(loc, val):
            if canon(nloc, nval) == want:
                run.extend(edges)
                loc, val = nloc, nval
                break
        else:  # pragma: no cover - would mean canon is not a symmetry
            raise RuntimeError("symmetry reconstruction failed")
    return run


def mutual_reachability(v, loc_f, counter_cap: int, step_cap: int, **kw):
    there = bounded_reachability(v, VassConfig(loc_f, zero(v)), counter_cap, step_cap, **kw)
    if not there.yes:
        return there, None
    back = bounded_reachability(v, VassConfig(v.initial, zero(v)), counter_cap, step_cap,
                                start=VassConfig(loc_f, zero(v)), **kw)
    return there, back


# Karp-Miller

@dataclass
class KMNode:
    loc: Hashable
    val: tuple
    parent: int
    edge: Edge | None
    accels: list  # [(ancestor id, frozenset of newly omega indices)]
    same_loc_anc: int  # nearest proper ancestor with the same location, or -1


class KarpMiller:
    """Karp-Miller coverability graph (tree edges plus merge edges)."""

    def __init__(self, v, max_nodes: int | None = None, dfs: bool = False):
        self.v = v
        self.dim = len(v.counters)
        self.nodes: list[KMNode] = []
        self.index: dict = {}
        self.graph_edges: list = []  # (from id, Edge, to id)
        self.complete = True
        self.dfs = dfs
        self._build(max_nodes)

    def _build(self, max_nodes):
        root = KMNode(self.v.initial, (0,) * self.dim, -1, None, [], -1)
        self.nodes.append(root)
        self.index[(root.loc, root.val)] = 0
        last_at: dict = {}
        work = deque([0])
        while work:
            nid = work.pop() if self.dfs else work.popleft()
            node = self.nodes[nid]
            for e in self.v.edges(node.loc):
                pre = apply_delta(node.val, e.delta)
                if pre is None:
                    continue
                new = list(pre)
                accels = []
                changed = True
                while changed:
                    changed = False
                    a = nid if node.loc == e.dst else self._same_loc_ancestor(nid, e.dst)
                    while a >= 0:
                        av = self.nodes[a].val
                        if all(x <= y for x, y in zip(av, new)) and tuple(new) != av:
                            grow = frozenset(i for i in range(self.dim)
                                             if av[i] < new[i] and new[i] != OMEGA)
                            if grow:
                                for i in grow:
                                    new[i] = OMEGA
                                accels.append((a, grow))
                                changed = True
                        a = self.nodes[a].same_loc_anc
                label = (e.dst, tuple(new))
                hit = self.index.get(label)
                if hit is not None:
                    self.graph_edges.append((nid, e, hit))
                    continue
                if max_nodes is not None and len(self.nodes) >= max_nodes:
                    self.complete = False
                    continue
                anc = nid if node.loc == e.dst else self._same_loc_ancestor(nid, e.dst)
                child = KMNode(e.dst, tuple(new), nid, e, accels, anc)
                cid = len(self.nodes)
                self.nodes.append(child)
                self.index[label] = cid
                self.graph_edges.append((nid, e, cid))
                work.append(cid)

    def _same_loc_ancestor(self, nid: int, loc) -> int:
        """Nearest node on the root path of nid (inclusive) at location loc."""
        while nid >= 0:
            n = self.nodes[nid]
            if n.loc == loc:
                return nid
            nid = n.parent
        return -1

    def covers(self, loc, u: Iterable[int]) -> bool:
        u = tuple(u)
        return any(n.loc == loc and all(x >= y for x, y in zip(n.val, u)) for n in self.nodes)

    def omega_set(self, nid: int) -> frozenset:
        return frozenset(i for i, x in enumerate(self.nodes[nid].val) if x == OMEGA)

    # turning a node into a concrete run

    def _tree_path(self, a: int, b: int) -> list:
        """Edges on the tree path from ancestor a down to b."""
        out = []
        while b != a:
            n = self.nodes[b]
            out.append(n.edge)
            b = n.parent
            if b < 0:
                raise RuntimeError("not an ancestor")
        return out[::-1]

    def realize(self, nid: int, demand: dict | None = None) -> list:
        """A run from the root reaching nid's location with finite components
        equal to the label and omega components at least ``demand``."""
        demand = dict(demand or {})
        pieces = []
        while nid != 0:
            node = self.nodes[nid]
            par = self.nodes[node.parent]
            pre = apply_delta(par.val, node.edge.delta)
            omega_par = frozenset(i for i, x in enumerate(par.val) if x == OMEGA)
            tail = []
            if node.accels:
                stage = [omega_par]
                for _, grow in node.accels:
                    stage.append(stage[-1] | grow)
                for k in range(len(node.accels) - 1, -1, -1):
                    a, grow = node.accels[k]
                    loop = self._tree_path(a, node.parent) + [node.edge]
                    av = self.nodes[a].val
                    reps = 0
                    for i in grow:
                        gain = pre[i] - av[i]
                        need = demand.get(i, 0) - pre[i]
                        if need > 0:
                            reps = max(reps, -(-need // gain))
                    seq = loop * reps
                    demand = _hurdle(seq, demand, stage[k])
                    tail = seq + tail
            else:
                demand = {i: d for i, d in demand.items() if i in omega_par}
            demand = _hurdle([node.edge], demand, omega_par)
            pieces.append([node.edge] + tail)
            nid = node.parent
        run = []
        for p in reversed(pieces):
            run.extend(p)
        return run


def _hurdle(seq: list, final: dict, comps: frozenset) -> dict:
    """Least values on ``comps`` before seq so that seq runs and ends >= final."""
    need = {i: max(final.get(i, 0), 0) for i in comps}
    for e in reversed(seq):
        for i, d in e.delta:
            if i in need:
                need[i] = max(need[i], 0) - d
        for i in need:
            if need[i] < 0:
                need[i] = 0
    return need


def karp_miller(v, max_nodes: int | None = None) -> KarpMiller:
    return KarpMiller(v, max_nodes)


# repeated coverability

@dataclass
class LassoRun:
    prefix: list
    cycle: list

    def configs(self, v) -> tuple[list, list]:
        pre = replay_run(v, self.prefix)
        cyc = replay_run(v, self.cycle, pre[-1])
        return pre, cyc


@dataclass
class RepCovResult:
    answer: str  # "yes" or "no"
    lasso: LassoRun | None = None
    stats: dict = field(default_factory=dict)

    @property
    def yes(self) -> bool:
        return self.answer == "yes"


def repeated_coverability_vass(v, is_target, km: KarpMiller | None = None,
                               max_nodes: int | None = None) -> RepCovResult:
    """Is there a run (l0,0) ->* (l,u) ->+ (l,u') with u' >= u whose cycle
    visits a target location?  Complete when the Karp-Miller graph is.

    ``is_target`` is a location predicate or a single location.
    """
    if not callable(is_target):
        tgt = is_target
        is_target = lambda loc: loc == tgt  # noqa: E731
    km = km or KarpMiller(v, max_nodes)
    g = nx.DiGraph()
    g.add_nodes_from(range(len(km.nodes)))
    for a, _, b in km.graph_edges:
        g.add_edge(a, b)
    stats = {"km_nodes": len(km.nodes), "km_edges": len(km.graph_edges)}
    by_scc: dict = {}
    comp_of = {}
    for k, scc in enumerate(nx.strongly_connected_components(g)):
        for n in scc:
            comp_of[n] = k
    for idx, (a, e, b) in enumerate(km.graph_edges):
        if comp_of[a] == comp_of[b]:
            by_scc.setdefault(comp_of[a], []).append(idx)
    for k, edge_ids in sorted(by_scc.items()):
        nodes = {km.graph_edges[i][0] for i in edge_ids}
        if not any(is_target(km.nodes[n].loc) for n in nodes):
            continue
        omega = km.omega_set(next(iter(nodes)))
        found = _cycle_search(km, edge_ids, omega, is_target)
        if found is None:
            continue
        flows, support = found
        cycle, start = _euler_cycle(km, support, flows, is_target)
        need = _hurdle(cycle, {}, omega)
        prefix = km.realize(start, need)
        stats["lp_component"] = k
        return RepCovResult("yes", LassoRun(prefix, cycle), stats)
    if not km.complete:
        return RepCovResult("unknown", None, dict(stats, incomplete=True))
    return RepCovResult("no", None, stats)


def _max_support(km, edge_ids, omega) -> list:
    """Edges that carry flow in some circulation with nonnegative effect on omega."""
    m = len(edge_ids)
    nodes = sorted({km.graph_edges[i][0] for i in edge_ids} | {km.graph_edges[i][2] for i in edge_ids})
    nix = {n: j for j, n in enumerate(nodes)}
    om = sorted(omega)
    oix = {c: j for j, c in enumerate(om)}
    # variables: f (m) then y (m); maximize sum y
    c = np.concatenate([np.zeros(m), -np.ones(m)])
    a_eq = np.zeros((len(nodes), 2 * m))
    for j, i in enumerate(edge_ids):
        a, _, b = km.graph_edges[i]
        a_eq[nix[a], j] -= 1
        a_eq[nix[b], j] += 1
    rows = []
    if om:
        eff = np.zeros((len(om), 2 * m))
        for j, i in enumerate(edge_ids):
            for ci, d in km.graph_edges[i][1].delta:
                if ci in oix:
                    eff[oix[ci], j] -= d  # -effect <= 0
        rows.append(eff)
    link = np.zeros((m, 2 * m))
    for j in range(m):
        link[j, m + j] = 1
        link[j, j] = -1  # y - f <= 0
    rows.append(link)
    a_ub = np.vstack(rows)
    b_ub = np.zeros(a_ub.shape[0])
    bounds = [(0, None)] * m + [(0, 1)] * m
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.zeros(len(nodes)),
                  bounds=bounds, method="highs")
    if res.status != 0:
        return []
    y = res.x[m:]
    return [edge_ids[j] for j in range(m) if y[j] > 0.5]


def _cycle_search(km, edge_ids, omega, is_target):
    """Kosaraju-Sullivan style decomposition: shrink to maximal supports until
    one is strongly connected; succeed when it touches a target location."""
    work = [list(edge_ids)]
    while work:
        eids = work.pop()
        support = _max_support(km, eids, omega)
        if not support:
            continue
        sub = nx.DiGraph()
        for i in support:
            a, _, b = km.graph_edges[i]
            sub.add_edge(a, b)
        comps = list(nx.strongly_connected_components(sub))
        where = {}
        for k, cset in enumerate(comps):
            for n in cset:
                where[n] = k
        groups: dict = {}
        for i in support:
            a, _, b = km.graph_edges[i]
            if where[a] == where[b]:
                groups.setdefault(where[a], []).append(i)
        if len(groups) == 1 and sum(len(g) for g in groups.values()) == len(support):
            (k, grp), = groups.items()
            if any(is_target(km.nodes[n].loc) for n in comps[k]):
                flows = _integer_flow(km, grp, omega)
                if flows is not None:
                    return flows, grp
            continue
        for grp in groups.values():
            nodes = {km.graph_edges[i][0] for i in grp}
            if any(is_target(km.nodes[n].loc) for n in nodes):
                work.append(grp)
    return None


def _integer_flow(km, edge_ids, omega) -> dict | None:
    m = len(edge_ids)
    nodes = sorted({km.graph_edges[i][0] for i in edge_ids} | {km.graph_edges[i][2] for i in edge_ids})
    nix = {n: j for j, n in enumerate(nodes)}
    om = sorted(omega)
    oix = {c: j for j, c in enumerate(om)}
    cons = []
    a_eq = np.zeros((len(nodes), m))
    for j, i in enumerate(edge_ids):
        a, _, b = km.graph_edges[i]
        a_eq[nix[a], j] -= 1
        a_eq[nix[b], j] += 1
    cons.append(LinearConstraint(a_eq, 0, 0))
    if om:
        eff = np.zeros((len(om), m))
        for j, i in enumerate(edge_ids):
            for ci, d in km.graph_edges[i][1].delta:
                if ci in oix:
                    eff[oix[ci], j] += d
        cons.append(LinearConstraint(eff, 0, np.inf))
    res = milp(np.ones(m), constraints=cons, integrality=np.ones(m),
               bounds=Bounds(np.ones(m), np.full(m, np.inf)))
    if res.status != 0 or res.x is None:
        return None
    return {edge_ids[j]: int(round(res.x[j])) for j in range(m)}


def _euler_cycle(km, support, flows, is_target):
    mg = nx.MultiDiGraph()
    for i in support:
        a, _, b = km.graph_edges[i]
        for _ in range(flows[i]):
            mg.add_edge(a, b, eid=i)
    start = next(n for n in sorted(mg.nodes) if is_target(km.nodes[n].loc))
    cycle = [km.graph_edges[mg.edges[u, w, k]["eid"]][1]
             for u, w, k in nx.eulerian_circuit(mg, source=start, keys=True)]
    return cycle, start


def bounded_lasso_search(v, is_target, counter_cap: int) -> bool:
    """Brute-force oracle: a self-covering lasso among configs with counters <= cap."""
    if not callable(is_target):
        tgt = is_target
        is_target = lambda loc: loc == tgt  # noqa: E731
    start = (v.initial, zero(v))
    seen = {start}
    q = deque([start])
    succ: dict = {}
    while q:
        c = q.popleft()
        out = []
        for e in v.edges(c[0]):
            nv = apply_delta(c[1], e.delta)
            if nv is None or max(nv, default=0) > counter_cap:
                continue
            n = (e.dst, nv)
            out.append(n)
            if n not in seen:
                seen.add(n)
                q.append(n)
        succ[c] = out
    for c in seen:
        # search (config, visited-target) from c for c' >= c at the same location
        st = (c, is_target(c[0]))
        vis = {st}
        q = deque([st])
        while q:
            (x, flag) = q.popleft()
            for y in succ.get(x, ()):
                f2 = flag or is_target(y[0])
                if f2 and y[0] == c[0] and all(a >= b for a, b in zip(y[1], c[1])):
                    return True
                if (y, f2) not in vis:
                    vis.add((y, f2))
                    q.append((y, f2))
    return False


def bounded_cover_set(v, counter_cap: int) -> set:
    """Reachable configurations with every counter <= cap (brute force)."""
    start = (v.initial, zero(v))
    seen = {start}
    q = deque([start])
    while q:
        loc, val = q.popleft()
        for e in v.edges(loc):
            nv = apply_delta(val, e.delta)
            if nv is None or max(nv, default=0) > counter_cap:
                continue
            if (e.dst, nv) not in seen:
                seen.add((e.dst, nv))
                q.append((e.dst, nv))
    return seen


# the length bound for mutual reachability runs

def run_length_bound(num_counters: int, num_locations: int) -> int:
    """17 (|X|+3)^2 x^(15 (|X|+3)^(|X|+5)) with x = (1 + 2 (|Loc|+1)^2)^2."""
    if num_counters < 0 or num_locations < 0:
        raise ValueError("sizes must be nonnegative")
    xs = num_counters + 3
    x = (1 + 2 * (num_locations + 1) ** 2) ** 2
    return 17 * xs ** 2 * x ** (15 * xs ** (num_counters + 5))


def run_length_bound_log10(num_counters: int, num_locations: int) -> float:
    xs = num_counters + 3
    x = (1 + 2 * (num_locations + 1) ** 2) ** 2
    return math.log10(17 * xs ** 2) + 15 * xs ** (num_counters + 5) * math.log10(x)


def big_to_str(n: int) -> str:
    limit = getattr(sys, "get_int_max_str_digits", lambda: 0)()
    if limit and n.bit_length() > 3 * limit:
        sys.set_int_max_str_digits(0)
        try:
            return str(n)
        finally:
            sys.set_int_max_str_digits(limit)
    return str(n)


# DSL

_UPDATE = re.compile(r"([A-Za-z][A-Za-z0-9_]*)([+-])=(\d+)\Z")


def parse_vass(text: str) -> Vass:
    name = initial = None
    counters = None
    locations = set()
    trans = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = tokenize_line(raw)
        if not toks:
            continue
        head, col = toks[0]
        args = [t for t, _ in toks[1:]]
        if head == "format":
            if args != ["1"]:
                raise ParseError("unsupported format version", lineno, col)
            continue
        if head == "vass":
            if len(args) != 1:
                raise ParseError("expected: vass <name>", lineno, col)
            name = args[0]
        elif head == "init":
            if len(args) != 1:
                raise ParseError("expected: init <location>", lineno, col)
            initial = args[0]
        elif head == "counters":
            counters = tuple(args)
            if len(set(counters)) != len(counters):
                raise ParseError("duplicate counter", lineno, col)
        elif head == "locations":
            locations |= set(args)
        elif head == "trans":
            body = strip_comment(raw)
            m = re.match(r"\s*trans\s+(\S+)\s*\[(.*)\]\s*(\S+)\s*\Z", body)
            if not m:
                raise ParseError("expected: trans <src> [updates] <dst>", lineno, col)
            d: dict = {}
            for upd in m.group(2).replace(",", " ").split():
                um = _UPDATE.match(upd)
                if not um:
                    raise ParseError(f"bad update {upd!r}", lineno, col)
                c, sign, k = um.group(1), um.group(2), int(um.group(3))
                d[c] = d.get(c, 0) + (k if sign == "+" else -k)
            trans.append((m.group(1), d, m.group(3), lineno))
        else:
            raise ParseError(f"unknown directive {head!r}", lineno, col)
    if name is None:
        raise ParseError("missing vass declaration")
    if initial is None:
        raise ParseError("missing init declaration")
    counters = counters or ()
    for _, d, _, lineno in trans:
        for c in d:
            if c not in counters:
                raise ParseError(f"unknown counter {c!r}", lineno, 1)
    return Vass.build(name, counters, initial, [(s, d, t) for s, d, t, _ in trans], locations)


def _delta_text(counters, delta) -> str:
    parts = []
    for i, d in delta:
        parts.append(f"{counters[i]}{'+' if d > 0 else '-'}={abs(d)}")
    return "[" + " ".join(parts) + "]"


def serialize_vass(v: Vass, loc_name=str) -> str:
    lines = ["format 1", f"vass {v.name}", f"init {loc_name(v.initial)}",
             "counters " + " ".join(v.counters)]
    for e in sorted(v.transitions, key=lambda e: (loc_name(e.src), loc_name(e.dst), e.delta)):
        lines.append(f"trans {loc_name(e.src)} {_delta_text(v.counters, e.delta)} {loc_name(e.dst)}")
    return "\n".join(lines) + "\n"


def run_to_json(v, run: list, loc_name=str) -> dict:
    return {"format": FORMAT,
            "steps": [{"src": loc_name(e.src),
                       "delta": {v.counters[i]: d for i, d in e.delta},
                       "dst": loc_name(e.dst)} for e in run]}


def split_unit(v: Vass) -> Vass:
    """Rewrite every transition into a chain of unit updates.

    Decrements come first so the chain is enabled exactly when the original
    transition is.  A zero update becomes +x then -x on the first counter.
    """
    if not v.counters:
        raise VassError("a VASS without counters cannot be split into unit updates")
    edges = []
    k = 0
    for e in v.transitions:
        units = []
        for i, d in e.delta:
            if d < 0:
                units.extend([(i, -1)] * (-d))
        for i, d in e.delta:
            if d > 0:
                units.extend([(i, 1)] * d)
        if not units:
            units = [(0, 1), (0, -1)]
        if len(units) == 1:
            edges.append(Edge(e.src, (units[0],), e.dst))
            continue
        prev = e.src
        for j, u in enumerate(units):
            if j == len(units) - 1:
                nxt = e.dst
            else:
                k += 1
                nxt = f"{e.src}_{e.dst}_s{k}"
            edges.append(Edge(prev, (u,), nxt))
            prev = nxt
    return Vass(v.name, v.counters, v.initial, edges, v.locations)


def is_unit(v: Vass) -> bool:
    return all(len(e.delta) == 1 and abs(e.delta[0][1]) == 1 for e in v.transitions)
