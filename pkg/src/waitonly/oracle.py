"""Bounded explicit-state exploration over the counting abstraction.

This is the ground truth every symbolic construction is checked against.
Configurations are multisets of states, optionally with one tracked
process kept apart (needed to speak about "the same process" taking a
transition infinitely often).
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .protocol import Protocol, Transition
from .semantics import Lasso, Semantics, Step, Trace

if os.environ.get("WAITONLY_PURE_PYTHON"):
    from ._kernel_py import expand as _expand
    KERNEL = "python"
else:
    try:
        from ._kernel import expand as _expand
        KERNEL = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        from ._kernel_py import expand as _expand
        KERNEL = "python"


class Compiled:
    """Integer tables of a protocol in the layout the kernel expects."""

    def __init__(self, p: Protocol):
        self.protocol = p
        self.states = tuple(sorted(p.states))
        self.index = {s: i for i, s in enumerate(self.states)}
        msgs = tuple(sorted(p.messages))
        self.msg_index = {m: i for i, m in enumerate(msgs)}
        self.send_list = p.sends
        self.sends = tuple((self.index[t.src], self.msg_index[t.msg], self.index[t.dst])
                           for t in self.send_list)
        recv = [[] for _ in msgs]
        for s, by_msg in sorted(p.recv_targets.items()):
            for m, targets in sorted(by_msg.items()):
                recv[self.msg_index[m]].append(
                    (self.index[s], tuple(self.index[d] for d in targets)))
        self.recv = tuple(tuple(r) for r in recv)

    def vector(self, m: dict) -> tuple:
        v = [0] * len(self.states)
        for s, k in m.items():
            v[self.index[s]] += k
        return tuple(v)

    def expand(self, counts: tuple, tracked: int, semantics: Semantics):
        return _expand(counts, tracked, self.sends, self.recv, semantics == Semantics.RBN)


@dataclass(frozen=True)
class MultisetConfig:
    counts: tuple  # sorted (state, count) pairs with count > 0
    tracked: str | None = None

    @staticmethod
    def of(m: dict, tracked: str | None = None) -> "MultisetConfig":
        return MultisetConfig(tuple(sorted((s, k) for s, k in m.items() if k > 0)), tracked)

    def as_dict(self) -> dict:
        return dict(self.counts)

    @property
    def total(self) -> int:
        return sum(k for _, k in self.counts) + (self.tracked is not None)


@dataclass(frozen=True)
class AbstractStep:
    t: Transition
    tracked_sender: bool
    moves: tuple  # (state, dst, k)
    tracked_dst: str | None


def successors(p: Protocol, m: MultisetConfig,
               semantics: Semantics = Semantics.BROADCAST) -> list:
    comp = Compiled(p)
    tr = comp.index[m.tracked] if m.tracked is not None else -1
    out = []
    for counts, nt, idx, by_tracked, moves, tdst in comp.expand(comp.vector(m.as_dict()), tr,
                                                                semantics):
        cfg = MultisetConfig.of({comp.states[i]: k for i, k in enumerate(counts)},
                                comp.states[nt] if nt >= 0 else None)
        step = AbstractStep(comp.send_list[idx], bool(by_tracked),
                            tuple((comp.states[a], comp.states[b], k) for a, b, k in moves),
                            comp.states[tdst] if tdst >= 0 else None)
        out.append((cfg, step))
    return out


@dataclass
class SearchResult:
    answer: str  # "yes" or "no-within-bounds"
    witness: Trace | Lasso | None = None
    n: int | None = None
    bounds: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    per_n: list = field(default_factory=list)

    @property
    def yes(self) -> bool:
        return self.answer == "yes"


# witness reconstruction

def _concretize(comp: Compiled, n_anon: int, tracked0: int, path: list,
                semantics: Semantics) -> tuple[list, list]:
    """Turn a list of kernel steps into indexed configurations and Steps.

    Process 1 is the tracked process when tracked0 >= 0; the others are
    anonymous and picked lowest-index first.
    """
    p = comp.protocol
    start = []
    if tracked0 >= 0:
        start.append(comp.states[tracked0])
    start.extend([p.initial] * n_anon)
    configs = [tuple(start)]
    steps = []
    has_tracked = tracked0 >= 0
    for idx, by_tracked, moves, tdst in path:
        t = comp.send_list[idx]
        cur = configs[-1]
        nxt = list(cur)
        if by_tracked:
            sender = 1
        else:
            sender = next(e for e in range(1 + has_tracked, len(cur) + 1) if cur[e - 1] == t.src)
        nxt[sender - 1] = t.dst
        used = {sender}
        choices = {}
        for a, b, k in moves:
            sa, sb = comp.states[a], comp.states[b]
            for e in range(1 + has_tracked, len(cur) + 1):
                if k == 0:
                    break
                if e not in used and cur[e - 1] == sa:
                    used.add(e)
                    nxt[e - 1] = sb
                    choices[e] = sb
                    k -= 1
        if has_tracked and tdst >= 0:
            nxt[0] = comp.states[tdst]
            choices[1] = comp.states[tdst]
        if semantics == Semantics.BROADCAST:
            recvs = frozenset(e for e in range(1, len(cur) + 1)
                              if e != sender and p.can_receive(cur[e - 1], t.msg))
        else:
            recvs = frozenset(choices)
        steps.append(Step(sender, t, recvs, choices))
        configs.append(tuple(nxt))
    return configs, steps


def _path_to(parents: dict, node) -> list:
    path = []
    while parents[node] is not None:
        prev, label = parents[node]
        path.append(label)
        node = prev
    path.reverse()
    return path


def synchro_explicit(p: Protocol, q_f: str, n_max: int = 4, max_depth: int = 10_000,
                     semantics: Semantics = Semantics.BROADCAST, all_n: bool = False,
                     max_states: int | None = None) -> SearchResult:
    """BFS from {q_in: n} for each n, looking for {q_f: n}."""
    comp = Compiled(p)
    res = SearchResult("no-within-bounds", bounds={"n_max": n_max, "max_depth": max_depth})
    explored = peak = 0
    for n in range(1, n_max + 1):
        start = comp.vector({p.initial: n})
        goal = comp.vector({q_f: n})
        parents = {start: None}
        depth = {start: 0}
        frontier = deque([start])
        found = start == goal
        exhausted = True
        while frontier and not found:
            peak = max(peak, len(frontier))
            cur = frontier.popleft()
            if depth[cur] >= max_depth:
                exhausted = False
                continue
            for counts, _, idx, by_tracked, moves, tdst in comp.expand(cur, -1, semantics):
                if counts in parents:
                    continue
                parents[counts] = (cur, (idx, by_tracked, moves, tdst))
                depth[counts] = depth[cur] + 1
                if counts == goal:
                    found = True
                    break
                frontier.append(counts)
            if max_states is not None and len(parents) > max_states:
                exhausted = False
                break
        explored += len(parents)
        res.per_n.append((n, found if found else (None if not exhausted else False)))
        if found and not res.yes:
            path = _path_to(parents, goal)
            configs, steps = _concretize(comp, n, -1, path, semantics)
            res.answer, res.witness, res.n = "yes", Trace(configs, steps), n
            if not all_n:
                break
    res.stats = {"explored": explored, "frontier_peak": peak, "kernel": KERNEL}
    return res


def _takes(comp: Compiled, t_f: Transition, tracked: int, label) -> bool:
    idx, by_tracked, _, tdst = label
    if t_f.is_send:
        return bool(by_tracked) and comp.send_list[idx] == t_f
    return (tdst >= 0 and comp.states[tracked] == t_f.src
            and comp.states[tdst] == t_f.dst and comp.send_list[idx].msg == t_f.msg)


def repcover_explicit(p: Protocol, t_f: Transition, n_max: int = 4,
                      semantics: Semantics = Semantics.BROADCAST,
                      max_states: int = 2_000_000, n_min: int = 1) -> SearchResult:
    """Search, for each population n, a lasso where the tracked process takes t_f forever.

    The population n counts the tracked process.
    """
    comp = Compiled(p)
    res = SearchResult("no-within-bounds", bounds={"n_max": n_max, "max_states": max_states})
    explored = 0
    qin = comp.index[p.initial]
    for n in range(max(1, n_min), n_max + 1):
        start = (comp.vector({p.initial: n - 1}), qin)
        ids = {start: 0}
        nodes = [start]
        src, dst, labels = [], [], []
        i = 0
        complete = True
        while i < len(nodes):
            counts, tr = nodes[i]
            for nc, nt, idx, by_tracked, moves, tdst in comp.expand(counts, tr, semantics):
                key = (nc, nt)
                j = ids.get(key)
                if j is None:
                    if len(nodes) >= max_states:
                        complete = False
                        continue
                    j = ids[key] = len(nodes)
                    nodes.append(key)
                src.append(i)
                dst.append(j)
                labels.append((idx, by_tracked, moves, tdst))
            i += 1
        explored += len(nodes)
        lasso = _find_lasso(comp, t_f, nodes, src, dst, labels, n, semantics)
        res.per_n.append((n, True if lasso else (False if complete else None)))
        if lasso is not None:
            res.answer, res.witness, res.n = "yes", lasso, n
            break
    res.stats = {"explored": explored, "kernel": KERNEL}
    return res


def _find_lasso(comp, t_f, nodes, src, dst, labels, n, semantics):
    if not src:
        return None
    nn = len(nodes)
    a = np.asarray(src, dtype=np.int64)
    b = np.asarray(dst, dtype=np.int64)
    g = csr_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(nn, nn))
    _, comp_of = connected_components(g, directed=True, connection="strong")
    target = None
    for k in range(len(src)):
        u, v = src[k], dst[k]
        if comp_of[u] == comp_of[v] and _takes(comp, t_f, nodes[u][1], labels[k]):
            target = k
            break
    if target is None:
        return None
    u, v = src[target], dst[target]
    # prefix: BFS tree from the root to u
    out_edges: dict = {}
    for k in range(len(src)):
        out_edges.setdefault(src[k], []).append(k)
    prefix = _bfs_edges(out_edges, dst, 0, u, lambda _: True)
    scc = comp_of[u]
    back = _bfs_edges(out_edges, dst, v, u, lambda w: comp_of[w] == scc)
    cycle = [target] + back
    path = [labels[k] for k in prefix]
    cyc = [labels[k] for k in cycle]
    return _lasso_from_paths(comp, nodes[0], n, path, cyc, semantics)


def _bfs_edges(out_edges, dst, s, t, allowed):
    if s == t:
        return []
    parent = {s: None}
    q = deque([s])
    while q:
        x = q.popleft()
        for k in out_edges.get(x, ()):
            y = dst[k]
            if y in parent or not allowed(y):
                continue
            parent[y] = (x, k)
            if y == t:
                path = []
                while parent[y] is not None:
                    x2, k2 = parent[y]
                    path.append(k2)
                    y = x2
                return path[::-1]
            q.append(y)
    raise RuntimeError("no path inside the component")


def _lasso_from_paths(comp, start, n, prefix, cycle, semantics):
    """Concretize prefix + cycle; repeat the cycle until indexed configs close."""
    _, tracked0 = start
    path = list(prefix)
    seen = {}
    configs, steps = _concretize(comp, n - 1, tracked0, path, semantics)
    seen[configs[-1]] = len(steps)
    for _ in range(1000):
        path.extend(cycle)
        configs, steps = _concretize(comp, n - 1, tracked0, path, semantics)
        c = configs[-1]
        if c in seen:
            return Lasso(Trace(configs, steps), seen[c], 1)
        seen[c] = len(steps)
    raise RuntimeError("cycle did not close on indexed configurations")


def rbn_reachable_states(p: Protocol) -> frozenset:
    """Least set containing q_in closed under sends and supplied receptions."""
    reach = {p.initial}
    changed = True
    while changed:
        changed = False
        sent = {t.msg for t in p.sends if t.src in reach}
        for t in p.transitions:
            if t.src in reach and t.dst not in reach and (t.is_send or t.msg in sent):
                reach.add(t.dst)
                changed = True
    return frozenset(reach)


def reachable_multisets(p: Protocol, n: int,
                        semantics: Semantics = Semantics.BROADCAST) -> set:
    """All multisets reachable from {q_in: n}, via the counting kernel."""
    comp = Compiled(p)
    start = comp.vector({p.initial: n})
    seen = {start}
    q = deque([start])
    while q:
        cur = q.popleft()
        for counts, *_ in comp.expand(cur, -1, semantics):
            if counts not in seen:
                seen.add(counts)
                q.append(counts)
    return {MultisetConfig.of({comp.states[i]: k for i, k in enumerate(v)}) for v in seen}


def reachable_multisets_indexed(p: Protocol, n: int,
                                semantics: Semantics = Semantics.BROADCAST) -> set:
    """Same set computed naively over process-indexed configurations."""
    from itertools import product

    start = (p.initial,) * n
    seen = {start}
    q = deque([start])
    while q:
        c = q.popleft()
        for sender in range(n):
            for t in p.sends_from[c[sender]]:
                opts = []
                for e in range(n):
                    if e == sender:
                        opts.append((t.dst,))
                        continue
                    tg = p.targets(c[e], t.msg)
                    if not tg:
                        opts.append((c[e],))
                    elif semantics == Semantics.RBN:
                        opts.append(tuple(set(tg) | {c[e]}))
                    else:
                        opts.append(tg)
                for nxt in product(*opts):
                    if nxt not in seen:
                        seen.add(nxt)
                        q.append(nxt)
    from collections import Counter
    return {MultisetConfig.of(dict(Counter(c))) for c in seen}

