"""Pure-Python successor kernel for the counting abstraction.

A configuration is a tuple of counts indexed by state number, plus the
state of an optional tracked process (-1 when absent).  The protocol is
compiled into two tables:

  sends:  tuple of (src, msg, dst) triples, in a fixed order
  recv:   tuple indexed by msg of tuples (state, targets)

``expand`` returns one entry per successor:
  (counts, tracked, send_index, tracked_is_sender, moves, tracked_dst)
where moves lists (state, dst, k) receptions of untracked processes and
tracked_dst is the tracked process's reception target (-1 if it did not
receive).
"""

from itertools import product

_COMP_CACHE = {}


def compositions(total, parts):
    key = (total, parts)
    hit = _COMP_CACHE.get(key)
    if hit is not None:
        return hit
    if parts == 1:
        out = ((total,),)
    else:
        out = tuple((k,) + rest for k in range(total, -1, -1)
                    for rest in compositions(total - k, parts - 1))
    _COMP_CACHE[key] = out
    return out


def expand(counts, tracked, sends, recv, rbn):
    out = []
    for idx in range(len(sends)):
        src, msg, dst = sends[idx]
        # the sender is either an anonymous process or the tracked one
        options = []
        if counts[src] > 0:
            options.append(False)
        if tracked == src:
            options.append(True)
        for by_tracked in options:
            base = list(counts)
            if not by_tracked:
                base[src] -= 1
            rows = recv[msg]
            per_state = []
            for s, targets in rows:
                c = base[s]
                if c == 0:
                    continue
                tg = targets + (s,) if rbn else targets
                per_state.append((s, tg, compositions(c, len(tg))))
            if by_tracked:
                t_opts = ((dst, -1),)
            else:
                t_opts = None
                if tracked >= 0:
                    for s, targets in rows:
                        if s == tracked:
                            t_opts = tuple((d, d) for d in targets)
                            if rbn:
                                t_opts = t_opts + ((tracked, -1),)
                            break
                if t_opts is None:
                    t_opts = ((tracked, -1),)
            cleared = list(base)
            for s, _, _ in per_state:
                cleared[s] = 0
            for choice in product(*[ps[2] for ps in per_state]):
                new = list(cleared)
                moves = []
                for (s, tg, _), comp in zip(per_state, choice):
                    last = len(tg) - 1
                    for j, k in enumerate(comp):
                        if k:
                            d = tg[j]
                            new[d] += k
                            if not (rbn and j == last):
                                moves.append((s, d, k))
                if not by_tracked:
                    new[dst] += 1
                key = tuple(new)
                mv = tuple(moves)
                for nt, tdst in t_opts:
                    out.append((key, nt, idx, by_tracked, mv, tdst))
    return out
