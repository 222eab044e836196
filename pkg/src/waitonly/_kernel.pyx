# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled successor kernel; same contract as _kernel_py.expand."""

from libc.stdlib cimport malloc, free


def expand(tuple counts, int tracked, tuple sends, tuple recv, bint rbn):
    cdef int nstates = len(counts)
    cdef int idx, src, msg, dst, nrows, r, j, k, s, c, ntg, pos, carry, last
    cdef int *base = <int *> malloc(nstates * sizeof(int))
    cdef int *new = <int *> malloc(nstates * sizeof(int))
    cdef int *rs = <int *> malloc((nstates + 1) * sizeof(int))
    cdef int *rc = <int *> malloc((nstates + 1) * sizeof(int))
    cdef int *rn = <int *> malloc((nstates + 1) * sizeof(int))
    cdef int *roff = <int *> malloc((nstates + 1) * sizeof(int))
    cdef int *tgt = NULL
    cdef int *comp = NULL
    cdef int total_tg
    cdef list out = []
    cdef list moves
    cdef tuple rows, targets, mv, key
    cdef object t_opts
    cdef bint by_tracked, done
    try:
        for idx in range(len(sends)):
            src, msg, dst = sends[idx]
            for by_tracked in (False, True):
                if by_tracked and tracked != src:
                    continue
                if not by_tracked and counts[src] <= 0:
                    continue
                for j in range(nstates):
                    base[j] = counts[j]
                if not by_tracked:
                    base[src] -= 1
                rows = recv[msg]
                nrows = 0
                total_tg = 0
                for r in range(len(rows)):
                    s = rows[r][0]
                    if base[s] == 0:
                        continue
                    rs[nrows] = s
                    rc[nrows] = base[s]
                    rn[nrows] = len(rows[r][1]) + (1 if rbn else 0)
                    roff[nrows] = total_tg
                    total_tg += rn[nrows]
                    nrows += 1
                tgt = <int *> malloc((total_tg + 1) * sizeof(int))
                comp = <int *> malloc((total_tg + 1) * sizeof(int))
                nrows = 0
                for r in range(len(rows)):
                    s = rows[r][0]
                    if base[s] == 0:
                        continue
                    targets = rows[r][1]
                    for j in range(len(targets)):
                        tgt[roff[nrows] + j] = targets[j]
                    if rbn:
                        tgt[roff[nrows] + len(targets)] = s
                    nrows += 1
                if by_tracked:
                    t_opts = ((dst, -1),)
                else:
                    t_opts = None
                    if tracked >= 0:
                        for r in range(len(rows)):
                            if rows[r][0] == tracked:
                                t_opts = tuple([(d, d) for d in rows[r][1]])
                                if rbn:
                                    t_opts = t_opts + ((tracked, -1),)
                                break
                    if t_opts is None:
                        t_opts = ((tracked, -1),)
                # first composition of each row: everything on the first target
                for r in range(nrows):
                    for j in range(rn[r]):
                        comp[roff[r] + j] = 0
                    comp[roff[r]] = rc[r]
                done = False
                while not done:
                    for j in range(nstates):
                        new[j] = base[j]
                    for r in range(nrows):
                        new[rs[r]] = 0
                    moves = []
                    for r in range(nrows):
                        last = rn[r] - 1
                        for j in range(rn[r]):
                            k = comp[roff[r] + j]
                            if k:
                                new[tgt[roff[r] + j]] += k
                                if not (rbn and j == last):
                                    moves.append((rs[r], tgt[roff[r] + j], k))
                    if not by_tracked:
                        new[dst] += 1
                    key = tuple([new[j] for j in range(nstates)])
                    mv = tuple(moves)
                    for opt in t_opts:
                        out.append((key, opt[0], idx, by_tracked, mv, opt[1]))
                    # advance the odometer, last row fastest, same order as the
                    # Python kernel's descending compositions
                    done = True
                    r = nrows - 1
                    while r >= 0:
                        if _next_comp(comp + roff[r], rn[r]):
                            for j in range(r + 1, nrows):
                                for pos in range(rn[j]):
                                    comp[roff[j] + pos] = 0
                                comp[roff[j]] = rc[j]
                            done = False
                            break
                        r -= 1
                free(tgt)
                free(comp)
                tgt = NULL
                comp = NULL
    finally:
        free(base)
        free(new)
        free(rs)
        free(rc)
        free(rn)
        free(roff)
        if tgt != NULL:
            free(tgt)
        if comp != NULL:
            free(comp)
    return out


cdef bint _next_comp(int *a, int m):
    """Step to the next composition in descending-lexicographic order."""
    cdef int i, tail
    if m <= 1:
        return False
    # find rightmost position i < m-1 with a[i] > 0
    i = m - 2
    while i >= 0 and a[i] == 0:
        i -= 1
    if i < 0:
        return False
    tail = a[m - 1]
    a[i] -= 1
    a[m - 1] = 0
    a[i + 1] = tail + 1
    return True
