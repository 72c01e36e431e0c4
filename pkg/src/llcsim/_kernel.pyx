# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled replay of the engine for LRU runs without events or monitors.

Mirrors engine.Engine/llc.LastLevelCache/cache.PrivateHierarchy step for step;
tests/test_kernel.py holds the two to identical per-request records.
"""
import numpy as np

from libc.stdint cimport int64_t, uint64_t, uint8_t

ctypedef int64_t i64

cdef enum:
    OP_R = 0
    OP_W = 1
    OP_I = 2
    TX_REQ = 0
    TX_WB = 1
    MODE_P = 0
    MODE_NSS = 1
    MODE_SS = 2
    ERR_NONE = 0
    ERR_PROTOCOL = 2
    ERR_PWB = 3

cdef struct Cache:
    i64* tags
    uint8_t* dirty
    i64* stamp
    int nsets
    int nways


cdef inline int c_find(Cache* c, i64 line, bint touch, i64* clock) noexcept nogil:
    cdef int base = <int>(line % c.nsets) * c.nways
    cdef int w
    for w in range(c.nways):
        if c.tags[base + w] == line:
            if touch:
                clock[0] += 1
                c.stamp[base + w] = clock[0]
            return w
    return -1


cdef inline int c_invalidate(Cache* c, i64 line) noexcept nogil:
    """0 absent, 1 clean, 2 dirty."""
    cdef int base = <int>(line % c.nsets) * c.nways
    cdef int w, r
    for w in range(c.nways):
        if c.tags[base + w] == line:
            r = 2 if c.dirty[base + w] else 1
            c.tags[base + w] = -1
            c.dirty[base + w] = 0
            return r
    return 0


cdef inline void c_mark_dirty(Cache* c, i64 line) noexcept nogil:
    cdef int base = <int>(line % c.nsets) * c.nways
    cdef int w
    for w in range(c.nways):
        if c.tags[base + w] == line:
            c.dirty[base + w] = 1
            return


cdef inline i64 c_lru(Cache* c, int base) noexcept nogil:
    cdef int w, best = 0
    for w in range(1, c.nways):
        if c.stamp[base + w] < c.stamp[base + best]:
            best = w
    return best


cdef inline void c_place(Cache* c, int idx, i64 line, bint dirty, i64* clock) noexcept nogil:
    c.tags[idx] = line
    c.dirty[idx] = dirty
    clock[0] += 1
    c.stamp[idx] = clock[0]


cdef inline int c_free_way(Cache* c, int base) noexcept nogil:
    cdef int w
    for w in range(c.nways):
        if c.tags[base + w] < 0:
            return w
    return -1


cdef inline void l1_fill(Cache* l1, i64 line, bint dirty, i64* clock) noexcept nogil:
    cdef int base = <int>(line % l1.nsets) * l1.nways
    cdef int w = c_free_way(l1, base)
    if w < 0:
        w = <int>c_lru(l1, base)
        l1.tags[base + w] = -1
        l1.dirty[base + w] = 0
    c_place(l1, base + w, line, dirty, clock)


cdef inline bint h_access(Cache* l1, Cache* l2, int op, i64 line, i64* clock) noexcept nogil:
    if c_find(l1, line, True, clock) >= 0:
        if op == OP_W:
            c_mark_dirty(l1, line)
            c_mark_dirty(l2, line)
        c_find(l2, line, True, clock)
        return True
    if c_find(l2, line, True, clock) < 0:
        return False
    l1_fill(l1, line, op == OP_W, clock)
    if op == OP_W:
        c_mark_dirty(l2, line)
    return True


cdef class _State:
    cdef int N, period, cap, llc_ways, shift
    cdef bint evict_while_queued
    # private caches, three per core
    cdef i64[::1] ptags, pstamp
    cdef uint8_t[::1] pdirty
    cdef Cache caches[192]
    # LLC
    cdef i64[::1] lline, lstamp
    cdef uint64_t[::1] lsh
    cdef uint8_t[::1] ldirty, levict
    cdef int[::1] lfor
    # partitions (per core)
    cdef int[::1] pstart, pcount, pmode, pnw, pways
    cdef int maxw
    # sequencer (per LLC set)
    cdef int[::1] qbuf, qhead, qlen, core_q
    cdef int[::1] pe_set, pe_way
    # buffers
    cdef uint8_t[::1] prb_valid, prb_op
    cdef i64[::1] prb_addr, prb_entry, prb_issue
    cdef i64[::1] pwb_addr
    cdef uint8_t[::1] pwb_dirty
    cdef int[::1] pwb_head, pwb_len, rr_last
    # agents
    cdef i64[::1] cursor, finish, toff, taddr
    cdef uint8_t[::1] top, done
    cdef int[::1] order, owned
    # records
    cdef i64[::1] r_core, r_addr, r_entry, r_issue, r_done
    cdef i64 nrec
    cdef i64 clock
    cdef int err
    cdef i64 err_slot


cdef inline void st_advance(_State st, int core, i64 boundary) noexcept:
    cdef Cache* l2 = &st.caches[3 * core + 2]
    cdef Cache* l1
    cdef i64 addr, line
    cdef int op
    while st.cursor[core] < st.toff[core + 1]:
        addr = st.taddr[st.cursor[core]]
        op = st.top[st.cursor[core]]
        st.cursor[core] += 1
        line = addr >> st.shift
        l1 = &st.caches[3 * core + (0 if op == OP_I else 1)]
        if h_access(l1, l2, op, line, &st.clock):
            continue
        st.prb_valid[core] = 1
        st.prb_addr[core] = addr
        st.prb_op[core] = op
        st.prb_entry[core] = boundary
        st.prb_issue[core] = boundary + st.owned[core * st.period + boundary % st.period]
        return
    st.done[core] = 1


cdef inline int llc_set(_State st, int core, i64 line) noexcept:
    return st.pstart[core] + <int>(line % st.pcount[core])


cdef inline int llc_find(_State st, int core, int s, i64 line) noexcept:
    cdef int k, w
    for k in range(st.pnw[core]):
        w = st.pways[core * st.maxw + k]
        if st.lline[s * st.llc_ways + w] == line:
            return w
    return -1


cdef inline void llc_fill(_State st, int core, int s, int w, i64 line) noexcept:
    cdef int idx = s * st.llc_ways + w
    cdef int cidx
    st.lline[idx] = line
    st.lsh[idx] = (<uint64_t>1) << core
    st.clock += 1
    st.lstamp[idx] = st.clock
    st.ldirty[idx] = 0
    st.levict[idx] = 0
    st.lfor[idx] = -1
    if st.pe_set[core] >= 0:
        cidx = st.pe_set[core] * st.llc_ways + st.pe_way[core]
        st.pe_set[core] = -1
        st.pe_way[core] = -1
        if st.lline[cidx] >= 0 and st.lfor[cidx] == core:
            st.lfor[cidx] = -1


# request outcomes
cdef enum:
    R_HIT = 0
    R_FILL = 1
    R_EVICT = 2
    R_WAIT = 3


cdef inline int pwb_push(_State st, int core, i64 addr, bint dirty) noexcept:
    if st.pwb_len[core] >= st.cap:
        return 0
    cdef int pos = (st.pwb_head[core] + st.pwb_len[core]) % st.cap
    st.pwb_addr[core * st.cap + pos] = addr
    st.pwb_dirty[core * st.cap + pos] = dirty
    st.pwb_len[core] += 1
    return 1


cdef int evict_or_wait(_State st, int core, int s, i64 line, bint may_fill, i64 slot) noexcept:
    """R_WAIT, R_FILL or R_EVICT; back-invalidations are applied here."""
    cdef int k, w, idx, best = -1, c, r
    cdef i64 best_stamp = 0, victim
    cdef uint64_t sh
    if st.pe_set[core] >= 0:
        return R_WAIT
    for k in range(st.pnw[core]):
        w = st.pways[core * st.maxw + k]
        idx = s * st.llc_ways + w
        if st.lline[idx] >= 0 and st.levict[idx] and st.lfor[idx] < 0:
            st.lfor[idx] = core
            st.pe_set[core] = s
            st.pe_way[core] = w
            return R_WAIT
    for k in range(st.pnw[core]):
        w = st.pways[core * st.maxw + k]
        idx = s * st.llc_ways + w
        if st.lline[idx] >= 0 and not st.levict[idx]:
            if best < 0 or st.lstamp[idx] < best_stamp or (st.lstamp[idx] == best_stamp and w < best):
                best = w
                best_stamp = st.lstamp[idx]
    if best < 0:
        return R_WAIT
    idx = s * st.llc_ways + best
    sh = st.lsh[idx]
    victim = st.lline[idx]
    if sh == 0:
        st.lline[idx] = -1
        if not may_fill:
            return R_EVICT
        llc_fill(st, core, s, best, line)
        return R_FILL
    st.levict[idx] = 1
    st.lfor[idx] = core
    st.pe_set[core] = s
    st.pe_way[core] = best
    for c in range(st.N):
        if sh & ((<uint64_t>1) << c):
            r = c_invalidate(&st.caches[3 * c + 2], victim)
            c_invalidate(&st.caches[3 * c], victim)
            c_invalidate(&st.caches[3 * c + 1], victim)
            if not pwb_push(st, c, victim << st.shift, r == 2):
                st.err = ERR_PWB
                st.err_slot = slot
    return R_EVICT


cdef int handle_request(_State st, int core, i64 addr, i64 slot) noexcept:
    cdef i64 line = addr >> st.shift
    cdef int s = llc_set(st, core, line)
    cdef int w = llc_find(st, core, s, line)
    cdef int idx, k, free = -1, r, qs
    if w >= 0:
        idx = s * st.llc_ways + w
        if st.levict[idx]:
            return R_WAIT
        st.lsh[idx] |= (<uint64_t>1) << core
        st.clock += 1
        st.lstamp[idx] = st.clock
        return R_HIT
    for k in range(st.pnw[core]):
        w = st.pways[core * st.maxw + k]
        if st.lline[s * st.llc_ways + w] < 0:
            free = w
            break
    if st.pmode[core] != MODE_SS:
        if free >= 0:
            llc_fill(st, core, s, free, line)
            return R_FILL
        return evict_or_wait(st, core, s, line, True, slot)
    if st.core_q[core] < 0:
        if free >= 0 and st.qlen[s] == 0:
            llc_fill(st, core, s, free, line)
            return R_FILL
        st.qbuf[s * st.N + (st.qhead[s] + st.qlen[s]) % st.N] = core
        st.qlen[s] += 1
        st.core_q[core] = s
    if st.qbuf[s * st.N + st.qhead[s]] != core:
        if free < 0 and st.evict_while_queued:
            r = evict_or_wait(st, core, s, line, False, slot)
            if r == R_EVICT:
                return R_EVICT
        return R_WAIT
    if free >= 0:
        st.qhead[s] = (st.qhead[s] + 1) % st.N
        st.qlen[s] -= 1
        st.core_q[core] = -1
        llc_fill(st, core, s, free, line)
        return R_FILL
    r = evict_or_wait(st, core, s, line, True, slot)
    if r == R_FILL:
        st.qhead[s] = (st.qhead[s] + 1) % st.N
        st.qlen[s] -= 1
        st.core_q[core] = -1
    return r


cdef void handle_writeback(_State st, int core, i64 addr, bint dirty, i64 slot) noexcept:
    cdef i64 line = addr >> st.shift
    cdef int s = llc_set(st, core, line)
    cdef int w = llc_find(st, core, s, line)
    cdef int idx, f
    cdef uint64_t bit = (<uint64_t>1) << core
    if w < 0 or not (st.lsh[s * st.llc_ways + w] & bit):
        st.err = ERR_PROTOCOL
        st.err_slot = slot
        return
    idx = s * st.llc_ways + w
    st.lsh[idx] &= ~bit
    if dirty:
        st.ldirty[idx] = 1
    if st.lsh[idx] != 0 or not st.levict[idx]:
        return
    st.lline[idx] = -1
    f = st.lfor[idx]
    if f >= 0:
        st.pe_set[f] = -1
        st.pe_way[f] = -1


cdef void complete(_State st, int core, i64 slot) noexcept:
    cdef i64 addr = st.prb_addr[core]
    cdef i64 line = addr >> st.shift
    cdef int op = st.prb_op[core]
    cdef Cache* l2 = &st.caches[3 * core + 2]
    cdef Cache* l1 = &st.caches[3 * core + (0 if op == OP_I else 1)]
    cdef int base = <int>(line % l2.nsets) * l2.nways
    cdef int w = c_free_way(l2, base)
    cdef i64 victim
    cdef int s, vw
    if w < 0:
        w = <int>c_lru(l2, base)
        victim = l2.tags[base + w]
        if l2.dirty[base + w]:
            # fold the silently dropped dirty data into the LLC copy
            s = llc_set(st, core, victim)
            vw = llc_find(st, core, s, victim)
            if vw >= 0:
                st.ldirty[s * st.llc_ways + vw] = 1
        c_invalidate(&st.caches[3 * core], victim)
        c_invalidate(&st.caches[3 * core + 1], victim)
        l2.tags[base + w] = -1
        l2.dirty[base + w] = 0
    c_place(l2, base + w, line, op == OP_W, &st.clock)
    l1_fill(l1, line, op == OP_W, &st.clock)
    st.r_core[st.nrec] = core
    st.r_addr[st.nrec] = addr
    st.r_entry[st.nrec] = st.prb_entry[core]
    st.r_issue[st.nrec] = st.prb_issue[core]
    st.r_done[st.nrec] = slot
    st.nrec += 1
    st.finish[core] = slot
    st.prb_valid[core] = 0
    st_advance(st, core, slot + 1)


def run_kernel(dict spec, i64 max_slots):
    """Run a closed-loop simulation described by ``spec`` (see kernel.py)."""
    cdef _State st = _State()
    cdef int N = spec["N"]
    cdef int c, lvl, k, owner, r, has_req, has_wb, kind, pos
    cdef i64 slot = 0, total, off, size
    cdef i64 addr
    cdef bint wbd
    cdef int ndone
    st.N = N
    st.period = spec["period"]
    st.cap = spec["pwb_capacity"]
    st.shift = spec["shift"]
    st.llc_ways = spec["llc_ways"]
    st.evict_while_queued = spec["evict_while_queued"]
    st.clock = 0
    st.err = ERR_NONE
    st.err_slot = -1
    if N > 64:
        raise ValueError("the compiled kernel supports at most 64 cores")
    geoms = spec["private"]   # [(sets, ways)] for l1i, l1d, l2
    size = 0
    for lvl in range(3):
        size += geoms[lvl][0] * geoms[lvl][1]
    st.ptags = np.full(size * N, -1, dtype=np.int64)
    st.pstamp = np.zeros(size * N, dtype=np.int64)
    st.pdirty = np.zeros(size * N, dtype=np.uint8)
    off = 0
    for c in range(N):
        for lvl in range(3):
            st.caches[3 * c + lvl].tags = &st.ptags[off]
            st.caches[3 * c + lvl].stamp = &st.pstamp[off]
            st.caches[3 * c + lvl].dirty = &st.pdirty[off]
            st.caches[3 * c + lvl].nsets = geoms[lvl][0]
            st.caches[3 * c + lvl].nways = geoms[lvl][1]
            off += geoms[lvl][0] * geoms[lvl][1]
    nl = spec["llc_sets"] * spec["llc_ways"]
    st.lline = np.full(nl, -1, dtype=np.int64)
    st.lstamp = np.zeros(nl, dtype=np.int64)
    st.lsh = np.zeros(nl, dtype=np.uint64)
    st.ldirty = np.zeros(nl, dtype=np.uint8)
    st.levict = np.zeros(nl, dtype=np.uint8)
    st.lfor = np.full(nl, -1, dtype=np.int32)
    st.pstart = np.asarray(spec["pstart"], dtype=np.int32)
    st.pcount = np.asarray(spec["pcount"], dtype=np.int32)
    st.pmode = np.asarray(spec["pmode"], dtype=np.int32)
    st.pnw = np.asarray(spec["pnw"], dtype=np.int32)
    st.maxw = spec["maxw"]
    st.pways = np.asarray(spec["pways"], dtype=np.int32)
    st.qbuf = np.zeros(spec["llc_sets"] * N, dtype=np.int32)
    st.qhead = np.zeros(spec["llc_sets"], dtype=np.int32)
    st.qlen = np.zeros(spec["llc_sets"], dtype=np.int32)
    st.core_q = np.full(N, -1, dtype=np.int32)
    st.pe_set = np.full(N, -1, dtype=np.int32)
    st.pe_way = np.full(N, -1, dtype=np.int32)
    st.prb_valid = np.zeros(N, dtype=np.uint8)
    st.prb_op = np.zeros(N, dtype=np.uint8)
    st.prb_addr = np.zeros(N, dtype=np.int64)
    st.prb_entry = np.zeros(N, dtype=np.int64)
    st.prb_issue = np.zeros(N, dtype=np.int64)
    st.pwb_addr = np.zeros(N * st.cap, dtype=np.int64)
    st.pwb_dirty = np.zeros(N * st.cap, dtype=np.uint8)
    st.pwb_head = np.zeros(N, dtype=np.int32)
    st.pwb_len = np.zeros(N, dtype=np.int32)
    st.rr_last = np.full(N, TX_WB, dtype=np.int32)
    st.toff = np.asarray(spec["toff"], dtype=np.int64)
    st.taddr = np.asarray(spec["taddr"], dtype=np.int64)
    st.top = np.asarray(spec["top"], dtype=np.uint8)
    st.cursor = np.array(st.toff[:N], dtype=np.int64)
    st.finish = np.full(N, -1, dtype=np.int64)
    st.done = np.zeros(N, dtype=np.uint8)
    st.order = np.asarray(spec["order"], dtype=np.int32)
    st.owned = np.asarray(spec["owned"], dtype=np.int32)
    total = st.toff[N]
    st.r_core = np.zeros(total, dtype=np.int64)
    st.r_addr = np.zeros(total, dtype=np.int64)
    st.r_entry = np.zeros(total, dtype=np.int64)
    st.r_issue = np.zeros(total, dtype=np.int64)
    st.r_done = np.zeros(total, dtype=np.int64)
    st.nrec = 0

    for c in range(N):
        st_advance(st, c, 0)

    while slot < max_slots:
        ndone = 0
        for c in range(N):
            ndone += st.done[c]
        if ndone == N:
            break
        owner = st.order[slot % st.period]
        has_req = st.prb_valid[owner]
        has_wb = st.pwb_len[owner] > 0
        if has_req and has_wb:
            kind = TX_REQ if st.rr_last[owner] == TX_WB else TX_WB
        elif has_req:
            kind = TX_REQ
        elif has_wb:
            kind = TX_WB
        else:
            kind = -1
        if kind == TX_REQ:
            st.rr_last[owner] = TX_REQ
            r = handle_request(st, owner, st.prb_addr[owner], slot)
            if r == R_HIT or r == R_FILL:
                complete(st, owner, slot)
        elif kind == TX_WB:
            st.rr_last[owner] = TX_WB
            pos = owner * st.cap + st.pwb_head[owner]
            addr = st.pwb_addr[pos]
            wbd = st.pwb_dirty[pos]
            st.pwb_head[owner] = (st.pwb_head[owner] + 1) % st.cap
            st.pwb_len[owner] -= 1
            handle_writeback(st, owner, addr, wbd, slot)
        slot += 1
        if st.err != ERR_NONE:
            break

    n = st.nrec
    return {
        "error": st.err,
        "slots": slot,
        "core": np.asarray(st.r_core[:n]).copy(),
        "addr": np.asarray(st.r_addr[:n]).copy(),
        "entry": np.asarray(st.r_entry[:n]).copy(),
        "issue": np.asarray(st.r_issue[:n]).copy(),
        "done_slot": np.asarray(st.r_done[:n]).copy(),
        "finish": np.asarray(st.finish).copy(),
        "done": np.asarray(st.done).copy(),
    }
