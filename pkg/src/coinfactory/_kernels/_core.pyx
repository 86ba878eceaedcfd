# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernel: semantics twin of pure.py on C uint64 arithmetic.

Interprets the same flattened plan arrays and derives the same counter-based
streams, word for word; the equivalence tests compare aggregates against the
pure backend bit-for-bit.  Undecidable comparisons, depth overruns and
baseline truncations are reported exactly like the pure kernel.
"""

from array import array as _array

from libc.stdint cimport int64_t, uint8_t, uint64_t

BACKEND = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15U
cdef uint64_t LEAP = 0xD1B54A32D192ED03U

cdef int OP_ALG1 = 0
cdef int OP_ALG2 = 1
cdef int OP_BASELINE = 2
cdef int OP_COMPLEMENT = 3
cdef int OP_FLIP = 4
cdef int OP_SCALE = 5
cdef int OP_PROD = 6

cdef int FLAG_ALPHA_DYADIC = 1
cdef int FLAG_ALPHA_FAIRBIT = 2

cdef int KIND_INTERIOR = 0
cdef int KIND_DYADIC = 1
cdef int KIND_ONE = 2
cdef int KIND_BAND = 3

cdef int ST_OK = 0
cdef int ST_BAIL_EXACT = 1
cdef int ST_BAIL_DEPTH = 2
cdef int ST_TRUNCATED = 3

cdef int Y_FAIL = -1  # eval result signalling st.status holds the reason


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9U
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBU
    return z ^ (z >> 31)


cdef struct RepState:
    uint64_t coin_key
    uint64_t uni_key
    uint64_t coin_pos
    uint64_t uni_pos
    int flip
    int64_t n
    int64_t outer
    int64_t pairs
    int status
    uint64_t p_t64
    int p_dyadic
    int shortcut


cdef inline int draw_coin(RepState *st) nogil:
    cdef uint64_t u
    cdef int bit
    st.coin_pos += 1
    st.n += 1
    u = mix64(st.coin_key + st.coin_pos * GOLDEN)
    if u < st.p_t64:
        bit = 1
    elif u > st.p_t64:
        bit = 0
    elif st.p_dyadic:
        bit = 0
    else:
        st.status = ST_BAIL_EXACT
        return -1
    return bit ^ st.flip


cdef inline uint64_t draw_uni(RepState *st) nogil:
    st.uni_pos += 1
    return mix64(st.uni_key + st.uni_pos * GOLDEN)


cdef inline int fair_bit(RepState *st) nogil:
    cdef int a, b
    while True:
        a = draw_coin(st)
        if a < 0:
            return -1
        b = draw_coin(st)
        if b < 0:
            return -1
        st.pairs += 1
        if a != b:
            return a


cdef int v_from_digits(RepState *st, int kind, uint64_t t) nogil:
    """V ~ Bernoulli(d) from fair bits and digits of d encoded as (kind, t)."""
    cdef int64_t j = 1
    cdef int64_t const_m = 0  # 0 = none
    cdef int const_bit = 0
    cdef int tz
    cdef int t_bit
    if st.shortcut:
        if kind == KIND_ONE:
            return 1
        if kind == KIND_DYADIC:
            if t == 0:
                const_m = 1
            else:
                tz = 0
                while ((t >> tz) & 1U) == 0:
                    tz += 1
                const_m = 64 - tz + 1
            const_bit = 0
    while True:
        if const_m > 0 and j >= const_m:
            return const_bit
        t_bit = fair_bit(st)
        if t_bit < 0:
            return -1
        if t_bit == 0:
            j += 1
            continue
        if j <= 64:
            if kind == KIND_ONE:
                return 1
            return <int> ((t >> (64 - j)) & 1U)
        if kind == KIND_ONE:
            return 1
        if kind == KIND_DYADIC:
            return 0
        st.status = ST_BAIL_EXACT
        return -1


cdef int eval_node(
    int i, RepState *st,
    const uint8_t[::1] ops, const int[::1] child1, const int[::1] child2,
    const int[::1] table_id, const uint64_t[::1] aux, const uint8_t[::1] flags,
    const int64_t[::1] tab_off, const int64_t[::1] tab_depth,
    const uint8_t[::1] kinds, const uint64_t[::1] t64,
) nogil:
    cdef int op = ops[i]
    cdef int64_t off, depth, k, cap, m
    cdef int x, v, b, kind, y1
    cdef uint64_t t, u

    if op == OP_ALG1:
        off = tab_off[table_id[i]]
        depth = tab_depth[table_id[i]]
        k = 0
        while True:
            k += 1
            if k > depth:
                st.status = ST_BAIL_DEPTH
                return Y_FAIL
            x = draw_coin(st)
            if x < 0:
                return Y_FAIL
            kind = kinds[off + k - 1]
            t = t64[off + k - 1]
            if kind == KIND_ONE:
                v = 1
            elif kind == KIND_DYADIC and t == 0:
                v = 0
            elif kind == KIND_BAND:
                st.status = ST_BAIL_EXACT
                return Y_FAIL
            else:
                u = draw_uni(st)
                if u < t:
                    v = 1
                elif u > t:
                    v = 0
                elif kind == KIND_DYADIC:
                    v = 0
                else:
                    st.status = ST_BAIL_EXACT
                    return Y_FAIL
            if v or x:
                return x

    elif op == OP_ALG2:
        off = tab_off[table_id[i]]
        depth = tab_depth[table_id[i]]
        k = 0
        while True:
            k += 1
            if k > depth:
                st.status = ST_BAIL_DEPTH
                return Y_FAIL
            x = draw_coin(st)
            if x < 0:
                return Y_FAIL
            st.outer += 1
            kind = kinds[off + k - 1]
            t = t64[off + k - 1]
            if kind == KIND_BAND:
                st.status = ST_BAIL_EXACT
                return Y_FAIL
            v = v_from_digits(st, kind, t)
            if v < 0:
                return Y_FAIL
            if v or x:
                return x

    elif op == OP_BASELINE:
        off = tab_off[table_id[i]]
        depth = tab_depth[table_id[i]]
        cap = <int64_t> aux[i]
        k = 0
        while True:
            k += 1
            if k > cap:
                st.status = ST_TRUNCATED
                return Y_FAIL
            if k > depth:
                st.status = ST_BAIL_DEPTH
                return Y_FAIL
            kind = kinds[off + k - 1]
            t = t64[off + k - 1]
            if kind == KIND_ONE:
                break
            if kind == KIND_DYADIC and t == 0:
                continue
            if kind == KIND_BAND:
                st.status = ST_BAIL_EXACT
                return Y_FAIL
            u = draw_uni(st)
            if u < t:
                break
            if u == t and kind == KIND_INTERIOR:
                st.status = ST_BAIL_EXACT
                return Y_FAIL
        v = 0
        for m in range(k):
            x = draw_coin(st)
            if x < 0:
                return Y_FAIL
            if x:
                v = 1
        return v

    elif op == OP_COMPLEMENT:
        y1 = eval_node(child1[i], st, ops, child1, child2, table_id, aux, flags,
                       tab_off, tab_depth, kinds, t64)
        if y1 < 0:
            return Y_FAIL
        return 1 - y1

    elif op == OP_FLIP:
        st.flip ^= 1
        y1 = eval_node(child1[i], st, ops, child1, child2, table_id, aux, flags,
                       tab_off, tab_depth, kinds, t64)
        st.flip ^= 1
        return y1

    elif op == OP_SCALE:
        t = aux[i]
        if flags[i] & FLAG_ALPHA_FAIRBIT:
            kind = KIND_DYADIC if (flags[i] & FLAG_ALPHA_DYADIC) else KIND_INTERIOR
            b = v_from_digits(st, kind, t)
            if b < 0:
                return Y_FAIL
        else:
            u = draw_uni(st)
            if u < t:
                b = 1
            elif u > t:
                b = 0
            elif flags[i] & FLAG_ALPHA_DYADIC:
                b = 0
            else:
                st.status = ST_BAIL_EXACT
                return Y_FAIL
        if b == 0:
            return 0
        return eval_node(child1[i], st, ops, child1, child2, table_id, aux, flags,
                         tab_off, tab_depth, kinds, t64)

    elif op == OP_PROD:
        y1 = eval_node(child1[i], st, ops, child1, child2, table_id, aux, flags,
                       tab_off, tab_depth, kinds, t64)
        if y1 < 0:
            return Y_FAIL
        if y1 == 0:
            return 0
        return eval_node(child2[i], st, ops, child1, child2, table_id, aux, flags,
                         tab_off, tab_depth, kinds, t64)

    st.status = ST_BAIL_EXACT
    return Y_FAIL


def run(flat, p_t64, p_dyadic, seed, rep_indices, hist_len):
    """Execute the plan for every replication index; returns aggregate counts."""
    cdef const uint8_t[::1] ops = flat["ops"]
    cdef const int[::1] child1 = flat["child1"]
    cdef const int[::1] child2 = flat["child2"]
    cdef const int[::1] table_id = flat["table_id"]
    cdef const uint64_t[::1] aux = flat["aux"]
    cdef const uint8_t[::1] flags = flat["flags"]
    cdef int root = flat["root"]
    cdef const int64_t[::1] tab_off = flat["tab_off"]
    cdef const int64_t[::1] tab_depth = flat["tab_depth"]
    cdef const uint8_t[::1] kinds = flat["kinds"]
    cdef const uint64_t[::1] t64 = flat["t64"]
    cdef int shortcut = flat["shortcut"]

    cdef const int64_t[::1] reps = rep_indices
    cdef Py_ssize_t n_reps = reps.shape[0]
    cdef int hlen = hist_len

    cdef uint64_t pt = p_t64
    cdef int pdy = 1 if p_dyadic else 0
    cdef uint64_t seed_mixed = mix64(<uint64_t> seed)

    cdef int64_t[::1] hist
    cdef int64_t[::1] hist_y0
    cdef int64_t[::1] hist_outer
    hist_obj = _array("q", [0] * (hlen + 1))
    hist_y0_obj = _array("q", [0] * (hlen + 1))
    hist_outer_obj = _array("q", [0] * (hlen + 1))
    hist = hist_obj
    hist_y0 = hist_y0_obj
    hist_outer = hist_outer_obj

    cdef int64_t count = 0, sum_y = 0, sum_n = 0, sum_n2 = 0
    cdef int64_t sum_outer = 0, sum_pairs = 0, uniform_draws = 0
    cdef int64_t trunc = 0, max_n = 0

    bails_exact = []
    bails_depth = []

    cdef RepState st
    cdef Py_ssize_t idx
    cdef int64_t rep
    cdef uint64_t base
    cdef int y

    with nogil:
        for idx in range(n_reps):
            rep = reps[idx]
            base = mix64(seed_mixed + (<uint64_t> rep) * GOLDEN)
            st.coin_key = mix64(base)
            st.uni_key = mix64(base + LEAP)
            st.coin_pos = 0
            st.uni_pos = 0
            st.flip = 0
            st.n = 0
            st.outer = 0
            st.pairs = 0
            st.status = ST_OK
            st.p_t64 = pt
            st.p_dyadic = pdy
            st.shortcut = shortcut

            y = eval_node(root, &st, ops, child1, child2, table_id, aux, flags,
                          tab_off, tab_depth, kinds, t64)
            if y < 0:
                if st.status == ST_TRUNCATED:
                    trunc += 1
                else:
                    with gil:
                        if st.status == ST_BAIL_DEPTH:
                            bails_depth.append(rep)
                        else:
                            bails_exact.append(rep)
                continue

            count += 1
            sum_y += y
            sum_n += st.n
            sum_n2 += st.n * st.n
            sum_outer += st.outer
            sum_pairs += st.pairs
            uniform_draws += <int64_t> st.uni_pos
            if st.n > max_n:
                max_n = st.n
            hist[st.n if st.n < hlen else hlen] += 1
            if y == 0:
                hist_y0[st.n if st.n < hlen else hlen] += 1
            hist_outer[st.outer if st.outer < hlen else hlen] += 1

    return {
        "count": count, "sum_y": sum_y, "sum_n": sum_n, "sum_n2": sum_n2,
        "sum_outer": sum_outer, "sum_pairs": sum_pairs,
        "uniform_draws": uniform_draws, "trunc": trunc, "max_n": max_n,
        "hist": list(hist_obj), "hist_y0": list(hist_y0_obj),
        "hist_outer": list(hist_outer_obj),
        "bails_exact": bails_exact, "bails_depth": bails_depth,
    }


def run_von_neumann(p_t64, p_dyadic, seed, rep_indices, hist_len):
    """Fair-bit extraction runs: (sum_bits, sum_pairs, pair histogram, bails)."""
    cdef const int64_t[::1] reps = rep_indices
    cdef Py_ssize_t n_reps = reps.shape[0]
    cdef int hlen = hist_len
    cdef uint64_t pt = p_t64
    cdef int pdy = 1 if p_dyadic else 0
    cdef uint64_t seed_mixed = mix64(<uint64_t> seed)

    hist_obj = _array("q", [0] * (hlen + 1))
    cdef int64_t[::1] hist = hist_obj
    cdef int64_t sum_bits = 0, sum_pairs = 0
    bails = []

    cdef Py_ssize_t idx
    cdef int64_t rep, pairs
    cdef uint64_t base, coin_key, pos, u
    cdef int a, b, bad

    with nogil:
        for idx in range(n_reps):
            rep = reps[idx]
            base = mix64(seed_mixed + (<uint64_t> rep) * GOLDEN)
            coin_key = mix64(base)
            pos = 0
            pairs = 0
            bad = 0
            while True:
                pos += 1
                u = mix64(coin_key + pos * GOLDEN)
                if u < pt:
                    a = 1
                elif u > pt or pdy:
                    a = 0
                else:
                    bad = 1
                pos += 1
                u = mix64(coin_key + pos * GOLDEN)
                if u < pt:
                    b = 1
                elif u > pt or pdy:
                    b = 0
                else:
                    bad = 1
                pairs += 1
                if bad:
                    with gil:
                        bails.append(rep)
                    break
                if a != b:
                    sum_bits += a
                    sum_pairs += pairs
                    hist[pairs if pairs < hlen else hlen] += 1
                    break

    return {"sum_bits": sum_bits, "sum_pairs": sum_pairs, "hist": list(hist_obj),
            "bails": bails}
