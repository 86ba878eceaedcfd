"""Pure-Python sampling kernel: the fallback backend and the semantics twin of
the compiled extension.

Both backends interpret the same flattened plan arrays, derive the same
counter-based streams, and draw words in the same order, so their outputs are
bit-for-bit identical; tests enforce this.  Replications whose comparisons
cannot be decided inside single 64-bit words (probability 2^-64 per draw),
that outrun the tabulated depth, or that hit the baseline cap are reported by
status and resolved by the driver.
"""

from __future__ import annotations

from .plan import (
    FLAG_ALPHA_DYADIC,
    FLAG_ALPHA_FAIRBIT,
    OP_ALG1,
    OP_ALG2,
    OP_BASELINE,
    OP_COMPLEMENT,
    OP_FLIP,
    OP_PROD,
    OP_SCALE,
    ST_BAIL_DEPTH,
    ST_BAIL_EXACT,
    ST_TRUNCATED,
)
from ..rng import GOLDEN, LEAP, MASK64
from ..tables import KIND_BAND, KIND_DYADIC, KIND_INTERIOR, KIND_ONE

BACKEND = "pure"


class _Bail(Exception):
    def __init__(self, status):
        self.status = status


def _mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def run(flat, p_t64, p_dyadic, seed, rep_indices, hist_len):
    """Execute the plan for every replication index; returns aggregate counts."""
    ops = flat["ops"]
    child1 = flat["child1"]
    child2 = flat["child2"]
    table_id = flat["table_id"]
    aux = flat["aux"]
    flags = flat["flags"]
    root = flat["root"]
    tab_off = flat["tab_off"]
    tab_depth = flat["tab_depth"]
    kinds = flat["kinds"]
    t64 = flat["t64"]
    shortcut = bool(flat["shortcut"])

    count = sum_y = sum_n = sum_n2 = 0
    sum_outer = sum_pairs = 0
    uniform_draws = 0
    trunc = 0
    max_n = 0
    hist = [0] * (hist_len + 1)
    hist_y0 = [0] * (hist_len + 1)
    hist_outer = [0] * (hist_len + 1)
    bails_exact = []
    bails_depth = []

    mix = _mix64
    seed_mixed = mix(seed & MASK64)

    for rep in rep_indices:
        base = mix((seed_mixed + rep * GOLDEN) & MASK64)
        coin_key = mix(base)                      # domain 0
        uni_key = mix((base + LEAP) & MASK64)     # domain 1
        coin_pos = uni_pos = flip = n_coins = outer = pairs = 0

        def draw_coin():
            nonlocal coin_pos, n_coins
            coin_pos += 1
            n_coins += 1
            u = mix((coin_key + coin_pos * GOLDEN) & MASK64)
            if u < p_t64:
                bit = 1
            elif u > p_t64:
                bit = 0
            elif p_dyadic:
                bit = 0
            else:
                raise _Bail(ST_BAIL_EXACT)
            return bit ^ flip

        def draw_uni():
            nonlocal uni_pos
            uni_pos += 1
            return mix((uni_key + uni_pos * GOLDEN) & MASK64)

        def fair_bit():
            nonlocal pairs
            while True:
                a = draw_coin()
                b = draw_coin()
                pairs += 1
                if a != b:
                    return a

        def v_from_digits(kind, t):
            """V ~ Bernoulli(d) from fair bits and d's digits; d encoded (kind, t)."""
            if shortcut:
                if kind == KIND_ONE:
                    return 1
                if kind == KIND_DYADIC:
                    if t == 0:
                        const_m, const_bit = 1, 0
                    else:
                        tz = (t & -t).bit_length() - 1
                        const_m, const_bit = 64 - tz + 1, 0
                else:
                    const_m = None
            else:
                const_m = None
            j = 1
            while True:
                if const_m is not None and j >= const_m:
                    return const_bit
                if fair_bit() == 0:
                    j += 1
                    continue
                if j <= 64:
                    if kind == KIND_ONE:
                        return 1
                    return (t >> (64 - j)) & 1
                if kind == KIND_ONE:
                    return 1
                if kind == KIND_DYADIC:
                    return 0
                raise _Bail(ST_BAIL_EXACT)

        def eval_node(i):
            op = ops[i]
            if op == OP_ALG1:
                off = tab_off[table_id[i]]
                depth = tab_depth[table_id[i]]
                k = 0
                while True:
                    k += 1
                    if k > depth:
                        raise _Bail(ST_BAIL_DEPTH)
                    x = draw_coin()
                    kind = kinds[off + k - 1]
                    t = t64[off + k - 1]
                    if kind == KIND_ONE:
                        v = 1
                    elif kind == KIND_DYADIC and t == 0:
                        v = 0
                    elif kind == KIND_BAND:
                        raise _Bail(ST_BAIL_EXACT)
                    else:
                        u = draw_uni()
                        if u < t:
                            v = 1
                        elif u > t:
                            v = 0
                        elif kind == KIND_DYADIC:
                            v = 0
                        else:
                            raise _Bail(ST_BAIL_EXACT)
                    if v or x:
                        return x
            if op == OP_ALG2:
                nonlocal outer
                off = tab_off[table_id[i]]
                depth = tab_depth[table_id[i]]
                k = 0
                while True:
                    k += 1
                    if k > depth:
                        raise _Bail(ST_BAIL_DEPTH)
                    x = draw_coin()
                    outer += 1
                    kind = kinds[off + k - 1]
                    t = t64[off + k - 1]
                    if kind == KIND_BAND:
                        raise _Bail(ST_BAIL_EXACT)
                    v = v_from_digits(kind, t)
                    if v or x:
                        return x
            if op == OP_BASELINE:
                off = tab_off[table_id[i]]
                depth = tab_depth[table_id[i]]
                cap = aux[i]
                k = 0
                while True:
                    k += 1
                    if k > cap:
                        raise _Bail(ST_TRUNCATED)
                    if k > depth:
                        raise _Bail(ST_BAIL_DEPTH)
                    kind = kinds[off + k - 1]
                    t = t64[off + k - 1]
                    if kind == KIND_ONE:
                        break
                    if kind == KIND_DYADIC and t == 0:
                        continue
                    if kind == KIND_BAND:
                        raise _Bail(ST_BAIL_EXACT)
                    u = draw_uni()
                    if u < t:
                        break
                    if u == t and kind == KIND_INTERIOR:
                        raise _Bail(ST_BAIL_EXACT)
                y = 0
                for _ in range(k):
                    if draw_coin():
                        y = 1
                return y
            if op == OP_COMPLEMENT:
                return 1 - eval_node(child1[i])
            if op == OP_FLIP:
                nonlocal flip
                flip ^= 1
                try:
                    return eval_node(child1[i])
                finally:
                    flip ^= 1
            if op == OP_SCALE:
                t = aux[i]
                fl = flags[i]
                if fl & FLAG_ALPHA_FAIRBIT:
                    kind = KIND_DYADIC if fl & FLAG_ALPHA_DYADIC else KIND_INTERIOR
                    b = v_from_digits(kind, t)
                else:
                    u = draw_uni()
                    if u < t:
                        b = 1
                    elif u > t:
                        b = 0
                    elif fl & FLAG_ALPHA_DYADIC:
                        b = 0
                    else:
                        raise _Bail(ST_BAIL_EXACT)
                if b == 0:
                    return 0
                return eval_node(child1[i])
            if op == OP_PROD:
                if eval_node(child1[i]) == 0:
                    return 0
                return eval_node(child2[i])
            raise AssertionError(f"bad opcode {op}")

        try:
            y = eval_node(root)
        except _Bail as bail:
            if bail.status == ST_TRUNCATED:
                trunc += 1
            elif bail.status == ST_BAIL_DEPTH:
                bails_depth.append(rep)
            else:
                bails_exact.append(rep)
            continue

        n = n_coins
        count += 1
        sum_y += y
        sum_n += n
        sum_n2 += n * n
        sum_outer += outer
        sum_pairs += pairs
        uniform_draws += uni_pos
        if n > max_n:
            max_n = n
        hist[n if n < hist_len else hist_len] += 1
        if y == 0:
            hist_y0[n if n < hist_len else hist_len] += 1
        hist_outer[outer if outer < hist_len else hist_len] += 1

    return {
        "count": count, "sum_y": sum_y, "sum_n": sum_n, "sum_n2": sum_n2,
        "sum_outer": sum_outer, "sum_pairs": sum_pairs,
        "uniform_draws": uniform_draws, "trunc": trunc, "max_n": max_n,
        "hist": hist, "hist_y0": hist_y0, "hist_outer": hist_outer,
        "bails_exact": bails_exact, "bails_depth": bails_depth,
    }


def run_von_neumann(p_t64, p_dyadic, seed, rep_indices, hist_len):
    """Fair-bit extraction runs: (sum_bits, sum_pairs, pair histogram, bails)."""
    mix = _mix64
    seed_mixed = mix(seed & MASK64)
    sum_bits = sum_pairs = 0
    hist = [0] * (hist_len + 1)
    bails = []
    for rep in rep_indices:
        base = mix((seed_mixed + rep * GOLDEN) & MASK64)
        coin_key = mix(base)
        pos = 0
        pairs = 0
        bit = None
        while bit is None:
            bits = []
            for _ in range(2):
                u = mix((coin_key + (pos + 1) * GOLDEN) & MASK64)
                pos += 1
                if u < p_t64:
                    bits.append(1)
                elif u > p_t64 or p_dyadic:
                    bits.append(0)
                else:
                    bits.append(None)
            pairs += 1
            if None in bits:
                bails.append(rep)
                break
            if bits[0] != bits[1]:
                bit = bits[0]
        else:
            sum_bits += bit
            sum_pairs += pairs
            hist[pairs if pairs < hist_len else hist_len] += 1
    return {"sum_bits": sum_bits, "sum_pairs": sum_pairs, "hist": hist, "bails": bails}
