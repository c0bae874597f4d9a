"""Numba kernels for enumeration and Monte Carlo over lattice walks.

Step codes: code ``2k`` is a unit step along +e_k, code ``2k + 1`` along -e_k
(k = 0..d-1).  All kernels count local times over times 1..n; the starting
site S_0 is never counted.
"""

import numpy as np
from numba import njit, types
from numba.typed import Dict


@njit(cache=True)
def _step_delta(code):
    axis = code >> 1
    sign = 1 - 2 * (code & 1)
    return axis, sign


# ---------------------------------------------------------------------------
# exhaustive enumeration
# ---------------------------------------------------------------------------


@njit(cache=True)
def _is_bridge_end(n, x1n, mn_prev, mx_prev):
    if x1n <= 0:
        return False
    if n == 1:
        return True
    return mn_prev > 0 and mx_prev < x1n


@njit(cache=True)
def enum_profiles(d, n, prefix, radix_w):
    """Depth-first enumeration of all walks that start with ``prefix``.

    For each walk the occupation profile (number of sites with local time k,
    k = 1..n) is packed into a mixed-radix integer via ``radix_w`` and
    histogrammed.  A second histogram collects bridges only.
    """
    side = 2 * n + 1
    stride = np.empty(d, np.int64)
    s = 1
    for k in range(d):
        stride[k] = s
        s *= side
    grid = np.zeros(s, np.int32)
    centre = 0
    for k in range(d):
        centre += n * stride[k]

    hist = Dict.empty(key_type=types.int64, value_type=types.int64)
    bhist = Dict.empty(key_type=types.int64, value_type=types.int64)

    big = 1 << 60
    pos = np.empty(n + 1, np.int64)
    x1 = np.zeros(n + 1, np.int64)
    # running min / max of the first coordinate over times 1..t
    mn = np.full(n + 1, big, np.int64)
    mx = np.full(n + 1, -big, np.int64)
    code = np.zeros(n + 1, np.int64)
    choice = np.full(n + 1, -1, np.int64)
    placed = np.zeros(n + 1, np.bool_)
    pos[0] = centre

    plen = prefix.shape[0]
    for t in range(plen):
        axis, sign = _step_delta(prefix[t])
        p = pos[t] + sign * stride[axis]
        pos[t + 1] = p
        x1[t + 1] = x1[t] + (sign if axis == 0 else 0)
        lv = grid[p]
        cd = code[t]
        if lv > 0:
            cd -= radix_w[lv]
        code[t + 1] = cd + radix_w[lv + 1]
        grid[p] = lv + 1
        mn[t + 1] = min(mn[t], x1[t + 1])
        mx[t + 1] = max(mx[t], x1[t + 1])
    if plen == n:
        cd = code[n]
        hist[cd] = 1
        if _is_bridge_end(n, x1[n], mn[n - 1], mx[n - 1]):
            bhist[cd] = 1
        return hist, bhist

    ndir = 2 * d
    t = plen
    while t >= plen:
        if placed[t]:
            grid[pos[t + 1]] -= 1
            placed[t] = False
        choice[t] += 1
        if choice[t] >= ndir:
            choice[t] = -1
            t -= 1
            continue
        axis, sign = _step_delta(choice[t])
        p = pos[t] + sign * stride[axis]
        pos[t + 1] = p
        x1[t + 1] = x1[t] + (sign if axis == 0 else 0)
        lv = grid[p]
        cd = code[t]
        if lv > 0:
            cd -= radix_w[lv]
        cd += radix_w[lv + 1]
        code[t + 1] = cd
        grid[p] = lv + 1
        placed[t] = True
        if t + 1 == n:
            hist[cd] = hist.get(cd, 0) + 1
            if _is_bridge_end(n, x1[n], mn[n - 1], mx[n - 1]):
                bhist[cd] = bhist.get(cd, 0) + 1
        else:
            mn[t + 1] = min(mn[t], x1[t + 1])
            mx[t + 1] = max(mx[t], x1[t + 1])
            t += 1
    return hist, bhist


@njit(cache=True)
def count_saw(d, n_max):
    """Counts c_0..c_{n_max} of self-avoiding walks from the origin
    (S_0 included in the avoidance constraint)."""
    side = 2 * n_max + 1
    stride = np.empty(d, np.int64)
    s = 1
    for k in range(d):
        stride[k] = s
        s *= side
    grid = np.zeros(s, np.uint8)
    centre = 0
    for k in range(d):
        centre += n_max * stride[k]
    counts = np.zeros(n_max + 1, np.int64)
    counts[0] = 1
    if n_max == 0:
        return counts
    pos = np.empty(n_max + 1, np.int64)
    choice = np.full(n_max + 1, -1, np.int64)
    placed = np.zeros(n_max + 1, np.bool_)
    pos[0] = centre
    grid[centre] = 1
    ndir = 2 * d
    t = 0
    while t >= 0:
        if placed[t]:
            grid[pos[t + 1]] = 0
            placed[t] = False
        choice[t] += 1
        # an immediate reversal always revisits; skip it
        if t > 0 and choice[t] == (choice[t - 1] ^ 1):
            choice[t] += 1
        if choice[t] >= ndir:
            choice[t] = -1
            t -= 1
            continue
        axis, sign = _step_delta(choice[t])
        p = pos[t] + sign * stride[axis]
        if grid[p] != 0:
            continue
        grid[p] = 1
        pos[t + 1] = p
        placed[t] = True
        counts[t + 1] += 1
        if t + 1 < n_max:
            t += 1
    return counts


# ---------------------------------------------------------------------------
# per-walk statistics for sampled step blocks
# ---------------------------------------------------------------------------


@njit(cache=True)
def walk_stats(steps, d, logg, trim_a):
    """Local-time functionals for each row of ``steps`` (shape (B, n)).

    Returns q, range, max local time, sum_x logg[l(x)], trimmed range and
    trimmed time (sites with 1 <= l <= trim_a), and the bridge flag.
    ``logg`` may be empty, in which case the log-weight column is zero.
    """
    nb, n = steps.shape
    q = np.zeros(nb, np.int64)
    rng_ = np.zeros(nb, np.int64)
    maxl = np.zeros(nb, np.int64)
    logw = np.zeros(nb, np.float64)
    trange = np.zeros(nb, np.int64)
    ttime = np.zeros(nb, np.int64)
    bridge = np.zeros(nb, np.bool_)
    use_w = logg.shape[0] > 0
    coords = np.zeros((n + 1, d), np.int64)
    keys = np.empty(n, np.int64)
    lo = np.empty(d, np.int64)
    ext = np.empty(d, np.int64)
    for b in range(nb):
        for k in range(d):
            lo[k] = 0
            ext[k] = 0
        for t in range(n):
            axis, sign = _step_delta(steps[b, t])
            for k in range(d):
                coords[t + 1, k] = coords[t, k]
            coords[t + 1, axis] += sign
        hi_ = np.zeros(d, np.int64)
        for t in range(1, n + 1):
            for k in range(d):
                v = coords[t, k]
                if v < lo[k]:
                    lo[k] = v
                if v > hi_[k]:
                    hi_[k] = v
        mult = 1
        for k in range(d):
            ext[k] = mult
            mult *= hi_[k] - lo[k] + 1
        for t in range(1, n + 1):
            key = 0
            for k in range(d):
                key += (coords[t, k] - lo[k]) * ext[k]
            keys[t - 1] = key
        sk = np.sort(keys)
        qq = 0
        rr = 0
        ml = 0
        lw = 0.0
        tr = 0
        tt = 0
        run = 1
        for i in range(1, n + 1):
            if i < n and sk[i] == sk[i - 1]:
                run += 1
                continue
            qq += run * run
            rr += 1
            if run > ml:
                ml = run
            if use_w:
                lw += logg[run]
            if run <= trim_a:
                tr += 1
                tt += run
            run = 1
        q[b] = qq
        rng_[b] = rr
        maxl[b] = ml
        logw[b] = lw
        trange[b] = tr
        ttime[b] = tt
        xn = coords[n, 0]
        ok = xn > 0
        if ok:
            for t in range(1, n):
                c = coords[t, 0]
                if c <= 0 or c >= xn:
                    ok = False
                    break
        bridge[b] = ok
    return q, rng_, maxl, logw, trange, ttime, bridge


# ---------------------------------------------------------------------------
# bridge rejection sampling
# ---------------------------------------------------------------------------


@njit(cache=True)
def _try_bridge(rng, d, n, buf, chunk):
    """One rejection attempt.  Fills ``buf`` with the steps on success.

    The positivity constraint is checked on the fly so failed attempts stop
    early; the final-maximum constraint is checked at the end.
    """
    ndir = 2 * d
    x1 = 0
    mx = -(1 << 60)
    t = 0
    while t < n:
        m = min(chunk, n - t)
        draws = rng.integers(0, ndir, size=m)
        for j in range(m):
            c = draws[j]
            buf[t] = c
            if c == 0:
                x1 += 1
            elif c == 1:
                x1 -= 1
            t += 1
            if t < n:
                if x1 <= 0:
                    return False
                if x1 > mx:
                    mx = x1
    if x1 <= 0:
        return False
    return n == 1 or mx < x1


@njit(cache=True)
def bridge_hits(rng, d, n, samples, chunk):
    buf = np.empty(n, np.int8)
    hits = 0
    for _ in range(samples):
        if _try_bridge(rng, d, n, buf, chunk):
            hits += 1
    return hits


@njit(cache=True)
def bridge_collect(rng, d, n, wanted, max_tries, chunk):
    """Plain rejection: returns (accepted step rows, number of attempts)."""
    out = np.empty((wanted, n), np.int8)
    buf = np.empty(n, np.int8)
    got = 0
    tries = 0
    while got < wanted and tries < max_tries:
        tries += 1
        if _try_bridge(rng, d, n, buf, chunk):
            out[got, :] = buf
            got += 1
    return out[:got], tries


# ---------------------------------------------------------------------------
# locally tilted growth (Rosenbluth-type) for downward tails of Q_n
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pack(coord, d, bits, off):
    key = 0
    for k in range(d):
        key = (key << bits) | (coord[k] + off)
    return key


@njit(cache=True)
def growth(rng, d, n, inc, samples, keep):
    """Grow walks choosing each step with probability proportional to
    exp(inc[l]), where l is the current local time of the target site.

    Returns Q_n, log(p/q) against simple random walk, the sum of inc over
    the chosen steps, the bridge flag for every sample, and the step codes
    when ``keep`` is set (an empty array otherwise).
    """
    bits = 62 // d
    off = 1 << (bits - 1)
    cap = 1
    while cap < 4 * n + 8:
        cap <<= 1
    mask = cap - 1
    hkeys = np.full(cap, -1, np.int64)
    hvals = np.zeros(cap, np.int64)
    used = np.empty(n, np.int64)
    ndir = 2 * d
    coord = np.zeros(d, np.int64)
    nb = np.zeros(d, np.int64)
    lcur = np.zeros(ndir, np.int64)
    slot = np.zeros(ndir, np.int64)
    wts = np.zeros(ndir, np.float64)
    qout = np.zeros(samples, np.int64)
    lr = np.zeros(samples, np.float64)
    acc_inc = np.zeros(samples, np.float64)
    bridge = np.zeros(samples, np.bool_)
    steps = np.empty((samples if keep else 0, n), np.int8)
    logdir = np.log(ndir)
    for s in range(samples):
        nused = 0
        for k in range(d):
            coord[k] = 0
        q = 0
        logratio = 0.0
        tot_inc = 0.0
        x1max = -(1 << 60)
        ok = True
        for t in range(n):
            top = -np.inf
            for c in range(ndir):
                for k in range(d):
                    nb[k] = coord[k]
                axis, sign = _step_delta(c)
                nb[axis] += sign
                key = _pack(nb, d, bits, off)
                h = (key * 0x5851F42D4C957F2D) & mask
                while hkeys[h] != -1 and hkeys[h] != key:
                    h = (h + 1) & mask
                slot[c] = h
                lcur[c] = hvals[h] if hkeys[h] == key else 0
                if inc[lcur[c]] > top:
                    top = inc[lcur[c]]
            zsum = 0.0
            for c in range(ndir):
                w = np.exp(inc[lcur[c]] - top)
                wts[c] = w
                zsum += w
            u = rng.random() * zsum
            acc = 0.0
            pick = ndir - 1
            for c in range(ndir):
                acc += wts[c]
                if u < acc:
                    pick = c
                    break
            if keep:
                steps[s, t] = pick
            axis, sign = _step_delta(pick)
            coord[axis] += sign
            h = slot[pick]
            if hkeys[h] == -1:
                hkeys[h] = _pack(coord, d, bits, off)
                used[nused] = h
                nused += 1
            hvals[h] += 1
            q += 2 * lcur[pick] + 1
            tot_inc += inc[lcur[pick]]
            # log p/q increment: log(1/ndir) - log(w_pick / zsum)
            logratio += -logdir - np.log(wts[pick]) + np.log(zsum)
            if t < n - 1:
                if coord[0] <= 0:
                    ok = False
                if coord[0] > x1max:
                    x1max = coord[0]
        if coord[0] <= 0 or (n > 1 and x1max >= coord[0]):
            ok = False
        qout[s] = q
        lr[s] = logratio
        acc_inc[s] = tot_inc
        bridge[s] = ok
        for i in range(nused):
            hkeys[used[i]] = -1
            hvals[used[i]] = 0
    return qout, lr, acc_inc, bridge, steps


@njit(cache=True)
def growth_logq(steps, d, inc):
    """Log-probability of each step row under the growth proposal."""
    nb_, n = steps.shape
    bits = 62 // d
    off = 1 << (bits - 1)
    cap = 1
    while cap < 4 * n + 8:
        cap <<= 1
    mask = cap - 1
    hkeys = np.full(cap, -1, np.int64)
    hvals = np.zeros(cap, np.int64)
    used = np.empty(n, np.int64)
    ndir = 2 * d
    coord = np.zeros(d, np.int64)
    nb = np.zeros(d, np.int64)
    lcur = np.zeros(ndir, np.int64)
    slot = np.zeros(ndir, np.int64)
    out = np.zeros(nb_, np.float64)
    for b in range(nb_):
        nused = 0
        for k in range(d):
            coord[k] = 0
        lq = 0.0
        for t in range(n):
            top = -np.inf
            for c in range(ndir):
                for k in range(d):
                    nb[k] = coord[k]
                axis, sign = _step_delta(c)
                nb[axis] += sign
                key = _pack(nb, d, bits, off)
                h = (key * 0x5851F42D4C957F2D) & mask
                while hkeys[h] != -1 and hkeys[h] != key:
                    h = (h + 1) & mask
                slot[c] = h
                lcur[c] = hvals[h] if hkeys[h] == key else 0
                if inc[lcur[c]] > top:
                    top = inc[lcur[c]]
            zsum = 0.0
            for c in range(ndir):
                zsum += np.exp(inc[lcur[c]] - top)
            pick = steps[b, t]
            lq += inc[lcur[pick]] - top - np.log(zsum)
            axis, sign = _step_delta(pick)
            coord[axis] += sign
            h = slot[pick]
            if hkeys[h] == -1:
                hkeys[h] = _pack(coord, d, bits, off)
                used[nused] = h
                nused += 1
            hvals[h] += 1
        out[b] = lq
        for i in range(nused):
            hkeys[used[i]] = -1
            hvals[used[i]] = 0
    return out


# ---------------------------------------------------------------------------
# confinement to a box (Doob transform of the survival probability)
# ---------------------------------------------------------------------------


@njit(cache=True)
def confined_sample(rng, d, n, r, htab, count):
    """Sample ``count`` walks that stay in the box [-r, r]^d at times 1..n.

    ``htab[k]`` is proportional to the probability of surviving k more steps
    from each box cell (rows beyond the table reuse the last row).  Returns
    the step codes.
    """
    side = 2 * r + 1
    kmax = htab.shape[0] - 1
    ndir = 2 * d
    stride = np.empty(d, np.int64)
    s = 1
    for k in range(d):
        stride[k] = s
        s *= side
    centre = 0
    for k in range(d):
        centre += r * stride[k]
    out = np.empty((count, n), np.int8)
    coord = np.zeros(d, np.int64)
    wts = np.zeros(ndir, np.float64)
    for b in range(count):
        for k in range(d):
            coord[k] = 0
        idx = centre
        for t in range(n):
            rem = n - t - 1
            row = rem if rem <= kmax else kmax
            zsum = 0.0
            for c in range(ndir):
                axis, sign = _step_delta(c)
                v = coord[axis] + sign
                if v < -r or v > r:
                    wts[c] = 0.0
                else:
                    wts[c] = htab[row, idx + sign * stride[axis]]
                zsum += wts[c]
            u = rng.random() * zsum
            acc = 0.0
            pick = -1
            for c in range(ndir):
                acc += wts[c]
                if wts[c] > 0.0 and u < acc:
                    pick = c
                    break
            if pick < 0:
                for c in range(ndir - 1, -1, -1):
                    if wts[c] > 0.0:
                        pick = c
                        break
            axis, sign = _step_delta(pick)
            coord[axis] += sign
            idx += sign * stride[axis]
            out[b, t] = pick
    return out


@njit(cache=True)
def confined_logq(steps, d, r, htab):
    """Log-probability of each step row under the box-confined proposal
    (``-inf`` when the walk leaves the box)."""
    nb, n = steps.shape
    side = 2 * r + 1
    kmax = htab.shape[0] - 1
    ndir = 2 * d
    stride = np.empty(d, np.int64)
    s = 1
    for k in range(d):
        stride[k] = s
        s *= side
    centre = 0
    for k in range(d):
        centre += r * stride[k]
    out = np.zeros(nb, np.float64)
    coord = np.zeros(d, np.int64)
    for b in range(nb):
        for k in range(d):
            coord[k] = 0
        idx = centre
        lq = 0.0
        for t in range(n):
            rem = n - t - 1
            row = rem if rem <= kmax else kmax
            zsum = 0.0
            for c in range(ndir):
                axis, sign = _step_delta(c)
                v = coord[axis] + sign
                if v >= -r and v <= r:
                    zsum += htab[row, idx + sign * stride[axis]]
            pick = steps[b, t]
            axis, sign = _step_delta(pick)
            v = coord[axis] + sign
            if v < -r or v > r:
                lq = -np.inf
                break
            w = htab[row, idx + sign * stride[axis]]
            if w <= 0.0:
                lq = -np.inf
                break
            lq += np.log(w) - np.log(zsum)
            coord[axis] = v
            idx += sign * stride[axis]
        out[b] = lq
    return out


# ---------------------------------------------------------------------------
# return probabilities: combine coordinate groups
# ---------------------------------------------------------------------------


@njit(cache=True)
def combine_return_tables(pa, pb, lgam, frac):
    """p_r = sum_m Binom(r, frac)(m) pa[m] pb[r - m] over even r and even m."""
    n_max = pa.shape[0] - 1
    la = np.log(frac)
    lb = np.log1p(-frac)
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    for r in range(2, n_max + 1, 2):
        acc = 0.0
        comp = 0.0
        for m in range(0, r + 1, 2):
            term = np.exp(lgam[r] - lgam[m] - lgam[r - m] + m * la + (r - m) * lb) * pa[m] * pb[r - m]
            # Kahan summation
            y = term - comp
            tot = acc + y
            comp = (tot - acc) - y
            acc = tot
        out[r] = acc
    return out


# ---------------------------------------------------------------------------
# exact bridge probability
# ---------------------------------------------------------------------------


@njit(cache=True)
def bridge_dp(d, n):
    """P(B_n) for simple random walk in d dimensions.

    The state after t steps is (first coordinate x, running maximum m) over
    times 1..t with x >= 1.  A bridge needs x >= 1 up to time n - 1, x at
    its maximum at time n - 1 and a final +e_1 step.
    """
    up = 1.0 / (2 * d)
    side = (d - 1.0) / d
    if n == 1:
        return up
    # index [x, m]; after one step only (1, 1) is alive
    cur = np.zeros((n + 1, n + 1))
    nxt = np.zeros((n + 1, n + 1))
    cur[1, 1] = up
    for t in range(1, n - 1):
        for x in range(1, t + 2):
            for m in range(x, t + 2):
                nxt[x, m] = 0.0
        for x in range(1, t + 1):
            for m in range(x, t + 1):
                v = cur[x, m]
                if v == 0.0:
                    continue
                nxt[x, m] += side * v
                if x + 1 > m:
                    nxt[x + 1, x + 1] += up * v
                else:
                    nxt[x + 1, m] += up * v
                if x - 1 >= 1:
                    nxt[x - 1, m] += up * v
        for x in range(1, t + 2):
            for m in range(x, t + 2):
                cur[x, m] = nxt[x, m]
    total = 0.0
    for x in range(1, n):
        total += cur[x, x]
    return total * up
