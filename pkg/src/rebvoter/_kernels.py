"""Compiled inner loops.

The kernels are resumable: they consume pre-drawn random variates from the
buffers ``exps``/``unifs`` starting at ``ibuf[0]`` and return when the buffer
runs dry, the target time is reached, or the particle system dies.  All
mutable state lives in the arrays passed in, so the Python driver can refill
the buffers and call again.
"""
import numpy as np
from numba import njit

BUFFER_EMPTY = 0
REACHED_END = 1
EXTINCT = 2
PARITY_VIOLATION = 3


@njit(cache=True, nogil=True)
def toggle_site(y, pos, slot, cnt, s):
    if y[s]:
        y[s] = 0
        k = slot[s]
        last = cnt[0] - 1
        moved = pos[last]
        pos[k] = moved
        slot[moved] = k
        slot[s] = -1
        cnt[0] = last
    else:
        y[s] = 1
        pos[cnt[0]] = s
        slot[s] = cnt[0]
        cnt[0] += 1


@njit(cache=True, nogil=True, inline="always")
def update_patterns(s, N, pat_offs, pat_start, par, oddcount):
    for p in range(pat_start.size - 1):
        for q in range(pat_start[p], pat_start[p + 1]):
            i = (s - pat_offs[q]) % N
            par[p, i] ^= 1
            if par[p, i]:
                oddcount[p] += 1
            else:
                oddcount[p] -= 1


@njit(cache=True, nogil=True, inline="always")
def accumulate(s, e, K, N, T, burn, nbins, ab, ae, oddcount,
               acc_alpha, acc_elapsed, acc_ones, acc_k, acc_pat, acc_norm):
    """Add the state-weighted interval [s, e] to the bins, splitting at edges."""
    if e <= burn:
        return
    if s < burn:
        s = burn
    width = (T - burn) / nbins
    b = int((s - burn) / width)
    if b > nbins - 1:
        b = nbins - 1
    if b > 0 and s < burn + b * width:
        b -= 1
    maxk = acc_k.shape[1] - 1
    slope = (ae - ab) / T
    P = oddcount.size
    while True:
        edge = T if b == nbins - 1 else burn + (b + 1) * width
        stop = e if e < edge else edge
        d = stop - s
        if d > 0.0:
            acc_elapsed[b] += d
            acc_alpha[b] += d * (ab + slope * 0.5 * (s + stop))
            acc_ones[b] += K * d
            if K <= maxk:
                acc_k[b, K] += d
            # same operations for both channels, so the single-site pattern
            # reproduces the normalizer bit for bit
            acc_norm[b] += (K * d) / N
            for p in range(P):
                acc_pat[b, p] += (oddcount[p] * d) / N
        if stop >= e or b == nbins - 1:
            break
        s = stop
        b += 1


@njit(cache=True, nogil=True, inline="always")
def bin_of(t, T, burn, nbins):
    if t < burn:
        return -1
    width = (T - burn) / nbins
    b = int((t - burn) / width)
    if b > nbins - 1:
        b = nbins - 1
    return b


@njit(cache=True, nogil=True, inline="always")
def _toggle(y, pos, slot, K, s):
    """Like :func:`toggle_site` but with the count held in a register."""
    if y[s]:
        y[s] = 0
        k = slot[s]
        last = K - 1
        moved = pos[last]
        pos[k] = moved
        slot[moved] = k
        slot[s] = -1
        return last
    y[s] = 1
    pos[K] = s
    slot[s] = K
    return K + 1


@njit(cache=True, nogil=True, inline="always")
def _locate(t, T, burn, nbins):
    """Bin index containing ``t`` (-1 during burn-in) and its right edge."""
    if t < burn:
        return -1, burn
    width = (T - burn) / nbins
    b = int((t - burn) / width)
    if b > nbins - 1:
        b = nbins - 1
    if b > 0 and t < burn + b * width:
        b -= 1
    end = T if b == nbins - 1 else burn + (b + 1) * width
    return b, end


@njit(cache=True, nogil=True, inline="always")
def _choose(u, K, M, p0, p1, alpha):
    # one uniform picks both the particle and the menu entry
    x = u * K
    idx = int(x)
    if idx >= K:
        idx = K - 1
    frac = x - idx
    choice = M - 1
    acc = 0.0
    for m in range(M):
        acc += p0[m] + p1[m] * alpha
        if frac < acc:
            choice = m
            break
    while p0[choice] + p1[choice] * alpha <= 0.0 and choice > 0:
        choice -= 1
    return idx, choice


@njit(cache=True, nogil=True)
def sweep_kernel(y, pos, slot, cnt, tnow, t_end,
                 offs, p0, p1, N, T, burn, nbins, ab, ae,
                 pat_offs, pat_start, par, oddcount,
                 exps, unifs, ibuf,
                 acc_alpha, acc_elapsed, acc_ones, acc_k, acc_pat, acc_norm, acc_events,
                 debug):
    """Particle-driven Gillespie loop for uniform-rate pair-flip menus.

    Intervals that stay inside the current bin are summed in registers and
    flushed when the bin changes; only edge-crossing intervals go through
    :func:`accumulate`.
    """
    t = tnow[0]
    i = ibuf[0]
    K = cnt[0]
    M = offs.shape[0]
    P = oddcount.size
    track = pat_start.size > 1
    maxk = acc_k.shape[1] - 1
    slope = (ae - ab) / T
    nbuf = exps.size
    status = BUFFER_EMPTY
    cb, cb_end = _locate(t, T, burn, nbins)
    s_el = 0.0
    s_al = 0.0
    s_ones = 0.0
    s_pat = np.zeros(P)
    n_ev = 0
    while i < nbuf:
        if t >= t_end:
            status = REACHED_END
            break
        if K == 0:
            status = EXTINCT
            break
        dt = exps[i] / K
        u = unifs[i]
        i += 1
        t_next = t + dt
        stop = t_next if t_next < t_end else t_end
        if stop <= cb_end:
            if cb >= 0:
                d = stop - t
                s_el += d
                s_al += d * (ab + slope * 0.5 * (t + stop))
                s_ones += K * d
                if K <= maxk:
                    acc_k[cb, K] += d
                for p in range(P):
                    s_pat[p] += oddcount[p] * d
        else:
            if cb >= 0:
                acc_elapsed[cb] += s_el
                acc_alpha[cb] += s_al
                acc_ones[cb] += s_ones
                acc_norm[cb] += s_ones / N
                acc_events[cb] += n_ev
                for p in range(P):
                    acc_pat[cb, p] += s_pat[p] / N
            for p in range(P):
                s_pat[p] = 0.0
            s_el = 0.0
            s_al = 0.0
            s_ones = 0.0
            n_ev = 0
            accumulate(t, stop, K, N, T, burn, nbins, ab, ae, oddcount,
                       acc_alpha, acc_elapsed, acc_ones, acc_k, acc_pat, acc_norm)
            cb, cb_end = _locate(stop, T, burn, nbins)
        if t_next >= t_end:
            # memoryless: the pending holding time is simply discarded
            t = t_end
            status = REACHED_END
            break
        idx, choice = _choose(u, K, M, p0, p1, ab + slope * t)
        j = pos[idx]
        s1 = (j + offs[choice, 0]) % N
        s2 = (j + offs[choice, 1]) % N
        K0 = K
        K = _toggle(y, pos, slot, K, s1)
        K = _toggle(y, pos, slot, K, s2)
        if track:
            update_patterns(s1, N, pat_offs, pat_start, par, oddcount)
            update_patterns(s2, N, pat_offs, pat_start, par, oddcount)
        t = t_next
        if cb >= 0:
            n_ev += 1
        if debug and (K - K0) % 2 != 0:
            status = PARITY_VIOLATION
            break
    if cb >= 0:
        acc_elapsed[cb] += s_el
        acc_alpha[cb] += s_al
        acc_ones[cb] += s_ones
        acc_norm[cb] += s_ones / N
        acc_events[cb] += n_ev
        for p in range(P):
            acc_pat[cb, p] += s_pat[p] / N
    cnt[0] = K
    tnow[0] = t
    ibuf[0] = i
    return status


@njit(cache=True, nogil=True, inline="always")
def _frame_add(s, e, T, burn, nbins, ab, slope, acc_elapsed, acc_alpha):
    if e <= burn:
        return
    if s < burn:
        s = burn
    b, end = _locate(s, T, burn, nbins)
    while True:
        stop = e if e < end else end
        d = stop - s
        if d > 0.0:
            acc_elapsed[b] += d
            acc_alpha[b] += d * (ab + slope * 0.5 * (s + stop))
        if stop >= e or b == nbins - 1:
            break
        s = stop
        b += 1
        end = T if b == nbins - 1 else burn + (b + 1) * ((T - burn) / nbins)


@njit(cache=True, nogil=True)
def frame_kernel(z, pos, slot, cnt, state_i, tnow, t_end,
                 offs, p0, p1, W, T, burn, nbins, ab, ae,
                 exps, unifs, ibuf,
                 acc_elapsed, acc_alpha, acc_disp, acc_events, acc_restarts):
    """Interface process seen from its leftmost particle on a window of W sites.

    ``state_i`` holds ``[base, displacement, dropped, restarts]``; logical site
    ``q`` lives at physical slot ``(base + q) % W``.  Particles pushed past the
    right end of the window are dropped, and if the window empties a single
    particle is restarted at the anchor.
    """
    t = tnow[0]
    i = ibuf[0]
    K = cnt[0]
    base = state_i[0]
    M = offs.shape[0]
    slope = (ae - ab) / T
    nbuf = exps.size
    status = BUFFER_EMPTY
    cb, cb_end = _locate(t, T, burn, nbins)
    s_el = 0.0
    s_al = 0.0
    n_ev = 0
    n_disp = 0
    while i < nbuf:
        if t >= t_end:
            status = REACHED_END
            break
        dt = exps[i] / K
        u = unifs[i]
        i += 1
        t_next = t + dt
        stop = t_next if t_next < t_end else t_end
        if stop <= cb_end:
            if cb >= 0:
                d = stop - t
                s_el += d
                s_al += d * (ab + slope * 0.5 * (t + stop))
        else:
            if cb >= 0:
                acc_elapsed[cb] += s_el
                acc_alpha[cb] += s_al
                acc_events[cb] += n_ev
                acc_disp[cb] += n_disp
            s_el = 0.0
            s_al = 0.0
            n_ev = 0
            n_disp = 0
            _frame_add(t, stop, T, burn, nbins, ab, slope, acc_elapsed, acc_alpha)
            cb, cb_end = _locate(stop, T, burn, nbins)
        if t_next >= t_end:
            t = t_end
            status = REACHED_END
            break
        idx, choice = _choose(u, K, M, p0, p1, ab + slope * t)
        j = (pos[idx] - base) % W
        k1 = j + offs[choice, 0]
        k2 = j + offs[choice, 1]
        shift = 0
        kmin = k1 if k1 < k2 else k2
        if kmin < 0:
            # extend to the left; the far right falls off
            for q in range(W + kmin, W):
                ph = (base + q) % W
                if z[ph]:
                    K = _toggle(z, pos, slot, K, ph)
                    state_i[2] += 1
            base = (base + kmin) % W
            shift = kmin
            k1 -= kmin
            k2 -= kmin
        if k1 < W:
            K = _toggle(z, pos, slot, K, (base + k1) % W)
        if k2 < W:
            K = _toggle(z, pos, slot, K, (base + k2) % W)
        t = t_next
        if K == 0:
            K = _toggle(z, pos, slot, K, base)
            state_i[3] += 1
            if cb >= 0:
                acc_restarts[cb] += 1
        else:
            q = 0
            while z[(base + q) % W] == 0:
                q += 1
            base = (base + q) % W
            shift += q
        state_i[1] += shift
        if cb >= 0:
            n_ev += 1
            n_disp += shift
    if cb >= 0:
        acc_elapsed[cb] += s_el
        acc_alpha[cb] += s_al
        acc_events[cb] += n_ev
        acc_disp[cb] += n_disp
    cnt[0] = K
    tnow[0] = t
    ibuf[0] = i
    state_i[0] = base
    return status
