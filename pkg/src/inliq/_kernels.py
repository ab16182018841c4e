"""Hot inner loops shared by the event engine, chain simulator and oracles.

Every kernel here is a plain Python function over numpy arrays that gets
JIT-compiled with numba when available.  Setting ``INLIQ_NO_NUMBA=1`` (or
running without numba installed) selects the pure-Python fallback.  Both
paths execute the exact same source, draw no randomness of their own and
therefore produce bit-identical results; all random numbers are drawn
outside the kernels with numpy's PCG64 generator.
"""

import math
import os

import numpy as np

_flag = os.environ.get("INLIQ_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in {"1", "true", "yes", "on"}

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by INLIQ_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """No-op decorator standing in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


BACKEND = "numba" if HAVE_NUMBA else "python"


@njit(cache=True)
def dissect_chunk(times, prices, delta, mode, ext, ext_time, last_price,
                  last_time, have_prev, out_dir, out_time, out_price,
                  out_amp, out_dur):
    """Run one directional-change runner over a chunk of ticks.

    ``mode`` is the direction of the move that would confirm next
    (1 = a rise of ``delta`` confirms, 0 = a drop confirms); ``ext`` is
    the running extremum tracked against that move.  A confirmation at
    threshold ``delta`` (a relative move ``x / ext - 1``) emits one event
    carrying the amplitude and duration of the overshoot that just ended:
    the move from the previous confirmation price to the extremum.  The
    first confirmation has no completed overshoot (amplitude NaN).

    Returns the number of events written plus the updated runner state so
    chunks can be streamed.
    """
    m = 0
    for k in range(times.shape[0]):
        x = prices[k]
        t = times[k]
        if mode == 1:  # waiting for an up move, extremum tracks the minimum
            if x < ext:
                ext = x
                ext_time = t
            elif x / ext - 1.0 >= delta:
                if have_prev:
                    out_amp[m] = ext / last_price - 1.0
                    out_dur[m] = ext_time - last_time
                else:
                    out_amp[m] = np.nan
                    out_dur[m] = -1
                    have_prev = True
                out_dir[m] = 1
                out_time[m] = t
                out_price[m] = x
                m += 1
                mode = 0
                ext = x
                ext_time = t
                last_price = x
                last_time = t
        else:  # waiting for a down move, extremum tracks the maximum
            if x > ext:
                ext = x
                ext_time = t
            elif x / ext - 1.0 <= -delta:
                if have_prev:
                    out_amp[m] = ext / last_price - 1.0
                    out_dur[m] = ext_time - last_time
                else:
                    out_amp[m] = np.nan
                    out_dur[m] = -1
                    have_prev = True
                out_dir[m] = 0
                out_time[m] = t
                out_price[m] = x
                m += 1
                mode = 1
                ext = x
                ext_time = t
                last_price = x
                last_time = t
    return m, mode, ext, ext_time, last_price, last_time, have_prev


@njit(cache=True)
def dissect_bridge_chunk(times, prices, u_hi, u_lo, step_var, delta, mode, ext,
                         ext_time, last_price, last_time, have_prev, x_prev,
                         out_dir, out_time, out_price, out_amp, out_dur):
    """Continuum-fidelity runner for simulated paths.

    For each step the within-step high and low are drawn from the
    Brownian-bridge extreme law given the endpoints (variance
    ``step_var``), and the runner tracks those extremes instead of the
    sampled endpoints; confirmations happen exactly at the threshold
    level.  This removes the O(sqrt(dt)) bias that tick-level dissection
    of a sampled path carries, so oracle statistics converge at coarse
    steps.  Only for simulation oracles: market data has no hidden
    intra-tick path to sample.
    """
    m = 0
    for k in range(times.shape[0]):
        xn = prices[k]
        t = times[k]
        d = xn - x_prev
        high = 0.5 * (x_prev + xn + math.sqrt(
            d * d - 2.0 * step_var * math.log(u_hi[k])))
        low = 0.5 * (x_prev + xn - math.sqrt(
            d * d - 2.0 * step_var * math.log(u_lo[k])))
        if mode == 1:  # waiting for an up move
            if low < ext:
                ext = low
                ext_time = t
            if high / ext - 1.0 >= delta:
                conf = ext * (1.0 + delta)
                if have_prev:
                    out_amp[m] = ext / last_price - 1.0
                    out_dur[m] = ext_time - last_time
                else:
                    out_amp[m] = np.nan
                    out_dur[m] = -1
                    have_prev = True
                out_dir[m] = 1
                out_time[m] = t
                out_price[m] = conf
                m += 1
                mode = 0
                ext = high
                ext_time = t
                last_price = conf
                last_time = t
        else:  # waiting for a down move
            if high > ext:
                ext = high
                ext_time = t
            if low / ext - 1.0 <= -delta:
                conf = ext * (1.0 - delta)
                if have_prev:
                    out_amp[m] = ext / last_price - 1.0
                    out_dur[m] = ext_time - last_time
                else:
                    out_amp[m] = np.nan
                    out_dur[m] = -1
                    have_prev = True
                out_dir[m] = 0
                out_time[m] = t
                out_price[m] = conf
                m += 1
                mode = 1
                ext = low
                ext_time = t
                last_price = conf
                last_time = t
        x_prev = xn
    return m, mode, ext, ext_time, last_price, last_time, have_prev, x_prev


@njit(cache=True)
def replay_chunk(times, thresholds, directions, n, state, known, n_records,
                 out_time, out_from, out_to, out_trigger):
    """Fold merged directional-change events into state transitions.

    Events must arrive sorted by (time, threshold index).  Bits are packed
    little-endian into ``state`` (bit i set = overshoot at scale i moving
    up).  Until every threshold has confirmed once (``known`` bitmask
    full), events only seed bits and emit nothing.  Afterwards each event
    must be a legal single-bit flip: bit 0, or the lowest bit disagreeing
    with bit 0.

    Returns (written, state, known, n_records, error) with error codes
    0 = ok, 1 = non-alternating event stream, 2 = illegal transition.
    """
    full = (1 << n) - 1
    m = 0
    for k in range(times.shape[0]):
        i = thresholds[k]
        d = directions[k]
        bit = 1 << i
        is_up = d == 1
        if known != full:
            if (known & bit) != 0:
                old = (state >> i) & 1
                if old == d:
                    return m, state, known, n_records, 1
            if is_up:
                state |= bit
            else:
                state &= ~bit
            known |= bit
            continue
        old = (state >> i) & 1
        if old == d:
            return m, state, known, n_records, 1
        b1 = state & 1
        j = 0
        while j < n and ((state >> j) & 1) == b1:
            j += 1
        if i != 0 and i != j:
            return m, state, known, n_records, 2
        new = state | bit if is_up else state & ~bit
        out_time[m] = times[k]
        out_from[m] = state
        out_to[m] = new
        out_trigger[m] = i
        m += 1
        n_records += 1
        state = new
    return m, state, known, n_records, 0


@njit(cache=True)
def chain_surprise_chunk(succ0, succ1, p0, state, uniforms, out):
    """Advance a two-successor Markov chain, recording per-step surprise.

    At state s the chain moves to ``succ0[s]`` with probability ``p0[s]``
    (otherwise ``succ1[s]``); the recorded surprise is minus the log of
    the branch taken.  Blind states have ``p0 == 1`` and contribute zero.
    """
    for k in range(uniforms.shape[0]):
        p = p0[state]
        if uniforms[k] < p:
            out[k] = -math.log(p)
            state = succ0[state]
        else:
            out[k] = -math.log(1.0 - p)
            state = succ1[state]
    return state


@njit(cache=True)
def first_passage_chunk(x, runmax, status, normals, u_up, u_dn, mu_dt,
                        sig_sqdt, up, trail, inv_var, use_bridge):
    """Step surviving paths of the two-barrier race forward.

    Each path carries position ``x`` and running maximum ``runmax``; it is
    absorbed by the fixed upper barrier ``up`` (status 1) or by the
    trailing barrier ``runmax - trail`` (status 2).  With ``use_bridge``
    the within-step high and low are sampled from the Brownian-bridge
    extreme law (P(M >= m) = exp(-2 (m - a)(m - b) / sigma^2 dt)), which
    removes the leading discrete-monitoring bias and keeps the trailing
    reference honest between observations.
    """
    n_paths, n_steps = normals.shape
    for b in range(n_paths):
        if status[b] != 0:
            continue
        xb = x[b]
        mb = runmax[b]
        for k in range(n_steps):
            xn = xb + mu_dt + sig_sqdt * normals[b, k]
            if use_bridge:
                d = xn - xb
                high = 0.5 * (xb + xn + math.sqrt(
                    d * d - 2.0 * math.log(u_up[b, k]) / inv_var))
                if high >= up:
                    status[b] = 1
                    break
                low_path = 0.5 * (xb + xn - math.sqrt(
                    d * d - 2.0 * math.log(u_dn[b, k]) / inv_var))
                if low_path <= mb - trail:
                    status[b] = 2
                    break
                if high > mb:
                    mb = high
            else:
                if xn >= up:
                    status[b] = 1
                    break
                if xn <= mb - trail:
                    status[b] = 2
                    break
                if xn > mb:
                    mb = xn
            xb = xn
        x[b] = xb
        runmax[b] = mb


def kernel_functions():
    """The kernels, with their pure-Python twins when numba is active."""
    funcs = {}
    for fn in (dissect_chunk, dissect_bridge_chunk, replay_chunk,
               chain_surprise_chunk, first_passage_chunk):
        pure = getattr(fn, "py_func", fn)
        funcs[pure.__name__] = (fn, pure)
    return funcs
