"""Brownian-path simulation and empirical estimators: the ground truth oracle.

Every simulation draws from numpy's PCG64 (``default_rng``) outside the
compiled kernels, so results are bit-reproducible per seed and identical
between the numba and pure-Python backends.  Time is measured in seconds
(volatility per sqrt-second, drift per second); emitted tick timestamps
are integer milliseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from . import _kernels
from .dc import StreamingDissector, ThresholdLadder
from .markov import TransitionMatrix, drifted_escape_probability
from .network import far_bit, replay
from .ticks import PriceSeries

RESOLUTION_FACTOR = 20.0  # require sigma * sqrt(dt) <= delta / 20


class ResolutionError(ValueError):
    """Step size too coarse for the smallest threshold under study."""


class BudgetError(RuntimeError):
    """Step budget exhausted before the requested sample size was reached."""


@dataclass(frozen=True)
class SimConfig:
    """Arithmetic random walk x_{t+1} = x_t + mu dt + sigma sqrt(dt) xi."""

    sigma: float
    dt: float
    steps: int
    mu: float = 0.0
    x0: float = 1.0
    seed: object = 0  # anything numpy's default_rng accepts
    t0_ms: int = 0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.x0 <= 0:
            raise ValueError("x0 must be positive")

    @property
    def step_sd(self) -> float:
        """Standard deviation of one increment, sigma * sqrt(dt)."""
        return self.sigma * math.sqrt(self.dt)

    def meets_resolution(self, delta: float) -> bool:
        """True when sigma sqrt(dt) <= delta * x0 / 20 (relative threshold delta)."""
        return self.step_sd <= delta * self.x0 / RESOLUTION_FACTOR

    def require_resolution(self, delta: float):
        if not self.meets_resolution(delta):
            raise ResolutionError(
                f"sigma*sqrt(dt)={self.step_sd:.3e} exceeds delta*x0/"
                f"{RESOLUTION_FACTOR:g}={delta * self.x0 / RESOLUTION_FACTOR:.3e}")


def _times_ms(config: SimConfig, start_index: int, count: int) -> np.ndarray:
    step_ms = config.dt * 1000.0
    if step_ms == int(step_ms):
        return config.t0_ms + int(step_ms) * np.arange(
            start_index, start_index + count, dtype=np.int64)
    idx = np.arange(start_index, start_index + count, dtype=np.int64)
    return config.t0_ms + np.rint(idx * step_ms).astype(np.int64)


def simulate_path(config: SimConfig, instrument: str = "sim") -> PriceSeries:
    """Walk of ``config.steps`` ticks starting at x0; zero spread (bid = ask).

    Byte-identical output for identical configs.
    """
    rng = np.random.default_rng(config.seed)
    inc = config.mu * config.dt + config.step_sd * rng.standard_normal(config.steps - 1)
    x = np.empty(config.steps)
    x[0] = config.x0
    np.cumsum(inc, out=x[1:])
    x[1:] += config.x0
    return PriceSeries.from_mid(_times_ms(config, 0, config.steps), x, instrument)


class _PathChunks:
    """Stream one long walk in chunks without materializing it."""

    def __init__(self, config: SimConfig, chunk: int = 2_000_000):
        self.config = config
        self.chunk = chunk
        self.rng = np.random.default_rng(config.seed)
        self.x_last = config.x0
        self.emitted = 0

    def __iter__(self):
        cfg = self.config
        first = True
        while self.emitted < cfg.steps:
            m = min(self.chunk, cfg.steps - self.emitted)
            n_inc = m - 1 if first else m
            inc = cfg.mu * cfg.dt + cfg.step_sd * self.rng.standard_normal(n_inc)
            x = np.empty(m)
            if first:
                x[0] = cfg.x0
                np.cumsum(inc, out=x[1:])
                x[1:] += cfg.x0
                first = False
            else:
                np.cumsum(inc, out=x)
                x += self.x_last
            times = _times_ms(cfg, self.emitted, m)
            self.x_last = float(x[-1])
            self.emitted += m
            yield times, x


class BridgeDissector:
    """Continuum-fidelity dissection of a simulated path.

    Between consecutive sampled points the within-step high and low are
    drawn from the Brownian-bridge extreme law, so runner statistics
    converge to the continuous-time model at coarse steps (tick-level
    dissection is biased O(sqrt(dt)) at the trailing barrier).  Purely an
    oracle device: real tick data has no hidden intra-tick path.
    """

    def __init__(self, ladder: ThresholdLadder, step_var: float):
        self.ladder = ladder
        self.step_var = float(step_var)
        n = ladder.n
        self._mode = [1] * n
        self._ext = [math.nan] * n
        self._ext_time = [0] * n
        self._last_price = [0.0] * n
        self._last_time = [0] * n
        self._have_prev = [False] * n
        self._x_prev = [0.0] * n
        self._chunks = [[] for _ in range(n)]

    def start(self, t0: int, x0: float):
        for i in range(self.ladder.n):
            self._ext[i] = x0
            self._ext_time[i] = int(t0)
            self._x_prev[i] = x0

    def event_count(self, i: int = None) -> int:
        which = range(self.ladder.n) if i is None else (i,)
        return sum(len(c[0]) for k in which for c in self._chunks[k])

    def feed(self, times, prices, u_hi, u_lo):
        """Process steps ending at ``prices`` (one uniform pair per step)."""
        times = np.ascontiguousarray(times, dtype=np.int64)
        prices = np.ascontiguousarray(prices, dtype=np.float64)
        cap = len(times)
        if cap == 0:
            return
        for i, delta in enumerate(self.ladder.deltas):
            if math.isnan(self._ext[i]):
                raise RuntimeError("call start() before feed()")
            out_dir = np.empty(cap, dtype=np.int8)
            out_time = np.empty(cap, dtype=np.int64)
            out_price = np.empty(cap, dtype=np.float64)
            out_amp = np.empty(cap, dtype=np.float64)
            out_dur = np.empty(cap, dtype=np.int64)
            (m, self._mode[i], self._ext[i], self._ext_time[i],
             self._last_price[i], self._last_time[i], self._have_prev[i],
             self._x_prev[i]) = _kernels.dissect_bridge_chunk(
                times, prices, u_hi, u_lo, self.step_var, delta,
                self._mode[i], self._ext[i], self._ext_time[i],
                self._last_price[i], self._last_time[i], self._have_prev[i],
                self._x_prev[i], out_dir, out_time, out_price, out_amp, out_dur)
            if m:
                self._chunks[i].append((out_time[:m].copy(), out_price[:m].copy(),
                                        out_dir[:m].copy(), out_amp[:m].copy(),
                                        out_dur[:m].copy()))

    def streams(self) -> list:
        from .dc import EventStream
        out = []
        for i in range(self.ladder.n):
            parts = self._chunks[i]
            if parts:
                out.append(EventStream(
                    i, np.concatenate([p[0] for p in parts]),
                    np.concatenate([p[1] for p in parts]),
                    np.concatenate([p[2] for p in parts]),
                    np.concatenate([p[3] for p in parts]),
                    np.concatenate([p[4] for p in parts])))
            else:
                out.append(EventStream(i, [], [], [], [], []))
        return out


def _bridge_chunks(config: SimConfig, chunk: int = 4_000_000):
    """Yield (times, prices, u_hi, u_lo) step blocks for a BridgeDissector."""
    rng = np.random.default_rng(config.seed)
    x_last = config.x0
    emitted = 1  # index 0 is the starting point handled by start()
    while emitted < config.steps:
        m = min(chunk, config.steps - emitted)
        inc = config.mu * config.dt + config.step_sd * rng.standard_normal(m)
        u_hi = rng.random(m)
        u_lo = rng.random(m)
        x = np.empty(m)
        np.cumsum(inc, out=x)
        x += x_last
        times = _times_ms(config, emitted, m)
        x_last = float(x[-1])
        emitted += m
        yield times, x, u_hi, u_lo


@dataclass(frozen=True)
class FitReport:
    """Overshoot statistics of a dissected Brownian path against theory."""

    delta: float
    n_overshoots: int
    mean_ratio: float
    ks_statistic: float
    ks_pvalue: float


def _segment_steps(config: SimConfig, level_cap: float) -> int:
    """Steps before the level is expected to wander ``level_cap`` of x0.

    Relative thresholds on an arithmetic walk stay faithful to the
    constant-volatility analysis only while the price level is near its
    start (and fail catastrophically near zero), so long oracle runs are
    split into independent short paths.
    """
    steps = int((level_cap * config.x0 / config.step_sd) ** 2)
    return max(steps, 1000)


def _segment_configs(config: SimConfig, segment_steps: int):
    """Independent per-segment configs keyed off the parent seed.

    Segment k draws from PCG64 seeded with SeedSequence(seed, spawn_key=(k,)),
    so segments are independent streams yet fully reproducible.
    """
    k = 0
    while True:
        yield SimConfig(sigma=config.sigma, dt=config.dt, steps=segment_steps,
                        mu=config.mu, x0=config.x0,
                        seed=np.random.SeedSequence(entropy=config.seed,
                                                    spawn_key=(k,)),
                        t0_ms=config.t0_ms)
        k += 1


def verify_fit(config: SimConfig, delta: float, n_overshoots: int,
               discard: int = 2, bridge: bool = True,
               level_cap: float = 0.05) -> FitReport:
    """Collect overshoots of one runner on simulated paths and test theory.

    Reports mean |overshoot| / delta (expected 1) and the KS test of the
    amplitudes against Exponential(mean delta).  With ``bridge`` (default)
    the within-step extremes are sampled so the estimate converges at the
    resolution guard; without it the raw tick dissection is used, whose
    trailing-barrier bias only vanishes as dt shrinks.

    The run is split into independent path segments short enough for the
    price level to stay within ``level_cap`` of its start; the first
    ``discard`` events of every segment are dropped to erase
    initialization.  ``config.steps`` is the total step budget.
    """
    config.require_resolution(delta)
    seg_steps = min(_segment_steps(config, level_cap), config.steps)
    ladder = ThresholdLadder((delta,))
    amps_parts = []
    collected = 0
    used = 0
    for seg in _segment_configs(config, seg_steps):
        if collected >= n_overshoots or used >= config.steps:
            break
        if bridge:
            dissector = BridgeDissector(ladder, step_var=config.step_sd ** 2)
            dissector.start(seg.t0_ms, seg.x0)
            for times, x, u_hi, u_lo in _bridge_chunks(seg):
                dissector.feed(times, x, u_hi, u_lo)
        else:
            dissector = StreamingDissector(ladder)
            for times, x in _PathChunks(seg):
                dissector.feed(times, x)
        used += seg.steps
        part = np.abs(dissector.streams()[0].overshoots(discard=discard))
        amps_parts.append(part)
        collected += len(part)
    amps = (np.concatenate(amps_parts) if amps_parts else np.empty(0))[:n_overshoots]
    if len(amps) < n_overshoots:
        raise BudgetError(
            f"only {len(amps)} overshoots collected within {config.steps} steps")
    mean_ratio = float(amps.mean() / delta)
    ks = stats.kstest(amps, "expon", args=(0.0, delta))
    return FitReport(delta, len(amps), mean_ratio,
                     float(ks.statistic), float(ks.pvalue))


@dataclass(frozen=True)
class EmpiricalMatrix:
    """Transition frequencies with per-edge counts for error bars.

    Rows never visited have zero probability mass; ``matrix.validate()``
    is therefore only meaningful for well-sampled runs.
    """

    matrix: TransitionMatrix
    edge_counts: np.ndarray  # (2^n, 2) counts aligned with matrix.succ
    n_transitions: int

    def stderr(self) -> np.ndarray:
        """Binomial standard error per edge (NaN for unvisited rows)."""
        totals = self.edge_counts.sum(axis=1, keepdims=True).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            p = self.edge_counts / totals
            return np.sqrt(p * (1.0 - p) / totals)


def empirical_matrix(config: SimConfig, ladder: ThresholdLadder,
                     n_transitions: int, level_cap: float = 0.05) -> EmpiricalMatrix:
    """Dissect and replay simulated paths; tally observed transitions.

    Runs independent path segments (see ``level_cap``) so the price level
    never drifts far from its start; each segment re-seeds the market
    state from its own first confirmations.  Stops once ``n_transitions``
    records accumulated; exhausting the ``config.steps`` budget first
    raises :class:`BudgetError`.

    Note: these are frequencies of the *dissected process*, which carries
    memory across scales; they sit measurably away from the first-order
    model wherever a threshold's reference extremum predates the current
    state (the model's closed form is exact only for the memoryless
    race).
    """
    config.require_resolution(ladder[0])
    n = ladder.n
    N = 1 << n
    counts = np.zeros((N, 2), dtype=np.int64)
    total = 0
    used = 0
    seg_steps = min(_segment_steps(config, level_cap), config.steps)
    for seg in _segment_configs(config, seg_steps):
        if total >= n_transitions or used >= config.steps:
            break
        dissector = StreamingDissector(ladder)
        for times, x in _PathChunks(seg):
            dissector.feed(times, x)
        used += seg.steps
        log = replay(dissector.streams(), n)
        if len(log) == 0:
            continue
        frm = log.from_states
        to = log.to_states
        col = np.where(to == (frm ^ 1), 0, 1)
        np.add.at(counts, (frm, col), 1)
        total += len(log)
    if total < n_transitions:
        raise BudgetError(
            f"only {total} transitions within {config.steps} steps "
            f"(requested {n_transitions})")
    succ = np.full((N, 2), -1, dtype=np.int64)
    succ[:, 0] = np.arange(N) ^ 1
    for s in range(N):
        j = far_bit(s, n)
        if j >= 0:
            succ[s, 1] = s ^ (1 << j)
    totals = counts.sum(axis=1)
    probs = np.zeros((N, 2))
    visited = totals > 0
    probs[visited] = counts[visited] / totals[visited, None]
    return EmpiricalMatrix(TransitionMatrix(n, succ, probs), counts, int(total))


def first_passage_probability(rise: float, trail: float, mu: float, sigma: float,
                              n_paths: int, dt: Optional[float] = None, seed=0,
                              x0: float = 0.0, bridge: bool = True,
                              batch: int = 20_000, steps_per_call: int = 256):
    """Monte Carlo estimate of the two-barrier race probability.

    Fixed upper barrier at ``x0 + rise``; trailing lower barrier ``trail``
    below the running maximum.  Barriers are absolute price moves.  With
    ``bridge`` (default) each step also applies the Brownian-bridge
    within-step crossing probability, cancelling the leading
    discrete-monitoring bias.  Returns (p_hat, stderr).
    """
    if rise <= 0 or trail <= 0 or sigma <= 0:
        raise ValueError("rise, trail and sigma must be positive")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if dt is None:
        scale = min(rise, trail) / RESOLUTION_FACTOR
        dt = (scale / sigma) ** 2
    step_sd = sigma * math.sqrt(dt)
    if step_sd > min(rise, trail) / RESOLUTION_FACTOR * 1.0000001:
        raise ResolutionError(
            f"sigma*sqrt(dt)={step_sd:.3e} exceeds min(rise,trail)/{RESOLUTION_FACTOR:g}")
    inv_var = 1.0 / (sigma * sigma * dt)
    mu_dt = mu * dt
    up = x0 + rise
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = n_paths
    while remaining > 0:
        b = min(batch, remaining)
        x = np.full(b, float(x0))
        runmax = np.full(b, float(x0))
        status = np.zeros(b, dtype=np.int8)
        while True:
            nb = len(x)
            normals = rng.standard_normal((nb, steps_per_call))
            if bridge:
                u_up = rng.random((nb, steps_per_call))
                u_dn = rng.random((nb, steps_per_call))
            else:
                u_up = u_dn = np.empty((nb, 0))
            _kernels.first_passage_chunk(x, runmax, status, normals, u_up, u_dn,
                                         mu_dt, step_sd, up, trail, inv_var,
                                         bridge)
            hits += int(np.sum(status == 1))
            alive = status == 0
            if not np.any(alive):
                break
            # compact so straggler paths stop wasting random draws
            x = np.ascontiguousarray(x[alive])
            runmax = np.ascontiguousarray(runmax[alive])
            status = np.zeros(len(x), dtype=np.int8)
        remaining -= b
    p = hits / n_paths
    stderr = math.sqrt(max(p * (1.0 - p), 1e-300) / n_paths)
    return p, stderr


def first_passage_check(rise: float, trail: float, mu: float, sigma: float,
                        n_paths: int, dt: Optional[float] = None, seed=0):
    """Closed form vs Monte Carlo; returns (analytic, p_hat, stderr)."""
    analytic = drifted_escape_probability(rise, trail, mu, sigma)
    p, se = first_passage_probability(rise, trail, mu, sigma, n_paths, dt=dt, seed=seed)
    return analytic, p, se


def seed_sweep(x0: float, max_delta: float, tick_rel: float = 1e-4,
               t0_ms: int = 0, dt_ms: int = 50, margin: float = 1.1,
               land_on: Optional[float] = None):
    """Deterministic zigzag covering +-max_delta to warm up every runner.

    One geometric up-leg beyond ``max_delta`` then a down-leg of the same
    relative size confirms one DC in each direction at every threshold of
    any ladder whose largest threshold is at most ``max_delta``, leaving
    all state bits at zero.  With ``land_on`` the whole zigzag is rescaled
    so its final price equals that level (relative moves are unchanged).
    Returns (times, prices) arrays to prepend to a simulated path.
    """
    if not 0 < tick_rel < max_delta:
        raise ValueError("need 0 < tick_rel < max_delta")
    top = x0 * (1.0 + margin * max_delta)
    up = [x0]
    while up[-1] < top:
        up.append(up[-1] * (1.0 + tick_rel))
    bottom = up[-1] * (1.0 - margin * max_delta)
    down = []
    last = up[-1]
    while last > bottom:
        last *= 1.0 - tick_rel
        down.append(last)
    prices = np.array(up + down)
    if land_on is not None:
        prices *= land_on / prices[-1]
    times = t0_ms + dt_ms * np.arange(len(prices), dtype=np.int64)
    return times, prices
