"""Stationary distribution, surprise statistics and the rolling liquidity quantile.

All information quantities are in nats.  The per-transition surprise of a
path is -log of the transition probability taken; windows standardize the
summed surprise by K * h1 and sqrt(K * h2) and report the upper-tail
normal quantile as liquidity.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve
from scipy.special import ndtr

from . import _kernels
from .markov import TransitionMatrix
from .network import TransitionLog

LIQUIDITY_HEADER = "time_ms,K,surprise_nats,z,liquidity,low_confidence"


@dataclass(frozen=True)
class InfoSummary:
    """Stationary distribution with first/second order informativeness."""

    mu: np.ndarray
    h1: float
    h2: float


@dataclass(frozen=True)
class LiquiditySample:
    time: int
    K: int
    surprise: float
    z: float
    liquidity: float
    low_confidence: bool


def _sparse_w(matrix: TransitionMatrix) -> sparse.csr_matrix:
    N = matrix.n_states
    rows, cols, vals = [], [], []
    for c in (0, 1):
        mask = (matrix.succ[:, c] >= 0) & (matrix.probs[:, c] > 0)
        rows.append(np.flatnonzero(mask))
        cols.append(matrix.succ[mask, c])
        vals.append(matrix.probs[mask, c])
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N))


def stationary_distribution(matrix: TransitionMatrix) -> np.ndarray:
    """Unique mu with mu W = mu, sum mu = 1, by direct linear solve.

    The chain is periodic (every transition flips one bit), so power
    iteration would not converge; instead solve (W^T - I) mu = 0 with one
    equation replaced by the normalization row.  Raises on a reducible
    matrix.
    """
    W = _sparse_w(matrix)
    N = matrix.n_states
    n_comp = connected_components(W, directed=True, connection="strong",
                                  return_labels=False)
    if n_comp != 1:
        raise ValueError(f"matrix is reducible ({n_comp} strongly connected components)")
    A = (W.T - sparse.identity(N, format="csr")).tocoo()
    keep = A.row != N - 1
    rows = np.concatenate([A.row[keep], np.full(N, N - 1)])
    cols = np.concatenate([A.col[keep], np.arange(N)])
    vals = np.concatenate([A.data[keep], np.ones(N)])
    lhs = sparse.csr_matrix((vals, (rows, cols)), shape=(N, N))
    rhs = np.zeros(N)
    rhs[N - 1] = 1.0
    mu = spsolve(lhs, rhs)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def _row_entropies(matrix: TransitionMatrix) -> np.ndarray:
    """Binary entropy of each row's branch (zero for blind spots)."""
    p = matrix.probs
    out = np.zeros(matrix.n_states)
    for c in (0, 1):
        q = p[:, c]
        pos = q > 0
        out[pos] -= q[pos] * np.log(q[pos])
    return out


def entropy_rate(matrix: TransitionMatrix, mu: np.ndarray) -> float:
    """First-order informativeness: mu-weighted expected row surprise.

    Bounded above by log 2 since every row has at most two branches.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (matrix.n_states,):
        raise ValueError("mu has wrong length")
    return float(mu @ _row_entropies(matrix))


def simulate_surprise_series(matrix: TransitionMatrix, length: int, seed,
                             mu: Optional[np.ndarray] = None,
                             chunk: int = 4_000_000) -> np.ndarray:
    """Per-step surprises of a simulated chain started from mu."""
    if mu is None:
        mu = stationary_distribution(matrix)
    rng = np.random.default_rng(seed)
    state = int(rng.choice(matrix.n_states, p=mu))
    succ0 = np.ascontiguousarray(matrix.succ[:, 0])
    succ1 = np.ascontiguousarray(np.where(matrix.succ[:, 1] >= 0,
                                          matrix.succ[:, 1], 0))
    p0 = np.ascontiguousarray(matrix.probs[:, 0])
    out = np.empty(length)
    done = 0
    while done < length:
        m = min(chunk, length - done)
        u = rng.random(m)
        state = _kernels.chain_surprise_chunk(succ0, succ1, p0, state, u,
                                              out[done:done + m])
        done += m
    return out


def variance_rate(series: np.ndarray, truncation_lag: int,
                  taper: str = "flat") -> float:
    """Truncated-autocovariance estimate of a series' CLT variance rate.

        sigma^2 = R(0) + 2 sum_{tau=1}^{lag} w(tau) R(tau),
        R(tau) = sample autocovariance centered on the sample mean.

    ``taper="flat"`` uses w = 1 (the plain truncated estimator);
    ``taper="bartlett"`` uses w = 1 - tau/(lag+1), which equals the exact
    variance of a window-sum of lag+1 consecutive terms divided by the
    window length, the right scale for standardizing sums over windows of
    that size.  Uses an FFT beyond small lags; clamped at zero.
    """
    n = len(series)
    if truncation_lag >= n:
        raise ValueError("truncation_lag must be below the series length")
    x = np.asarray(series, dtype=np.float64) - np.mean(series)
    lags = np.arange(truncation_lag + 1)
    if truncation_lag <= 8:
        R = np.array([float(x[t:] @ x[: n - t]) for t in lags])
    else:
        size = 1
        while size < n + truncation_lag + 1:
            size <<= 1
        f = np.fft.rfft(x, size)
        R = np.fft.irfft(f * np.conj(f))[: truncation_lag + 1]
    R = R / (n - lags)
    if taper == "bartlett":
        weights = 1.0 - lags[1:] / (truncation_lag + 1.0)
    elif taper == "flat":
        weights = np.ones(truncation_lag)
    else:
        raise ValueError(f"unknown taper '{taper}'")
    return max(float(R[0] + 2.0 * (weights @ R[1:])), 0.0)


def surprise_variance_rate(matrix: TransitionMatrix, chain_length: int = 10_000_000,
                           truncation_lag: int = 64, seed=0,
                           mu: Optional[np.ndarray] = None) -> float:
    """Second-order informativeness: CLT variance of per-step surprise.

    Estimated from a simulated chain via :func:`variance_rate`.
    Deterministic given the seed.
    """
    if truncation_lag >= chain_length:
        raise ValueError("truncation_lag must be below chain_length")
    x = simulate_surprise_series(matrix, chain_length, seed, mu=mu)
    return variance_rate(x, truncation_lag)


def info_summary(matrix: TransitionMatrix, chain_length: int = 10_000_000,
                 truncation_lag: int = 64, seed=0) -> InfoSummary:
    """Bundle mu, h1 and the simulated h2 for a matrix."""
    mu = stationary_distribution(matrix)
    h1 = entropy_rate(matrix, mu)
    h2 = surprise_variance_rate(matrix, chain_length, truncation_lag, seed, mu=mu)
    return InfoSummary(mu=mu, h1=h1, h2=h2)


def calibrate_stream_info(log: TransitionLog, matrix: TransitionMatrix,
                          truncation_lag: Optional[int] = None,
                          window_ms: Optional[int] = None) -> InfoSummary:
    """InfoSummary with h1/h2 estimated from an observed transition stream.

    The sample-entropy convergence theorems standardize a path's surprise
    by the *process's own* entropy rate and variance rate.  The dissected
    process carries memory across scales that the first-order model
    ignores, so its mean surprise sits above the model h1 and its
    variance rate depends on horizon; this calibrator measures both on
    the observed stream (h1 = mean surprise, h2 = truncated
    autocovariance rate, lag matched to the typical window occupancy when
    ``window_ms`` is given).
    """
    s = transition_surprises(log, matrix)
    if truncation_lag is None:
        if window_ms is not None and len(log) > 1:
            span = max(int(log.times[-1]) - int(log.times[0]), 1)
            typical_k = len(log) * window_ms / span
            truncation_lag = int(min(max(typical_k, 16), len(s) // 20))
        else:
            truncation_lag = int(min(256, max(len(s) // 20, 1)))
    h2 = variance_rate(s, truncation_lag, taper="bartlett")
    return InfoSummary(mu=stationary_distribution(matrix),
                       h1=float(s.mean()), h2=h2)


def transition_surprises(log: TransitionLog, matrix: TransitionMatrix) -> np.ndarray:
    """-log P(from -> to) per record; raises on a zero-probability edge."""
    frm = log.from_states
    to = log.to_states
    p = np.where(to == matrix.succ[frm, 0], matrix.probs[frm, 0],
                 np.where(to == matrix.succ[frm, 1], matrix.probs[frm, 1], 0.0))
    if np.any(p <= 0.0):
        k = int(np.flatnonzero(p <= 0.0)[0])
        raise ValueError(
            f"zero-probability edge {int(frm[k])}->{int(to[k])} at record {k}: "
            "model and data disagree")
    return -np.log(p)


def path_surprise(log: TransitionLog, matrix: TransitionMatrix) -> float:
    """Total surprise of a transition sequence (additive over segments)."""
    if len(log) == 0:
        return 0.0
    return float(transition_surprises(log, matrix).sum())


class LiquidityFrame:
    """Rolling liquidity samples on a fixed cadence grid."""

    def __init__(self, times, counts, surprises, z, liquidity, low_confidence):
        self.times = np.ascontiguousarray(times, dtype=np.int64)
        self.counts = np.ascontiguousarray(counts, dtype=np.int64)
        self.surprises = np.ascontiguousarray(surprises, dtype=np.float64)
        self.z = np.ascontiguousarray(z, dtype=np.float64)
        self.liquidity = np.ascontiguousarray(liquidity, dtype=np.float64)
        self.low_confidence = np.ascontiguousarray(low_confidence, dtype=bool)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> LiquiditySample:
        return LiquiditySample(int(self.times[k]), int(self.counts[k]),
                               float(self.surprises[k]), float(self.z[k]),
                               float(self.liquidity[k]), bool(self.low_confidence[k]))

    def __iter__(self) -> Iterator[LiquiditySample]:
        for k in range(len(self)):
            yield self[k]

    def to_csv(self) -> str:
        """Liquidity rounded to 6 decimals; other floats full precision."""
        out = io.StringIO()
        out.write(LIQUIDITY_HEADER + "\n")
        for k in range(len(self)):
            out.write(f"{self.times[k]},{self.counts[k]},"
                      f"{float(self.surprises[k])!r},{float(self.z[k])!r},"
                      f"{self.liquidity[k]:.6f},{int(self.low_confidence[k])}\n")
        return out.getvalue()


def liquidity_stream(log: TransitionLog, matrix: TransitionMatrix,
                     info: InfoSummary, window_ms: int, cadence_ms: int,
                     k_min: int = 30) -> LiquidityFrame:
    """Standardized windowed surprise mapped to its normal quantile.

    At each cadence point t (grid aligned to multiples of the cadence)
    the records in the half-open window (t - window, t] give the count K
    and summed surprise gamma; then z = (gamma - K h1) / sqrt(K h2) and
    liquidity = 1 - Phi(z).  Windows with K = 0 (market inactive, e.g.
    weekends) are suppressed; windows with K below ``k_min`` are flagged
    low-confidence.
    """
    if window_ms <= 0 or cadence_ms <= 0:
        raise ValueError("window and cadence must be positive durations")
    if len(log) == 0:
        return LiquidityFrame(*[np.empty(0)] * 6)
    s = transition_surprises(log, matrix)
    cs = np.concatenate([[0.0], np.cumsum(s)])
    t0 = int(log.times[0])
    t1 = int(log.times[-1])
    first = (t0 // cadence_ms + 1) * cadence_ms
    last = -(-t1 // cadence_ms) * cadence_ms
    grid = np.arange(first, last + 1, cadence_ms, dtype=np.int64)
    lo = np.searchsorted(log.times, grid - window_ms, side="right")
    hi = np.searchsorted(log.times, grid, side="right")
    counts = hi - lo
    active = counts > 0
    grid, lo, hi, counts = grid[active], lo[active], hi[active], counts[active]
    gamma = cs[hi] - cs[lo]
    centered = gamma - counts * info.h1
    if info.h2 <= 0.0:
        if np.max(np.abs(centered), initial=0.0) > 1e-9 * max(1.0, np.abs(gamma).max()):
            raise ValueError("h2 is zero but windowed surprise varies: degenerate ladder")
        z = np.zeros(len(grid))
    else:
        z = centered / np.sqrt(counts * info.h2)
    liquidity = ndtr(-z)  # 1 - Phi(z), evaluated without cancellation
    return LiquidityFrame(grid, counts, gamma, z, liquidity, counts < k_min)
