"""Closed-form transition matrices, island contraction and the drifted escape law.

Matrices are stored row-sparse: every state has at most two successors
(flip of bit 0, flip of the far bit), so a 2^n x 2^n matrix reduces to
two (2^n, 2) arrays.  A dense view is materialized on demand for small n.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .dc import ThresholdLadder
from .network import far_bit

MATRIX_HEADER = "from,to,prob"
DENSE_LIMIT = 14  # 2^14 x 2^14 doubles ~ 2 GiB; refuse beyond


@dataclass(frozen=True)
class Island:
    """Pair of next-level-down states merged by dropping the smallest scale."""

    level: int
    index: int
    members: tuple

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("island level must be >= 1")


def island_members(k: int) -> tuple:
    """States collapsing into island k one level up: {2k, 2k+1}."""
    return (2 * k, 2 * k + 1)


def islands(n: int, level: int = 1) -> list:
    """All islands of the given level for an n-bit network."""
    if not 1 <= level <= n:
        raise ValueError(f"level {level} out of range for n={n}")
    count = 1 << (n - level)
    return [Island(level, k, island_members(k)) for k in range(count)]


class TransitionMatrix:
    """Row-stochastic transition probabilities on an n-bit network.

    ``succ[s, 0]`` is always ``s ^ 1`` with probability ``probs[s, 0]``;
    ``succ[s, 1]`` is the far-bit flip with the complementary probability,
    or -1 for the two blind spots (whose first column carries probability
    one).
    """

    def __init__(self, n: int, succ, probs):
        self.n = int(n)
        self.succ = np.ascontiguousarray(succ, dtype=np.int64)
        self.probs = np.ascontiguousarray(probs, dtype=np.float64)
        N = 1 << self.n
        if self.succ.shape != (N, 2) or self.probs.shape != (N, 2):
            raise ValueError("succ/probs must have shape (2^n, 2)")

    @property
    def n_states(self) -> int:
        return 1 << self.n

    def prob(self, u: int, v: int) -> float:
        """P(u -> v); zero for non-successors."""
        if self.succ[u, 0] == v:
            return float(self.probs[u, 0])
        if self.succ[u, 1] == v:
            return float(self.probs[u, 1])
        return 0.0

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise ValueError(f"dense view refused for n={self.n} (> {DENSE_LIMIT})")
        N = self.n_states
        W = np.zeros((N, N))
        idx = np.arange(N)
        W[idx, self.succ[:, 0]] = self.probs[:, 0]
        far = self.succ[:, 1] >= 0
        W[idx[far], self.succ[far, 1]] = self.probs[far, 1]
        return W

    def row_sums(self) -> np.ndarray:
        sums = self.probs[:, 0].copy()
        far = self.succ[:, 1] >= 0
        sums[far] += self.probs[far, 1]
        return sums

    def validate(self, atol: float = 1e-12):
        """Check row-stochasticity and the sparsity pattern; raise on failure."""
        N = self.n_states
        if np.any(self.probs < -atol) or np.any(self.probs > 1 + atol):
            raise ValueError("probabilities outside [0, 1]")
        if np.max(np.abs(self.row_sums() - 1.0)) > atol:
            raise ValueError("row sums deviate from 1")
        for s in range(N):
            if self.succ[s, 0] != s ^ 1:
                raise ValueError(f"state {s}: first successor must be {s ^ 1}")
            j = far_bit(s, self.n)
            if j < 0:
                if self.succ[s, 1] != -1 or self.probs[s, 1] != 0.0:
                    raise ValueError(f"blind spot {s} must have a single edge")
                if abs(self.probs[s, 0] - 1.0) > atol:
                    raise ValueError(f"blind spot {s} edge probability must be 1")
            elif self.succ[s, 1] != s ^ (1 << j):
                raise ValueError(f"state {s}: far successor must flip bit {j}")

    @classmethod
    def from_dense(cls, W, n: int) -> "TransitionMatrix":
        W = np.asarray(W, dtype=np.float64)
        N = 1 << n
        if W.shape != (N, N):
            raise ValueError(f"expected shape ({N}, {N})")
        succ = np.full((N, 2), -1, dtype=np.int64)
        probs = np.zeros((N, 2))
        for s in range(N):
            succ[s, 0] = s ^ 1
            probs[s, 0] = W[s, s ^ 1]
            j = far_bit(s, n)
            if j >= 0:
                succ[s, 1] = s ^ (1 << j)
                probs[s, 1] = W[s, succ[s, 1]]
            nz = np.flatnonzero(W[s])
            allowed = {succ[s, 0], succ[s, 1]}
            if any(v not in allowed for v in nz):
                raise ValueError(f"state {s} has probability mass outside its successors")
        return cls(n, succ, probs)

    def to_csv(self) -> str:
        """Sparse triplets ``from,to,prob``, full-precision floats."""
        out = io.StringIO()
        out.write(MATRIX_HEADER + "\n")
        for s in range(self.n_states):
            edges = [(int(self.succ[s, c]), float(self.probs[s, c]))
                     for c in (0, 1) if self.succ[s, c] >= 0 and self.probs[s, c] > 0.0]
            for v, p in sorted(edges):
                out.write(f"{s},{v},{p!r}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, n=None) -> "TransitionMatrix":
        lines = text.splitlines()
        if not lines or lines[0].strip() != MATRIX_HEADER:
            raise ValueError(f"expected header '{MATRIX_HEADER}'")
        triplets = []
        top = 0
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields")
            u, v, p = int(parts[0]), int(parts[1]), float(parts[2])
            top = max(top, u, v)
            triplets.append((u, v, p))
        if n is None:
            n = max(1, (top).bit_length())
        N = 1 << n
        succ = np.full((N, 2), -1, dtype=np.int64)
        probs = np.zeros((N, 2))
        succ[:, 0] = np.arange(N) ^ 1
        for s in range(N):
            j = far_bit(s, n)
            if j >= 0:
                succ[s, 1] = s ^ (1 << j)
        for u, v, p in triplets:
            if v == succ[u, 0]:
                probs[u, 0] = p
            elif v == succ[u, 1]:
                probs[u, 1] = p
            else:
                raise ValueError(f"edge {u}->{v} is not legal on an n={n} network")
        return cls(n, succ, probs)


def _ladder_factors(ladder: ThresholdLadder) -> np.ndarray:
    """exp(-(d_k - d_{k-1}) / d_{k-1}) for k = 2..n; depends on ratios only."""
    d = np.asarray(ladder.deltas)
    return np.exp(-(d[1:] - d[:-1]) / d[:-1])


def analytic_matrix(ladder: ThresholdLadder) -> TransitionMatrix:
    """Transition matrix of the Brownian-driven chain for a threshold ladder.

    For a state whose far bit has (1-based) index i, the far-flip
    probability is

        prod_{k=2}^{i} a_k / (1 - sum_{k=2}^{i-1} (1 - a_k) prod_{j=k+1}^{i} a_j)

    with a_k = exp(-(d_k - d_{k-1})/d_{k-1}); the bit-0 flip carries the
    complement.  Blind spots have a single certain edge.  Only threshold
    ratios enter, so the matrix is scale-invariant.
    """
    n = ladder.n
    if n > 20:
        raise ValueError("ladders beyond n=20 are not supported (4^n edge table)")
    a = _ladder_factors(ladder)
    # far-flip probability per far index i (1-based), shared by all states
    # with that index
    p_far_by_index = np.zeros(n + 1)
    for i in range(2, n + 1):
        num = np.prod(a[: i - 1])
        acc = 0.0
        for k in range(2, i):
            acc += (1.0 - a[k - 2]) * np.prod(a[k - 1: i - 1])
        p_far_by_index[i] = num / (1.0 - acc)
    N = 1 << n
    succ = np.full((N, 2), -1, dtype=np.int64)
    probs = np.zeros((N, 2))
    succ[:, 0] = np.arange(N) ^ 1
    probs[:, 0] = 1.0
    for s in range(N):
        j = far_bit(s, n)
        if j < 0:
            continue
        if j == 0:
            # the far bit *is* bit 0 only when n == 1; then both flips coincide
            continue
        pf = p_far_by_index[j + 1]
        succ[s, 1] = s ^ (1 << j)
        probs[s, 1] = pf
        probs[s, 0] = 1.0 - pf
    return TransitionMatrix(n, succ, probs)


def two_threshold_matrix(delta1: float, delta2: float) -> TransitionMatrix:
    """The 4-state matrix with alpha = beta = exp(-(d2 - d1)/d1).

    States are numbered (0,0)=0, (1,0)=1, (0,1)=2, (1,1)=3; rows 0 and 3
    are the blind spots with certain edges.
    """
    if not 0 < delta1 < delta2:
        raise ValueError("need 0 < delta1 < delta2")
    return analytic_matrix(ThresholdLadder((delta1, delta2)))


def contract(matrix: TransitionMatrix) -> TransitionMatrix:
    """Collapse the smallest threshold: islands {2k, 2k+1} become states.

    Within island k the chain may oscillate between the two members any
    number of times before leaving, which sums as a geometric series.
    The island is always entered at its odd member when the island index
    is odd (arrival via an up DC) and at its even member otherwise, so
    with q_uw = P(2k -> 2k+1), q_wu = P(2k+1 -> 2k) and D = 1 - q_uw q_wu:

        odd k:   P(k -> k-1) = P(2k -> 2k-2) q_wu / D
                 P(k -> j)   = P(2k+1 -> 2j+1) / D          (same parity j)
        even k:  P(k -> k+1) = P(2k+1 -> 2k+3) q_uw / D
                 P(k -> j)   = P(2k -> 2j) / D              (same parity j)
    """
    n = matrix.n
    if n < 2:
        raise ValueError("contraction needs n >= 2")
    m = n - 1
    M = 1 << m
    succ = np.full((M, 2), -1, dtype=np.int64)
    probs = np.zeros((M, 2))
    succ[:, 0] = np.arange(M) ^ 1
    probs[:, 0] = 1.0
    for k in range(M):
        u, w = 2 * k, 2 * k + 1
        q_uw = matrix.probs[u, 0]  # u -> u^1 == w
        q_wu = matrix.probs[w, 0]  # w -> w^1 == u
        denom = 1.0 - q_uw * q_wu
        if k & 1:
            # entered at w; the bit-0 island flip runs through u's far edge
            p_rev = matrix.prob(u, u ^ 2) * q_wu / denom
            far_member, entry_far = w, matrix.succ[w, 1]
        else:
            # entered at u; the bit-0 island flip runs through w's far edge
            p_rev = matrix.prob(w, w ^ 2) * q_uw / denom
            far_member, entry_far = u, matrix.succ[u, 1]
        probs[k, 0] = p_rev
        if far_bit(k, m) >= 0:
            # non-blind island: the entry member's far flip leaves for
            # another island of the same parity
            j_far = int(entry_far) >> 1
            p_far = matrix.probs[far_member, 1] / denom
            succ[k, 1] = j_far
            probs[k, 1] = p_far
    return TransitionMatrix(m, succ, probs)


def drifted_escape_probability(rise: float, trail: float, mu: float,
                               sigma: float) -> float:
    """P(drifted Brownian motion gains ``rise`` before a ``trail`` drawdown).

    The race is between a fixed barrier ``rise`` above the start and a
    trailing barrier ``trail`` below the running maximum:

        exp( -(rise/sigma^2) * ((|mu| - mu) + (|mu| + mu) q) / (1 - q) ),
        q = exp(-2 trail |mu| / sigma^2)

    evaluated at mu = 0 as the analytic limit exp(-rise/trail) (the 0/0
    form is never formed numerically).
    """
    if rise <= 0 or trail <= 0 or sigma <= 0:
        raise ValueError("rise, trail and sigma must be positive")
    if mu == 0.0:
        return math.exp(-rise / trail)
    a = abs(mu)
    q = math.exp(-2.0 * trail * a / (sigma * sigma))
    num = (a - mu) + (a + mu) * q
    exponent = -(rise / (sigma * sigma)) * num / (1.0 - q)
    return math.exp(exponent)
