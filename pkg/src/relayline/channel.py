"""Gaussian line-network channel model with exponential path loss.

A source (node 0), N full-duplex decode-and-forward relays (nodes 1..N) and a
sink (node N+1) sit on a line.  The power gain over a distance r is
exp(-rho*r), so gains between nodes are multiplicative along the line.  The
achievable rate is the minimum over per-node decoding terms; for a fixed
layout it is maximized by a closed-form split of the total power budget that
equalizes all decoding terms.

Distances are in the same unit as 1/rho, powers in mW, rates in bits per
channel use with C(x) = 0.5*log2(1+x).

All functions here are pure and operate on immutable inputs, so they are safe
to call from multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit

__all__ = [
    "ChannelParams",
    "NodeLayout",
    "GainTable",
    "PowerAllocation",
    "capacity",
    "build_gain_table",
    "snr_terms",
    "achievable_rate_raw",
    "optimal_allocation",
    "attenuation_H",
    "optimized_rate",
    "relaying_gain",
    "bruteforce_max_min",
]


def capacity(x: float) -> float:
    """AWGN capacity function C(x) = 0.5*log2(1+x) in bits per channel use."""
    return 0.5 * math.log2(1.0 + x)


@dataclass(frozen=True)
class ChannelParams:
    """Path-loss exponent per unit distance, receiver noise variance (mW) and
    total transmit power budget (mW)."""

    rho: float
    sigma2: float
    p_total: float

    def __post_init__(self):
        if not (self.rho > 0.0):
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if not (self.sigma2 > 0.0):
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if not (self.p_total > 0.0):
            raise ValueError(f"p_total must be > 0, got {self.p_total}")


@dataclass(frozen=True)
class NodeLayout:
    """Line of given length with relay distances from the source.

    ``positions`` holds y_1 <= ... <= y_N, all within [0, length].  Coincident
    relays are allowed (they then receive no dedicated power but still help
    with coherent transmission).  The source sits at 0, the sink at ``length``.
    """

    length: float
    positions: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.length > 0.0):
            raise ValueError(f"length must be > 0, got {self.length}")
        object.__setattr__(self, "positions", tuple(float(y) for y in self.positions))
        prev = 0.0
        for y in self.positions:
            if y < prev:
                raise ValueError("relay positions must be sorted nondecreasing, with y_1 >= 0")
            if y > self.length:
                raise ValueError(f"relay position {y} outside [0, {self.length}]")
            prev = y

    @property
    def n_relays(self) -> int:
        return len(self.positions)

    def node_positions(self) -> np.ndarray:
        """Positions of all N+2 nodes: source, relays, sink."""
        return np.concatenate(([0.0], self.positions, [self.length]))


@dataclass(frozen=True)
class GainTable:
    """Pairwise power gains g[i,j] = exp(-rho*|y_i - y_j|) and their square
    roots h[i,j], indexed over nodes 0..N+1 (0 = source, N+1 = sink)."""

    g: np.ndarray
    h: np.ndarray

    @property
    def n_relays(self) -> int:
        return self.g.shape[0] - 2


@dataclass(frozen=True)
class PowerAllocation:
    """Per-link powers p[i,j] (mW) for 0 <= i < j <= N+1 and per-stage sums
    gamma[k-1] = sum_i p[i,k] for k = 1..N+1."""

    p: np.ndarray
    gamma: np.ndarray

    def total(self) -> float:
        return float(self.gamma.sum())


def _z_nodes(layout: NodeLayout, rho: float) -> np.ndarray:
    """z_k = exp(rho*y_k) for all N+2 node positions (z_0 = 1)."""
    if not (rho > 0.0):
        raise ValueError(f"rho must be > 0, got {rho}")
    return np.exp(rho * layout.node_positions())


def build_gain_table(layout: NodeLayout, rho: float) -> GainTable:
    """Pairwise gain matrix for a layout under exp(-rho*r) path loss."""
    if not (rho > 0.0):
        raise ValueError(f"rho must be > 0, got {rho}")
    y = layout.node_positions()
    g = np.exp(-rho * np.abs(y[:, None] - y[None, :]))
    return GainTable(g=g, h=np.sqrt(g))


def snr_terms(gains: GainTable, alloc: PowerAllocation, sigma2: float) -> np.ndarray:
    """The N+1 per-node decoding SNRs whose minimum limits the rate.

    Term k (k = 1..N+1) is (1/sigma2) * sum_{j<=k} (sum_{i<j} h[i,k]*sqrt(p[i,j]))^2:
    node k accumulates the coherent signal for each message index j from all
    transmitters 0..j-1 that carry it.
    """
    if not (sigma2 > 0.0):
        raise ValueError(f"sigma2 must be > 0, got {sigma2}")
    p = alloc.p
    if np.any(p < 0.0):
        raise ValueError("link powers must be nonnegative")
    h = gains.h
    n = gains.n_relays
    sqrt_p = np.sqrt(p)
    terms = np.empty(n + 1)
    for k in range(1, n + 2):
        acc = 0.0
        for j in range(1, k + 1):
            amp = float(h[:j, k] @ sqrt_p[:j, j])
            acc += amp * amp
        terms[k - 1] = acc / sigma2
    return terms


def achievable_rate_raw(gains: GainTable, alloc: PowerAllocation, sigma2: float) -> float:
    """Decode-and-forward rate of an arbitrary allocation: min_k C(SNR_k)."""
    return capacity(float(snr_terms(gains, alloc, sigma2).min()))


def attenuation_H(layout: NodeLayout, rho: float) -> float:
    """Net attenuation seen by the power budget after the optimal split.

    H = z_1 + sum_{k=2}^{N+1} (z_k - z_{k-1}) / (z_0 + ... + z_{k-1}) with
    z_k = exp(rho*y_k).  The optimized rate is C((P_T/sigma2)/H); placements
    should make H small.  This form is exact for coincident nodes (the
    increment is simply zero).
    """
    z = _z_nodes(layout, rho)
    total = z[0]
    h = z[1]
    for k in range(2, len(z)):
        total += z[k - 1]
        h += (z[k] - z[k - 1]) / total
    return float(h)


def optimal_allocation(layout: NodeLayout, params: ChannelParams) -> PowerAllocation:
    """Power split maximizing the min decoding term under a sum-power budget.

    Stage k receives gamma_k = (P_T/H) * (z_k - z_{k-1})/(z_0+...+z_{k-1})
    (gamma_1 = (P_T/H)*z_1), and within stage j transmitter i gets the share
    z_i / (z_0+...+z_{j-1}).  All N+1 decoding terms come out equal.
    """
    z = _z_nodes(layout, params.rho)
    n = layout.n_relays
    h_att = attenuation_H(layout, params.rho)
    scale = params.p_total / h_att
    prefix = np.cumsum(z)  # prefix[m] = z_0 + ... + z_m

    gamma = np.empty(n + 1)
    gamma[0] = scale * z[1]
    for k in range(2, n + 2):
        gamma[k - 1] = scale * (z[k] - z[k - 1]) / prefix[k - 1]

    p = np.zeros((n + 2, n + 2))
    for j in range(1, n + 2):
        p[:j, j] = z[:j] / prefix[j - 1] * gamma[j - 1]
    return PowerAllocation(p=p, gamma=gamma)


def optimized_rate(layout: NodeLayout, params: ChannelParams) -> float:
    """Achievable rate for a layout after the optimal power split."""
    h_att = attenuation_H(layout, params.rho)
    return capacity(params.p_total / params.sigma2 / h_att)


def relaying_gain(layout: NodeLayout, rho: float) -> float:
    """Attenuation reduction e^{rho*L}/H won by the relays; in [1, e^{rho*L}].

    Defined only when at least one relay is present.
    """
    if layout.n_relays < 1:
        raise ValueError("relaying gain needs at least one relay")
    lam = rho * layout.length
    return math.exp(lam) / attenuation_H(layout, rho)


# ---------------------------------------------------------------------------
# Exhaustive max-min oracle (test harness only, never a production path).
# The simplex of link powers is enumerated on a uniform grid; the count of
# grid points grows combinatorially, hence the N <= 2 limit.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _brute_n1(z1, z2, pt, sigma2, steps):  # pragma: no cover - jitted
    h01 = math.sqrt(1.0 / z1)
    g02 = 1.0 / z2
    h02 = math.sqrt(g02)
    h12 = math.sqrt(z1 / z2)
    unit = pt / steps
    best = -1.0
    for i01 in range(steps + 1):
        p01 = i01 * unit
        t1 = h01 * h01 * p01 / sigma2
        if t1 <= best:
            continue
        for i02 in range(steps + 1 - i01):
            p02 = i02 * unit
            p12 = pt - p01 - p02
            if p12 < 0.0:
                p12 = 0.0
            amp = h02 * math.sqrt(p02) + h12 * math.sqrt(p12)
            t2 = (g02 * p01 + amp * amp) / sigma2
            m = t1 if t1 < t2 else t2
            if m > best:
                best = m
    return best


@njit(cache=True)
def _brute_n2(z1, z2, z3, pt, sigma2, steps):  # pragma: no cover - jitted
    h01 = math.sqrt(1.0 / z1)
    h02 = math.sqrt(1.0 / z2)
    h12 = math.sqrt(z1 / z2)
    h03 = math.sqrt(1.0 / z3)
    h13 = math.sqrt(z1 / z3)
    h23 = math.sqrt(z2 / z3)
    unit = pt / steps
    best = -1.0
    for i01 in range(steps + 1):
        p01 = i01 * unit
        t1 = h01 * h01 * p01 / sigma2
        if t1 <= best:
            continue
        r1 = steps - i01
        for i02 in range(r1 + 1):
            p02 = i02 * unit
            r2 = r1 - i02
            for i12 in range(r2 + 1):
                p12 = i12 * unit
                amp2 = h02 * math.sqrt(p02) + h12 * math.sqrt(p12)
                t2 = (h02 * h02 * p01 + amp2 * amp2) / sigma2
                m12 = t1 if t1 < t2 else t2
                if m12 <= best:
                    continue
                amp3b = h03 * math.sqrt(p02) + h13 * math.sqrt(p12)
                base3 = h03 * h03 * p01 + amp3b * amp3b
                r3 = r2 - i12
                for i03 in range(r3 + 1):
                    p03 = i03 * unit
                    r4 = r3 - i03
                    for i13 in range(r4 + 1):
                        p13 = i13 * unit
                        p23 = (r4 - i13) * unit
                        amp3a = h03 * math.sqrt(p03) + h13 * math.sqrt(p13) + h23 * math.sqrt(p23)
                        t3 = (base3 + amp3a * amp3a) / sigma2
                        m = m12 if m12 < t3 else t3
                        if m > best:
                            best = m
    return best


def bruteforce_max_min(layout: NodeLayout, params: ChannelParams, grid_steps: int) -> float:
    """Max-min rate by exhaustive search over a uniform simplex grid of the
    link powers.  Oracle for the closed-form allocation; rejects N > 2."""
    n = layout.n_relays
    if n > 2:
        raise ValueError("brute-force oracle supports at most 2 relays")
    if grid_steps < 1:
        raise ValueError("grid_steps must be >= 1")
    z = _z_nodes(layout, params.rho)
    pt, s2 = params.p_total, params.sigma2
    if n == 0:
        return capacity(pt / z[1] / s2)
    if n == 1:
        best = _brute_n1(z[1], z[2], pt, s2, grid_steps)
    else:
        best = _brute_n2(z[1], z[2], z[3], pt, s2, grid_steps)
    return capacity(float(best))
