"""Optimal relay positions on a line of known length.

With z_k = exp(rho*y_k), placing N relays to maximize the optimized rate means
minimizing

    H(z) = z_1 + sum_{k=2}^{N+1} (z_k - z_{k-1}) / (z_0 + ... + z_{k-1})

over 1 <= z_1 <= ... <= z_N <= z_{N+1} = e^lambda, where lambda = rho*L.  Only
(N, lambda) matter, so positions are reported normalized by L.

The objective is convex in each coordinate but not jointly, so the solver runs
cyclic coordinate descent (golden section per coordinate) from several starts
and accepts only when the best two agree.  Stationarity has a useful structure:
at any interior optimum the partial sums S_j = z_0 + ... + z_j satisfy
S_{j+1}/S_j = const, i.e. S is geometric.  With m relays pinned at the source
this yields one scalar root problem per m,

    (1+m) * r^(N-m-1) * (r^2 - 1) = e^lambda,

whose solutions seed (and usually already are) the optimum.  For N = 1, m = 0
this reduces to the known closed form z_1 = sqrt(e^lambda + 1) - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

__all__ = [
    "PlacementProblem",
    "PlacementSolution",
    "SingleRelayOptimum",
    "single_relay_optimum",
    "optimize_placement",
    "grid_oracle_placement",
    "uniform_rate_factor",
]

_LAMBDA_MAX = 700.0  # e^lambda must stay finite in double precision


@dataclass(frozen=True)
class PlacementProblem:
    """Number of relays (>= 1) and total line attenuation lambda = rho*L."""

    n_relays: int
    lam: float

    def __post_init__(self):
        if self.n_relays < 1:
            raise ValueError(f"n_relays must be >= 1, got {self.n_relays}")
        if not (0.0 < self.lam <= _LAMBDA_MAX):
            raise ValueError(f"lambda must be in (0, {_LAMBDA_MAX}], got {self.lam}")


@dataclass(frozen=True)
class PlacementSolution:
    """Normalized relay positions y_k/L, minimized attenuation H and the
    relaying gain G = e^lambda / H."""

    normalized_positions: tuple[float, ...]
    objective: float
    gain: float

    def __post_init__(self):
        w = self.normalized_positions
        if any(b < a for a, b in zip(w, w[1:])) or (w and (w[0] < 0.0 or w[-1] > 1.0)):
            raise ValueError("normalized positions must be sorted within [0, 1]")
        if self.objective < 1.0 - 1e-12:
            raise ValueError(f"objective below 1: {self.objective}")


@dataclass(frozen=True)
class SingleRelayOptimum:
    """Closed-form single-relay solution: normalized location, power fractions
    of P_T per link, and the factor f in the rate C(f*P_T/sigma2)."""

    y1_over_L: float
    p01_frac: float
    p02_frac: float
    p12_frac: float
    rate_factor: float


def single_relay_optimum(lam: float) -> SingleRelayOptimum:
    """Best position and power split for one relay at attenuation lambda.

    Below lambda = log 3 the relay sits at the source; above, at
    log(sqrt(e^lambda+1)-1)/lambda, approaching L/2 as lambda grows.
    """
    if not (0.0 < lam <= _LAMBDA_MAX):
        raise ValueError(f"lambda must be in (0, {_LAMBDA_MAX}], got {lam}")
    el = math.exp(lam)
    if lam <= math.log(3.0):
        p01 = 2.0 / (el + 1.0)
        p2 = (el - 1.0) / (el + 1.0) / 2.0
        return SingleRelayOptimum(0.0, p01, p2, p2, 2.0 / (el + 1.0))
    root = math.sqrt(el + 1.0)
    y = math.log(root - 1.0) / lam
    return SingleRelayOptimum(
        y1_over_L=y,
        p01_frac=0.5,
        p02_frac=0.5 / root,
        p12_frac=(root - 1.0) / (2.0 * root),
        rate_factor=1.0 / (2.0 * (root - 1.0)),
    )


# ---------------------------------------------------------------------------
# objective and coordinate descent core
# ---------------------------------------------------------------------------


@njit(cache=True)
def _objective_z(z, big_z):  # pragma: no cover - jitted
    total = 1.0
    h = z[0]
    prev = z[0]
    for k in range(1, len(z)):
        total += prev
        h += (z[k] - prev) / total
        prev = z[k]
    total += prev
    h += (big_z - prev) / total
    return h


@njit(cache=True)
def _axis_value(v, z_prev, s_before, z_next, u, d, n_tail):  # pragma: no cover
    """Objective terms that depend on the moving coordinate value v."""
    acc = (v - z_prev) / s_before + (z_next - v) / (s_before + v)
    for t in range(n_tail):
        acc += u[t] / (d[t] + v)
    return acc


@njit(cache=True)
def _coord_descent(z, big_z, max_cycles, rel_tol):  # pragma: no cover - jitted
    """Cyclic coordinate descent in place; returns (objective, cycles)."""
    n = z.shape[0]
    inv_phi = 0.6180339887498949
    # prefix[j] = z_0 + ... + z_j with z_0 = 1 (source node)
    prefix = np.empty(n + 1)
    prefix[0] = 1.0
    for j in range(n):
        prefix[j + 1] = prefix[j] + z[j]
    u = np.empty(n)
    d = np.empty(n)
    f_prev = _objective_z(z, big_z)
    cycles = 0
    for _ in range(max_cycles):
        cycles += 1
        for j in range(n):
            lo = z[j - 1] if j > 0 else 1.0
            hi = z[j + 1] if j < n - 1 else big_z
            if hi - lo <= 1e-15 * hi:
                continue
            z_prev = lo
            z_next = hi if j == n - 1 else z[j + 1]
            s_before = prefix[j]
            # stages past j+1 contribute u_t/(d_t + v); u_t, d_t fixed here
            n_tail = n - j - 1
            den = s_before + z_next
            zp = z_next
            for t in range(n_tail):
                i = j + 2 + t
                zk = z[i] if i <= n - 1 else big_z
                u[t] = zk - zp
                d[t] = den
                den += zk
                zp = zk

            a = lo
            b = hi
            c = b - inv_phi * (b - a)
            dd = a + inv_phi * (b - a)
            fc = _axis_value(c, z_prev, s_before, z_next, u, d, n_tail)
            fd = _axis_value(dd, z_prev, s_before, z_next, u, d, n_tail)
            for _it in range(90):
                if b - a <= 1e-13 * b:
                    break
                if fc < fd:
                    b = dd
                    dd = c
                    fd = fc
                    c = b - inv_phi * (b - a)
                    fc = _axis_value(c, z_prev, s_before, z_next, u, d, n_tail)
                else:
                    a = c
                    c = dd
                    fc = fd
                    dd = a + inv_phi * (b - a)
                    fd = _axis_value(dd, z_prev, s_before, z_next, u, d, n_tail)
            v = 0.5 * (a + b)
            fv = _axis_value(v, z_prev, s_before, z_next, u, d, n_tail)
            # boundary candidates (clustering makes these common)
            fl = _axis_value(lo, z_prev, s_before, z_next, u, d, n_tail)
            fh = _axis_value(hi, z_prev, s_before, z_next, u, d, n_tail)
            if fl <= fv and fl <= fh:
                v = lo
            elif fh < fv:
                v = hi
            delta = v - z[j]
            if delta != 0.0:
                z[j] = v
                for k in range(j + 1, n + 1):
                    prefix[k] += delta
        f_now = _objective_z(z, big_z)
        if f_prev - f_now < rel_tol * max(1.0, abs(f_now)):
            f_prev = f_now
            break
        f_prev = f_now
    return f_prev, cycles


def _solve_geometric_ratio(n: int, m: int, lam: float) -> float:
    """Root r > 1 of (1+m) * r^(n-m-1) * (r^2-1) = e^lambda, in log space."""
    p = n - m - 1
    target = lam - math.log(1.0 + m)

    def g(t):
        # log of r^p (r^2-1) at r = e^t
        if t > 20.0:
            tail = 2.0 * t + math.log1p(-math.exp(-2.0 * t))
        else:
            tail = math.log(math.expm1(2.0 * t))
        return p * t + tail - target

    lo, hi = 1e-12, max(1.0, lam)
    while g(hi) < 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise ArithmeticError("geometric-ratio root search diverged")
    glo = g(lo)
    if glo > 0.0:
        return math.exp(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * hi:
            break
    return math.exp(0.5 * (lo + hi))


def _analytic_candidates(n: int, lam: float) -> list[np.ndarray]:
    """Stationary candidates: m relays at the source, the rest on a geometric
    partial-sum chain.  Includes the all-at-source layout (m = n)."""
    big_z = math.exp(lam)
    out = [np.ones(n)]  # m = n
    for m in range(n):
        r = _solve_geometric_ratio(n, m, lam)
        if (1.0 + m) * (r - 1.0) < 1.0 - 1e-12:
            continue  # first free relay would fall below the pinned block
        z = np.empty(n)
        z[:m] = 1.0
        base = (1.0 + m) * (r - 1.0)
        for j in range(m, n):
            z[j] = base
            base *= r
        if z[-1] > big_z * (1.0 + 1e-12):
            continue
        np.clip(z, 1.0, big_z, out=z)
        out.append(z)
    return out


def _normalized_from_z(z: np.ndarray, lam: float) -> tuple[float, ...]:
    w = np.log(np.maximum(z, 1.0)) / lam
    return tuple(float(min(max(v, 0.0), 1.0)) for v in w)


def _solution_from_z(z: np.ndarray, lam: float) -> PlacementSolution:
    big_z = math.exp(lam)
    h = float(_objective_z(np.ascontiguousarray(z, dtype=float), big_z))
    return PlacementSolution(
        normalized_positions=_normalized_from_z(z, lam),
        objective=h,
        gain=big_z / h,
    )


def optimize_placement(
    problem: PlacementProblem,
    *,
    effort: str = "full",
    extra_starts: tuple = (),
    max_cycles: int = 10_000,
    rel_tol: float = 1e-10,
    consistency_tol: float = 1e-8,
) -> PlacementSolution:
    """Minimize the attenuation H over relay positions for (N, lambda).

    Runs coordinate descent from analytic stationary candidates plus uniform,
    clustered-at-source and random starts, and accepts only when the two best
    final objectives agree to ``consistency_tol`` (relative).  ``effort="fast"``
    keeps just the analytic candidates plus a short polish, for use inside
    Monte Carlo loops.  ``extra_starts`` may carry warm starts as z-vectors.

    Raises RuntimeError when the multistart consistency check fails.
    """
    n, lam = problem.n_relays, problem.lam
    big_z = math.exp(lam)

    starts: list[np.ndarray] = [np.asarray(s, dtype=float).copy() for s in extra_starts]
    analytic = _analytic_candidates(n, lam)
    analytic.sort(key=lambda z: _objective_z(z, big_z))

    if effort == "fast":
        starts += analytic[:2]
        polish_cycles = min(max_cycles, 60)
    elif effort == "full":
        starts += analytic[:3]
        starts.append(np.exp(lam * np.arange(1, n + 1) / (n + 1.0)))  # uniform
        starts.append(np.ones(n))  # clustered at source
        rng = np.random.default_rng(0xC0FFEE + 7919 * n)
        n_random = max(0, 8 - len(starts))
        for _ in range(n_random):
            w = np.sort(rng.random(n))
            starts.append(np.exp(lam * w))
        polish_cycles = max_cycles
    else:
        raise ValueError(f"unknown effort {effort!r}")

    results = []
    for z0 in starts:
        z = np.clip(np.asarray(z0, dtype=float), 1.0, big_z)
        z.sort()
        f, cycles = _coord_descent(z, big_z, polish_cycles, rel_tol)
        results.append((float(f), z))
    results.sort(key=lambda t: t[0])

    f_best = results[0][0]
    if len(results) >= 2:
        f_second = results[1][0]
        if f_second - f_best > consistency_tol * max(1.0, abs(f_best)):
            if effort == "fast":
                return optimize_placement(
                    problem,
                    effort="full",
                    extra_starts=extra_starts,
                    max_cycles=max_cycles,
                    rel_tol=rel_tol,
                    consistency_tol=consistency_tol,
                )
            raise RuntimeError(
                "placement multistart inconsistency: best objectives "
                f"{f_best!r} vs {f_second!r} for N={n}, lambda={lam}"
            )
    return _solution_from_z(results[0][1], lam)


def grid_oracle_placement(problem: PlacementProblem, step: float) -> PlacementSolution:
    """Exhaustive search over normalized positions on a uniform grid.

    Reference for the descent solver; limited to N <= 3 because the grid grows
    combinatorially.
    """
    n, lam = problem.n_relays, problem.lam
    if n > 3:
        raise ValueError("grid oracle supports at most 3 relays")
    if not (0.0 < step <= 1.0):
        raise ValueError(f"step must be in (0, 1], got {step}")
    m = int(round(1.0 / step))
    w = np.linspace(0.0, 1.0, m + 1)
    zg = np.exp(lam * w)
    big_z = math.exp(lam)

    if n == 1:
        h = zg + (big_z - zg) / (1.0 + zg)
        i = int(np.argmin(h))
        return _solution_from_z(np.array([zg[i]]), lam)

    if n == 2:
        i, j = np.triu_indices(m + 1)
        z1, z2 = zg[i], zg[j]
        s1 = 1.0 + z1
        s2 = s1 + z2
        h = z1 + (z2 - z1) / s1 + (big_z - z2) / s2
        k = int(np.argmin(h))
        return _solution_from_z(np.array([z1[k], z2[k]]), lam)

    best = (math.inf, None)
    jj, kk = np.triu_indices(m + 1)
    for i1 in range(m + 1):
        sel = jj >= i1
        j, k = jj[sel], kk[sel]
        z1 = zg[i1]
        z2, z3 = zg[j], zg[k]
        s1 = 1.0 + z1
        s2 = s1 + z2
        s3 = s2 + z3
        h = z1 + (z2 - z1) / s1 + (z3 - z2) / s2 + (big_z - z3) / s3
        t = int(np.argmin(h))
        if h[t] < best[0]:
            best = (float(h[t]), np.array([z1, z2[t], z3[t]]))
    return _solution_from_z(best[1], lam)


def uniform_rate_factor(n_relays: int, lam: float) -> float:
    """Attenuation H of N uniformly spaced relays; tends to 1 as N grows.

    Equals a + sum_{k=2}^{N+1} (a^k - a^{k-1})/(1 + ... + a^{k-1}) with
    a = exp(lam/(N+1)), computed via expm1 so that huge N stays accurate.
    """
    if n_relays < 1:
        raise ValueError(f"n_relays must be >= 1, got {n_relays}")
    if not (0.0 < lam <= _LAMBDA_MAX):
        raise ValueError(f"lambda must be in (0, {_LAMBDA_MAX}], got {lam}")
    q = lam / (n_relays + 1.0)
    k = np.arange(2, n_relays + 2, dtype=float)
    e1 = math.expm1(q)
    terms = np.exp((k - 1.0) * q) * (e1 * e1) / np.expm1(k * q)
    return float(math.exp(q) + terms.sum())
