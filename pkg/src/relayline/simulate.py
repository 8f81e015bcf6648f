"""Seeded Monte Carlo engine for as-you-go deployments.

Lines are drawn from the exponential length law by inverse CDF on a
deterministic generator, so a seed pins every downstream number bit for bit
(and the beta = 2 stream is exactly half the beta = 1 stream).  A solved
policy is replayed along each line with the same ceiling-rounded state
updates the solver used; the quality of the deployed network is its net
attenuation H, compared against the offline optimum with the same relay
count once the length is revealed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._jit import njit
from .channel import NodeLayout, attenuation_H
from .mdp import MdpConfig, MdpSolution, solve
from .placement import PlacementProblem, optimize_placement

__all__ = [
    "DeploymentTrace",
    "ComparisonStats",
    "CalibrationResult",
    "sample_line_lengths",
    "deploy_on_line",
    "compare_with_offline",
    "expected_relay_count",
    "calibrate_relay_price",
]

_MAX_RELAYS_PER_LINE = 1_000_000


@dataclass(frozen=True)
class DeploymentTrace:
    """One deployed line: realized length, relay positions (real units,
    distance from the source), the visited grid states starting at s_0 = 1,
    and the attenuation H of the realized network with the sink at the end."""

    line_length: float
    relay_positions: tuple[float, ...]
    states: tuple[float, ...]
    h_sequential: float

    @property
    def n_relays(self) -> int:
        return len(self.relay_positions)


@dataclass(frozen=True)
class ComparisonStats:
    """Aggregate sequential-vs-offline comparison over seeded samples."""

    avg_pct_diff: float
    max_pct_diff: float
    mean_relays: float
    zero_relay_count: int
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "comparison_stats",
            "avg_pct_diff": self.avg_pct_diff,
            "max_pct_diff": self.max_pct_diff,
            "mean_relays": self.mean_relays,
            "zero_relay_count": self.zero_relay_count,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CalibrationResult:
    """Relay price matching a target expected relay count."""

    xi_star: float
    achieved_mean: float
    standard_error: float
    iterations: int
    degenerate: bool
    trace: tuple[tuple[float, float], ...]  # (xi, estimated mean) per iterate


def sample_line_lengths(beta: float, count: int, seed: int) -> np.ndarray:
    """I.i.d. exponential lengths with mean 1/beta via inverse CDF."""
    if not (beta > 0.0):
        raise ValueError(f"beta must be > 0, got {beta}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    return -np.log1p(-u) / beta


@njit(cache=True)
def _walk(policy_idx, state_step, action_step, lam, norm_len):  # pragma: no cover
    """Replay a policy along one normalized line.

    Returns (relay count, attenuation H of the realized layout).  H is
    accumulated online in the z domain: z = e^{lam*position}.
    """
    n_states = policy_idx.shape[0]
    inv_step = 1.0 / state_step
    idx = n_states - 1  # s0 = 1
    pos_steps = 0
    n_relays = 0
    total = 1.0  # z_0 + ... + z_k
    z_prev = 1.0
    h = 0.0
    first = True
    while True:
        a_idx = policy_idx[idx]
        a = a_idx * action_step
        if norm_len - pos_steps * action_step > a:
            pos_steps += a_idx
            n_relays += 1
            if n_relays > _MAX_RELAYS_PER_LINE:
                return -1, 0.0
            z = math.exp(lam * (pos_steps * action_step))
            if first:
                h += z
                first = False
            else:
                h += (z - z_prev) / total
            total += z
            z_prev = z
            s = (idx + 1) * state_step
            t = s * math.exp(lam * a)
            w = t / (1.0 + t)
            idx = int(math.ceil(w * inv_step)) - 1
        else:
            z = math.exp(lam * norm_len)
            if first:
                h += z
            else:
                h += (z - z_prev) / total
            return n_relays, h


def _check_solution(solution: MdpSolution, cfg: MdpConfig | None) -> MdpConfig:
    if not solution.converged:
        raise ValueError("deployment needs a converged policy")
    have = solution.config
    if cfg is not None:
        for name in ("beta", "rho", "state_step", "action_step"):
            if getattr(cfg, name) != getattr(have, name):
                raise ValueError(f"config mismatch on {name}: {getattr(cfg, name)} "
                                 f"!= solution's {getattr(have, name)}")
    return have


def deploy_on_line(
    solution: MdpSolution, line_length: float, cfg: MdpConfig | None = None
) -> DeploymentTrace:
    """Place relays along one line of known length using a solved policy.

    Starting at the source in state 1, repeatedly walk the policy's distance
    and place a relay if the line has not ended, updating the grid-rounded
    state; otherwise the sink terminates the line.
    """
    cfg = _check_solution(solution, cfg)
    if not (line_length > 0.0):
        raise ValueError(f"line_length must be > 0, got {line_length}")
    beta = cfg.beta
    lam_unit = cfg.attenuation  # path loss per normalized unit
    step = cfg.state_step
    inv_step = 1.0 / step
    a_step = cfg.action_step
    norm_len = beta * line_length

    idx = cfg.n_states - 1
    pos_steps = 0
    positions: list[float] = []
    states = [1.0]
    while True:
        a_idx = int(solution.policy_idx[idx])
        a = a_idx * a_step
        if norm_len - pos_steps * a_step > a:
            pos_steps += a_idx
            positions.append(pos_steps * a_step / beta)
            if len(positions) > _MAX_RELAYS_PER_LINE:
                raise RuntimeError("policy placed an implausible number of relays")
            s = (idx + 1) * step
            t = s * math.exp(lam_unit * a)
            idx = int(math.ceil(t / (1.0 + t) * inv_step)) - 1
            states.append((idx + 1) * step)
        else:
            break
    layout = NodeLayout(length=line_length, positions=tuple(positions))
    return DeploymentTrace(
        line_length=line_length,
        relay_positions=tuple(positions),
        states=tuple(states),
        h_sequential=attenuation_H(layout, cfg.rho),
    )


def _offline_h(n_relays: int, lam: float, warm_z: np.ndarray | None = None) -> float:
    extra = () if warm_z is None else (warm_z,)
    sol = optimize_placement(
        PlacementProblem(n_relays=n_relays, lam=lam), effort="fast", extra_starts=extra
    )
    return sol.objective


def compare_with_offline(
    solution: MdpSolution,
    sample_count: int,
    seed: int,
    cfg: MdpConfig | None = None,
) -> ComparisonStats:
    """Percentage attenuation gap between as-you-go and offline placement.

    For each sampled length, the sequential H and realized relay count N are
    measured, then the offline optimizer places the same N relays on the
    revealed length; the per-sample difference is |H_opt - H_seq|/H_opt * 100.
    Zero-relay samples score 0 by convention.  H_seq >= H_opt must hold (the
    matched-count offline layout is optimal); a sample violating it after
    escalating the optimizer aborts with the sample index.
    """
    cfg = _check_solution(solution, cfg)
    lengths = sample_line_lengths(cfg.beta, sample_count, seed)
    policy_idx = np.ascontiguousarray(solution.policy_idx)
    lam_unit = cfg.attenuation

    diffs = np.empty(sample_count)
    relays = np.empty(sample_count)
    zero_count = 0
    for k, length in enumerate(lengths):
        norm_len = cfg.beta * length
        n_k, h_seq = _walk(policy_idx, cfg.state_step, cfg.action_step, lam_unit, norm_len)
        if n_k < 0:
            raise RuntimeError(f"sample {k}: runaway deployment")
        relays[k] = n_k
        if n_k == 0:
            zero_count += 1
            diffs[k] = 0.0
            continue
        lam_k = lam_unit * norm_len
        h_opt = _offline_h(n_k, lam_k)
        if h_opt > h_seq * (1.0 + 1e-12):
            trace = deploy_on_line(solution, length, cfg)
            warm = np.exp(
                lam_k * np.asarray(trace.relay_positions) / length
            )
            sol = optimize_placement(
                PlacementProblem(n_relays=n_k, lam=lam_k),
                effort="full",
                extra_starts=(warm,),
            )
            h_opt = sol.objective
            if h_opt > h_seq * (1.0 + 1e-9):
                raise RuntimeError(
                    f"sample {k}: offline H {h_opt} exceeds sequential H {h_seq}"
                )
        diffs[k] = abs(h_opt - h_seq) / h_opt * 100.0
    return ComparisonStats(
        avg_pct_diff=math.fsum(diffs) / sample_count,
        max_pct_diff=float(diffs.max()),
        mean_relays=math.fsum(relays) / sample_count,
        zero_relay_count=zero_count,
        samples=sample_count,
        seed=seed,
    )


def expected_relay_count(
    solution: MdpSolution,
    sample_count: int,
    seed: int,
    cfg: MdpConfig | None = None,
) -> tuple[float, float]:
    """Monte Carlo mean relay count with its standard error."""
    cfg = _check_solution(solution, cfg)
    lengths = sample_line_lengths(cfg.beta, sample_count, seed)
    policy_idx = np.ascontiguousarray(solution.policy_idx)
    counts = np.empty(sample_count)
    for k, length in enumerate(lengths):
        n_k, _ = _walk(
            policy_idx, cfg.state_step, cfg.action_step, cfg.attenuation, cfg.beta * length
        )
        if n_k < 0:
            raise RuntimeError(f"sample {k}: runaway deployment")
        counts[k] = n_k
    mean = math.fsum(counts) / sample_count
    if sample_count > 1:
        se = float(counts.std(ddof=1)) / math.sqrt(sample_count)
    else:
        se = math.inf
    return mean, se


def calibrate_relay_price(
    target_mean_relays: float,
    lam: float,
    seed: int,
    cfg_template: MdpConfig | None = None,
    *,
    bracket: tuple[float, float] = (1e-4, 100.0),
    sample_count: int = 10_000,
    max_iterations: int = 40,
) -> CalibrationResult:
    """Find the relay price whose policy uses the target mean relay count.

    Bisects log(xi) over the bracket; every iterate solves the MDP at the
    trial price and estimates the mean relay count on the *same* seeded
    lengths (common random numbers), stopping once the estimate is within
    max(5% of the target, two standard errors).  The estimated mean is
    nonincreasing in xi, so bisection is sound.  A target outside what the
    bracket can reach raises ValueError reporting both endpoint means.
    """
    if target_mean_relays < 0.0:
        raise ValueError("target mean relay count must be >= 0")
    if cfg_template is None:
        cfg_template = MdpConfig(beta=1.0, rho=lam, xi=1.0)
    elif cfg_template.attenuation != lam:
        cfg_template = replace(cfg_template, rho=lam * cfg_template.beta)

    def estimate(xi: float) -> tuple[float, float]:
        sol = solve(replace(cfg_template, xi=xi))
        if not sol.converged:
            raise RuntimeError(f"value iteration did not converge at xi={xi}")
        return expected_relay_count(sol, sample_count, seed)

    lo, hi = bracket
    if not (0.0 < lo < hi):
        raise ValueError(f"invalid bracket {bracket}")

    trace: list[tuple[float, float]] = []
    mean_hi, se_hi = estimate(hi)
    trace.append((hi, mean_hi))
    if target_mean_relays == 0.0:
        return CalibrationResult(
            xi_star=hi,
            achieved_mean=mean_hi,
            standard_error=se_hi,
            iterations=1,
            degenerate=True,
            trace=tuple(trace),
        )
    mean_lo, se_lo = estimate(lo)
    trace.append((lo, mean_lo))
    if not (mean_hi <= target_mean_relays <= mean_lo):
        raise ValueError(
            f"target {target_mean_relays} outside achievable range: "
            f"E[N]({lo})={mean_lo}, E[N]({hi})={mean_hi}"
        )

    def close_enough(mean: float, se: float) -> bool:
        return abs(mean - target_mean_relays) < max(
            0.05 * target_mean_relays, 2.0 * se
        )

    for endpoint, mean, se in ((lo, mean_lo, se_lo), (hi, mean_hi, se_hi)):
        if close_enough(mean, se):
            return CalibrationResult(
                xi_star=endpoint,
                achieved_mean=mean,
                standard_error=se,
                iterations=len(trace),
                degenerate=False,
                trace=tuple(trace),
            )

    log_lo, log_hi = math.log(lo), math.log(hi)
    for it in range(max_iterations):
        mid = math.exp(0.5 * (log_lo + log_hi))
        mean_mid, se_mid = estimate(mid)
        trace.append((mid, mean_mid))
        if close_enough(mean_mid, se_mid):
            return CalibrationResult(
                xi_star=mid,
                achieved_mean=mean_mid,
                standard_error=se_mid,
                iterations=len(trace),
                degenerate=False,
                trace=tuple(trace),
            )
        if mean_mid > target_mean_relays:
            log_lo = 0.5 * (log_lo + log_hi)
        else:
            log_hi = 0.5 * (log_lo + log_hi)
    raise RuntimeError(
        f"calibration did not meet tolerance in {max_iterations} iterations; "
        f"last estimates: {trace[-3:]}"
    )
