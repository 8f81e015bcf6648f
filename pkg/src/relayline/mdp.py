"""As-you-go relay deployment as a discretized total-cost MDP.

An agent walks from the source toward a sink whose distance is exponential
with rate beta, placing relays as it goes.  After the k-th relay the system
state is s_k = e^{rho*y_k} / (e^{rho*y_0} + ... + e^{rho*y_k}) in (0, 1]; the
action a is the distance to walk before placing the next relay.  Placing a
relay costs the price xi plus s*(e^{rho*a} - 1); if the line ends first (at
residual length l < a) the terminal cost is s*(e^{rho*l} - 1).  Summed along a
deployment these stage costs reproduce the net attenuation of the deployed
network plus xi times the relay count, so the minimum expected total cost
yields the placement policy.

The expected cost of action a at state s is

    I(s, a) + e^{-beta*a} * (s*(e^{rho*a} - 1) + xi + J(s')),
    s' = s*e^{rho*a} / (1 + s*e^{rho*a}),

with I(s, a) the expected terminal cost if the line ends within a, available
in closed form.  Value iteration on a uniform state grid over (0, 1] with a
uniform action grid converges monotonically from J = 0; next states are
rounded *up* to the grid, which is also how deployment trajectories are
rounded, so solved policies replay exactly in simulation.

Only the unit-mean problem is ever solved internally: lengths scale by beta,
so a config with beta != 1 is normalized to (beta=1, rho=Lambda) and the
policy's distances are de-normalized on the way out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._jit import njit, prange

__all__ = [
    "MdpConfig",
    "MdpSolution",
    "state_transition",
    "stage_value",
    "bellman_update",
    "solve",
    "analytic_bounds",
]

SCHEMA_VERSION = 1

# precomputed transition tables beyond this many entries are traded for
# on-the-fly index computation inside the sweep kernel
_IDX_TABLE_LIMIT = 16_000_000


@dataclass(frozen=True)
class MdpConfig:
    """Problem and discretization parameters.

    beta        rate of the exponential line-length law (mean length 1/beta)
    rho         path-loss exponent per unit distance
    xi          price of placing one relay
    state_step  state grid resolution; the grid is {step, 2*step, ..., 1}
    action_step action grid resolution in normalized (beta=1) units
    action_max  action grid truncation in normalized units; None picks
                max(30, 12/Lambda), validated after solving by requiring that
                no greedy action lands on the top 10% of the grid
    vi_tolerance  sup-norm change threshold that stops value iteration
    max_sweeps  iteration cap
    """

    beta: float = 1.0
    rho: float = 1.0
    xi: float = 0.01
    state_step: float = 0.01
    action_step: float = 0.001
    action_max: float | None = None
    vi_tolerance: float = 1e-9
    max_sweeps: int = 100_000

    def __post_init__(self):
        for name in ("beta", "rho", "xi", "state_step", "action_step", "vi_tolerance"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        n = round(1.0 / self.state_step)
        if n < 1 or abs(n * self.state_step - 1.0) > 1e-9:
            raise ValueError(f"state_step must divide 1 exactly, got {self.state_step}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.action_max is not None and self.action_max < 1.0:
            raise ValueError("action_max must cover at least 1 normalized unit")

    @property
    def attenuation(self) -> float:
        """Lambda = rho/beta, the attenuation across a mean line length."""
        return self.rho / self.beta

    @property
    def theta(self) -> float | None:
        """Cost rho/(beta-rho) of never placing a relay, when finite."""
        if self.beta > self.rho:
            return self.rho / (self.beta - self.rho)
        return None

    @property
    def n_states(self) -> int:
        return round(1.0 / self.state_step)

    def state_grid(self) -> np.ndarray:
        return np.arange(1, self.n_states + 1) * self.state_step

    def resolved_action_max(self) -> float:
        if self.action_max is not None:
            return self.action_max
        return max(30.0, 12.0 / self.attenuation)

    def action_grid(self) -> np.ndarray:
        n_a = int(round(self.resolved_action_max() / self.action_step)) + 1
        return np.arange(n_a) * self.action_step


@dataclass(frozen=True)
class MdpSolution:
    """Converged value table and greedy policy over the state grid.

    ``policy`` holds placement distances in the config's real units (i.e.
    normalized units divided by beta); ``policy_idx`` the action-grid indices.
    """

    config: MdpConfig
    values: np.ndarray
    policy: np.ndarray
    policy_idx: np.ndarray
    sweeps_used: int
    converged: bool
    residual: float

    def action_at_state_index(self, idx: int) -> float:
        return float(self.policy[idx])

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "mdp_solution",
            "config": {
                "beta": cfg.beta,
                "rho": cfg.rho,
                "xi": cfg.xi,
                "state_step": cfg.state_step,
                "action_step": cfg.action_step,
                "action_max": cfg.resolved_action_max(),
                "vi_tolerance": cfg.vi_tolerance,
                "max_sweeps": cfg.max_sweeps,
            },
            "grid": self.config.state_grid().tolist(),
            "values": self.values.tolist(),
            "policy": self.policy.tolist(),
            "policy_idx": self.policy_idx.tolist(),
            "sweeps": self.sweeps_used,
            "converged": self.converged,
            "residual": self.residual,
        }

    @staticmethod
    def from_dict(doc: dict) -> "MdpSolution":
        if doc.get("schema_version") != SCHEMA_VERSION or doc.get("kind") != "mdp_solution":
            raise ValueError("not a recognized mdp_solution document")
        c = doc["config"]
        cfg = MdpConfig(
            beta=c["beta"],
            rho=c["rho"],
            xi=c["xi"],
            state_step=c["state_step"],
            action_step=c["action_step"],
            action_max=c["action_max"],
            vi_tolerance=c["vi_tolerance"],
            max_sweeps=c["max_sweeps"],
        )
        values = np.asarray(doc["values"], dtype=float)
        policy = np.asarray(doc["policy"], dtype=float)
        policy_idx = np.asarray(doc["policy_idx"], dtype=np.int64)
        if len(values) != cfg.n_states or len(policy) != cfg.n_states:
            raise ValueError("table lengths do not match the state grid")
        return MdpSolution(
            config=cfg,
            values=values,
            policy=policy,
            policy_idx=policy_idx,
            sweeps_used=int(doc["sweeps"]),
            converged=bool(doc["converged"]),
            residual=float(doc["residual"]),
        )


def grid_ceil_index(w: float, inv_step: float) -> int:
    """1-based grid index of w rounded up, matching the sweep kernel."""
    return int(math.ceil(w * inv_step))


def state_transition(s: float, r: float, rho: float, state_step: float | None = None) -> float:
    """Next state s*e^{rho*r} / (1 + s*e^{rho*r}); rounded up to the grid when
    ``state_step`` is given (the convention used everywhere downstream)."""
    if not (0.0 < s <= 1.0):
        raise ValueError(f"state must be in (0, 1], got {s}")
    if r < 0.0:
        raise ValueError(f"placement distance must be >= 0, got {r}")
    t = s * math.exp(rho * r)
    w = t / (1.0 + t)
    if state_step is None:
        return w
    return grid_ceil_index(w, 1.0 / state_step) * state_step


def _terminal_cost_coeff(beta: float, rho: float, a: np.ndarray) -> np.ndarray:
    """I(s, a)/s: expected cost of the line ending within distance a.

    Closed form of the integral of beta*e^{-beta z}*(e^{rho z}-1) over [0, a];
    the beta == rho limit gets its own branch to avoid cancellation.
    """
    a = np.asarray(a, dtype=float)
    if abs(beta - rho) < 1e-12:
        return beta * a - (-np.expm1(-beta * a))
    return beta / (beta - rho) * (-np.expm1(-(beta - rho) * a)) - (-np.expm1(-beta * a))


class _Workspace:
    """Precomputed per-config arrays shared by Bellman sweeps."""

    def __init__(self, cfg: MdpConfig):
        self.cfg = cfg
        self.s_grid = cfg.state_grid()
        self.a_grid = cfg.action_grid()
        beta, rho = cfg.beta, cfg.rho
        self.disc = np.exp(-beta * self.a_grid)
        self.e_rho_a = np.exp(rho * self.a_grid)
        k2 = self.e_rho_a - 1.0
        self.k3 = _terminal_cost_coeff(beta, rho, self.a_grid) + self.disc * k2
        self.inv_step = 1.0 / cfg.state_step
        n_s, n_a = len(self.s_grid), len(self.a_grid)
        if n_s * n_a <= _IDX_TABLE_LIMIT:
            t = self.s_grid[:, None] * self.e_rho_a[None, :]
            w = t / (1.0 + t)
            self.idx = np.ceil(w * self.inv_step).astype(np.int32) - 1
        else:
            self.idx = None

    def sweep(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out_j = np.empty_like(values)
        out_idx = np.empty(len(values), dtype=np.int64)
        if self.idx is not None:
            _sweep_table(
                values, self.k3, self.disc, self.cfg.xi, self.s_grid, self.idx, out_j, out_idx
            )
        else:
            _sweep_fly(
                values,
                self.k3,
                self.disc,
                self.cfg.xi,
                self.s_grid,
                self.e_rho_a,
                self.inv_step,
                out_j,
                out_idx,
            )
        return out_j, out_idx


@njit(parallel=True, cache=True)
def _sweep_table(values, k3, disc, xi, s_grid, idx, out_j, out_idx):  # pragma: no cover
    n_s = s_grid.shape[0]
    n_a = disc.shape[0]
    for i in prange(n_s):
        s = s_grid[i]
        row = idx[i]
        best = np.inf
        best_a = 0
        for a in range(n_a):
            v = s * k3[a] + disc[a] * (xi + values[row[a]])
            if v < best:
                best = v
                best_a = a
        out_j[i] = best
        out_idx[i] = best_a


@njit(parallel=True, cache=True)
def _sweep_fly(values, k3, disc, xi, s_grid, e_rho_a, inv_step, out_j, out_idx):  # pragma: no cover
    n_s = s_grid.shape[0]
    n_a = disc.shape[0]
    for i in prange(n_s):
        s = s_grid[i]
        best = np.inf
        best_a = 0
        for a in range(n_a):
            t = s * e_rho_a[a]
            w = t / (1.0 + t)
            k = int(math.ceil(w * inv_step)) - 1
            v = s * k3[a] + disc[a] * (xi + values[k])
            if v < best:
                best = v
                best_a = a
        out_j[i] = best
        out_idx[i] = best_a


_workspace_cache: dict[MdpConfig, _Workspace] = {}


def _normalized(cfg: MdpConfig) -> MdpConfig:
    """The beta = 1 twin of a config; distances shrink by the factor beta."""
    if cfg.beta == 1.0:
        return replace(cfg, action_max=cfg.resolved_action_max())
    return replace(cfg, beta=1.0, rho=cfg.attenuation, action_max=cfg.resolved_action_max())


def _workspace(cfg: MdpConfig) -> _Workspace:
    ws = _workspace_cache.get(cfg)
    if ws is None:
        ws = _Workspace(_normalized(cfg))
        if len(_workspace_cache) > 8:
            _workspace_cache.clear()
        _workspace_cache[cfg] = ws
    return ws


def stage_value(s: float, a: float, values: np.ndarray, cfg: MdpConfig) -> float:
    """Expected total cost of walking distance a from state s, then following
    the policy implicit in ``values``.  ``a`` is in real units (1/beta)."""
    a_top = cfg.resolved_action_max() / cfg.beta
    if not (0.0 <= a <= a_top + 1e-12):
        raise ValueError(f"action {a} outside [0, {a_top}]")
    if not (0.0 < s <= 1.0):
        raise ValueError(f"state must be in (0, 1], got {s}")
    beta, rho = cfg.beta, cfg.rho
    i_coeff = float(_terminal_cost_coeff(beta, rho, np.array([a]))[0])
    disc = math.exp(-beta * a)
    t = s * math.exp(rho * a)
    w = t / (1.0 + t)
    k = grid_ceil_index(w, 1.0 / cfg.state_step) - 1
    return s * i_coeff + disc * (s * math.expm1(rho * a) + cfg.xi + float(values[k]))


def bellman_update(values: np.ndarray, cfg: MdpConfig) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous sweep of the value-iteration operator.

    Returns the new table and the greedy placement distances (ties broken
    toward the smallest action, which argmin order guarantees).
    """
    values = np.asarray(values, dtype=float)
    if len(values) != cfg.n_states or not np.all(np.isfinite(values)):
        raise ValueError("value table must be finite and match the state grid")
    ws = _workspace(cfg)
    out_j, out_idx = ws.sweep(values)
    return out_j, ws.a_grid[out_idx] / cfg.beta


def _solve_normalized(cfg: MdpConfig) -> tuple[np.ndarray, np.ndarray, int, bool, float]:
    ws = _workspace(cfg)
    values = np.zeros(cfg.n_states)
    residual = math.inf
    sweeps = 0
    converged = False
    while sweeps < cfg.max_sweeps:
        new_values, _ = ws.sweep(values)
        sweeps += 1
        residual = float(np.max(np.abs(new_values - values)))
        values = new_values
        if residual < cfg.vi_tolerance:
            converged = True
            break
    _, policy_idx = ws.sweep(values)
    return values, policy_idx, sweeps, converged, residual


def solve(cfg: MdpConfig) -> MdpSolution:
    """Value-iterate to the optimal placement policy.

    Solves the normalized (beta = 1) problem, doubling the action truncation
    and re-solving if any greedy action lands on the top 10% of the grid, then
    rescales distances by 1/beta.  Non-convergence within ``max_sweeps`` is
    reported through ``converged=False`` rather than an exception.
    """
    norm = _normalized(cfg)
    for _ in range(8):
        values, policy_idx, sweeps, converged, residual = _solve_normalized(norm)
        n_a = len(norm.action_grid())
        if not converged or int(policy_idx.max()) < int(0.9 * n_a):
            break
        norm = replace(norm, action_max=2.0 * norm.resolved_action_max())
    else:
        raise RuntimeError(
            f"greedy actions kept saturating the action grid up to {norm.resolved_action_max()}"
        )
    policy = norm.action_grid()[policy_idx] / cfg.beta
    return MdpSolution(
        config=replace(cfg, action_max=norm.resolved_action_max()),
        values=values,
        policy=policy,
        policy_idx=policy_idx,
        sweeps_used=sweeps,
        converged=converged,
        residual=residual,
    )


def analytic_bounds(cfg: MdpConfig, s: float) -> tuple[float | None, float]:
    """Upper bounds on the optimal value at state s.

    First element: theta*s, the cost of never placing (only when beta > rho).
    Second: the best fixed-spacing bound (xi + e^{rho*a} - 1)/(beta*a)
    + e^{rho*a} - 1 over a sample of spacings a.
    """
    if not (0.0 < s <= 1.0):
        raise ValueError(f"state must be in (0, 1], got {s}")
    theta_bound = None
    if cfg.theta is not None:
        theta_bound = cfg.theta * s
    a = np.geomspace(cfg.action_step / cfg.beta, cfg.resolved_action_max() / cfg.beta, 200)
    grow = np.expm1(cfg.rho * a)
    bounds = (cfg.xi + grow) / (cfg.beta * a) + grow
    return theta_bound, float(bounds.min())
