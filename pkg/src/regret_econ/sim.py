"""Synthetic bidders with known values, standing in for human bid logs.

Every agent draws from its own generator seeded by (session seed, agent
index), so adding or changing one agent leaves the others' draws untouched.
"""
from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .auction import DEFAULT_CTRS, DEFAULT_VALUES, CtrProfile, Mechanism, _tables_for, resolve
from .regret import DEFAULT_GRID, BidSequence

AGENT_KINDS = ("truthful", "hedge", "eps-greedy", "overbidder", "replay")


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    sigma: float = 0.0
    eta: float | None = None  # None: sqrt(ln|B| / T)
    epsilon: float = 0.1
    kappa: float = 0.0
    source: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; choose from {AGENT_KINDS}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "AgentSpec":
        """Parse ``"hedge eta=0.05"``, ``"truthful sigma=2"``, ``"overbidder kappa=0.4 sigma=2"``."""
        parts = shlex.split(text)
        if not parts:
            raise ValueError("empty agent spec")
        kw = {}
        for p in parts[1:]:
            key, _, val = p.partition("=")
            if key not in ("sigma", "eta", "epsilon", "kappa"):
                raise ValueError(f"unknown agent parameter {key!r}")
            kw[key] = float(val)
        return cls(parts[0], **kw)


def truthful(sigma: float = 0.0) -> AgentSpec:
    return AgentSpec("truthful", sigma=sigma)


def hedge(eta: float | None = None) -> AgentSpec:
    return AgentSpec("hedge", eta=eta)


def eps_greedy(epsilon: float = 0.1) -> AgentSpec:
    return AgentSpec("eps-greedy", epsilon=epsilon)


def overbidder(kappa: float = 0.4, sigma: float = 0.0) -> AgentSpec:
    return AgentSpec("overbidder", kappa=kappa, sigma=sigma)


def replay(bids: Sequence[float]) -> AgentSpec:
    return AgentSpec("replay", source=tuple(float(b) for b in bids))


@dataclass(frozen=True)
class SessionConfig:
    mechanism: Mechanism = Mechanism.GSP
    ctrs: CtrProfile = DEFAULT_CTRS
    rounds: int = 1500
    values: tuple[float, ...] = DEFAULT_VALUES
    agents: tuple[AgentSpec, ...] = ()
    seed: int = 0
    grid: tuple[float, ...] = tuple(DEFAULT_GRID)

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        n = len(self.values)
        if n != self.ctrs.n:
            raise ValueError(f"{n} values for {self.ctrs.n} positions")
        if any(v <= 0 for v in self.values):
            raise ValueError("values must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        agents = tuple(self.agents) or tuple(truthful() for _ in range(n))
        if len(agents) == 1 and n > 1:
            agents = agents * n
        if len(agents) != n:
            raise ValueError(f"{len(agents)} agent specs for {n} bidders")
        object.__setattr__(self, "agents", agents)


class Agent:
    def __init__(self, spec: AgentSpec, value: float, index: int, cfg: SessionConfig):
        self.spec = spec
        self.v = float(value)
        self.index = index
        self.grid = np.asarray(cfg.grid, dtype=float)
        self.cap = float(self.grid.max())
        self.n = len(cfg.values)
        self.rng = np.random.default_rng([cfg.seed, index])
        self.cum = np.zeros(len(self.grid))
        self.slot_counts = np.zeros(self.n, dtype=int)
        self.t = 0
        eta = spec.eta
        self.eta = eta if eta is not None else math.sqrt(math.log(len(self.grid)) / cfg.rounds)

    @property
    def needs_counterfactuals(self) -> bool:
        return self.spec.kind in ("hedge", "eps-greedy")

    def hedge_probs(self) -> np.ndarray:
        z = self.eta * (self.cum - self.cum.max())
        p = np.exp(z)
        return p / p.sum()

    def modal_slot(self) -> int | None:
        if not self.slot_counts.any():
            return None
        return int(np.argmax(self.slot_counts)) + 1  # argmax keeps the better slot on ties

    def bid(self) -> float:
        s = self.spec
        if s.kind == "truthful":
            noise = self.rng.normal(0.0, s.sigma) if s.sigma > 0 else 0.0
            return float(np.clip(self.v + noise, 0.0, self.cap))
        if s.kind == "hedge":
            return float(self.grid[self.rng.choice(len(self.grid), p=self.hedge_probs())])
        if s.kind == "eps-greedy":
            if self.rng.random() < s.epsilon:
                return float(self.grid[self.rng.integers(len(self.grid))])
            return float(self.grid[np.argmax(self.cum)])
        if s.kind == "overbidder":
            slot = self.modal_slot()
            r = 0.0 if slot is None else (slot - 1) / (self.n - 1)
            noise = self.rng.normal(0.0, s.sigma) if s.sigma > 0 else 0.0
            return float(np.clip(self.v * (1 + s.kappa * r) + noise, 0.0, self.cap))
        if self.t >= len(s.source):
            raise RuntimeError(f"replay source for bidder {self.index + 1} exhausted at round {self.t + 1}")
        return s.source[self.t]

    def observe(self, slot: int, grid_utils: np.ndarray | None) -> None:
        self.t += 1
        self.slot_counts[slot - 1] += 1
        if grid_utils is not None:
            self.cum += grid_utils


@dataclass
class SessionResult:
    config: SessionConfig
    seq: BidSequence
    positions: np.ndarray  # (T, n)
    expenditures: np.ndarray
    utilities: np.ndarray
    welfare: np.ndarray  # (T,)

    @property
    def values(self) -> dict[int, float]:
        return dict(zip(self.seq.bidder_ids, self.config.values))


def run_session(cfg: SessionConfig) -> SessionResult:
    """Play ``cfg.rounds`` simultaneous-bid auctions.

    Agents see the full opponent profile after every round, so learners update
    on the utility every grid bid would have earned.
    """
    n = len(cfg.values)
    agents = [Agent(spec, v, i, cfg) for i, (spec, v) in enumerate(zip(cfg.agents, cfg.values))]
    grid = np.asarray(cfg.grid, dtype=float)
    T = cfg.rounds
    bids = np.zeros((T, n))
    pos = np.zeros((T, n), dtype=int)
    exp = np.zeros((T, n))
    util = np.zeros((T, n))
    welfare = np.zeros(T)
    values = np.asarray(cfg.values, dtype=float)
    for t in range(T):
        profile = np.array([a.bid() for a in agents])
        out = resolve(cfg.mechanism, profile, cfg.ctrs, values)
        bids[t], pos[t], exp[t], util[t], welfare[t] = (profile, out.positions, out.expenditures,
                                                        out.utilities, out.welfare)
        row = profile[None, :]
        for i, a in enumerate(agents):
            gu = None
            if a.needs_counterfactuals:
                ctr, pay = _tables_for(cfg.mechanism, row, i, grid[None, :], cfg.ctrs)
                gu = a.v * ctr[0] - pay[0]
            a.observe(int(out.positions[i]), gu)
    seq = BidSequence(bids, tuple(range(1, n + 1)), cfg.mechanism, cfg.ctrs)
    return SessionResult(cfg, seq, pos, exp, util, welfare)
