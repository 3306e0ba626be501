"""Episode orchestration, PPO training loop and scheduler benchmarks."""
from __future__ import annotations

import csv
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fl, phy
from .alloc import AllocProblem, EmptyRoundError, ado_optimize, check_constraints
from .core import ConfigError, RngBundle, SimConfig, make_profiles
from .records import RoundRecord, write_round_records
from .scheduler import baselines
from .scheduler.mdp import build_state, decode_action, reward, state_dim
from .scheduler.ppo import PpoAgent, PpoHyper, Transition

log = logging.getLogger(__name__)

PENALTY_ROUND_TIME_S = 10.0


class Environment:
    """One episode of the wireless FL system: topology, data, batteries and the global model."""

    def __init__(self, cfg: SimConfig, seed: int, tag: str = ""):
        self.cfg = cfg
        self.rngs = RngBundle.for_episode(seed, tag)
        self.dataset = fl.generate_noniid(cfg, self.rngs.data)
        sizes = self.dataset.shard_sizes
        bits = [fl.batch_bits(fl.batch_size_for(d)) for d in sizes]
        self.profiles = make_profiles(cfg, self.rngs.channel, bits, self.dataset.shards)
        self.task = fl.FederatedTask.create(cfg, self.dataset, self.rngs.sgd)
        self.energy = phy.initial_energy(cfg, self.rngs.energy)
        self.round_index = 0
        self.channel = None

    @property
    def n_users(self) -> int:
        return self.cfg.n_users

    @property
    def comp_cycles(self) -> np.ndarray:
        return np.array([self.cfg.local_epochs * p.cycles_per_bit * p.batch_bits for p in self.profiles])

    @property
    def pathloss_db(self) -> np.ndarray:
        return np.array([p.pathloss_db for p in self.profiles])

    def draw_channel(self):
        self.channel = phy.draw_channel(self.profiles, self.cfg, self.rngs.channel)
        return self.channel

    def state_vector(self) -> np.ndarray:
        cfg = self.cfg
        st = build_state(self.channel.mean_gain, [p.f_min_hz for p in self.profiles],
                         [p.f_max_hz for p in self.profiles], self.task.divergence,
                         cfg.target_accuracy, self.task.accuracy, self.energy.budgets_j, cfg.e_max_j)
        return st.flatten()

    def alloc_problem(self, users) -> AllocProblem:
        cfg = self.cfg
        users = list(users)
        return AllocProblem(
            scheduled=users, cnr=self.channel.cnr[users], comp_cycles=self.comp_cycles[users],
            budgets_j=self.energy.budgets_j[users], p_max_w=cfg.p_max_w, f_min_hz=cfg.f_min_hz,
            f_max_hz=cfg.f_max_hz, model_bits=cfg.model_bits, bandwidth_hz=cfg.bandwidth_hz,
            kappa=cfg.kappa, pathloss_db=self.pathloss_db[users],
        )


class BaselineScheduler:
    def __init__(self, kind: str):
        if kind not in baselines.KINDS:
            raise ValueError(f"unknown scheduler {kind!r}; expected one of {baselines.KINDS}")
        self.name = kind

    def select(self, env: Environment) -> list[int]:
        cfg, rng = env.cfg, env.rngs.policy
        if self.name == "fedavg":
            return baselines.fedavg_schedule(cfg.n_users, rng)
        if self.name == "max_gradient":
            return baselines.max_gradient_schedule(env.task.grad_norms, rng)
        if self.name == "ascend":
            return baselines.ascend_schedule(env.round_index, cfg.max_rounds, cfg.n_users, rng)
        mean_cnr = env.channel.cnr.mean(axis=1)
        t_cp = env.comp_cycles / cfg.f_max_hz
        return baselines.greedy_schedule(mean_cnr, t_cp, cfg.n_subcarriers, cfg.p_max_w,
                                         cfg.bandwidth_hz, cfg.model_bits)

    def end_round(self, reward_value, done):
        pass


class PpoScheduler:
    """Policy-driven scheduler; in training mode it also fills the agent's buffer.

    Actions are sampled from the policy on the episode's seeded policy stream, so
    runs stay reproducible. ``deterministic=True`` uses the Beta mean instead; with
    a near-uniform learned ranking that repeats one user set every round.
    """

    def __init__(self, agent: PpoAgent, train=False, deterministic=False):
        self.agent = agent
        self.train = train
        self.deterministic = deterministic and not train
        self.name = "ppo"
        self._pending = None

    def select(self, env: Environment) -> list[int]:
        s = env.state_vector()
        if self.deterministic:
            a = self.agent.act_mean(s)
        else:
            a, lp, v = self.agent.act(s, env.rngs.policy)
            if self.train:
                self._pending = (s, a, lp, v)
        return decode_action(a, env.n_users)

    def end_round(self, reward_value, done):
        if self.train and self._pending is not None:
            s, a, lp, v = self._pending
            self.agent.buffer.add(Transition(s, a, lp, reward_value, v, done))
            self._pending = None


def make_scheduler(name: str, snapshot=None):
    if name == "ppo":
        if snapshot is None or not Path(snapshot).exists():
            raise ConfigError(f"ppo scheduler needs a trained snapshot (got {snapshot!r})", "snapshot")
        return PpoScheduler(PpoAgent.load(snapshot))
    return BaselineScheduler(name)


@dataclass
class EpisodeResult:
    rounds_used: int
    total_wallclock_s: float
    reached_target: bool
    per_round: list = field(default_factory=list)
    aborted: bool = False
    violations: list = field(default_factory=list)
    episode_return: float = 0.0

    @property
    def final_accuracy(self) -> float:
        return self.per_round[-1].accuracy if self.per_round else 0.0


def run_episode(cfg: SimConfig, scheduler, seed: int, *, tag="", alloc="lcra",
                diagnostics=False, alloc_dump=None) -> EpisodeResult:
    """Play rounds until the target accuracy or ``max_rounds``; an all-dropped round aborts."""
    env = Environment(cfg, seed, tag)
    records, violations = [], []
    aborted = reached = False
    for k in range(cfg.max_rounds):
        env.round_index = k
        env.draw_channel()
        users = scheduler.select(env)
        problem = env.alloc_problem(users)
        try:
            plan = ado_optimize(problem, solver=alloc)
        except EmptyRoundError:
            log.warning("round %d: every scheduled user was dropped; episode aborted", k)
            aborted = True
            scheduler.end_round(reward(PENALTY_ROUND_TIME_S * cfg.max_rounds), True)
            break
        violations += [f"round {k}: {v}" for v in
                       check_constraints(plan, problem, require_full=alloc == "ldra")]
        if alloc_dump is not None:
            alloc_dump.write(plan.to_json() + "\n")
        outcome = env.task.run_round(plan.users, env.rngs.sgd, diagnostics=diagnostics)
        spent = np.zeros(cfg.n_users)
        spent[plan.users] = plan.total_energy_j
        env.energy = phy.advance_energy(env.energy, spent, env.rngs.energy, cfg)
        if np.any(env.energy.budgets_j < 0) or np.any(env.energy.budgets_j > cfg.e_max_j):
            violations.append(f"round {k}: battery outside [0, e_max]")
        r = reward(plan.round_time_s)
        records.append(RoundRecord(
            round_index=k, scheduled_set=list(users), round_time_s=plan.round_time_s,
            per_user_time_s=plan.total_time_s.tolist(), per_user_energy_j=plan.total_energy_j.tolist(),
            accuracy=outcome.accuracy, reward=r, dropped_users=list(plan.dropped),
            rho=outcome.rho, grad_max_sq=outcome.grad_max_sq,
        ))
        reached = outcome.accuracy >= cfg.target_accuracy
        done = reached or k == cfg.max_rounds - 1
        scheduler.end_round(r, done)
        if reached:
            break
    total = float(sum(r.round_time_s for r in records))
    ret = -cfg.max_rounds * PENALTY_ROUND_TIME_S if aborted else float(sum(r.reward for r in records))
    return EpisodeResult(rounds_used=len(records), total_wallclock_s=total,
                         reached_target=reached and not aborted, per_round=records, aborted=aborted,
                         violations=violations, episode_return=ret)


CURVE_COLUMNS = ("episode", "return", "rounds", "final_accuracy")


def train_agent(cfg: SimConfig, episodes: int, out_dir=None, *, seed=None, alloc="lcra",
                hyper: PpoHyper | None = None):
    """Train a PPO scheduler; returns ``(agent, curve)`` and, with ``out_dir``, writes
    ``learning_curve.csv`` plus the best-return snapshot under ``snapshot/``."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    seed = cfg.rng_seed if seed is None else seed
    agent = PpoAgent(state_dim(cfg.n_users), cfg.n_users + 1,
                     RngBundle.for_episode(seed, "agent-init").policy, hyper)
    sched = PpoScheduler(agent, train=True)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        agent.save(out / "snapshot")
    best = -np.inf
    curve = []
    for ep in range(episodes):
        res = run_episode(cfg, sched, seed, tag=f"train/{ep}", alloc=alloc)
        curve.append((ep, res.episode_return, res.rounds_used, res.final_accuracy))
        if res.episode_return > best:
            best = res.episode_return
            if out is not None:
                agent.save(out / "snapshot")
        agent.maybe_update()
    if out is not None:
        with open(out / "learning_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_COLUMNS)
            for ep, ret, rounds, acc in curve:
                w.writerow([ep, repr(ret), rounds, repr(acc)])
        agent.save(out / "final")
    return agent, curve


BENCH_COLUMNS = ("scheduler", "seed", "a", "target", "rounds", "wallclock_s", "reached")


def bench(cfg: SimConfig, schedulers, seeds, *, sweep_a=None, sweep_target=None, snapshot=None,
          alloc="lcra", out_dir=None, progress=None):
    """One episode per (scheduler, seed, sweep point). Returns the rows and per-scheduler medians."""
    if sweep_a is not None and sweep_target is not None:
        raise ValueError("sweep over a or target, not both")
    points = [cfg]
    if sweep_a is not None:
        points = [cfg.replace(noniid_ratio=float(a)) for a in sweep_a]
    elif sweep_target is not None:
        points = [cfg.replace(target_accuracy=float(t)) for t in sweep_target]
    scheds = {name: make_scheduler(name, snapshot) for name in schedulers}
    rows, results = [], []
    for name in schedulers:
        for point in points:
            for seed in seeds:
                res = run_episode(point, scheds[name], seed, tag="bench", alloc=alloc)
                rows.append((name, seed, point.noniid_ratio, point.target_accuracy,
                             res.rounds_used, res.total_wallclock_s, res.reached_target))
                results.append((name, seed, res))
                if progress:
                    progress(rows[-1])
    medians = {name: statistics.median(r[5] for r in rows if r[0] == name) for name in schedulers}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BENCH_COLUMNS)
            for r in rows:
                w.writerow([r[0], r[1], repr(r[2]), repr(r[3]), r[4], repr(r[5]), str(r[6]).lower()])
    return rows, medians, results


def write_episode(result: EpisodeResult, path) -> None:
    write_round_records(result.per_round, path)


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0
