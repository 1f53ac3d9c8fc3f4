"""Monte Carlo timing of a nested repeater chain.

Time is counted in communication rounds of ``L0/c``: every elementary link
makes one attempt per round.  A segment at level ``l`` waits for its two
halves, then attempts a swap; on failure both halves are discarded and
regenerated.  With postselection, two full chains are built in parallel and
the end nodes attempt postselection, restarting both chains on failure.

Fidelities are not sampled: the link state after each stage follows the
analytic maps deterministically.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import IO, Iterable, Sequence

import numpy as np

from . import analytic
from .analytic import LinkParams, MixedLinkState, RateReport


@dataclass(frozen=True)
class ChainConfig:
    """Chain layout, trial budget and optional probability overrides.

    ``p0``, ``swap_probabilities`` and ``p_ps`` replace the analytic values
    when given, which is how idealized chains are simulated.
    """

    n_links: int
    link: LinkParams
    n_trials: int = 10_000
    rng_seed: int = 0
    postselection: bool = True
    swap_cost: str = "free"
    p0: float | None = None
    swap_probabilities: tuple[float, ...] | None = None
    p_ps: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n_links not in (2, 4):
            raise ValueError(f"n_links must be 2 or 4, got {self.n_links}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.swap_cost not in ("free", "classical"):
            raise ValueError(f"swap_cost must be 'free' or 'classical', got {self.swap_cost!r}")
        if self.swap_probabilities is not None and len(self.swap_probabilities) != self.levels:
            raise ValueError(f"need {self.levels} swap probabilities, got {len(self.swap_probabilities)}")
        for name, value in (("p0", self.p0), ("p_ps", self.p_ps)):
            if value is not None and not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.swap_probabilities is not None and not all(0.0 < p <= 1.0 for p in self.swap_probabilities):
            raise ValueError("swap probabilities must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def levels(self) -> int:
        return self.n_links.bit_length() - 1

    @property
    def round_time(self) -> float:
        return self.link.L0 / self.link.c

    def probabilities(self) -> tuple[float, tuple[float, ...], float]:
        """``(P0, swap probabilities per level, P_ps)`` after overrides."""
        report = analytic.chain_time(self.link, self.n_links)
        p0 = report.p0 if self.p0 is None else self.p0
        swaps = report.swap_probabilities if self.swap_probabilities is None else tuple(self.swap_probabilities)
        p_ps = report.p_ps if self.p_ps is None else self.p_ps
        if not self.postselection:
            p_ps = 1.0
        return p0, tuple(swaps), p_ps


@dataclass(frozen=True)
class TrialRecord:
    total_time: float
    rounds: int
    attempts_per_link: tuple[int, ...]
    swap_retries: tuple[int, ...]
    postselection_retries: int
    links_heralded: int
    final_state: MixedLinkState

    def to_json(self) -> str:
        data = asdict(self)
        data["final_state"] = asdict(self.final_state)
        return json.dumps(data, sort_keys=True)


def _geometric(rng: np.random.Generator, p: float, size: int) -> np.ndarray:
    if p >= 1.0:
        return np.ones(size, dtype=np.int64)
    return rng.geometric(p, size).astype(np.int64)


def _segments(rng, level: int, count: int, p0: float, swaps: Sequence[float], swap_cost: str):
    """Completion rounds, per-leaf attempts, swap failures and heralded links for ``count`` segments."""
    if level == 0:
        t = _geometric(rng, p0, count)
        return t, t.reshape(count, 1), np.zeros(0, dtype=np.int64), count
    tries = _geometric(rng, swaps[level - 1], count)
    total = int(tries.sum())
    sub_t, sub_a, sub_f, heralds = _segments(rng, level - 1, 2 * total, p0, swaps, swap_cost)
    cost = 2 ** (level - 1) if swap_cost == "classical" else 0
    per_try = sub_t.reshape(total, 2).max(axis=1) + cost
    leaves = sub_a.reshape(total, 2 * sub_a.shape[1])
    starts = np.concatenate(([0], np.cumsum(tries)[:-1]))
    times = np.add.reduceat(per_try, starts)
    attempts = np.add.reduceat(leaves, starts, axis=0)
    failures = np.concatenate((sub_f, [total - count]))
    return times, attempts, failures, heralds


def _run_trial(seed: np.random.SeedSequence, p0, swaps, p_ps, config: ChainConfig, final: MixedLinkState) -> TrialRecord:
    rng = np.random.Generator(np.random.Philox(seed))
    chains = 2 if config.postselection else 1
    ps_tries = int(_geometric(rng, p_ps, 1)[0]) if config.postselection else 1
    t, attempts, failures, heralds = _segments(rng, config.levels, chains * ps_tries, p0, swaps, config.swap_cost)
    rounds = int(t.reshape(ps_tries, chains).max(axis=1).sum())
    per_link = attempts.reshape(ps_tries, chains * config.n_links).sum(axis=0)
    return TrialRecord(
        total_time=rounds * config.round_time,
        rounds=rounds,
        attempts_per_link=tuple(int(x) for x in per_link),
        swap_retries=tuple(int(x) for x in failures),
        postselection_retries=ps_tries - 1,
        links_heralded=int(heralds),
        final_state=final,
    )


def _run_chunk(args) -> list[TrialRecord]:
    seeds, p0, swaps, p_ps, config, final = args
    return [_run_trial(s, p0, swaps, p_ps, config, final) for s in seeds]


def run_trials(config: ChainConfig) -> list[TrialRecord]:
    """Simulate ``config.n_trials`` independent trials; each owns a spawned Philox stream."""
    p0, swaps, p_ps = config.probabilities()
    final = analytic.nested_states(config.link, config.levels)[-1]
    seeds = np.random.SeedSequence(config.rng_seed).spawn(config.n_trials)
    if config.workers == 1:
        return _run_chunk((seeds, p0, swaps, p_ps, config, final))
    chunks = np.array_split(np.arange(config.n_trials), config.workers)
    jobs = [([seeds[i] for i in idx], p0, swaps, p_ps, config, final) for idx in chunks]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return [rec for part in pool.map(_run_chunk, jobs) for rec in part]


def analytic_time(config: ChainConfig) -> float:
    """Rate-formula prediction with the config's probabilities (free swaps)."""
    p0, swaps, p_ps = config.probabilities()
    waits = config.levels + (1 if config.postselection else 0)
    return 1.5**waits * config.round_time / (p0 * float(np.prod(swaps)) * p_ps)


def summarize(records: Sequence[TrialRecord], config: ChainConfig) -> dict:
    times = np.array([r.total_time for r in records])
    heralded = sum(r.links_heralded for r in records)
    attempts = sum(sum(r.attempts_per_link) for r in records)
    mean = float(times.mean())
    se = float(times.std(ddof=1) / math.sqrt(len(times))) if len(times) > 1 else float("nan")
    return {
        "n_trials": len(records),
        "mean_time_s": mean,
        "std_error_s": se,
        "analytic_time_s": analytic_time(config),
        "link_success_frequency": heralded / attempts if attempts else float("nan"),
        "mean_postselection_retries": float(np.mean([r.postselection_retries for r in records])),
    }


def simulate_chain(config: ChainConfig) -> RateReport:
    """Run the Monte Carlo and attach the empirical summary to the analytic report."""
    records = run_trials(config)
    return report_for(config, summarize(records, config))


def report_for(config: ChainConfig, empirical: dict) -> RateReport:
    report = analytic.chain_time(config.link, config.n_links)
    p0, swaps, p_ps = config.probabilities()
    t0 = config.round_time / p0
    single = 1.5**config.levels * t0 / (float(np.prod(swaps)) * (p_ps if config.postselection else 1.0))
    return replace(
        report,
        p0=p0,
        t0=t0,
        swap_probabilities=swaps,
        p_ps=p_ps,
        single_chain_time=single,
        total_time=analytic_time(config),
        empirical=empirical,
    )


def sample_link_time(params: LinkParams, rng: np.random.Generator, size: int | None = None):
    """Time to herald one elementary link: geometric attempts times ``L0/c``."""
    p0 = analytic.link_success_probability(params)
    if p0 <= 0.0:
        raise ValueError("link success probability is zero")
    n = 1 if size is None else size
    rounds = _geometric(rng, p0, n) * (params.L0 / params.c)
    return float(rounds[0]) if size is None else rounds


def write_records(records: Iterable[TrialRecord], stream: IO[str]) -> int:
    """Write one JSON object per line; returns the number written."""
    count = 0
    for rec in records:
        stream.write(rec.to_json() + "\n")
        count += 1
    return count
