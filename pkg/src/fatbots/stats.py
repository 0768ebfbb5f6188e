"""Round-count sweeps over random scenarios, written as CSV."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .scenarios import generate
from .sim import SimConfig, run

log = logging.getLogger(__name__)

COLUMNS = ("n", "seed", "mv_rounds", "le_rounds", "le_iterations", "pf_rounds", "total_rounds", "outcome")


@dataclass(frozen=True)
class TrialRow:
    n: int
    seed: int
    mv_rounds: int
    le_rounds: int
    le_iterations: int
    pf_rounds: int
    total_rounds: int
    outcome: str


def trial_seed(master: int, n: int, trial: int) -> int:
    """Independent scenario seed for one (n, trial) cell of a sweep."""
    return int(np.random.SeedSequence([master, n, trial]).generate_state(1, dtype=np.uint32)[0])


def run_trial(n: int, seed: int, k: int | None = None, config: SimConfig | None = None) -> TrialRow:
    scenario = generate("random", n, seed, k)
    _, out = run(scenario, config or SimConfig())
    return TrialRow(
        n, seed, out.mv_rounds, out.le_rounds, out.le_iterations, out.pf_rounds, out.total_rounds, out.status.value
    )


def _job(args):
    return run_trial(*args)


def sweep(
    ns: Sequence[int], trials: int, seed: int, k: int | None = None, workers: int = 1
) -> list[TrialRow]:
    jobs = [(n, trial_seed(seed, n, t), k) for n in ns for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_job, jobs))
    else:
        rows = []
        for job in jobs:
            rows.append(_job(job))
            log.info("n=%d seed=%d: %s", job[0], job[1], rows[-1].outcome)
    return rows


def write_csv(rows: Iterable[TrialRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))
