"""Neuronal-diversity measurement and plain CSV run logging.

CSV schemas (one header row, appended and flushed per write):

* ``fitness.csv``   -- ``generation,best,mean,std`` of the population's
  training fitnesses.
* ``diversity.csv`` -- ``context,index,diversity`` where context is
  ``per_generation`` (sampled from the best genome's final growth step) or
  ``per_growth_step`` (one row per step of a single development, step 0
  included).
* ``eval.csv``      -- ``generation,mean_return,std_return`` of the periodic
  evaluation of the best genome so far.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .nn_core import Array, ContractError

CONTEXT_PER_GENERATION = "per_generation"
CONTEXT_PER_GROWTH_STEP = "per_growth_step"

FITNESS_FIELDS = ("generation", "best", "mean", "std")
DIVERSITY_FIELDS = ("context", "index", "diversity")
EVAL_FIELDS = ("generation", "mean_return", "std_return")


class DiversityUndefined(ValueError):
    """Diversity needs at least two states; callers log the sample as
    missing instead of a value."""


def neuronal_diversity(states, k: int) -> float:
    """Mean over cells of the mean Euclidean distance to each cell's
    min(k, n-1) nearest other cells."""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2:
        raise ContractError(f"states must be a (n, d) array, got {states.shape}")
    n = states.shape[0]
    if n < 2:
        raise DiversityUndefined(f"need at least 2 states, got {n}")
    if k < 1:
        raise ContractError("k must be >= 1")
    diff = states[:, None, :] - states[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(dist, np.inf)  # a cell is not its own neighbour
    kk = min(k, n - 1)
    nearest = np.sort(dist, axis=1)[:, :kk]
    return float(np.mean(np.mean(nearest, axis=1)))


class RunLogger:
    """Append-only CSV logging into a run directory."""

    def __init__(self, run_dir, resume: bool = False):
        self.run_dir = Path(run_dir)
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            probe = self.run_dir / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ContractError(f"run directory {run_dir} is not writable: {exc}")
        self._files = {}
        self._writers = {}
        for name, fields in (("fitness", FITNESS_FIELDS),
                             ("diversity", DIVERSITY_FIELDS),
                             ("eval", EVAL_FIELDS)):
            path = self.run_dir / f"{name}.csv"
            fresh = not (resume and path.exists())
            fh = open(path, "w" if fresh else "a", newline="")
            writer = csv.writer(fh)
            if fresh:
                writer.writerow(fields)
                fh.flush()
            self._files[name] = fh
            self._writers[name] = writer

    def _write(self, name: str, row) -> None:
        self._writers[name].writerow(row)
        self._files[name].flush()

    def log_fitness(self, generation: int, best: float, mean: float, std: float):
        self._write("fitness", [generation, repr(float(best)),
                                repr(float(mean)), repr(float(std))])

    def log_diversity(self, context: str, index: int, diversity: float):
        if context not in (CONTEXT_PER_GENERATION, CONTEXT_PER_GROWTH_STEP):
            raise ContractError(f"unknown diversity context {context!r}")
        self._write("diversity", [context, index, repr(float(diversity))])

    def log_eval(self, generation: int, mean_return: float, std_return: float):
        self._write("eval", [generation, repr(float(mean_return)),
                             repr(float(std_return))])

    def close(self) -> None:
        for fh in self._files.values():
            fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
