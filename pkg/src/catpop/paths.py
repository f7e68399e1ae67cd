"""Empirical reconstruction of the most probable deviation trajectory.

Conditioning on the rare event directly is hopeless at interesting sizes, so
the conditional mean path is computed as an importance-weighted average over
samples that satisfy the event.  Its distance to the predicted idle-then-climb
trajectory is the headline shape check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import OptimalPath, ScaledPath


class NoQualifyingSamplesError(RuntimeError):
    """No sample with positive weight satisfies the conditioning event."""


@dataclass(eq=False)
class MeanPath:
    """Weighted conditional mean of scaled paths on a common grid."""

    grid: np.ndarray
    mean_values: np.ndarray
    total_weight: float


def conditioned_mean_path(
    samples: Iterable[tuple[ScaledPath, float, bool]],
    grid_size: int = 100,
) -> MeanPath:
    """Weighted average of the scaled paths that satisfy the conditioning event.

    ``samples`` yields (path, weight, qualifies) triples on a shared grid of
    ``grid_size + 1`` points; only qualifying samples with positive weight
    contribute.
    """
    grid = None
    acc = None
    total = 0.0
    for path, weight, qualifies in samples:
        if not qualifies or weight <= 0:
            continue
        if grid is None:
            grid = path.grid
            if grid.size != grid_size + 1:
                raise ValueError(
                    f"sample grids have {path.grid.size} points, expected {grid_size + 1}"
                )
            acc = np.zeros(grid.size)
        acc += weight * path.values
        total += weight
    if grid is None:
        raise NoQualifyingSamplesError(
            "no sample with positive weight satisfies the conditioning event"
        )
    return MeanPath(grid=grid, mean_values=acc / total, total_weight=total)


def path_distance(mean_path: MeanPath, reference: OptimalPath) -> float:
    """Sup-norm distance between a mean path and a reference trajectory."""
    ref = reference.values(mean_path.grid)
    return float(np.max(np.abs(mean_path.mean_values - ref)))
