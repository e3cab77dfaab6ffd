"""Unsupervised labeling by nonlinear diffusion (LUND) and its diagnostics.

LUND seeds labels at the top mode-score points and propagates them in
decreasing density order: every point takes the label of its diffusion-
nearest strictly-denser point, which is already labeled by the time the
point is visited.  The number of clusters is estimated from the largest
ratio between consecutive sorted mode scores.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import validate_labels
from .geometry import (
    DensityEstimate,
    DiffusionEmbedding,
    ModeScores,
    density_descending_order,
    global_density_maximizer,
    nearest_denser_points,
)


@dataclass(frozen=True)
class ClusteringResult:
    """A full labeling in 1..num_clusters with the seeded mode points."""

    num_clusters: int
    labels: np.ndarray
    mode_indices: np.ndarray


@dataclass(frozen=True)
class SeparationDiagnostics:
    """Within/between-class diffusion distances and classwise density peaks.

    lund_condition_holds is the unsupervised-recovery test
    d_in / d_btw < max_mode_density / min_mode_density; land_condition_holds
    is the stricter d_in < d_btw under which seeding every classwise density
    maximizer labels the data perfectly.
    """

    d_in: float
    d_btw: float
    class_ids: np.ndarray
    maximizer_indices: np.ndarray
    max_mode_density: float
    min_mode_density: float
    lund_condition_holds: bool
    land_condition_holds: bool


def propagate_labels(
    seeds: np.ndarray,
    dens: DensityEstimate,
    emb: DiffusionEmbedding,
    nearest_higher: np.ndarray | None = None,
) -> np.ndarray:
    """Complete a partial labeling in decreasing density order.

    Each unlabeled point takes the label of its diffusion-nearest
    strictly-denser point (denser points are always visited, hence labeled,
    first).  If the global density maximizer itself is unseeded it has no
    denser point; it falls back to the nearest seeded point regardless of
    density, with a warning.

    Pass nearest_higher (e.g. from ModeScores) to skip recomputing the
    nearest-denser-point search.
    """
    labels = validate_labels(seeds, n=dens.n)
    if not np.any(labels > 0):
        raise ValueError("at least one seed label is required")
    if emb.n != dens.n:
        raise ValueError(f"embedding has {emb.n} rows but density has {dens.n}")
    if not np.any(labels == 0):
        return labels
    if nearest_higher is None:
        _, nearest_higher = nearest_denser_points(emb, dens)

    order = density_descending_order(dens.p)
    for i in order:
        if labels[i] != 0:
            continue
        j = nearest_higher[i]
        if j != i:
            labels[i] = labels[j]
        else:
            # global maximizer unseeded: nearest seed wins, any density
            warnings.warn(
                "global density maximizer is unseeded; assigning it the "
                "label of the nearest seeded point",
                stacklevel=2,
            )
            seeded = np.flatnonzero(labels > 0)
            d = cdist(emb.coords[i : i + 1], emb.coords[seeded])[0]
            labels[i] = labels[seeded[np.lexsort((seeded, d))[0]]]
    return labels


def estimate_num_clusters(scores: ModeScores) -> int:
    """Largest ratio between consecutive sorted mode scores.

    The argmax runs over positions 1..ceil(n/2) (deep-tail ratios are
    excluded: a near-zero denominator far down the ordering would otherwise
    dominate); ties go to the smaller position.
    """
    n = scores.n
    if n < 2:
        raise ValueError("cluster count estimation needs at least two points")
    sorted_scores = scores.score[scores.order]
    limit = min(n - 1, math.ceil(n / 2))
    if np.any(sorted_scores[: limit + 1] == 0):
        raise ValueError(
            "zero mode score in the searched range; scores must be positive"
        )
    ratios = sorted_scores[:limit] / sorted_scores[1 : limit + 1]
    return int(np.argmax(ratios)) + 1


def lund_k(
    scores: ModeScores,
    dens: DensityEstimate,
    emb: DiffusionEmbedding,
    num_clusters: int,
) -> ClusteringResult:
    """Label the data with a known number of clusters.

    Seeds labels 1..K on the top-K mode-score points, then propagates in
    decreasing density order.
    """
    n = scores.n
    if not 1 <= num_clusters <= n:
        raise ValueError(f"need 1 <= num_clusters <= n, got {num_clusters}")
    modes = scores.order[:num_clusters].copy()
    seeds = np.zeros(n, dtype=np.int64)
    seeds[modes] = np.arange(1, num_clusters + 1)
    labels = propagate_labels(seeds, dens, emb, nearest_higher=scores.nearest_higher)
    return ClusteringResult(num_clusters=num_clusters, labels=labels, mode_indices=modes)


def lund(
    scores: ModeScores, dens: DensityEstimate, emb: DiffusionEmbedding
) -> ClusteringResult:
    """Fully unsupervised labeling: estimate the cluster count, then label."""
    return lund_k(scores, dens, emb, estimate_num_clusters(scores))


def separation_diagnostics(
    emb: DiffusionEmbedding,
    dens: DensityEstimate,
    truth: np.ndarray,
    sample_rows: int | None = None,
    seed: int = 0,
) -> SeparationDiagnostics:
    """Max within-class and min between-class diffusion distances.

    Exact over all point pairs by default (chunked, O(n^2) time).  For large
    n a row sample can be requested; the resulting d_in is then a lower
    bound and d_btw an upper bound, which is recorded as-is.
    """
    truth = validate_labels(truth, n=dens.n, complete=True)
    classes = np.unique(truth)
    coords = emb.coords
    n = coords.shape[0]

    maximizers = np.empty(len(classes), dtype=np.int64)
    for ci, c in enumerate(classes):
        members = np.flatnonzero(truth == c)
        # classwise density peak, ties to the smaller index
        best = members[np.lexsort((members, -dens.p[members]))[0]]
        maximizers[ci] = best
    mode_density = dens.p[maximizers]
    max_mode = float(mode_density.max())
    min_mode = float(mode_density.min())

    if sample_rows is not None and sample_rows < n:
        rng = np.random.default_rng(seed)
        rows = np.union1d(rng.choice(n, size=sample_rows, replace=False), maximizers)
    else:
        rows = np.arange(n)

    d_in = 0.0
    d_btw = math.inf
    chunk = max(1, int(2**22 // max(1, n)))
    for start in range(0, len(rows), chunk):
        block = rows[start : start + chunk]
        d = cdist(coords[block], coords)
        same = truth[block][:, None] == truth[None, :]
        if np.any(same):
            d_in = max(d_in, float(d[same].max()))
        if np.any(~same):
            d_btw = min(d_btw, float(d[~same].min()))
    if not math.isfinite(d_btw):
        d_btw = 0.0  # single class: no between-class pairs

    # cross-multiplied form avoids dividing by a zero d_btw
    lund_ok = d_in * min_mode < max_mode * d_btw
    land_ok = d_in < d_btw
    return SeparationDiagnostics(
        d_in=d_in,
        d_btw=d_btw,
        class_ids=classes,
        maximizer_indices=maximizers,
        max_mode_density=max_mode,
        min_mode_density=min_mode,
        lund_condition_holds=bool(lund_ok),
        land_condition_holds=bool(land_ok),
    )


def save_diagnostics_csv(path, diag: SeparationDiagnostics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("field,value\n")
        fh.write(f"d_in,{diag.d_in!r}\n")
        fh.write(f"d_btw,{diag.d_btw!r}\n")
        fh.write(f"max_mode_density,{diag.max_mode_density!r}\n")
        fh.write(f"min_mode_density,{diag.min_mode_density!r}\n")
        fh.write(f"lund_condition_holds,{int(diag.lund_condition_holds)}\n")
        fh.write(f"land_condition_holds,{int(diag.land_condition_holds)}\n")
        for c, m in zip(diag.class_ids, diag.maximizer_indices):
            fh.write(f"maximizer_class_{int(c)},{int(m)}\n")


__all__ = [
    "ClusteringResult",
    "SeparationDiagnostics",
    "propagate_labels",
    "estimate_num_clusters",
    "lund",
    "lund_k",
    "separation_diagnostics",
    "save_diagnostics_csv",
]
