"""Score filtering, multi-label assignment, and imbalance-aware resampling.

The math pipeline over per-video score records:

1. ``filter_pool``       -- keep records with vqa >= 3.0 and reality >= 4
                            (both inclusive), optionally also a floor on the
                            aggregated richness total.
2. ``assign_labels``     -- threshold the 17-dim richness vector at tau into
                            a binary label matrix; an all-negative row falls
                            back to its argmax primitive so every video
                            carries at least one label.
3. ``irbl_weights``      -- per-primitive rarity weight max_k C_k / C_j from
                            the label-matrix column sums.
4. ``resample``          -- draw N' videos without replacement, each video
                            weighted by the sum of its positive labels' IRBLs
                            over the total IRBL mass, renormalized to a
                            distribution across the pool.

Sampling contract (important for reproducibility and for independent
re-implementations): draws are sequential; each draw consumes exactly one
uniform u from ``numpy.random.default_rng(seed)`` and selects the first
still-available video, in pool order, whose cumulative normalized weight
exceeds u.  The chosen video is removed and weights are renormalized.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import primitives

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class ScoreRecord:
    """Per-video scores: VQA, reality, and the 17-primitive richness vector."""

    video_id: str
    vqa: float
    reality: int
    s: np.ndarray  # [M] float in [1, 5]
    subject_phrases: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=np.float64)
        if self.s.shape != (primitives.M,):
            raise ValueError(f"richness vector must have length {primitives.M}")
        if not (1.0 <= self.vqa <= 5.0):
            raise ValueError(f"vqa outside [1, 5]: {self.vqa}")
        if not 1 <= int(self.reality) <= 5:
            raise ValueError(f"reality outside 1..5: {self.reality}")
        if np.any(self.s < 1.0) or np.any(self.s > 5.0):
            raise ValueError("richness scores outside [1, 5]")

    @property
    def r_dynamic(self) -> float:
        return float(self.s[primitives.DYNAMIC_SLICE].mean())

    @property
    def r_thermodynamic(self) -> float:
        return float(self.s[primitives.THERMODYNAMIC_SLICE].mean())

    @property
    def r_optic(self) -> float:
        return float(self.s[primitives.OPTIC_SLICE].mean())

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "vqa": float(self.vqa),
            "reality": int(self.reality),
            "s": [float(x) for x in self.s],
            "subject_phrases": list(self.subject_phrases),
        }

    @staticmethod
    def from_dict(d: dict) -> "ScoreRecord":
        return ScoreRecord(
            video_id=str(d["video_id"]),
            vqa=float(d["vqa"]),
            reality=int(d["reality"]),
            s=np.asarray(d["s"], dtype=np.float64),
            subject_phrases=list(d.get("subject_phrases", [])),
        )


def write_scores_ndjson(records: list[ScoreRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def read_scores_ndjson(path) -> list[ScoreRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ScoreRecord.from_dict(json.loads(line)))
    return records


def richness_aggregate(s: np.ndarray) -> tuple[float, float, float, float]:
    """Domain means and their grand mean: (r_d, r_t, r_o, total)."""
    s = np.asarray(s, dtype=np.float64)
    r_d = float(s[primitives.DYNAMIC_SLICE].mean())
    r_t = float(s[primitives.THERMODYNAMIC_SLICE].mean())
    r_o = float(s[primitives.OPTIC_SLICE].mean())
    return r_d, r_t, r_o, (r_d + r_t + r_o) / 3.0


def filter_pool(
    records: list[ScoreRecord],
    vqa_min: float = 3.0,
    reality_min: int = 4,
    richness_min: float | None = None,
) -> list[ScoreRecord]:
    """Keep records passing every threshold (all inclusive, order kept).

    ``richness_min`` gates on the aggregated richness total; pass None to
    skip that stage of the funnel.
    """
    kept = [r for r in records if r.vqa >= vqa_min and r.reality >= reality_min]
    if richness_min is not None:
        kept = [r for r in kept if richness_aggregate(r.s)[3] >= richness_min]
    return kept


def assign_labels(records: list[ScoreRecord] | np.ndarray, tau: float = 4.0) -> np.ndarray:
    """Binary label matrix Y[i, j] = 1 iff s_ij >= tau, with argmax fallback.

    A row with no score clearing tau gets a single positive at its argmax
    primitive (ties resolve to the lowest index), so every video keeps at
    least one label.

    Args:
        records: list of ScoreRecord, or a raw [N, M] score matrix.
        tau: presence threshold in (1, 5].

    Returns:
        uint8 matrix [N, M].
    """
    if not (1.0 < tau <= 5.0):
        raise ValueError(f"tau must lie in (1, 5], got {tau}")
    if isinstance(records, np.ndarray):
        S = np.asarray(records, dtype=np.float64)
    else:
        S = np.stack([r.s for r in records]) if records else np.zeros((0, primitives.M))
    Y = (S >= tau).astype(np.uint8)
    empty = Y.sum(axis=1) == 0
    if empty.any():
        # np.argmax already picks the lowest index on ties.
        Y[np.flatnonzero(empty), S[empty].argmax(axis=1)] = 1
    return Y


def irbl_weights(Y: np.ndarray) -> np.ndarray:
    """Per-primitive imbalance ratio: IRBL_j = max_k C_k / C_j.

    Primitives never observed in the pool (C_j = 0) would divide by zero;
    they are excluded by assigning weight 0, with a warning, and they do
    not participate in any downstream sum.

    Raises:
        ValueError: the label matrix has no positive entries at all.
    """
    Y = np.asarray(Y)
    C = Y.sum(axis=0).astype(np.float64)
    if C.max() == 0:
        raise ValueError("no labels: label matrix is all-zero")
    zero = C == 0
    if zero.any():
        names = [primitives.PRIMITIVES[j] for j in np.flatnonzero(zero)]
        logger.warning("primitives with zero count excluded from IRBL: %s", names)
    out = np.zeros_like(C)
    out[~zero] = C.max() / C[~zero]
    return out


def video_weights(Y: np.ndarray, irbl: np.ndarray) -> np.ndarray:
    """Raw per-video weight: sum of the video's positive-label IRBLs over
    the sum of all (observed-primitive) IRBLs."""
    denom = irbl.sum()
    if denom <= 0:
        raise ValueError("no usable primitives")
    return (np.asarray(Y, dtype=np.float64) @ irbl) / denom


def resample(
    records: list,
    Y: np.ndarray,
    irbl: np.ndarray,
    n_out: int,
    seed: int = 0,
    with_replacement: bool = False,
) -> tuple[list, np.ndarray, dict]:
    """Draw n_out videos, rarity-weighted; see module docstring for the
    exact sampling contract.

    Returns:
        (chosen records, chosen indices, report) where report carries the
        before/after per-primitive label counts.
    """
    N = len(records)
    if n_out > N and not with_replacement:
        raise ValueError(f"cannot draw {n_out} from {N} without replacement")
    w = video_weights(Y, irbl)
    if w.sum() <= 0:
        raise ValueError("all sampling weights are zero")

    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    if with_replacement:
        p = w / w.sum()
        cum = np.cumsum(p)
        for _ in range(n_out):
            u = rng.random()
            chosen.append(min(int(np.searchsorted(cum, u, side="right")), N - 1))
    else:
        alive = list(range(N))
        w_alive = w.copy()
        for _ in range(n_out):
            p = w_alive / w_alive.sum()
            cum = np.cumsum(p)
            u = rng.random()
            idx = min(int(np.searchsorted(cum, u, side="right")), len(alive) - 1)
            chosen.append(alive[idx])
            alive.pop(idx)
            w_alive = np.delete(w_alive, idx)

    chosen_arr = np.array(chosen, dtype=np.int64)
    report = {
        "counts_before": np.asarray(Y).sum(axis=0).tolist(),
        "counts_after": np.asarray(Y)[chosen_arr].sum(axis=0).tolist(),
        "n_pool": N,
        "n_out": n_out,
    }
    return [records[i] for i in chosen], chosen_arr, report


def imbalance_ratio(counts: np.ndarray) -> float:
    """max/min over primitives with nonzero count (inf-free convenience)."""
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        return 1.0
    return float(c.max() / c.min())
