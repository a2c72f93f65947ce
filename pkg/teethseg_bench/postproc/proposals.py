"""Tooth proposals: IoU-based merging and projection back to per-point labels."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

CLASS_COUNT = 7


@dataclass(frozen=True, eq=False)
class Proposal:
    """Candidate tooth: point indices into a source cloud, a segmentation logit per point, 7 class logits."""

    indices: np.ndarray
    seg_logits: np.ndarray
    class_logits: np.ndarray

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        seg = np.asarray(self.seg_logits, dtype=np.float64).reshape(-1)
        cls = np.asarray(self.class_logits, dtype=np.float64).reshape(-1)
        if len(seg) != len(indices):
            raise ValueError("one segmentation logit per index is required")
        if len(np.unique(indices)) != len(indices):
            raise ValueError("proposal indices must be unique")
        if len(cls) != CLASS_COUNT:
            raise ValueError(f"class logits must have {CLASS_COUNT} entries, got {len(cls)}")
        if not (np.all(np.isfinite(seg)) and np.all(np.isfinite(cls))):
            raise ValueError("proposal logits must be finite")
        order = np.argsort(indices)
        object.__setattr__(self, "indices", indices[order])
        object.__setattr__(self, "seg_logits", seg[order])
        object.__setattr__(self, "class_logits", cls)

    @property
    def foreground(self) -> np.ndarray:
        return self.indices[self.seg_logits > 0]

    @property
    def predicted_class(self) -> int:
        """1-based position class with the largest logit (smaller class on ties)."""
        return int(np.argmax(self.class_logits)) + 1

    def to_dict(self) -> dict:
        return {
            "indices": self.indices.tolist(),
            "seg_logits": self.seg_logits.tolist(),
            "class_logits": self.class_logits.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Proposal:
        return cls(data["indices"], data["seg_logits"], data["class_logits"])


def foreground_iou(a: Proposal, b: Proposal) -> float:
    fa, fb = a.foreground, b.foreground
    union = np.union1d(fa, fb).size
    if union == 0:
        return 0.0
    return np.intersect1d(fa, fb, assume_unique=True).size / union


def _combine(group: Sequence[Proposal]) -> Proposal:
    indices = np.unique(np.concatenate([p.indices for p in group]))
    seg = np.zeros(len(indices))
    for p in group:
        seg[np.searchsorted(indices, p.indices)] += p.seg_logits
    class_logits = np.sum([p.class_logits for p in group], axis=0)
    return Proposal(indices, seg, class_logits)


def merge_proposals(proposals: Sequence[Proposal], iou_threshold: float = 0.35) -> list[Proposal]:
    """Merge proposals whose foregrounds overlap with IoU >= threshold, transitively, until stable.

    Merged groups keep the position of their lowest-index member.
    """
    if not 0 < iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    current = list(proposals)
    rounds = 0
    while len(current) > 1:
        n = len(current)
        rows, cols = [], []
        for i in range(n):
            for j in range(i + 1, n):
                if foreground_iou(current[i], current[j]) >= iou_threshold:
                    rows.append(i)
                    cols.append(j)
        if not rows:
            break
        graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, component = connected_components(graph, directed=False)
        groups: dict[int, list[Proposal]] = {}
        for i, comp in enumerate(component.tolist()):
            groups.setdefault(comp, []).append(current[i])
        first_member = {comp: min(i for i, c in enumerate(component.tolist()) if c == comp) for comp in groups}
        current = [_combine(groups[comp]) for comp in sorted(groups, key=first_member.__getitem__)]
        rounds += 1
    logger.debug("merge_proposals input=%d output=%d rounds=%d", len(proposals), len(current), rounds)
    return current


def assign_proposal_labels(
    n_points: int,
    proposals: Sequence[Proposal],
    proposal_labels: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (FDI label, instance id) from the proposal with the highest positive logit.

    Points claimed by no proposal are gingiva ``(0, 0)``; instance ids are
    proposal positions plus one; ties go to the earlier proposal.
    """
    if len(proposal_labels) != len(proposals):
        raise ValueError("one label per proposal is required")
    best = np.zeros(n_points)
    owner = np.full(n_points, -1, dtype=np.int64)
    for k, proposal in enumerate(proposals):
        if proposal.indices.size and proposal.indices.max() >= n_points:
            raise ValueError(f"proposal {k} references point {int(proposal.indices.max())} of {n_points}")
        wins = proposal.seg_logits > best[proposal.indices]
        idx = proposal.indices[wins]
        best[idx] = proposal.seg_logits[wins]
        owner[idx] = k
    labels = np.zeros(n_points, dtype=np.int64)
    instances = np.zeros(n_points, dtype=np.int64)
    claimed = owner >= 0
    labels[claimed] = np.asarray(proposal_labels, dtype=np.int64)[owner[claimed]]
    instances[claimed] = owner[claimed] + 1
    return labels, instances
