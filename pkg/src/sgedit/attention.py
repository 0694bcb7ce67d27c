"""Attention kernels: baseline, removal exclusion, and insertion modulation.

Pure numpy on plain arrays. Three families of operations:

* `attention` — softmax((Q K^T + X) / sqrt(d)) V with an optional additive
  bias X in the raw score domain.
* `removal_bias` / `removal_attention` — attend into cached source key/value
  streams while excluding removed key positions (-inf bias columns), so
  erased content cannot leak back in.
* `build_correspondence` / `insertion_bias` — additive bias in the scaled
  score domain that pushes each query's score toward its row maximum where
  query pixel and key belong to the same segment, and toward the row minimum
  elsewhere, damped by segment size and a time-decaying strength.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regions import RegionMask, SegmentMap


class ShapeMismatch(ValueError):
    pass


class DegenerateRow(ValueError):
    """A query row attends to zero keys (all scores -inf)."""


class AllMasked(ValueError):
    """Every key position is excluded; nothing left to attend to."""


class UnmappedToken(KeyError):
    """A cross-attention token has no segment assignment."""


class NegativeLambda(ValueError):
    pass


class OutOfRange(ValueError):
    pass


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax; -inf entries get exactly zero weight."""
    finite_max = np.max(np.where(np.isfinite(x), x, -np.inf), axis=axis, keepdims=True)
    finite_max = np.where(np.isfinite(finite_max), finite_max, 0.0)
    e = np.exp(x - finite_max)
    return e / e.sum(axis=axis, keepdims=True)


def scaled_scores(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Q K^T / sqrt(d) for (n_q, d) queries and (n_k, d) keys."""
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ShapeMismatch(f"queries {q.shape} vs keys {k.shape}")
    return (q @ k.T) / np.sqrt(q.shape[1])


def attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, bias: np.ndarray | None = None
) -> np.ndarray:
    """softmax((Q K^T + X) / sqrt(d)) V; X defaults to zero.

    The bias lives in the raw (pre-scaling) score domain. Rows whose bias is
    -inf everywhere have no keys left to attend to and raise DegenerateRow.
    """
    if k.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"{k.shape[0]} keys vs {v.shape[0]} values")
    raw = q @ k.T
    if bias is not None:
        if bias.shape != raw.shape:
            raise ShapeMismatch(f"bias {bias.shape} vs scores {raw.shape}")
        if np.isposinf(bias).any() or np.isnan(bias).any():
            raise ValueError("bias entries must be in R or -inf")
        raw = raw + bias
    scores = raw / np.sqrt(q.shape[1])
    if np.isneginf(scores).all(axis=1).any():
        raise DegenerateRow("a query row has every key masked out")
    return softmax(scores) @ v


def removal_bias(removed: RegionMask | np.ndarray, n_q: int) -> np.ndarray:
    """Bias excluding removed key positions: X[i, j] = -inf where removed[j].

    `removed` is a mask at key resolution (flattened row-major) or a flat
    boolean/binary vector; the rule is per-column, independent of the query.
    """
    flat = removed.bits.ravel() if isinstance(removed, RegionMask) else np.asarray(removed).ravel()
    flat = flat.astype(bool)
    if flat.all():
        raise AllMasked("every key position is masked")
    row = np.where(flat, -np.inf, 0.0)
    return np.broadcast_to(row, (n_q, flat.size)).copy()


def removal_attention(
    q: np.ndarray,
    k_source: np.ndarray,
    v_source: np.ndarray,
    removed: RegionMask | np.ndarray,
) -> np.ndarray:
    """Attention into substituted source K/V with removed keys excluded."""
    return attention(q, k_source, v_source, bias=removal_bias(removed, q.shape[0]))


@dataclass(frozen=True)
class CorrespondenceMatrix:
    """R marks query-key pairs sharing a segment; S is that segment's size.

    Both are (n_q, n_k). S is constant down each column: the area fraction
    of the segment the key-side entry belongs to.
    """

    r: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        if self.r.shape != self.s.shape:
            raise ShapeMismatch(f"R {self.r.shape} vs S {self.s.shape}")
        if not np.isin(self.r, (0, 1)).all():
            raise ValueError("R must be binary")
        if self.s.min() < 0 or self.s.max() > 1:
            raise ValueError("S entries must lie in [0, 1]")


def build_correspondence(
    seg: SegmentMap,
    key_kind: str = "self",
    token_segments: dict[int, int] | None = None,
) -> CorrespondenceMatrix:
    """Correspondence for modulated attention at the map's resolution.

    self: keys are the same flattened pixels as queries; R[i,j] = 1 iff
    pixels i and j share a segment label (label 0, the non-object region,
    counts as a segment).

    cross: keys are text tokens; `token_segments` maps token index to the
    segment id it governs (0 for tokens tied to no object, which correspond
    to the non-object region). R[i,j] = 1 iff pixel i's label equals token
    j's segment.

    S[i,j] is always the area fraction of the key-side segment.
    """
    labels = seg.labels.ravel()
    fractions = seg.area_fractions()
    if key_kind == "self":
        key_labels = labels
    elif key_kind == "cross":
        if token_segments is None:
            raise UnmappedToken("cross correspondence requires token_segments")
        n_tokens = len(token_segments)
        missing = [j for j in range(n_tokens) if j not in token_segments]
        if missing:
            raise UnmappedToken(f"token indices without a segment: {missing}")
        key_labels = np.array([token_segments[j] for j in range(n_tokens)], dtype=np.int64)
        unknown = set(int(x) for x in key_labels) - set(fractions)
        if unknown:
            raise UnmappedToken(f"tokens mapped to absent segments: {sorted(unknown)}")
    else:
        raise ValueError(f"key_kind must be 'self' or 'cross', got {key_kind!r}")
    r = (labels[:, None] == key_labels[None, :]).astype(np.uint8)
    s_col = np.array([fractions[int(lbl)] for lbl in key_labels])
    s = np.broadcast_to(s_col, (labels.size, key_labels.size)).copy()
    return CorrespondenceMatrix(r, s)


def insertion_bias(
    scores: np.ndarray, corr: CorrespondenceMatrix, lam_t: float
) -> np.ndarray:
    """X = lam * R*(rowmax - scores)*(1-S) - lam * (1-R)*(scores - rowmin)*(1-S).

    `scores` is the scaled score matrix Q K^T / sqrt(d); the bias is returned
    in the same domain. For lam*(1-S) <= 1 the modulated scores stay inside
    each row's original [min, max] interval.
    """
    if lam_t < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam_t}")
    if scores.shape != corr.r.shape:
        raise ShapeMismatch(f"scores {scores.shape} vs correspondence {corr.r.shape}")
    x_pos = scores.max(axis=1, keepdims=True) - scores
    x_neg = scores - scores.min(axis=1, keepdims=True)
    inside = corr.r.astype(bool)
    return lam_t * np.where(inside, x_pos, -x_neg) * (1.0 - corr.s)


def lambda_schedule(t: float, lam_max: float = 1.0) -> float:
    """Modulation strength at normalized time t in [0,1]: lam_max * t**4."""
    if not 0.0 <= t <= 1.0:
        raise OutOfRange(f"normalized time {t} outside [0, 1]")
    if lam_max < 0:
        raise NegativeLambda(f"lambda max must be >= 0, got {lam_max}")
    return lam_max * t**4


@dataclass(frozen=True)
class LambdaSchedule:
    """Named, serializable form of the strength schedule for the wire."""

    name: str = "poly4"
    max: float = 1.0

    def __post_init__(self):
        if self.name != "poly4":
            raise ValueError(f"unknown lambda schedule {self.name!r}")
        if self.max < 0:
            raise NegativeLambda(f"lambda max must be >= 0, got {self.max}")

    def value(self, t: float) -> float:
        return lambda_schedule(t, self.max)

    def to_wire(self) -> dict:
        return {"name": self.name, "max": self.max}

    @classmethod
    def from_wire(cls, wire: dict) -> "LambdaSchedule":
        return cls(wire["name"], float(wire["max"]))


def modulated_attention(
    q: np.ndarray,
    k: np.ndarray,
    v: np.ndarray,
    corr: CorrespondenceMatrix,
    lam_t: float,
) -> np.ndarray:
    """Attention with the insertion bias applied in the scaled domain.

    Equivalent to `attention(q, k, v, bias=sqrt(d) * X)`.
    """
    scores = scaled_scores(q, k)
    return softmax(scores + insertion_bias(scores, corr, lam_t)) @ v
