"""Kendall's tau of the conditioned variables restricted to conditioning boxes.

With ``N`` box members, ``C`` strictly concordant and ``D`` strictly
discordant unordered pairs, and uniform weights ``1/N``::

    variant 1:  4 C / N^2 - 1
    variant 2:  2 (C - D) / N^2
    variant 3:  1 - 4 D / N^2
    rescaled:   (C - D) / (N (N - 1) / 2)

The rescaled value is the ordinary sample Kendall's tau (tau-a) of the box
members and is what every downstream test consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Box, BoxFamily, Pair, Sample, _check_dim, members, pair_list
from .errors import InsufficientSubsampleError, ValidationError

VARIANTS = (1, 2, 3, "rescaled")

# below this size the quadratic enumeration is as fast as sorting
_DIRECT_LIMIT = 48


def count_pairs(x, y, method: str = "auto") -> tuple[int, int]:
    """Concordant and discordant unordered pair counts of ``(x, y)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if method == "direct" or (method == "auto" and x.shape[0] <= _DIRECT_LIMIT):
        c, d = _kernels.concordance_counts(x, y)
    elif method in ("fast", "auto"):
        c, d = _kernels.fast_concordance_counts(x, y)
    else:
        raise ValidationError(f"unknown counting method {method!r}")
    return int(c), int(d)


def tau_from_counts(conc, disc, size, variant="rescaled"):
    """Map pair counts of a box with ``size`` members to an estimator value."""
    conc = np.asarray(conc, dtype=float)
    disc = np.asarray(disc, dtype=float)
    size = np.asarray(size, dtype=float)
    sq = size * size
    if variant == "rescaled":
        return (conc - disc) / (size * (size - 1) / 2)
    if variant == 1:
        return 4 * conc / sq - 1
    if variant == 2:
        return 2 * (conc - disc) / sq
    if variant == 3:
        return 1 - 4 * disc / sq
    raise ValidationError(f"unknown estimator variant {variant!r}; expected one of {VARIANTS}")


def kendall_tau(x, y) -> float:
    """Sample Kendall's tau (tau-a, no tie correction)."""
    n = len(x)
    if n < 2:
        raise ValidationError("Kendall's tau needs at least 2 observations")
    c, d = count_pairs(x, y)
    return (c - d) / (n * (n - 1) / 2)


def tau_pair_box(sample: Sample, pair, box: Box, variant="rescaled", box_index: int = 0) -> float:
    """Estimator of the conditional Kendall's tau of one pair given the box."""
    a, b = pair
    idx = members(sample, box)
    size = idx.size
    if size < 2:
        raise InsufficientSubsampleError(box_index, size)
    c, d = count_pairs(sample.xi[idx, a], sample.xi[idx, b])
    return float(tau_from_counts(c, d, size, variant))


def d_hat(sample: Sample, pair, box: Box) -> float:
    """Share of ordered row pairs (i != j) both in the box with row i below row j in both coordinates."""
    a, b = pair
    idx = members(sample, box)
    if idx.size < 2:
        return 0.0
    c, _ = count_pairs(sample.xi[idx, a], sample.xi[idx, b])
    n = sample.n
    return c / (n * (n - 1))


@dataclass
class TauEstimates:
    tau: np.ndarray  # (number of pairs, m), rescaled
    pairs: list
    p_hat: np.ndarray
    counts: np.ndarray
    n: int
    p: int
    concordant: np.ndarray
    discordant: np.ndarray
    labels: list | None = None
    pair_names: list | None = field(default=None)

    @property
    def m(self) -> int:
        return self.tau.shape[1]

    @property
    def s_n(self) -> np.ndarray:
        return 1.0 / self.counts

    def variant(self, variant) -> np.ndarray:
        return tau_from_counts(self.concordant, self.discordant, self.counts[None, :], variant)

    def stacked(self) -> np.ndarray:
        """Pair-major stacking: all boxes of the first pair, then the next pair, ..."""
        return self.tau.reshape(-1)

    def to_dict(self) -> dict:
        return {
            "pairs": self.pair_names or [[a + 1, b + 1] for a, b in self.pairs],
            "boxes": self.labels or [str(k + 1) for k in range(self.m)],
            "tau": self.tau.tolist(),
            "tau_variants": {str(v): self.variant(v).tolist() for v in (1, 2, 3)},
            "counts": self.counts.tolist(),
            "p_hat": self.p_hat.tolist(),
            "n": self.n,
            "p": self.p,
        }


def tau_matrix(sample: Sample, family: BoxFamily, pairs=None, method: str = "auto") -> TauEstimates:
    """Rescaled tau for every (pair, box) of the family."""
    pairs = pair_list(sample.p) if pairs is None else [Pair(*pr) for pr in pairs]
    _check_dim(sample, family.boxes[0])
    member_sets = [members(sample, box) for box in family.boxes]
    counts = np.array([idx.size for idx in member_sets], dtype=np.int64)
    for k, c in enumerate(counts):
        if c < 2:
            raise InsufficientSubsampleError(k, int(c))
    conc = np.zeros((len(pairs), family.m), dtype=np.int64)
    disc = np.zeros_like(conc)
    for r, (a, b) in enumerate(pairs):
        for k, idx in enumerate(member_sets):
            conc[r, k], disc[r, k] = count_pairs(sample.xi[idx, a], sample.xi[idx, b], method)
    tau = tau_from_counts(conc, disc, counts[None, :])
    names = sample.conditioned_names
    return TauEstimates(
        tau=tau,
        pairs=pairs,
        p_hat=counts / sample.n,
        counts=counts,
        n=sample.n,
        p=sample.p,
        concordant=conc,
        discordant=disc,
        labels=list(family.labels) if family.labels else None,
        pair_names=[[names[a], names[b]] for a, b in pairs],
    )
