"""Plug-in estimate of the limiting covariance of the stacked box taus.

The triple sums behind ``I`` factor through per-point concordance counts:
with ``cc_k(i)`` the number of members of box ``k`` strictly concordant
with row ``i``,

    sum_{i1,i2,i3} pi(X_i1, X_i3) pi'(X_i2, X_i3) 1{i1 in A_k, i2 in A_l, i3 in A_k & A_l}
        = sum_{i3 in A_k & A_l} cc_k(i3) cc'_l(i3) / 4

because the kernel ``pi`` is half the concordance indicator.  Every sum is
therefore an exact integer before the final normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Box, BoxFamily, Pair, Sample, _check_dim, pair_list
from .errors import DegenerateBoxError, NumericalError, ValidationError
from .estimators import TauEstimates, tau_matrix


def partner_counts(sample: Sample, pair, mask: np.ndarray) -> np.ndarray:
    """Length-n vector: concordant partners inside ``mask`` for rows in ``mask``, 0 elsewhere."""
    a, b = pair
    idx = np.flatnonzero(mask)
    out = np.zeros(sample.n, dtype=np.int64)
    if idx.size > 1:
        out[idx] = _kernels.concordant_partners(
            np.ascontiguousarray(sample.xi[idx, a]), np.ascontiguousarray(sample.xi[idx, b]))
    return out


def _box_mask(sample: Sample, box: Box, index: int = 0) -> np.ndarray:
    _check_dim(sample, box)
    mask = box.contains(sample.xj)
    if not mask.any():
        raise DegenerateBoxError(index, 0, f"box {index} has no members; its probability estimate is 0")
    return mask


def i_hat(sample: Sample, pair, other_pair, box_k: Box, box_l: Box | None = None) -> float:
    """Triple-sum estimate of the product-kernel moment for boxes ``k`` and ``l``."""
    box_l = box_k if box_l is None else box_l
    mk = _box_mask(sample, box_k, 0)
    ml = _box_mask(sample, box_l, 1)
    cc1 = partner_counts(sample, pair, mk)
    cc2 = partner_counts(sample, other_pair, ml)
    n = sample.n
    total = int(np.dot(cc1, cc2))
    return total / 4 / (n ** 3 * (mk.sum() / n) * (ml.sum() / n))


def j_hat(sample: Sample, pair, box_k: Box, box_l: Box) -> float:
    """Double-sum estimate pairing box ``k`` members with members of ``k`` and ``l``."""
    mk = _box_mask(sample, box_k, 0)
    ml = box_l.contains(sample.xj)
    cc = partner_counts(sample, pair, mk)
    n = sample.n
    total = int(cc[mk & ml].sum())
    return total / 2 / (n ** 2 * (mk.sum() / n))


@dataclass
class CovarianceEstimate:
    delta: np.ndarray  # (P*m, P*m), pair-major
    pairs: list
    m: int
    n: int
    p_hat: np.ndarray
    p_overlap: np.ndarray  # (m, m)
    d_hat: np.ndarray  # (P, m)
    i_hat: np.ndarray  # (P, P, m, m)
    j_hat: np.ndarray  # (P, m, m)
    disjoint_path: bool

    def block(self, r: int, s: int) -> np.ndarray:
        m = self.m
        return self.delta[r * m:(r + 1) * m, s * m:(s + 1) * m]

    def to_dict(self) -> dict:
        return {
            "delta": self.delta.tolist(),
            "pairs": [[a + 1, b + 1] for a, b in self.pairs],
            "m": self.m,
            "n": self.n,
            "p_hat": self.p_hat.tolist(),
            "p_overlap": self.p_overlap.tolist(),
            "d_hat": self.d_hat.tolist(),
            "i_hat": self.i_hat.tolist(),
            "j_hat": self.j_hat.tolist(),
            "disjoint_path": self.disjoint_path,
        }


def delta_hat(sample: Sample, family: BoxFamily, pairs=None, disjoint: bool | None = None,
              tau: TauEstimates | None = None, tau_variant=1) -> CovarianceEstimate:
    """Estimate the covariance of sqrt(n) times the stacked box taus.

    ``disjoint=None`` follows ``family.disjoint``; ``True`` forces the
    diagonal formula and ``False`` the general overlapping-box formula.

    The diagonal formula plugs in the tau estimator named by
    ``tau_variant``.  With the default (variant 1, normalised by ``N^2``
    like the triple sum) each diagonal block is exactly ``16 / p_k`` times
    the empirical covariance matrix of the per-point concordance shares
    ``cc_k(i) / N_k``, hence positive semi-definite.  Plugging in the
    rescaled tau instead leaves an ``O(1/N_k)`` negative bias that can make
    variances negative in small boxes.
    """
    pairs = pair_list(sample.p) if pairs is None else [Pair(*pr) for pr in pairs]
    n = sample.n
    if n < 3:
        raise ValidationError(f"covariance estimation needs n >= 3, got {n}")
    masks = family.membership(sample)
    m = family.m
    sizes = masks.sum(axis=1)
    for k, s in enumerate(sizes):
        if s == 0:
            raise DegenerateBoxError(k, 0, f"box {k} has no members; its probability estimate is 0")
    use_disjoint = family.disjoint if disjoint is None else bool(disjoint)
    npairs = len(pairs)

    cc = np.zeros((npairs, m, n), dtype=np.int64)
    conc = np.zeros((npairs, m), dtype=np.int64)
    for r, pr in enumerate(pairs):
        for k in range(m):
            cc[r, k] = partner_counts(sample, pr, masks[k])
            conc[r, k] = cc[r, k].sum() // 2

    p = sizes / n
    p_kl = (masks.astype(np.int64) @ masks.T.astype(np.int64)) / n
    # exact integer sums, normalised once
    i_sum = np.einsum("rki,sli->rskl", cc, cc)
    i_est = i_sum / 4 / (n ** 3 * np.multiply.outer(p, p))
    j_sum = np.einsum("rki,li->rkl", cc, masks.astype(np.int64))
    j_est = j_sum / 2 / (n ** 2 * p[None, :, None])
    d_est = conc / (n * (n - 1))

    delta = np.zeros((npairs * m, npairs * m))
    if use_disjoint:
        if tau is None:
            tau = tau_matrix(sample, family, pairs)
        t = tau.variant(tau_variant)
        for r in range(npairs):
            for s in range(npairs):
                diag = 16 * (4 * np.diagonal(i_est[r, s]) / p ** 2
                             - (1 + t[r]) * (1 + t[s]) / (4 * p))
                delta[r * m:(r + 1) * m, s * m:(s + 1) * m] = np.diag(diag)
    else:
        pk = p[:, None]
        pl = p[None, :]
        for r in range(npairs):
            for s in range(npairs):
                dk = d_est[r][:, None]
                dl = d_est[s][None, :]
                blk = 64 * (i_est[r, s] / (pk * pl)
                            + dk * dl * p_kl / (pk ** 3 * pl ** 3)
                            - dl * j_est[r] / (pk * pl ** 3)
                            - dk * j_est[s].T / (pl * pk ** 3))
                delta[r * m:(r + 1) * m, s * m:(s + 1) * m] = blk
    delta = (delta + delta.T) / 2
    if not np.isfinite(delta).all():
        raise NumericalError("covariance estimate contains non-finite entries")
    return CovarianceEstimate(delta, pairs, m, n, p, p_kl, d_est, i_est, j_est, use_disjoint)
