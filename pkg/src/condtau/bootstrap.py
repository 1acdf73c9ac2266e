"""Classical (Efron) and conditional bootstrap tests of equal box taus.

Every replicate owns a random stream derived from ``(seed, stream key,
replicate index)``, so results do not depend on how replicates are spread
over workers.

Fast path
---------
A resample only ever contains copies of original rows, so the tau of box
``k`` in a resample is determined by how many copies ``c_i`` of each
original member ``i`` landed in the box.  With ``S[i, j]`` the product of
the signs of the coordinate differences of rows ``i`` and ``j``::

    (concordant - discordant) = c' S c / 2,   size = sum(c)

which is an exact integer computed by a batched matrix product.  This is
valid whenever every resampled point of box ``k`` takes its conditioned
part from a member of box ``k`` (always for the classical scheme, and for
the conditional scheme when no observation lies in two boxes).  Otherwise
resamples are materialised and counted directly; both routes give
bit-identical taus.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import BoxFamily, Pair, Sample, pair_list
from .errors import CoverageError, InsufficientSubsampleError, ValidationError
from .estimators import count_pairs, tau_from_counts, tau_matrix
from .inference import ContrastMatrix, TestResult, blockwise_contrast, stat_inf, stat_l2

SCHEMES = ("classical", "conditional")
STATISTICS = ("inf", "l2")
# boxes larger than this are counted on materialised resamples instead of
# through the N x N sign matrix
FAST_PATH_MAX_BOX = 2500


@dataclass
class BootstrapConfig:
    B: int = 1000
    seed: int = 0
    smoothed: bool = False
    max_redraws: int = 100
    workers: int = 1
    chunk_size: int = 250
    fast_path: bool = True
    stream: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if int(self.B) < 1:
            raise ValidationError(f"B must be >= 1, got {self.B}")
        if int(self.seed) < 0:
            raise ValidationError("seed must be a non-negative integer")
        self.B = int(self.B)
        self.seed = int(self.seed)
        self.stream = tuple(int(s) for s in self.stream)


def replicate_rng(seed: int, stream: tuple, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream) + (int(index),))
    return np.random.Generator(np.random.PCG64(ss))


class _Design:
    """Precomputed box structure shared by all replicates of one test."""

    def __init__(self, sample: Sample, family: BoxFamily, scheme: str):
        if scheme not in SCHEMES:
            raise ValidationError(f"unknown bootstrap scheme {scheme!r}; expected one of {SCHEMES}")
        self.scheme = scheme
        self.n = sample.n
        self.masks = family.membership(sample)
        self.m = family.m
        self.members = [np.flatnonzero(mk) for mk in self.masks]
        self.sizes = np.array([idx.size for idx in self.members])
        covered = self.masks.any(axis=0)
        self.overlapping = bool((self.masks.sum(axis=0) > 1).any())
        if scheme == "conditional":
            if not covered.all():
                row = int(np.flatnonzero(~covered)[0])
                raise CoverageError(
                    f"observation {row} lies outside every box; the conditional bootstrap "
                    "needs boxes covering all observations")
            # smallest box index containing each observation
            self.first_box = np.argmax(self.masks, axis=0)
            self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]])
            self.flat_members = np.concatenate(self.members)

    def draw(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Row indices supplying the conditioned and the conditioning parts."""
        n = self.n
        if self.scheme == "classical":
            idx = rng.integers(0, n, n)
            return idx, idx
        jdx = rng.integers(0, n, n)
        ks = self.first_box[jdx]
        u = rng.integers(0, self.sizes[ks])
        return self.flat_members[self.offsets[ks] + u], jdx


def resample_classical(sample: Sample, rng: np.random.Generator) -> Sample:
    """``n`` rows drawn uniformly with replacement."""
    return sample.take(rng.integers(0, sample.n, sample.n))


def resample_conditional(sample: Sample, family: BoxFamily, rng: np.random.Generator) -> Sample:
    """Draw the conditioning part, then a conditioned part from the box it falls in."""
    src, jdx = _Design(sample, family, "conditional").draw(rng)
    return sample.recombine(sample.xi[src], sample.xj[jdx])


def _draw_valid(design: _Design, rng, max_redraws: int, replicate: int):
    for _ in range(max_redraws):
        src, jdx = design.draw(rng)
        box_sizes = design.masks[:, jdx].sum(axis=1)
        if (box_sizes >= 2).all():
            return src, jdx
    k = int(np.argmin(box_sizes))
    raise InsufficientSubsampleError(
        k, int(box_sizes[k]),
        f"bootstrap replicate {replicate}: box {k} kept fewer than 2 points after "
        f"{max_redraws} draws")


def _sign_matrices(sample: Sample, design: _Design, pairs):
    return [[_kernels.sign_products(np.ascontiguousarray(sample.xi[idx, a]),
                                    np.ascontiguousarray(sample.xi[idx, b]))
             for idx in design.members] for a, b in pairs]


def _taus_fast(design: _Design, signs, draws) -> np.ndarray:
    """Replicate taus, shape (len(draws), pairs, m), through count vectors."""
    nrep = len(draws)
    out = np.empty((nrep, len(signs), design.m))
    position = np.full(design.n, -1)
    for k in range(design.m):
        idx = design.members[k]
        position[:] = -1
        position[idx] = np.arange(idx.size)
        counts = np.zeros((nrep, idx.size))
        for b, (src, jdx) in enumerate(draws):
            keep = design.masks[k, jdx]
            counts[b] = np.bincount(position[src[keep]], minlength=idx.size)
        size = counts.sum(axis=1)
        for r, per_box in enumerate(signs):
            balance = np.einsum("bi,bi->b", counts @ per_box[k], counts) / 2
            out[:, r, k] = tau_from_counts(balance, 0.0, size)
    return out


def _taus_materialised(sample: Sample, design: _Design, pairs, draws) -> np.ndarray:
    out = np.empty((len(draws), len(pairs), design.m))
    for b, (src, jdx) in enumerate(draws):
        xi = sample.xi[src]
        for k in range(design.m):
            keep = design.masks[k, jdx]
            size = int(keep.sum())
            for r, (a, c) in enumerate(pairs):
                conc, disc = count_pairs(xi[keep, a], xi[keep, c])
                out[b, r, k] = tau_from_counts(float(conc - disc), 0.0, size)
    return out


def bootstrap_taus(sample: Sample, family: BoxFamily, pairs=None, scheme: str = "classical",
                   config: BootstrapConfig | None = None, replicates=None) -> np.ndarray:
    """Replicate taus, shape (B, pairs, m), for the requested scheme."""
    config = BootstrapConfig() if config is None else config
    pairs = pair_list(sample.p) if pairs is None else [Pair(*pr) for pr in pairs]
    design = _Design(sample, family, scheme)
    fast = (config.fast_path
            and design.sizes.max() <= FAST_PATH_MAX_BOX
            and (scheme == "classical" or not design.overlapping))
    signs = _sign_matrices(sample, design, pairs) if fast else None
    replicates = range(config.B) if replicates is None else replicates
    replicates = list(replicates)
    chunks = [replicates[i:i + config.chunk_size]
              for i in range(0, len(replicates), config.chunk_size)]

    def run(chunk):
        draws = [_draw_valid(design, replicate_rng(config.seed, config.stream, b),
                             config.max_redraws, b) for b in chunk]
        if fast:
            return _taus_fast(design, signs, draws)
        return _taus_materialised(sample, design, pairs, draws)

    if config.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(chunk) for chunk in chunks]
    if not parts:
        return np.empty((0, len(pairs), design.m))
    return np.concatenate(parts, axis=0)


def bootstrap_distribution(sample: Sample, family: BoxFamily, pairs=None,
                           scheme: str = "classical", config: BootstrapConfig | None = None,
                           contrast: ContrastMatrix | None = None, tau=None) -> dict:
    """Centered bootstrap statistics for both the max and the squared-norm forms."""
    pairs = pair_list(sample.p) if pairs is None else [Pair(*pr) for pr in pairs]
    tau = tau_matrix(sample, family, pairs) if tau is None else tau
    contrast = blockwise_contrast(family.m, len(pairs)) if contrast is None else contrast
    if contrast.shape[1] != len(pairs) * family.m:
        raise ValidationError("contrast does not match the number of pairs and boxes")
    reps = bootstrap_taus(sample, family, pairs, scheme, config)
    centered = (reps - tau.tau[None]).reshape(reps.shape[0], -1) @ contrast.matrix.T
    n = sample.n
    return {
        "inf": np.sqrt(n) * np.abs(centered).max(axis=1),
        "l2": n * np.einsum("bi,bi->b", centered, centered),
    }


def p_value(observed: float, replicates: np.ndarray, smoothed: bool = False) -> float:
    """Share of replicates strictly above the observed statistic."""
    exceed = int(np.count_nonzero(replicates > observed))
    if smoothed:
        return (1 + exceed) / (replicates.size + 1)
    return exceed / replicates.size


def bootstrap_tests(sample: Sample, family: BoxFamily, pairs=None, scheme: str = "classical",
                    config: BootstrapConfig | None = None, statistics=STATISTICS,
                    contrast: ContrastMatrix | None = None, tau=None) -> list[TestResult]:
    """Both statistics computed from one shared set of replicates."""
    config = BootstrapConfig() if config is None else config
    pairs = pair_list(sample.p) if pairs is None else [Pair(*pr) for pr in pairs]
    for s in statistics:
        if s not in STATISTICS:
            raise ValidationError(f"unknown bootstrap statistic {s!r}; expected one of {STATISTICS}")
    tau = tau_matrix(sample, family, pairs) if tau is None else tau
    contrast = blockwise_contrast(family.m, len(pairs)) if contrast is None else contrast
    dist = bootstrap_distribution(sample, family, pairs, scheme, config, contrast, tau)
    observed = {"inf": stat_inf(tau, contrast), "l2": stat_l2(tau, contrast)}
    out = []
    for s in statistics:
        out.append(TestResult(
            method=f"boot_{s}_{scheme}",
            statistic=observed[s],
            df=None,
            p_value=p_value(observed[s], dist[s], config.smoothed),
            m=family.m, p=sample.p, n=sample.n,
            B=config.B, seed=config.seed, scheme=scheme,
        ))
    return out


def bootstrap_test(sample: Sample, family: BoxFamily, pairs=None, statistic: str = "inf",
                   scheme: str = "classical", config: BootstrapConfig | None = None) -> TestResult:
    return bootstrap_tests(sample, family, pairs, scheme, config, (statistic,))[0]
