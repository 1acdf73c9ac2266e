"""Contrast matrices, test statistics and chi-square tail probabilities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg, special

from .covariance import CovarianceEstimate
from .errors import NumericalError, SingularMatrixError, ValidationError
from .estimators import TauEstimates

METHODS = ("wald", "boot_inf_classical", "boot_l2_classical",
           "boot_inf_conditional", "boot_l2_conditional")

PIVOT_TOLERANCE = 1e-12
RIDGE_EPSILON = 1e-8


@dataclass(frozen=True)
class ContrastMatrix:
    """Rows of +1/-1 pairs; ``rows[i] = (plus_column, minus_column)``."""

    matrix: np.ndarray
    rows: tuple

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        for r, (plus, minus) in enumerate(self.rows):
            expect = np.zeros(mat.shape[1])
            expect[plus], expect[minus] = 1.0, -1.0
            if plus == minus or not np.array_equal(mat[r], expect):
                raise ValidationError(f"contrast row {r} must hold exactly one +1 and one -1")
        if np.linalg.matrix_rank(mat) != mat.shape[0]:
            raise ValidationError("contrast matrix must have full row rank")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "rows", tuple(tuple(int(v) for v in row) for row in self.rows))

    @classmethod
    def from_rows(cls, rows, ncols: int) -> "ContrastMatrix":
        mat = np.zeros((len(rows), ncols))
        for r, (plus, minus) in enumerate(rows):
            mat[r, plus] = 1.0
            mat[r, minus] = -1.0
        return cls(mat, tuple(rows))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def rank(self) -> int:
        return self.matrix.shape[0]


def default_contrast(m: int) -> ContrastMatrix:
    """``[1 | -I]``: box 1 compared with each of boxes 2..m."""
    if m < 2:
        raise ValidationError(f"a contrast needs m >= 2 boxes, got m={m}")
    return ContrastMatrix.from_rows([(0, k) for k in range(1, m)], m)


def extended_contrast(m: int, p: int) -> ContrastMatrix:
    """One copy of the default contrast per conditioned pair, block-diagonally."""
    if p < 2:
        raise ValidationError(f"need p >= 2 conditioned variables, got p={p}")
    return blockwise_contrast(m, p * (p - 1) // 2)


def blockwise_contrast(m: int, npairs: int) -> ContrastMatrix:
    """Default contrast repeated for ``npairs`` stacked pairs."""
    base = default_contrast(m)
    rows = [(r * m + plus, r * m + minus) for r in range(npairs) for plus, minus in base.rows]
    return ContrastMatrix.from_rows(rows, m * npairs)


@dataclass
class TestResult:
    method: str
    statistic: float
    df: int | None
    p_value: float
    m: int
    p: int
    n: int
    B: int | None = None
    seed: int | None = None
    scheme: str | None = None

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return asdict(self)


def chisq_survival(x: float, df: float) -> float:
    """P(chi2_df > x) from the regularised upper incomplete gamma function."""
    _check_chisq(x, df)
    return float(special.gammaincc(df / 2.0, x / 2.0))


def chisq_cdf(x: float, df: float) -> float:
    _check_chisq(x, df)
    return float(special.gammainc(df / 2.0, x / 2.0))


def _check_chisq(x, df):
    if not (df >= 1) or math.isnan(df):
        raise ValidationError(f"degrees of freedom must be >= 1, got {df}")
    if not (x >= 0):
        raise ValidationError(f"chi-square argument must be >= 0, got {x}")


def contrasted(tau: TauEstimates | np.ndarray, contrast: ContrastMatrix) -> np.ndarray:
    w = tau.stacked() if isinstance(tau, TauEstimates) else np.asarray(tau, dtype=float).reshape(-1)
    if w.shape[0] != contrast.shape[1]:
        raise ValidationError(
            f"contrast has {contrast.shape[1]} columns but {w.shape[0]} taus were given")
    return contrast.matrix @ w


def stat_inf(tau, contrast: ContrastMatrix, n: int | None = None) -> float:
    """sqrt(n) times the largest absolute contrast."""
    n = tau.n if n is None else n
    return float(math.sqrt(n) * np.max(np.abs(contrasted(tau, contrast))))


def stat_l2(tau, contrast: ContrastMatrix, n: int | None = None) -> float:
    """n times the squared Euclidean norm of the contrasts."""
    n = tau.n if n is None else n
    c = contrasted(tau, contrast)
    return float(n * np.dot(c, c))


def _solve_symmetric(mat: np.ndarray, rhs: np.ndarray, positive: bool = False) -> np.ndarray:
    """Solve with a pivoted LDL' factorisation, refusing near-singular systems."""
    lu, d, perm = linalg.ldl(mat, lower=True)
    # d may contain 2x2 blocks; use its eigenvalues as pivots
    signed = np.linalg.eigvalsh(d)
    pivots = np.abs(signed)
    scale = pivots.max() if pivots.size else 0.0
    if scale == 0.0 or pivots.min() < PIVOT_TOLERANCE * scale:
        raise SingularMatrixError(
            "contrasted covariance matrix is singular (pivot ratio below "
            f"{PIVOT_TOLERANCE:g}); boxes may be too small or redundant")
    if positive and signed.min() < 0:
        raise NumericalError("contrasted covariance matrix is not positive definite")
    y = linalg.solve_triangular(lu[perm], rhs[perm], lower=True, unit_diagonal=True)
    z = np.linalg.solve(d, y)
    x = np.empty_like(rhs)
    x[perm] = linalg.solve_triangular(lu[perm].T, z, lower=False, unit_diagonal=True)
    return x


def wald_statistic(tau: TauEstimates, delta: CovarianceEstimate | np.ndarray,
                   contrast: ContrastMatrix | None = None, ridge: bool = False) -> TestResult:
    """Quadratic form of the contrasted taus in the inverse contrasted covariance."""
    p = tau.p
    contrast = blockwise_contrast(tau.m, tau.tau.shape[0]) if contrast is None else contrast
    cov = delta.delta if isinstance(delta, CovarianceEstimate) else np.asarray(delta, dtype=float)
    if cov.shape != (contrast.shape[1], contrast.shape[1]):
        raise ValidationError(
            f"covariance of shape {cov.shape} does not match contrast columns {contrast.shape[1]}")
    te = contrast.matrix
    middle = te @ cov @ te.T
    middle = (middle + middle.T) / 2
    if ridge:
        middle = middle + RIDGE_EPSILON * np.trace(middle) / middle.shape[0] * np.eye(middle.shape[0])
    c = te @ tau.stacked()
    stat = max(float(tau.n * c @ _solve_symmetric(middle, c, positive=True)), 0.0)
    df = contrast.rank
    return TestResult("wald", stat, df, chisq_survival(stat, df), tau.m, p, tau.n)
