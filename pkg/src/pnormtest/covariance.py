"""Covariance estimation from a sample of evaluated moment functions.

The estimators operate on the auxiliary difference-pair sample: rows
(h_2 - h_1)/sqrt(2), (h_4 - h_3)/sqrt(2), ... which are mean zero by
construction and share the covariance of the original rows.  Because of
that, both estimators use the uncentered second-moment form.

``truncated_cov`` is a practical heavy-tail-robust variant that shrinks
each auxiliary row onto the ball of radius ``trunc_mult`` times the median
row norm before forming the second-moment matrix.  The theoretically
optimal robust estimators this stands in for are not practical to
implement; the estimator argument of the test engine is a plain callable
so alternatives can be plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix_core import SymMatrix

__all__ = [
    "MomentSample",
    "difference_pairs",
    "sample_cov",
    "truncated_cov",
    "kurtosis_diagnostic",
]


@dataclass(frozen=True)
class MomentSample:
    """An n x d array whose row i holds the evaluated moment functions
    h(X_i, beta*).

    The natural regime is n >= 4 (difference pairs need at least two), but
    construction only requires n >= 1 so that degenerate inputs such as a
    single pre-aggregated row remain expressible; operations that need more
    rows enforce their own lower bounds.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2:
            raise ValueError(f"expected an n x d array, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("moment sample entries must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _as_sample(s) -> MomentSample:
    return s if isinstance(s, MomentSample) else MomentSample(s)


def difference_pairs(s) -> MomentSample:
    """Auxiliary sample of scaled successive differences.

    Rows (h_2 - h_1)/sqrt(2), (h_4 - h_3)/sqrt(2), ...; an odd trailing row
    is dropped.  Each output row has population mean zero and the same
    covariance as the input rows.
    """
    s = _as_sample(s)
    if s.n < 4:
        raise ValueError(f"difference pairs need n >= 4 rows, got {s.n}")
    m = s.n // 2
    v = s.values[: 2 * m]
    return MomentSample((v[1::2] - v[0::2]) / np.sqrt(2.0))


def sample_cov(aux) -> SymMatrix:
    """Uncentered second-moment matrix (1/m) sum_i r_i r_i'."""
    aux = _as_sample(aux)
    r = aux.values
    return SymMatrix(r.T @ r / aux.n)


def truncated_cov(aux, trunc_mult: float = 3.0) -> SymMatrix:
    """Norm-truncated second-moment matrix.

    Each row r_i is shrunk to r_i * min(1, tau / ||r_i||_2) with
    tau = trunc_mult * median_j ||r_j||_2, then ``sample_cov`` is applied.
    """
    if not trunc_mult > 0:
        raise ValueError(f"trunc_mult must be positive, got {trunc_mult}")
    aux = _as_sample(aux)
    r = aux.values
    norms = np.linalg.norm(r, axis=1)
    tau = trunc_mult * np.median(norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(norms > 0, np.minimum(1.0, tau / norms), 1.0)
    return sample_cov(MomentSample(r * shrink[:, None]))


def kurtosis_diagnostic(s, directions: int = 64, seed: int = 0) -> float:
    """Empirical directional-kurtosis diagnostic.

    Max over random unit directions t of
    (E_hat <h - mu_hat, t>^4)^(1/4) / (E_hat <h - mu_hat, t>^2)^(1/2),
    an empirical lower bound on the fourth-to-second moment-ratio constant;
    Gaussian data yields about 3^(1/4) ~ 1.316.  Reported, not enforced.
    """
    if directions < 1:
        raise ValueError("need at least one direction")
    s = _as_sample(s)
    centered = s.values - s.values.mean(axis=0)
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((s.d, directions))
    t /= np.linalg.norm(t, axis=0)
    proj = centered @ t
    second = np.mean(proj**2, axis=0)
    fourth = np.mean(proj**4, axis=0)
    usable = second > 1e-14
    if not np.any(usable):
        raise ValueError("all projections degenerate: zero variance sample")
    ratios = fourth[usable] ** 0.25 / np.sqrt(second[usable])
    return float(np.max(ratios))
