"""Two-fold protocol for testing many moments through a selected few.

The sample is split once: fold 1 picks d promising coordinates out of D,
fold 2 runs the ordinary testing pipeline on those d columns only.  The
folds are physically separate arrays, so the second-stage statistics
never see the rows that drove selection, and the second stage is an
honest size-alpha test no matter how the selection behaved.

Two built-in selectors:

* ``select_top_scaled``: the d largest per-coordinate studentized means;
* ``select_greedy``: forward selection, each step adding the coordinate
  that maximizes the joint studentized p-norm statistic on the enlarged
  set (Schur-complement recursion at p = 2, per-candidate eigendecomp
  otherwise).

Any other selector can be used by passing an explicit index list to
``split_test``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .covariance import MomentSample, _as_sample, difference_pairs
from .dominant_test import DominantTestSpec, calibrate_spec, default_spec
from .test_engine import TestReport, central_statistic, p_norm_stat, run_tests

__all__ = [
    "split",
    "select_top_scaled",
    "select_greedy",
    "SplitResult",
    "split_test",
]

_MIN_FOLD = 4

# candidates whose residual variance falls below this fraction of their own
# raw variance are linearly dependent on the current set up to roundoff
_DEGENERACY_RTOL = 1e-12


def split(n: int, frac1: float = 0.5, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Random partition of range(n) into folds of sizes ceil(frac1*n) and
    the rest, each returned sorted.  Both folds must end up with at least
    4 rows (difference pairs need that many)."""
    if not 0.0 < frac1 < 1.0:
        raise ValueError(f"frac1 must lie in (0, 1), got {frac1}")
    n1 = math.ceil(frac1 * n)
    if min(n1, n - n1) < _MIN_FOLD:
        raise ValueError(
            f"folds of sizes {n1} and {n - n1} are too small; both need >= {_MIN_FOLD}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n1]), np.sort(perm[n1:])


def _studentized_scores(fold1: MomentSample) -> np.ndarray:
    mean = fold1.values.mean(axis=0)
    pair_var = np.mean(difference_pairs(fold1).values ** 2, axis=0)
    scores = np.zeros(fold1.d)
    live = pair_var > 0.0
    scores[live] = math.sqrt(fold1.n) * np.abs(mean[live]) / np.sqrt(pair_var[live])
    return scores


def select_top_scaled(fold1, d: int) -> np.ndarray:
    """Indices of the d largest per-coordinate studentized statistics
    sqrt(n1)|mean_j|/sigma_j, ties going to the lower index.  Coordinates
    with zero pair variance score 0 and are picked only if d forces it."""
    fold1 = _as_sample(fold1)
    if not 1 <= d <= fold1.d:
        raise ValueError(f"need 1 <= d <= {fold1.d}, got d={d}")
    scores = _studentized_scores(fold1)
    order = np.argsort(-scores, kind="stable")[:d]
    return np.sort(order)


def _greedy_p2(h: np.ndarray, r: np.ndarray, d: int) -> list[int]:
    # Schur recursion: with W = L^{-1} Sigma_{S,.} and a = L^{-1} H_S for
    # the Cholesky factor L of Sigma_SS, adding j changes the squared
    # statistic by (H_j - W_j'a)^2 / (Sigma_jj - |W_j|^2).  Both residual
    # arrays are updated in place as the set grows: appending j* adds the
    # row w = (Sigma_{j*,.} - W_{j*}'W) / l, l = sqrt(den_{j*}), so each
    # step costs one m x D matvec instead of refactoring from scratch.
    m = r.shape[0]
    diag = np.mean(r * r, axis=0)
    floor = _DEGENERACY_RTOL * np.maximum(diag, np.finfo(float).tiny)
    w = np.empty((d, r.shape[1]))
    num_root = h.copy()
    den = diag.copy()
    selected: list[int] = []
    for step in range(d):
        bad = den <= floor
        bad[selected] = True
        n_skipped = int(np.count_nonzero(bad)) - len(selected)
        if n_skipped > 0:
            warnings.warn(
                f"greedy step {step}: skipped {n_skipped} degenerate candidate(s)",
                RuntimeWarning,
                stacklevel=3,
            )
        gains = np.where(bad, -np.inf, num_root * num_root)
        gains[~bad] /= den[~bad]
        if not np.isfinite(gains.max()):
            raise RuntimeError(f"greedy step {step}: no admissible candidate left")
        j = int(np.argmax(gains))
        selected.append(j)
        if step + 1 == d:
            break
        scale = math.sqrt(den[j])
        gram_j = r[:, j] @ r / m
        row = (gram_j - w[:step, j] @ w[:step]) / scale if step else gram_j / scale
        w[step] = row
        num_root -= (num_root[j] / scale) * row
        den -= row * row
    return selected


def _greedy_general(h: np.ndarray, r: np.ndarray, d: int, p) -> list[int]:
    m, big_d = r.shape
    selected: list[int] = []
    for step in range(d):
        stats = np.full(big_d, -np.inf)
        n_skipped = 0
        for j in range(big_d):
            if j in selected:
                continue
            cols = selected + [j]
            sub = r[:, cols]
            sigma = sub.T @ sub / m
            vals, vecs = np.linalg.eigh(sigma)
            if vals[-1] <= 0.0 or vals[0] <= _DEGENERACY_RTOL * vals[-1]:
                n_skipped += 1
                continue
            z = vecs @ ((vecs.T @ h[cols]) / np.sqrt(vals))
            stats[j] = p_norm_stat(z, p)
        if n_skipped > 0:
            warnings.warn(
                f"greedy step {step}: skipped {n_skipped} degenerate candidate(s)",
                RuntimeWarning,
                stacklevel=3,
            )
        if not np.isfinite(stats.max()):
            raise RuntimeError(f"greedy step {step}: no admissible candidate left")
        selected.append(int(np.argmax(stats)))
    return selected


def select_greedy(fold1, d: int, p=2.0) -> np.ndarray:
    """Forward selection maximizing the studentized p-norm statistic on
    the growing set; plug-in pair covariance restricted to the candidate
    columns, ties to the lower index.  Candidates that are linearly
    dependent on the current set are skipped with a warning."""
    fold1 = _as_sample(fold1)
    if not 1 <= d <= fold1.d:
        raise ValueError(f"need 1 <= d <= {fold1.d}, got d={d}")
    pv = float(p)
    if not (pv >= 2.0 or math.isinf(pv)):
        raise ValueError(f"exponent must lie in [2, inf], got {p}")
    h = central_statistic(fold1)
    r = difference_pairs(fold1).values
    if pv == 2.0:
        selected = _greedy_p2(h, r, d)
    else:
        selected = _greedy_general(h, r, d, pv)
    return np.sort(np.asarray(selected, dtype=int))


@dataclass(frozen=True)
class SplitResult:
    """Outcome of the two-fold protocol: which columns fold 1 picked and
    the fold-2 test report over those columns."""

    selected: tuple[int, ...]
    n1: int
    n2: int
    report: TestReport

    def to_json_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "n1": self.n1,
            "n2": self.n2,
            "report": self.report.to_json_dict(),
        }


def split_test(
    s,
    d: int,
    *,
    selection="top",
    p=2.0,
    frac1: float = 0.5,
    seed=0,
    spec: DominantTestSpec | None = None,
    alpha: float = 0.05,
    reps: int | None = None,
    mc_seed: int = 0,
    estimator: str = "sample",
    trunc_mult: float = 3.0,
    extra_ps=(),
    kurtosis_directions: int = 64,
) -> SplitResult:
    """Select d of the D moment columns on fold 1, test them on fold 2.

    ``selection`` is "top", "greedy" (using exponent ``p``), or an
    explicit iterable of d column indices.  When no calibrated ``spec``
    is passed, the default exponent grid at level ``alpha`` is calibrated
    at dimension d against the fold-2 reference law.  Critical values are
    therefore those of a d-dimensional test at sample size n2.
    """
    s = _as_sample(s)
    if not 1 <= d <= s.d:
        raise ValueError(f"need 1 <= d <= {s.d}, got d={d}")
    idx1, idx2 = split(s.n, frac1, seed)
    fold1 = MomentSample(s.values[idx1])
    if isinstance(selection, str):
        if selection == "top":
            chosen = select_top_scaled(fold1, d)
        elif selection == "greedy":
            chosen = select_greedy(fold1, d, p)
        else:
            raise ValueError(f"selection must be 'top', 'greedy' or indices, got {selection!r}")
    else:
        chosen = np.unique(np.asarray(list(selection), dtype=int))
        if chosen.size != d:
            raise ValueError(f"selection must hold {d} distinct indices, got {chosen.size}")
        if chosen.min() < 0 or chosen.max() >= s.d:
            raise ValueError(f"selection indices must lie in [0, {s.d})")
    n2 = idx2.size
    if d > n2**0.4:
        warnings.warn(
            f"d={d} exceeds the n2^(2/5) = {n2 ** 0.4:.1f} guidance for fold size {n2}; "
            "the second-stage normal approximation may be poor",
            UserWarning,
            stacklevel=2,
        )
    if spec is None:
        aux = n2 // 2 if n2 // 2 >= d + 2 else None
        spec = calibrate_spec(default_spec(d, alpha), reps=reps, seed=mc_seed, aux_rows=aux)
    report = run_tests(
        MomentSample(s.values[idx2][:, chosen]),
        spec,
        estimator=estimator,
        trunc_mult=trunc_mult,
        extra_ps=extra_ps,
        kurtosis_directions=kurtosis_directions,
    )
    return SplitResult(tuple(int(i) for i in chosen), idx1.size, n2, report)
