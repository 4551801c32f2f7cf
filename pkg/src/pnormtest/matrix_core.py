"""Symmetric-matrix machinery: Moore-Penrose inverse square root and
eigenvalue diagnostics for covariance matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SymMatrix", "pinv_sqrt", "spectral_norm", "eigen_bounds"]

_SYM_RTOL = 1e-10


@dataclass(frozen=True)
class SymMatrix:
    """A real symmetric d x d matrix.

    Input is checked for symmetry to relative tolerance 1e-10 and then
    symmetrized exactly, so downstream eigendecompositions always see
    (A + A') / 2.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("matrix dimension must be positive")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = np.max(np.abs(a)) or 1.0
        if np.max(np.abs(a - a.T)) > _SYM_RTOL * scale:
            raise ValueError("matrix is not symmetric to 1e-10 relative tolerance")
        sym = 0.5 * (a + a.T)
        sym.flags.writeable = False
        object.__setattr__(self, "entries", sym)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _as_sym(a) -> SymMatrix:
    return a if isinstance(a, SymMatrix) else SymMatrix(np.asarray(a, dtype=float))


def pinv_sqrt(a, rank_tol: float = 1e-10) -> SymMatrix:
    """Moore-Penrose inverse square root of a symmetric PSD matrix.

    Eigenvalues above ``rank_tol * max_eig`` map to lam**-0.5, the rest to 0,
    so singular directions are projected out.  Negative eigenvalues below
    ``-rank_tol * max_eig`` mean the input is materially indefinite and are
    rejected.
    """
    a = _as_sym(a)
    w, v = np.linalg.eigh(a.entries)
    top = float(w[-1])
    floor = rank_tol * max(top, 0.0)
    if w[0] < -max(floor, rank_tol):
        raise ValueError(
            f"matrix is not positive semidefinite: min eigenvalue {w[0]:.3e}"
        )
    inv_roots = np.where(w > floor, 1.0 / np.sqrt(np.maximum(w, 1e-300)), 0.0)
    out = (v * inv_roots) @ v.T
    return SymMatrix(0.5 * (out + out.T))


def spectral_norm(a) -> float:
    """Largest absolute eigenvalue."""
    a = _as_sym(a)
    w = np.linalg.eigvalsh(a.entries)
    return float(max(abs(w[0]), abs(w[-1])))


def eigen_bounds(a) -> tuple[float, float]:
    """(min eigenvalue, max eigenvalue), used as a conditioning diagnostic."""
    a = _as_sym(a)
    w = np.linalg.eigvalsh(a.entries)
    return float(w[0]), float(w[-1])
