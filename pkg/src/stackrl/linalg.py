"""Regularized Gram matrix with a Sherman-Morrison cached inverse."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Full re-inversion period; bounds drift of the cached inverse on long runs.
REFRESH_EVERY = 4096
QUAD_CLAMP = 1e-12


@dataclass
class GramState:
    """Holds ``lam * I + sum_t phi_t phi_t^T`` together with its inverse.

    Mutated in place by :meth:`rank_one_update`; one writer at a time.
    """

    dim: int
    lam: float
    gram: np.ndarray = field(repr=False)
    gram_inv: np.ndarray = field(repr=False)
    count: int = 0

    @classmethod
    def init(cls, dim: int, lam: float = 1.0) -> "GramState":
        if int(dim) != dim or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam!r}")
        dim = int(dim)
        return cls(
            dim=dim,
            lam=float(lam),
            gram=lam * np.eye(dim),
            gram_inv=np.eye(dim) / lam,
        )

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.dim,):
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {v.shape}")
        return v

    def rank_one_update(self, phi) -> "GramState":
        phi = self._check(phi)
        if phi.ndim != 1:
            raise ValueError("rank_one_update takes a single vector")
        self.gram += np.outer(phi, phi)
        u = self.gram_inv @ phi
        self.gram_inv -= np.outer(u, u) / (1.0 + phi @ u)
        self.gram_inv = 0.5 * (self.gram_inv + self.gram_inv.T)
        self.count += 1
        if self.count % REFRESH_EVERY == 0:
            self.refresh()
        return self

    def refresh(self) -> None:
        """Recompute the inverse from the Gram matrix by Cholesky factorization."""
        c = np.linalg.cholesky(self.gram)
        c_inv = np.linalg.solve(c, np.eye(self.dim))
        inv = c_inv.T @ c_inv
        self.gram_inv = 0.5 * (inv + inv.T)

    def quad_form(self, phi) -> np.ndarray | float:
        """``phi^T Lambda^{-1} phi``, broadcast over leading axes of ``phi``.

        Round-off negatives down to -1e-12 are clamped to zero.
        """
        phi = self._check(phi)
        q = np.einsum("...i,ij,...j->...", phi, self.gram_inv, phi)
        q = np.where(q < 0.0, np.where(q >= -QUAD_CLAMP, 0.0, q), q)
        if np.any(q < 0.0):
            raise FloatingPointError("quadratic form negative beyond round-off; inverse is corrupt")
        return float(q) if np.ndim(q) == 0 else q

    def apply_inverse(self, v) -> np.ndarray:
        v = self._check(v)
        return v @ self.gram_inv.T

    def copy(self) -> "GramState":
        return GramState(self.dim, self.lam, self.gram.copy(), self.gram_inv.copy(), self.count)


def elliptical_potential_bound(dim: int, n_updates: int, lam: float = 1.0) -> float:
    """Upper bound ``2 d log((lam + n) / lam)`` on the summed pre-update quadratic forms."""
    return 2.0 * dim * np.log((lam + n_updates) / lam)
