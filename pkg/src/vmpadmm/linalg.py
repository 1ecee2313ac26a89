"""Dense linear algebra with degenerate (PSD) seminorms and dual seminorms.

All operators here are selfadjoint positive semidefinite matrices on small
finite-dimensional spaces.  A PSD operator M induces the seminorm
``||z||_M = sqrt(<Mz, z>)`` and an extended dual seminorm that is finite
exactly on the range of M, where ``||M w||*_M = ||w||_M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "PsdOperator",
    "BlockDiagOperator",
    "seminorm",
    "dual_seminorm_of_image",
    "dual_seminorm_general",
    "operator_leq",
    "block_diag",
    "identity",
    "zero_operator",
]

_SYMMETRY_TOL = 1e-12
_PSD_TOL = 1e-10
_DEFINITE_TOL = 1e-12
_RANGE_TOL = 1e-8


@dataclass(frozen=True)
class PsdOperator:
    """A selfadjoint positive (semi)definite operator given by a dense matrix.

    Immutable; the eigendecomposition is computed lazily and cached.
    """

    matrix: np.ndarray
    definite: bool = False
    symmetry_tol: float = _SYMMETRY_TOL
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        if np.abs(m - m.T).max(initial=0.0) > self.symmetry_tol * scale:
            raise ValueError("operator matrix is not symmetric within tolerance")
        lo, hi = self._eig_extremes
        if lo < -_PSD_TOL * max(1.0, hi):
            raise ValueError(f"operator is not PSD: smallest eigenvalue {lo}")
        if self.definite and lo < _DEFINITE_TOL * max(1.0, hi):
            raise ValueError(
                f"operator flagged definite but smallest eigenvalue is {lo}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _eig(self):
        w, v = np.linalg.eigh(0.5 * (self.matrix + self.matrix.T))
        return w, v

    @cached_property
    def _eig_extremes(self):
        w = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))
        return float(w[0]), float(w[-1])

    def apply(self, z: np.ndarray) -> np.ndarray:
        z = self._check_dim(z)
        return self.matrix @ z

    def seminorm(self, z: np.ndarray) -> float:
        """``sqrt(<Mz, z>)``; raises if the quadratic form is negative
        beyond the PSD roundoff budget."""
        z = self._check_dim(z)
        q = float(z @ (self.matrix @ z))
        bound = _PSD_TOL * max(1.0, self._eig_extremes[1]) * float(z @ z)
        if q < -bound:
            raise ValueError(f"negative quadratic form {q}: operator is not PSD")
        return np.sqrt(max(q, 0.0))

    def dual_seminorm_of_image(self, w: np.ndarray) -> float:
        """Dual seminorm of ``M w`` given its preimage ``w``.

        Equals ``||w||_M``; always finite because ``M w`` lies in range(M).
        """
        return self.seminorm(w)

    def dual_seminorm_general(self, r: np.ndarray, tol: float = _RANGE_TOL) -> float:
        """Dual seminorm of an arbitrary vector, +inf off range(M).

        Projects onto the eigenbasis; if the component of ``r`` outside
        range(M) exceeds ``tol * ||r||`` the dual seminorm is infinite.
        """
        r = self._check_dim(r)
        rnorm = float(np.linalg.norm(r))
        if rnorm == 0.0:
            return 0.0
        w, v = self._eig
        cutoff = max(float(w[-1]), 0.0) * self.dim * 1e-14
        pos = w > cutoff
        coeffs = v.T @ r
        if float(np.linalg.norm(coeffs[~pos])) > tol * rnorm:
            return np.inf
        return float(np.sqrt((coeffs[pos] ** 2 / w[pos]).sum()))

    def inverse(self, cond_cap: float = 1e12) -> "PsdOperator":
        """Inverse via eigendecomposition; requires a definite operator."""
        w, v = self._eig
        if w[0] <= 0.0 or w[-1] / w[0] > cond_cap:
            raise ValueError(
                f"operator is too ill-conditioned to invert (eigenvalues {w[0]}..{w[-1]})"
            )
        inv = (v / w) @ v.T
        return PsdOperator(0.5 * (inv + inv.T), definite=True, label=self.label)

    def _check_dim(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"vector of shape {z.shape} vs operator dim {self.dim}")
        return z


@dataclass(frozen=True)
class BlockDiagOperator:
    """Block-diagonal PSD operator on a product space.

    The seminorm decomposes as the root-sum-of-squares of block seminorms.
    """

    blocks: tuple[PsdOperator, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("block_diag requires at least one block")
        object.__setattr__(self, "blocks", tuple(self.blocks))
        offs, at = [], 0
        for b in self.blocks:
            offs.append(at)
            at += b.dim
        offs.append(at)
        object.__setattr__(self, "offsets", tuple(offs))

    @property
    def dim(self) -> int:
        return self.offsets[-1]

    @cached_property
    def matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for b, o in zip(self.blocks, self.offsets):
            out[o : o + b.dim, o : o + b.dim] = b.matrix
        return out

    def split(self, z: np.ndarray) -> list[np.ndarray]:
        z = self._check_dim(z)
        return [z[o : o + b.dim] for b, o in zip(self.blocks, self.offsets)]

    def apply(self, z: np.ndarray) -> np.ndarray:
        return np.concatenate([b.apply(p) for b, p in zip(self.blocks, self.split(z))])

    def seminorm(self, z: np.ndarray) -> float:
        parts = self.split(z)
        return float(
            np.sqrt(sum(b.seminorm(p) ** 2 for b, p in zip(self.blocks, parts)))
        )

    def dual_seminorm_of_image(self, w: np.ndarray) -> float:
        return self.seminorm(w)

    def dual_seminorm_general(self, r: np.ndarray, tol: float = _RANGE_TOL) -> float:
        parts = self.split(r)
        vals = [b.dual_seminorm_general(p, tol) for b, p in zip(self.blocks, parts)]
        if any(np.isinf(v) for v in vals):
            return np.inf
        return float(np.sqrt(sum(v**2 for v in vals)))

    def _check_dim(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"vector of shape {z.shape} vs operator dim {self.dim}")
        return z


def seminorm(M, z) -> float:
    return M.seminorm(np.asarray(z, dtype=float))


def dual_seminorm_of_image(M, w) -> float:
    return M.dual_seminorm_of_image(np.asarray(w, dtype=float))


def dual_seminorm_general(M, r, tol: float = _RANGE_TOL) -> float:
    return M.dual_seminorm_general(np.asarray(r, dtype=float), tol)


def operator_leq(M: PsdOperator, N: PsdOperator, slack_tol: float = _PSD_TOL) -> bool:
    """Partial order check M <= N, i.e. N - M is PSD up to roundoff slack."""
    if M.dim != N.dim:
        raise ValueError(f"operator dims differ: {M.dim} vs {N.dim}")
    diff = N.matrix - M.matrix
    w = np.linalg.eigvalsh(0.5 * (diff + diff.T))
    scale = max(abs(float(w[0])), abs(float(w[-1])))
    return float(w[0]) >= -slack_tol * (1.0 + scale)


def block_diag(blocks) -> BlockDiagOperator:
    return BlockDiagOperator(tuple(blocks))


def identity(dim: int, scale: float = 1.0) -> PsdOperator:
    if scale < 0:
        raise ValueError("identity scale must be nonnegative")
    return PsdOperator(scale * np.eye(dim), definite=scale > 0)


def zero_operator(dim: int) -> PsdOperator:
    return PsdOperator(np.zeros((dim, dim)))
