"""Linear relations between finite-dimensional real vector spaces.

A relation ``R: V -|-> W`` is a subspace of ``W x V`` stored as an
orthonormal basis (columns), W-block stacked over V-block.  All rank
decisions use the cutoff ``RANK_RTOL * largest singular value``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "LinRelation", "LinRelError", "RANK_RTOL", "CONTAIN_TOL",
    "orth", "null_space", "graph_of", "compose_rel", "odot", "contains", "equal",
    "identity_rel", "full_rel", "zero_rel", "block_map", "affine_crl",
]

RANK_RTOL = 1e-10
CONTAIN_TOL = 1e-8


class LinRelError(ValueError):
    pass


def _rank(s: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def orth(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) for the column span of `A`."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.size == 0:
        return np.zeros((n, 0))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    return u[:, : _rank(s)]


def null_space(C: np.ndarray, n: int | None = None) -> np.ndarray:
    """Orthonormal basis of ``{x : C x = 0}``."""
    C = np.asarray(C, dtype=float)
    if n is None:
        n = C.shape[1]
    if C.size == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(C, full_matrices=True)
    r = _rank(s)
    return vt[r:].T.copy()


@dataclass(frozen=True, eq=False)
class LinRelation:
    """Subspace of ``R^dim_w x R^dim_v``; `basis` has orthonormal columns."""

    dim_w: int
    dim_v: int
    basis: np.ndarray

    @classmethod
    def from_span(cls, dim_w: int, dim_v: int, span) -> "LinRelation":
        span = np.asarray(span, dtype=float)
        if span.size == 0:
            return cls(dim_w, dim_v, np.zeros((dim_w + dim_v, 0)))
        span = span.reshape(dim_w + dim_v, -1)
        return cls(dim_w, dim_v, orth(span))

    @classmethod
    def from_constraints(cls, dim_w: int, dim_v: int, C) -> "LinRelation":
        C = np.asarray(C, dtype=float).reshape(-1, dim_w + dim_v)
        return cls(dim_w, dim_v, null_space(C, dim_w + dim_v))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.dim_w + self.dim_v

    def annihilator(self) -> np.ndarray:
        """Rows spanning the orthogonal complement: the subspace is their common kernel."""
        n = self.ambient
        if self.dim == 0:
            return np.eye(n)
        u, s, _ = np.linalg.svd(self.basis, full_matrices=True)
        return u[:, self.dim:].T.copy()

    def converse(self) -> "LinRelation":
        b = np.vstack([self.basis[self.dim_w:], self.basis[: self.dim_w]])
        return LinRelation(self.dim_v, self.dim_w, b)

    def __repr__(self):
        return f"LinRelation(R^{self.dim_v} -|-> R^{self.dim_w}, dim {self.dim})"


def graph_of(T) -> LinRelation:
    """``{(Tv, v)}`` for a matrix ``T: R^n -> R^m``."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    m, n = T.shape
    return LinRelation.from_span(m, n, np.vstack([T, np.eye(n)]))


def identity_rel(n: int) -> LinRelation:
    return graph_of(np.eye(n))


def full_rel(dim_w: int, dim_v: int) -> LinRelation:
    return LinRelation(dim_w, dim_v, np.eye(dim_w + dim_v))


def zero_rel(dim_w: int, dim_v: int) -> LinRelation:
    return LinRelation(dim_w, dim_v, np.zeros((dim_w + dim_v, 0)))


def compose_rel(S: LinRelation, R: LinRelation) -> LinRelation:
    """``S o R = {(z, x) : (z, y) in S, (y, x) in R for some y}``."""
    if S.dim_v != R.dim_w:
        raise LinRelError(f"cannot compose: S starts at R^{S.dim_v}, R ends at R^{R.dim_w}")
    dz, dy, dx = S.dim_w, S.dim_v, R.dim_v
    n = dz + dy + dx
    # constraints of S x R^X and R^Z x R inside Z x Y x X
    cs = S.annihilator()
    cr = R.annihilator()
    C = np.zeros((cs.shape[0] + cr.shape[0], n))
    C[: cs.shape[0], : dz + dy] = cs
    C[cs.shape[0]:, dz:] = cr
    K = null_space(C, n)
    proj = np.vstack([K[:dz], K[dz + dy:]])
    return LinRelation.from_span(dz, dx, proj)


def odot(phi: Sequence[int], Phi: Sequence[LinRelation],
         mu_dims: Sequence[int]) -> LinRelation:
    """Intersection over a of the preimages of ``Phi[a]`` under ``pi_a x pi_phi(a)``.

    Returns a relation ``sum_y mu(y) -|-> sum_x tau(x)``, where
    ``Phi[a]: mu(phi(a)) -|-> tau(a)`` and ``mu(y)`` has dimension ``mu_dims[y]``.
    """
    if len(phi) != len(Phi):
        raise LinRelError(f"|phi| = {len(phi)} but {len(Phi)} components")
    tau_dims = [R.dim_w for R in Phi]
    for a, (y, R) in enumerate(zip(phi, Phi)):
        if not 0 <= y < len(mu_dims):
            raise LinRelError(f"phi({a}) = {y} out of range")
        if R.dim_v != mu_dims[y]:
            raise LinRelError(f"Phi({a}) starts at R^{R.dim_v}, mu({y}) has dim {mu_dims[y]}")
    w_off = np.concatenate([[0], np.cumsum(tau_dims)]).astype(int)
    dw = int(w_off[-1])
    v_off = (np.concatenate([[0], np.cumsum(mu_dims)]) + dw).astype(int)
    n = dw + int(sum(mu_dims))
    rows = []
    for a, (y, R) in enumerate(zip(phi, Phi)):
        c = R.annihilator()
        if c.shape[0] == 0:
            continue
        block = np.zeros((c.shape[0], n))
        block[:, w_off[a]: w_off[a + 1]] = c[:, : R.dim_w]
        block[:, v_off[y]: v_off[y + 1]] = c[:, R.dim_w:]
        rows.append(block)
    C = np.vstack(rows) if rows else np.zeros((0, n))
    return LinRelation(dw, n - dw, null_space(C, n))


def block_map(phi: Sequence[int], maps: Sequence[np.ndarray], mu_dims: Sequence[int]) -> np.ndarray:
    """Matrix of the map ``sum mu -> sum tau`` whose a-th block is ``maps[a]`` on block ``phi(a)``."""
    maps = [np.atleast_2d(np.asarray(T, dtype=float)) for T in maps]
    tau_dims = [T.shape[0] for T in maps]
    w_off = np.concatenate([[0], np.cumsum(tau_dims)]).astype(int)
    v_off = np.concatenate([[0], np.cumsum(mu_dims)]).astype(int)
    M = np.zeros((int(w_off[-1]), int(v_off[-1])))
    for a, (y, T) in enumerate(zip(phi, maps)):
        M[w_off[a]: w_off[a + 1], v_off[y]: v_off[y + 1]] = T
    return M


def _check_same(A: LinRelation, B: LinRelation):
    if (A.dim_w, A.dim_v) != (B.dim_w, B.dim_v):
        raise LinRelError(
            f"ambient spaces differ: R^{A.dim_w} x R^{A.dim_v} vs R^{B.dim_w} x R^{B.dim_v}"
        )


def contains(A: LinRelation, B: LinRelation, tol: float = CONTAIN_TOL) -> bool:
    """True iff B is a subspace of A."""
    _check_same(A, B)
    if B.dim == 0:
        return True
    resid = B.basis - A.basis @ (A.basis.T @ B.basis)
    return bool(np.max(np.abs(resid)) <= tol)


def equal(A: LinRelation, B: LinRelation, tol: float = CONTAIN_TOL) -> bool:
    return A.dim == B.dim and contains(A, B, tol) and contains(B, A, tol)


# ---------------------------------------------------------------------------
# Relatedness of affine vector fields: a finite-dimensional stand-in for the
# space of all vector fields.  An affine field x -> A x + b on R^n has
# coordinates (vec(A), b) in R^(n^2 + n), row-major vec.

def affine_dim(n: int) -> int:
    return n * n + n


def affine_crl(T) -> LinRelation:
    """Pairs (Y, X) of affine fields with X on R^n f-related to Y on R^m, f(x) = T x.

    The condition ``T (A x + b) = A' T x + b'`` for all x is linear:
    ``T A = A' T`` and ``T b = b'``.  The relation lives in
    ``Aff(R^m) x Aff(R^n)``.
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    m, n = T.shape
    dw, dv = affine_dim(m), affine_dim(n)
    rows = []
    # (T A - A' T)[i, j] = sum_k T[i,k] A[k,j] - sum_k A'[i,k] T[k,j]
    for i in range(m):
        for j in range(n):
            r = np.zeros(dw + dv)
            for k in range(m):
                r[i * m + k] -= T[k, j]
            for k in range(n):
                r[dw + k * n + j] += T[i, k]
            rows.append(r)
    # (T b - b')[i]
    for i in range(m):
        r = np.zeros(dw + dv)
        r[m * m + i] -= 1.0
        r[dw + n * n: dw + n * n + n] += T[i]
        rows.append(r)
    return LinRelation.from_constraints(dw, dv, np.array(rows))
