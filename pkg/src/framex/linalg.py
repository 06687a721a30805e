"""Dense Hermitian primitives: validated PSD operators, projections, spectra.

Everything downstream (frame operators, selector sums, sampling certificates)
is built from the types here.  Tolerances are relative to the operator norm
unless stated otherwise.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, PreconditionError

__all__ = [
    "HERMITIAN_TOL",
    "PSD_TOL",
    "NUMERIC_TOL",
    "RANK_DROP_TOL",
    "PsdOperator",
    "Projection",
    "SandwichCheck",
    "gram",
    "rank_one",
    "spectrum",
    "project_onto",
    "sandwich_bound",
]

# Validation thresholds, relative to the operator norm of the input.
HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
NUMERIC_TOL = 1e-9
# Rank decisions during orthonormalization, relative to the largest input norm.
RANK_DROP_TOL = 1e-8


def _as_square_matrix(matrix) -> np.ndarray:
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        return a.astype(np.complex128, copy=False)
    return a.astype(np.float64, copy=False)


def _check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    scale = max(float(np.max(np.abs(a))) if a.size else 0.0, 1.0)
    skew = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if skew > tol * scale:
        raise PreconditionError(
            f"matrix is not Hermitian: max asymmetry {skew:.3e} exceeds {tol:.1e} * {scale:.3e}"
        )


class PsdOperator:
    """A validated positive-semidefinite Hermitian operator on C^d or R^d.

    Construction symmetrizes the input after checking Hermitian symmetry and
    rejects matrices whose smallest eigenvalue is below -PSD_TOL relative to
    the operator norm.  Trace and operator norm are cached.
    """

    __slots__ = ("_matrix", "_eigenvalues", "_trace", "_opnorm")

    def __init__(self, matrix, *, _prevalidated: bool = False):
        a = _as_square_matrix(matrix)
        if not _prevalidated:
            _check_hermitian(a)
        a = (a + a.conj().T) / 2.0
        a.setflags(write=False)
        self._matrix = a
        self._eigenvalues = None
        self._trace = float(np.real(np.trace(a)))
        self._opnorm = None
        if not _prevalidated:
            lo = float(self.eigenvalues[0]) if self.dim else 0.0
            floor = -PSD_TOL * max(self.opnorm, 1.0)
            if lo < floor:
                raise PreconditionError(
                    f"matrix is not positive semidefinite: min eigenvalue {lo:.3e} < {floor:.3e}"
                )

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @property
    def trace(self) -> float:
        return self._trace

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order (ties keep the ascending layout)."""
        if self._eigenvalues is None:
            vals = np.linalg.eigvalsh(self._matrix) if self.dim else np.empty(0)
            vals.setflags(write=False)
            self._eigenvalues = vals
        return self._eigenvalues

    @property
    def opnorm(self) -> float:
        if self._opnorm is None:
            ev = self.eigenvalues
            self._opnorm = float(np.max(np.abs(ev))) if ev.size else 0.0
        return self._opnorm

    def apply(self, x) -> np.ndarray:
        return self._matrix @ np.asarray(x)

    def compress(self, projection: "Projection") -> "PsdOperator":
        """Return P A P for an orthogonal projection P."""
        p = projection.matrix
        return PsdOperator(p @ self._matrix @ p, _prevalidated=True)

    def __add__(self, other):
        if isinstance(other, PsdOperator):
            other = other.matrix
        elif isinstance(other, (int, float)) and other == 0:
            return self
        other = np.asarray(other)
        if other.shape != self._matrix.shape:
            raise DimensionMismatchError(
                f"cannot add operators of shapes {self._matrix.shape} and {other.shape}"
            )
        return PsdOperator(self._matrix + other, _prevalidated=True)

    __radd__ = __add__

    def __mul__(self, scalar):
        s = float(scalar)
        if s < 0:
            raise PreconditionError("scaling a PSD operator by a negative factor")
        return PsdOperator(s * self._matrix, _prevalidated=True)

    __rmul__ = __mul__

    def __repr__(self):
        return f"PsdOperator(dim={self.dim}, trace={self.trace:.6g}, opnorm={self.opnorm:.6g})"

    @classmethod
    def zero(cls, dim: int) -> "PsdOperator":
        return cls(np.zeros((dim, dim)), _prevalidated=True)

    @classmethod
    def identity(cls, dim: int) -> "PsdOperator":
        return cls(np.eye(dim), _prevalidated=True)


def rank_one(vector) -> PsdOperator:
    """The operator x -> <x, v> v; its trace is ||v||^2."""
    v = np.asarray(vector)
    if v.ndim != 1:
        raise PreconditionError(f"expected a vector, got shape {v.shape}")
    return PsdOperator(np.outer(v, v.conj()), _prevalidated=True)


def gram(vectors) -> np.ndarray:
    """Pairwise inner products <x_i, x_j>, linear in the first argument."""
    if hasattr(vectors, "vectors"):
        vectors = vectors.vectors
    x = np.asarray(vectors)
    if x.ndim != 2:
        raise PreconditionError(f"expected a stack of vectors, got shape {x.shape}")
    g = x @ x.conj().T
    return (g + g.conj().T) / 2.0


def spectrum(op) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian operator.

    Accepts a PsdOperator or a raw Hermitian matrix.  The eigendecomposition
    is checked by reconstruction to NUMERIC_TOL relative to the norm.
    """
    if isinstance(op, PsdOperator):
        return op.eigenvalues.copy()
    a = _as_square_matrix(op)
    _check_hermitian(a)
    a = (a + a.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(a)
    resid = float(np.max(np.abs((vecs * vals) @ vecs.conj().T - a))) if a.size else 0.0
    scale = max(float(np.max(np.abs(vals))) if vals.size else 0.0, 1.0)
    if resid > NUMERIC_TOL * scale * 10:
        raise PreconditionError(f"eigendecomposition failed to reconstruct: residual {resid:.3e}")
    return vals


class Projection:
    """Orthogonal projection stored through an orthonormal basis of its range."""

    __slots__ = ("_basis", "_matrix")

    def __init__(self, basis, dim: int | None = None):
        q = np.asarray(basis)
        if q.ndim != 2:
            raise PreconditionError(f"expected a (dim, rank) basis, got shape {q.shape}")
        if dim is not None and q.shape[0] != dim:
            raise DimensionMismatchError(f"basis lives in dim {q.shape[0]}, expected {dim}")
        if q.shape[1]:
            g = q.conj().T @ q
            defect = float(np.max(np.abs(g - np.eye(q.shape[1]))))
            if defect > 1e-8:
                raise PreconditionError(f"basis is not orthonormal: defect {defect:.3e}")
        q = q.astype(np.complex128 if np.iscomplexobj(q) else np.float64, copy=True)
        q.setflags(write=False)
        self._basis = q
        self._matrix = None

    @property
    def basis(self) -> np.ndarray:
        return self._basis

    @property
    def dim(self) -> int:
        return self._basis.shape[0]

    @property
    def rank(self) -> int:
        return self._basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            q = self._basis
            m = q @ q.conj().T
            m = (m + m.conj().T) / 2.0
            m.setflags(write=False)
            self._matrix = m
        return self._matrix

    def apply(self, x) -> np.ndarray:
        q = self._basis
        return q @ (q.conj().T @ np.asarray(x))

    def complement(self) -> "Projection":
        """Projection onto the orthogonal complement of the range."""
        d, r = self.dim, self.rank
        if r == 0:
            basis = np.eye(d, dtype=self._basis.dtype)
        elif r == d:
            basis = np.zeros((d, 0), dtype=self._basis.dtype)
        else:
            # complete the basis via a full QR factorization
            q_full, _ = np.linalg.qr(self._basis, mode="complete")
            basis = q_full[:, r:]
        return Projection(basis)

    def __repr__(self):
        return f"Projection(dim={self.dim}, rank={self.rank})"

    @classmethod
    def zero(cls, dim: int) -> "Projection":
        return cls(np.zeros((dim, 0)))

    @classmethod
    def full(cls, dim: int) -> "Projection":
        return cls(np.eye(dim))


def project_onto(vectors, dim: int | None = None) -> Projection:
    """Orthonormalize a spanning list into a Projection onto its span.

    Uses repeated Gram-Schmidt (two orthogonalization passes per vector) and
    drops vectors whose residual falls below RANK_DROP_TOL times the largest
    input norm.  Deterministic: input order decides which vectors survive.
    """
    if hasattr(vectors, "vectors"):
        vectors = vectors.vectors
    vs = [np.asarray(v) for v in vectors]
    if dim is None:
        if not vs:
            raise PreconditionError("cannot infer dimension from an empty list")
        dim = vs[0].shape[0]
    complex_input = any(np.iscomplexobj(v) for v in vs)
    dtype = np.complex128 if complex_input else np.float64
    if not vs:
        return Projection(np.zeros((dim, 0), dtype=dtype))
    norms = [float(np.linalg.norm(v)) for v in vs]
    threshold = RANK_DROP_TOL * max(max(norms), 1e-300)
    cols: list[np.ndarray] = []
    for v in vs:
        if v.shape != (dim,):
            raise DimensionMismatchError(f"vector of shape {v.shape} in dim {dim}")
        w = v.astype(dtype)
        for _ in range(2):
            for q in cols:
                w = w - q * np.vdot(q, w)
        nw = float(np.linalg.norm(w))
        if nw > threshold:
            cols.append(w / nw)
    basis = np.stack(cols, axis=1) if cols else np.zeros((dim, 0), dtype=dtype)
    return Projection(basis)


class SandwichCheck:
    """Result of comparing T against its block-diagonal compression.

    bound is (||P T P|| * ||P' T P'||)^(1/2) for the complementary projections
    P, P'; deviation is the largest absolute eigenvalue of
    T - P T P - P' T P'.  In exact arithmetic deviation <= bound.
    """

    __slots__ = ("bound", "deviation", "ok")

    def __init__(self, bound: float, deviation: float, ok: bool):
        self.bound = bound
        self.deviation = deviation
        self.ok = ok

    def __repr__(self):
        return f"SandwichCheck(bound={self.bound:.6g}, deviation={self.deviation:.6g}, ok={self.ok})"


def sandwich_bound(op: PsdOperator, projection: Projection) -> SandwichCheck:
    """Bound the off-diagonal part of a PSD operator by its compressions."""
    if not isinstance(op, PsdOperator):
        op = PsdOperator(op)
    if projection.dim != op.dim:
        raise DimensionMismatchError(
            f"projection dim {projection.dim} does not match operator dim {op.dim}"
        )
    p = projection.matrix
    q = projection.complement().matrix
    inside = p @ op.matrix @ p
    outside = q @ op.matrix @ q
    bound = float(
        np.sqrt(
            max(np.max(np.abs(np.linalg.eigvalsh(inside))), 0.0)
            * max(np.max(np.abs(np.linalg.eigvalsh(outside))), 0.0)
        )
    )
    dev_matrix = op.matrix - inside - outside
    deviation = float(np.max(np.abs(np.linalg.eigvalsh((dev_matrix + dev_matrix.conj().T) / 2.0))))
    tol = NUMERIC_TOL * max(op.opnorm, 1.0)
    return SandwichCheck(bound, deviation, deviation <= bound + tol)
