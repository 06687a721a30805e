"""Finite vector families: frame operators, bounds, canonical duals, labels.

A family {x_n} in R^d or C^d is a frame when A ||x||^2 <= sum |<x, x_n>|^2
<= B ||x||^2 for constants 0 < A <= B.  In finite dimensions a family is a
frame exactly when it spans; the interesting content is quantitative, so
bounds are computed as extreme eigenvalues of the frame operator
S = sum of <., x_n> x_n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NotAFrameError, PreconditionError
from .linalg import NUMERIC_TOL, Projection, PsdOperator, project_onto

__all__ = [
    "FRAME_TOL_FACTOR",
    "VectorFamily",
    "FrameReport",
    "Classification",
    "ReconstructionResult",
    "frame_operator",
    "frame_bounds",
    "canonical_dual",
    "reconstruct",
    "classify",
]

# Lower frame bounds below FRAME_TOL_FACTOR * B are treated as zero.
FRAME_TOL_FACTOR = 1e-10
_SELF_CHECK_PROBES = 50


class VectorFamily:
    """An ordered finite family of vectors with optional scalars and labels.

    Vectors are rows of a 2d array.  Scalars are per-vector weights used by
    rescaling routines; complex scalars are only permitted when the ambient
    space is complex.
    """

    __slots__ = ("_vectors", "_scalars", "_labels")

    def __init__(self, vectors, scalars=None, labels=None):
        v = np.asarray(vectors)
        if v.ndim != 2:
            raise PreconditionError(f"expected a (count, dim) array, got shape {v.shape}")
        if v.shape[0] == 0 or v.shape[1] == 0:
            raise PreconditionError("a vector family must hold at least one vector in dim >= 1")
        dtype = np.complex128 if np.iscomplexobj(v) else np.float64
        v = v.astype(dtype, copy=True)
        v.setflags(write=False)
        self._vectors = v
        if scalars is not None:
            s = np.asarray(scalars)
            if s.shape != (v.shape[0],):
                raise DimensionMismatchError(
                    f"scalars shape {s.shape} does not match {v.shape[0]} vectors"
                )
            if np.iscomplexobj(s) and dtype is np.float64:
                if np.max(np.abs(s.imag)) > 0:
                    raise PreconditionError("complex scalars over a real family")
                s = s.real
            s = s.astype(dtype, copy=True)
            s.setflags(write=False)
            self._scalars = s
        else:
            self._scalars = None
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != v.shape[0]:
                raise DimensionMismatchError(
                    f"{len(labels)} labels for {v.shape[0]} vectors"
                )
        self._labels = labels

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def scalars(self):
        return self._scalars

    @property
    def labels(self):
        return self._labels

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def field(self) -> str:
        return "complex" if np.iscomplexobj(self._vectors) else "real"

    def __len__(self) -> int:
        return self._vectors.shape[0]

    def weighted_vectors(self) -> np.ndarray:
        """Rows c_n * x_n; identity weights when no scalars are attached."""
        if self._scalars is None:
            return self._vectors
        return self._vectors * self._scalars[:, None]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self._vectors, axis=1)

    def subfamily(self, indices) -> "VectorFamily":
        idx = list(indices)
        return VectorFamily(
            self._vectors[idx],
            None if self._scalars is None else self._scalars[idx],
            None if self._labels is None else [self._labels[i] for i in idx],
        )

    def __repr__(self):
        return f"VectorFamily(count={len(self)}, dim={self.dim}, field={self.field})"


@dataclass(frozen=True)
class FrameReport:
    """Quantitative summary of a family: bounds and derived predicates."""

    lower: float
    upper: float
    is_frame: bool
    is_bessel: bool
    is_tight: bool
    is_riesz_basis: bool


@dataclass(frozen=True)
class Classification:
    """Where a family sits in the spanning hierarchy."""

    label: str  # riesz_basis | frame | rescalable | non_spanning
    report: FrameReport
    spanning: bool
    rescaling_recommended: bool
    note: str


@dataclass(frozen=True)
class ReconstructionResult:
    """Full reconstruction plus the worst partial-sum deviation on the way."""

    value: np.ndarray
    max_partial_deviation: float


def _family_matrix(family, use_scalars: bool) -> np.ndarray:
    if isinstance(family, VectorFamily):
        return family.weighted_vectors() if use_scalars else family.vectors
    w = np.asarray(family)
    if w.ndim != 2:
        raise PreconditionError(f"expected a vector family, got shape {w.shape}")
    return w


def frame_operator(family, use_scalars: bool = False) -> PsdOperator:
    """S = sum of rank-one operators of the (optionally rescaled) vectors."""
    w = _family_matrix(family, use_scalars)
    s = w.T @ w.conj()
    return PsdOperator(s, _prevalidated=True)


def frame_bounds(family, use_scalars: bool = False) -> FrameReport:
    """Frame bounds as extreme eigenvalues of the frame operator.

    Runs a seeded probe self-check: for random unit x the analysis energy
    sum |<x, x_n>|^2 must fall inside [A - tol, B + tol].
    """
    w = _family_matrix(family, use_scalars)
    count, dim = w.shape
    op = frame_operator(w)
    ev = op.eigenvalues
    lower = float(max(ev[0], 0.0))
    upper = float(max(ev[-1], 0.0))
    tol = NUMERIC_TOL * max(upper, 1.0)
    rng = np.random.default_rng(0)
    probes = rng.standard_normal((_SELF_CHECK_PROBES, dim))
    if np.iscomplexobj(w):
        probes = probes + 1j * rng.standard_normal((_SELF_CHECK_PROBES, dim))
    probes /= np.linalg.norm(probes, axis=1)[:, None]
    energies = np.sum(np.abs(probes @ w.conj().T) ** 2, axis=1)
    if np.any(energies < lower - tol) or np.any(energies > upper + tol):
        raise PreconditionError(
            "internal probe check failed: analysis energy escaped the eigenvalue range"
        )
    is_frame = lower > FRAME_TOL_FACTOR * upper
    is_tight = is_frame and (upper - lower) <= NUMERIC_TOL * max(upper, 1.0)
    return FrameReport(
        lower=lower,
        upper=upper,
        is_frame=is_frame,
        is_bessel=np.isfinite(upper),
        is_tight=is_tight,
        is_riesz_basis=is_frame and count == dim,
    )


def canonical_dual(family: VectorFamily, use_scalars: bool = False) -> VectorFamily:
    """The dual family {S^-1 x_n}; reconstruction against it is exact.

    With use_scalars the dual of the rescaled family {c_n x_n} is returned.
    """
    w = _family_matrix(family, use_scalars)
    report = frame_bounds(w)
    if not report.is_frame:
        raise NotAFrameError(
            f"canonical dual needs a frame; lower bound {report.lower:.3e} "
            f"is below {FRAME_TOL_FACTOR:.0e} * {report.upper:.3e}"
        )
    s = frame_operator(w).matrix
    duals = np.linalg.solve(s, w.T).T
    labels = family.labels if isinstance(family, VectorFamily) else None
    return VectorFamily(duals, labels=labels)


def reconstruct(family, duals, x, order=None) -> ReconstructionResult:
    """Sum <x, y_n> x_n in the given order and track partial-sum drift.

    The maximum deviation of the partial sums from the full sum is the finite
    stand-in for an unconditionality diagnostic: for a frame and its
    canonical dual it stays bounded by B * ||x|| level quantities under any
    reordering.
    """
    w = _family_matrix(family, False)
    y = _family_matrix(duals, False)
    if w.shape != y.shape:
        raise DimensionMismatchError(f"family shape {w.shape} vs duals shape {y.shape}")
    xv = np.asarray(x)
    if xv.shape != (w.shape[1],):
        raise DimensionMismatchError(f"vector shape {xv.shape} in dim {w.shape[1]}")
    n = w.shape[0]
    if order is None:
        order = range(n)
    order = list(order)
    if sorted(order) != list(range(n)):
        raise PreconditionError("order must be a permutation of range(count)")
    coeffs = y.conj() @ xv  # <x, y_n>
    terms = coeffs[order, None] * w[order]
    partials = np.cumsum(terms, axis=0)
    total = partials[-1]
    deviation = float(np.max(np.linalg.norm(partials - total[None, :], axis=1)))
    return ReconstructionResult(value=total, max_partial_deviation=deviation)


def classify(family: VectorFamily, use_scalars: bool = False) -> Classification:
    """Place a family in the hierarchy riesz_basis > frame > rescalable > non_spanning.

    rescalable means spanning: some choice of scalars turns the family into
    a frame (normalizing works).  A spanning family whose raw lower bound
    drowns below the frame tolerance is labeled rescalable and flagged.
    """
    w = _family_matrix(family, use_scalars)
    report = frame_bounds(w)
    spanning = project_onto(list(w)).rank == w.shape[1]
    if report.is_riesz_basis:
        label = "riesz_basis"
        note = "spanning with exactly dim vectors and positive lower bound"
    elif report.is_frame:
        label = "frame"
        note = "positive lower frame bound"
    elif spanning:
        label = "rescalable"
        note = "spans but the raw lower bound sits below tolerance; rescaling recommended"
    else:
        label = "non_spanning"
        note = "does not span; no rescaling can produce a frame"
    return Classification(
        label=label,
        report=report,
        spanning=spanning,
        rescaling_recommended=spanning and not report.is_frame,
        note=note,
    )


def spanning_projection(family: VectorFamily) -> Projection:
    """Projection onto the span of the family's vectors."""
    return project_onto(list(family.vectors))
