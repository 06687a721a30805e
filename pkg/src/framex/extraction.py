"""Block extraction of a frame-forming sub-multiset from a rescalable family.

Given scalars c_n that turn {c_n x_n} into a frame, the index range is split
into blocks whose energy, compressed onto a sliding pair of constructed
subspaces, is summable.  Every block is then sampled at a shared dyadic scale
and the selections are concatenated.  The normalized selection is again a
frame with explicit bounds, and the number of times any index is repeated is
capped by an explicit multiple of its rescaled energy |c_n|^2 ||x_n||^2.

The module also carries the equivalence operations between the different
ways of presenting a rescalable family (coefficient duals, collinearity
reduction, transposed reconstruction) plus a diagnostic for the rescaled
dual pairing whose lower bound is deliberately left unclaimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionMismatchError,
    NoAdmissibleExponentError,
    NotAFrameError,
    PreconditionError,
)
from .frames import VectorFamily, FrameReport, canonical_dual, frame_bounds
from .linalg import NUMERIC_TOL, RANK_DROP_TOL, Projection, rank_one
from .sampling import SANDWICH_TOL, SamplingCertificate, SamplingFunction, sample
from .selectors import (
    ScaleExponent,
    natural_max_order,
    scale_exponent,
    selector_constant,
)

__all__ = [
    "COLLINEARITY_TOL",
    "ENVELOPE_SLACK",
    "ExtractionPlan",
    "ExtractionResult",
    "SpanDistinctSelection",
    "plan",
    "extract",
    "equivalence_b_to_a",
    "equivalence_a_to_d",
    "equivalence_c_check",
    "paired_rescaling_diagnostic",
]

# two unit vectors with |<u, v>| above 1 - COLLINEARITY_TOL count as one ray
COLLINEARITY_TOL = 1e-8

# multiplicative slack on the verified output frame-bound envelope
ENVELOPE_SLACK = 1e-6

# the constant only enters through the exponent window, so any positive
# floor works; doubling from here terminates the consistency loop fast
_CONSTANT_FLOOR = 0.25

_PROBE_COUNT = 25

# weights within this distance of a coarse dyadic rational are snapped to it
_SNAP_TOL = 1e-12


def _threshold(j: int, epsilon: float) -> float:
    """Block threshold: 0 at j = 0, then (epsilon^2 / 36) 4^-j."""
    if j <= 0:
        return 0.0
    return float(Fraction(1, 36 * 4**j)) * epsilon * epsilon


def _resolve_constants(lower: float, upper: float):
    """Pick (constant, epsilon, exponent) consistently for trace cap 1/B.

    epsilon = min(A/3B, sqrt(B)/2C) depends on C, and the admissible
    exponent window depends on both.  Doubling C shrinks the window ratio
    on either branch of the min, so the loop terminates.
    """
    delta = 1.0 / upper
    c = max(selector_constant(delta, natural_max_order(delta)), _CONSTANT_FLOOR)
    for _ in range(64):
        epsilon = min(lower / (3.0 * upper), math.sqrt(upper) / (2.0 * c))
        try:
            return c, epsilon, scale_exponent(epsilon, c, delta)
        except NoAdmissibleExponentError:
            c *= 2.0
    raise PreconditionError("no self-consistent selector constant found")


def _extend_span(cols: list, candidates, dtype) -> list:
    """Orthonormal residuals of candidates against cols, appended in place.

    Two orthogonalization passes per vector; residuals below RANK_DROP_TOL
    are dropped (candidates are unit vectors, so the threshold is absolute).
    """
    added = []
    for v in candidates:
        w = np.array(v, dtype=dtype)
        for _ in range(2):
            for q in cols:
                w = w - q * np.vdot(q, w)
        size = float(np.linalg.norm(w))
        if size > RANK_DROP_TOL:
            w = w / size
            cols.append(w)
            added.append(w)
    return added


def _as_projection(cols: list, dim: int, dtype) -> Projection:
    if not cols:
        return Projection(np.zeros((dim, 0), dtype=dtype))
    return Projection(np.stack(cols, axis=1))


@dataclass(frozen=True, eq=False)
class ExtractionPlan:
    """Block decomposition with the subspaces driving every sampling call.

    blocks are half-open 0-based intervals partitioning the index range;
    the final block is empty and only closes the projection identity.
    subspaces holds the constructed chain (first entry the zero subspace),
    block_subspaces the per-block reference subspace each sampler avoids.
    """

    blocks: tuple
    subspaces: tuple
    block_subspaces: tuple
    thresholds: tuple
    gammas: tuple
    epsilon: float
    beta: int
    window_empty: bool
    constant: float
    trace_cap: float
    lower: float
    upper: float
    identity_defect: float

    def __post_init__(self):
        if len(self.subspaces) != len(self.blocks) + 1:
            raise PreconditionError("need one more chain subspace than blocks")
        if len(self.block_subspaces) != len(self.blocks):
            raise PreconditionError("one reference subspace per block is required")
        if len(self.thresholds) != len(self.blocks) or len(self.gammas) != len(self.blocks):
            raise PreconditionError("thresholds and gammas must align with blocks")
        prev = 0
        for start, end in self.blocks:
            if start != prev or end < start:
                raise PreconditionError("blocks must tile the index range in order")
            prev = end
        if not 0 < self.epsilon < 1:
            raise PreconditionError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.beta < 0:
            raise PreconditionError(f"negative exponent {self.beta}")


@dataclass(frozen=True, eq=False)
class ExtractionResult:
    """Selection, its normalized family, and every audited quantity."""

    sigma: SamplingFunction
    normalized: VectorFamily
    report: FrameReport
    mult_bound_L: float
    mult_ok: bool
    plan: ExtractionPlan
    certificates: tuple
    total_deviation: float
    deviation_cap: float
    envelope: tuple


def _family_data(family):
    fam = family if isinstance(family, VectorFamily) else VectorFamily(family)
    norms = fam.norms()
    if fam.scalars is None:
        scal = np.ones(len(fam))
    else:
        scal = fam.scalars
    weights = (np.abs(scal) ** 2) * norms**2
    units = np.array(fam.vectors, copy=True)
    active = weights > 0
    units[~active] = 0.0
    units[active] = units[active] / norms[active, None]
    return fam, weights, units, active


def _snap_weight(value: float, beta: int) -> Fraction:
    """Dyadic rational for a sampling weight.

    Rescaled energies are often integers or coarse dyadics up to float
    rounding, and rounding just below such a value produces a maximally
    deep binary expansion whose replica count explodes.  Snapping to the
    grid 2^-beta (when the value sits within _SNAP_TOL of it) keeps the
    finest exponent at beta and the replica count at its natural size.
    Values genuinely off the grid pass through exactly.
    """
    exact = Fraction(value)
    q = 2 ** min(max(beta, 0), 40)
    cand = Fraction(round(exact * q), q)
    if cand > 0 and abs(cand - exact) <= _SNAP_TOL * max(1.0, value):
        return cand
    return exact


def plan(family, lower: float, upper: float) -> ExtractionPlan:
    """Split the index range into blocks with summable compressed energy.

    The chain subspace after step j is spanned by the residuals of the first
    K_j directions; the next boundary is the smallest index whose weighted
    tail, compressed onto the chain built so far, drops below the block
    threshold.  A trailing empty block closes the two-cover identity
    sum_j (projection onto the j-th pair of chain subspaces) = 2 Id on the
    constructed span.  If a block's own compressed energy ever exceeds its
    threshold the offending boundary is advanced and the plan is rebuilt.
    """
    a, b = float(lower), float(upper)
    if not 0 < a <= b:
        raise NotAFrameError(f"need frame bounds 0 < A <= B, got A={a:.6g}, B={b:.6g}")
    fam, weights, units, active = _family_data(family)
    count, dim = len(fam), fam.dim
    dtype = units.dtype

    constant, epsilon, se = _resolve_constants(a, b)

    forced: dict[int, int] = {}
    for _ in range(max(16, 2 * count)):
        boundaries = [0, 1]
        cols: list = []
        chain = [Projection.zero(dim)]
        while True:
            top = boundaries[-1]
            members = [units[n] for n in range(top) if active[n]]
            added = _extend_span(cols, members, dtype)
            chain.append(_as_projection(added, dim, dtype))
            if top >= count:
                break
            level = len(boundaries)
            cap = _threshold(level, epsilon)
            basis = np.stack(cols, axis=1) if cols else np.zeros((dim, 0), dtype=dtype)
            pressed = np.abs(units @ basis.conj()) ** 2
            tail_terms = weights * pressed.sum(axis=1) / b
            nxt = count
            for k in range(top + 1, count + 1):
                if float(tail_terms[k:].sum()) <= cap:
                    nxt = k
                    break
            nxt = min(max(nxt, forced.get(level, 0)), count)
            boundaries.append(nxt)
        # one empty block re-counts the last chain subspace; afterwards the
        # residual span must be exhausted
        leftovers = _extend_span(cols, [units[n] for n in range(count) if active[n]], dtype)
        chain.append(_as_projection(leftovers, dim, dtype))
        boundaries.append(count)

        blocks = [(boundaries[j], boundaries[j + 1]) for j in range(len(boundaries) - 1)]
        pair_projs = []
        references = []
        for j in range(len(blocks)):
            pair_cols = [chain[j].basis[:, i] for i in range(chain[j].rank)]
            pair_cols += [chain[j + 1].basis[:, i] for i in range(chain[j + 1].rank)]
            pair = _as_projection(pair_cols, dim, dtype)
            pair_projs.append(pair)
            references.append(pair.complement())

        gammas = []
        violation = None
        for j, (start, end) in enumerate(blocks):
            ref = references[j].matrix
            total = 0.0
            for n in range(start, end):
                if active[n]:
                    press = float(np.real(np.vdot(units[n], ref @ units[n])))
                    total += weights[n] * max(press, 0.0) / b
            gammas.append(total)
            cap = _threshold(j, epsilon)
            if total > cap * (1.0 + 1e-9) + 1e-12 and violation is None:
                violation = j
        if violation is not None:
            level = violation + 1
            if level < 2 or boundaries[level] >= count:
                raise PreconditionError(
                    f"block {violation} energy {gammas[violation]:.3e} exceeds its "
                    "threshold and the boundary cannot be advanced"
                )
            forced[level] = boundaries[level] + 1
            continue

        span_proj = _as_projection(cols, dim, dtype).matrix
        cover = sum(p.matrix for p in pair_projs) - 2.0 * span_proj
        defect = float(np.max(np.abs(np.linalg.eigvalsh((cover + cover.conj().T) / 2.0))))
        return ExtractionPlan(
            blocks=tuple(blocks),
            subspaces=tuple(chain),
            block_subspaces=tuple(references),
            thresholds=tuple(_threshold(j, epsilon) for j in range(len(blocks))),
            gammas=tuple(gammas),
            epsilon=epsilon,
            beta=se.value,
            window_empty=se.window_empty,
            constant=constant,
            trace_cap=1.0 / b,
            lower=a,
            upper=b,
            identity_defect=defect,
        )
    raise PreconditionError("block thresholds kept failing after boundary advancement")


def extract(family, *, seed: int = 0) -> ExtractionResult:
    """Select a multiset of indices whose normalized vectors form a frame.

    Output frame bounds land inside [2^beta A/3, 3 2^beta B] up to
    ENVELOPE_SLACK, and each index n repeats at most
    max(144 C^2 B/A^2, 64 C^4/B^2) |c_n|^2 ||x_n||^2 times; the comparison
    is exact in rational arithmetic.
    """
    fam, weights, units, active = _family_data(family)
    use_scalars = fam.scalars is not None
    report_in = frame_bounds(fam, use_scalars=use_scalars)
    if not report_in.is_frame:
        raise NotAFrameError("extraction needs the rescaled family to be a frame")
    a, b = report_in.lower, report_in.upper
    layout = plan(fam, a, b)
    count = len(fam)
    root_b = math.sqrt(b)
    ops = {n: rank_one(units[n] / root_b) for n in range(count) if active[n]}

    mult: dict[int, int] = {}
    certificates: list = []
    for j, (start, end) in enumerate(layout.blocks):
        members = [n for n in range(start, end) if active[n]]
        if not members:
            certificates.append(None)
            continue
        chosen, cert = sample(
            [ops[n] for n in members],
            [_snap_weight(float(weights[n]), layout.beta) for n in members],
            layout.block_subspaces[j],
            layout.epsilon,
            trace_cap=layout.trace_cap,
            total_cap=1.0,
            constant=layout.constant,
            exponent=ScaleExponent(value=layout.beta, window_empty=layout.window_empty),
            seed=seed + j,
        )
        if not cert.sandwich_ok:
            raise PreconditionError(
                f"block {j} deviation ({cert.sandwich_lo:.3e}, {cert.sandwich_hi:.3e}) "
                f"escaped its bound {cert.sandwich_bound:.3e}"
            )
        for local, times in chosen.multiplicity.items():
            n = members[local]
            mult[n] = mult.get(n, 0) + times
        certificates.append(cert)

    sigma = SamplingFunction(mult, source_count=count)
    if len(sigma) == 0:
        raise NotAFrameError("sampling selected nothing; the input cannot span")
    support = sorted(sigma.multiplicity)
    normalized = VectorFamily(
        np.stack([units[n] for n in support]),
        scalars=np.sqrt([float(sigma.multiplicity[n]) for n in support]),
        labels=support,
    )
    out_report = frame_bounds(normalized, use_scalars=True)
    scale = 2.0**layout.beta
    envelope = (scale * a / 3.0, 3.0 * scale * b)
    if not out_report.is_frame:
        raise NotAFrameError("selected multiset does not span")
    if (
        out_report.lower < envelope[0] * (1.0 - ENVELOPE_SLACK)
        or out_report.upper > envelope[1] * (1.0 + ENVELOPE_SLACK)
    ):
        raise PreconditionError(
            f"output bounds [{out_report.lower:.6g}, {out_report.upper:.6g}] escape "
            f"the envelope [{envelope[0]:.6g}, {envelope[1]:.6g}]"
        )

    target = sum(weights[n] * ops[n].matrix for n in ops)
    achieved = sum((mult[n] / scale) * ops[n].matrix for n in mult) - target
    eig = np.linalg.eigvalsh((achieved + achieved.conj().T) / 2.0)
    total_deviation = float(np.max(np.abs(eig)))
    deviation_cap = 2.0 * layout.epsilon
    if total_deviation > deviation_cap + SANDWICH_TOL:
        raise PreconditionError(
            f"stacked deviation {total_deviation:.6g} exceeds {deviation_cap:.6g}"
        )

    c = layout.constant
    bound_l = max(144.0 * c * c * b / (a * a), 64.0 * c**4 / (b * b))
    frac_l = Fraction(bound_l)
    mult_ok = all(
        Fraction(times) <= frac_l * Fraction(float(weights[n]))
        for n, times in sigma.multiplicity.items()
    )
    return ExtractionResult(
        sigma=sigma,
        normalized=normalized,
        report=out_report,
        mult_bound_L=bound_l,
        mult_ok=mult_ok,
        plan=layout,
        certificates=tuple(certificates),
        total_deviation=total_deviation,
        deviation_cap=deviation_cap,
        envelope=envelope,
    )


def _unit_probes(rng, count: int, dim: int, complex_field: bool) -> np.ndarray:
    p = rng.standard_normal((count, dim))
    if complex_field:
        p = p + 1j * rng.standard_normal((count, dim))
    return p / np.linalg.norm(p, axis=1)[:, None]


def equivalence_b_to_a(family, scalars=None, *, probes: int = _PROBE_COUNT, seed: int = 0):
    """Coefficient duals of a rescaled frame: conj(c_n) times the dual of c_n x_n.

    The returned family reproduces x = sum <x, out_n> x_n; the identity is
    verified on seeded random probes before returning.
    """
    fam = family if isinstance(family, VectorFamily) else VectorFamily(family)
    if scalars is not None:
        fam = VectorFamily(fam.vectors, scalars=scalars, labels=fam.labels)
    duals = canonical_dual(fam, use_scalars=True)
    if fam.scalars is None:
        scal = np.ones(len(fam), dtype=fam.vectors.dtype)
    else:
        scal = fam.scalars
    out = VectorFamily(np.conj(scal)[:, None] * duals.vectors, labels=fam.labels)

    report = frame_bounds(fam, use_scalars=True)
    tol = NUMERIC_TOL * (1.0 + report.upper / report.lower)
    rng = np.random.default_rng(seed)
    w, o = fam.vectors, out.vectors
    for x in _unit_probes(rng, probes, fam.dim, fam.field == "complex"):
        back = w.T @ (o.conj() @ x)
        if float(np.linalg.norm(back - x)) > tol:
            raise PreconditionError("coefficient duals failed probe reconstruction")
    return out


def equivalence_c_check(family, duals, *, probes: int = _PROBE_COUNT, seed: int = 0) -> bool:
    """Probe the transposed reconstruction x = sum <x, x_n> y_n."""
    fam = family if isinstance(family, VectorFamily) else VectorFamily(family)
    other = duals if isinstance(duals, VectorFamily) else VectorFamily(duals)
    if len(fam) != len(other):
        raise DimensionMismatchError(f"{len(fam)} vectors against {len(other)} duals")
    if fam.dim != other.dim:
        raise DimensionMismatchError(f"dim {fam.dim} against dual dim {other.dim}")
    w, y = fam.vectors, other.vectors
    synth = y.T @ w.conj()
    tol = NUMERIC_TOL * max(1.0, float(np.linalg.norm(synth, 2)))
    rng = np.random.default_rng(seed)
    complex_field = fam.field == "complex" or other.field == "complex"
    worst = 0.0
    for x in _unit_probes(rng, probes, fam.dim, complex_field):
        worst = max(worst, float(np.linalg.norm(synth @ x - x)))
    return worst < tol


@dataclass(frozen=True, eq=False)
class SpanDistinctSelection:
    """Pairwise non-collinear indices whose normalized family is a frame."""

    indices: tuple
    representatives: tuple
    classes: tuple
    class_weights: tuple
    extraction: ExtractionResult


def equivalence_a_to_d(family, *, seed: int = 0) -> SpanDistinctSelection:
    """Reduce collinear rays to representatives, then extract among them.

    Members of one ray are rescaled to unit length, so a ray's combined
    weight is its cardinality; that weight never exceeds the upper bound of
    the normalized family (checked), which keeps the per-index multiplicity
    cap meaningful after extraction.
    """
    fam = family if isinstance(family, VectorFamily) else VectorFamily(family)
    norms = fam.norms()
    alive = [n for n in range(len(fam)) if norms[n] > 0]
    if not alive:
        raise NotAFrameError("all vectors vanish; the family cannot span")
    units = {n: fam.vectors[n] / norms[n] for n in alive}
    span_rank = len(_extend_span([], [units[n] for n in alive], fam.vectors.dtype))
    if span_rank < fam.dim:
        raise NotAFrameError(
            f"family spans only {span_rank} of {fam.dim} dimensions; no rescaling helps"
        )

    representatives: list = []
    classes: list = []
    for n in alive:
        for k, rep in enumerate(representatives):
            if abs(complex(np.vdot(units[rep], units[n]))) >= 1.0 - COLLINEARITY_TOL:
                classes[k].append(n)
                break
        else:
            representatives.append(n)
            classes.append([n])

    class_weights = [float(len(cls)) for cls in classes]
    normalized_all = VectorFamily(np.stack([units[n] for n in alive]))
    upper = frame_bounds(normalized_all).upper
    for k, g in enumerate(class_weights):
        if g > upper * (1.0 + NUMERIC_TOL):
            raise PreconditionError(
                f"ray {k} carries weight {g} above the Bessel bound {upper:.6g}"
            )

    rep_family = VectorFamily(
        np.stack([fam.vectors[n] for n in representatives]),
        scalars=[math.sqrt(g) / norms[n] for g, n in zip(class_weights, representatives)],
        labels=representatives,
    )
    result = extract(rep_family, seed=seed)
    chosen = tuple(representatives[k] for k in sorted(result.sigma.multiplicity))
    for i, n in enumerate(chosen):
        for m in chosen[:i]:
            overlap = abs(complex(np.vdot(units[n], units[m])))
            if overlap > 1.0 - COLLINEARITY_TOL:
                raise PreconditionError(
                    f"selected indices {m} and {n} are collinear (overlap {overlap:.12f})"
                )
    return SpanDistinctSelection(
        indices=chosen,
        representatives=tuple(representatives),
        classes=tuple(tuple(cls) for cls in classes),
        class_weights=tuple(class_weights),
        extraction=result,
    )


def paired_rescaling_diagnostic(family, scalars=None, indices=None) -> dict:
    """Bounds of {||x_n|| y_n} over a subset, with only the upper one claimed.

    y_n is the canonical dual of the rescaled family.  The upper bound is a
    certified Bessel constant; the lower value is reported as observed data
    and no frame claim is attached to it.
    """
    fam = family if isinstance(family, VectorFamily) else VectorFamily(family)
    if scalars is not None:
        fam = VectorFamily(fam.vectors, scalars=scalars, labels=fam.labels)
    duals = canonical_dual(fam, use_scalars=True)
    norms = fam.norms()
    if indices is None:
        subset = [n for n in range(len(fam)) if norms[n] > 0]
    else:
        subset = [int(n) for n in indices]
        for n in subset:
            if not 0 <= n < len(fam):
                raise PreconditionError(f"index {n} outside the family")
            if norms[n] <= 0:
                raise PreconditionError(f"index {n} has a zero vector")
    if not subset:
        raise PreconditionError("empty subset")
    paired = VectorFamily(norms[subset][:, None] * duals.vectors[subset], labels=subset)
    report = frame_bounds(paired)
    return {
        "indices": tuple(subset),
        "bessel_bound": report.upper,
        "observed_lower": report.lower,
        "lower_bound_claimed": False,
    }
