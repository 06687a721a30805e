"""Weighted-sum sampling pipeline built on binary selectors.

Given PSD operators T_n with small traces, positive weights c_n with
T = sum c_n T_n bounded, and a reference subspace M, the pipeline produces a
sampling function sigma (a multiset of original indices) such that

    -(eps/2) P_{M^perp} - 6 sqrt(gamma) I
        <=  2^{-beta} sum_{k} T_{sigma(k)} - T
        <=  (eps/2) P_{M^perp} + 6 sqrt(gamma) I,

with gamma the compressed trace of T on M, together with the exact
multiplicity certificate  #sigma^{-1}(n) <= 2^{beta+1} c_n.

Stages: exact dyadic decomposition of the weights, ceiling padding with
auxiliary operators, replication into index multisets, the same-first-index
pairing discipline, a collapsed selector search over replica counts, and a
trace-pigeonhole leaf choice.  All count arithmetic is rational-exact;
floats only enter through eigenvalue computations.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceededError, PreconditionError
from .linalg import NUMERIC_TOL, RANK_DROP_TOL, Projection, PsdOperator
from .selectors import ScaleExponent, natural_max_order, scale_exponent, selector_constant, PairPartition

__all__ = [
    "MAX_DYADIC_DEPTH",
    "REPLICA_BUDGET",
    "SANDWICH_TOL",
    "DyadicDecomposition",
    "PaddingSet",
    "SamplingFunction",
    "SamplingCertificate",
    "dyadic_decompose",
    "ceiling_pad",
    "build_index_sets",
    "paired_partition",
    "make_paddings",
    "padding_report",
    "sample",
]

MAX_DYADIC_DEPTH = 48
# Materialized replica multisets and search frontiers are capped here; the
# 2^eta growth is the pipeline's real cost and must fail loudly.
REPLICA_BUDGET = 2**22
SANDWICH_TOL = 1e-8


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    # binary floats convert exactly, so no precision is lost here
    return Fraction(float(value))


def _pow2(k: int) -> Fraction:
    return Fraction(2**k) if k >= 0 else Fraction(1, 2**-k)


def _floor_log2(fr: Fraction) -> int:
    """Largest k with 2^k <= fr, exact."""
    if fr <= 0:
        raise PreconditionError("log of a nonpositive rational")
    k = fr.numerator.bit_length() - fr.denominator.bit_length()
    while _pow2(k) > fr:
        k -= 1
    while _pow2(k + 1) <= fr:
        k += 1
    return k


@dataclass(frozen=True)
class DyadicDecomposition:
    """Greedy truncated binary expansion c = sum_j 2^(-e_j) + remainder."""

    target: Fraction
    exponents: tuple[int, ...]
    remainder: Fraction
    depth: int

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.exponents, self.exponents[1:])):
            raise PreconditionError("exponents must be strictly increasing")
        if self.remainder < 0:
            raise PreconditionError("negative remainder")
        if self.exponents and self.remainder >= _pow2(-self.exponents[-1]):
            raise PreconditionError("remainder not smaller than the last kept term")
        if self.truncated_sum + self.remainder != self.target:
            raise PreconditionError("terms and remainder do not sum to the target")

    @property
    def truncated_sum(self) -> Fraction:
        return sum((_pow2(-e) for e in self.exponents), Fraction(0))

    @property
    def terms(self) -> tuple[Fraction, ...]:
        return tuple(_pow2(-e) for e in self.exponents)

    def truncate(self, max_exponent: int) -> "DyadicDecomposition":
        """Drop terms finer than 2^(-max_exponent), folding them into the remainder."""
        kept = tuple(e for e in self.exponents if e <= max_exponent)
        dropped = sum((_pow2(-e) for e in self.exponents if e > max_exponent), Fraction(0))
        return DyadicDecomposition(
            target=self.target,
            exponents=kept,
            remainder=self.remainder + dropped,
            depth=len(kept),
        )


def dyadic_decompose(value, depth: int = MAX_DYADIC_DEPTH) -> DyadicDecomposition:
    """Exact greedy binary expansion of a positive rational, truncated at depth terms."""
    c = _as_fraction(value)
    if c <= 0:
        raise PreconditionError(f"value must be positive, got {c}")
    if depth < 1:
        raise PreconditionError(f"depth must be at least 1, got {depth}")
    exponents = []
    residual = c
    while residual > 0 and len(exponents) < depth:
        e = -_floor_log2(residual)
        exponents.append(e)
        residual -= _pow2(-e)
    return DyadicDecomposition(
        target=c, exponents=tuple(exponents), remainder=residual, depth=len(exponents)
    )


@dataclass(frozen=True)
class PaddingSet:
    """Exponents m_j filling a truncated sum up to its ceiling.

    base_sum + sum_j 2^(-m_j) equals ceil(base_sum) exactly; dyadic
    rationals make the identity checkable in exact arithmetic.
    """

    exponents: tuple[int, ...]
    base_sum: Fraction

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.exponents, self.exponents[1:])):
            raise PreconditionError("pad exponents must be strictly increasing")
        if self.base_sum + self.gap != math.ceil(self.base_sum):
            raise PreconditionError("padding does not reach the ceiling exactly")

    @property
    def gap(self) -> Fraction:
        return sum((_pow2(-e) for e in self.exponents), Fraction(0))

    @property
    def total(self) -> int:
        return math.ceil(self.base_sum)


def ceiling_pad(decomposition: DyadicDecomposition) -> PaddingSet:
    """Binary expansion of ceil(s) - s for the truncated sum s."""
    s = decomposition.truncated_sum
    gap = Fraction(math.ceil(s)) - s
    if gap == 0:
        return PaddingSet(exponents=(), base_sum=s)
    if gap.denominator & (gap.denominator - 1):
        raise PreconditionError("truncated sum is not dyadic; cannot pad exactly")
    exponents = []
    residual = gap
    while residual > 0:
        e = -_floor_log2(residual)
        exponents.append(e)
        residual -= _pow2(-e)
    return PaddingSet(exponents=tuple(exponents), base_sum=s)


def build_index_sets(weights, decomps, pads, eta: int):
    """Replicated index multisets (I1, I2) at scale 2^(-eta).

    Each kept term 2^(-e) of weight n becomes 2^(eta-e) replicas (n, i) in
    I1; padding exponents populate I2 the same way.  Indices n and copy
    numbers i are 0-based.
    """
    if len(weights) != len(decomps) or len(decomps) != len(pads):
        raise PreconditionError("weights, decompositions and paddings differ in length")
    exps = [e for d in decomps for e in d.exponents] + [e for p in pads for e in p.exponents]
    if exps and eta < max(exps):
        raise PreconditionError(
            f"eta={eta} is smaller than the finest exponent {max(exps)}"
        )
    op_counts = [sum(2 ** (eta - e) for e in d.exponents) for d in decomps]
    pad_counts = [sum(2 ** (eta - e) for e in p.exponents) for p in pads]
    for n, (count, c) in enumerate(zip(op_counts, weights)):
        if count > 2**eta * _as_fraction(c):
            raise PreconditionError(f"replica count for index {n} exceeds 2^eta c_n")
    total = sum(op_counts) + sum(pad_counts)
    if total > REPLICA_BUDGET:
        raise BudgetExceededError(
            f"{total} replicas exceed the budget {REPLICA_BUDGET}; eta={eta} is too deep"
        )
    ones = [(n, i) for n, count in enumerate(op_counts) for i in range(count)]
    twos = [(n, i) for n, count in enumerate(pad_counts) for i in range(count)]
    return ones, twos


def paired_partition(ones, twos, seed: int = 0) -> PairPartition:
    """Pair replicas by the same-first-index discipline.

    I1 replicas sharing an index pair among themselves first; each leftover
    joins a padding replica (same index preferred, then seeded); leftover
    padding replicas pair same-index first and the rest adjacently after a
    seeded shuffle.  Elements are tagged ("op", n, i) / ("pad", n, i) so the
    two multisets stay distinguishable inside one partition.
    """
    if (len(ones) + len(twos)) % 2:
        raise PreconditionError("total replica count must be even")
    rng = np.random.default_rng(seed)
    by_index: dict[int, list] = {}
    for n, i in sorted(ones):
        by_index.setdefault(n, []).append(("op", n, i))
    pad_pool: dict[int, list] = {}
    for n, i in sorted(twos):
        pad_pool.setdefault(n, []).append(("pad", n, i))

    pairs = []
    leftover_ops = []
    for n in sorted(by_index):
        group = by_index[n]
        for k in range(0, len(group) - 1, 2):
            pairs.append((group[k], group[k + 1]))
        if len(group) % 2:
            leftover_ops.append(group[-1])

    unmatched = []
    for elem in leftover_ops:
        n = elem[1]
        if pad_pool.get(n):
            pairs.append((elem, pad_pool[n].pop(0)))
            continue
        candidates = sorted(k for k, v in pad_pool.items() if v)
        if candidates:
            pick = candidates[int(rng.integers(len(candidates)))]
            pairs.append((elem, pad_pool[pick].pop(0)))
        else:
            unmatched.append(elem)
    # no padding left: remaining odd-index replicas pair among themselves
    for k in range(0, len(unmatched), 2):
        pairs.append((unmatched[k], unmatched[k + 1]))

    tail = []
    for n in sorted(pad_pool):
        group = pad_pool[n]
        for k in range(0, len(group) - 1, 2):
            pairs.append((group[k], group[k + 1]))
        if len(group) % 2:
            tail.append(group[-1])
    order = rng.permutation(len(tail))
    shuffled = [tail[int(j)] for j in order]
    for k in range(0, len(shuffled), 2):
        pairs.append((shuffled[k], shuffled[k + 1]))

    indices = tuple(i for pair in pairs for i in pair)
    return PairPartition(indices=indices, pairs=tuple(pairs))


def make_paddings(ops, subspace: Projection, epsilon: float, beta: int):
    """Default padding operators: scaled projections onto each span(T_n).

    Traces are capped at min(2^(-beta+2) * epsilon, max operator trace) and
    the family is rescaled uniformly so its plain sum stays below I/2.  The
    caps have no lower bounds, so shrinking (even to zero) is always safe;
    the caller may rescale further against its compressed-trace budget.
    """
    psd = [op if isinstance(op, PsdOperator) else PsdOperator(op) for op in ops]
    if not psd:
        return []
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    max_trace = max(p.trace for p in psd)
    target = min(2.0 ** (-beta + 2) * epsilon, max_trace)
    if target <= 0:
        return [PsdOperator.zero(psd[0].dim) for _ in psd]
    mats = []
    for p in psd:
        vals, vecs = np.linalg.eigh(p.matrix)
        scale = float(vals[-1]) if vals.size else 0.0
        keep = vals > RANK_DROP_TOL * max(scale, 1e-300)
        rank = int(np.count_nonzero(keep))
        if rank == 0:
            mats.append(np.zeros_like(p.matrix))
            continue
        basis = vecs[:, keep]
        mats.append((target / rank) * (basis @ basis.conj().T))
    total = sum(mats)
    top = float(np.max(np.linalg.eigvalsh((total + total.conj().T) / 2.0)))
    factor = 1.0
    if top > 0.5:
        factor = 0.5 / top * (1.0 - 1e-12)
    return [PsdOperator(factor * m) for m in mats]


def padding_report(ops, paddings, subspace: Projection, epsilon: float, beta: int, pad_weights=None):
    """Post-hoc check of the three padding conditions; returns diagnostics."""
    psd = [op if isinstance(op, PsdOperator) else PsdOperator(op) for op in ops]
    pads = [p if isinstance(p, PsdOperator) else PsdOperator(p) for p in paddings]
    if len(psd) != len(pads):
        raise PreconditionError("one padding operator per input operator is required")
    if pad_weights is None:
        pad_weights = [1.0] * len(pads)
    span_defect = 0.0
    for op, pad in zip(psd, pads):
        vals, vecs = np.linalg.eigh(op.matrix)
        scale = float(vals[-1]) if vals.size else 0.0
        keep = vals > RANK_DROP_TOL * max(scale, 1e-300)
        basis = vecs[:, keep]
        residual = pad.matrix - basis @ (basis.conj().T @ pad.matrix)
        span_defect = max(span_defect, float(np.linalg.norm(residual)))
    weighted = sum(float(w) * p.matrix for w, p in zip(pad_weights, pads))
    top = float(np.max(np.linalg.eigvalsh((weighted + weighted.conj().T) / 2.0))) if len(pads) else 0.0
    trace_cap = 2.0 ** (-beta + 2) * epsilon
    worst_trace = max((p.trace for p in pads), default=0.0)
    tol = NUMERIC_TOL * max(1.0, trace_cap)
    return {
        "span_defect": span_defect,
        "span_ok": span_defect <= RANK_DROP_TOL,
        "weighted_sum_top": top,
        "sum_ok": top <= 0.5 + NUMERIC_TOL,
        "worst_trace": worst_trace,
        "trace_cap": trace_cap,
        "trace_ok": worst_trace <= trace_cap + tol,
    }


class SamplingFunction:
    """Finite multiset of selected indices, held as exact multiplicities.

    The domain I' and the map are materialized lazily; multiplicity is the
    authoritative representation (symbolic runs can be astronomically large).
    """

    def __init__(self, multiplicity: dict[int, int], source_count: int | None = None):
        clean = {}
        for n, count in multiplicity.items():
            n, count = int(n), int(count)
            if count < 0:
                raise PreconditionError(f"negative multiplicity for index {n}")
            if n < 0 or (source_count is not None and n >= source_count):
                raise PreconditionError(f"index {n} outside the source family")
            if count:
                clean[n] = count
        self._multiplicity = dict(sorted(clean.items()))
        self._total = sum(self._multiplicity.values())
        self._bounds = None

    @property
    def multiplicity(self) -> dict[int, int]:
        return dict(self._multiplicity)

    def __len__(self) -> int:
        return self._total

    @property
    def domain(self) -> range:
        return range(self._total)

    @property
    def mapping(self) -> tuple[int, ...]:
        if self._total > REPLICA_BUDGET:
            raise BudgetExceededError(
                f"mapping with {self._total} entries exceeds the materialization budget"
            )
        return tuple(n for n, count in self._multiplicity.items() for _ in range(count))

    def __call__(self, k: int) -> int:
        if not 0 <= k < self._total:
            raise PreconditionError(f"index {k} outside the domain of size {self._total}")
        if self._bounds is None:
            edges, order = [], []
            acc = 0
            for n, count in self._multiplicity.items():
                acc += count
                edges.append(acc)
                order.append(n)
            self._bounds = (edges, order)
        edges, order = self._bounds
        return order[bisect.bisect_right(edges, k)]

    def __repr__(self):
        return f"SamplingFunction(total={self._total}, indices={len(self._multiplicity)})"


@dataclass(frozen=True)
class SamplingCertificate:
    """Witness data for one pipeline run.

    sandwich_lo/hi are the extremal eigenvalues of the deviation after the
    (eps/2) off-subspace correction; both must stay within 6 sqrt(gamma).
    mult_ok records the exact rational comparison count_n <= 2^(beta+1) c_n.
    """

    beta: int
    window_empty: bool
    epsilon: float
    gamma: float
    trace_cap: float
    constant: float
    sandwich_lo: float
    sandwich_hi: float
    sandwich_bound: float
    sandwich_ok: bool
    mult_ok: bool
    pigeonhole_trace: float
    pigeonhole_cap: float
    levels: int
    replica_total: int
    tail_norm: float
    pad_scale: float


def _eig_range(mat: np.ndarray) -> tuple[float, float]:
    vals = np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)
    return float(vals[0]), float(vals[-1])


def _split_choices(state: dict, seed_unused=None):
    """One level of the pairing discipline on replica counts.

    state maps (kind, n) -> count with kind 0 for operators, 1 for pads.
    Returns (base, crosses): base counts go to both children; each cross
    pair contributes exactly one of its two types per child.
    """
    ops = {n: c for (kind, n), c in state.items() if kind == 0 and c}
    pads = {n: c for (kind, n), c in state.items() if kind == 1 and c}
    base = {}
    crosses = []
    for n, c in ops.items():
        if c // 2:
            base[(0, n)] = c // 2
    leftover = sorted(n for n, c in ops.items() if c % 2)
    remaining = dict(pads)
    unmatched = []
    for n in leftover:
        if remaining.get(n, 0) > 0:
            remaining[n] -= 1
            crosses.append(((0, n), (1, n)))
        else:
            avail = sorted((k for k, v in remaining.items() if v > 0), key=lambda k: (-remaining[k], k))
            if avail:
                pick = avail[0]
                remaining[pick] -= 1
                crosses.append(((0, n), (1, pick)))
            else:
                unmatched.append(n)
    for k in range(0, len(unmatched), 2):
        crosses.append(((0, unmatched[k]), (0, unmatched[k + 1])))
    pad_left = sorted(n for n, c in remaining.items() if c % 2)
    for n, c in remaining.items():
        if c // 2:
            base[(1, n)] = c // 2
    for k in range(0, len(pad_left), 2):
        crosses.append(((1, pad_left[k]), (1, pad_left[k + 1])))
    return base, crosses


def _child_state(base: dict, crosses, mask: int) -> tuple:
    child = dict(base)
    for i, (a, b) in enumerate(crosses):
        pick = a if (mask >> i) & 1 == 0 else b
        child[pick] = child.get(pick, 0) + 1
    return tuple(sorted(child.items()))


def sample(
    ops,
    weights,
    subspace: Projection,
    epsilon: float,
    paddings=None,
    *,
    trace_cap: float | None = None,
    total_cap: float = 0.5,
    constant: float | None = None,
    exponent: ScaleExponent | int | None = None,
    depth: int = MAX_DYADIC_DEPTH,
    seed: int = 0,
):
    """Run the full pipeline; returns (SamplingFunction, SamplingCertificate).

    The weighted sum must stay below total_cap * I (1/2 by default) and the
    compressed trace gamma on the subspace must not exceed 1.  Exponent and
    constant may be pinned by callers coordinating several runs; otherwise
    the selector-constant machinery picks them from the trace cap.
    """
    psd = [op if isinstance(op, PsdOperator) else PsdOperator(op) for op in ops]
    if not psd:
        raise PreconditionError("need at least one operator")
    dim = psd[0].dim
    if any(p.dim != dim for p in psd):
        raise PreconditionError("operators live in different dimensions")
    fracs = [_as_fraction(c) for c in weights]
    if len(fracs) != len(psd):
        raise PreconditionError("one weight per operator is required")
    if any(c <= 0 for c in fracs):
        raise PreconditionError("weights must be positive")
    if not isinstance(subspace, Projection):
        raise PreconditionError("subspace must be a Projection")
    if subspace.dim != dim:
        raise PreconditionError("subspace dimension mismatch")
    if not 0 < epsilon < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")

    mats = [p.matrix for p in psd]
    traces = [p.trace for p in psd]
    delta = float(trace_cap) if trace_cap is not None else max(traces)
    tol = NUMERIC_TOL * max(1.0, delta)
    if any(t > delta + tol for t in traces):
        raise PreconditionError(f"operator trace exceeds the cap {delta:.6g}")

    target = sum(float(c) * m for c, m in zip(fracs, mats))
    _, hi_t = _eig_range(target)
    if hi_t > total_cap + NUMERIC_TOL * max(1.0, hi_t):
        raise PreconditionError(
            f"weighted sum has top eigenvalue {hi_t:.6g} > {total_cap}"
        )
    proj = subspace.matrix
    proj_perp = subspace.complement().matrix
    gamma = float(np.real(np.trace(proj @ target @ proj)))
    gamma = max(gamma, 0.0)
    if gamma > 1.0 + NUMERIC_TOL:
        raise PreconditionError(f"compressed trace {gamma:.6g} exceeds 1")

    if constant is not None:
        big_c = float(constant)
    else:
        big_c = selector_constant(delta, natural_max_order(delta))
    if exponent is None:
        se = scale_exponent(epsilon, big_c, delta)
    elif isinstance(exponent, ScaleExponent):
        se = exponent
    else:
        se = ScaleExponent(value=int(exponent), window_empty=(int(exponent) == 0))
    beta = se.value

    # truncation: coarsest uniform exponent cutoff whose discarded tail
    # stays below min(eps/2, gamma); cost scales with the finest kept level
    full = [dyadic_decompose(c, depth) for c in fracs]
    tail_cap = min(epsilon / 2.0, gamma)
    cut_candidates = sorted({e for d in full for e in d.exponents})
    truncated = None
    tail_norm = 0.0
    for cut in cut_candidates or [0]:
        cand = [d.truncate(cut) for d in full]
        residual = sum(float(d.remainder) * m for d, m in zip(cand, mats))
        _, worst = _eig_range(residual)
        if worst <= tail_cap + NUMERIC_TOL:
            truncated = cand
            tail_norm = max(worst, 0.0)
            break
    if truncated is None:
        raise PreconditionError(
            "discarded dyadic tail exceeds min(epsilon/2, gamma) at every depth; "
            "weights are too fine for this subspace"
        )

    pad_specs = [ceiling_pad(d) for d in truncated]
    if paddings is None:
        pad_ops = make_paddings(psd, subspace, epsilon, beta)
    else:
        pad_ops = [p if isinstance(p, PsdOperator) else PsdOperator(p) for p in paddings]
        if len(pad_ops) != len(psd):
            raise PreconditionError("one padding operator per input operator is required")

    # uniform shrink so pads respect the trace cap, the I/2 sum condition,
    # and a compressed-trace budget of gamma (keeps the pigeonhole honest)
    factor = 1.0
    worst_pad_trace = max((p.trace for p in pad_ops), default=0.0)
    if worst_pad_trace > delta:
        factor = min(factor, delta / worst_pad_trace * (1.0 - 1e-12))
    gaps = [float(spec.gap) for spec in pad_specs]
    weighted_pad = sum(g * p.matrix for g, p in zip(gaps, pad_ops))
    if len(pad_ops):
        _, pad_top = _eig_range(weighted_pad)
        if pad_top > 0.5:
            factor = min(factor, 0.5 / pad_top * (1.0 - 1e-12))
        compressed = float(np.real(np.trace(proj @ weighted_pad @ proj)))
        if compressed > gamma:
            factor = 0.0 if gamma <= 0 else min(factor, gamma / compressed * (1.0 - 1e-12))
    pad_mats = [factor * p.matrix for p in pad_ops]

    exps = [e for d in truncated for e in d.exponents] + [
        e for spec in pad_specs for e in spec.exponents
    ]
    eta = max(exps + [beta]) if exps else beta
    levels = eta - beta
    op_counts = [sum(2 ** (eta - e) for e in d.exponents) for d in truncated]
    pad_counts = [sum(2 ** (eta - e) for e in spec.exponents) for spec in pad_specs]
    q0 = sum(op_counts) + sum(pad_counts)
    assert q0 == 2**eta * sum(spec.total for spec in pad_specs)

    def leaf_stats(leaf_ops, leaf_pads):
        scale = 2.0**-beta
        dev = -target
        for n, count in enumerate(leaf_ops):
            if count:
                dev = dev + (scale * count) * mats[n]
        pig = dev + target  # scaled operator part
        pig_mat = pig + sum(
            (scale * count) * pad_mats[n] for n, count in enumerate(leaf_pads) if count
        )
        pig_trace = float(np.real(np.trace(proj @ pig_mat @ proj)))
        lo, _ = _eig_range(dev + (epsilon / 2.0) * proj_perp)
        _, hi = _eig_range(dev - (epsilon / 2.0) * proj_perp)
        return lo, hi, pig_trace

    mult_bound = 2 ** (beta + 1)

    def mult_check(leaf_ops) -> bool:
        return all(
            Fraction(count) <= mult_bound * c for count, c in zip(leaf_ops, fracs)
        )

    if levels == 0 or q0 == 0:
        chosen_ops, chosen_pads = op_counts, pad_counts
    else:
        if q0 > REPLICA_BUDGET:
            raise BudgetExceededError(
                f"{q0} replicas exceed the budget {REPLICA_BUDGET}; "
                f"eta={eta} with beta={beta} is too deep"
            )
        start = tuple(
            sorted(
                [((0, n), c) for n, c in enumerate(op_counts) if c]
                + [((1, n), c) for n, c in enumerate(pad_counts) if c]
            )
        )
        frontier = {start}
        for _ in range(levels):
            nxt = set()
            for state in frontier:
                base, crosses = _split_choices(dict(state))
                for mask in range(2 ** len(crosses)):
                    nxt.add(_child_state(base, crosses, mask))
                if len(nxt) > REPLICA_BUDGET:
                    raise BudgetExceededError(
                        "selector state frontier exceeds the search budget"
                    )
            frontier = nxt
        pig_cap = 2.0 * gamma + NUMERIC_TOL * max(1.0, 2.0 * gamma)
        best = None
        for state in sorted(frontier):
            leaf_ops = [0] * len(psd)
            leaf_pads = [0] * len(psd)
            for (kind, n), count in state:
                if kind == 0:
                    leaf_ops[n] = count
                else:
                    leaf_pads[n] = count
            lo, hi, pig = leaf_stats(leaf_ops, leaf_pads)
            if pig > pig_cap:
                continue
            excess = max(hi, -lo, 0.0)
            key = (not mult_check(leaf_ops), excess)
            if best is None or key < best[0]:
                best = (key, leaf_ops, leaf_pads)
        if best is None:
            raise PreconditionError(
                "no leaf satisfies the trace pigeonhole; inputs violate the "
                "average-trace argument"
            )
        chosen_ops, chosen_pads = best[1], best[2]

    lo, hi, pig_trace = leaf_stats(chosen_ops, chosen_pads)
    bound = 6.0 * math.sqrt(gamma)
    ok_tol = SANDWICH_TOL + NUMERIC_TOL * max(1.0, bound)
    sigma = SamplingFunction(
        {n: count for n, count in enumerate(chosen_ops) if count},
        source_count=len(psd),
    )
    certificate = SamplingCertificate(
        beta=beta,
        window_empty=se.window_empty,
        epsilon=float(epsilon),
        gamma=gamma,
        trace_cap=delta,
        constant=big_c,
        sandwich_lo=lo,
        sandwich_hi=hi,
        sandwich_bound=bound,
        sandwich_ok=(lo >= -(bound + ok_tol)) and (hi <= bound + ok_tol),
        mult_ok=mult_check(chosen_ops),
        pigeonhole_trace=pig_trace,
        pigeonhole_cap=2.0 * gamma,
        levels=levels,
        replica_total=q0,
        tail_norm=tail_norm,
        pad_scale=factor,
    )
    return sigma, certificate
