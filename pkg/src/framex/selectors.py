"""Binary selector machinery for splitting PSD operator sums.

Given operators T_n with small traces and sum T <= I, an order-N selector
tree repeatedly partitions the index set into pairs and keeps one element of
each pair per branch.  Every leaf b then satisfies

    || 2^N * sum_{n in I_b} T_n  -  T ||  <=  C * sqrt(2^N * delta),

where delta caps the traces and C comes from the recursion

    B_0 = 1,   B_{j+1} = B_j + 4 * sqrt(2^j * delta * B_j) + 2^{j+1} * delta.

The existence statement is non-constructive; search is the honest stand-in.
Exhaustive search guarantees the optimum over the induced pairing, greedy
and randomized descent trade quality for speed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, NoAdmissibleExponentError, PreconditionError
from .linalg import NUMERIC_TOL, PsdOperator

__all__ = [
    "EXHAUSTIVE_LIMIT",
    "RANDOM_RESTARTS",
    "ScaleExponent",
    "PairPartition",
    "SelectorCell",
    "SelectorTree",
    "SelectorCertificate",
    "selector_constant",
    "natural_max_order",
    "certificate_constant",
    "scale_exponent",
    "descending_trace_pairs",
    "enumerate_selectors",
    "best_selector",
    "verify_certificate",
]

# Exhaustive search only below this total selector count; otherwise the
# caller falls back to seeded randomized restarts.
EXHAUSTIVE_LIMIT = 2**20
RANDOM_RESTARTS = 1024
_EXPONENT_SCAN = 64


def selector_constant(trace_cap: float, max_order: int) -> float:
    """C = max over 1 <= N <= max_order of [sum_{j<N} (B_j - 1)] / sqrt(2^N * delta).

    Requires 2^max_order * trace_cap < 1 when max_order >= 1.  With
    max_order <= 0 the maximum is empty and 0.0 is returned.
    """
    delta = float(trace_cap)
    if delta <= 0:
        raise PreconditionError(f"trace cap must be positive, got {delta}")
    if max_order <= 0:
        return 0.0
    if 2**max_order * delta >= 1:
        raise PreconditionError(
            f"2^{max_order} * {delta} >= 1: the recursion only applies below that threshold"
        )
    b = 1.0
    partial = 0.0  # sum of (B_j - 1) for j < N
    best = 0.0
    for n in range(1, max_order + 1):
        # partial currently covers j = 0 .. n-2; add j = n-1
        if n >= 2:
            partial += b - 1.0
        best = max(best, partial / math.sqrt(2**n * delta))
        b = b + 4.0 * math.sqrt(2 ** (n - 1) * delta * b) + 2**n * delta
    return best


def natural_max_order(trace_cap: float) -> int:
    """Largest N >= 1 with 2^N * trace_cap < 1, or 0 when none exists."""
    delta = float(trace_cap)
    if delta <= 0:
        raise PreconditionError(f"trace cap must be positive, got {delta}")
    n = 0
    while 2 ** (n + 1) * delta < 1 and n + 1 <= _EXPONENT_SCAN:
        n += 1
    return n


def certificate_constant(trace_cap: float, order: int) -> float:
    """Constant used when certifying an order-N tree.

    Outside the recursion's range (2^N * delta >= 1) the max over admissible
    orders is used instead; with no admissible order at all the constant is 0
    and the bound is vacuous, which only exact-deviation instances meet.
    """
    usable = min(order, natural_max_order(trace_cap))
    return selector_constant(trace_cap, usable)


@dataclass(frozen=True)
class ScaleExponent:
    """Integer exponent beta with 1 < 2^beta * eps^2 / (4 C^2 delta) <= 2.

    window_empty marks the convention case: the ratio already exceeds 1 at
    beta = 0, so no positive exponent fits and beta = 0 is reported.
    """

    value: int
    window_empty: bool

    def __int__(self) -> int:
        return self.value


def scale_exponent(epsilon: float, constant: float, trace_cap: float) -> ScaleExponent:
    """Scan beta in {0..64} for the defining double inequality."""
    eps = float(epsilon)
    c = float(constant)
    delta = float(trace_cap)
    if not 0 < eps < 1:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {eps}")
    if delta <= 0:
        raise PreconditionError(f"trace cap must be positive, got {delta}")
    if c <= 0:
        raise NoAdmissibleExponentError(
            "selector constant is zero: the exponent window is empty at every scale"
        )
    ratio = eps * eps / (4.0 * c * c * delta)
    if ratio > 2.0:
        raise NoAdmissibleExponentError(
            f"epsilon^2 / (4 C^2 delta) = {ratio:.6g} > 2: no admissible exponent exists"
        )
    for beta in range(_EXPONENT_SCAN + 1):
        scaled = 2**beta * ratio
        if 1.0 < scaled <= 2.0:
            return ScaleExponent(value=beta, window_empty=(beta == 0))
        if scaled > 2.0:
            break
    raise NoAdmissibleExponentError(
        f"no exponent in 0..{_EXPONENT_SCAN} satisfies the window for ratio {ratio:.6g}"
    )


@dataclass(frozen=True)
class PairPartition:
    """A cell of indices partitioned into disjoint pairs covering the cell."""

    indices: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = [i for pair in self.pairs for i in pair]
        if len(seen) != len(set(seen)):
            raise PreconditionError("pairs overlap")
        if set(seen) != set(self.indices) or len(self.indices) != len(seen):
            raise PreconditionError("pairs do not cover the cell exactly")
        for a, b in self.pairs:
            if a == b:
                raise PreconditionError(f"degenerate pair ({a}, {b})")


def descending_trace_pairs(ids, traces, pad_ids=None) -> PairPartition:
    """Pair adjacent elements after sorting by descending trace.

    Synthetic pad indices (negative) carry zero trace and sort last.  When
    the cell is odd a fresh pad id is appended; pass pad_ids, an iterator of
    unused negative ints, to control the labels.
    """
    ids = list(ids)
    if pad_ids is None:
        floor = min([0] + [i for i in ids if i < 0])
        pad_ids = itertools.count(floor - 1, -1)
    if len(ids) % 2:
        ids.append(next(pad_ids))

    def trace_of(i):
        if i < 0:
            return 0.0
        return traces[i] if not isinstance(traces, dict) else traces.get(i, 0.0)

    ordered = sorted(ids, key=lambda i: (-trace_of(i), i < 0, i))
    pairs = tuple((ordered[k], ordered[k + 1]) for k in range(0, len(ordered), 2))
    return PairPartition(indices=tuple(ordered), pairs=pairs)


def enumerate_selectors(partition: PairPartition):
    """Yield every (I_0, I_1) selector of a pair partition, deterministically.

    Selector k's bit i decides which element of pair i lands in I_0; I_1
    always receives the complementary elements.
    """
    pairs = partition.pairs
    for mask in range(2 ** len(pairs)):
        left = tuple(pair[(mask >> i) & 1] for i, pair in enumerate(pairs))
        right = tuple(pair[1 - ((mask >> i) & 1)] for i, pair in enumerate(pairs))
        yield left, right


@dataclass
class SelectorCell:
    """One node of a selector tree; leaves carry no partition."""

    indices: tuple[int, ...]
    partition: PairPartition | None = None
    sides: tuple[int, ...] | None = None
    children: tuple["SelectorCell", "SelectorCell"] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None


@dataclass
class SelectorTree:
    """Order-N selector tree over operator indices (pads are negative)."""

    order: int
    root: SelectorCell

    def raw_leaves(self) -> dict[str, tuple[int, ...]]:
        out: dict[str, tuple[int, ...]] = {}

        def walk(cell: SelectorCell, path: str):
            if cell.is_leaf:
                out[path] = tuple(sorted(cell.indices))
                return
            walk(cell.children[0], path + "0")
            walk(cell.children[1], path + "1")

        walk(self.root, "")
        return out

    def leaves(self) -> dict[str, tuple[int, ...]]:
        """Leaf index sets with synthetic pad indices stripped."""
        return {
            path: tuple(i for i in ids if i >= 0)
            for path, ids in self.raw_leaves().items()
        }

    def check_partitions(self) -> bool:
        """Every internal cell must split exactly via its pair partition."""

        def walk(cell: SelectorCell) -> bool:
            if cell.is_leaf:
                return True
            if cell.partition is None or cell.sides is None or len(cell.sides) != len(cell.partition.pairs):
                return False
            got = set(cell.partition.indices)
            want = set(cell.indices)
            if not want <= got:
                return False
            extra = got - want
            if any(i >= 0 for i in extra):
                return False  # only fresh pads may appear
            left = set(cell.children[0].indices)
            right = set(cell.children[1].indices)
            for (a, b), s in zip(cell.partition.pairs, cell.sides):
                first, second = (a, b) if s == 0 else (b, a)
                if first not in left or second not in right:
                    return False
            if len(left) != len(cell.partition.pairs) or len(right) != len(cell.partition.pairs):
                return False
            return walk(cell.children[0]) and walk(cell.children[1])

        return walk(self.root)


@dataclass(frozen=True)
class SelectorCertificate:
    """Telescoped norm bound versus realized per-leaf deviations."""

    trace_cap: float
    order: int
    constant: float
    bound: float
    achieved: dict[str, float] = field(default_factory=dict)
    satisfied: bool = True
    strategy: str = "exhaustive"

    @property
    def worst(self) -> float:
        return max(self.achieved.values()) if self.achieved else 0.0


def _selector_count(size: int, depth: int, limit: int) -> int:
    """Upper bound on side-choice combinations; saturates at limit + 1."""
    if depth <= 0 or size <= 1:
        return 1
    pairs = (size + (size % 2)) // 2
    if pairs >= 64:
        return limit + 1
    per_child = _selector_count(pairs, depth - 1, limit)
    total = (2**pairs) * per_child * per_child
    return min(total, limit + 1)


def _hermitian_opnorm(mat: np.ndarray) -> float:
    vals = np.linalg.eigvalsh((mat + mat.conj().T) / 2.0)
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def _deviation(mats, ids, target, scale) -> float:
    acc = -target
    for i in sorted(i for i in ids if i >= 0):
        acc = acc + scale * mats[i]
    return _hermitian_opnorm(acc)


class _TreeBuilder:
    """Shared state for building selector trees over a fixed operator list."""

    def __init__(self, mats, traces, target, order):
        self.mats = mats
        self.traces = traces
        self.target = target
        self.order = order
        self.pad_ids = itertools.count(-1, -1)

    def pairing(self, ids) -> PairPartition:
        return descending_trace_pairs(ids, self.traces, self.pad_ids)

    def child_sets(self, partition, sides):
        left, right = [], []
        for (a, b), s in zip(partition.pairs, sides):
            if s == 0:
                left.append(a)
                right.append(b)
            else:
                left.append(b)
                right.append(a)
        return tuple(left), tuple(right)


def _greedy_cell(builder: _TreeBuilder, ids, remaining, rng) -> SelectorCell:
    if remaining == 0:
        return SelectorCell(indices=tuple(sorted(ids)))
    part = builder.pairing(ids)
    pairs = part.pairs
    flippable = [k for k, (a, b) in enumerate(pairs) if a >= 0 or b >= 0]
    sides = [0] * len(pairs)
    if rng is not None:
        for k in flippable:
            sides[k] = int(rng.integers(0, 2))

    level_scale = float(2 ** (builder.order - remaining + 1))

    def objective(side_vec):
        left, right = builder.child_sets(part, side_vec)
        return max(
            _deviation(builder.mats, left, builder.target, level_scale),
            _deviation(builder.mats, right, builder.target, level_scale),
        )

    current = objective(sides)
    improving = True
    while improving:
        improving = False
        best_k, best_val = None, current
        for k in flippable:
            sides[k] ^= 1
            val = objective(sides)
            sides[k] ^= 1
            if val < best_val:
                best_k, best_val = k, val
        if best_k is not None:
            sides[best_k] ^= 1
            current = best_val
            improving = True
    left, right = builder.child_sets(part, sides)
    return SelectorCell(
        indices=tuple(sorted(ids)),
        partition=part,
        sides=tuple(sides),
        children=(
            _greedy_cell(builder, left, remaining - 1, rng),
            _greedy_cell(builder, right, remaining - 1, rng),
        ),
    )


def _exhaustive_tree(mats, traces, target, order) -> SelectorTree:
    """Depth-first optimum of the max leaf deviation over the induced pairing.

    Cells are canonicalized to (bitmask of real ids, pad count); identical
    pad elements collapse, which keeps the memo small.
    """
    scale = float(2**order)
    m = len(mats)
    trace_arr = [traces[i] for i in range(m)]

    leaf_cache: dict[int, float] = {}

    def leaf_value(mask: int) -> float:
        if mask not in leaf_cache:
            ids = [i for i in range(m) if (mask >> i) & 1]
            leaf_cache[mask] = _deviation(mats, ids, target, scale)
        return leaf_cache[mask]

    def cell_layout(mask: int, pads: int):
        reals = sorted(
            (i for i in range(m) if (mask >> i) & 1),
            key=lambda i: (-trace_arr[i], i),
        )
        elems: list[int | None] = list(reals) + [None] * pads
        if len(elems) % 2:
            elems.append(None)
        pairs = [(elems[k], elems[k + 1]) for k in range(0, len(elems), 2)]
        return pairs

    memo: dict[tuple[int, int, int], tuple[float, tuple[int, ...]]] = {}

    def solve(mask: int, pads: int, remaining: int) -> float:
        if remaining == 0:
            return leaf_value(mask)
        key = (mask, pads, remaining)
        if key in memo:
            return memo[key][0]
        pairs = cell_layout(mask, pads)
        flippable = [k for k, (a, b) in enumerate(pairs) if a is not None or b is not None]
        best_val, best_sides = math.inf, (0,) * len(pairs)
        for cmask in range(2 ** len(flippable)):
            sides = [0] * len(pairs)
            for t, k in enumerate(flippable):
                sides[k] = (cmask >> t) & 1
            lm = rm = 0
            lp = rp = 0
            for (a, b), s in zip(pairs, sides):
                first, second = (a, b) if s == 0 else (b, a)
                if first is None:
                    lp += 1
                else:
                    lm |= 1 << first
                if second is None:
                    rp += 1
                else:
                    rm |= 1 << second
            val = max(solve(lm, lp, remaining - 1), solve(rm, rp, remaining - 1))
            if val < best_val:
                best_val, best_sides = val, tuple(sides)
        memo[key] = (best_val, best_sides)
        return best_val

    full_mask = (1 << m) - 1
    solve(full_mask, 0, order)

    pad_ids = itertools.count(-1, -1)

    def materialize(mask: int, pads: int, pad_labels: tuple[int, ...], remaining: int) -> SelectorCell:
        indices = tuple(sorted([i for i in range(m) if (mask >> i) & 1] + list(pad_labels)))
        if remaining == 0:
            return SelectorCell(indices=indices)
        pairs = cell_layout(mask, pads)
        _, sides = memo[(mask, pads, remaining)]
        labels = list(pad_labels)
        concrete_pairs = []
        for a, b in pairs:
            ca = a if a is not None else (labels.pop() if labels else next(pad_ids))
            cb = b if b is not None else (labels.pop() if labels else next(pad_ids))
            concrete_pairs.append((ca, cb))
        all_ids = tuple(i for pair in concrete_pairs for i in pair)
        part = PairPartition(indices=all_ids, pairs=tuple(concrete_pairs))
        left_ids, right_ids = [], []
        for (ca, cb), s in zip(concrete_pairs, sides):
            first, second = (ca, cb) if s == 0 else (cb, ca)
            left_ids.append(first)
            right_ids.append(second)
        lm = sum(1 << i for i in left_ids if i >= 0)
        rm = sum(1 << i for i in right_ids if i >= 0)
        lpl = tuple(i for i in left_ids if i < 0)
        rpl = tuple(i for i in right_ids if i < 0)
        return SelectorCell(
            indices=indices,
            partition=part,
            sides=tuple(sides),
            children=(
                materialize(lm, len(lpl), lpl, remaining - 1),
                materialize(rm, len(rpl), rpl, remaining - 1),
            ),
        )

    return SelectorTree(order=order, root=materialize(full_mask, 0, (), order))


def _achieved(tree: SelectorTree, mats, target) -> dict[str, float]:
    scale = float(2**tree.order)
    return {
        path: _deviation(mats, ids, target, scale)
        for path, ids in tree.raw_leaves().items()
    }


def best_selector(
    ops,
    order: int,
    *,
    target=None,
    trace_cap: float | None = None,
    strategy: str = "auto",
    seed: int = 0,
    restarts: int = RANDOM_RESTARTS,
) -> tuple[SelectorTree, SelectorCertificate]:
    """Search for a selector tree minimizing the worst leaf deviation.

    strategy: "auto" picks exhaustive below EXHAUSTIVE_LIMIT total selector
    count and falls back to randomized restarts; "exhaustive" raises a
    budget error above the limit; "greedy" is a single deterministic
    descent; "randomized" runs seeded restarts of the descent.
    """
    psd = [op if isinstance(op, PsdOperator) else PsdOperator(op) for op in ops]
    if not psd:
        raise PreconditionError("need at least one operator")
    dim = psd[0].dim
    if any(p.dim != dim for p in psd):
        raise PreconditionError("operators live in different dimensions")
    if not isinstance(order, int) or order < 0:
        raise PreconditionError(f"order must be a nonnegative integer, got {order!r}")
    mats = [p.matrix for p in psd]
    traces = {i: p.trace for i, p in enumerate(psd)}
    total = sum(mats)
    if target is None:
        target_m = total
    elif isinstance(target, PsdOperator):
        target_m = target.matrix
    else:
        target_m = PsdOperator(target).matrix
    if trace_cap is None:
        trace_cap = max(traces.values())
    tol = NUMERIC_TOL * max(1.0, max(traces.values()))
    bad = [i for i, t in traces.items() if t > trace_cap + tol]
    if bad:
        raise PreconditionError(
            f"operators {bad} exceed the trace cap {trace_cap:.6g}"
        )
    top = _hermitian_opnorm(total) if len(mats) else 0.0
    top_eig = float(np.max(np.linalg.eigvalsh((total + total.conj().T) / 2.0)))
    if top_eig > 1.0 + NUMERIC_TOL * max(top, 1.0):
        raise PreconditionError(f"operator sum has top eigenvalue {top_eig:.6g} > 1")

    count = _selector_count(len(mats), order, EXHAUSTIVE_LIMIT)
    chosen = strategy
    if strategy == "auto":
        chosen = "exhaustive" if count <= EXHAUSTIVE_LIMIT else "randomized"
    if chosen == "exhaustive":
        if count > EXHAUSTIVE_LIMIT:
            raise BudgetExceededError(
                f"selector count exceeds the exhaustive budget 2^20; use randomized search"
            )
        tree = _exhaustive_tree(mats, traces, target_m, order)
    elif chosen == "greedy":
        builder = _TreeBuilder(mats, traces, target_m, order)
        tree = SelectorTree(order=order, root=_greedy_cell(builder, tuple(range(len(mats))), order, None))
    elif chosen == "randomized":
        rng = np.random.default_rng(seed)
        best_tree, best_worst = None, math.inf
        for _ in range(max(1, restarts)):
            builder = _TreeBuilder(mats, traces, target_m, order)
            cand = SelectorTree(order=order, root=_greedy_cell(builder, tuple(range(len(mats))), order, rng))
            worst = max(_achieved(cand, mats, target_m).values())
            if worst < best_worst:
                best_tree, best_worst = cand, worst
        tree = best_tree
    else:
        raise PreconditionError(f"unknown strategy {strategy!r}")

    constant = certificate_constant(trace_cap, order)
    bound = constant * math.sqrt(2**order * trace_cap)
    achieved = _achieved(tree, mats, target_m)
    worst = max(achieved.values())
    certificate = SelectorCertificate(
        trace_cap=float(trace_cap),
        order=order,
        constant=constant,
        bound=bound,
        achieved=achieved,
        satisfied=worst <= bound + NUMERIC_TOL * max(bound, 1.0),
        strategy=chosen,
    )
    return tree, certificate


def verify_certificate(certificate: SelectorCertificate, tree: SelectorTree, ops, target=None) -> bool:
    """Recompute every leaf deviation from scratch and compare.

    Raises on an inconsistent tree; returns whether the recomputed worst
    deviation stays within the certified bound and matches the stored values.
    """
    psd = [op if isinstance(op, PsdOperator) else PsdOperator(op) for op in ops]
    mats = [p.matrix for p in psd]
    if target is None:
        target_m = sum(mats)
    elif isinstance(target, PsdOperator):
        target_m = target.matrix
    else:
        target_m = PsdOperator(target).matrix
    if not tree.check_partitions():
        raise PreconditionError("selector tree partitions are inconsistent")
    if tree.order != certificate.order:
        raise PreconditionError("tree order does not match the certificate")
    fresh = _achieved(tree, mats, target_m)
    if set(fresh) != set(certificate.achieved):
        return False
    tol = NUMERIC_TOL * max(1.0, certificate.bound, max(fresh.values()))
    for path, val in fresh.items():
        if abs(val - certificate.achieved[path]) > tol:
            return False
    return max(fresh.values()) <= certificate.bound + tol
