"""Finite time-frequency tools on the cyclic group Z_L.

A signal is a length-L complex sample vector indexed by t = 0..L-1.
Translation rolls the index and modulation multiplies by a
root-of-unity character; both are exactly unitary.  Gabor systems
collect the modulated translates of one window over a list of shift
pairs, and the short-time transform tabulates inner products against
all L^2 shifts at once.

The density amplifier at the bottom replaces the leading elements of a
Gabor frame by clusters of nearby time-frequency copies while keeping
the mixed reconstruction operator close to the identity.  Shift
parameters live on the integer grid; one grid step counts as
1/sqrt(L) in the normalized units the perturbation caps refer to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    GridTooCoarseError,
    NotAFrameError,
    PreconditionError,
)
from .frames import VectorFamily, canonical_dual, frame_bounds

__all__ = [
    "CyclicSignal",
    "GaborSpec",
    "ExponentialSpec",
    "DensificationReport",
    "translate",
    "modulate",
    "commutation_phase",
    "gabor_family",
    "full_lattice_shifts",
    "stft",
    "mp_proxy",
    "exponential_family",
    "gaussian_window",
    "densify_gabor_frame",
]


class CyclicSignal:
    """A complex signal on Z_L, stored as its L samples."""

    __slots__ = ("_samples",)

    def __init__(self, samples):
        arr = np.asarray(samples, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            raise PreconditionError("a cyclic signal needs a nonempty 1-d sample vector")
        self._samples = arr.copy()
        self._samples.flags.writeable = False

    @property
    def samples(self):
        return self._samples

    @property
    def length(self):
        return int(self._samples.size)

    @property
    def norm(self):
        return float(np.linalg.norm(self._samples))

    def __len__(self):
        return self.length


def _as_signal(obj):
    if isinstance(obj, CyclicSignal):
        return obj
    return CyclicSignal(obj)


def _character_table(length):
    # e^{2 pi i k / L} for k = 0..L-1, evaluated once at reduced angles
    return np.exp(2j * np.pi * np.arange(length) / length)


def translate(f, a):
    """Cyclic time shift: (T_a f)(t) = f(t - a)."""
    f = _as_signal(f)
    return CyclicSignal(np.roll(f.samples, int(a) % f.length))


def modulate(f, b):
    """Frequency shift: (M_b f)(t) = e^{2 pi i b t / L} f(t).

    The character exponent is reduced mod L in integer arithmetic, so
    equal frequencies always produce bit-identical phase factors.
    """
    f = _as_signal(f)
    length = f.length
    idx = (np.arange(length) * (int(b) % length)) % length
    return CyclicSignal(f.samples * _character_table(length)[idx])


def commutation_phase(length, a, b):
    """The unimodular scalar with M_b T_a = phase * T_a M_b.

    Equals e^{2 pi i a b / L}; the exponent a*b is reduced mod L as an
    integer so the phase is the exact root of unity, with no angle
    drift for large parameters.
    """
    length = int(length)
    if length < 1:
        raise PreconditionError("length must be at least 1")
    k = (int(a) % length) * (int(b) % length) % length
    return complex(_character_table(length)[k])


class GaborSpec:
    """A window plus a list of (time, frequency) shift pairs.

    Shift pairs are reduced mod L; duplicates are permitted and mean
    repeated elements in the generated family.
    """

    __slots__ = ("_window", "_shifts")

    def __init__(self, window, shifts):
        self._window = _as_signal(window)
        length = self._window.length
        pairs = []
        for pair in shifts:
            a, b = pair
            pairs.append((int(a) % length, int(b) % length))
        if not pairs:
            raise PreconditionError("a Gabor spec needs at least one shift pair")
        self._shifts = tuple(pairs)

    @property
    def window(self):
        return self._window

    @property
    def shifts(self):
        return self._shifts

    @property
    def length(self):
        return self._window.length

    def __len__(self):
        return len(self._shifts)


class ExponentialSpec:
    """Characters e^{2 pi i lambda t / L} restricted to a domain mask.

    The mask is a nonempty subset of {0..L-1} listing which sample
    points survive; vectors live on the masked coordinates in sorted
    order.  Frequencies may be any reals.
    """

    __slots__ = ("_length", "_mask", "_frequencies")

    def __init__(self, length, domain_mask, frequencies):
        self._length = int(length)
        if self._length < 1:
            raise PreconditionError("length must be at least 1")
        mask = sorted({int(t) for t in domain_mask})
        if not mask:
            raise PreconditionError("the domain mask must be nonempty")
        if mask[0] < 0 or mask[-1] >= self._length:
            raise PreconditionError("mask points must lie in 0..L-1")
        freqs = tuple(float(x) for x in frequencies)
        if not freqs:
            raise PreconditionError("at least one frequency is required")
        self._mask = tuple(mask)
        self._frequencies = freqs

    @property
    def length(self):
        return self._length

    @property
    def mask(self):
        return self._mask

    @property
    def frequencies(self):
        return self._frequencies


def full_lattice_shifts(length):
    """All L^2 shift pairs (a, b) in row-major order."""
    length = int(length)
    return tuple((a, b) for a in range(length) for b in range(length))


def gabor_family(spec):
    """Realize M_b T_a window for every shift pair, in input order."""
    window = spec.window
    if window.norm == 0.0:
        raise PreconditionError("the Gabor window must be nonzero")
    length = window.length
    table = _character_table(length)
    base = window.samples
    rows = np.empty((len(spec.shifts), length), dtype=complex)
    for k, (a, b) in enumerate(spec.shifts):
        idx = (np.arange(length) * b) % length
        rows[k] = np.roll(base, a) * table[idx]
    labels = [f"{a},{b}" for a, b in spec.shifts]
    return VectorFamily(rows, labels=labels)


def stft(f, window):
    """Short-time transform grid V[x, w] = <f, M_w T_x window>.

    Rows are time shifts x, columns frequencies w.  The total energy
    satisfies sum |V|^2 = L ||f||^2 ||window||^2.
    """
    f = _as_signal(f)
    window = _as_signal(window)
    if f.length != window.length:
        raise DimensionMismatchError("signal and window lengths differ")
    if window.norm == 0.0:
        raise PreconditionError("the analysis window must be nonzero")
    length = f.length
    # W[x, t] = window(t - x); one FFT per row computes all frequencies
    idx = (np.arange(length)[None, :] - np.arange(length)[:, None]) % length
    shifted = window.samples[idx]
    return np.fft.fft(f.samples[None, :] * np.conj(shifted), axis=1)


def mp_proxy(f, window, p):
    """p-norm of the STFT grid scaled by the grid cell measure.

    This is a qualitative stand-in for a modulation-space norm on the
    finite model; nothing about genuine continuum membership can be
    decided from L samples, so treat the value as a heuristic size
    only.  Each grid cell carries measure 1/L.
    """
    p = float(p)
    if not 1.0 <= p <= 2.0:
        raise PreconditionError("the exponent p must lie in [1, 2]")
    grid = stft(f, window)
    length = _as_signal(f).length
    return float((np.abs(grid) ** p).sum() / length) ** (1.0 / p)


def exponential_family(spec):
    """Characters restricted to the mask, one vector per frequency."""
    t_vals = np.asarray(spec.mask, dtype=float)
    rows = np.empty((len(spec.frequencies), t_vals.size), dtype=complex)
    for k, lam in enumerate(spec.frequencies):
        rows[k] = np.exp(2j * np.pi * lam * t_vals / spec.length)
    labels = [repr(lam) for lam in spec.frequencies]
    return VectorFamily(rows, labels=labels)


def gaussian_window(length, spread=None):
    """Unit-normalized samples of e^{-pi (t - L/2)^2 / spread^2}.

    The default spread sqrt(L) balances the time and frequency step
    sizes, so one grid step in either direction moves the window by
    about the same amount.
    """
    length = int(length)
    if length < 1:
        raise PreconditionError("length must be at least 1")
    sigma = math.sqrt(length) if spread is None else float(spread)
    if sigma <= 0:
        raise PreconditionError("spread must be positive")
    t = np.arange(length, dtype=float)
    g = np.exp(-np.pi * (t - length / 2.0) ** 2 / sigma**2)
    return CyclicSignal(g / np.linalg.norm(g))


@dataclass(frozen=True, eq=False)
class DensificationReport:
    """Audit trail for a cluster-replacement construction."""

    operator_deviation: float
    cluster_sizes: tuple
    parameter_caps: tuple
    vector_caps: tuple
    parameter_distances: tuple
    vector_distances: tuple
    dual_norm_sup: float
    weights_nonzero: bool
    base_count: int
    emitted_count: int
    shifts: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.shifts) != self.emitted_count:
            raise ValueError("one shift pair per emitted vector")
        if len(self.weights) != self.emitted_count:
            raise ValueError("one weight per emitted vector")
        if self.operator_deviation < 0:
            raise ValueError("operator deviation cannot be negative")


def _spiral_offsets(limit_sq_num, limit_sq_den, seed, tag):
    """Integer grid offsets with |off|^2 < limit, ordered spiral-wise.

    The strict bound is checked in exact integer arithmetic
    (den * |off|^2 < num).  Ties at equal radius are broken by angle,
    rotated by a seeded amount for reproducible variety.
    """
    bound = int(math.isqrt(max(limit_sq_num // max(limit_sq_den, 1), 0))) + 1
    rot = float(np.random.default_rng((seed, tag)).uniform(0.0, 2.0 * np.pi))
    offsets = []
    for da in range(-bound, bound + 1):
        for db in range(-bound, bound + 1):
            norm_sq = da * da + db * db
            if limit_sq_den * norm_sq < limit_sq_num:
                ang = (math.atan2(db, da) - rot) % (2.0 * np.pi)
                offsets.append((norm_sq, ang, da, db))
    offsets.sort()
    return [(da, db) for _, _, da, db in offsets]


def densify_gabor_frame(base, counts, perturbation_budget=None, *, seed=0):
    """Replace leading frame elements by clusters of perturbed copies.

    The n-th base element (1-based, n up to len(counts)) is replaced
    by counts[n-1] copies at pairwise-distinct shift parameters, each
    within 1/n of the original in normalized parameter units and
    within (4^n * sup_dual_norm)^{-1} of the original vector; the
    remaining base elements pass through untouched.  The mixed
    operator S x = sum_n K_n^{-1} sum_i <x, dual_n> copy_{n,i} is
    assembled against the base's canonical dual and must stay within
    distance 1 of the identity, which the caps guarantee whenever the
    grid is fine enough to honor them.

    perturbation_budget optionally overrides the per-cluster vector
    caps.  Returns the emitted family and a report with the worst
    distances actually realized.
    """
    fam = gabor_family(base)
    bounds = frame_bounds(fam)
    if not bounds.is_frame:
        raise NotAFrameError("the base Gabor system must be a frame")
    sizes = [int(k) for k in counts]
    if not sizes:
        raise PreconditionError("at least one cluster size is required")
    if any(k < 1 for k in sizes):
        raise PreconditionError("cluster sizes must be positive")
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise PreconditionError("cluster sizes must be non-decreasing")
    if len(sizes) > len(base):
        raise PreconditionError("more cluster sizes than base elements")
    if perturbation_budget is not None:
        budget = [float(c) for c in perturbation_budget]
        if len(budget) != len(sizes):
            raise PreconditionError("one budget entry per cluster")
        if any(c <= 0 for c in budget):
            raise PreconditionError("budget entries must be positive")
    else:
        budget = None

    duals = canonical_dual(fam)
    dual_norms = np.linalg.norm(duals.vectors, axis=1)
    sup_dual = float(dual_norms.max())
    length = base.length
    root_length = math.sqrt(length)
    window = base.window

    used = set()
    emitted_rows = []
    emitted_shifts = []
    emitted_weights = []
    param_caps = []
    vector_caps = []
    worst_param = []
    worst_vector = []

    for n, k_n in enumerate(sizes, start=1):
        a0, b0 = base.shifts[n - 1]
        base_vec = fam.vectors[n - 1]
        cap_vec = budget[n - 1] if budget is not None else 1.0 / (4**n * sup_dual)
        param_caps.append(root_length / n)
        vector_caps.append(cap_vec)
        chosen = []
        # condition: n^2 * |off|^2 < L, exact in integers
        for da, db in _spiral_offsets(length, n * n, seed, n):
            pair = ((a0 + da) % length, (b0 + db) % length)
            if pair in used:
                continue
            cand = modulate(translate(window, pair[0]), pair[1]).samples
            dist = float(np.linalg.norm(cand - base_vec))
            if dist >= cap_vec:
                continue
            used.add(pair)
            chosen.append((pair, cand, math.hypot(da, db) / root_length, dist))
            if len(chosen) == k_n:
                break
        if len(chosen) < k_n:
            raise GridTooCoarseError(
                f"cluster {n} admits only {len(chosen)} of {k_n} copies; "
                "the shift grid is too coarse for the requested caps"
            )
        worst_param.append(max(c[2] for c in chosen))
        worst_vector.append(max(c[3] for c in chosen))
        for pair, cand, _, _ in chosen:
            emitted_rows.append(cand)
            emitted_shifts.append(pair)
            emitted_weights.append(1.0 / k_n)

    for m in range(len(sizes), len(base)):
        emitted_rows.append(fam.vectors[m])
        emitted_shifts.append(base.shifts[m])
        emitted_weights.append(1.0)

    rows = np.array(emitted_rows)
    # S = sum over emitted copies of weight * copy (x) dual of its source
    mixed = np.zeros((length, length), dtype=complex)
    pos = 0
    for n, k_n in enumerate(sizes, start=1):
        block = rows[pos : pos + k_n]
        mixed += block.sum(axis=0)[:, None] * np.conj(duals.vectors[n - 1])[None, :] / k_n
        pos += k_n
    tail = rows[pos:]
    if tail.size:
        mixed += tail.T @ np.conj(duals.vectors[len(sizes) :])
    deviation = float(np.linalg.norm(mixed - np.eye(length), ord=2))
    if deviation >= 1.0:
        raise PreconditionError(
            f"mixed operator strays {deviation:.3g} from the identity; "
            "the construction does not certify invertibility"
        )

    family = VectorFamily(rows, labels=[f"{a},{b}" for a, b in emitted_shifts])
    report = DensificationReport(
        operator_deviation=deviation,
        cluster_sizes=tuple(sizes),
        parameter_caps=tuple(param_caps),
        vector_caps=tuple(vector_caps),
        parameter_distances=tuple(worst_param),
        vector_distances=tuple(worst_vector),
        dual_norm_sup=sup_dual,
        weights_nonzero=bool(np.all(dual_norms > 0.0)),
        base_count=len(base),
        emitted_count=len(emitted_shifts),
        shifts=tuple(emitted_shifts),
        weights=tuple(emitted_weights),
    )
    return family, report
