"""Shared generators for the test suite."""

import numpy as np

from framex import VectorFamily


def random_family(rng, dim, count, complex_field=False, spread=1.0):
    vecs = rng.normal(size=(count, dim)) * spread
    if complex_field:
        vecs = vecs + 1j * rng.normal(size=(count, dim)) * spread
    return VectorFamily(vecs)


def spanning_family(rng, dim, extras=2, complex_field=False):
    """Identity columns plus a few random rows: spanning with tame bounds."""
    base = np.eye(dim)
    more = rng.normal(size=(extras, dim))
    vecs = np.vstack([base, more])
    if complex_field:
        vecs = vecs.astype(complex)
        vecs[dim:] += 1j * rng.normal(size=(extras, dim))
    return VectorFamily(vecs)


def rescalable_fixture(rng, dim, extras=2, kmax=4):
    """Spanning family whose scalars aim at small integer rescaled energies.

    Each vector gets scalar sqrt(k)/norm for a random k in 1..kmax, so the
    weighted energies are integers up to float noise and the extraction
    pipeline's dyadic machinery stays within budget.
    """
    vecs = np.vstack([np.eye(dim), rng.normal(size=(extras, dim))])
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    vecs = vecs @ q.T
    ks = rng.integers(1, kmax + 1, size=len(vecs))
    scal = np.sqrt(ks) / np.linalg.norm(vecs, axis=1)
    return VectorFamily(vecs, scalars=scal)


def bounded_rank_ones(rng, dim, count, trace_cap):
    """Rank-one PSD list with traces <= trace_cap and sum <= I."""
    from framex import rank_one

    units = rng.normal(size=(count, dim))
    units /= np.linalg.norm(units, axis=1, keepdims=True)
    traces = rng.uniform(0.2, 1.0, size=count) * trace_cap
    ops = [rank_one(np.sqrt(t) * u) for t, u in zip(traces, units)]
    total = sum(op.matrix for op in ops)
    top = float(np.max(np.linalg.eigvalsh(total)))
    if top >= 1.0:
        scale = 0.99 / top
        ops = [op * scale for op in ops]
    return ops
