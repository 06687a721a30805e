"""Batch front door: read one input file, run one analysis, write a report.

Usage:
    framex <command> --in <path> --out <path> [--seed N] [--param k=v]...
                     [--csv] [--no-timestamp]

Commands: analyze, classify, dual, extract, sample, selector, density,
gabor, construct45.  Families arrive as JSON objects with fields "dim",
"field" ("real" or "complex"), "vectors", optional "scalars" and
"labels"; complex entries are [re, im] pairs.  Point sets use
{"ambient_dim", "points", "extent"}.

Reports are JSON with sorted keys so identical jobs produce identical
bytes; --no-timestamp drops the timestamp and wall time fields, which
are the only run-dependent content.  --csv additionally writes the
flattened result table next to the report.  Exit codes: 0 success,
2 precondition violation, 3 unreadable input, 4 budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass, fields, is_dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, pointsets, sampling, selectors
from .errors import BudgetExceededError, InputFormatError, PreconditionError
from .extraction import extract
from .frames import (
    VectorFamily,
    canonical_dual,
    classify,
    frame_bounds,
    frame_operator,
)
from .linalg import Projection, rank_one, spectrum
from .pointsets import PointSet, density, uniformly_discrete
from .sampling import sample
from .selectors import best_selector, natural_max_order
from .timefreq import (
    CyclicSignal,
    GaborSpec,
    densify_gabor_frame,
    full_lattice_shifts,
    gabor_family,
)

# module globals that honor runtime overrides; everything else is either a
# function argument (wired below) or frozen into compiled defaults
_TUNABLES = {
    "replica_budget": (sampling, "REPLICA_BUDGET"),
    "exhaustive_limit": (selectors, "EXHAUSTIVE_LIMIT"),
    "step_divisor": (pointsets, "STEP_DIVISOR"),
}


@dataclass(frozen=True)
class Job:
    command: str
    input_path: str
    output_path: str
    params: dict
    seed: int = 0
    csv: bool = False
    timestamp: bool = True


def _jsonable(obj):
    """Recursively convert report content to JSON-safe structures."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        if np.isfinite(obj):
            return obj
        return repr(obj)
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _jsonable(float(obj))
    if isinstance(obj, np.complexfloating):
        return [_jsonable(float(obj.real)), _jsonable(float(obj.imag))]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(v) for v in seq]
    raise InputFormatError(f"cannot serialize {type(obj).__name__} into a report")


def _load_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFormatError(f"cannot read input file: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"input is not valid JSON: {exc}") from exc


def _entry(value, complex_field, what):
    if complex_field:
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise InputFormatError(f"{what}: complex entries must be [re, im] pairs")
        re, im = value
        if isinstance(re, bool) or isinstance(im, bool):
            raise InputFormatError(f"{what}: complex entries must be numbers")
        if not isinstance(re, (int, float)) or not isinstance(im, (int, float)):
            raise InputFormatError(f"{what}: complex entries must be numbers")
        return complex(re, im)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputFormatError(f"{what}: entries must be real numbers")
    return float(value)


def parse_family(payload) -> VectorFamily:
    if not isinstance(payload, dict):
        raise InputFormatError("family input must be a JSON object")
    for key in ("dim", "field", "vectors"):
        if key not in payload:
            raise InputFormatError(f"family input lacks the '{key}' field")
    dim = payload["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise InputFormatError("'dim' must be a positive integer")
    field_name = payload["field"]
    if field_name not in ("real", "complex"):
        raise InputFormatError("'field' must be 'real' or 'complex'")
    complex_field = field_name == "complex"
    raw = payload["vectors"]
    if not isinstance(raw, list) or not raw:
        raise InputFormatError("'vectors' must be a nonempty list")
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != dim:
            raise InputFormatError(f"vector {i} does not have {dim} entries")
        rows.append([_entry(v, complex_field, f"vector {i}") for v in row])
    dtype = complex if complex_field else float
    vectors = np.array(rows, dtype=dtype)
    scalars = None
    if payload.get("scalars") is not None:
        raw_s = payload["scalars"]
        if not isinstance(raw_s, list) or len(raw_s) != len(rows):
            raise InputFormatError("'scalars' must list one entry per vector")
        scalars = [_entry(v, complex_field, "scalars") for v in raw_s]
    labels = None
    if payload.get("labels") is not None:
        if not isinstance(payload["labels"], list) or len(payload["labels"]) != len(rows):
            raise InputFormatError("'labels' must list one entry per vector")
        labels = [str(v) for v in payload["labels"]]
    return VectorFamily(vectors, scalars=scalars, labels=labels)


def parse_pointset(payload) -> PointSet:
    if not isinstance(payload, dict):
        raise InputFormatError("point set input must be a JSON object")
    for key in ("ambient_dim", "points", "extent"):
        if key not in payload:
            raise InputFormatError(f"point set input lacks the '{key}' field")
    dim = payload["ambient_dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise InputFormatError("'ambient_dim' must be a positive integer")
    extent = payload["extent"]
    if isinstance(extent, bool) or not isinstance(extent, (int, float)):
        raise InputFormatError("'extent' must be a number")
    raw = payload["points"]
    if not isinstance(raw, list):
        raise InputFormatError("'points' must be a list")
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != dim:
            raise InputFormatError(f"point {i} does not have {dim} coordinates")
        rows.append([_entry(v, False, f"point {i}") for v in row])
    points = np.array(rows, dtype=float) if rows else np.empty((0, dim))
    return PointSet(points, float(extent), ambient_dim=dim)


def _param_bool(params, key, default):
    if key not in params:
        return default
    text = params[key].strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise InputFormatError(f"param '{key}' must be a boolean, got {params[key]!r}")


def _param_int(params, key, default):
    if key not in params:
        return default
    try:
        return int(params[key])
    except ValueError as exc:
        raise InputFormatError(f"param '{key}' must be an integer") from exc


def _param_float(params, key, default):
    if key not in params:
        return default
    try:
        return float(params[key])
    except ValueError as exc:
        raise InputFormatError(f"param '{key}' must be a number") from exc


def _param_list(params, key, default, kind=int):
    if key not in params:
        return default
    try:
        return [kind(tok) for tok in params[key].split(",") if tok.strip()]
    except ValueError as exc:
        raise InputFormatError(f"param '{key}' must be a comma list") from exc


def _use_scalars(family, params):
    return _param_bool(params, "use_scalars", family.scalars is not None)


def _encode_family(family):
    out = {
        "dim": family.dim,
        "field": family.field,
        "vectors": family.vectors,
    }
    if family.scalars is not None:
        out["scalars"] = family.scalars
    if family.labels is not None:
        out["labels"] = list(family.labels)
    return out


def _cmd_analyze(payload, params, seed):
    family = parse_family(payload)
    use_scalars = _use_scalars(family, params)
    report = frame_bounds(family, use_scalars)
    op = frame_operator(family, use_scalars)
    return {
        "count": len(family),
        "dim": family.dim,
        "use_scalars": use_scalars,
        "frame": report,
        "spectrum": spectrum(op),
    }


def _cmd_classify(payload, params, seed):
    family = parse_family(payload)
    use_scalars = _use_scalars(family, params)
    verdict = classify(family, use_scalars)
    return {
        "label": verdict.label,
        "spanning": verdict.spanning,
        "rescaling_recommended": verdict.rescaling_recommended,
        "note": verdict.note,
        "frame": verdict.report,
    }


def _cmd_dual(payload, params, seed):
    family = parse_family(payload)
    use_scalars = _use_scalars(family, params)
    report = frame_bounds(family, use_scalars)
    duals = canonical_dual(family, use_scalars)
    probes = _param_int(params, "probes", 25)
    rng = np.random.default_rng(seed)
    fam_m = family.weighted_vectors() if use_scalars else family.vectors
    dual_m = duals.weighted_vectors() if use_scalars else duals.vectors
    worst = 0.0
    for _ in range(probes):
        x = rng.normal(size=family.dim)
        if family.field == "complex":
            x = x + 1j * rng.normal(size=family.dim)
        back = fam_m.T @ (np.conj(dual_m) @ x)
        worst = max(worst, float(np.linalg.norm(back - x) / np.linalg.norm(x)))
    return {
        "frame": report,
        "dual_vectors": duals.vectors,
        "probes": probes,
        "max_relative_residual": worst,
    }


def _cmd_extract(payload, params, seed):
    family = parse_family(payload)
    result = extract(family, seed=seed)
    plan = result.plan
    return {
        "multiplicity": {str(n): c for n, c in result.sigma.multiplicity.items()},
        "total": len(result.sigma),
        "normalized": _encode_family(result.normalized),
        "frame": result.report,
        "mult_bound": result.mult_bound_L,
        "mult_ok": result.mult_ok,
        "total_deviation": result.total_deviation,
        "deviation_cap": result.deviation_cap,
        "envelope": list(result.envelope),
        "plan": {
            "blocks": [list(b) for b in plan.blocks],
            "thresholds": list(plan.thresholds),
            "gammas": list(plan.gammas),
            "epsilon": plan.epsilon,
            "beta": plan.beta,
            "window_empty": plan.window_empty,
            "constant": plan.constant,
            "trace_cap": plan.trace_cap,
            "lower": plan.lower,
            "upper": plan.upper,
            "identity_defect": plan.identity_defect,
            "block_subspaces": [p.basis for p in plan.block_subspaces],
        },
        "certificates": list(result.certificates),
    }


def _cmd_sample(payload, params, seed):
    family = parse_family(payload)
    if family.scalars is None:
        raise PreconditionError("sample needs 'scalars' as the weight sequence")
    weights = [float(abs(c)) for c in family.scalars]
    ops = [rank_one(v) for v in family.vectors]
    if "epsilon" not in params:
        raise PreconditionError("sample needs --param epsilon=...")
    epsilon = _param_float(params, "epsilon", None)
    cols = _param_list(params, "subspace_cols", None)
    if cols is None:
        subspace = Projection.full(family.dim)
    else:
        basis = np.eye(family.dim)[:, cols]
        subspace = Projection(basis, dim=family.dim)
    fn, cert = sample(
        ops,
        weights,
        subspace,
        epsilon,
        trace_cap=_param_float(params, "trace_cap", None),
        total_cap=_param_float(params, "total_cap", 0.5),
        depth=_param_int(params, "depth", sampling.MAX_DYADIC_DEPTH),
        seed=seed,
    )
    return {
        "multiplicity": {str(n): c for n, c in fn.multiplicity.items()},
        "total": len(fn),
        "certificate": cert,
        "weights": weights,
    }


def _cmd_selector(payload, params, seed):
    family = parse_family(payload)
    ops = [rank_one(v) for v in family.vectors]
    trace_cap = _param_float(params, "trace_cap", None)
    cap = trace_cap if trace_cap is not None else max(op.trace for op in ops)
    order = _param_int(params, "order", min(3, max(natural_max_order(cap), 1)))
    tree, cert = best_selector(
        ops,
        order,
        trace_cap=trace_cap,
        strategy=params.get("strategy", "auto"),
        seed=seed,
        restarts=_param_int(params, "restarts", selectors.RANDOM_RESTARTS),
    )
    return {
        "certificate": cert,
        "leaves": {path: list(ids) for path, ids in sorted(tree.leaves().items())},
        "order": order,
    }


def _cmd_density(payload, params, seed):
    ps = parse_pointset(payload)
    radii = _param_list(params, "radii", [ps.declared_extent / 2.0], kind=float)
    step = _param_float(params, "step", None)
    est = density(ps, radii, center_grid_step=step)
    discrete, separation = uniformly_discrete(ps)
    return {
        "estimate": est,
        "count": len(ps),
        "ambient_dim": ps.ambient_dim,
        "extent": ps.declared_extent,
        "uniformly_discrete": discrete,
        "separation": separation,
    }


def _window_from(payload):
    family = parse_family(payload)
    return CyclicSignal(family.vectors[0])


def _cmd_gabor(payload, params, seed):
    window = _window_from(payload)
    length = window.length
    a_step = _param_int(params, "a_step", 1)
    b_step = _param_int(params, "b_step", 1)
    if a_step < 1 or b_step < 1:
        raise PreconditionError("lattice steps must be positive")
    shifts = [(a, b) for a in range(0, length, a_step) for b in range(0, length, b_step)]
    spec = GaborSpec(window, shifts)
    family = gabor_family(spec)
    report = frame_bounds(family)
    return {
        "length": length,
        "a_step": a_step,
        "b_step": b_step,
        "count": len(family),
        "window_norm": window.norm,
        "frame": report,
    }


def _cmd_construct45(payload, params, seed):
    window = _window_from(payload)
    length = window.length
    counts = _param_list(params, "counts", [1, 2, 4, 8])
    copies = _param_int(params, "copies", 2)
    if copies < 1:
        raise PreconditionError("copies must be positive")
    if not counts:
        raise PreconditionError("counts must be nonempty")
    # clusters sit on the a = L/2 column where modulation steps are cheap
    leads = [(length // 2, (k * length) // len(counts)) for k in range(len(counts))]
    lattice = list(full_lattice_shifts(length))
    lead_set = set(leads)
    rest = [p for p in lattice if p not in lead_set]
    spec = GaborSpec(window, leads + rest + lattice * (copies - 1))
    base_report = frame_bounds(gabor_family(spec))
    family, report = densify_gabor_frame(spec, counts, seed=seed)
    return {
        "length": length,
        "copies": copies,
        "base_count": report.base_count,
        "base_frame": base_report,
        "report": report,
        "emitted_frame": frame_bounds(family),
    }


_HANDLERS = {
    "analyze": _cmd_analyze,
    "classify": _cmd_classify,
    "dual": _cmd_dual,
    "extract": _cmd_extract,
    "sample": _cmd_sample,
    "selector": _cmd_selector,
    "density": _cmd_density,
    "gabor": _cmd_gabor,
    "construct45": _cmd_construct45,
}


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for key in sorted(obj):
            _flatten(f"{prefix}.{key}" if prefix else str(key), obj[key], rows)
    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            _flatten(f"{prefix}[{i}]", item, rows)
    else:
        rows.append((prefix, "" if obj is None else obj))


def _write_csv(path, results):
    rows = []
    _flatten("", results, rows)
    lines = ["key,value"]
    for key, value in rows:
        text = str(value)
        if "," in text or '"' in text:
            text = '"' + text.replace('"', '""') + '"'
        lines.append(f"{key},{text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(job: Job) -> int:
    """Execute one job and write its report; returns the exit code."""
    overrides = []
    for key, (module, attr) in _TUNABLES.items():
        if key in job.params:
            overrides.append((module, attr, getattr(module, attr)))
            setattr(module, attr, _param_int({key: job.params[key]}, key, None))
    started = time.perf_counter()
    stamp = datetime.now(timezone.utc).isoformat()
    report = {
        "command": job.command,
        "seed": job.seed,
        "params": dict(job.params),
        "versions": {
            "framex": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    code = 0
    try:
        payload = _load_json(job.input_path)
        report["input"] = payload
        report["results"] = _HANDLERS[job.command](payload, job.params, job.seed)
    except InputFormatError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 3
    except BudgetExceededError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 4
    except PreconditionError as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = 2
    finally:
        for module, attr, value in overrides:
            setattr(module, attr, value)
    if job.timestamp:
        report["timestamp"] = stamp
        report["wall_time_s"] = round(time.perf_counter() - started, 6)
    body = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    out = Path(job.output_path)
    try:
        out.write_text(body, encoding="utf-8")
        if job.csv and code == 0:
            _write_csv(out.with_suffix(".csv"), _jsonable(report["results"]))
    except OSError as exc:
        print(f"framex: cannot write report: {exc}", file=sys.stderr)
        return 3
    if code:
        err = report["error"]
        print(f"framex: {err['type']}: {err['message']}", file=sys.stderr)
    return code


def _parse_params(pairs):
    params = {}
    for raw in pairs:
        key, sep, value = raw.partition("=")
        if not sep or not key:
            raise InputFormatError(f"--param expects k=v, got {raw!r}")
        params[key.strip()] = value.strip()
    return params


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="framex",
        description="Frame analysis toolbox: one batch job per invocation.",
    )
    parser.add_argument("command", choices=sorted(_HANDLERS))
    parser.add_argument("--in", dest="input_path", required=True, help="input JSON path")
    parser.add_argument("--out", dest="output_path", required=True, help="report JSON path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--param", action="append", default=[], metavar="K=V")
    parser.add_argument("--csv", action="store_true", help="also write a flat CSV table")
    parser.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit timestamp and wall time for byte-reproducible reports",
    )
    args = parser.parse_args(argv)
    try:
        params = _parse_params(args.param)
    except InputFormatError as exc:
        print(f"framex: {exc}", file=sys.stderr)
        return 3
    job = Job(
        command=args.command,
        input_path=args.input_path,
        output_path=args.output_path,
        params=params,
        seed=args.seed,
        csv=args.csv,
        timestamp=not args.no_timestamp,
    )
    return run(job)


if __name__ == "__main__":
    sys.exit(main())
