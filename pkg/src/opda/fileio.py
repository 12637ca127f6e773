"""LIBSVM datasets, flat ``key = value`` run configs and CSV traces."""
import csv
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ._backend import kernels
from .errors import ConfigError, DataError, ParseError
from .numcore import RNG_ALGORITHM, SparseDataset
from .objectives import POLY_PRESETS
from .solvers import SOLVER_NAMES, TRACE_FIELDS, SolverConfig, TraceRecord

LOSSES = ("logistic", "least_squares", "poly2d")


def _open_text(source):
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def _parse_label(tok, line):
    try:
        val = float(tok)
    except ValueError:
        raise ParseError(f"label {tok!r} is not numeric", line) from None
    if val == 1.0:
        return 1.0
    if val in (0.0, -1.0):
        return -1.0
    raise ParseError(f"label {tok!r} is neither 0/1 nor -1/+1", line)


def parse_libsvm(source, dim=None):
    """Read ``label idx:val ...`` lines into a SparseDataset.

    Indices are one-based and strictly ascending; they are stored
    zero-based.  Labels 0 and -1 both become -1.  Blank lines and ``#``
    comments are skipped and explicit zero values are dropped.  ``dim``
    defaults to the largest index seen.
    """
    indptr = [0]
    indices = []
    values = []
    labels = []
    for lineno, raw in enumerate(_open_text(source), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        toks = text.split()
        labels.append(_parse_label(toks[0], lineno))
        last = 0
        for tok in toks[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"feature {tok!r} is not idx:val", lineno)
            try:
                idx = int(key)
                x = float(val)
            except ValueError:
                raise ParseError(f"feature {tok!r} is not numeric", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} is not one-based", lineno)
            if idx <= last:
                raise ParseError(f"index {idx} does not ascend (after {last})", lineno)
            if not math.isfinite(x):
                raise ParseError(f"value {val!r} is not finite", lineno)
            last = idx
            if x != 0.0:
                indices.append(idx - 1)
                values.append(x)
        indptr.append(len(indices))
    if not labels:
        raise ParseError("no data rows")
    seen = max(indices) + 1 if indices else 0
    if dim is None:
        dim = max(seen, 1)
    elif dim < seen:
        raise ParseError(f"dim={dim} is smaller than the largest index {seen}")
    return SparseDataset(indptr, np.array(indices, dtype=np.int64), np.array(values), labels, dim)


def read_libsvm(path, dim=None):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_libsvm(fh, dim)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def write_libsvm(ds, sink):
    """Write in LIBSVM format with shortest round-trip floats; returns bytes written."""
    out = []
    for n in range(ds.n_samples):
        lo, hi = ds.indptr[n], ds.indptr[n + 1]
        parts = ["+1" if ds.labels[n] > 0 else "-1"]
        parts += [f"{i + 1}:{float(v)!r}" for i, v in zip(ds.indices[lo:hi], ds.data[lo:hi])]
        out.append(" ".join(parts) + "\n")
    return _emit("".join(out), sink)


def _emit(text, sink):
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sink.write(text)
    return len(text.encode("utf-8"))


def normalize_rows(ds):
    """Scale every row to unit Euclidean norm."""
    data = ds.data.copy()
    for n in range(ds.n_samples):
        lo, hi = ds.indptr[n], ds.indptr[n + 1]
        row = ds.data[lo:hi]
        norm = math.sqrt(kernels.dot(row, row)) if hi > lo else 0.0
        if norm == 0.0:
            raise DataError(f"row {n} is all zero and cannot be normalized")
        data[lo:hi] = row / norm
    return SparseDataset(ds.indptr, ds.indices, data, ds.labels, ds.dim)


def _num(v):
    return "%.17g" % v


def write_trace(records, sink):
    """Write TraceRecords as CSV; returns the number of bytes written."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    last = 0
    for r in records:
        if r.outer <= last:
            raise ValueError("trace rows must have strictly increasing outer")
        last = r.outer
        w.writerow(
            [
                r.outer,
                _num(r.data_passes),
                _num(r.wall_ms),
                _num(r.objective),
                "" if r.suboptimality is None else _num(r.suboptimality),
                r.nnz,
                _num(r.gradmap_norm),
            ]
        )
    return _emit(buf.getvalue(), sink)


def read_trace(source):
    if isinstance(source, (str, Path)) and Path(source).exists():
        with open(source, encoding="utf-8", newline="") as fh:
            return read_trace(fh)
    reader = csv.reader(_open_text(source))
    header = next(reader, None)
    if tuple(header or ()) != TRACE_FIELDS:
        raise ParseError(f"unexpected trace header {header}", 1)
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(
                TraceRecord(
                    outer=int(row[0]),
                    data_passes=float(row[1]),
                    wall_ms=float(row[2]),
                    objective=float(row[3]),
                    suboptimality=None if row[4] == "" else float(row[4]),
                    nnz=int(row[5]),
                    gradmap_norm=float(row[6]),
                )
            )
        except (ValueError, IndexError):
            raise ParseError("malformed trace row", lineno) from None
    return out


@dataclass
class RunMeta:
    """Everything in a run config that is not a SolverConfig field."""

    loss: str = "logistic"
    data: str = None
    dim: int = None
    normalize: bool = False
    lambda2: float = None
    poly: str = "fig1"
    trace: str = None
    rng: str = RNG_ALGORITHM
    dataset: SparseDataset = field(default=None, compare=False, repr=False)


_CFG_TYPES = {
    "eta": float,
    "lambda1": float,
    "batch": int,
    "m_inner": int,
    "memory": int,
    "rank": int,
    "direction_mode": str,
    "baseline_mode": str,
    "anchor_choice": str,
    "sketch": str,
    "seed": int,
    "max_outer": int,
    "tol_gradmap": float,
    "fstar": float,
    "max_passes": float,
    "timing": bool,
}
_META_TYPES = {
    "loss": str,
    "data": str,
    "dim": int,
    "normalize": bool,
    "lambda2": float,
    "poly": str,
    "trace": str,
    "rng": str,
}
CONFIG_KEYS = tuple(_CFG_TYPES) + tuple(_META_TYPES) + ("solver",)


def _convert(kind, text):
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text, 0) if text.lower().startswith("0x") else int(text)
    return kind(text)


def _parse_pairs(text):
    pairs = {}
    problems = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected 'key = value'")
        elif key not in CONFIG_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
        elif key in pairs:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        else:
            pairs[key] = (val, lineno)
    return pairs, problems


def default_lambda1(n, d):
    return 1e-5 * d**0.25 / n**0.25


def _fill_defaults(cfg_vals, meta, n, d):
    batch = cfg_vals.setdefault("batch", math.ceil(math.sqrt(n)))
    cfg_vals.setdefault("m_inner", math.ceil(n / max(batch, 1)))
    cfg_vals.setdefault("memory", 5)
    cfg_vals.setdefault("rank", max(1, math.isqrt(d)))
    if meta.loss == "poly2d":
        cfg_vals.setdefault("lambda1", POLY_PRESETS[meta.poly][2])
        if meta.lambda2 is None:
            meta.lambda2 = 0.0
    else:
        cfg_vals.setdefault("lambda1", default_lambda1(n, d))
        if meta.lambda2 is None:
            meta.lambda2 = 1.0 / n


def load_config(text, base_dir=None, load_data=True):
    """Parse a run config into ``(SolverConfig, RunMeta)``.

    Every key is optional except ``data`` for dataset losses.  Counts and
    weights that depend on the data (batch, m_inner, rank, lambda1,
    lambda2) default from N and D, which is why the dataset is loaded
    here; the parsed dataset rides along in ``meta.dataset``.  All
    problems are collected and raised together as one ConfigError.
    """
    pairs, problems = _parse_pairs(text)
    cfg_vals = {}
    meta = RunMeta()
    for key, (val, lineno) in pairs.items():
        kind = _CFG_TYPES.get(key) or _META_TYPES.get(key) or str
        try:
            parsed = _convert(kind, val)
        except ValueError:
            problems.append(f"line {lineno}: {key} = {val!r} is not a valid {kind.__name__}")
            continue
        if key in _CFG_TYPES:
            cfg_vals[key] = parsed
        elif key != "solver":
            setattr(meta, key, parsed)
    if "solver" in pairs:
        name = pairs["solver"][0]
        if name not in SOLVER_NAMES:
            problems.append(f"unknown solver {name!r}")
        else:
            d_mode, b_mode = SOLVER_NAMES[name]
            for key, want in (("direction_mode", d_mode), ("baseline_mode", b_mode)):
                if cfg_vals.setdefault(key, want) != want:
                    problems.append(f"solver {name!r} contradicts {key} = {cfg_vals[key]}")
    elif "baseline_mode" in cfg_vals and cfg_vals["baseline_mode"] != "none":
        cfg_vals.setdefault("direction_mode", "none")
    if meta.loss not in LOSSES:
        problems.append(f"unknown loss {meta.loss!r}")
    if meta.poly not in POLY_PRESETS:
        problems.append(f"unknown poly preset {meta.poly!r}")
    if meta.rng != RNG_ALGORITHM:
        problems.append(f"rng must be {RNG_ALGORITHM}, got {meta.rng!r}")
    if meta.lambda2 is not None and not meta.lambda2 >= 0:
        problems.append(f"lambda2 must be nonnegative, got {meta.lambda2}")
    if meta.loss in ("logistic", "least_squares") and meta.data is None:
        problems.append("missing data path")
    if problems:
        raise ConfigError(problems)

    n, d, known = 1, 2, meta.loss == "poly2d"
    if not known and load_data:
        path = Path(meta.data)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        ds = read_libsvm(path, meta.dim)
        if meta.normalize:
            ds = normalize_rows(ds)
        meta.dataset = ds
        n, d, known = ds.n_samples, ds.dim, True
    elif not known and meta.dim is not None:
        d = meta.dim
    _fill_defaults(cfg_vals, meta, n, d)
    cfg = SolverConfig(**cfg_vals)
    problems = cfg.problems()
    if known and cfg.rank > d:
        problems.append(f"rank {cfg.rank} exceeds dimension {d}")
    if known and cfg.batch > n:
        problems.append(f"batch {cfg.batch} exceeds sample count {n}")
    if problems:
        raise ConfigError(problems)
    return cfg, meta


def serialize_config(cfg, meta):
    """Inverse of ``load_config``: every value written explicitly."""
    lines = []
    for f in fields(SolverConfig):
        val = getattr(cfg, f.name)
        if val is not None:
            lines.append(f"{f.name} = {_fmt_value(val)}")
    for f in fields(RunMeta):
        if f.name == "dataset":
            continue
        val = getattr(meta, f.name)
        if val is not None:
            lines.append(f"{f.name} = {_fmt_value(val)}")
    return "\n".join(lines) + "\n"


def _fmt_value(val):
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def merge_config_text(text, overrides):
    """Drop lines of ``text`` whose key is overridden and append the overrides."""
    kept = []
    for raw in io.StringIO(text or ""):
        key = raw.split("#", 1)[0].partition("=")[0].strip()
        if key not in overrides:
            kept.append(raw.rstrip("\n"))
    kept += [f"{k} = {_fmt_value(v)}" for k, v in overrides.items()]
    return "\n".join(kept) + "\n"
