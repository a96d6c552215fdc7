"""File formats used by the command line: data CSV, fit documents, reports.

Data CSV
    Comma separated, decimal point, one observation per row. An optional
    header is recognised by a non-numeric first row. Missing or
    non-numeric cells are errors that name the offending line.

Fit document
    Indented JSON with a ``format_version`` key. Numbers are written with
    Python's shortest round-trip representation, so reading a fit back
    reproduces it exactly.

Report CSV
    Columns ``index,robust_distance,outlier`` (outlier is 0/1), one row
    per input row in input order.
"""

import csv
import hashlib
import io
import json

import numpy as np

from .errors import FitFileError
from .estimator import EstimatorConfig, ReweightedFit
from .initial import LrCutoffs, WrapParams
from .univariate import ColumnScaling

FORMAT_VERSION = 1


class InputError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _scan(text, skip):
    """Slow path: locate the first bad line for a useful message."""
    width = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if lineno <= skip or not row:
            continue
        if width is None:
            width = len(row)
        if len(row) != width:
            raise InputError(f"expected {width} columns, found {len(row)}", lineno)
        for j, cell in enumerate(row):
            if cell.strip() == "":
                raise InputError(f"missing value in column {j + 1}", lineno)
            if not _is_number(cell):
                raise InputError(f"non-numeric value {cell!r} in column {j + 1}", lineno)
    raise InputError("could not parse input")


def read_matrix(path):
    """Read a numeric CSV file. Returns ``(X, header)``; header may be None."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    first = next(csv.reader(io.StringIO(text)), None)
    if first is None:
        raise InputError("empty input")
    header = None
    if not all(_is_number(c) for c in first):
        header = [c.strip() for c in first]
    skip = 1 if header else 0
    try:
        X = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=skip, ndmin=2)
    except ValueError:
        _scan(text, skip)
    if X.size == 0:
        raise InputError("no data rows")
    if header and len(header) != X.shape[1]:
        raise InputError(f"header has {len(header)} names, data {X.shape[1]} columns", 1)
    bad = np.flatnonzero(~np.isfinite(X).all(axis=1))
    if len(bad):
        raise InputError("non-finite value", int(bad[0]) + skip + 1)
    return X, header


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_to_dict(config):
    d = {}
    for key, value in vars(config).items():
        if isinstance(value, (WrapParams, LrCutoffs)):
            value = dict(vars(value))
        d[key] = value
    return d


def config_from_dict(d, cls=EstimatorConfig):
    d = dict(d)
    if d.get("wrap_params") is not None:
        d["wrap_params"] = WrapParams(**d["wrap_params"])
    if d.get("lr_cutoffs") is not None:
        d["lr_cutoffs"] = LrCutoffs(**d["lr_cutoffs"])
    names = cls.__dataclass_fields__
    return cls(**{k: v for k, v in d.items() if k in names})


def fit_to_dict(fit, header=None):
    return {
        "format_version": FORMAT_VERSION,
        "p": fit.p,
        "columns": header,
        "chosen_start": fit.chosen_start,
        "rew_factor": fit.rew_factor,
        "scaling": {
            "location": fit.scaling.location.tolist(),
            "scale": fit.scaling.scale.tolist(),
        },
        "center_raw": fit.center_raw.tolist(),
        "scatter_raw": fit.scatter_raw.tolist(),
        "center_rew": fit.center_rew.tolist(),
        "scatter_rew": fit.scatter_rew.tolist(),
        "config": config_to_dict(fit.config or EstimatorConfig()),
    }


def fit_from_dict(d):
    """Rebuild a :class:`ReweightedFit` (without per-row weights)."""
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise FitFileError(f"unsupported fit format version {version!r}")
    try:
        p = int(d["p"])
        arr = lambda key, shape: np.asarray(d[key], dtype=float).reshape(shape)
        fit = ReweightedFit(
            center_raw=arr("center_raw", p),
            scatter_raw=arr("scatter_raw", (p, p)),
            center_rew=arr("center_rew", p),
            scatter_rew=arr("scatter_rew", (p, p)),
            scaling=ColumnScaling(
                np.asarray(d["scaling"]["location"], dtype=float).reshape(p),
                np.asarray(d["scaling"]["scale"], dtype=float).reshape(p),
            ),
            chosen_start=d["chosen_start"],
            weights=np.zeros(0, dtype=bool),
            rew_factor=float(d["rew_factor"]),
            config=config_from_dict(d["config"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FitFileError(f"malformed fit file: {exc}") from None
    return fit


def write_fit(path, fit, header=None):
    with open(path, "w") as fh:
        json.dump(fit_to_dict(fit, header), fh, indent=1)
        fh.write("\n")


def read_fit(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise FitFileError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise FitFileError(f"line {exc.lineno}: {exc.msg}") from None
    return fit_from_dict(d)


def write_report(fh, report):
    """Write an :class:`OutlierReport` as CSV to an open text stream."""
    fh.write("index,robust_distance,outlier\n")
    # repr of Python floats keeps round-trip precision independent of locale
    d = report.distances.tolist()
    flags = report.flags.astype(int).tolist()
    fh.writelines(f"{i},{d[i]!r},{flags[i]}\n" for i in range(len(d)))


def read_report(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 1], rows[:, 2].astype(bool)
