"""Dataset CSV ingestion, model files and key=value config files."""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .detector import Detector
from .knn import DataError
from .solver import KernelSpec, RankModel, TrainingInfo

MODEL_FORMAT = "rankad-model"
MODEL_VERSION = 1


class ModelFileError(ValueError):
    """A model file is corrupt, truncated or of an unsupported version."""


class UnsupportedVersionError(ModelFileError):
    pass


class ConfigError(ValueError):
    pass


def _parse_cell(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {col}: non-finite value {text!r}")
    return value


def _is_header(cells):
    for c in cells:
        try:
            float(c)
        except ValueError:
            continue
        return False
    return True


def load_dataset(path, has_labels=False):
    """Read a numeric CSV, one sample per row.

    A first row in which no cell parses as a number is treated as a header.
    With ``has_labels`` the last column holds integer labels (0 nominal,
    1 anomaly) and ``(features, labels)`` is returned.  Rows and columns in
    error messages are 1-based as in a spreadsheet.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and _is_header(rows[0]):
        first, rows = 2, rows[1:]
    else:
        first = 1
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if has_labels and width < 2:
        raise DataError(f"{path}: labelled data needs a feature column and a label column")
    values = np.empty((len(rows), width))
    for r, cells in enumerate(rows):
        line = r + first
        if len(cells) != width:
            raise DataError(f"row {line}: expected {width} columns, found {len(cells)}")
        for c, text in enumerate(cells):
            values[r, c] = _parse_cell(text.strip(), line, c + 1)
    if not has_labels:
        return values
    labels = values[:, -1]
    bad = ~np.isin(labels, (0.0, 1.0))
    if bad.any():
        r = int(np.flatnonzero(bad)[0])
        raise DataError(f"row {r + first}, column {width}: label must be 0 or 1, got {labels[r]:g}")
    return values[:, :-1], labels.astype(int)


def save_dataset(path, X, labels=None, header=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for k, row in enumerate(X):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[k])))
            w.writerow(cells)


def _checksum(payload):
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return "sha256:" + hashlib.sha256(blob).hexdigest()


def model_payload(detector, params=None):
    model = detector.model
    info = model.info
    payload = {
        "d": model.dim,
        "kernel": {"family": model.kernel.family, "sigma": model.kernel.sigma},
        "C": model.C,
        "support_points": model.support_points.tolist(),
        "betas": model.betas.tolist(),
        "sorted_scores": detector.sorted_scores.tolist(),
        "params": dict(params or {}),
    }
    if info is not None:
        payload["training"] = {
            "primal_objective": info.primal_objective,
            "dual_objective": info.dual_objective,
            "epochs": info.epochs,
            "converged": info.converged,
            "max_violation": info.max_violation,
        }
    return payload


def save_model(detector, path, params=None):
    """Write ``detector`` as a versioned JSON document with a checksum.

    ``params`` (K, m, seeds, ...) is stored verbatim for provenance.
    """
    payload = model_payload(detector, params)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "checksum": _checksum(payload),
        "payload": payload,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path, with_params=False):
    """Inverse of :func:`save_model`; raises :class:`ModelFileError` on any damage."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not a readable model file ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path}: not a {MODEL_FORMAT} document")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"{path}: model format version {version!r} unsupported (this build reads {MODEL_VERSION})"
        )
    payload = doc.get("payload")
    if not isinstance(payload, dict) or doc.get("checksum") != _checksum(payload):
        raise ModelFileError(f"{path}: checksum mismatch; file is corrupt or was edited")
    try:
        d = int(payload["d"])
        support = np.asarray(payload["support_points"], dtype=float).reshape(-1, d)
        betas = np.asarray(payload["betas"], dtype=float)
        scores = np.asarray(payload["sorted_scores"], dtype=float)
        kernel = KernelSpec(float(payload["kernel"]["sigma"]), payload["kernel"]["family"])
        C = float(payload["C"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"{path}: malformed payload ({exc})") from None
    if betas.size != support.shape[0]:
        raise ModelFileError(f"{path}: {support.shape[0]} support points but {betas.size} coefficients")
    info = None
    if "training" in payload:
        info = TrainingInfo(**payload["training"])
    det = Detector(RankModel(support, betas, kernel, C, info=info), scores)
    return (det, payload.get("params", {})) if with_params else det


def read_config(path):
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored.

    Keys are normalised to use underscores (``pair-cap`` == ``pair_cap``).
    """
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out
