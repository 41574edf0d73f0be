"""Report files, overlays and detection metrics over labeled batches."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from PIL import Image
from skimage.draw import line

from .active import ANALYZED_SEGMENTS, SegmentModel
from .errors import IngestionError, ValidationError
from .imaging import Frame
from .motion import INFARCTED, MI, NORMAL

SCHEMA = 1
CURVE_HEADER = ("frame",) + tuple(f"seg{s}" for s in ANALYZED_SEGMENTS)

# one color per segment 1..7, then the end-diastolic ghost outline
PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
)
GHOST_COLOR = (128, 128, 128)

# ground-truth coding: 1 normal, 2 hypokinetic, 3 akinetic
_LABEL_CODES = {1: NORMAL, 2: INFARCTED, 3: INFARCTED}


# -- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @classmethod
    def from_pairs(cls, predicted, actual) -> "ConfusionMatrix":
        """Count boolean (positive = True) prediction/truth pairs."""
        p = np.asarray(predicted, dtype=bool).ravel()
        a = np.asarray(actual, dtype=bool).ravel()
        if p.shape != a.shape:
            raise ValidationError("predicted and actual must have the same length")
        return cls(tp=int(np.sum(p & a)), tn=int(np.sum(~p & ~a)),
                   fp=int(np.sum(p & ~a)), fn=int(np.sum(~p & a)))


@dataclass(frozen=True)
class MetricSet:
    """Detection rates; ``None`` marks a metric whose denominator is zero."""

    accuracy: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    precision: Optional[float]
    f1: Optional[float]
    far: Optional[float]

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if (self.far is None) != (self.specificity is None):
            raise ValidationError("far and specificity are defined together")

    def as_dict(self) -> dict:
        return asdict(self)


def _ratio(num, den):
    return None if den == 0 else num / den


def compute_metrics(cm: ConfusionMatrix) -> MetricSet:
    if cm.total == 0:
        raise ValidationError("confusion matrix is empty")
    sen = _ratio(cm.tp, cm.tp + cm.fn)
    spe = _ratio(cm.tn, cm.tn + cm.fp)
    ppr = _ratio(cm.tp, cm.tp + cm.fp)
    if sen is None or ppr is None or sen + ppr == 0:
        f1 = None
    else:
        f1 = 2 * ppr * sen / (ppr + sen)
    far = None if spe is None else 1.0 - spe
    return MetricSet(accuracy=(cm.tp + cm.tn) / cm.total, sensitivity=sen, specificity=spe,
                     precision=ppr, f1=f1, far=far)


# -- ground truth and batch evaluation ---------------------------------------

def _code(value, where):
    try:
        code = int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: label {value!r} is not an integer code") from None
    if code not in _LABEL_CODES or code != value:
        raise ValidationError(f"{where}: label code must be 1, 2 or 3, got {value!r}")
    return _LABEL_CODES[code]


def parse_labels(data: Mapping) -> dict:
    """Normalize ground-truth labels to ``{echo_id: {"segments": {id: label}, "echo": label}}``.

    Segment codes 2 and 3 both become ``"infarcted"``.
    """
    if not isinstance(data, Mapping):
        raise ValidationError("labels must be a JSON object keyed by echo id")
    out = {}
    for echo_id, entry in data.items():
        if not isinstance(entry, Mapping) or "segments" not in entry or "echo" not in entry:
            raise ValidationError(f"{echo_id}: need 'segments' and 'echo' entries")
        if entry["echo"] not in (MI, NORMAL):
            raise ValidationError(f"{echo_id}: echo label must be 'MI' or 'normal'")
        segs = {}
        for key, value in entry["segments"].items():
            sid = int(key)
            if not 1 <= sid <= 7:
                raise ValidationError(f"{echo_id}: unknown segment {key!r}")
            segs[sid] = _code(value, f"{echo_id} segment {key}")
        missing = [s for s in ANALYZED_SEGMENTS if s not in segs]
        if missing:
            raise ValidationError(f"{echo_id}: no label for segments {missing}")
        out[str(echo_id)] = {"segments": segs, "echo": entry["echo"]}
    return out


def _is_parsed(labels):
    return all(isinstance(e, Mapping) and isinstance(e.get("segments"), Mapping)
               and all(isinstance(k, int) and v in (NORMAL, INFARCTED)
                       for k, v in e["segments"].items())
               for e in labels.values())


def _as_labels(labels) -> dict:
    if isinstance(labels, Mapping) and labels and _is_parsed(labels):
        return dict(labels)
    return parse_labels(labels)


def load_labels(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read labels ({exc})", path) from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: malformed JSON ({exc})", path) from exc
    return parse_labels(data)


@dataclass(frozen=True)
class BatchEvaluation:
    segments: dict
    pooled: tuple
    echo: tuple
    excluded: tuple = ()

    def segment_metrics(self) -> dict:
        return {sid: m for sid, (_, m) in self.segments.items()}

    def to_dict(self) -> dict:
        def row(cm, m):
            return {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn, **m.as_dict()}
        return {
            "segments": {str(s): row(*v) for s, v in self.segments.items()},
            "pooled": row(*self.pooled),
            "echo": row(*self.echo),
            "excluded": list(self.excluded),
        }


def _report_dicts(reports):
    if isinstance(reports, Mapping):
        items = list(reports.values())
    else:
        items = list(reports)
    out = {}
    for r in items:
        d = r if isinstance(r, Mapping) else r.to_dict()
        if d.get("schema") != SCHEMA:
            raise ValidationError(f"unsupported report schema {d.get('schema')!r}")
        if d["id"] in out:
            raise ValidationError(f"duplicate report for echo {d['id']!r}")
        out[str(d["id"])] = d
    return out


def evaluate_batch(reports, labels) -> BatchEvaluation:
    """Per-segment, pooled-segment and per-echo confusion matrices with metrics.

    ``reports`` are :class:`~activepoly.pipeline.EchoReport` objects or their
    JSON dicts; ``labels`` follow :func:`parse_labels` (raw or parsed).  The
    report ids and the label ids must coincide.  Echos whose report carries no
    diagnosis are listed in ``excluded`` and left out of every matrix.
    MI and infarcted are the positive classes.
    """
    reps = _report_dicts(reports)
    labels = _as_labels(labels)
    if set(reps) != set(labels):
        missing = sorted(set(reps) - set(labels))
        extra = sorted(set(labels) - set(reps))
        raise ValidationError(f"labels and reports differ: no label for {missing}, "
                              f"no report for {extra}")
    seg_pairs = {s: ([], []) for s in ANALYZED_SEGMENTS}
    echo_pred, echo_true, excluded = [], [], []
    for echo_id in sorted(reps):
        rep, lab = reps[echo_id], labels[echo_id]
        if rep.get("echo_label") is None:
            excluded.append(echo_id)
            continue
        echo_pred.append(rep["echo_label"] == MI)
        echo_true.append(lab["echo"] == MI)
        got = {int(s["id"]): s["label"] for s in rep["segments"]}
        for sid in ANALYZED_SEGMENTS:
            if sid not in got:
                raise ValidationError(f"{echo_id}: report has no verdict for segment {sid}")
            seg_pairs[sid][0].append(got[sid] == INFARCTED)
            seg_pairs[sid][1].append(lab["segments"][sid] == INFARCTED)
    if not echo_pred:
        raise ValidationError("no diagnosed echo to evaluate")
    segments = {}
    for sid, (p, a) in seg_pairs.items():
        cm = ConfusionMatrix.from_pairs(p, a)
        segments[sid] = (cm, compute_metrics(cm))
    pooled_cm = sum((v[0] for v in segments.values()), ConfusionMatrix(0, 0, 0, 0))
    echo_cm = ConfusionMatrix.from_pairs(echo_pred, echo_true)
    return BatchEvaluation(segments, (pooled_cm, compute_metrics(pooled_cm)),
                           (echo_cm, compute_metrics(echo_cm)), tuple(excluded))


# -- overlays ----------------------------------------------------------------

def _draw_polyline(img, poly, color):
    h, w = img.shape[:2]
    pts = np.rint(np.asarray(poly, dtype=float)).astype(int)
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        rr, cc = line(y0, x0, y1, x1)
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        img[rr[ok], cc[ok]] = color


def render_overlay(frame: Frame, model: SegmentModel, curves=None,
                   reference: Optional[SegmentModel] = None) -> np.ndarray:
    """RGB copy of ``frame`` with the seven segments drawn in :data:`PALETTE`.

    When displacement ``curves`` are given the end-diastolic outline
    ``reference`` is drawn underneath in :data:`GHOST_COLOR`, so the image
    shows how far each segment has moved.
    """
    if curves is not None and reference is None:
        raise ValidationError("a ghost outline needs the reference (end-diastolic) model")
    img = np.repeat(frame.pixels[:, :, None], 3, axis=2).astype(np.uint8)
    if curves is not None:
        _draw_polyline(img, reference.boundary(), GHOST_COLOR)
    for sid in range(1, 8):
        _draw_polyline(img, model[sid], PALETTE[sid - 1])
    return img


def write_overlay(image: np.ndarray, path) -> Path:
    path = Path(path)
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return _atomic_write(path, buf.getvalue())


# -- report files ------------------------------------------------------------

def _atomic_write(path: Path, data: bytes) -> Path:
    path = Path(path)
    try:
        os.makedirs(path.parent, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IngestionError(f"{path}: cannot write ({exc})", path) from exc
    return path


def report_json(report) -> str:
    d = report if isinstance(report, Mapping) else report.to_dict()
    return json.dumps(d, indent=2, sort_keys=False, allow_nan=False) + "\n"


def curves_csv(report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for row in report.curve_table():
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def emit_report(report, out_dir, formats=("json", "csv")) -> list:
    """Write ``<id>.json`` and/or ``<id>_curves.csv`` into ``out_dir`` atomically."""
    out_dir = Path(out_dir)
    paths = []
    for fmt in formats:
        if fmt == "json":
            paths.append(_atomic_write(out_dir / f"{report.id}.json",
                                       report_json(report).encode()))
        elif fmt == "csv":
            paths.append(_atomic_write(out_dir / f"{report.id}_curves.csv",
                                       curves_csv(report).encode()))
        else:
            raise ValidationError(f"unknown report format {fmt!r}")
    return paths


def load_report(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read report ({exc})", path) from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: malformed JSON ({exc})", path) from exc
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise ValidationError(f"{path}: not a schema-{SCHEMA} report")
    for key in ("id", "lvef", "gate", "echo_label", "segments", "max_frames", "timing_ms"):
        if key not in data:
            raise ValidationError(f"{path}: report lacks {key!r}")
    return data


def load_reports(reports_dir) -> dict:
    """All ``*.json`` reports in a directory keyed by echo id."""
    reports_dir = Path(reports_dir)
    if not reports_dir.is_dir():
        raise IngestionError(f"{reports_dir}: not a directory", reports_dir)
    out = {}
    for p in sorted(reports_dir.glob("*.json")):
        d = load_report(p)
        if d["id"] in out:
            raise ValidationError(f"{p}: duplicate report for echo {d['id']!r}")
        out[d["id"]] = d
    return out


def load_curves(path) -> list:
    """Rows of a curves CSV with ``None`` for blank cells."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read curves ({exc})", path) from exc
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise ValidationError(f"{path}: unexpected curves header")
    return [[int(r[0])] + [None if v == "" else float(v) for v in r[1:]] for r in rows[1:]]
