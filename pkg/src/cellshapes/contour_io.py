"""Contour and label-map ingestion plus bit-exact serialization.

Data flows in as label maps (PGM or CSV grids) or as JSON-Lines contour
files, and out as JSONL contours or feature CSVs. Tracing uses
Moore-neighbor boundary following with Jacob's stopping criterion over
8-connected foreground.

Coordinate convention: pixel (col, row) maps to the point
(col + 0.5, -(row + 0.5)); the y-negation converts the raster's
y-grows-downward frame into standard xy orientation. Under this convention
traced boundaries wind clockwise (negative shoelace area), one consistent
convention for all maps; preprocessing re-derives winding on its own anyway.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, Optional

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateContour,
    EmptyMap,
    MalformedMap,
    ParseError,
    SchemaError,
    SmallRegionWarning,
    UnsupportedFormat,
)

MIN_REGION_PIXELS = 4


class ShapeClass(IntEnum):
    CIRCULAR = 0
    ELLIPTICAL = 1
    TEARDROP = 2
    TRIANGULAR = 3
    MULTIPOLAR = 4


@dataclass
class Contour:
    """Ordered closed polyline; the last point implicitly connects to the first."""

    id: int
    points: np.ndarray  # (n, 2) float64
    class_label: Optional[int] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise DegenerateContour(f"contour {self.id}: points must be (n, 2)")
        if len(self.points) < 3:
            raise DegenerateContour(f"contour {self.id}: needs >= 3 points")


@dataclass
class LabelMap:
    """Integer raster; 0 is background, each positive id one instance."""

    labels: np.ndarray  # (height, width) int

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise MalformedMap("label grid must be 2D and non-empty")
        if np.any(self.labels < 0):
            raise MalformedMap("label ids must be non-negative")

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass
class FeatureMatrix:
    """Named numeric matrix: one row per contour, one column per feature."""

    names: list[str]
    values: np.ndarray  # (n_rows, n_features) float64
    ids: list[int]
    labels: list[Optional[int]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            self.values = self.values.reshape(len(self.ids), -1)
        if len(self.names) != self.values.shape[1]:
            raise SchemaError("feature names do not match value columns")
        if len(self.ids) != self.values.shape[0]:
            raise SchemaError("row ids do not match value rows")
        if not self.labels:
            self.labels = [None] * len(self.ids)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def label_array(self) -> np.ndarray:
        if any(l is None for l in self.labels):
            raise SchemaError("feature matrix has unlabeled rows")
        return np.asarray(self.labels, dtype=np.int64)


# --------------------------------------------------------------------------
# boundary tracing
# --------------------------------------------------------------------------

# Moore neighborhood in clockwise order (row, col offsets), starting west.
_NEIGHBORS = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_DIR_INDEX = {d: i for i, d in enumerate(_NEIGHBORS)}


def _moore_trace(mask: np.ndarray) -> list[tuple[int, int]]:
    """Boundary pixels of the 8-connected blob containing the raster-first
    foreground pixel. ``mask`` must carry a 1-pixel background border."""
    rows, cols = np.nonzero(mask)
    start = (int(rows[0]), int(cols[0]))
    # entered from the west: everything before the start in raster order is
    # background, so its west neighbor is guaranteed background
    back = 0
    boundary = [start]
    cur = start
    initial_state = None
    limit = 4 * mask.size
    for _ in range(limit):
        nxt = None
        for j in range(1, 9):
            k = (back + j) % 8
            cand = (cur[0] + _NEIGHBORS[k][0], cur[1] + _NEIGHBORS[k][1])
            if mask[cand]:
                prev = (cur[0] + _NEIGHBORS[(back + j - 1) % 8][0],
                        cur[1] + _NEIGHBORS[(back + j - 1) % 8][1])
                nxt = cand
                back = _DIR_INDEX[(prev[0] - cand[0], prev[1] - cand[1])]
                break
        if nxt is None:
            break  # isolated pixel
        state = (nxt, back)
        if initial_state is None:
            initial_state = state
        elif state == initial_state:
            break  # Jacob: start re-entered from the same direction
        cur = nxt
        if not (len(boundary) == 1 and cur == start):
            boundary.append(cur)
    if len(boundary) > 1 and boundary[-1] == boundary[0]:
        boundary.pop()
    return boundary


def _pixels_to_points(pixels: list[tuple[int, int]]) -> np.ndarray:
    pts = np.array([(c + 0.5, -(r + 0.5)) for r, c in pixels], dtype=np.float64)
    # tracing never yields consecutive duplicates, but guard anyway
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return pts[keep]


def trace_contours(label_map: LabelMap) -> list[Contour]:
    """Trace the outer boundary of every instance in the map.

    Regions below MIN_REGION_PIXELS are skipped with a warning; holes are
    ignored. Touching instances are traced independently, so shared
    boundary pixels may appear in more than one contour.
    """
    labels = label_map.labels
    ids = np.unique(labels)
    ids = ids[ids > 0]
    if len(ids) == 0:
        raise EmptyMap("label map contains no positive ids")
    slices = ndimage.find_objects(labels, max_label=int(ids.max()))
    contours = []
    for instance_id in ids:
        sl = slices[int(instance_id) - 1]
        patch = labels[sl] == instance_id
        n_px = int(patch.sum())
        if n_px < MIN_REGION_PIXELS:
            warnings.warn(
                f"id {int(instance_id)}: region of {n_px} px below minimum "
                f"{MIN_REGION_PIXELS}, skipped", SmallRegionWarning)
            continue
        padded = np.zeros((patch.shape[0] + 2, patch.shape[1] + 2), dtype=bool)
        padded[1:-1, 1:-1] = patch
        pixels = _moore_trace(padded)
        # undo padding and patch offset
        r_off = sl[0].start - 1
        c_off = sl[1].start - 1
        pixels = [(r + r_off, c + c_off) for r, c in pixels]
        pts = _pixels_to_points(pixels)
        if len(pts) < 3:
            warnings.warn(
                f"id {int(instance_id)}: boundary degenerates to {len(pts)} "
                "points, skipped", SmallRegionWarning)
            continue
        contours.append(Contour(id=int(instance_id), points=pts))
    return contours


# --------------------------------------------------------------------------
# contour JSONL
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    """Floats serialized with 17 significant digits: exact round-trip."""
    return format(float(x), ".17g")


def _contour_line(c: Contour) -> str:
    cls = "null" if c.class_label is None else str(int(c.class_label))
    pts = ",".join(f"[{_fmt(x)},{_fmt(y)}]" for x, y in c.points)
    return f'{{"id":{int(c.id)},"class":{cls},"points":[{pts}]}}'


def write_contours(contours: Iterable[Contour], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for c in contours:
            fh.write(_contour_line(c))
            fh.write("\n")


def iter_contours(path) -> Iterator[Contour]:
    """Stream contours line by line; never holds the whole file in memory."""
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line=lineno) from exc
            if not isinstance(rec, dict):
                raise ParseError("expected a JSON object", line=lineno)
            for key in ("id", "points"):
                if key not in rec:
                    raise ParseError(f'missing "{key}" key', line=lineno)
            pts = np.asarray(rec["points"], dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
                raise ParseError('"points" must be a list of >= 3 [x, y] pairs',
                                 line=lineno)
            cls = rec.get("class")
            if cls is not None:
                cls = int(cls)
            yield Contour(id=int(rec["id"]), points=pts, class_label=cls)


def read_contours(path) -> list[Contour]:
    return list(iter_contours(path))


# --------------------------------------------------------------------------
# label maps: PGM (P2 / P5) and CSV grids
# --------------------------------------------------------------------------

def _pgm_tokens(data: bytes) -> Iterator[tuple[bytes, int]]:
    """Header tokens with their end offsets; whitespace-separated, '#'
    comments run to end of line."""
    i = 0
    n = len(data)
    while i < n:
        ch = data[i:i + 1]
        if ch in b" \t\r\n":
            i += 1
        elif ch == b"#":
            while i < n and data[i:i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < n and data[j:j + 1] not in b" \t\r\n#":
                j += 1
            yield data[i:j], j
            i = j


def _read_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic == b"P2":
        tokens = [t for t, _ in _pgm_tokens(data)]
        try:
            width, height, maxval = (int(t) for t in tokens[1:4])
            values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad P2 header or payload: {exc}") from exc
        if maxval > 65535:
            raise UnsupportedFormat(f"maxval {maxval} exceeds 65535")
        if values.size != width * height:
            raise ParseError(
                f"expected {width * height} pixels, found {values.size}")
        return values.reshape(height, width)
    if magic == b"P5":
        # header: magic, width, height, maxval, then ONE whitespace byte,
        # then the raster
        tok = _pgm_tokens(data)
        try:
            next(tok)
            width = int(next(tok)[0])
            height = int(next(tok)[0])
            maxval_tok, header_end = next(tok)
            maxval = int(maxval_tok)
        except (StopIteration, ValueError) as exc:
            raise ParseError(f"bad P5 header: {exc}") from exc
        if maxval > 65535:
            raise UnsupportedFormat(f"maxval {maxval} exceeds 65535")
        raster_at = header_end + 1  # exactly one whitespace byte
        dtype = ">u2" if maxval > 255 else "u1"
        count = width * height
        raster = np.frombuffer(data, dtype=dtype, count=count, offset=raster_at)
        if raster.size != count:
            raise ParseError("P5 raster truncated")
        return raster.astype(np.int64).reshape(height, width)
    raise UnsupportedFormat(f"unknown magic {magic!r} (want P2, P5, or CSV)")


def _read_csv_grid(text: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.replace(",", " ").split()])
        except ValueError as exc:
            raise ParseError(f"non-integer cell: {exc}", line=lineno) from exc
    if not rows:
        raise ParseError("empty CSV grid")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise MalformedMap(f"ragged CSV grid: row widths {sorted(widths)}")
    return np.asarray(rows, dtype=np.int64)


def read_label_map(path) -> LabelMap:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] in (b"P2", b"P5"):
        grid = _read_pgm(data)
    elif data[:1] == b"P":
        raise UnsupportedFormat(f"PNM magic {data[:2]!r} not supported")
    else:
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise UnsupportedFormat("not a PGM and not ASCII CSV") from exc
        grid = _read_csv_grid(text)
    return LabelMap(labels=grid)


def write_label_map_pgm(label_map: LabelMap, path, binary: bool = True) -> None:
    grid = label_map.labels
    maxval = max(int(grid.max()), 1)
    if maxval > 65535:
        raise UnsupportedFormat("ids beyond 65535 cannot be written as PGM")
    header = f"{'P5' if binary else 'P2'}\n{label_map.width} {label_map.height}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(grid.astype(dtype).tobytes())
        else:
            body = "\n".join(" ".join(str(v) for v in row) for row in grid)
            fh.write(body.encode("ascii"))
            fh.write(b"\n")


# --------------------------------------------------------------------------
# feature CSV
# --------------------------------------------------------------------------

def write_features(fm: FeatureMatrix, path) -> None:
    """CSV with mandatory header ``id,class,<feature names...>``."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("id,class," + ",".join(fm.names) + "\n")
        for i in range(fm.n_rows):
            cls = "" if fm.labels[i] is None else str(int(fm.labels[i]))
            row = ",".join(_fmt(v) for v in fm.values[i])
            fh.write(f"{int(fm.ids[i])},{cls},{row}\n")


def read_features(path) -> FeatureMatrix:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        cols = header.split(",")
        if cols[:2] != ["id", "class"]:
            raise SchemaError('feature CSV must start with "id,class" columns')
        names = cols[2:]
        ids: list[int] = []
        labels: list[Optional[int]] = []
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise ParseError(
                    f"expected {len(cols)} fields, found {len(parts)}",
                    line=lineno)
            ids.append(int(parts[0]))
            labels.append(None if parts[1] == "" else int(parts[1]))
            try:
                rows.append([float(v) for v in parts[2:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    values = np.asarray(rows, dtype=np.float64).reshape(len(ids), len(names))
    return FeatureMatrix(names=names, values=values, ids=ids, labels=labels)
