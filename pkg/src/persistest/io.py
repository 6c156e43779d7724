"""Reading and writing point clouds, diagrams, paths and reports."""
from __future__ import annotations

import csv
import hashlib
import json
import re
import warnings
from pathlib import Path

import numpy as np

from .cech import PersistenceDiagram, PointCloud
from .errors import InputError
from .wasserstein import distance_matrix

__all__ = [
    "ingest_clouds",
    "write_clouds",
    "write_diagrams",
    "read_diagrams",
    "write_json",
    "write_csv",
    "cached_distance_matrix",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(tok: str, where: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise InputError(f"{where}: cannot parse {tok!r} as a number") from None


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if row and not row[0].startswith("#")]
    if not rows:
        return [], []
    return [h.strip() for h in rows[0][1]], rows[1:]


def _ingest_long(path: Path, domain) -> list[PointCloud]:
    header, rows = _read_rows(path)
    if not header:
        warnings.warn(f"{path} is empty; no clouds read", RuntimeWarning, stacklevel=3)
        return []
    if len(header) < 3 or header[0] != "t" or header[1] != "point_id":
        raise InputError(f"{path}: long format needs a header 't,point_id,x1,...,xd'")
    d = len(header) - 2
    groups: dict[float, list[tuple[float, list[float]]]] = {}
    for lineno, row in rows:
        if len(row) != d + 2:
            raise InputError(f"{path}, row {lineno}: expected {d + 2} fields, found {len(row)}")
        where = f"{path}, row {lineno}"
        t = _parse_float(row[0], where)
        pid = _parse_float(row[1], where)
        groups.setdefault(t, []).append((pid, [_parse_float(x, where) for x in row[2:]]))
    if not groups:
        warnings.warn(f"{path} has a header but no rows; no clouds read", RuntimeWarning, stacklevel=3)
    clouds = []
    for t in sorted(groups):
        pts = [p for _, p in sorted(groups[t], key=lambda e: e[0])]
        clouds.append(PointCloud(np.array(pts, dtype=float).reshape(-1, d), dim=d, domain=domain))
    return clouds


def _natural_key(p: Path):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", p.name)]


def _ingest_dir(path: Path, domain) -> list[PointCloud]:
    files = sorted((p for p in path.iterdir() if p.suffix.lower() == ".csv"), key=_natural_key)
    clouds = []
    dim = None
    for f in files:
        header, rows = _read_rows(f)
        if not header:
            warnings.warn(f"{f} is empty; read as an empty cloud", RuntimeWarning, stacklevel=3)
            clouds.append(PointCloud(np.empty((0, dim or 1)), domain=domain))
            continue
        cols = [i for i, h in enumerate(header) if re.fullmatch(r"x\d+", h)]
        if not cols:
            raise InputError(f"{f}: header needs coordinate columns x1..xd")
        if dim is not None and len(cols) != dim:
            raise InputError(f"{f}: dimension {len(cols)} differs from earlier files ({dim})")
        dim = len(cols)
        pts = []
        for lineno, row in rows:
            if len(row) != len(header):
                raise InputError(f"{f}, row {lineno}: expected {len(header)} fields, found {len(row)}")
            pts.append([_parse_float(row[i], f"{f}, row {lineno}") for i in cols])
        if not pts:
            warnings.warn(f"{f} has no points", RuntimeWarning, stacklevel=3)
        clouds.append(PointCloud(np.array(pts, dtype=float).reshape(-1, dim), dim=dim, domain=domain))
    return clouds


def ingest_clouds(path, format: str = "long", domain: tuple[float, float] | None = None) -> list[PointCloud]:
    """Read a time series of point clouds, ordered by t.

    ``format="long"``: one CSV with columns t, point_id, x1..xd.
    ``format="dir"``: a directory with one CSV (columns x1..xd) per time step,
    ordered by the numbers in the file names.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path} does not exist")
    if format == "long":
        return _ingest_long(path, domain)
    if format == "dir":
        if not path.is_dir():
            raise InputError(f"{path} is not a directory")
        return _ingest_dir(path, domain)
    raise InputError(f"unknown cloud format {format!r}")


def write_clouds(clouds, path, format: str = "long") -> Path:
    path = Path(path)
    if format == "long":
        d = clouds[0].dim if clouds else 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "point_id"] + [f"x{i + 1}" for i in range(d)])
            for t, c in enumerate(clouds, start=1):
                for j, p in enumerate(c.points):
                    w.writerow([t, j] + [_fmt(x) for x in p])
    elif format == "dir":
        path.mkdir(parents=True, exist_ok=True)
        width = max(4, len(str(len(clouds))))
        for t, c in enumerate(clouds, start=1):
            with open(path / f"cloud_{t:0{width}d}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([f"x{i + 1}" for i in range(c.dim)])
                for p in c.points:
                    w.writerow([_fmt(x) for x in p])
    else:
        raise InputError(f"unknown cloud format {format!r}")
    return path


def write_diagrams(diagrams, path) -> Path:
    """CSV with a ``# feature_dim=k n_diagrams=N`` line, then index,birth,death rows."""
    if isinstance(diagrams, PersistenceDiagram):
        diagrams = [diagrams]
    k = diagrams[0].feature_dim if diagrams else 0
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# feature_dim={k} n_diagrams={len(diagrams)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "birth", "death"])
        for i, D in enumerate(diagrams):
            for b, d in D.pairs:
                w.writerow([i, _fmt(b), _fmt(d)])
    return path


def read_diagrams(path) -> list[PersistenceDiagram]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path} does not exist")
    text = path.read_text().splitlines()
    k, count = 0, None
    for line in text:
        if line.startswith("#"):
            m = re.search(r"feature_dim=(\d+)", line)
            if m:
                k = int(m.group(1))
            m = re.search(r"n_diagrams=(\d+)", line)
            if m:
                count = int(m.group(1))
    header, rows = _read_rows(path)
    if header and header[:1] != ["index"]:
        # bare birth,death file: a single diagram
        if len(header) != 2:
            raise InputError(f"{path}: expected columns index,birth,death or birth,death")
        pts = [[_parse_float(x, f"{path}, row {n}") for x in row] for n, row in rows]
        return [PersistenceDiagram(pts, k)]
    groups: dict[int, list[list[float]]] = {}
    for lineno, row in rows:
        if len(row) != 3:
            raise InputError(f"{path}, row {lineno}: expected 3 fields, found {len(row)}")
        where = f"{path}, row {lineno}"
        groups.setdefault(int(_parse_float(row[0], where)), []).append(
            [_parse_float(row[1], where), _parse_float(row[2], where)]
        )
    n = count if count is not None else (max(groups) + 1 if groups else 0)
    return [PersistenceDiagram(groups.get(i, []), k) for i in range(n)]


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def _diagram_set_hash(diagrams, r: float) -> str:
    h = hashlib.sha256()
    h.update(f"r={float(r)!r};n={len(diagrams)}".encode())
    for D in diagrams:
        h.update(np.int64(len(D)).tobytes())
        h.update(np.ascontiguousarray(D.pairs, dtype="<f8").tobytes())
    return h.hexdigest()


def cached_distance_matrix(diagrams, r: float, cache_dir=None, threads: int | None = 1) -> np.ndarray:
    """Pairwise W_r matrix, stored under ``cache_dir`` keyed by a content hash."""
    if cache_dir is None:
        return distance_matrix(diagrams, r, threads)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    f = cache_dir / f"dist-{_diagram_set_hash(diagrams, r)[:32]}.npy"
    if f.exists():
        return np.load(f)
    D = distance_matrix(diagrams, r, threads)
    np.save(f, D)
    return D
