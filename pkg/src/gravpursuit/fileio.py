"""Readers for coefficient models and orbit tracks, writers/readers for
expansions and gridded fields.

Conventions worth stating once: geopotential "gfc" rows (n, m, C, S) map
to the real basis as C -> order j = -m (cosine branch) and, for m > 0,
S -> j = +m.  Orbit files carry radii in the same unit as the reference
radius; radii are normalized to sigma = r / reference_radius and rows at
or below the unit sphere are dropped with a reported count.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import APK, APW, SH
from .forward import CoefficientModel
from .geometry import BallPoint
from .solver import Approximation, HistoryRow

__all__ = [
    "OrbitTrack",
    "read_coefficients",
    "write_coefficients",
    "read_orbit",
    "write_expansion",
    "read_expansion",
    "write_grid_csv",
    "read_dataset_csv",
    "write_dataset_csv",
]

DEFAULT_REFERENCE_RADIUS = 6_371_000.0


@dataclass
class OrbitTrack:
    """Normalized orbit samples: radius ratios and unit directions."""

    sigma: np.ndarray
    lon: np.ndarray
    t: np.ndarray
    rejected: int = 0

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.lon = np.asarray(self.lon, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        if self.sigma.shape[0] < 1:
            raise ValueError("orbit track must contain at least one point")
        if np.any(self.sigma <= 1.0):
            raise ValueError("all orbit radii must exceed the reference radius")


def _parse_float(token: str, path, lineno: int) -> float:
    try:
        v = float(token.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise ValueError(f"{path}:{lineno}: malformed numeric field {token!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"{path}:{lineno}: non-finite value {token!r}")
    return v


def _parse_int(token: str, path, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: malformed integer field {token!r}") from None


def read_coefficients(path, fmt: str = "simple", min_degree: int = 3) -> CoefficientModel:
    """Load a coefficient model from a gfc subset or a simple "n j value" file.

    Duplicate (n, j) entries keep the last value and emit a warning.  The
    min_degree cutoff only affects synthesis; all coefficients are kept.
    """
    if fmt not in ("gfc", "simple"):
        raise ValueError(f"unknown coefficient format {fmt!r}")
    coeffs = {}

    def put(n, j, v, lineno):
        if (n, j) in coeffs:
            warnings.warn(f"{path}:{lineno}: duplicate coefficient ({n}, {j}), last wins")
        coeffs[(n, j)] = v

    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if fmt == "gfc":
                if tokens[0] != "gfc":
                    continue
                if len(tokens) < 5:
                    raise ValueError(f"{path}:{lineno}: gfc row needs n m C S")
                n = _parse_int(tokens[1], path, lineno)
                m = _parse_int(tokens[2], path, lineno)
                c = _parse_float(tokens[3], path, lineno)
                s = _parse_float(tokens[4], path, lineno)
                if not 0 <= m <= n:
                    raise ValueError(f"{path}:{lineno}: order {m} outside [0, {n}]")
                put(n, -m, c, lineno)
                if m > 0:
                    put(n, m, s, lineno)
            else:
                if tokens[0].startswith("#"):
                    continue
                body = line.split("#", 1)[0].split()
                if len(body) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'n j value'")
                n = _parse_int(body[0], path, lineno)
                j = _parse_int(body[1], path, lineno)
                if abs(j) > n:
                    raise ValueError(f"{path}:{lineno}: order {j} outside [-{n}, {n}]")
                put(n, j, _parse_float(body[2], path, lineno), lineno)
    if not coeffs:
        raise ValueError(f"{path}: no coefficients found")
    return CoefficientModel(coeffs, min_degree=min_degree)


def write_coefficients(model: CoefficientModel, path):
    """Simple-format writer; round-trips bit-exactly with read_coefficients."""
    with open(path, "w") as fh:
        fh.write("# n j value\n")
        for (n, j) in sorted(model.coeffs):
            fh.write(f"{n} {j} {model.coeffs[(n, j)]!r}\n")


def read_orbit(path, reference_radius: float = DEFAULT_REFERENCE_RADIUS) -> OrbitTrack:
    """Orbit CSV with header "x,y,z" (Cartesian) or "r,lon,t" (spherical)."""
    if reference_radius <= 0:
        raise ValueError("reference radius must be positive")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty orbit file") from None
        cartesian = header == ["x", "y", "z"]
        if not cartesian and header != ["r", "lon", "t"]:
            raise ValueError(f"{path}: header must be 'x,y,z' or 'r,lon,t'")
        sigma, lon, t = [], [], []
        rejected = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            vals = [_parse_float(c, path, lineno) for c in row]
            if len(vals) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns")
            if cartesian:
                r = math.sqrt(vals[0] ** 2 + vals[1] ** 2 + vals[2] ** 2)
                s = r / reference_radius
                if s <= 1.0:
                    rejected += 1
                    continue
                tt = min(1.0, max(-1.0, vals[2] / r))
                ll = 0.0 if (vals[0] == 0.0 and vals[1] == 0.0) else math.atan2(vals[1], vals[0])
                sigma.append(s)
                lon.append(ll % (2.0 * math.pi))
                t.append(tt)
            else:
                s = vals[0] / reference_radius
                if s <= 1.0:
                    rejected += 1
                    continue
                if not -1.0 <= vals[2] <= 1.0:
                    raise ValueError(f"{path}:{lineno}: polar coordinate outside [-1, 1]")
                sigma.append(s)
                lon.append(vals[1] % (2.0 * math.pi))
                t.append(vals[2])
    if rejected:
        warnings.warn(f"{path}: rejected {rejected} rows at or below the unit sphere")
    if not sigma:
        raise ValueError(f"{path}: no valid orbit rows")
    return OrbitTrack(np.array(sigma), np.array(lon), np.array(t), rejected)


_TYPE_TAGS = {SH: "sh", APK: "apk", APW: "apw"}


def _term_to_json(alpha, element, row: HistoryRow | None):
    entry = {"type": _TYPE_TAGS[type(element)], "alpha": alpha}
    if isinstance(element, SH):
        entry["n"] = element.n
        entry["j"] = element.j
    else:
        entry["x"] = list(element.x.to_cartesian())
    if row is not None:
        entry["iteration"] = row.iteration
        entry["objective"] = row.objective
        entry["rde"] = row.rde
    return entry


def _term_from_json(entry, where: str):
    tag = entry.get("type")
    alpha = entry.get("alpha")
    if tag == "sh":
        element = SH(int(entry["n"]), int(entry["j"]))
    elif tag in ("apk", "apw"):
        bp = BallPoint.from_cartesian(np.array(entry["x"], dtype=float))
        element = (APK if tag == "apk" else APW)(bp)
    else:
        raise ValueError(f"{where}: unknown element type tag {tag!r}")
    if alpha is None or not math.isfinite(alpha):
        raise ValueError(f"{where}: missing or non-finite weight")
    return float(alpha), element


def write_expansion(a: Approximation, history, path):
    """JSON dump of an expansion plus per-term iteration diagnostics."""
    history = list(history) if history is not None else []
    terms = []
    for i, (alpha, element) in enumerate(a.terms):
        row = history[i] if i < len(history) else None
        terms.append(_term_to_json(alpha, element, row))
    with open(path, "w") as fh:
        json.dump({"format": "expansion-v1", "terms": terms}, fh, indent=1)
        fh.write("\n")


def read_expansion(path):
    """Exact inverse of write_expansion; returns (Approximation, history)."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("format") != "expansion-v1":
        raise ValueError(f"{path}: not an expansion file")
    terms = []
    history = []
    for i, entry in enumerate(doc.get("terms", [])):
        alpha, element = _term_from_json(entry, f"{path} term {i}")
        terms.append((alpha, element))
        if "iteration" in entry:
            history.append(HistoryRow(int(entry["iteration"]), element, alpha,
                                      float(entry.get("objective", math.nan)),
                                      float(entry.get("rde", math.nan)), math.nan))
    return Approximation(terms=terms), history


def write_grid_csv(field, path):
    """Rows "lon,t,value" in grid order; floats round-trip exactly."""
    lon, t = field.grid.lon_t_arrays()
    with open(path, "w", newline="") as fh:
        fh.write("lon,t,value\n")
        for i in range(len(lon)):
            fh.write(f"{float(lon[i])!r},{float(t[i])!r},{float(field.values[i])!r}\n")


def write_dataset_csv(ds, path):
    with open(path, "w", newline="") as fh:
        fh.write("sigma,lon,t,y\n")
        for i in range(ds.size):
            fh.write(f"{float(ds.sigma[i])!r},{float(ds.lon[i])!r},"
                     f"{float(ds.t[i])!r},{float(ds.y[i])!r}\n")


def read_dataset_csv(path):
    from .forward import DataSet
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["sigma", "lon", "t", "y"]:
            raise ValueError(f"{path}: header must be 'sigma,lon,t,y'")
        cols = [[], [], [], []]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns")
            for c, col in zip(row, cols):
                col.append(_parse_float(c, path, lineno))
    if not cols[0]:
        raise ValueError(f"{path}: no data rows")
    return DataSet(*[np.array(c) for c in cols])
