"""Mapping tweets to regions: point-in-polygon for geo-tagged tweets, then a
profile-location gazetteer as fallback."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import DataError
from .text import Tweet


@dataclass(frozen=True, eq=False)
class RegionPolygon:
    """A region as one or more closed lon/lat rings, combined by the even-odd rule
    (so inner rings act as holes)."""

    region: str
    rings: tuple[np.ndarray, ...]

    def __post_init__(self):
        rings = []
        for r in self.rings:
            a = np.asarray(r, dtype=float)
            if a.ndim != 2 or a.shape[1] != 2 or a.shape[0] < 4:
                raise DataError(f"region {self.region}: a ring needs at least 4 lon/lat vertices")
            if not np.array_equal(a[0], a[-1]):
                raise DataError(f"region {self.region}: ring is not closed")
            rings.append(a)
        if not rings:
            raise DataError(f"region {self.region}: no rings")
        object.__setattr__(self, "rings", tuple(rings))
        lo = np.min([r.min(axis=0) for r in rings], axis=0)
        hi = np.max([r.max(axis=0) for r in rings], axis=0)
        object.__setattr__(self, "_bbox", (lo, hi))

    def contains(self, lon: float, lat: float) -> bool:
        lo, hi = self._bbox
        if not (lo[0] <= lon <= hi[0] and lo[1] <= lat <= hi[1]):
            return False
        inside = False
        for ring in self.rings:
            if point_in_ring(lon, lat, ring):
                inside = not inside
        return inside


def point_in_ring(x: float, y: float, ring: np.ndarray) -> bool:
    """Even-odd crossing test against a closed ring."""
    xs, ys = ring[:-1, 0], ring[:-1, 1]
    xe, ye = ring[1:, 0], ring[1:, 1]
    straddles = (ys > y) != (ye > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = xs + (y - ys) * (xe - xs) / (ye - ys)
    return bool(np.count_nonzero(straddles & (x < x_cross)) % 2)


def check_coordinates(lon: float, lat: float) -> None:
    if not (np.isfinite(lon) and np.isfinite(lat)) or abs(lat) > 90 or abs(lon) > 180:
        raise DataError(f"malformed coordinates lon={lon}, lat={lat}")


def normalize_place(name: str) -> str:
    return " ".join(name.casefold().split())


def load_geojson(path, id_property: str = "region") -> list[RegionPolygon]:
    """Polygon and MultiPolygon features; the region id comes from ``id_property``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    features = doc.get("features") if isinstance(doc, dict) else None
    if not isinstance(features, list):
        raise DataError(f"{path}: expected a FeatureCollection")
    out = []
    for i, feat in enumerate(features):
        props = feat.get("properties") or {}
        if id_property not in props:
            raise DataError(f"{path}: feature {i} has no {id_property!r} property")
        geom = feat.get("geometry") or {}
        kind, coords = geom.get("type"), geom.get("coordinates")
        if kind == "Polygon":
            rings = coords
        elif kind == "MultiPolygon":
            rings = [ring for poly in coords for ring in poly]
        else:
            raise DataError(f"{path}: feature {i} has unsupported geometry {kind!r}")
        out.append(RegionPolygon(str(props[id_property]), tuple(rings)))
    return out


def load_gazetteer(path) -> dict[str, str]:
    """Two-column TSV ``name<TAB>region``; an optional header row is skipped."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row or not row[0].strip():
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected name<TAB>region")
            if lineno == 1 and [c.strip().lower() for c in row] == ["name", "region"]:
                continue
            key, region = normalize_place(row[0]), row[1].strip()
            if out.get(key, region) != region:
                raise DataError(f"{path}:{lineno}: {row[0]!r} maps to two regions")
            out[key] = region
    return out


def geolocate(tweet: Tweet, polygons: Sequence[RegionPolygon],
              gazetteer: Mapping[str, str]) -> str | None:
    if tweet.has_point:
        check_coordinates(tweet.lon, tweet.lat)
        for poly in polygons:
            if poly.contains(tweet.lon, tweet.lat):
                return poly.region
    if tweet.profile_location:
        return gazetteer.get(normalize_place(tweet.profile_location))
    return None
