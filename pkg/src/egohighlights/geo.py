"""GPS track handling: node aggregation, crowd-sourced importance, time filters.

A track is clustered into location nodes by walking it in time order and
opening a new node whenever the current point is further from the node's
anchor than a speed-scaled radius.  Nodes are scored from nearby points of
interest and the scores drive a keep/drop filter over time intervals.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088


class PoiLookupError(Exception):
    """Raised when a POI lookup fails and no cached answer exists."""


@dataclass
class GpsPoint:
    lat: float
    lon: float
    timestamp: float
    speed: Optional[float] = None  # m/s; derived from neighbors when absent
    elevation: Optional[float] = None

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.speed is not None and self.speed < 0:
            raise ValueError(f"negative speed: {self.speed}")


@dataclass
class PoiRecord:
    name: str
    review_count: int
    rating: float
    lat: float
    lon: float

    def __post_init__(self):
        if self.review_count < 0:
            raise ValueError("review_count must be >= 0")
        if not (0.0 <= self.rating <= 5.0):
            raise ValueError("rating must be in [0, 5]")


@dataclass
class GeoNode:
    """A run of track points anchored at the point that opened the node."""

    anchor: GpsPoint
    members: list[GpsPoint]
    score: Optional[float] = None  # None until scored; None also means "unknown"
    pois: list[PoiRecord] = field(default_factory=list)

    @property
    def time_span(self) -> tuple[float, float]:
        return (self.members[0].timestamp, self.members[-1].timestamp)


@dataclass
class GeoConfig:
    d_max_km: float = 10.0
    d_min_km: float = 0.5
    # Speed is made dimensionless by dividing by a walking pace, so a walker
    # gets a radius of about d_max + d_min and a driver a proportionally
    # larger one.
    walking_speed_ms: float = 1.4
    node_score_threshold: float = 0.0
    threshold_is_percentile: bool = False
    poi_radius_km: float = 2.0

    def __post_init__(self):
        if self.d_max_km <= 0:
            raise ValueError("d_max_km must be > 0")
        if self.d_min_km < 0:
            raise ValueError("d_min_km must be >= 0")
        if self.walking_speed_ms <= 0:
            raise ValueError("walking_speed_ms must be > 0")


def haversine_km(a: GpsPoint, b: GpsPoint) -> float:
    """Great-circle distance between two points in kilometers."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def effective_speeds(track: Sequence[GpsPoint]) -> list[float]:
    """Per-point speed in m/s, deriving missing values from consecutive points.

    A zero time step carries the previous speed forward; the first point
    defaults to 0 when it has no recorded speed.
    """
    speeds: list[float] = []
    prev_speed = 0.0
    for i, p in enumerate(track):
        if p.speed is not None:
            s = p.speed
        elif i == 0:
            s = 0.0
        else:
            dt = p.timestamp - track[i - 1].timestamp
            if dt > 0:
                s = haversine_km(track[i - 1], p) * 1000.0 / dt
            else:
                s = prev_speed
        speeds.append(s)
        prev_speed = s
    return speeds


def node_radius_km(speed_ms: float, cfg: GeoConfig) -> float:
    """Break-off radius for a point traveling at the given speed."""
    return (speed_ms / cfg.walking_speed_ms) * cfg.d_max_km + cfg.d_min_km


def aggregate_nodes(track: Sequence[GpsPoint], cfg: GeoConfig) -> list[GeoNode]:
    """Partition a time-sorted track into location nodes.

    A new node opens at point p when haversine(anchor, p) exceeds the
    speed-scaled radius; p becomes the new node's anchor.
    """
    if not track:
        raise ValueError("empty GPS track")
    for prev, cur in zip(track, track[1:]):
        if cur.timestamp < prev.timestamp:
            raise ValueError("track timestamps must be non-decreasing")

    speeds = effective_speeds(track)
    nodes: list[GeoNode] = []
    anchor = track[0]
    members = [anchor]
    for p, s in zip(track[1:], speeds[1:]):
        if haversine_km(anchor, p) > node_radius_km(s, cfg):
            nodes.append(GeoNode(anchor=anchor, members=members))
            anchor = p
            members = [p]
        else:
            members.append(p)
    nodes.append(GeoNode(anchor=anchor, members=members))
    return nodes


def score_node(node: GeoNode) -> float:
    """Mean of review_count * rating over the node's POIs; 0 when empty."""
    if not node.pois:
        return 0.0
    return sum(p.review_count * p.rating for p in node.pois) / len(node.pois)


def score_threshold(nodes: Iterable[GeoNode], cfg: GeoConfig) -> float:
    """Resolve the configured threshold, optionally as a percentile of known scores."""
    if not cfg.threshold_is_percentile:
        return cfg.node_score_threshold
    known = sorted(n.score for n in nodes if n.score is not None)
    if not known:
        return 0.0
    pct = min(100.0, max(0.0, cfg.node_score_threshold))
    pos = pct / 100.0 * (len(known) - 1)
    lo = int(math.floor(pos))
    hi = int(math.ceil(pos))
    return known[lo] + (known[hi] - known[lo]) * (pos - lo)


def importance_intervals(nodes: Sequence[GeoNode], threshold: float) -> list[tuple[float, float]]:
    """Merged, sorted time intervals of nodes at or above the threshold.

    Nodes whose score is unknown (lookup failed) are kept: dropping footage
    over a failed network call is the worse failure mode.
    """
    spans = [n.time_span for n in nodes if n.score is None or n.score >= threshold]
    spans.sort()
    merged: list[tuple[float, float]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


# --------------------------------------------------------------------------
# POI lookup with an on-disk cache
# --------------------------------------------------------------------------

class PoiClient(Protocol):
    """Anything that can search businesses/monuments around a coordinate."""

    def search(self, lat: float, lon: float, radius_km: float) -> list[PoiRecord]:
        ...


class StaticPoiClient:
    """In-memory client for tests and offline fixtures."""

    def __init__(self, table: dict[tuple[float, float], list[PoiRecord]]):
        self.table = table
        self.calls = 0

    def search(self, lat: float, lon: float, radius_km: float) -> list[PoiRecord]:
        self.calls += 1
        return list(self.table.get((round(lat, 4), round(lon, 4)), []))


def _cache_key(lat: float, lon: float, radius_km: float) -> str:
    # 4 decimal places is about 11 m, enough for reruns to hit despite float noise
    return f"{lat:.4f}_{lon:.4f}_r{radius_km:g}"


class CachedPoiSource:
    """POI lookups backed by one JSON document per (lat, lon, radius) key.

    Reads never lock; writes go through a temp file and an atomic rename so
    concurrent scorers see either the old or the new document, never a torn one.
    """

    def __init__(self, cache_dir: Path | str, client: Optional[PoiClient] = None):
        self.cache_dir = Path(cache_dir)
        self.client = client

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"poi_{key}.json"

    def lookup(self, lat: float, lon: float, radius_km: float) -> list[PoiRecord]:
        key = _cache_key(lat, lon, radius_km)
        path = self._path(key)
        if path.exists():
            doc = json.loads(path.read_text())
            return [
                PoiRecord(
                    name=p["name"],
                    review_count=int(p["review_count"]),
                    rating=float(p["rating"]),
                    lat=float(p["lat"]),
                    lon=float(p["lon"]),
                )
                for p in doc["pois"]
            ]
        if self.client is None:
            raise PoiLookupError(f"no cache entry for {key} and no client configured")
        try:
            pois = self.client.search(lat, lon, radius_km)
        except Exception as exc:
            raise PoiLookupError(f"POI lookup failed for {key}: {exc}") from exc
        self._write(path, lat, lon, radius_km, pois)
        return pois

    def _write(self, path: Path, lat: float, lon: float, radius_km: float,
               pois: list[PoiRecord]) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            "lat": lat,
            "lon": lon,
            "radius_km": radius_km,
            "fetched_at": time.time(),
            "pois": [
                {
                    "name": p.name,
                    "review_count": p.review_count,
                    "rating": p.rating,
                    "lat": p.lat,
                    "lon": p.lon,
                }
                for p in pois
            ],
        }
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(doc, fh)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def fetch_pois(node: GeoNode, source: CachedPoiSource, radius_km: float = 2.0) -> list[PoiRecord]:
    """POIs around the node anchor, via cache when available."""
    return source.lookup(node.anchor.lat, node.anchor.lon, radius_km)


def score_nodes(nodes: Sequence[GeoNode], source: CachedPoiSource,
                radius_km: float = 2.0) -> list[GeoNode]:
    """Attach POIs and scores in place; failed lookups leave score unknown."""
    for node in nodes:
        try:
            node.pois = fetch_pois(node, source, radius_km)
            node.score = score_node(node)
        except PoiLookupError as exc:
            logger.warning("node at (%.4f, %.4f): %s; keeping as important",
                           node.anchor.lat, node.anchor.lon, exc)
            node.score = None
    return list(nodes)


# --------------------------------------------------------------------------
# Track file parsing
# --------------------------------------------------------------------------

def parse_track_csv(path: Path | str) -> list[GpsPoint]:
    """CSV with header timestamp,lat,lon[,speed][,elevation]."""
    points: list[GpsPoint] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"timestamp", "lat", "lon"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header with timestamp,lat,lon")
        for row in reader:
            speed = row.get("speed")
            elevation = row.get("elevation")
            points.append(
                GpsPoint(
                    lat=float(row["lat"]),
                    lon=float(row["lon"]),
                    timestamp=float(row["timestamp"]),
                    speed=float(speed) if speed not in (None, "") else None,
                    elevation=float(elevation) if elevation not in (None, "") else None,
                )
            )
    return points


def _gpx_time(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def parse_track_gpx(path: Path | str) -> list[GpsPoint]:
    """GPX 1.1 track points (lat/lon/time/ele); namespace tolerant."""
    points: list[GpsPoint] = []
    root = ET.parse(path).getroot()
    for el in root.iter():
        if not el.tag.endswith("trkpt"):
            continue
        lat = float(el.attrib["lat"])
        lon = float(el.attrib["lon"])
        ts = 0.0
        ele = None
        for child in el:
            if child.tag.endswith("time") and child.text:
                ts = _gpx_time(child.text)
            elif child.tag.endswith("ele") and child.text:
                ele = float(child.text)
        points.append(GpsPoint(lat=lat, lon=lon, timestamp=ts, elevation=ele))
    return points


def parse_track(path: Path | str) -> list[GpsPoint]:
    path = Path(path)
    if path.suffix.lower() == ".gpx":
        return parse_track_gpx(path)
    return parse_track_csv(path)


def nodes_to_geojson(nodes: Sequence[GeoNode]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [n.anchor.lon, n.anchor.lat],
                },
                "properties": {
                    "score": n.score,
                    "members": len(n.members),
                    "time_span": list(n.time_span),
                    "pois": len(n.pois),
                },
            }
            for n in nodes
        ],
    }
