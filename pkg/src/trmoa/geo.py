"""Great-circle distance and a fixed-grid proximity index."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


def haversine(lat1, lon1, lat2, lon2):
    """Distance in meters on a spherical Earth. Broadcasts over numpy arrays."""
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


class GridIndex:
    """Points bucketed into cells at least ``radius`` meters wide.

    A query scans the 3x3 block around the query cell and then applies the
    exact haversine test, so results equal a brute-force scan.
    """

    def __init__(self, lats, lons, radius: float, max_abs_lat: float | None = None):
        if radius <= 0:
            raise ValueError(f"radius must be positive, got {radius}")
        self.lats = np.asarray(lats, dtype=float)
        self.lons = np.asarray(lons, dtype=float)
        self.radius = float(radius)
        self.dlat = math.degrees(radius / EARTH_RADIUS_M)
        # cells must stay >= radius wide at the most poleward latitude served
        if max_abs_lat is None:
            max_abs_lat = float(np.max(np.abs(self.lats))) if len(self.lats) else 0.0
        max_abs_lat = min(max_abs_lat + self.dlat, 89.0)
        self.dlon = min(self.dlat / math.cos(math.radians(max_abs_lat)), 360.0)
        self._cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, (la, lo) in enumerate(zip(self.lats, self.lons)):
            self._cells[self._cell(la, lo)].append(i)

    def _cell(self, lat, lon):
        return int(math.floor(lat / self.dlat)), int(math.floor(lon / self.dlon))

    def query(self, lat: float, lon: float) -> list[int]:
        """Indices of points within ``radius`` meters of (lat, lon), ascending."""
        ci, cj = self._cell(lat, lon)
        cand = [i for di in (-1, 0, 1) for dj in (-1, 0, 1) for i in self._cells.get((ci + di, cj + dj), ())]
        if not cand:
            return []
        cand = np.asarray(sorted(cand))
        d = haversine(lat, lon, self.lats[cand], self.lons[cand])
        return cand[d <= self.radius].tolist()
