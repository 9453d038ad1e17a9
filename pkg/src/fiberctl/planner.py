"""Scan planning on the target plane.

The fine workspace around any coarse pose is the electrothermal hexagon, so
plans decompose a lesion into tiles the hexagon's inscribed axis-aligned
rectangle can cover. Within a tile the laser spot is rastered in serpentine
strokes; a coverage pass afterwards locates missed patches and emits
swing-back strokes through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, EmptyPath, LesionOutOfReach
from .thermal import Workspace


@dataclass(frozen=True)
class ScanParams:
    """Knobs of the raster planner and coverage evaluation."""

    spot_radius: float = 0.25
    raster_pitch: float = 0.4
    stroke_speed: float = 0.1
    settle_tolerance: float = 0.05
    coverage_grid: float = 0.05

    def __post_init__(self) -> None:
        for name in ("spot_radius", "raster_pitch", "stroke_speed",
                     "settle_tolerance", "coverage_grid"):
            if not (getattr(self, name) > 0.0):
                raise ConfigError(f"{name} must be positive")
        # A pitch above the spot diameter is allowed: underlapping passes
        # leave bands that the swing-back pass exists to recover.


class Lesion:
    """Simple polygon on the target plane, mm. Stored CCW."""

    def __init__(self, vertices) -> None:
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ConfigError("lesion needs at least 3 xy vertices")
        area2 = _signed_area2(v)
        if abs(area2) < 1e-12:
            raise ConfigError("lesion polygon is degenerate (zero area)")
        self.vertices = v if area2 > 0.0 else v[::-1].copy()

    @classmethod
    def rectangle(cls, center, width: float, height: float) -> "Lesion":
        cx, cy = float(center[0]), float(center[1])
        hw, hh = 0.5 * width, 0.5 * height
        return cls([(cx - hw, cy - hh), (cx + hw, cy - hh),
                    (cx + hw, cy + hh), (cx - hw, cy + hh)])

    @classmethod
    def disc(cls, center, radius: float, n: int = 64) -> "Lesion":
        a = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return cls(np.stack([center[0] + radius * np.cos(a),
                             center[1] + radius * np.sin(a)], axis=1))

    @property
    def area(self) -> float:
        return 0.5 * abs(_signed_area2(self.vertices))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax)"""
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """Even-odd (ray casting) membership, (N, 2) -> (N,) bool."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        v0 = self.vertices
        v1 = np.roll(v0, -1, axis=0)
        inside = np.zeros(len(pts), dtype=bool)
        for (x0, y0), (x1, y1) in zip(v0, v1):
            crosses = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (x < np.where(crosses, xi, np.inf))
        return inside

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Distance to the polygon (0 inside), (N, 2) -> (N,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ab2 = np.einsum("ij,ij->i", ab, ab)
        ap = pts[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("nij,ij->ni", ap, ab) / ab2, 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)
        d[self.contains_points(pts)] = 0.0
        return d


def _signed_area2(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass
class RasterPath:
    """Ordered laser-on strokes; each stroke is a (2, 2) start/end array."""

    strokes: list[np.ndarray] = field(default_factory=list)

    @property
    def total_length(self) -> float:
        return float(sum(np.linalg.norm(s[1] - s[0]) for s in self.strokes))

    def waypoints(self) -> np.ndarray:
        if not self.strokes:
            return np.zeros((0, 2))
        return np.concatenate([s for s in self.strokes], axis=0)

    def to_waypoints(self) -> list[dict]:
        """Phase-tagged waypoint list: transit dark to each stroke start,
        burn to its end."""
        out = []
        for s in self.strokes:
            out.append({"phase": "transit",
                        "xy": [float(s[0][0]), float(s[0][1])]})
            out.append({"phase": "burn",
                        "xy": [float(s[1][0]), float(s[1][1])]})
        return out

    @classmethod
    def from_waypoints(cls, waypoints: list[dict]) -> "RasterPath":
        strokes = []
        start = None
        for wp in waypoints:
            if wp["phase"] == "transit":
                start = np.asarray(wp["xy"], dtype=float)
            elif wp["phase"] == "burn":
                if start is None:
                    raise ConfigError("burn waypoint without a transit start")
                strokes.append(np.array([start, wp["xy"]], dtype=float))
                start = strokes[-1][1]
            else:
                raise ConfigError(f"unknown waypoint phase {wp['phase']!r}")
        return cls(strokes)


def raster_path(workspace: Workspace, pitch: float) -> RasterPath:
    """Serpentine strokes parallel to x filling the whole fine workspace.

    Rows are centred about y = 0: n = floor(height / pitch) + 1 rows, so the
    outermost rows stay strictly inside the hexagon. Stroke extents come from
    clipping long horizontal segments against the hexagon edges. Direction
    alternates row to row.
    """
    if not pitch > 0.0:
        raise ConfigError(f"pitch must be positive, got {pitch!r}")
    ys = workspace.vertices[:, 1]
    height = float(ys.max() - ys.min())
    xs = workspace.vertices[:, 0]
    n = int(math.floor(height / pitch)) + 1
    rows = (np.arange(n) - 0.5 * (n - 1)) * pitch
    path = RasterPath()
    x_lo, x_hi = float(xs.min()) - 1.0, float(xs.max()) + 1.0
    for k, y in enumerate(rows):
        clip = workspace.clip_segment((x_lo, y), (x_hi, y))
        if clip is None:
            continue
        t0, t1 = clip
        xa = x_lo + t0 * (x_hi - x_lo)
        xb = x_lo + t1 * (x_hi - x_lo)
        if xb - xa <= 0.0:
            continue
        stroke = np.array([[xa, y], [xb, y]])
        if k % 2 == 1:
            stroke = stroke[::-1].copy()
        path.strokes.append(stroke)
    if not path.strokes:
        raise EmptyPath("workspace too small for any raster row")
    return path


def inscribed_tile(workspace: Workspace) -> tuple[float, float]:
    """Width and height of the axis-aligned rectangle inscribed in the
    hexagon: x limited by the slanted edges at half the x-extent, y by the
    flat top and bottom edges."""
    v = workspace.vertices
    width = float(v[:, 0].max() - v[:, 0].min()) / 2.0
    height = float(v[:, 1].max() - v[:, 1].min())
    return width, height


@dataclass
class TilePlan:
    """One coarse pose plus the fine strokes executed there (plane coords)."""

    center: np.ndarray
    path: RasterPath

    def to_dict(self) -> dict:
        return {"center": [float(self.center[0]), float(self.center[1])],
                "waypoints": self.path.to_waypoints()}

    @classmethod
    def from_dict(cls, data: dict) -> "TilePlan":
        return cls(np.asarray(data["center"], dtype=float),
                   RasterPath.from_waypoints(data["waypoints"]))


@dataclass
class ScanPlan:
    tiles: list[TilePlan]
    tile_size: tuple[float, float]
    pitch: float

    @property
    def n_strokes(self) -> int:
        return sum(len(t.path.strokes) for t in self.tiles)

    @property
    def total_stroke_length(self) -> float:
        return float(sum(t.path.total_length for t in self.tiles))

    def to_dict(self) -> dict:
        return {"tile_size": list(self.tile_size), "pitch": self.pitch,
                "n_tiles": len(self.tiles), "n_strokes": self.n_strokes,
                "tiles": [t.to_dict() for t in self.tiles]}


def plan_scan(workspace: Workspace, lesion: Lesion,
              params: ScanParams) -> ScanPlan:
    """Tile the lesion bounding box and raster each tile in serpentine order.

    Strokes are clipped to the lesion dilated by the spot radius, so every
    waypoint's spot touches tissue. Tiles whose rectangle misses the dilated
    lesion are dropped. Tile traversal is boustrophedon over the grid, as is
    row traversal within each tile.
    """
    tw, th = inscribed_tile(workspace)
    xmin, ymin, xmax, ymax = lesion.bbox
    r = params.spot_radius
    xmin, ymin, xmax, ymax = xmin - r, ymin - r, xmax + r, ymax + r
    nx = max(1, int(math.ceil((xmax - xmin) / tw)))
    ny = max(1, int(math.ceil((ymax - ymin) / th)))
    # Centre the tile grid on the dilated bbox.
    gx0 = 0.5 * (xmin + xmax) - 0.5 * nx * tw
    gy0 = 0.5 * (ymin + ymax) - 0.5 * ny * th

    tiles: list[TilePlan] = []
    for jy in range(ny):
        cols = range(nx) if jy % 2 == 0 else range(nx - 1, -1, -1)
        cy = gy0 + (jy + 0.5) * th
        for jx in cols:
            cx = gx0 + (jx + 0.5) * tw
            path = _tile_raster(lesion, params, cx, cy, tw, th)
            if path.strokes:
                tiles.append(TilePlan(np.array([cx, cy]), path))
    if not tiles:
        raise EmptyPath("no tile intersects the lesion")
    return ScanPlan(tiles, (tw, th), params.raster_pitch)


def _tile_raster(lesion: Lesion, params: ScanParams, cx: float, cy: float,
                 tw: float, th: float) -> RasterPath:
    """Serpentine strokes inside one tile, clipped to the dilated lesion.

    Stroke extents per row come from sampling the distance field along x at
    the coverage-grid step; each contiguous run becomes one stroke, so
    concave lesions can yield several strokes per row.
    """
    n = int(math.floor(th / params.raster_pitch)) + 1
    rows = cy + (np.arange(n) - 0.5 * (n - 1)) * params.raster_pitch
    step = params.coverage_grid
    xs = np.arange(cx - 0.5 * tw, cx + 0.5 * tw + 0.5 * step, step)
    path = RasterPath()
    emitted = 0
    for y in rows:
        pts = np.stack([xs, np.full_like(xs, y)], axis=1)
        near = lesion.distance(pts) <= params.spot_radius + 1e-9
        runs = _true_runs(near)
        if not runs:
            continue
        strokes = [np.array([[xs[i0], y], [xs[i1], y]]) for i0, i1 in runs]
        if emitted % 2 == 1:
            strokes = [s[::-1].copy() for s in reversed(strokes)]
        path.strokes.extend(strokes)
        emitted += 1
    return path


def _true_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Index ranges [i0, i1] of contiguous True runs in a 1-D bool array."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]]).astype(int)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


@dataclass
class CoverageReport:
    """Grid rasterisation of which lesion cells sit under at least one spot."""

    fraction: float
    origin: tuple[float, float]
    cell: float
    inside: np.ndarray
    covered: np.ndarray

    def uncovered_components(self) -> list[dict]:
        """Connected patches of missed lesion cells, largest first.

        Each entry carries the centroid, x extent and cell count, which is
        what the swing-back planner needs.
        """
        missed = self.inside & ~self.covered
        labels, n = ndimage.label(missed)
        out = []
        for k in range(1, n + 1):
            iy, ix = np.nonzero(labels == k)
            xs = self.origin[0] + (ix + 0.5) * self.cell
            ys = self.origin[1] + (iy + 0.5) * self.cell
            out.append({"centroid": (float(xs.mean()), float(ys.mean())),
                        "x_extent": (float(xs.min()), float(xs.max())),
                        "y_extent": (float(ys.min()), float(ys.max())),
                        "cells": int(len(ix))})
        out.sort(key=lambda c: -c["cells"])
        return out


def coverage(lesion: Lesion, spot_centers, params: ScanParams) -> CoverageReport:
    """Fraction of lesion area within one spot radius of any stamped spot.

    Rasterises the lesion bbox at the coverage grid and tests pixel centres;
    exact to O(grid * perimeter) which is well under a percent for the
    default 50 um grid on mm-scale lesions.
    """
    xmin, ymin, xmax, ymax = lesion.bbox
    cell = params.coverage_grid
    nx = max(1, int(math.ceil((xmax - xmin) / cell)))
    ny = max(1, int(math.ceil((ymax - ymin) / cell)))
    xs = xmin + (np.arange(nx) + 0.5) * cell
    ys = ymin + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = lesion.contains_points(pts).reshape(ny, nx)

    centers = np.asarray(spot_centers, dtype=float)
    if centers.size == 0:
        centers = centers.reshape(0, 2)
    # Spot rows may carry a trailing radius column; only centres matter here.
    centers = np.atleast_2d(centers)[:, :2]
    covered = np.zeros((ny, nx), dtype=bool)
    if len(centers) > 0:
        from scipy.spatial import cKDTree
        d, _ = cKDTree(centers).query(pts, k=1)
        covered = (d.reshape(ny, nx) <= params.spot_radius + 1e-9)
    covered &= inside

    n_in = int(inside.sum())
    frac = float(covered.sum()) / n_in if n_in else 0.0
    return CoverageReport(frac, (xmin, ymin), cell, inside, covered)


def swingback_path(report: CoverageReport, lesion: Lesion,
                   params: ScanParams) -> RasterPath:
    """Extra strokes through each missed patch, ordered largest patch first.

    Each patch gets one horizontal stroke through its centroid row spanning
    the patch's x extent; single-cell patches become dwell points
    (zero-length strokes).
    """
    path = RasterPath()
    for comp in report.uncovered_components():
        y = comp["centroid"][1]
        x0, x1 = comp["x_extent"]
        path.strokes.append(np.array([[x0, y], [x1, y]]))
    if not path.strokes:
        raise EmptyPath("coverage has no missed patches to swing back over")
    return path
