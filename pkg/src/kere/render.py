"""Minimal SVG and PNG renderers for orbits, point sets and curve families.

Every surface is drawn in a unit-square chart; polylines are broken where
consecutive points jump across a chart seam.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .metric_space import Surface

SIZE = 512
MARGIN = 16

PALETTE = {
    "orbit": (31, 119, 180),
    "singular": (214, 39, 40),
    "fixed": (44, 160, 44),
    "curve": (148, 103, 189),
    "grid": (127, 127, 127),
    "frame": (0, 0, 0),
}


def chart_coords(surface: Surface, X: np.ndarray, bounds=None) -> np.ndarray:
    """Points of ``surface`` in the unit square used for drawing."""
    X = np.asarray(X, dtype=float)
    if surface is Surface.SPHERE:
        lon = np.arctan2(X[:, 1], X[:, 0]) / (2 * math.pi)
        lat = np.arccos(np.clip(X[:, 2], -1.0, 1.0)) / math.pi
        return np.column_stack([lon - np.floor(lon), lat])
    if surface is Surface.TORUS:
        return X.copy()
    if surface is Surface.KLEIN:
        return np.column_stack([2 * X[:, 0], X[:, 1]])
    if surface is Surface.ANNULUS:
        return np.column_stack([(X[:, 0] + 1) / 2, X[:, 1]])
    if surface is Surface.MOBIUS:
        return np.column_stack([(X[:, 0] + 1) / 2, 2 * X[:, 1]])
    lo, hi = bounds if bounds is not None else (X.min(axis=0), X.max(axis=0))
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    return (X - lo) / span


def split_at_seams(P: np.ndarray, jump: float = 0.5) -> list:
    if P.shape[0] < 2:
        return [P]
    cuts = np.flatnonzero(np.abs(np.diff(P, axis=0)).max(axis=1) > jump) + 1
    return [p for p in np.split(P, cuts) if p.shape[0] > 0]


@dataclass
class Figure:
    """Layers in unit-square coordinates: polylines and point clouds."""

    title: str = ""
    lines: list = field(default_factory=list)   # (role, (k, 2) array)
    points: list = field(default_factory=list)  # (role, (k, 2) array, radius)

    def add_path(self, role: str, P: np.ndarray):
        for piece in split_at_seams(np.asarray(P, dtype=float)):
            if piece.shape[0] > 1:
                self.lines.append((role, piece))

    def add_points(self, role: str, P: np.ndarray, radius: float = 1.5):
        P = np.asarray(P, dtype=float)
        if P.size:
            self.points.append((role, P.reshape(-1, 2), radius))


def _px(P: np.ndarray) -> np.ndarray:
    # y grows downward in both formats
    scale = SIZE - 2 * MARGIN
    return np.column_stack([MARGIN + P[:, 0] * scale, MARGIN + (1.0 - P[:, 1]) * scale])


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % rgb


def to_svg(fig: Figure) -> str:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">',
           f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="#ffffff"/>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE - 2 * MARGIN}" '
           f'height="{SIZE - 2 * MARGIN}" fill="none" stroke="#000000" stroke-width="1"/>']
    if fig.title:
        out.append(f'<title>{_escape(fig.title)}</title>')
    for role, P in fig.lines:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in _px(P))
        out.append(f'<polyline class="{role}" points="{pts}" fill="none" '
                   f'stroke="{_hex(PALETTE[role])}" stroke-width="1"/>')
    for role, P, r in fig.points:
        color = _hex(PALETTE[role])
        for x, y in _px(P):
            out.append(f'<circle class="{role}" cx="{x:.2f}" cy="{y:.2f}" r="{r:g}" '
                       f'fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def rasterize(fig: Figure) -> np.ndarray:
    img = np.full((SIZE, SIZE, 3), 255, dtype=np.uint8)

    def plot(xy, rgb):
        ij = np.rint(xy).astype(int)
        m = (ij[:, 0] >= 0) & (ij[:, 0] < SIZE) & (ij[:, 1] >= 0) & (ij[:, 1] < SIZE)
        img[ij[m, 1], ij[m, 0]] = rgb

    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    for role, P in [("frame", corners)] + fig.lines:
        Q = _px(P)
        for a, b in zip(Q[:-1], Q[1:]):
            k = int(np.ceil(np.abs(b - a).max())) + 1
            plot(a + np.linspace(0.0, 1.0, k)[:, None] * (b - a), PALETTE[role])
    for role, P, r in fig.points:
        Q = _px(P)
        rr = int(math.ceil(r))
        offs = np.array([(i, j) for i in range(-rr, rr + 1) for j in range(-rr, rr + 1)
                         if i * i + j * j <= r * r + 1e-9], dtype=float)
        plot((Q[:, None, :] + offs[None, :, :]).reshape(-1, 2), PALETTE[role])
    return img


def to_png(fig: Figure) -> bytes:
    img = rasterize(fig)
    raw = b"".join(b"\x00" + row.tobytes() for row in img)

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))

    header = struct.pack(">IIBBBBB", SIZE, SIZE, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header)
            + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))
