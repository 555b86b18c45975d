"""Piecewise-constant conductivity phantoms ``1 + sum_i kappa_i chi_{D_i}``."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Point, Polygon

from .mobius import Ball

__all__ = ["BallShape", "PolygonShape", "Phantom", "load_phantom", "builtin_phantom", "BUILTIN_PHANTOMS"]

BUILTIN_PHANTOMS = ("example-a", "example-b", "example-c")


@dataclass(frozen=True)
class BallShape:
    center: complex
    radius: float
    contrast: float

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.radius)

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def boundary(self, h: float) -> np.ndarray:
        """Points on the circle with spacing at most ``h``."""
        n = max(16, int(np.ceil(2 * np.pi * self.radius / h)))
        t = 2 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * t)

    def interior_point(self) -> complex:
        return self.center

    def geometry(self):
        return Point(self.center.real, self.center.imag).buffer(self.radius, quad_segs=64)

    def to_json(self) -> dict:
        return {
            "type": "ball",
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "contrast": self.contrast,
        }


@dataclass(frozen=True)
class PolygonShape:
    vertices: tuple
    contrast: float

    def __post_init__(self):
        verts = tuple(complex(v) for v in self.vertices)
        if len(verts) < 3:
            raise ValueError("a polygon needs at least three vertices")
        object.__setattr__(self, "vertices", verts)
        if not self.geometry().is_valid:
            raise ValueError("polygon is self-intersecting")

    def _xy(self) -> np.ndarray:
        z = np.array(self.vertices)
        return np.c_[z.real, z.imag]

    def geometry(self):
        return Polygon(self._xy())

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return shapely.contains_xy(self.geometry(), z.real, z.imag)

    def boundary(self, h: float) -> np.ndarray:
        z = np.array(self.vertices)
        pts = []
        for p, q in zip(z, np.roll(z, -1)):
            k = max(1, int(np.ceil(abs(q - p) / h)))
            pts.append(p + (q - p) * np.arange(k) / k)
        return np.concatenate(pts)

    def interior_point(self) -> complex:
        p = self.geometry().representative_point()
        return complex(p.x, p.y)

    def to_json(self) -> dict:
        return {
            "type": "polygon",
            "vertices": [[v.real, v.imag] for v in self.vertices],
            "contrast": self.contrast,
        }


def _shape_from_json(d: dict):
    kind = d.get("type")
    if kind == "ball":
        x, y = d["center"]
        return BallShape(complex(x, y), float(d["radius"]), float(d["contrast"]))
    if kind == "polygon":
        return PolygonShape(tuple(complex(x, y) for x, y in d["vertices"]), float(d["contrast"]))
    raise ValueError(f"unknown shape type {kind!r}")


@dataclass(frozen=True)
class Phantom:
    """Shapes with positive contrasts on the unit background conductivity."""

    shapes: tuple = ()
    name: str = "phantom"
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        for s in self.shapes:
            if not s.contrast > 0:
                raise ValueError(f"contrasts must be positive, got {s.contrast}")
            if isinstance(s, BallShape):
                if not abs(s.center) + s.radius < 1:
                    raise ValueError("ball shape must lie strictly inside the unit disk")
            elif np.max(np.abs(s.vertices)) >= 1:
                raise ValueError("polygon must lie strictly inside the unit disk")
        for i, s in enumerate(self.shapes):
            for t in self.shapes[i + 1:]:
                if _closures_meet(s, t):
                    raise ValueError("phantom shapes must have pairwise disjoint closures")

    @property
    def is_empty(self) -> bool:
        return not self.shapes

    @property
    def single_ball(self) -> BallShape | None:
        if len(self.shapes) == 1 and isinstance(self.shapes[0], BallShape):
            return self.shapes[0]
        return None

    @property
    def min_contrast(self) -> float:
        return min((s.contrast for s in self.shapes), default=np.inf)

    def conductivity(self, z) -> np.ndarray:
        z = np.asarray(z)
        gamma = np.ones(z.shape)
        for s in self.shapes:
            gamma = np.where(s.contains(z), 1.0 + s.contrast, gamma)
        return gamma

    def to_json(self) -> dict:
        return {"name": self.name, "shapes": [s.to_json() for s in self.shapes]}

    @classmethod
    def from_json(cls, d: dict) -> "Phantom":
        return cls(tuple(_shape_from_json(s) for s in d.get("shapes", ())), d.get("name", "phantom"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _closures_meet(s, t) -> bool:
    if isinstance(s, BallShape) and isinstance(t, BallShape):
        return abs(s.center - t.center) <= s.radius + t.radius
    return s.geometry().distance(t.geometry()) <= 0.0


def load_phantom(path_or_name) -> Phantom:
    """Read a phantom JSON file, or one of :data:`BUILTIN_PHANTOMS` by name."""
    if str(path_or_name) in BUILTIN_PHANTOMS:
        return builtin_phantom(str(path_or_name))
    return Phantom.from_json(json.loads(Path(path_or_name).read_text()))


def builtin_phantom(name: str) -> Phantom:
    """Approximate stand-ins for the three comparison phantoms (contrast 4)."""
    text = resources.files("ndmono").joinpath("phantoms", f"{name}.json").read_text()
    return Phantom.from_json(json.loads(text))
