"""Windows, point patterns, pair counting, seeding and pattern CSV I/O."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

__all__ = [
    "Window",
    "Point",
    "PointPattern",
    "PatternFormatError",
    "PointOutsideWindowError",
    "close_pair_count",
    "close_neighbour_count",
    "pairwise_distances",
    "nearest_neighbour_distances",
    "derive_seed",
    "make_rng",
    "load_pattern",
    "save_pattern",
]


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangular observation window."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"window bounds must be finite, got {vals}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"degenerate window {vals}")
        for name, v in zip(("x_min", "x_max", "y_min", "y_max"), vals):
            object.__setattr__(self, name, float(v))

    @classmethod
    def unit(cls) -> "Window":
        return cls(0.0, 1.0, 0.0, 1.0)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    def contains(self, xy) -> np.ndarray:
        """Boundary-inclusive membership test for an (n, 2) array."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return (
            (xy[:, 0] >= self.x_min)
            & (xy[:, 0] <= self.x_max)
            & (xy[:, 1] >= self.y_min)
            & (xy[:, 1] <= self.y_max)
        )

    def boundary_distance(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        return np.minimum.reduce(
            [
                xy[:, 0] - self.x_min,
                self.x_max - xy[:, 0],
                xy[:, 1] - self.y_min,
                self.y_max - xy[:, 1],
            ]
        )

    def dilated(self, d: float) -> "Window":
        return Window(self.x_min - d, self.x_max + d, self.y_min - d, self.y_max + d)

    def translated(self, dx: float, dy: float) -> "Window":
        return Window(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)

    def scaled(self, s: float) -> "Window":
        return Window(self.x_min * s, self.x_max * s, self.y_min * s, self.y_max * s)


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A simple finite point pattern observed in a window.

    Coordinates are stored as a read-only ``(n, 2)`` float array. Input order
    is preserved.
    """

    coords: np.ndarray
    window: Window

    def __post_init__(self):
        xy = np.array(self.coords, dtype=float, copy=True)
        if xy.size == 0:
            xy = xy.reshape(0, 2)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError(f"coords must have shape (n, 2), got {xy.shape}")
        if not np.isfinite(xy).all():
            raise ValueError("coordinates must be finite")
        inside = self.window.contains(xy)
        if not inside.all():
            bad = int(np.flatnonzero(~inside)[0])
            raise ValueError(f"point {bad} {tuple(xy[bad])} lies outside {self.window}")
        if len(xy) > 1 and len(np.unique(xy, axis=0)) != len(xy):
            raise ValueError("pattern contains coincident points")
        xy.setflags(write=False)
        object.__setattr__(self, "coords", xy)

    @classmethod
    def empty(cls, window: Window) -> "PointPattern":
        return cls(np.empty((0, 2)), window)

    @property
    def n(self) -> int:
        return len(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self.coords]

    @property
    def intensity(self) -> float:
        return self.n / self.window.area

    def __eq__(self, other):
        if not isinstance(other, PointPattern):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.coords, other.coords)

    __hash__ = None

    def translated(self, dx: float, dy: float) -> "PointPattern":
        return PointPattern(self.coords + [dx, dy], self.window.translated(dx, dy))

    def scaled(self, s: float) -> "PointPattern":
        return PointPattern(self.coords * s, self.window.scaled(s))

    def without(self, i: int) -> "PointPattern":
        return PointPattern(np.delete(self.coords, i, axis=0), self.window)

    def with_point(self, u) -> "PointPattern":
        return PointPattern(np.vstack([self.coords, np.reshape(u, (1, 2))]), self.window)


def _check_r(r: float) -> float:
    if not r >= 0:
        raise ValueError(f"distance r must be >= 0, got {r}")
    return float(r)


def pairwise_distances(pattern: PointPattern) -> np.ndarray:
    """Condensed vector of the n(n-1)/2 inter-point distances."""
    if pattern.n < 2:
        return np.empty(0)
    return pdist(pattern.coords)


def close_pair_count(pattern: PointPattern, r: float) -> int:
    """Number of unordered pairs at distance <= r."""
    r = _check_r(r)
    return int(np.count_nonzero(pairwise_distances(pattern) <= r))


def close_neighbour_count(u, pattern: PointPattern, r: float) -> int:
    """Number of pattern points other than ``u`` itself within distance r of u."""
    r = _check_r(r)
    if pattern.n == 0:
        return 0
    d = np.hypot(pattern.coords[:, 0] - u[0], pattern.coords[:, 1] - u[1])
    return int(np.count_nonzero((d <= r) & (d > 0)))


def nearest_neighbour_distances(pattern: PointPattern) -> np.ndarray:
    if pattern.n < 2:
        return np.full(pattern.n, np.inf)
    d, _ = cKDTree(pattern.coords).query(pattern.coords, k=2)
    return d[:, 1]


# Seeding: every random stream is a PCG64 generator keyed by a numpy
# SeedSequence built from (master seed, *stream indices). PCG64 output is
# specified bit-for-bit by numpy across platforms.


def derive_seed(master_seed: int, *stream: int) -> int:
    """Deterministic 64-bit child seed for stream ``stream`` of ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(s) for s in stream))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


class PatternFormatError(ValueError):
    """Malformed point-pattern file; message carries the 1-based line number."""

    def __init__(self, path, lineno: int, msg: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


class PointOutsideWindowError(PatternFormatError):
    pass


def save_pattern(pattern: PointPattern, path) -> None:
    w = pattern.window
    lines = [f"# window {w.x_min!r} {w.x_max!r} {w.y_min!r} {w.y_max!r}", "x,y"]
    lines += [f"{float(x)!r},{float(y)!r}" for x, y in pattern.coords]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_pattern(path) -> PointPattern:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"pattern file not found: {path}")
    lines = path.read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise PatternFormatError(path, 1, "empty file, expected '# window ...' line")

    head = lines[0].split()
    if len(head) != 6 or head[0] != "#" or head[1] != "window":
        raise PatternFormatError(path, 1, "expected '# window x_min x_max y_min y_max'")
    try:
        window = Window(*(float(v) for v in head[2:]))
    except ValueError as exc:
        raise PatternFormatError(path, 1, f"bad window: {exc}") from None

    if len(lines) < 2 or lines[1].strip().replace(" ", "") != "x,y":
        raise PatternFormatError(path, 2, "expected header 'x,y'")

    rows = []
    seen: dict[tuple[float, float], int] = {}
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            raise PatternFormatError(path, lineno, "blank row")
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise PatternFormatError(path, lineno, f"malformed row {line!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise PatternFormatError(path, lineno, f"non-finite coordinate in {line!r}")
        if not window.contains((x, y))[0]:
            raise PointOutsideWindowError(path, lineno, f"point ({x}, {y}) outside window")
        if (x, y) in seen:
            raise PatternFormatError(
                path, lineno, f"point ({x}, {y}) duplicates line {seen[(x, y)]}"
            )
        seen[(x, y)] = lineno
        rows.append((x, y))

    return PointPattern(np.array(rows, dtype=float).reshape(-1, 2), window)
