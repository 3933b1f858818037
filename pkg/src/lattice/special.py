"""
Named domain families and random R-centred domain generators.

Every builder returns a SpecialDomain: the domain plus whichever boundary marks
the family defines (a, b for Dobrushin domains, a, b, c, d for quads).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set

import numpy as np

from src.errors import GenerationFailed, InvalidLoop, InvalidParams
from src.lattice.domain import (
    Domain,
    Face,
    Point,
    Quad,
    build_domain,
    is_r_centred,
    loop_from_faces,
    rect_loop,
)
from src.utils.rng import make_rng

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION_FACTOR = 4
MAX_GENERATION_RETRIES = 25
CENTRED_FAMILIES = ("staircase-noise", "spiral", "slit-comb")


@dataclass(frozen=True)
class SpecialDomain:
    kind: str
    domain: Domain
    marks: Dict[str, Point] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)

    @property
    def a(self) -> Point:
        return self.marks["a"]

    @property
    def b(self) -> Point:
        return self.marks["b"]

    def quad(self) -> Quad:
        try:
            return Quad(self.domain, self.marks["a"], self.marks["b"], self.marks["c"], self.marks["d"])
        except KeyError as e:
            raise InvalidParams(f"{self.kind} domain does not define quad marks") from e


def _positive(name: str, value: int, minimum: int = 1) -> int:
    value = int(value)
    if value < minimum:
        raise InvalidParams(f"{name} must be >= {minimum}, got {value}")
    return value


def _from_loop(points: List[Point]) -> Domain:
    try:
        return build_domain(points)
    except InvalidLoop as e:
        raise InvalidParams(f"parameters give a non-simple boundary: {e}") from e


def _from_faces(faces: Set[Face]) -> Domain:
    try:
        return Domain(loop_from_faces(faces))
    except InvalidLoop as e:
        raise InvalidParams(f"parameters give a non-simple boundary: {e}") from e


def _staircase(start: Point, end: Point, first_axis: int) -> List[Point]:
    """Monotone unit path alternating axes, start excluded, end included."""
    pts = []
    x, y = start
    axis = first_axis
    while (x, y) != end:
        dx = (end[0] > x) - (end[0] < x)
        dy = (end[1] > y) - (end[1] < y)
        if axis == 0 and dx == 0:
            axis = 1
        elif axis == 1 and dy == 0:
            axis = 0
        if axis == 0:
            x += dx
        else:
            y += dy
        pts.append((x, y))
        axis = 1 - axis
    return pts


def box(n: int, center: Point = (0, 0)) -> SpecialDomain:
    n = _positive("n", n)
    cx, cy = center
    dom = Domain(rect_loop(cx - n, cy - n, cx + n, cy + n))
    return SpecialDomain("box", dom, {}, {"n": n, "center": center})


def rect(width: int, height: int, origin: Point = (0, 0)) -> SpecialDomain:
    """[0,W] x [0,H] with the marks of a left-right crossing quad."""
    width = _positive("width", width)
    height = _positive("height", height)
    x0, y0 = origin
    dom = Domain(rect_loop(x0, y0, x0 + width, y0 + height))
    marks = {"a": (x0, y0 + height), "b": (x0, y0), "c": (x0 + width, y0), "d": (x0 + width, y0 + height)}
    return SpecialDomain("rect", dom, marks, {"width": width, "height": height})


def self_dual_rect(n: int) -> SpecialDomain:
    """The (n+1) x n rectangle whose left-right crossing is self-dual."""
    sd = rect(n + 1, n)
    return SpecialDomain("self-dual", sd.domain, sd.marks, {"n": n})


def slit_box(R: int) -> SpecialDomain:
    """Box of radius 3R with the vertices (x, 0), x >= 1, removed; a = b = 0."""
    R = _positive("R", R)
    n = 3 * R
    faces = {(i, j) for i in range(-n, n) for j in range(-n, n)}
    faces -= {(i, j) for i in range(0, n) for j in (-1, 0)}
    dom = _from_faces(faces)
    return SpecialDomain("slit-box", dom, {"a": (0, 0), "b": (0, 0)}, {"R": R})


def corner(m: int, ell: int, closing: str = "staircase") -> SpecialDomain:
    """(m, ell)-corner Dobrushin domain.

    The free arc (ab) is the two segments a=(ell,0) -> (0,0) -> b=(0,m); the
    wired arc (ba) is the closing curve, either a box or a staircase.
    """
    m = _positive("m", m)
    ell = _positive("ell", ell)
    a, b = (ell, 0), (0, m)
    pts: List[Point] = [(x, 0) for x in range(ell, 0, -1)] + [(0, y) for y in range(0, m)]
    if closing == "box":
        path = [b]
        path += _staircase(b, (-m, m), 0)
        path += _staircase((-m, m), (-m, -ell), 1)
        path += _staircase((-m, -ell), (ell, -ell), 0)
        path += _staircase((ell, -ell), a, 1)
    elif closing == "staircase":
        path = [b]
        path += _staircase(b, (-m, 0), 0)
        path += _staircase((-m, 0), (0, -ell), 1)
        path += _staircase((0, -ell), a, 0)
    else:
        raise InvalidParams(f"closing must be 'box' or 'staircase', got {closing!r}")
    pts += path[:-1]
    dom = _from_loop(pts)
    return SpecialDomain("corner", dom, {"a": a, "b": b}, {"m": m, "ell": ell, "closing": closing})


def trapeze(R: int, r: int, k: int) -> SpecialDomain:
    """Faces of the strip Z x [0, 2R] lying above the half-lines y = |x|/k - r.

    Row j spans |x| <= k(j + r). a = (kr, 0), b = (-kr, 0); the bottom
    segment is the arc (ba).
    """
    R = _positive("R", R)
    r = _positive("r", r)
    k = _positive("k", k)
    faces = {(i, j) for j in range(2 * R) for i in range(-k * (j + r), k * (j + r))}
    dom = _from_faces(faces)
    return SpecialDomain("trapeze", dom, {"a": (k * r, 0), "b": (-k * r, 0)}, {"R": R, "r": r, "k": k})


def notched_strip(R: int, r: int, k: int, half_width: Optional[int] = None) -> SpecialDomain:
    """Reflection of (Z x [-2R, 2R]) minus the trapeze, truncated to |x| <= L.

    Marks sit at the ends of the notch top; the notch top is the arc (ba).
    """
    R = _positive("R", R)
    r = _positive("r", r)
    k = _positive("k", k)
    minimum = k * (r + 2 * R) + 2
    L = minimum if half_width is None else int(half_width)
    if L < minimum:
        raise InvalidParams(f"half_width must be >= {minimum}, got {L}")

    def removed(v: Point) -> bool:
        x, y = v
        return -2 * R <= y <= 0 and abs(x) <= k * (r - y)

    faces = set()
    for i in range(-L, L):
        for j in range(-2 * R, 2 * R):
            corners = ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1))
            if not any(removed(c) for c in corners):
                faces.add((i, j))
    dom = _from_faces(faces)
    marks = {"a": (k * r + 1, 1), "b": (-k * r - 1, 1)}
    return SpecialDomain("notched-strip", dom, marks, {"R": R, "r": r, "k": k, "half_width": L})


def strip(R: int, half_width: int) -> SpecialDomain:
    R = _positive("R", R)
    half_width = _positive("half_width", half_width)
    dom = Domain(rect_loop(-half_width, 0, half_width, 2 * R))
    return SpecialDomain("strip", dom, {}, {"R": R, "half_width": half_width})


def half_plane(R: int, factor: int = DEFAULT_TRUNCATION_FACTOR) -> SpecialDomain:
    """[-L, L] x [0, L], L = factor * R; the origin sits on the bottom side."""
    L = _positive("R", R) * _positive("factor", factor)
    dom = Domain(rect_loop(-L, 0, L, L))
    return SpecialDomain("half-plane", dom, {}, {"R": R, "factor": factor})


def quarter_plane(R: int, factor: int = DEFAULT_TRUNCATION_FACTOR) -> SpecialDomain:
    L = _positive("R", R) * _positive("factor", factor)
    dom = Domain(rect_loop(0, 0, L, L))
    return SpecialDomain("quarter-plane", dom, {}, {"R": R, "factor": factor})


def l_shape(n: int) -> SpecialDomain:
    """[0,2n]^2 minus [n,2n]^2 with a=(0,2n), b=(0,0), c=(2n,0), d=(n,2n)."""
    n = _positive("n", n)
    faces = {(i, j) for i in range(2 * n) for j in range(2 * n) if i < n or j < n}
    dom = _from_faces(faces)
    marks = {"a": (0, 2 * n), "b": (0, 0), "c": (2 * n, 0), "d": (n, 2 * n)}
    return SpecialDomain("l-shape", dom, marks, {"n": n})


def staircase_quad(n: int, seed: Optional[int] = None) -> SpecialDomain:
    """Region under a non-increasing staircase of width 2n.

    Without a seed the heights drop by one every second column from 2n; with
    a seed they are random non-increasing values in [1, 2n].
    """
    n = _positive("n", n)
    width = 2 * n
    if seed is None:
        heights = [2 * n - i // 2 for i in range(width)]
    else:
        rng = make_rng(seed)
        heights = sorted((int(h) for h in rng.integers(1, 2 * n + 1, size=width)), reverse=True)
    faces = {(i, j) for i in range(width) for j in range(heights[i])}
    dom = _from_faces(faces)
    marks = {"a": (0, heights[0]), "b": (0, 0), "c": (width, 0), "d": (width, heights[-1])}
    return SpecialDomain("staircase", dom, marks, {"n": n, "seed": seed})


_BUILDERS: Dict[str, Callable[..., SpecialDomain]] = {
    "box": box,
    "rect": rect,
    "self-dual": self_dual_rect,
    "slit-box": slit_box,
    "corner": corner,
    "trapeze": trapeze,
    "notched-strip": notched_strip,
    "strip": strip,
    "half-plane": half_plane,
    "quarter-plane": quarter_plane,
    "l-shape": l_shape,
    "staircase": staircase_quad,
}

SPECIAL_KINDS = tuple(_BUILDERS)


def special_domain(kind: str, **params) -> SpecialDomain:
    builder = _BUILDERS.get(kind)
    if builder is None:
        raise InvalidParams(f"unknown domain kind {kind!r}; expected one of {SPECIAL_KINDS}")
    try:
        return builder(**params)
    except TypeError as e:
        raise InvalidParams(f"bad parameters for {kind}: {e}") from e


# --- random R-centred domains -------------------------------------------------

def _box_faces(n: int) -> Set[Face]:
    return {(i, j) for i in range(-n, n) for j in range(-n, n)}


def _staircase_noise_faces(R: int, rng: np.random.Generator) -> Set[Face]:
    n = 2 * R
    faces = _box_faces(n)
    rows = range(-n + 1, n - 1)
    for side in range(4):
        heights = rng.integers(0, R, size=len(rows))
        for t, h in zip(rows, heights.tolist()):
            for s in range(h):
                if side == 0:
                    faces.add((n + s, t))
                elif side == 1:
                    faces.add((t, n + s))
                elif side == 2:
                    faces.add((-n - 1 - s, t))
                else:
                    faces.add((t, -n - 1 - s))
    return faces


def _spiral_faces(R: int, rng: np.random.Generator) -> Set[Face]:
    n = 2 * R
    faces = _box_faces(n)
    if R < 3:
        return faces
    d = int(rng.integers(1, R - 1))
    o = n + d
    y0 = int(rng.integers(-n + 1, n - 1))
    x_end = int(rng.integers(-o, o + 1))
    faces.update((x, y0) for x in range(n, o + 1))
    faces.update((o, y) for y in range(y0, o + 1))
    faces.update((x, o) for x in range(-o - 1, o + 1))
    faces.update((-o - 1, y) for y in range(-o - 1, o + 1))
    faces.update((x, -o - 1) for x in range(-o - 1, x_end + 1))
    return faces


def _slit_comb_faces(R: int, rng: np.random.Generator) -> Set[Face]:
    n = 3 * R - 1
    faces = _box_faces(n)
    if R < 2:
        return faces
    for side in range(4):
        for t in range(-2 * R + 1, 2 * R - 1, 2):
            if rng.random() >= 0.7:
                continue
            depth = int(rng.integers(1, R))
            for s in range(depth):
                if side == 0:
                    faces.discard((t, n - 1 - s))
                elif side == 1:
                    faces.discard((n - 1 - s, t))
                elif side == 2:
                    faces.discard((t, -n + s))
                else:
                    faces.discard((-n + s, t))
    return faces


_FAMILIES = {
    "staircase-noise": _staircase_noise_faces,
    "spiral": _spiral_faces,
    "slit-comb": _slit_comb_faces,
}


def random_centred_domain(R: int, family: str, seed: int,
                          max_retries: int = MAX_GENERATION_RETRIES) -> Domain:
    """Draw an R-centred domain from a family; deterministic per seed."""
    R = _positive("R", R)
    make_faces = _FAMILIES.get(family)
    if make_faces is None:
        raise InvalidParams(f"unknown family {family!r}; expected one of {CENTRED_FAMILIES}")
    rng = make_rng(seed)
    for attempt in range(max_retries):
        faces = make_faces(R, rng)
        try:
            dom = Domain(loop_from_faces(faces))
        except InvalidLoop as e:
            logger.debug(f"[special] {family} attempt {attempt} rejected: {e}")
            continue
        if is_r_centred(dom, R):
            return dom
        logger.debug(f"[special] {family} attempt {attempt} not {R}-centred")
    raise GenerationFailed(f"no {R}-centred {family} domain after {max_retries} attempts (seed={seed})")
