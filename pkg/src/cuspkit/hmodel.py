"""Upper half-space model primitives.

Hyperbolic 3-space is modeled as {(z, t) : z complex, t > 0} with the
sphere at infinity being the extended complex plane.  The point at
infinity on the boundary is always the singleton INFINITY, never a large
float.  Orientation-preserving isometries are Moebius maps given by
2x2 complex matrices, normalized to determinant 1 at construction; M and
-M act identically.

Horoballs are either Euclidean balls tangent to the boundary plane
(finite center, size = Euclidean diameter) or the half-space above a
given height (center INFINITY, size = height).  Geodesic planes are
vertical half-planes over boundary lines or hemispheres over boundary
circles.
"""

import cmath
import math
from dataclasses import dataclass, field

DET_EPSILON = 1e-14


class _Infinity:
    """The point at infinity on the sphere at infinity (unique instance)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"


INFINITY = _Infinity()


def is_infinity(z):
    return z is INFINITY


@dataclass(frozen=True)
class Tolerance:
    """Numeric tolerances used throughout.

    geometric: coincidence checks on boundary data (points, radii).
    solver: convergence threshold for Newton residuals.
    tangency: tangency vs crossing discrimination; looser than geometric
        because tangency points are computed from differences of solved
        quantities.
    """

    geometric: float = 1e-9
    solver: float = 1e-12
    tangency: float = 1e-7

    def __post_init__(self):
        if min(self.geometric, self.solver, self.tangency) <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class MoebiusMap:
    """Determinant-normalized Moebius transformation z -> (az+b)/(cz+d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det) < DET_EPSILON:
            raise ValueError("matrix is numerically singular, |det| = %g" % abs(det))
        s = 1.0 / cmath.sqrt(det)
        object.__setattr__(self, "a", complex(self.a) * s)
        object.__setattr__(self, "b", complex(self.b) * s)
        object.__setattr__(self, "c", complex(self.c) * s)
        object.__setattr__(self, "d", complex(self.d) * s)

    @staticmethod
    def identity():
        return MoebiusMap(1, 0, 0, 1)

    @staticmethod
    def translation(w):
        return MoebiusMap(1, w, 0, 1)

    def inverse(self):
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def compose(self, other):
        """Return self o other (apply other first)."""
        return MoebiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __mul__(self, other):
        return self.compose(other)

    def trace(self):
        return self.a + self.d

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def is_identity(self, tol=1e-9):
        # up to sign: M and -M are the same isometry
        for s in (1.0, -1.0):
            if (
                abs(s * self.a - 1) < tol
                and abs(s * self.b) < tol
                and abs(s * self.c) < tol
                and abs(s * self.d - 1) < tol
            ):
                return True
        return False

    def same_map(self, other, tol=1e-9):
        return (self.inverse() * other).is_identity(tol)

    def __call__(self, z):
        return apply_boundary(self, z)


def apply_boundary(m, z):
    """Image of a boundary point (complex or INFINITY)."""
    if z is INFINITY:
        if abs(m.c) == 0.0:
            return INFINITY
        return m.a / m.c
    denom = m.c * z + m.d
    if abs(denom) == 0.0:
        return INFINITY
    return (m.a * z + m.b) / denom


def apply_point(m, p):
    """Image of an interior point p = (z, t) with t > 0.

    Derived from the quaternionic extension of the Moebius action; the
    determinant-1 normalization makes the j-component coefficient equal
    to 1.
    """
    z, t = p
    q = m.c * z + m.d
    denom = abs(q) ** 2 + abs(m.c) ** 2 * t * t
    z_new = ((m.a * z + m.b) * q.conjugate() + m.a * m.c.conjugate() * t * t) / denom
    return (z_new, t / denom)


@dataclass(frozen=True)
class Horoball:
    """Horoball: finite center with Euclidean diameter, or INFINITY with height."""

    center: object
    size: float

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("horoball size must be positive")
        if not (self.center is INFINITY or isinstance(self.center, (complex, float, int))):
            raise ValueError("center must be complex or INFINITY")
        if self.center is not INFINITY:
            object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "size", float(self.size))

    def is_at_infinity(self):
        return self.center is INFINITY

    def top_point(self):
        """Highest interior point; undefined for the ball at infinity."""
        if self.is_at_infinity():
            raise ValueError("ball at infinity has no top point")
        return (self.center, self.size)


def apply_horoball(m, ball):
    """Image horoball under a Moebius map.

    A ball with finite center p and diameter s equals k(B) where B is the
    half-space above height 1 and k = [[p, -s],[1, 0]] / sqrt(s); composing
    gives the image in closed form.
    """
    if ball.is_at_infinity():
        h = ball.size
        if abs(m.c) == 0.0:
            # affine map: heights scale by |a/d| = |a|^2
            return Horoball(INFINITY, h * abs(m.a) ** 2)
        return Horoball(m.a / m.c, 1.0 / (abs(m.c) ** 2 * h))
    p, s = ball.center, ball.size
    rs = math.sqrt(s)
    # entries of m composed with k, before normalization (det = 1 already)
    c_new = (m.c * p + m.d) / rs
    a_new = (m.a * p + m.b) / rs
    if abs(c_new) ** 2 * s < 1e-300 or abs(c_new) == 0.0:
        return Horoball(INFINITY, abs(a_new) ** 2)
    bound = abs(c_new) ** 2
    if bound < 1e-150:
        return Horoball(INFINITY, abs(a_new) ** 2)
    return Horoball(a_new / c_new, 1.0 / bound)


def horoball_distance(b1, b2, tol=DEFAULT_TOL):
    """Signed hyperbolic distance between horoball boundaries.

    Negative values measure overlap.  Raises ValueError for concentric
    horoballs (nested, no well-defined distance).
    """
    if b1.is_at_infinity() and b2.is_at_infinity():
        raise ValueError("horoballs share the center INFINITY")
    if b1.is_at_infinity() or b2.is_at_infinity():
        inf_ball, fin_ball = (b1, b2) if b1.is_at_infinity() else (b2, b1)
        return math.log(inf_ball.size / fin_ball.size)
    gap = abs(b1.center - b2.center)
    scale = max(abs(b1.center), abs(b2.center), 1.0)
    if gap < tol.geometric * scale:
        raise ValueError("horoballs share a center")
    return 2.0 * math.log(gap / math.sqrt(b1.size * b2.size))


def horosphere_arc_length(ball, p, q, tol=DEFAULT_TOL):
    """Intrinsic (Euclidean) distance between two points on a horosphere.

    The horosphere inherits a flat metric; for the horosphere at height h
    the distance between (z1, h) and (z2, h) is |z1 - z2| / h.  Finite
    balls are moved to height 1 by an isometry first.
    """
    if ball.is_at_infinity():
        h = ball.size
        _check_on_sphere(ball, p, tol)
        _check_on_sphere(ball, q, tol)
        return abs(p[0] - q[0]) / h
    c, s = ball.center, ball.size
    _check_on_sphere(ball, p, tol)
    _check_on_sphere(ball, q, tol)
    rs = math.sqrt(s)
    # inverse of k = [[c, -s],[1, 0]]/sqrt(s): sends the ball to height 1
    k_inv = MoebiusMap(0, rs, -1 / rs, c / rs)
    p1 = apply_point(k_inv, p)
    q1 = apply_point(k_inv, q)
    return abs(p1[0] - q1[0])


def _check_on_sphere(ball, p, tol):
    z, t = p
    if ball.is_at_infinity():
        if abs(t - ball.size) > tol.geometric * max(1.0, ball.size):
            raise ValueError("point is not on the horosphere")
        return
    cx, r = ball.center, ball.size / 2.0
    d2 = abs(z - cx) ** 2 + (t - r) ** 2
    if abs(d2 - r * r) > tol.geometric * max(1.0, r * r):
        raise ValueError("point is not on the horosphere")


@dataclass(frozen=True)
class GeodesicPlane:
    """Totally geodesic plane: vertical half-plane or hemisphere.

    Vertical planes are stored as a foot point (perpendicular from the
    origin) plus a unit direction with argument in [0, pi); hemispheres
    as boundary circle center and radius.
    """

    kind: str
    center: complex = 0j
    radius: float = 0.0
    point: complex = 0j
    direction: complex = 0j

    @staticmethod
    def hemisphere(center, radius):
        if radius <= 0:
            raise ValueError("hemisphere radius must be positive")
        return GeodesicPlane(kind="hemisphere", center=complex(center), radius=float(radius))

    @staticmethod
    def vertical(point, direction):
        u = complex(direction)
        if abs(u) == 0.0:
            raise ValueError("direction must be nonzero")
        u = u / abs(u)
        if u.imag < 0 or (abs(u.imag) < 1e-15 and u.real < 0):
            u = -u  # canonical representative: argument in [0, pi)
        p = complex(point)
        foot = p - u * (p.real * u.real + p.imag * u.imag)
        return GeodesicPlane(kind="vertical", point=foot, direction=u)

    def is_vertical(self):
        return self.kind == "vertical"

    def boundary_points(self, k=3):
        """k distinct boundary points on the plane's ideal boundary."""
        pts = []
        if self.is_vertical():
            for i in range(k):
                pts.append(self.point + (i - (k - 1) / 2.0) * self.direction)
        else:
            for i in range(k):
                ang = 2 * math.pi * i / k + 0.37
                pts.append(self.center + self.radius * cmath.exp(1j * ang))
        return pts

    def contains_boundary_point(self, z, tol=DEFAULT_TOL):
        if z is INFINITY:
            return self.is_vertical()
        scale = self._scale()
        if self.is_vertical():
            w = (z - self.point) / self.direction
            return abs(w.imag) < tol.geometric * max(1.0, scale, abs(w))
        return abs(abs(z - self.center) - self.radius) < tol.geometric * max(1.0, scale)

    def _scale(self):
        if self.is_vertical():
            return max(1.0, abs(self.point))
        return max(1.0, abs(self.center), self.radius)


def circle_through(z1, z2, z3, tol=DEFAULT_TOL):
    """Circumcircle of three boundary points: (center, radius) or None if collinear."""
    w1 = z1 - z3
    w2 = z2 - z3
    cross = w1.real * w2.imag - w1.imag * w2.real
    scale = max(abs(w1), abs(w2), abs(z1 - z2))
    if abs(cross) < tol.geometric * scale * scale:
        return None
    # solve 2 Re(c conj(w_i)) = |w_i|^2 for the center c relative to z3
    s1 = abs(w1) ** 2
    s2 = abs(w2) ** 2
    x = (s1 * w2.imag - s2 * w1.imag) / (2.0 * cross)
    y = (w1.real * s2 - w2.real * s1) / (2.0 * cross)
    center = z3 + complex(x, y)
    radius = (abs(z1 - center) + abs(z2 - center) + abs(z3 - center)) / 3.0
    return (center, radius)


def apply_plane(m, plane, tol=DEFAULT_TOL):
    """Image of a geodesic plane under a Moebius map.

    The image is vertical exactly when the pole of the map lies on the
    plane's boundary line or circle; that case is split off explicitly
    rather than left to the numerics.
    """
    if abs(m.c) == 0.0:
        pole = None
    else:
        pole = -m.d / m.c
    if plane.is_vertical():
        on_boundary = pole is None or plane.contains_boundary_point(pole, tol)
    else:
        on_boundary = pole is not None and plane.contains_boundary_point(pole, tol)

    pts = plane.boundary_points(3)
    if on_boundary:
        images = []
        for z in pts:
            w = apply_boundary(m, z)
            if w is not INFINITY:
                images.append(w)
            if len(images) == 2:
                break
        if len(images) < 2 or abs(images[0] - images[1]) == 0.0:
            extra = plane.boundary_points(7)
            images = [apply_boundary(m, z) for z in extra]
            images = [w for w in images if w is not INFINITY][:2]
        return GeodesicPlane.vertical(images[0], images[1] - images[0])
    w1, w2, w3 = (apply_boundary(m, z) for z in pts)
    circ = circle_through(w1, w2, w3, tol)
    if circ is None:
        # pole numerically on the boundary; fall back to the vertical case
        return GeodesicPlane.vertical(w1, w2 - w1)
    return GeodesicPlane.hemisphere(*circ)


@dataclass(frozen=True)
class PlaneBallRelation:
    """Outcome of plane_ball_relation: disjoint, tangent, or crossing."""

    kind: str
    point: object = None  # tangency point (z, t) when kind == "tangent"
    top_height: float = 0.0  # height of topmost intersection when crossing

    def is_tangent(self):
        return self.kind == "tangent"


def plane_ball_relation(plane, ball, tol=DEFAULT_TOL):
    """Classify the intersection of a geodesic plane with a horoball.

    Tangency is decided with the tangency tolerance on the defect between
    plane-to-center distance and ball radius.  For crossings the height of
    the topmost intersection point is reported.
    """
    if ball.is_at_infinity():
        h = ball.size
        if plane.is_vertical():
            return PlaneBallRelation("crossing", top_height=math.inf)
        r = plane.radius
        if abs(r - h) < tol.tangency * max(1.0, h):
            return PlaneBallRelation("tangent", point=(plane.center, r))
        if r < h:
            return PlaneBallRelation("disjoint")
        return PlaneBallRelation("crossing", top_height=h)

    p, s = ball.center, ball.size
    r_ball = s / 2.0
    sphere_center = (p, r_ball)
    if plane.is_vertical():
        # signed distance from the ball's axis to the boundary line
        w = (p - plane.point) / plane.direction
        dist = abs(w.imag)
        scale = max(1.0, s)
        if abs(dist - r_ball) < tol.tangency * scale:
            foot = plane.point + plane.direction * w.real
            return PlaneBallRelation("tangent", point=(foot, r_ball))
        if dist > r_ball:
            return PlaneBallRelation("disjoint")
        rho = math.sqrt(r_ball * r_ball - dist * dist)
        return PlaneBallRelation("crossing", top_height=r_ball + rho)

    # hemisphere: intersect the full sphere (center, 0, radius r) with the
    # ball sphere; both are genuine spheres in R^3
    q, r = plane.center, plane.radius
    dx = p - q
    d2 = abs(dx) ** 2 + r_ball * r_ball
    dist = math.sqrt(d2)
    scale = max(1.0, r, s)
    if abs(dist - (r + r_ball)) < tol.tangency * scale or abs(dist - abs(r - r_ball)) < tol.tangency * scale:
        # tangency point lies on the segment between sphere centers
        if dist == 0:
            return PlaneBallRelation("tangent", point=(p, s))
        f = r / dist
        pt_z = q + f * dx
        pt_t = f * r_ball
        return PlaneBallRelation("tangent", point=(pt_z, pt_t))
    if dist > r + r_ball or dist < abs(r - r_ball):
        if dist > r + r_ball:
            return PlaneBallRelation("disjoint")
        # one sphere encloses the other without touching
        if r_ball > r:
            # dome entirely inside the horoball: topmost contact is its apex
            return PlaneBallRelation("crossing", top_height=r)
        return PlaneBallRelation("disjoint")
    return PlaneBallRelation("crossing", top_height=_sphere_cap_top(q, r, p, r_ball))


def _sphere_cap_top(q, r, p, r_ball):
    """Top height of the intersection circle of hemisphere (q,r) and ball sphere."""
    c1 = (q.real, q.imag, 0.0)
    c2 = (p.real, p.imag, r_ball)
    dv = (c2[0] - c1[0], c2[1] - c1[1], c2[2] - c1[2])
    dist = math.sqrt(dv[0] ** 2 + dv[1] ** 2 + dv[2] ** 2)
    # radical plane offset from c1 along the center line
    alpha = (dist * dist + r * r - r_ball * r_ball) / (2.0 * dist)
    rho2 = r * r - alpha * alpha
    rho = math.sqrt(max(rho2, 0.0))
    n = (dv[0] / dist, dv[1] / dist, dv[2] / dist)
    center_z = c1[2] + alpha * n[2]
    # max of z over the circle: center_z + rho * sqrt(1 - nz^2)
    return center_z + rho * math.sqrt(max(1.0 - n[2] * n[2], 0.0))


@dataclass(frozen=True)
class PlanePlaneRelation:
    """Outcome of plane_plane_relation: equal, disjoint, tangent, or crossing."""

    kind: str
    point: object = None  # ideal tangency point (complex or INFINITY)


def plane_plane_relation(p1, p2, tol=DEFAULT_TOL):
    """Classify two geodesic planes by their boundary circles or lines.

    Tangent planes meet at a single ideal point, reported as the tangency
    point.  Two parallel vertical planes are tangent at INFINITY.
    """
    t = tol.tangency
    if p1.is_vertical() and p2.is_vertical():
        cross = (p1.direction * p2.direction.conjugate()).imag
        if abs(cross) < t:
            w = (p2.point - p1.point) / p1.direction
            if abs(w.imag) < t * max(1.0, abs(w)):
                return PlanePlaneRelation("equal")
            return PlanePlaneRelation("tangent", point=INFINITY)
        return PlanePlaneRelation("crossing")
    if p1.is_vertical() or p2.is_vertical():
        line, circ = (p1, p2) if p1.is_vertical() else (p2, p1)
        w = (circ.center - line.point) / line.direction
        dist = abs(w.imag)
        scale = max(1.0, circ.radius)
        if abs(dist - circ.radius) < t * scale:
            # tangency point: projection of the circle center onto the line
            foot = line.point + line.direction * w.real
            return PlanePlaneRelation("tangent", point=foot)
        if dist > circ.radius:
            return PlanePlaneRelation("disjoint")
        return PlanePlaneRelation("crossing")
    gap = abs(p1.center - p2.center)
    scale = max(1.0, p1.radius, p2.radius)
    if gap < t * scale and abs(p1.radius - p2.radius) < t * scale:
        return PlanePlaneRelation("equal")
    if abs(gap - (p1.radius + p2.radius)) < t * scale:
        pt = p1.center + (p2.center - p1.center) * (p1.radius / gap)
        return PlanePlaneRelation("tangent", point=pt)
    if abs(gap - abs(p1.radius - p2.radius)) < t * scale:
        # internal tangency
        if gap == 0:
            return PlanePlaneRelation("equal")
        direction = (p2.center - p1.center) / gap
        sign = 1.0 if p1.radius > p2.radius else -1.0
        pt = p1.center + direction * p1.radius * sign
        return PlanePlaneRelation("tangent", point=pt)
    if gap > p1.radius + p2.radius or gap < abs(p1.radius - p2.radius):
        return PlanePlaneRelation("disjoint")
    return PlanePlaneRelation("crossing")
