"""Upper half-space model: examples with independent oracles and invariance suites."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize

from _helpers import fit_sphere, hyperbolic_point_distance, random_moebius, sphere_points
from cuspkit.hmodel import (
    DEFAULT_TOL,
    INFINITY,
    GeodesicPlane,
    Horoball,
    MoebiusMap,
    apply_boundary,
    apply_horoball,
    apply_plane,
    apply_point,
    circle_through,
    horoball_distance,
    horosphere_arc_length,
    plane_ball_relation,
    plane_plane_relation,
)

TOL = 1e-9


# ---------------------------------------------------------------- construction


def test_determinant_normalized():
    m = MoebiusMap(2, 0, 0, 2)
    assert abs(m.a * m.d - m.b * m.c - 1) < 1e-14


def test_singular_matrix_rejected():
    with pytest.raises(ValueError):
        MoebiusMap(1, 2, 2, 4)


def test_horoball_size_positive():
    with pytest.raises(ValueError):
        Horoball(0j, -1.0)


def test_vertical_direction_unit():
    p = GeodesicPlane.vertical(3 + 4j, 2 - 2j)
    assert abs(abs(p.direction) - 1) < 1e-14
    assert 0 <= math.atan2(p.direction.imag, p.direction.real) < math.pi


# ---------------------------------------------------------------- apply_boundary


def test_apply_boundary_identity():
    m = MoebiusMap.identity()
    assert apply_boundary(m, 3 + 4j) == 3 + 4j


def test_apply_boundary_infinity_convention():
    m = MoebiusMap(0, -1, 1, 0)
    assert apply_boundary(m, INFINITY) == 0
    assert apply_boundary(m, 0) is INFINITY


def test_apply_boundary_translation():
    m = MoebiusMap(1, 1, 0, 1)
    assert abs(apply_boundary(m, 5) - 6) < TOL


# ---------------------------------------------------------------- apply_horoball


def test_apply_horoball_identity():
    b = Horoball(2 + 1j, 0.75)
    image = apply_horoball(MoebiusMap.identity(), b)
    assert abs(image.center - b.center) < TOL and abs(image.size - b.size) < TOL


def test_apply_horoball_inversion():
    m = MoebiusMap(0, -1, 1, 0)
    image = apply_horoball(m, Horoball(INFINITY, 1.0))
    assert abs(image.center - 0) < TOL
    assert abs(image.size - 1.0) < TOL


def test_apply_horoball_parabolic_preserves_size():
    m = MoebiusMap(1, 1 + 2j, 0, 1)
    image = apply_horoball(m, Horoball(0j, 0.5))
    assert abs(image.center - (1 + 2j)) < TOL
    assert abs(image.size - 0.5) < TOL


def test_apply_horoball_infinity_ball_diameter_law():
    # image of the height-h ball at infinity has diameter 1/(|c|^2 h)
    m = MoebiusMap(3 + 1j, 2, 1 - 2j, 1)
    h = 1.7
    image = apply_horoball(m, Horoball(INFINITY, h))
    c = m.c
    assert abs(image.size - 1.0 / (abs(c) ** 2 * h)) < TOL


# ---------------------------------------------------------------- apply_plane


def test_apply_plane_identity():
    p = GeodesicPlane.hemisphere(1 + 1j, 2.0)
    q = apply_plane(MoebiusMap.identity(), p)
    assert q.kind == "hemisphere"
    assert abs(q.center - p.center) < TOL and abs(q.radius - p.radius) < TOL


def test_apply_plane_inversion_of_vertical_line():
    # oracle: map three boundary points of the line Re z = 1 and fit a circle
    m = MoebiusMap(0, -1, 1, 0)
    pts = [1 + 0j, 1 + 1j, 1 - 1j]
    images = [apply_boundary(m, z) for z in pts]
    circ = circle_through(*images)
    assert circ is not None
    center, radius = circ
    assert abs(center - (-0.5)) < TOL and abs(radius - 0.5) < TOL

    p = GeodesicPlane.vertical(1 + 0j, 1j)
    q = apply_plane(m, p)
    assert q.kind == "hemisphere"
    assert abs(q.center - (-0.5)) < TOL
    assert abs(q.radius - 0.5) < TOL


def test_apply_plane_translation_of_hemisphere():
    m = MoebiusMap(1, 3, 0, 1)
    q = apply_plane(m, GeodesicPlane.hemisphere(0j, 2.0))
    assert q.kind == "hemisphere"
    assert abs(q.center - 3) < TOL and abs(q.radius - 2.0) < TOL


def test_apply_plane_line_through_pole_stays_vertical():
    # pole of m is at 0, which lies on the line Re z = 0
    m = MoebiusMap(0, -1, 1, 0)
    p = GeodesicPlane.vertical(0j, 1j)
    q = apply_plane(m, p)
    assert q.kind == "vertical"


# ---------------------------------------------------------------- horoball_distance


def test_horoball_distance_tangent_at_infinity():
    assert abs(horoball_distance(Horoball(INFINITY, 1.0), Horoball(0j, 1.0))) < TOL


def test_horoball_distance_numeric_oracle():
    # oracle: minimize the hyperbolic distance between the two spheres
    b1 = Horoball(0j, 1.0)
    b2 = Horoball(2 + 0j, 1.0)

    def objective(u):
        p = sphere_points(b1.center, b1.size, [(u[0], u[1])])[0]
        q = sphere_points(b2.center, b2.size, [(u[2], u[3])])[0]
        return hyperbolic_point_distance(p, q)

    best = min(
        minimize(
            objective, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14}
        ).fun
        for x0 in ([1.5, 0.0, 1.5, math.pi], [2.0, 0.1, 1.2, 3.0])
    )
    assert abs(best - 2 * math.log(2)) < 1e-6
    assert abs(horoball_distance(b1, b2) - 2 * math.log(2)) < TOL


def test_horoball_distance_tangent_unit_balls():
    assert abs(horoball_distance(Horoball(0j, 1.0), Horoball(1 + 0j, 1.0))) < TOL


def test_horoball_distance_nested_error():
    with pytest.raises(ValueError):
        horoball_distance(Horoball(0j, 1.0), Horoball(0j, 0.5))
    with pytest.raises(ValueError):
        horoball_distance(Horoball(INFINITY, 1.0), Horoball(INFINITY, 2.0))


def test_horoball_distance_infinity_formula_agrees_with_finite():
    # move a finite pair so one center goes to infinity; distance must persist
    b1 = Horoball(0j, 0.25)
    b2 = Horoball(1 + 1j, 0.4)
    d0 = horoball_distance(b1, b2)
    m = MoebiusMap(0, -1, 1, -(1 + 1j))  # sends 1+i to infinity
    d1 = horoball_distance(apply_horoball(m, b1), apply_horoball(m, b2))
    assert abs(d0 - d1) < 1e-9


# ---------------------------------------------------------------- horosphere_arc_length


def test_horosphere_top_to_equator_is_one():
    b = Horoball(0j, 1.0)
    top = (0j, 1.0)
    equator = (0.5 + 0j, 0.5)
    assert abs(horosphere_arc_length(b, top, equator) - 1.0) < TOL


def test_horosphere_arc_length_zero():
    b = Horoball(0j, 1.0)
    assert horosphere_arc_length(b, (0j, 1.0), (0j, 1.0)) == 0.0


def test_horosphere_arc_length_at_infinity():
    b = Horoball(INFINITY, 2.0)
    assert abs(horosphere_arc_length(b, (0j, 2.0), (3 + 4j, 2.0)) - 2.5) < TOL


def test_horosphere_arc_length_rejects_off_sphere_points():
    b = Horoball(0j, 1.0)
    with pytest.raises(ValueError):
        horosphere_arc_length(b, (0j, 0.9), (0.5 + 0j, 0.5))


# ---------------------------------------------------------------- plane_ball_relation


def test_plane_through_pole_crosses_at_full_height():
    p = GeodesicPlane.vertical(0j, 1j)
    rel = plane_ball_relation(p, Horoball(0j, 1.0))
    assert rel.kind == "crossing"
    assert abs(rel.top_height - 1.0) < TOL


def test_plane_ball_disjoint_numeric_oracle():
    plane = GeodesicPlane.hemisphere(2 + 0j, 1.0)
    ball = Horoball(0j, 1.0)

    def objective(u):
        q = sphere_points(ball.center, ball.size, [(u[0], u[1])])[0]
        theta, phi = u[2], u[3]
        z = plane.center + plane.radius * math.sin(theta) * complex(math.cos(phi), math.sin(phi))
        t = plane.radius * math.cos(theta)
        if t <= 1e-9:
            return 100.0
        return hyperbolic_point_distance(q, (z, t))

    res = minimize(
        objective,
        [1.2, 0.0, 1.2, math.pi],
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12},
    )
    assert res.fun > 0.1  # genuinely separated
    assert plane_ball_relation(plane, ball).kind == "disjoint"


def test_plane_ball_crossing_height_relation():
    # hemisphere tangent to the vertical plane at the ball's center: every
    # intersection point obeys z = (r/a) x with a the ball radius
    plane = GeodesicPlane.hemisphere(1 + 0j, 1.0)
    ball = Horoball(0j, 1.0)
    rel = plane_ball_relation(plane, ball)
    assert rel.kind == "crossing"
    r, a = plane.radius, ball.size / 2.0
    # topmost point: z = (r/a) x on the ball sphere, maximized over the circle
    best = 0.0
    for x in np.linspace(0, a, 20001):
        z = (r / a) * x
        # on the ball sphere: x^2 + y^2 + (z-a)^2 = a^2 for some real y
        resid = a * a - x * x - (z - a) ** 2
        if resid >= 0:
            best = max(best, z)
    assert abs(rel.top_height - best) < 1e-4
    assert abs(rel.top_height - 0.8) < TOL


def test_plane_ball_tangency():
    plane = GeodesicPlane.hemisphere(0j, 1.0)
    ball = Horoball(INFINITY, 1.0)
    rel = plane_ball_relation(plane, ball)
    assert rel.kind == "tangent"
    z, t = rel.point
    assert abs(z - 0) < TOL and abs(t - 1.0) < TOL


def test_vertical_plane_tangent_to_ball():
    plane = GeodesicPlane.vertical(0.5 + 0j, 1j)
    ball = Horoball(0j, 1.0)
    rel = plane_ball_relation(plane, ball)
    assert rel.kind == "tangent"
    z, t = rel.point
    assert abs(z - 0.5) < 1e-7 and abs(t - 0.5) < 1e-7


# ---------------------------------------------------------------- plane_plane_relation


def test_parallel_vertical_planes_tangent_at_infinity():
    p1 = GeodesicPlane.vertical(0j, 1j)
    p2 = GeodesicPlane.vertical(1 + 0j, 1j)
    rel = plane_plane_relation(p1, p2)
    assert rel.kind == "tangent"
    assert rel.point is INFINITY


def test_hemisphere_tangent_to_vertical_plane():
    p1 = GeodesicPlane.vertical(0j, 1j)
    p2 = GeodesicPlane.hemisphere(1 + 0j, 1.0)
    rel = plane_plane_relation(p1, p2)
    assert rel.kind == "tangent"
    assert abs(rel.point - 0) < 1e-7


def test_externally_tangent_hemispheres():
    p1 = GeodesicPlane.hemisphere(0j, 1.0)
    p2 = GeodesicPlane.hemisphere(3 + 0j, 2.0)
    rel = plane_plane_relation(p1, p2)
    assert rel.kind == "tangent"
    assert abs(rel.point - 1.0) < 1e-7
    assert plane_plane_relation(p1, GeodesicPlane.hemisphere(4 + 0j, 2.0)).kind == "disjoint"
    assert plane_plane_relation(p1, GeodesicPlane.hemisphere(2 + 0j, 2.0)).kind == "crossing"


# ---------------------------------------------------------------- invariance suites


def test_isometry_invariance_of_horoball_distance():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = random_moebius(rng)
        c1 = complex(rng.normal(), rng.normal())
        c2 = complex(rng.normal(), rng.normal())
        if abs(c1 - c2) < 0.1:
            continue
        b1 = Horoball(c1, 0.2 + rng.random())
        b2 = Horoball(c2, 0.2 + rng.random())
        d0 = horoball_distance(b1, b2)
        ib1, ib2 = apply_horoball(m, b1), apply_horoball(m, b2)
        if ib1.is_at_infinity() and ib2.is_at_infinity():
            continue
        d1 = horoball_distance(ib1, ib2)
        assert abs(d0 - d1) < 1e-9 * max(1.0, abs(d0))


def test_tangency_preserved_under_isometry():
    rng = np.random.default_rng(11)
    for _ in range(300):
        m = random_moebius(rng)
        c = complex(rng.normal(), rng.normal())
        gap = 0.5 + rng.random()
        # construct a tangent pair: distance formula gives 0 when |p-q|^2 = d1 d2
        d1 = 0.3 + rng.random()
        d2 = gap * gap / d1
        b1 = Horoball(c, d1)
        b2 = Horoball(c + gap, d2)
        assert abs(horoball_distance(b1, b2)) < 1e-12
        ib1, ib2 = apply_horoball(m, b1), apply_horoball(m, b2)
        if ib1.is_at_infinity() and ib2.is_at_infinity():
            continue
        assert abs(horoball_distance(ib1, ib2)) < DEFAULT_TOL.tangency


def test_plane_closure_under_action():
    rng = np.random.default_rng(13)
    for _ in range(300):
        m = random_moebius(rng)
        if rng.random() < 0.5:
            plane = GeodesicPlane.hemisphere(
                complex(rng.normal(), rng.normal()), 0.2 + 2 * rng.random()
            )
        else:
            plane = GeodesicPlane.vertical(
                complex(rng.normal(), rng.normal()),
                complex(rng.normal(), rng.normal()) + 0.1,
            )
        image = apply_plane(m, plane)
        for z in plane.boundary_points(5):
            w = apply_boundary(m, z)
            if w is INFINITY:
                assert image.kind == "vertical"
            else:
                assert image.contains_boundary_point(w, DEFAULT_TOL) or abs(w) > 1e7


def test_apply_horoball_agrees_with_sphere_fit():
    rng = np.random.default_rng(17)
    angles = [(0.3, 0.0), (0.9, 1.0), (1.4, 2.5), (2.0, 4.0), (2.6, 5.5), (1.1, 3.9)]
    for _ in range(200):
        m = random_moebius(rng)
        center = complex(rng.normal(), rng.normal())
        ball = Horoball(center, 0.2 + rng.random())
        image = apply_horoball(m, ball)
        if image.is_at_infinity():
            continue
        pts = sphere_points(ball.center, ball.size, angles)
        mapped = [apply_point(m, p) for p in pts]
        (cx, cy, cz), radius = fit_sphere(mapped)
        assert abs(complex(cx, cy) - image.center) < 1e-6 * max(1.0, abs(image.center))
        assert abs(2 * radius - image.size) < 1e-6 * max(1.0, image.size)
        assert abs(cz - radius) < 1e-6 * max(1.0, radius)


def test_sign_convention_plus_minus_m():
    rng = np.random.default_rng(19)
    for _ in range(200):
        m = random_moebius(rng)
        neg = MoebiusMap(-m.a * 1.0000001j**0, -m.b, -m.c, -m.d)
        # construct -m directly without renormalization flipping the sign back
        z = complex(rng.normal(), rng.normal())
        w1, w2 = apply_boundary(m, z), apply_boundary(neg, z)
        if w1 is INFINITY or w2 is INFINITY:
            assert w1 is INFINITY and w2 is INFINITY
        else:
            assert abs(w1 - w2) < 1e-9 * max(1.0, abs(w1))
        ball = Horoball(z, 0.5)
        b1, b2 = apply_horoball(m, ball), apply_horoball(neg, ball)
        assert b1.is_at_infinity() == b2.is_at_infinity()
        if not b1.is_at_infinity():
            assert abs(b1.center - b2.center) < 1e-9 * max(1.0, abs(b1.center))
        assert abs(b1.size - b2.size) < 1e-9 * max(1.0, b1.size)


def test_point_action_preserves_hyperbolic_distance():
    rng = np.random.default_rng(23)
    for _ in range(500):
        m = random_moebius(rng)
        p = (complex(rng.normal(), rng.normal()), 0.1 + rng.random())
        q = (complex(rng.normal(), rng.normal()), 0.1 + rng.random())
        d0 = hyperbolic_point_distance(p, q)
        d1 = hyperbolic_point_distance(apply_point(m, p), apply_point(m, q))
        assert abs(d0 - d1) < 1e-8 * max(1.0, d0)
