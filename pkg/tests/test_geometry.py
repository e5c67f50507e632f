"""Camera, plane, and reflection math."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirrormocap.errors import (
    NoIntersection,
    NoMirrorIntersection,
    NonPositiveDepth,
    NonUnitNormal,
)
from mirrormocap.geometry import (
    CameraIntrinsics,
    Plane,
    Ray,
    angle_between_deg,
    backproject_to_plane,
    project,
    project_points,
    reflect_ray,
    reflection_matrix,
    virtual_camera,
)

K0 = CameraIntrinsics(1000.0, 500.0, 400.0, 1000, 800)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def random_planes(n, seed=0):
    rng = np.random.default_rng(seed)
    normals = rng.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    ds = rng.uniform(-5.0, 5.0, n)
    return [Plane(nv, d) for nv, d in zip(normals, ds)]


class TestProject:
    def test_principal_ray(self):
        assert np.allclose(project(K0, (0, 0, 2)), (500, 400))

    def test_similar_triangles(self):
        assert np.allclose(project(K0, (1, 0, 2)), (1000, 400))

    def test_hand_computed(self):
        # independent arithmetic for f=1145, o=(514, 501), p=(0.3, -0.2, 3.1)
        K = CameraIntrinsics(1145.0, 514.0, 501.0, 1024, 1024)
        u = 1145.0 * 0.3 / 3.1 + 514.0
        v = 1145.0 * (-0.2) / 3.1 + 501.0
        assert np.allclose(project(K, (0.3, -0.2, 3.1)), (u, v), atol=1e-12)

    def test_rejects_nonpositive_depth(self):
        with pytest.raises(NonPositiveDepth):
            project(K0, (0, 0, 0))
        with pytest.raises(NonPositiveDepth):
            project(K0, (1, 1, -2))
        with pytest.raises(NonPositiveDepth):
            project_points(K0, np.array([[0, 0, 1.0], [0, 0, -1.0]]))


class TestBackproject:
    def test_round_trip_on_plane(self):
        plane = Plane(unit((0.2, -1.0, 0.1)), 1.3)
        rng = np.random.default_rng(3)
        for _ in range(50):
            q = rng.uniform((0, 0), (K0.width, K0.height))
            try:
                p = backproject_to_plane(K0, q, plane)
            except NoIntersection:
                continue
            assert abs(plane.signed_distance(p)) < 1e-9
            assert np.linalg.norm(project(K0, p) - q) < 1e-6

    def test_ground_intersection_closed_form(self):
        # camera level, ground 1.6 below: pixel d px under the principal
        # point meets the ground at depth 1.6 f / d (line-plane oracle)
        plane = Plane(np.array([0.0, -1.0, 0.0]), 1.6)
        q = np.array([K0.o1, K0.o2 + 80.0])
        p = backproject_to_plane(K0, q, plane)
        expected = np.array([0.0, 1.6, 1.6 * K0.f / 80.0])
        assert np.allclose(p, expected, atol=1e-12)

    def test_parallel_ray(self):
        plane = Plane(np.array([0.0, -1.0, 0.0]), 1.6)
        with pytest.raises(NoIntersection):
            backproject_to_plane(K0, (K0.o1, K0.o2), plane)  # horizon ray

    def test_behind_camera(self):
        plane = Plane(np.array([0.0, -1.0, 0.0]), 1.6)
        with pytest.raises(NoIntersection):
            backproject_to_plane(K0, (K0.o1, K0.o2 - 80.0), plane)


class TestReflection:
    def test_axis_plane(self):
        A = reflection_matrix(Plane(np.array([1.0, 0, 0]), 0.0))
        assert np.allclose(A.A, np.diag([-1.0, 1, 1, 1]))

    def test_offset_plane_moves_origin(self):
        A = reflection_matrix(Plane(np.array([0.0, 0, 1.0]), -2.0))
        assert np.allclose(A.apply((0, 0, 0)), (0, 0, 4))

    def test_involution_batch(self):
        for plane in random_planes(1000, seed=1):
            A = reflection_matrix(plane).A
            assert np.abs(A @ A - np.eye(4)).max() < 1e-9

    def test_fixed_points(self):
        rng = np.random.default_rng(2)
        for plane in random_planes(200, seed=5):
            A = reflection_matrix(plane)
            # random point on the plane
            base = -plane.d * plane.n
            tangent = np.cross(plane.n, [1.0, 0.3, -0.2])
            tangent = unit(tangent)
            p = base + rng.uniform(-3, 3) * tangent
            assert np.linalg.norm(A.apply(p) - p) < 1e-9

    def test_linear_block_improper_orthogonal(self):
        for plane in random_planes(100, seed=7):
            L = reflection_matrix(plane).linear
            assert np.abs(L @ L.T - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(L) + 1.0) < 1e-9

    def test_rejects_non_unit_normal(self):
        plane = Plane(np.array([1.0, 0, 0]), 0.0)
        object.__setattr__(plane, "n", np.array([1.1, 0.0, 0.0]))
        with pytest.raises(NonUnitNormal):
            reflection_matrix(plane)

    def test_action_formula(self):
        rng = np.random.default_rng(9)
        for plane in random_planes(100, seed=11):
            A = reflection_matrix(plane)
            p = rng.normal(size=3)
            expected = p - 2.0 * (plane.n @ p + plane.d) * plane.n
            assert np.allclose(A.apply(p), expected, atol=1e-12)


class TestVirtualCamera:
    def test_behind_offset_mirror(self):
        A = reflection_matrix(Plane(np.array([0.0, 0, 1.0]), -2.0))
        vc = virtual_camera(A)
        assert np.allclose(vc.R_bar, np.diag([1.0, 1.0, -1.0]))
        assert np.allclose(vc.c_bar, (0, 0, 4))

    def test_mirror_through_camera_center(self):
        A = reflection_matrix(Plane(np.array([1.0, 0, 0]), 0.0))
        vc = virtual_camera(A)
        assert np.allclose(vc.R_bar, np.diag([-1.0, 1.0, 1.0]))
        assert np.allclose(vc.c_bar, (0, 0, 0))

    def test_always_improper(self):
        for plane in random_planes(100, seed=13):
            vc = virtual_camera(reflection_matrix(plane))
            assert abs(np.linalg.det(vc.R_bar) + 1.0) < 1e-9
            assert np.abs(vc.R_bar @ vc.R_bar.T - np.eye(3)).max() < 1e-9

    def test_lands_behind_oriented_mirror(self):
        # plane oriented with the camera on the positive side: the virtual
        # camera must sit on the negative (far) side
        for plane in random_planes(100, seed=17):
            plane = plane.oriented_toward(np.zeros(3))
            if plane.signed_distance(np.zeros(3)) < 1e-6:
                continue
            vc = virtual_camera(reflection_matrix(plane))
            assert plane.signed_distance(vc.c_bar) < 0


class TestReflectRay:
    def test_normal_incidence(self):
        plane = Plane(np.array([0.0, 0, -1.0]), 3.0)  # mirror 3 ahead, facing camera
        A = reflection_matrix(plane)
        ray = Ray(origin=np.zeros(3), dir=np.array([0.0, 0, 1.0]), t_near=0.01, t_far=100.0)
        out = reflect_ray(A, ray)
        assert np.allclose(out.dir, (0, 0, -1))
        assert np.allclose(out.origin, (0, 0, 6))
        assert np.isclose(out.t_near, 3.0)

    def test_direction_involution(self):
        rng = np.random.default_rng(23)
        for plane in random_planes(100, seed=19):
            L = reflection_matrix(plane).linear
            r = rng.normal(size=3)
            assert np.allclose(L @ (L @ r), r, atol=1e-9)

    def test_householder_oracle_oblique(self):
        # 45-degree incidence: reflected direction from r - 2 (n.r) n
        n = unit((1.0, 0.0, -1.0))
        plane = Plane(n, 2.0)
        A = reflection_matrix(plane)
        d = np.array([0.0, 0.0, 1.0])
        ray = Ray(origin=np.zeros(3), dir=d, t_near=0.01, t_far=100.0)
        out = reflect_ray(A, ray)
        expected = d - 2.0 * (n @ d) * n
        assert np.allclose(out.dir, expected, atol=1e-12)

    def test_path_length_preserved(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            n = unit(rng.normal(size=3))
            plane = Plane(n, rng.uniform(0.5, 4.0)).oriented_toward(np.zeros(3))
            d = unit(rng.normal(size=3))
            if abs(plane.n @ d) < 0.1:
                continue
            ray = Ray(origin=np.zeros(3), dir=d, t_near=1e-6, t_far=1e6)
            try:
                out = reflect_ray(reflection_matrix(plane), ray)
            except NoMirrorIntersection:
                continue
            t_s = out.t_near
            u = rng.uniform(0.1, 5.0)
            # physical reflected point, marched u beyond the mirror hit
            s = ray.at(t_s)
            refl_dir = d - 2.0 * (plane.n @ d) * plane.n
            physical = s + u * refl_dir
            # same point on the returned ray at parameter t_s + u
            assert np.allclose(out.at(t_s + u), physical, atol=1e-9)

    def test_no_crossing(self):
        plane = Plane(np.array([0.0, 0, -1.0]), 3.0)
        A = reflection_matrix(plane)
        away = Ray(origin=np.zeros(3), dir=np.array([0.0, 0, -1.0]), t_near=0.01, t_far=100.0)
        with pytest.raises(NoMirrorIntersection):
            reflect_ray(A, away)


@settings(max_examples=60, deadline=None)
@given(
    nx=st.floats(-1, 1), ny=st.floats(-1, 1), nz=st.floats(-1, 1),
    d=st.floats(-4, 4),
)
def test_reflection_involution_property(nx, ny, nz, d):
    v = np.array([nx, ny, nz])
    if np.linalg.norm(v) < 1e-2:
        return
    plane = Plane(unit(v), d)
    A = reflection_matrix(plane).A
    assert np.abs(A @ A - np.eye(4)).max() < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    u=st.floats(10, 990), v=st.floats(10, 790),
    tilt=st.floats(-0.3, 0.3), height=st.floats(0.5, 3.0),
)
def test_project_backproject_round_trip_property(u, v, tilt, height):
    plane = Plane(unit((0.0, -1.0, tilt)), height)
    try:
        p = backproject_to_plane(K0, (u, v), plane)
    except NoIntersection:
        return
    assert np.linalg.norm(project(K0, p) - (u, v)) < 1e-6


def test_angle_between():
    assert np.isclose(angle_between_deg((1, 0, 0), (0, 1, 0)), 90.0)
    assert np.isclose(angle_between_deg((1, 0, 0), (1, 0, 0)), 0.0)
