import numpy as np
import pytest

from splatrig.alignment import (
    DegenerateGeometryError,
    IcpParams,
    NoOverlapError,
    align_scene_to_robot,
    best_fit_transform,
    icp_align,
    load_xyz_points,
    rescale_scene,
)
from splatrig.geometry import RigidTransform, quat_to_rotation

from conftest import make_scene, random_unit_quats


def rot_z(deg):
    a = np.deg2rad(deg)
    return np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])


def small_rotation(rng, max_deg):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(-max_deg, max_deg))
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


class TestBestFit:
    def test_identity_for_equal_sets(self, rng):
        pts = rng.uniform(-1, 1, (50, 3))
        T, s = best_fit_transform(pts, pts)
        assert np.allclose(T.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(T.translation, 0, atol=1e-12)
        assert s == 1.0

    def test_recovers_known_rigid_transform(self, rng):
        pts = rng.uniform(-1, 1, (100, 3))
        R = rot_z(30)
        t = np.array([0.1, 0, 0])
        T, s = best_fit_transform(pts, pts @ R.T + t)
        assert np.allclose(T.rotation, R, atol=1e-9)
        assert np.allclose(T.translation, t, atol=1e-9)

    def test_recovers_pure_scale(self, rng):
        pts = rng.uniform(-1, 1, (100, 3))
        T, s = best_fit_transform(pts, 2.0 * pts, estimate_scale=True)
        assert abs(s - 2.0) < 1e-9
        assert np.allclose(T.rotation, np.eye(3), atol=1e-9)
        assert np.allclose(T.translation, 0, atol=1e-9)

    def test_too_few_points(self):
        with pytest.raises(DegenerateGeometryError):
            best_fit_transform(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_collinear_points(self):
        line = np.outer(np.arange(10.0), [1, 0, 0])
        with pytest.raises(DegenerateGeometryError):
            best_fit_transform(line, line)

    def test_det_plus_one_under_noise(self, rng):
        for _ in range(50):
            src = rng.uniform(-1, 1, (30, 3))
            tgt = rng.uniform(-1, 1, (30, 3))
            T, _ = best_fit_transform(src, tgt)
            assert abs(np.linalg.det(T.rotation) - 1.0) < 1e-9


class TestIcp:
    def test_identity_when_aligned(self, rng):
        pts = rng.uniform(-1, 1, (200, 3))
        res = icp_align(pts, pts, params=IcpParams(max_correspondence_dist=0.5))
        assert res.converged
        assert res.rms_residual < 1e-9
        assert np.allclose(res.transform.rotation, np.eye(3), atol=1e-9)

    def test_recovers_small_rigid_perturbation(self, rng):
        pts = rng.uniform(-0.5, 0.5, (500, 3))
        R = small_rotation(rng, 10)
        t = np.array([0.03, -0.02, 0.05])
        target = pts @ R.T + t
        res = icp_align(pts, target, params=IcpParams(max_correspondence_dist=0.5))
        assert np.linalg.norm(res.transform.rotation - R) < 1e-3
        assert np.linalg.norm(res.transform.translation - t) < 1e-3

    def test_disjoint_clouds_raise_no_overlap(self, rng):
        pts = rng.uniform(-0.5, 0.5, (100, 3))
        far = pts + np.array([10.0, 0, 0])
        with pytest.raises(NoOverlapError):
            icp_align(pts, far, params=IcpParams(max_correspondence_dist=0.05))

    def test_rms_non_increasing(self, rng):
        # re-run with increasing iteration caps; rms never rises
        pts = rng.uniform(-0.5, 0.5, (300, 3))
        R = small_rotation(rng, 8)
        target = pts @ R.T + np.array([0.02, 0.01, 0.0])
        last = np.inf
        for max_it in (1, 2, 4, 8, 16):
            res = icp_align(
                pts, target,
                params=IcpParams(max_iterations=max_it, max_correspondence_dist=0.5,
                                 convergence_tol=1e-12, trim_fraction=0.0),
            )
            assert res.rms_residual <= last + 1e-12
            last = res.rms_residual


class TestAlignSceneToRobot:
    def test_identity_when_scene_is_reference(self, rng):
        scene = make_scene(rng, n=200)
        crop = (np.full(3, -10.0), np.full(3, 10.0))
        res = align_scene_to_robot(scene, scene.means, crop,
                                   params=IcpParams(max_correspondence_dist=1.0))
        assert res.converged
        assert res.scale == 1.0
        assert np.allclose(res.transform.rotation, np.eye(3), atol=1e-9)

    def test_recovers_similarity(self, rng):
        ref = rng.uniform(-0.5, 0.5, (800, 3))
        s = 1.27
        R = small_rotation(rng, 8)
        t = np.array([0.02, -0.01, 0.03])
        # scene means are the reference points pulled back through the similarity
        scene_means = ((ref - t) @ R) / s
        scene = make_scene(rng, n=800).replace(means=scene_means)
        crop = (np.full(3, -10.0), np.full(3, 10.0))
        res = align_scene_to_robot(
            scene, ref, crop,
            params=IcpParams(estimate_scale=True, max_correspondence_dist=1.0),
        )
        assert abs(res.scale - s) < 1e-2
        assert np.linalg.norm(res.transform.rotation - R) < 1e-3
        assert np.linalg.norm(res.transform.translation - t) < 1e-3

    def test_crop_with_two_points_degenerate(self, rng):
        scene = make_scene(rng, n=50)
        means = scene.means.copy()
        means[:2] = [[5.0, 5, 5], [5.1, 5, 5]]
        scene = scene.replace(means=means)
        crop = (np.array([4.9, 4.9, 4.9]), np.array([5.2, 5.2, 5.2]))
        with pytest.raises(DegenerateGeometryError):
            align_scene_to_robot(scene, means, crop)

    def test_empty_crop(self, rng):
        scene = make_scene(rng, n=50)
        crop = (np.full(3, 100.0), np.full(3, 101.0))
        with pytest.raises(ValueError, match="no splat means"):
            align_scene_to_robot(scene, scene.means, crop)


class TestRescale:
    def test_scale_one_is_identity(self, rng):
        scene = make_scene(rng, n=10)
        out = rescale_scene(scene, 1.0)
        assert np.allclose(out.means, scene.means)
        assert np.allclose(out.scales, scene.scales)

    def test_scale_two(self, rng):
        scene = make_scene(rng, n=1).replace(
            means=np.array([[1.0, 1, 1]]), scales=np.array([[0.1, 0.1, 0.1]])
        )
        out = rescale_scene(scene, 2.0)
        assert np.allclose(out.means, [[2, 2, 2]])
        assert np.allclose(out.scales, [[0.2, 0.2, 0.2]])
        assert np.allclose(out.rotations, scene.rotations)
        assert np.allclose(out.opacities, scene.opacities)

    def test_inverse_scales_cancel(self, rng):
        scene = make_scene(rng, n=20)
        out = rescale_scene(rescale_scene(scene, 2.0), 0.5)
        assert np.allclose(out.means, scene.means, atol=1e-9)
        assert np.allclose(out.scales, scene.scales, atol=1e-9)

    def test_nonpositive_rejected(self, rng):
        with pytest.raises(ValueError):
            rescale_scene(make_scene(rng, n=5), 0.0)


def test_load_xyz_points():
    pts = load_xyz_points("0 0 0\n1.5 2 3\n# comment\n\n-1 -2 -3\n")
    assert pts.shape == (3, 3)
    assert np.allclose(pts[1], [1.5, 2, 3])
    with pytest.raises(ValueError, match="line 1"):
        load_xyz_points("1 2\n")
