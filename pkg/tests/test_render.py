import numpy as np
import pytest

from splatedit.core.types import Camera, ContractError, Gaussian, GaussianScene, logit
from splatedit.raster import pick, render
from splatedit.synthetic import look_at_camera, make_two_cluster_scene, orbit_cameras

from conftest import identity_camera, make_random_view_scene


def centered_camera(width=33, height=33, focal=40.0):
    # Odd dimensions put the principal point on a pixel center, so a
    # point on the optical axis lands exactly on pixel (w//2, h//2).
    return Camera(
        fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0,
        width=width, height=height,
        rotation=np.eye(3), translation=np.zeros(3),
    )


def on_axis_gaussian(color, opacity, depth=3.0, scale=0.15, roi_logit=-9.0):
    return Gaussian(
        position=(0, 0, depth),
        log_scale=np.log([scale] * 3),
        rotation=(1, 0, 0, 0),
        color=color,
        opacity_logit=logit(opacity),
        roi_logit=roi_logit,
    )


class TestCompositingOracles:
    def test_empty_scene_black_background(self):
        img = render(GaussianScene.empty(), centered_camera(), "color")
        assert img.data.shape == (33, 33, 3)
        np.testing.assert_array_equal(img.data, 0.0)

    def test_empty_scene_background_passthrough(self):
        scene = GaussianScene.empty(background_color=(0.2, 0.4, 0.6))
        img = render(scene, centered_camera(), "color")
        np.testing.assert_allclose(img.data[5, 7], [0.2, 0.4, 0.6])

    def test_single_gaussian_center_value(self):
        # One-term compositing at the projected center: value = alpha * color.
        scene = GaussianScene.from_gaussians([on_axis_gaussian((1, 0, 0), 0.8)])
        img = render(scene, centered_camera(), "color")
        np.testing.assert_allclose(img.data[16, 16], [0.8, 0.0, 0.0], atol=1e-6)

    def test_two_coincident_gaussians_front_to_back(self):
        # Front red 0.5 then back blue 0.5: 0.5 + 0.5 * (1 - 0.5) = 0.25 blue.
        front = on_axis_gaussian((1, 0, 0), 0.5, depth=2.5)
        back = on_axis_gaussian((0, 0, 1), 0.5, depth=3.5)
        scene = GaussianScene.from_gaussians([back, front])  # list order != depth order
        img = render(scene, centered_camera(), "color")
        np.testing.assert_allclose(img.data[16, 16], [0.5, 0.0, 0.25], atol=1e-6)

    def test_depth_tie_broken_by_index(self):
        a = on_axis_gaussian((1, 0, 0), 0.6)
        b = on_axis_gaussian((0, 1, 0), 0.6)
        img = render(GaussianScene.from_gaussians([a, b]), centered_camera(), "color")
        # Index 0 composites first: red 0.6, green 0.6*0.4.
        np.testing.assert_allclose(img.data[16, 16], [0.6, 0.24, 0.0], atol=1e-6)

    def test_saturated_roi_channel(self):
        scene = GaussianScene.from_gaussians(
            [on_axis_gaussian((1, 1, 1), 0.9999, roi_logit=20.0)]
        )
        img = render(scene, centered_camera(), "roi")
        assert img.channels == 1
        assert img.data[16, 16, 0] == pytest.approx(0.9999, abs=1e-3)

    def test_unknown_channel_rejected(self):
        with pytest.raises(ContractError):
            render(GaussianScene.empty(), centered_camera(), "depth")


class TestRenderProperties:
    def test_values_in_unit_interval(self, rng):
        scene = make_random_view_scene(rng, 10)
        img = render(scene, identity_camera(), "color")
        assert img.data.min() >= 0.0 and img.data.max() <= 1.0

    def test_deterministic_bit_identical(self, rng):
        scene = make_random_view_scene(rng, 10)
        cam = identity_camera()
        a = render(scene, cam, "color").data
        b = render(scene, cam, "color").data
        assert a.tobytes() == b.tobytes()

    def test_roi_all_ones_equals_white_coverage(self, rng):
        scene = make_random_view_scene(rng, 10)
        scene.roi_logits[:] = 40.0  # r == 1 to double precision
        roi_img = render(scene, identity_camera(), "roi")
        white = scene.copy()
        white.colors[:] = 1.0
        white.background_color[:] = 0.0
        cov_img = render(white, identity_camera(), "color")
        np.testing.assert_allclose(roi_img.data[:, :, 0], cov_img.data[:, :, 0], atol=1e-6)

    def test_rigid_co_transform_invariance(self, rng):
        scene = make_random_view_scene(rng, 8)
        cam = identity_camera()
        base = render(scene, cam, "color").data

        # Rigid world transform: rotate about a skew axis and translate.
        angle = 0.7
        axis = np.array([0.2, -0.5, 0.8])
        axis /= np.linalg.norm(axis)
        w, xyz = np.cos(angle / 2), np.sin(angle / 2) * axis
        q_g = np.array([w, *xyz])
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        R_g = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
        t_g = np.array([0.3, -1.1, 0.8])

        moved = scene.copy()
        moved.positions = scene.positions @ R_g.T + t_g
        w1, x1, y1, z1 = q_g
        for i, (w2, x2, y2, z2) in enumerate(scene.rotations):
            moved.rotations[i] = [
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            ]
        cam2 = Camera(
            fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
            width=cam.width, height=cam.height,
            rotation=cam.rotation @ R_g.T,
            translation=cam.translation - cam.rotation @ R_g.T @ t_g,
            near_clip=cam.near_clip,
        )
        moved_img = render(moved, cam2, "color").data
        np.testing.assert_allclose(moved_img, base, atol=1e-5)

    def test_fixture_scene_visible_from_all_orbit_views(self):
        scene = make_two_cluster_scene()
        for cam in orbit_cameras(6):
            img = render(scene, cam, "color")
            assert img.data.max() > 0.3


class TestPick:
    def test_empty_scene_returns_none(self):
        assert pick(GaussianScene.empty(), centered_camera(), (5, 5)) is None

    def test_single_opaque_gaussian_center(self):
        scene = GaussianScene.from_gaussians([on_axis_gaussian((1, 0, 0), 0.95)])
        assert pick(scene, centered_camera(), (16, 16)) == 0

    def test_front_gaussian_wins_regardless_of_list_order(self):
        # Oracle: explicit depth sort puts the closer point first.
        front = on_axis_gaussian((1, 0, 0), 0.9, depth=2.0)
        back = on_axis_gaussian((0, 1, 0), 0.9, depth=3.0)
        assert pick(GaussianScene.from_gaussians([back, front]), centered_camera(), (16, 16)) == 1
        assert pick(GaussianScene.from_gaussians([front, back]), centered_camera(), (16, 16)) == 0

    def test_below_threshold_returns_none(self):
        scene = GaussianScene.from_gaussians([on_axis_gaussian((1, 0, 0), 0.2)])
        assert pick(scene, centered_camera(), (16, 16)) is None

    def test_out_of_bounds_pixel_rejected(self):
        with pytest.raises(ContractError):
            pick(GaussianScene.empty(), centered_camera(), (33, 5))
        with pytest.raises(ContractError):
            pick(GaussianScene.empty(), centered_camera(), (-1, 5))

    def test_background_pixel_returns_none(self):
        scene = GaussianScene.from_gaussians([on_axis_gaussian((1, 0, 0), 0.9)])
        assert pick(scene, centered_camera(), (1, 1)) is None
