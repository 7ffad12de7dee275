import numpy as np
import pytest

from splatedit.core.types import ContractError, Gaussian, GaussianScene, ImageBuffer, logit
from splatedit.raster import render, render_backward

from conftest import (
    assert_gradients_match,
    finite_difference_gradients,
    identity_camera,
    make_random_view_scene,
)


def test_zero_upstream_gives_zero_buffer(rng):
    scene = make_random_view_scene(rng, 6)
    cam = identity_camera()
    grads = render_backward(scene, cam, "color", ImageBuffer(np.zeros((32, 32, 3))))
    for arr in grads.as_dict().values():
        np.testing.assert_array_equal(arr, 0.0)


def test_dimension_mismatch_rejected(rng):
    scene = make_random_view_scene(rng, 3)
    cam = identity_camera()
    with pytest.raises(ContractError):
        render_backward(scene, cam, "color", ImageBuffer(np.zeros((16, 32, 3))))
    with pytest.raises(ContractError):
        render_backward(scene, cam, "color", ImageBuffer(np.zeros((32, 32, 1))))
    with pytest.raises(ContractError):
        render_backward(scene, cam, "roi", ImageBuffer(np.zeros((32, 32, 3))))


def test_single_gaussian_color_grad_is_alpha():
    # Hand differentiation of the one-term compositing: d(pixel)/d(color) = sigma.
    cam = identity_camera(width=33, height=33, focal=40.0)
    alpha = 0.8
    g = Gaussian((0, 0, 3.0), np.log([0.15] * 3), (1, 0, 0, 0), (1, 0, 0), logit(alpha))
    scene = GaussianScene.from_gaussians([g])
    upstream = np.zeros((33, 33, 3))
    upstream[16, 16, 0] = 1.0
    grads = render_backward(scene, cam, "color", ImageBuffer(upstream))
    assert grads.d_colors[0, 0] == pytest.approx(alpha, abs=1e-9)
    assert grads.d_colors[0, 1] == 0.0


def test_roi_channel_populates_roi_partial_not_color(rng):
    scene = make_random_view_scene(rng, 5)
    cam = identity_camera()
    upstream = ImageBuffer(rng.uniform(-1, 1, (32, 32, 1)))
    grads = render_backward(scene, cam, "roi", upstream)
    np.testing.assert_array_equal(grads.d_colors, 0.0)
    assert np.any(grads.d_roi_logits != 0.0)
    assert np.any(grads.d_positions != 0.0)  # geometry partials computed


def test_color_channel_has_zero_roi_partial(rng):
    scene = make_random_view_scene(rng, 5)
    cam = identity_camera()
    upstream = ImageBuffer(rng.uniform(-1, 1, (32, 32, 3)))
    grads = render_backward(scene, cam, "color", upstream)
    np.testing.assert_array_equal(grads.d_roi_logits, 0.0)


def test_masked_copy_zeroes_non_members(rng):
    scene = make_random_view_scene(rng, 4)
    cam = identity_camera()
    grads = render_backward(scene, cam, "color", ImageBuffer(rng.uniform(-1, 1, (32, 32, 3))))
    mask = np.array([True, False, True, False])
    masked = grads.masked(mask)
    np.testing.assert_array_equal(masked.d_positions[1], 0.0)
    np.testing.assert_array_equal(masked.d_positions[0], grads.d_positions[0])


@pytest.mark.parametrize("channel,nchan", [("color", 3), ("roi", 1)])
def test_gradients_match_finite_differences(channel, nchan):
    # Oracle: central differences of a fixed linear functional of the image.
    rng = np.random.default_rng(91)
    scene = make_random_view_scene(rng, 10)
    cam = identity_camera()
    weights = rng.uniform(-1.0, 1.0, (32, 32, nchan))
    analytic = render_backward(scene, cam, channel, ImageBuffer(weights)).as_dict()
    numeric = finite_difference_gradients(scene, cam, channel, weights)
    assert_gradients_match(analytic, numeric, rel_tol=1e-3, floor=1e-8)


def test_gradients_with_culled_and_clamped_splats():
    # Points behind the camera and fully transparent points get zero grads.
    cam = identity_camera()
    gs = [
        Gaussian((0, 0, 3.0), np.log([0.1] * 3), (1, 0, 0, 0), (0.5, 0.2, 0.7), 1.0),
        Gaussian((0, 0, -2.0), np.log([0.1] * 3), (1, 0, 0, 0), (0.5, 0.2, 0.7), 1.0),
    ]
    scene = GaussianScene.from_gaussians(gs)
    rng = np.random.default_rng(5)
    grads = render_backward(scene, cam, "color", ImageBuffer(rng.uniform(-1, 1, (32, 32, 3))))
    assert np.any(grads.d_positions[0] != 0.0)
    np.testing.assert_array_equal(grads.d_positions[1], 0.0)
    assert grads.is_finite()
