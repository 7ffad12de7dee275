import numpy as np
import pytest

from splatedit.core.types import Camera, GaussianScene, ImageBuffer, SCENE_ATTRIBUTES, logit
from splatedit.raster import render


def make_random_view_scene(rng: np.random.Generator, n: int,
                           background=(0.15, 0.25, 0.2)) -> GaussianScene:
    """Random small scene fully inside a 32x32 identity-pose view.

    Geometry is kept well-conditioned for derivative checks: points a
    safe distance from the image border and the near plane, moderate
    scales and opacities.
    """
    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return GaussianScene(
        positions=np.column_stack([
            rng.uniform(-0.55, 0.55, n),
            rng.uniform(-0.55, 0.55, n),
            rng.uniform(2.5, 4.0, n),
        ]),
        log_scales=np.log(rng.uniform(0.05, 0.16, (n, 3))),
        rotations=quats,
        colors=rng.uniform(0.1, 0.9, (n, 3)),
        opacity_logits=logit(rng.uniform(0.25, 0.85, n)),
        roi_logits=rng.uniform(-2.0, 2.0, n),
        background_color=background,
    )


def identity_camera(width=32, height=32, focal=30.0) -> Camera:
    return Camera(
        fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0,
        width=width, height=height,
        rotation=np.eye(3), translation=np.zeros(3),
    )


def finite_difference_gradients(scene: GaussianScene, camera: Camera, channel: str,
                                weights: np.ndarray, eps: float = 1e-4) -> dict:
    """Central-difference gradients of sum(render * weights): the
    independent oracle for the analytic backward pass."""

    def loss() -> float:
        return float(np.sum(render(scene, camera, channel).data * weights))

    grads = {}
    for name in SCENE_ATTRIBUTES:
        arr = getattr(scene, name)
        flat = arr.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus = loss()
            flat[i] = orig - eps
            minus = loss()
            flat[i] = orig
            g[i] = (plus - minus) / (2.0 * eps)
        grads[name] = g.reshape(arr.shape)
    return grads


def assert_gradients_match(analytic: dict, numeric: dict,
                           rel_tol: float = 1e-3, floor: float = 1e-8):
    """Relative comparison over every partial whose magnitude exceeds
    the floor on either side."""
    for name, fd in numeric.items():
        ana = analytic[name]
        fd_f, ana_f = fd.reshape(-1), ana.reshape(-1)
        active = (np.abs(ana_f) > floor) | (np.abs(fd_f) > floor)
        scale = np.maximum(np.abs(fd_f[active]), np.abs(ana_f[active]))
        rel = np.abs(ana_f[active] - fd_f[active]) / scale
        assert rel.size == 0 or rel.max() < rel_tol, (
            f"{name}: worst relative error {rel.max():.3e} exceeds {rel_tol}"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def as_grad_image(weights: np.ndarray) -> ImageBuffer:
    return ImageBuffer(weights)
