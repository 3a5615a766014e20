import numpy as np
import pytest

from bevlift import CameraView


def make_camera(
    focal: float = 500.0,
    cx: float = 352.0,
    cy: float = 128.0,
    width: int = 704,
    height: int = 256,
    rotation=None,
    translation=None,
    view_id: int = 0,
) -> CameraView:
    return CameraView(
        intrinsics=np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]]),
        rotation=np.eye(3) if rotation is None else rotation,
        translation=np.zeros(3) if translation is None else translation,
        image_width=width,
        image_height=height,
        view_id=view_id,
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q


def random_camera(rng: np.random.Generator, view_id: int = 0) -> CameraView:
    width, height = 704, 256
    focal = rng.uniform(300.0, 800.0)
    return CameraView(
        intrinsics=np.array(
            [
                [focal, 0.0, width / 2.0 + rng.uniform(-5.0, 5.0)],
                [0.0, focal * rng.uniform(0.95, 1.05), height / 2.0 + rng.uniform(-5.0, 5.0)],
                [0.0, 0.0, 1.0],
            ]
        ),
        rotation=random_rotation(rng),
        translation=rng.uniform(-3.0, 3.0, 3),
        image_width=width,
        image_height=height,
        view_id=view_id,
    )


@pytest.fixture
def cam() -> CameraView:
    return make_camera()
