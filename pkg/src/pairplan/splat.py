"""Small CPU rasterizer for 3D Gaussian primitives, used to make fixtures.

Conventions: cameras follow the OpenCV frame (x right, y down, z forward).
``PinholeCamera.orientation`` rotates camera axes into world axes, so a world
point X maps to camera coordinates ``R.T @ (X - position)``. Pixel ``(u, v)``
has its centre at integer coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEAR_Z = 1e-4
CUTOFF_SIGMA = 3.0


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion given as (w, x, y, z)."""
    w, x, y, z = (float(v) for v in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return q / np.linalg.norm(q)


def quat_multiply(a, b) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def _unit_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    norm = np.linalg.norm(q)
    if norm == 0:
        raise ValueError("zero quaternion")
    return q / norm


def covariance_from_scale_rotation(scale, rotation) -> np.ndarray:
    scale = np.asarray(scale, dtype=np.float64)
    if scale.shape != (3,) or np.any(scale <= 0):
        raise ValueError(f"scale must be three positive values, got {scale}")
    R = quat_to_matrix(_unit_quat(rotation))
    M = R * scale  # R @ diag(s)
    cov = M @ M.T
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class GaussianPrimitive:
    mu: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    opacity: float = 1.0
    color: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64).reshape(3))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64).reshape(3))
        object.__setattr__(self, "rotation", _unit_quat(self.rotation))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64).reshape(3))
        if np.any(self.scale <= 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValueError(f"opacity must lie in [0, 1], got {self.opacity}")

    @property
    def covariance(self) -> np.ndarray:
        return covariance_from_scale_rotation(self.scale, self.rotation)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "scale": self.scale.tolist(),
            "rotation": self.rotation.tolist(),
            "opacity": float(self.opacity),
            "color": self.color.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianPrimitive":
        return cls(d["mu"], d["scale"], d["rotation"], d["opacity"], d["color"])


@dataclass(frozen=True)
class PinholeCamera:
    position: np.ndarray
    orientation: np.ndarray
    focal: tuple[float, float]
    principal: tuple[float, float]
    resolution: tuple[int, int]  # (W, H)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(3))
        object.__setattr__(self, "orientation", _unit_quat(self.orientation))
        object.__setattr__(self, "focal", tuple(float(f) for f in self.focal))
        object.__setattr__(self, "principal", tuple(float(c) for c in self.principal))
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        if min(self.focal) <= 0:
            raise ValueError(f"focal lengths must be positive, got {self.focal}")
        if min(self.resolution) < 1:
            raise ValueError(f"camera resolution must be at least 1x1, got {self.resolution}")

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def world_to_camera(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.position) @ self.rotation

    def to_dict(self) -> dict:
        return {
            "position": self.position.tolist(),
            "orientation": self.orientation.tolist(),
            "focal": list(self.focal),
            "principal": list(self.principal),
            "resolution": list(self.resolution),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PinholeCamera":
        return cls(d["position"], d["orientation"], d["focal"], d["principal"], d["resolution"])

    @classmethod
    def look_at(cls, position, target, up, focal, resolution) -> "PinholeCamera":
        position = np.asarray(position, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - position
        z /= np.linalg.norm(z)
        x = np.cross(-np.asarray(up, dtype=np.float64), z)
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.stack([x, y, z], axis=1)
        W, H = resolution
        return cls(position, matrix_to_quat(R), (focal, focal), ((W - 1) / 2, (H - 1) / 2), resolution)


@dataclass(frozen=True)
class RenderedFrame:
    color: np.ndarray  # (H, W, 3)
    depth: np.ndarray  # (H, W)
    alpha: np.ndarray  # (H, W)


def gaussian_density(point, primitive: GaussianPrimitive) -> float:
    diff = np.asarray(point, dtype=np.float64) - primitive.mu
    q = float(diff @ np.linalg.solve(primitive.covariance, diff))
    return float(np.exp(-0.5 * q))


def _sort_key(p: GaussianPrimitive, z: float) -> tuple:
    # tie-break on the primitive's own values so input order never matters
    return (z, *p.mu, *p.scale, *p.rotation, p.opacity, *p.color)


def render(scene, camera: PinholeCamera, background=(0.0, 0.0, 0.0)) -> RenderedFrame:
    """Front-to-back alpha compositing of projected Gaussians.

    Each primitive is projected with the local affine (EWA) approximation
    and contributes ``opacity * exp(-q/2)`` inside its 3-sigma ellipse,
    zero outside.
    """
    W, H = camera.resolution
    if W < 1 or H < 1:
        raise ValueError(f"camera resolution must be at least 1x1, got {camera.resolution}")
    background = np.asarray(background, dtype=np.float64).reshape(3)
    fx, fy = camera.focal
    cx, cy = camera.principal
    R = camera.rotation

    projected = []
    for prim in scene:
        t = camera.world_to_camera(prim.mu)
        if t[2] < NEAR_Z:
            continue
        J = np.array(
            [
                [fx / t[2], 0.0, -fx * t[0] / t[2] ** 2],
                [0.0, fy / t[2], -fy * t[1] / t[2] ** 2],
            ]
        )
        T = J @ R.T
        cov2d = T @ prim.covariance @ T.T
        cov2d = 0.5 * (cov2d + cov2d.T)
        det = cov2d[0, 0] * cov2d[1, 1] - cov2d[0, 1] ** 2
        if det <= 0:
            continue
        center = np.array([fx * t[0] / t[2] + cx, fy * t[1] / t[2] + cy])
        rx = CUTOFF_SIGMA * np.sqrt(cov2d[0, 0])
        ry = CUTOFF_SIGMA * np.sqrt(cov2d[1, 1])
        u0, u1 = int(np.ceil(center[0] - rx)), int(np.floor(center[0] + rx))
        v0, v1 = int(np.ceil(center[1] - ry)), int(np.floor(center[1] + ry))
        u0, v0 = max(u0, 0), max(v0, 0)
        u1, v1 = min(u1, W - 1), min(v1, H - 1)
        if u0 > u1 or v0 > v1:
            continue
        projected.append((_sort_key(prim, float(t[2])), prim, float(t[2]), center, cov2d, (u0, u1, v0, v1)))

    projected.sort(key=lambda item: item[0])

    color = np.zeros((H, W, 3))
    depth = np.zeros((H, W))
    trans = np.ones((H, W))
    for _, prim, z, center, cov2d, (u0, u1, v0, v1) in projected:
        inv = np.linalg.inv(cov2d)
        du = np.arange(u0, u1 + 1) - center[0]
        dv = np.arange(v0, v1 + 1)[:, None] - center[1]
        q = inv[0, 0] * du * du + 2 * inv[0, 1] * du * dv + inv[1, 1] * dv * dv
        a = np.where(q <= CUTOFF_SIGMA**2, prim.opacity * np.exp(-0.5 * q), 0.0)
        tw = trans[v0 : v1 + 1, u0 : u1 + 1]
        weight = a * tw
        color[v0 : v1 + 1, u0 : u1 + 1] += weight[..., None] * prim.color
        depth[v0 : v1 + 1, u0 : u1 + 1] += weight * z
        trans[v0 : v1 + 1, u0 : u1 + 1] = tw * (1.0 - a)

    color += trans[..., None] * background
    return RenderedFrame(color, depth, 1.0 - trans)


PRESETS = {
    # name: (cameras, blobs)
    "arch": (12, 40),
    "triad": (3, 40),
}


def make_fixture_scene(preset: str = "arch", seed: int = 0, n_cameras: int | None = None, resolution=(64, 48)):
    """Deterministic dental-arch-like scene and a sweep of cameras.

    Blobs sit on a horseshoe in the x-z plane; cameras move on a wider arc
    around it from one side to the other and are returned in sweep order.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; available presets: {', '.join(sorted(PRESETS))}")
    default_cams, n_blobs = PRESETS[preset]
    n_cameras = n_cameras or default_cams
    rng = np.random.default_rng(seed)

    scene = []
    angles = np.linspace(-0.85 * np.pi, -0.15 * np.pi, n_blobs)
    for ang in angles:
        radial = 1.0 + rng.normal(scale=0.04)
        mu = np.array([1.2 * radial * np.cos(ang), rng.normal(scale=0.05), -radial * np.sin(ang)])
        scale = rng.uniform(0.06, 0.16, size=3)
        rotation = rng.normal(size=4)
        shade = rng.uniform(0.75, 1.0)
        color = np.clip(np.array([shade, shade * 0.95, shade * 0.85]) + rng.normal(scale=0.03, size=3), 0, 1)
        scene.append(GaussianPrimitive(mu, scale, rotation, float(rng.uniform(0.6, 0.95)), color))
    # gingiva band under the teeth
    for ang in np.linspace(-0.85 * np.pi, -0.15 * np.pi, n_blobs // 2):
        mu = np.array([1.2 * np.cos(ang), 0.22, -np.sin(ang)])
        scene.append(
            GaussianPrimitive(mu, rng.uniform(0.1, 0.2, size=3), rng.normal(size=4), 0.8, (0.85, 0.45, 0.45))
        )

    target = np.array([0.0, 0.05, 0.6])
    cams = []
    sweep = np.linspace(-0.95 * np.pi, -0.05 * np.pi, n_cameras) if n_cameras > 1 else [-0.5 * np.pi]
    focal = 0.9 * resolution[0]
    for ang in sweep:
        pos = np.array([3.0 * np.cos(ang), -0.4, 0.6 - 2.6 * np.sin(ang)])
        cams.append(PinholeCamera.look_at(pos, target, (0.0, -1.0, 0.0), focal, resolution))
    return scene, cams
