"""Synthetic polyp phantom catalog and tactile frame renderer.

The catalog is a 4x4x3 grid: four Paris morphology classes, four geometric
variations per class, three materials of decreasing compliance. The renderer
stands in for a gel-layer tactile sensor pressed against a phantom:

* the contact footprint comes from the macro geometry and a Hertz-style
  indentation depth (material- and force-dependent),
* the appearance inside the footprint comes from the mold's micro-relief
  filtered by the material's gel response (soft materials smooth the relief
  and shade dimly, hard materials keep crisp high-frequency texture),
* three directional lights (pure R, G, B at azimuths 0/120/240, elevation
  30 degrees) shade the contact patch Lambertian-style.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# Physical safety bound for interaction force (N).
MAX_FORCE_N = 13.5

# Sensor plane size in mm; pixel pitch follows from the frame width.
SENSOR_WIDTH_MM = 24.0

DEFAULT_WIDTH = 320
DEFAULT_HEIGHT = 240

BACKGROUND_LEVEL = 8

# Normalized width of the plateau edge falloff and height of LST nodules.
EDGE_WIDTH = 0.18
NODULE_HEIGHT_MM = 0.3
PENETRATION_GAIN_SCALE_MM = 3.5


class ParisType(IntEnum):
    """Paris morphology classes, with stable codes used on the wire."""

    IP = 0    # pedunculated
    IIA = 1   # superficial elevated
    IIC = 2   # depressed
    LST = 3   # laterally spreading tumor


@dataclass(frozen=True)
class Material:
    name: str
    hardness_label: str
    # Indentation coefficient of the contact model delta = c * F^(2/3),
    # in mm * N^(-2/3). Softer material -> larger coefficient.
    compliance_coeff: float
    # Gel response: how strongly the contact smooths the mold's relief and
    # how brightly the patch shades. Texture gains pick which spatial band
    # of the micro-relief survives (low / mid / high frequency).
    gel_blur_mm: float
    shading_gain: float
    texture_gains: tuple[float, float, float]


M1 = Material("M1", "Shore 00 45-60", 3.71, 1.00, 0.40, (1.00, 0.05, 0.00))
M2 = Material("M2", "Shore A 30-40", 2.09, 0.45, 0.80, (0.15, 1.00, 0.20))
M3 = Material("M3", "Shore D 83-86", 0.93, 0.08, 1.20, (0.10, 0.20, 1.00))

MATERIALS = (M1, M2, M3)


@dataclass(frozen=True)
class PolypPhantom:
    paris_type: ParisType
    variation: int  # 1..4
    material: Material

    def key(self) -> tuple[int, int, str]:
        return (int(self.paris_type), self.variation, self.material.name)

    def label(self) -> str:
        return f"{self.paris_type.name}-v{self.variation}-{self.material.name}"


@dataclass(frozen=True)
class PhantomGeometry:
    base_radius_mm: float
    height_amplitude_mm: float
    nodule_count: int
    eccentricity: float
    texture_amplitude_mm: float
    rotation_rad: float
    crater_depth_mm: float  # depth below the rim for depressed lesions, else 0


@dataclass(frozen=True)
class TactileFrame:
    width: int
    height: int
    rgb: bytes  # row-major, 3 bytes per pixel
    timestamp_us: int
    force_mN: int

    def __post_init__(self):
        if len(self.rgb) != self.width * self.height * 3:
            raise ValueError("rgb length must equal width*height*3")
        if not 0 <= self.force_mN <= int(MAX_FORCE_N * 1000):
            raise ValueError(f"force_mN {self.force_mN} outside safe range")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.rgb, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )


def phantom_catalog() -> list[PolypPhantom]:
    """All 48 phantoms, type-major, then variation, then material."""
    return [
        PolypPhantom(ptype, var, mat)
        for ptype in ParisType
        for var in (1, 2, 3, 4)
        for mat in MATERIALS
    ]


def indentation_depth(force_N: float, material: Material) -> float:
    """Hertz-flavored indentation depth in mm: delta = c * F^(2/3)."""
    if force_N < 0:
        raise ValueError(f"force must be non-negative, got {force_N}")
    return material.compliance_coeff * force_N ** (2.0 / 3.0)


def _variation_hash(paris_type: ParisType, variation: int, n: int) -> np.ndarray:
    """n deterministic floats in [0, 1) keyed by (type, variation)."""
    out = np.empty(n)
    for i in range(n):
        digest = hashlib.sha256(
            f"tactopath-geom:{int(paris_type)}:{variation}:{i}".encode()
        ).digest()
        out[i] = int.from_bytes(digest[:8], "big") / 2**64
    return out


def phantom_geometry(paris_type: ParisType, variation: int) -> PhantomGeometry:
    """Deterministic geometry for one (type, variation) cell of the catalog.

    Height amplitudes deliberately exceed the deepest reachable indentation
    (3.2 mm at 0.8 N on M1) so the contact footprint stays on the lesion.
    """
    if not 1 <= variation <= 4:
        raise ValueError(f"variation must be 1..4, got {variation}")
    u = _variation_hash(paris_type, variation, 6)
    scale = 0.85 + 0.30 * u[0]
    rot = 2 * np.pi * u[1]
    if paris_type == ParisType.IP:
        return PhantomGeometry(
            base_radius_mm=2.2 * scale,
            height_amplitude_mm=4.4,  # tallest class
            nodule_count=0,
            eccentricity=0.05 + 0.15 * u[2],
            texture_amplitude_mm=0.5,
            rotation_rad=rot,
            crater_depth_mm=0.0,
        )
    if paris_type == ParisType.IIA:
        # radius range (3.9-5.3 mm) deliberately disjoint from LST's
        # (5.6-7.6 mm) so apparent size separates the two flat classes
        return PhantomGeometry(
            base_radius_mm=4.6 * scale,
            height_amplitude_mm=3.9,
            nodule_count=0,
            eccentricity=0.10 + 0.35 * u[2],
            texture_amplitude_mm=0.5,
            rotation_rad=rot,
            crater_depth_mm=0.0,
        )
    if paris_type == ParisType.IIC:
        # Rim at the plateau height; crater bottom drops below the base
        # plane and below any reachable contact level.
        return PhantomGeometry(
            base_radius_mm=5.0 * scale,
            height_amplitude_mm=3.8,
            nodule_count=0,
            eccentricity=0.10 + 0.30 * u[2],
            texture_amplitude_mm=0.5,
            rotation_rad=rot,
            crater_depth_mm=4.2,
        )
    # LST: broad plateau carrying a ring of nodules.
    return PhantomGeometry(
        base_radius_mm=6.6 * scale,
        height_amplitude_mm=4.0,
        nodule_count=3 + int(u[3] * 3),  # 3..5
        eccentricity=0.10 + 0.30 * u[2],
        texture_amplitude_mm=0.5,
        rotation_rad=rot,
        crater_depth_mm=0.0,
    )


def _smoothstep(u: np.ndarray) -> np.ndarray:
    return u * u * (3.0 - 2.0 * u)


def _macro_height(phantom: PolypPhantom, width: int, height: int):
    """Macro height map (mm, no micro-relief) plus lesion support mask and
    the rotated coordinate grids."""
    geom = phantom_geometry(phantom.paris_type, phantom.variation)
    pitch = SENSOR_WIDTH_MM / width
    xs = (np.arange(width) - (width - 1) / 2.0) * pitch
    ys = (np.arange(height) - (height - 1) / 2.0) * pitch
    x, y = np.meshgrid(xs, ys)

    c, s = np.cos(geom.rotation_rad), np.sin(geom.rotation_rad)
    xr = c * x + s * y
    yr = -s * x + c * y
    a = geom.base_radius_mm
    b = a * (1.0 - 0.5 * geom.eccentricity)
    r = np.sqrt((xr / a) ** 2 + (yr / b) ** 2)

    # flat-top plateau with a smoothstep edge
    hm = geom.height_amplitude_mm * _smoothstep(np.clip((1.0 - r) / EDGE_WIDTH, 0.0, 1.0))

    if geom.crater_depth_mm > 0:
        # steep crater wall: the contact annulus then changes only slightly
        # with indentation depth, so a material's frames stay tightly
        # clustered across the force sweep
        hm = hm - geom.crater_depth_mm * np.exp(-((r / 0.45) ** 8))

    if geom.nodule_count > 0:
        u = _variation_hash(phantom.paris_type, phantom.variation,
                            6 + 2 * geom.nodule_count)
        bumps = np.zeros_like(hm)
        for k in range(geom.nodule_count):
            ang = 2 * np.pi * (k + 0.4 * u[6 + 2 * k]) / geom.nodule_count
            rad = 0.55 * (0.9 + 0.2 * u[7 + 2 * k])
            nx, ny = rad * a * np.cos(ang), rad * b * np.sin(ang)
            d2 = (xr - nx) ** 2 + (yr - ny) ** 2
            # max, not sum: overlapping nodules must not stack above the
            # nominal nodule height or they would steal the contact level
            bumps = np.maximum(bumps, np.exp(-d2 / (2 * (0.11 * a) ** 2)))
        hm = hm + NODULE_HEIGHT_MM * bumps

    return hm, (r < 1.0), xr, yr, geom


def _micro_relief(phantom: PolypPhantom, xr, yr, support, geom) -> np.ndarray:
    """Mold micro-relief in three spatial bands, weighted by the material's
    gel response (texture_gains)."""
    u = _variation_hash(phantom.paris_type, phantom.variation, 6)
    ph1, ph2 = 2 * np.pi * u[4], 2 * np.pi * u[5]
    lo = 0.5 * (np.sin(2 * np.pi * 0.25 * xr + ph1) + np.sin(2 * np.pi * 0.22 * yr + ph2))
    mid = 0.5 * (np.sin(2 * np.pi * 0.60 * xr + ph2) + np.sin(2 * np.pi * 0.55 * yr + ph1))
    hi = 0.5 * (np.sin(2 * np.pi * 1.30 * xr + ph2) + np.sin(2 * np.pi * 1.15 * yr + ph1))
    g = phantom.material.texture_gains
    tex = geom.texture_amplitude_mm * (g[0] * lo + g[1] * mid + g[2] * hi)
    return np.where(support, tex, 0.0)


def _separable_blur(field: np.ndarray, sigma_px: float) -> np.ndarray:
    if sigma_px < 0.3:
        return field
    radius = int(np.ceil(3.0 * sigma_px))
    xs = np.arange(-radius, radius + 1)
    kernel = np.exp(-(xs**2) / (2.0 * sigma_px**2))
    kernel /= kernel.sum()
    padded = np.pad(field, ((0, 0), (radius, radius)), mode="edge")
    field = np.apply_along_axis(lambda row: np.convolve(row, kernel, "valid"), 1, padded)
    padded = np.pad(field, ((radius, radius), (0, 0)), mode="edge")
    return np.apply_along_axis(lambda col: np.convolve(col, kernel, "valid"), 0, padded)


# Light directions: azimuths 0/120/240 degrees, elevation 30 degrees,
# pure R, G, B respectively.
_ELEV = np.deg2rad(30.0)
_LIGHTS = np.array(
    [
        [np.cos(_ELEV) * np.cos(az), np.cos(_ELEV) * np.sin(az), np.sin(_ELEV)]
        for az in np.deg2rad([0.0, 120.0, 240.0])
    ]
)


@dataclass(frozen=True)
class RenderResult:
    frame: TactileFrame
    contact_mask: np.ndarray  # bool, (height, width)
    height_map_mm: np.ndarray


def render(
    phantom: PolypPhantom,
    force_N: float,
    seed: int,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    timestamp_us: int = 0,
) -> RenderResult:
    """Render one tactile frame; deterministic for identical inputs."""
    if not 0.0 <= force_N <= MAX_FORCE_N:
        raise ValueError(f"force {force_N} N outside [0, {MAX_FORCE_N}]")
    hm, support, xr, yr, geom = _macro_height(phantom, width, height)
    delta = indentation_depth(force_N, phantom.material)
    level = hm.max() - delta
    contact = hm > level
    penetration = np.clip(hm - level, 0.0, None)

    img = np.full((height, width, 3), float(BACKGROUND_LEVEL))
    if contact.any():
        pitch = SENSOR_WIDTH_MM / width
        relief = hm + _micro_relief(phantom, xr, yr, support, geom)
        relief = _separable_blur(relief, phantom.material.gel_blur_mm / pitch)
        hy, hx = np.gradient(relief, pitch)
        norm = np.sqrt(hx**2 + hy**2 + 1.0)
        n = np.stack([-hx / norm, -hy / norm, 1.0 / norm], axis=-1)
        lambert = np.clip(np.einsum("hwc,lc->hwl", n, _LIGHTS), 0.0, 1.0)
        depth_gain = 0.85 + 0.15 * np.clip(penetration / PENETRATION_GAIN_SCALE_MM, 0.0, 1.0)
        shade = lambert * depth_gain[..., None] * contact[..., None]
        shade = np.clip(shade * phantom.material.shading_gain, 0.0, 1.0)
        img = img + (255.0 - BACKGROUND_LEVEL) * shade
        rng = np.random.Generator(np.random.PCG64(seed))
        noise = rng.normal(0.0, 2.0, size=img.shape)
        img = img + noise * contact[..., None]

    rgb = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    frame = TactileFrame(
        width=width,
        height=height,
        rgb=rgb.tobytes(),
        timestamp_us=timestamp_us,
        force_mN=int(round(force_N * 1000)),
    )
    return RenderResult(frame=frame, contact_mask=contact, height_map_mm=hm)


def render_tactile_frame(
    phantom: PolypPhantom,
    force_N: float,
    seed: int,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    timestamp_us: int = 0,
) -> TactileFrame:
    return render(phantom, force_N, seed, width, height, timestamp_us).frame
