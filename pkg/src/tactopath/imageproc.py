"""Image preprocessing and augmentation for recorded tactile frames.

All operations work on 8-bit row-major images and are pure functions; the
augmentation step is fully deterministic given its seed so datasets can be
regenerated byte-identically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ImageU8:
    width: int
    height: int
    channels: int  # 1 or 3
    data: bytes  # row-major

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if len(self.data) != self.width * self.height * self.channels:
            raise ValueError("data length must equal w*h*c")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.data, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageU8":
        if arr.ndim == 2:
            arr = arr[..., None]
        if arr.dtype != np.uint8:
            raise ValueError("array must be uint8")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr.tobytes())


def _round_u8(x: np.ndarray) -> np.ndarray:
    # round half-up, then clamp to 8 bits
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def crop_roi(img: ImageU8, x: int, y: int, w: int, h: int) -> ImageU8:
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > img.width or y + h > img.height:
        raise ValueError(f"crop rect ({x},{y},{w},{h}) outside image bounds")
    return ImageU8.from_array(img.as_array()[y : y + h, x : x + w].copy())


def _bilinear_sample(arr: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample float image arr (h, w, c) at source coords, clamped to edges."""
    h, w = arr.shape[:2]
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    top = arr[y0, x0] * (1 - fx) + arr[y0, x1] * fx
    bot = arr[y1, x0] * (1 - fx) + arr[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: ImageU8, out_w: int = 224, out_h: int = 224) -> ImageU8:
    if out_w < 1 or out_h < 1:
        raise ValueError("output dims must be >= 1")
    if out_w == img.width and out_h == img.height:
        return img
    arr = img.as_array().astype(np.float64)
    sx_scale = img.width / out_w
    sy_scale = img.height / out_h
    # pixel-center alignment: src = (dst + 0.5) * scale - 0.5
    xs = (np.arange(out_w) + 0.5) * sx_scale - 0.5
    ys = (np.arange(out_h) + 0.5) * sy_scale - 0.5
    sx, sy = np.meshgrid(xs, ys)
    return ImageU8.from_array(_round_u8(_bilinear_sample(arr, sx, sy)))


def hflip(img: ImageU8) -> ImageU8:
    return ImageU8.from_array(img.as_array()[:, ::-1].copy())


def rotate(img: ImageU8, angle_deg: float) -> ImageU8:
    """Rotate about the image center, bilinear resample, black fill."""
    if not -90.0 <= angle_deg <= 90.0:
        raise ValueError(f"angle {angle_deg} outside [-90, 90]")
    arr = img.as_array().astype(np.float64)
    h, w = arr.shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    xs, ys = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    # inverse map: rotate destination coords by -theta around the center
    dx, dy = xs - cx, ys - cy
    sx = c * dx + s * dy + cx
    sy = -s * dx + c * dy + cy
    inside = (sx >= -0.5) & (sx <= w - 0.5) & (sy >= -0.5) & (sy <= h - 0.5)
    out = _bilinear_sample(arr, sx, sy)
    out = out * inside[..., None]
    return ImageU8.from_array(_round_u8(out))


def gaussian_blur(img: ImageU8, sigma: float) -> ImageU8:
    """Separable Gaussian, radius ceil(3*sigma), clamp-to-edge borders."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(xs**2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    arr = img.as_array().astype(np.float64)
    padded = np.pad(arr, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    arr = np.apply_along_axis(
        lambda r: np.convolve(r, kernel, mode="valid"), 1, padded
    )
    padded = np.pad(arr, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    arr = np.apply_along_axis(
        lambda col: np.convolve(col, kernel, mode="valid"), 0, padded
    )
    return ImageU8.from_array(_round_u8(arr))


def to_grayscale(img: ImageU8) -> ImageU8:
    if img.channels != 3:
        raise ValueError("to_grayscale expects a 3-channel image")
    arr = img.as_array().astype(np.float64)
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return ImageU8.from_array(_round_u8(y))


# ---------------------------------------------------------------------------
# dataset manifest

MANIFEST_HEADER = ["path", "paris_type", "variation", "material", "force_n", "split", "aug_tag"]


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    paris_type: str  # class name: Ip, IIa, IIc, LST spelled as IP/IIA/IIC/LST
    variation: int
    material: str  # M1 / M2 / M3
    force_n: float
    split: str = "train"
    aug_tag: str = "orig"


def write_manifest(entries: list[ManifestEntry], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for e in entries:
            writer.writerow(
                [e.path, e.paris_type, e.variation, e.material,
                 f"{e.force_n:g}", e.split, e.aug_tag]
            )


def read_manifest(path: Path) -> list[ManifestEntry]:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entries.append(
                ManifestEntry(
                    path=row["path"],
                    paris_type=row["paris_type"],
                    variation=int(row["variation"]),
                    material=row["material"],
                    force_n=float(row["force_n"]),
                    split=row["split"],
                    aug_tag=row["aug_tag"],
                )
            )
    return entries


def write_sidecar(path: Path, width: int, height: int, channels: int,
                  image_format: str = "png") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"width": width, "height": height, "channels": channels,
             "format": image_format},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")


def load_image(path: Path, sidecar: dict | None = None) -> ImageU8:
    path = Path(path)
    if path.suffix == ".png":
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB") if im.mode not in ("L", "RGB") else im)
        return ImageU8.from_array(np.ascontiguousarray(arr, dtype=np.uint8))
    if sidecar is None:
        raise ValueError("raw images need a sidecar with dimensions")
    w, h, c = sidecar["width"], sidecar["height"], sidecar["channels"]
    return ImageU8(width=w, height=h, channels=c, data=path.read_bytes())


def save_image(img: ImageU8, path: Path) -> None:
    path = Path(path)
    if path.suffix == ".png":
        from PIL import Image

        arr = img.as_array()
        Image.fromarray(arr[..., 0] if img.channels == 1 else arr).save(path)
    else:
        path.write_bytes(img.data)


# ---------------------------------------------------------------------------
# augmentation

@dataclass(frozen=True)
class AugmentationPlan:
    factor: int = 6
    rotation_range_deg: tuple[float, float] = (-90.0, 90.0)
    # "blur factor" drawn uniformly from this range is treated as a Gaussian
    # kernel size in pixels; the applied standard deviation is factor / 6
    # (a 32-64 px *standard deviation* would wipe out the lesion entirely)
    blur_factor_range: tuple[float, float] = (32.0, 64.0)
    seed: int = 0

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError("factor must be >= 1")


_FAMILIES = ("hflip", "rotate", "hflip_rotate", "blur")


def _apply_family(img: ImageU8, family: str, rng: np.random.Generator,
                  plan: AugmentationPlan) -> tuple[ImageU8, str]:
    if family == "hflip":
        return hflip(img), "hflip"
    if family == "rotate":
        ang = rng.uniform(*plan.rotation_range_deg)
        return rotate(img, ang), f"rot:{ang:.4f}"
    if family == "hflip_rotate":
        ang = rng.uniform(*plan.rotation_range_deg)
        return rotate(hflip(img), ang), f"hflip+rot:{ang:.4f}"
    factor = rng.uniform(*plan.blur_factor_range)
    return gaussian_blur(img, factor / 6.0), f"blur:{factor:.4f}"


def augment_dataset(
    entries: list[ManifestEntry],
    plan: AugmentationPlan,
    root: Path,
    out_dir: Path,
    sidecar: dict | None = None,
) -> list[ManifestEntry]:
    """Expand each source entry to plan.factor entries (original + factor-1 new).

    New images are written under out_dir; labels are copied verbatim and the
    aug_tag records the exact transform. Deterministic given plan.seed.
    """
    root = Path(root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(plan.seed))
    result: list[ManifestEntry] = []
    for idx, entry in enumerate(entries):
        result.append(replace(entry, aug_tag="orig"))
        img = load_image(root / entry.path, sidecar)
        for j in range(plan.factor - 1):
            family = _FAMILIES[rng.integers(len(_FAMILIES))]
            aug, tag = _apply_family(img, family, rng, plan)
            name = f"aug_{idx:05d}_{j}.png"
            save_image(aug, out_dir / name)
            rel = str((out_dir / name).relative_to(root)) if out_dir.is_relative_to(root) else str(out_dir / name)
            result.append(replace(entry, path=rel, aug_tag=tag))
    return result
