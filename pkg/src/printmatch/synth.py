"""Synthetic stand-in corpus: procedural design files and distorted product photos.

Every generated artifact is a pure function of its parameters and seed, so
corpora are reproducible byte-for-byte and photo renders can run in
parallel. The distortion pipeline order is fixed:
warp -> illumination gradient -> occluders -> blur -> noise.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .imageio import save_png, write_pgm
from .model import (
    DatasetManifest,
    DesignEntry,
    PhotoEntry,
    ProductEntry,
    load_manifest,
    save_manifest,
)


@dataclass(frozen=True)
class Homography:
    """3x3 projective transform, normalized so m[2, 2] == 1."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography matrix must be 3x3")
        if m[2, 2] == 0 or abs(np.linalg.det(m)) < 1e-12:
            raise ValueError("singular homography")
        object.__setattr__(self, "m", m / m[2, 2])

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Homography":
        m = np.eye(3)
        m[0, 2] = dx
        m[1, 2] = dy
        return cls(m)

    @classmethod
    def from_points(cls, src: np.ndarray, dst: np.ndarray) -> "Homography":
        """Solve the 8-dof direct linear transform from 4 point pairs."""
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        if src.shape != (4, 2) or dst.shape != (4, 2):
            raise ValueError("need exactly 4 source and 4 destination points")
        a = np.zeros((8, 8))
        b = np.zeros(8)
        for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
            a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
            a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
            b[2 * i] = u
            b[2 * i + 1] = v
        try:
            h = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as e:
            raise ValueError(f"degenerate point correspondence: {e}") from e
        return cls(np.append(h, 1.0).reshape(3, 3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map (n, 2) points through the homography."""
        pts = np.asarray(pts, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        q = np.hstack([pts, ones]) @ self.m.T
        return q[:, :2] / q[:, 2:3]


@dataclass(frozen=True)
class DesignSpec:
    """Parameters for one procedural design raster."""

    width: int = 448
    height: int = 448
    palette_seed: int = 0
    min_elements: int = 14
    max_elements: int = 22

    def __post_init__(self):
        if self.width < 128 or self.height < 128:
            raise ValueError("design dimensions must be >= 128")
        if self.min_elements < 3 or self.max_elements < self.min_elements:
            raise ValueError("element count range must be >= 3 and ordered")


@dataclass(frozen=True)
class DistortionParams:
    """Photo-formation distortions applied to a warped design."""

    perspective_jitter: float = 0.0  # corner jitter, fraction of min output dim
    rotation_deg: float = 0.0  # max |rotation|
    scale_jitter: float = 0.0  # scale drawn from [1 - scale_jitter, 1]
    illumination: float = 0.0  # gradient strength in [0, 1]
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0  # additive gaussian, 8-bit levels
    occluder_count: int = 0
    occluder_max_area: float = 0.10  # per-occluder area fraction, < 0.5
    background_seed: int = 0
    background_clutter: float = 0.0  # shape density in [0, 1]
    margin: float = 0.10  # background margin, fraction of output dim

    def __post_init__(self):
        if min(self.perspective_jitter, self.rotation_deg, self.scale_jitter,
               self.illumination, self.blur_sigma, self.noise_sigma) < 0:
            raise ValueError("distortion strengths must be >= 0")
        if not 0 <= self.occluder_max_area < 0.5:
            raise ValueError("occluder area fraction must be in [0, 0.5)")


PRESETS: dict[str, DistortionParams] = {
    "mild": DistortionParams(
        perspective_jitter=0.02, rotation_deg=5.0, scale_jitter=0.02,
        illumination=0.12, blur_sigma=0.3, noise_sigma=4.0,
        occluder_count=0, background_clutter=0.05, margin=0.0625,
    ),
    "strong": DistortionParams(
        perspective_jitter=0.08, rotation_deg=20.0, scale_jitter=0.15,
        illumination=0.5, blur_sigma=1.2, noise_sigma=12.0,
        occluder_count=2, occluder_max_area=0.10,
        background_clutter=0.9, margin=0.16,
    ),
}


def _palette(seed: int, n: int = 8) -> np.ndarray:
    """Deterministic saturated color palette, (n, 3) uint8."""
    rng = np.random.default_rng(seed)
    hues = rng.random(n)
    sats = rng.uniform(0.55, 1.0, n)
    vals = rng.uniform(0.45, 1.0, n)
    hsv = np.stack([hues * 179, sats * 255, vals * 255], axis=1).astype(np.uint8)
    rgb = cv2.cvtColor(hsv[None, :, :], cv2.COLOR_HSV2RGB)[0]
    return rgb


def _color(rng: np.random.Generator, palette: np.ndarray) -> tuple[int, int, int]:
    c = palette[rng.integers(0, len(palette))]
    return int(c[0]), int(c[1]), int(c[2])


def gen_design(spec: DesignSpec, seed: int) -> np.ndarray:
    """Render one design file, (h, w, 3) uint8, deterministic per (spec, seed)."""
    rng = np.random.default_rng(seed)
    palette = _palette(spec.palette_seed)
    w, h = spec.width, spec.height

    # Background: linear blend between two palette colors along a random axis.
    c0 = np.array(_color(rng, palette), dtype=np.float64)
    c1 = np.array(_color(rng, palette), dtype=np.float64)
    phi = rng.uniform(0, 2 * np.pi)
    xx, yy = np.meshgrid(np.arange(w), np.arange(h))
    t = xx * np.cos(phi) + yy * np.sin(phi)
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    img = (c0[None, None] * (1 - t[..., None]) + c1[None, None] * t[..., None]).astype(np.uint8)
    img = np.ascontiguousarray(img)

    n_elements = int(rng.integers(spec.min_elements, spec.max_elements + 1))
    # Every design carries a code-block patch and an illustration patch:
    # their random content is what makes local texture unique per design,
    # the way text, logos and photos do on real printed products.
    kinds = [6, 7] + list(rng.integers(0, 8, max(n_elements - 2, 1)))
    for kind in kinds:
        color = _color(rng, palette)
        if kind == 0:  # rotated filled rectangle
            cx, cy = rng.uniform(0.1, 0.9) * w, rng.uniform(0.1, 0.9) * h
            rw, rh = rng.uniform(0.08, 0.35) * w, rng.uniform(0.06, 0.25) * h
            ang = rng.uniform(0, 180)
            box = cv2.boxPoints(((cx, cy), (rw, rh), ang)).astype(np.int32)
            cv2.fillPoly(img, [box], color)
        elif kind == 1:  # filled ellipse
            cx, cy = int(rng.uniform(0.1, 0.9) * w), int(rng.uniform(0.1, 0.9) * h)
            ax, ay = int(rng.uniform(0.04, 0.2) * w), int(rng.uniform(0.04, 0.2) * h)
            cv2.ellipse(img, (cx, cy), (max(ax, 2), max(ay, 2)), rng.uniform(0, 180),
                        0, 360, color, -1)
        elif kind == 2:  # stripe group
            x0, y0 = int(rng.uniform(0, 0.8) * w), int(rng.uniform(0, 0.8) * h)
            length = int(rng.uniform(0.15, 0.5) * w)
            gap = int(rng.uniform(6, 14))
            thick = int(rng.uniform(2, 5))
            for k in range(int(rng.integers(3, 7))):
                cv2.line(img, (x0, y0 + k * gap), (x0 + length, y0 + k * gap), color, thick)
        elif kind == 3:  # text-like bar rows
            x0, y0 = int(rng.uniform(0.05, 0.6) * w), int(rng.uniform(0.05, 0.85) * h)
            bar_h = int(rng.uniform(6, 12))
            for row in range(int(rng.integers(2, 5))):
                x = x0
                y = y0 + row * (bar_h + 4)
                while x < min(x0 + 0.45 * w, w - 8):
                    bw = int(rng.uniform(8, 30))
                    cv2.rectangle(img, (x, y), (min(x + bw, w - 1), y + bar_h), color, -1)
                    x += bw + int(rng.uniform(4, 9))
        elif kind == 4:  # ring
            cx, cy = int(rng.uniform(0.15, 0.85) * w), int(rng.uniform(0.15, 0.85) * h)
            r = int(rng.uniform(0.05, 0.18) * min(w, h))
            cv2.circle(img, (cx, cy), max(r, 3), color, int(rng.uniform(2, 6)))
        elif kind == 5:  # dot grid
            x0, y0 = int(rng.uniform(0.05, 0.7) * w), int(rng.uniform(0.05, 0.7) * h)
            step = int(rng.uniform(12, 24))
            r = max(int(step * 0.25), 2)
            for gy in range(int(rng.integers(2, 5))):
                for gx in range(int(rng.integers(3, 7))):
                    cv2.circle(img, (x0 + gx * step, y0 + gy * step), r, color, -1)
        elif kind == 6:  # code block: random binary grid, unique fine texture
            n_cells = int(rng.integers(10, 17))
            cell = int(rng.uniform(0.012, 0.02) * min(w, h)) + 3
            side = n_cells * cell
            x0 = int(rng.uniform(0.02, max(0.03, 1 - side / w - 0.02)) * w)
            y0 = int(rng.uniform(0.02, max(0.03, 1 - side / h - 0.02)) * h)
            grid = rng.random((n_cells, n_cells)) < 0.45
            dark = tuple(int(v) for v in rng.integers(0, 60, 3))
            light = tuple(int(v) for v in rng.integers(200, 256, 3))
            cv2.rectangle(img, (x0, y0), (min(x0 + side, w - 1), min(y0 + side, h - 1)), light, -1)
            for gy in range(n_cells):
                for gx in range(n_cells):
                    if grid[gy, gx]:
                        px, py = x0 + gx * cell, y0 + gy * cell
                        cv2.rectangle(img, (px, py),
                                      (min(px + cell - 1, w - 1), min(py + cell - 1, h - 1)),
                                      dark, -1)
        else:  # illustration patch: smooth random field, photo-like gradients
            pw = int(rng.uniform(0.25, 0.45) * w)
            ph = int(rng.uniform(0.25, 0.45) * h)
            x0 = int(rng.uniform(0.02, 0.96 - pw / w) * w)
            y0 = int(rng.uniform(0.02, 0.96 - ph / h) * h)
            coarse = rng.uniform(0, 255, size=(7, 7, 3)).astype(np.float32)
            patch = cv2.resize(coarse, (pw, ph), interpolation=cv2.INTER_CUBIC)
            img[y0 : y0 + ph, x0 : x0 + pw] = np.clip(patch, 0, 255).astype(np.uint8)
            cv2.rectangle(img, (x0, y0), (x0 + pw - 1, y0 + ph - 1), _color(rng, palette), 2)

    # Border frame, as on most printed products.
    frame = _color(rng, palette)
    inset = int(0.02 * min(w, h)) + 1
    cv2.rectangle(img, (inset, inset), (w - 1 - inset, h - 1 - inset), frame, 2)
    return img


def _inverse_map(h: Homography, src_size: tuple[int, int], out_size: tuple[int, int]):
    """Inverse-map output pixel centers into source coordinates.

    Returns (sx, sy, valid): source sample coordinates per output pixel and
    a bool mask of pixels whose preimage lies inside the source rectangle
    [-0.5, w-0.5] x [-0.5, h-0.5] (the full pixel extent).
    """
    sw, sh = src_size
    ow, oh = out_size
    inv = h.inverse().m
    xx, yy = np.meshgrid(np.arange(ow, dtype=np.float64), np.arange(oh, dtype=np.float64))
    den = inv[2, 0] * xx + inv[2, 1] * yy + inv[2, 2]
    safe = np.abs(den) > 1e-12
    den = np.where(safe, den, 1.0)
    sx = (inv[0, 0] * xx + inv[0, 1] * yy + inv[0, 2]) / den
    sy = (inv[1, 0] * xx + inv[1, 1] * yy + inv[1, 2]) / den
    valid = safe & (sx >= -0.5) & (sx <= sw - 0.5) & (sy >= -0.5) & (sy <= sh - 0.5)
    return sx, sy, valid


def apply_homography(
    img: np.ndarray,
    h: Homography,
    out_size: tuple[int, int],
    fill: np.ndarray | float = 0,
) -> np.ndarray:
    """Warp by inverse mapping with bilinear sampling.

    Output pixels whose preimage falls outside the source image take values
    from ``fill`` (a scalar or an image of the output shape).
    """
    img = np.asarray(img)
    sh, sw = img.shape[:2]
    ow, oh = out_size
    sx, sy, valid = _inverse_map(h, (sw, sh), out_size)
    cx = np.clip(sx, 0.0, sw - 1.0)
    cy = np.clip(sy, 0.0, sh - 1.0)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    fx = cx - x0
    fy = cy - y0

    src = img.astype(np.float64)
    if src.ndim == 2:
        src = src[..., None]
    planes = []
    for c in range(src.shape[2]):
        p = src[..., c]
        top = p[y0, x0] * (1 - fx) + p[y0, x1] * fx
        bot = p[y1, x0] * (1 - fx) + p[y1, x1] * fx
        planes.append(top * (1 - fy) + bot * fy)
    warped = np.stack(planes, axis=-1)
    if img.ndim == 2:
        warped = warped[..., 0]

    fill_arr = np.broadcast_to(np.asarray(fill, dtype=np.float64), warped.shape)
    sel = valid if img.ndim == 2 else valid[..., None]
    out = np.where(sel, warped, fill_arr)
    if np.issubdtype(img.dtype, np.integer):
        return np.clip(np.rint(out), 0, 255).astype(img.dtype)
    return out


def warped_region_mask(h: Homography, src_size: tuple[int, int], out_size: tuple[int, int]) -> np.ndarray:
    """Bool mask of output pixels covered by the warped source rectangle."""
    _, _, valid = _inverse_map(h, src_size, out_size)
    return valid


def _gen_background(out_w: int, out_h: int, rng: np.random.Generator, clutter: float) -> np.ndarray:
    """Mottled backdrop plus optional clutter shapes (tapes, boxes, cables)."""
    coarse = rng.uniform(30, 220, size=(5, 5, 3))
    bg = cv2.resize(coarse.astype(np.float32), (out_w, out_h), interpolation=cv2.INTER_CUBIC)
    bg = bg + rng.normal(0, 5.0, size=bg.shape)
    bg = np.clip(bg, 0, 255).astype(np.uint8)
    n_shapes = int(round(clutter * 14))
    for _ in range(n_shapes):
        color = tuple(int(v) for v in rng.integers(0, 256, 3))
        kind = rng.integers(0, 3)
        if kind == 0:
            p0 = (int(rng.uniform(0, out_w)), int(rng.uniform(0, out_h)))
            p1 = (int(rng.uniform(0, out_w)), int(rng.uniform(0, out_h)))
            cv2.line(bg, p0, p1, color, int(rng.uniform(2, 8)))
        elif kind == 1:
            x0, y0 = int(rng.uniform(0, out_w * 0.9)), int(rng.uniform(0, out_h * 0.9))
            x1 = x0 + int(rng.uniform(0.05, 0.3) * out_w)
            y1 = y0 + int(rng.uniform(0.05, 0.3) * out_h)
            cv2.rectangle(bg, (x0, y0), (x1, y1), color, int(rng.choice([-1, 3])))
        else:
            c = (int(rng.uniform(0, out_w)), int(rng.uniform(0, out_h)))
            cv2.circle(bg, c, int(rng.uniform(0.02, 0.12) * out_w), color, int(rng.choice([-1, 4])))
    return bg


def _quad_corners(params: DistortionParams, out_w: int, out_h: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Destination corners for the design rectangle inside the photo frame."""
    theta = np.deg2rad(rng.uniform(-params.rotation_deg, params.rotation_deg))
    s = rng.uniform(1.0 - params.scale_jitter, 1.0)
    jitter = rng.uniform(-1.0, 1.0, size=(4, 2)) * params.perspective_jitter * min(out_w, out_h)

    half_w = 0.5 * (1 - 2 * params.margin) * out_w * s
    half_h = 0.5 * (1 - 2 * params.margin) * out_h * s
    base = np.array([[-half_w, -half_h], [half_w, -half_h],
                     [half_w, half_h], [-half_w, half_h]])
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    center = np.array([(out_w - 1) / 2.0, (out_h - 1) / 2.0])
    return base @ rot.T + center + jitter


def render_photo(
    design: np.ndarray,
    params: DistortionParams,
    seed: int,
    out_size: tuple[int, int] | None = None,
) -> tuple[np.ndarray, np.ndarray, Homography]:
    """Form a product photo from a design raster.

    Returns (photo uint8, ground-truth mask bool, homography). The mask is
    the warped-design quadrilateral; occluders deliberately do not clear
    mask bits, matching rectangle-style annotation semantics where occluded
    product pixels still count as product.
    """
    dh, dw = design.shape[:2]
    out_w, out_h = out_size if out_size is not None else (dw, dh)

    # Independent per-stage streams: changing one stage's parameters never
    # perturbs the randomness of the others.
    root = np.random.SeedSequence([int(seed), 71])
    geom_rng, illum_rng, occl_rng, noise_rng = (
        np.random.default_rng(c) for c in root.spawn(4)
    )
    bg_rng = np.random.default_rng(np.random.SeedSequence([int(params.background_seed), int(seed), 17]))

    dst = _quad_corners(params, out_w, out_h, geom_rng)
    src = np.array([[-0.5, -0.5], [dw - 0.5, -0.5], [dw - 0.5, dh - 0.5], [-0.5, dh - 0.5]])
    h = Homography.from_points(src, dst)

    bg = _gen_background(out_w, out_h, bg_rng, params.background_clutter)
    photo = apply_homography(design, h, (out_w, out_h), fill=bg).astype(np.float64)
    gt_mask = warped_region_mask(h, (dw, dh), (out_w, out_h))

    if params.illumination > 0:
        phi = illum_rng.uniform(0, 2 * np.pi)
        xx, yy = np.meshgrid(np.arange(out_w), np.arange(out_h))
        ramp = xx * np.cos(phi) + yy * np.sin(phi)
        ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-9)
        photo *= (1.0 - params.illumination * ramp)[..., None]

    if params.occluder_count > 0:
        photo = _draw_occluders(photo, gt_mask, params, occl_rng)

    photo = np.clip(photo, 0, 255)
    if params.blur_sigma > 0:
        photo = cv2.GaussianBlur(photo, (0, 0), sigmaX=params.blur_sigma)
    if params.noise_sigma > 0:
        photo = photo + noise_rng.normal(0, params.noise_sigma, size=photo.shape)
    photo = np.clip(np.rint(photo), 0, 255).astype(np.uint8)
    return photo, gt_mask, h


def _draw_occluders(photo: np.ndarray, region: np.ndarray, params: DistortionParams,
                    rng: np.random.Generator) -> np.ndarray:
    out_h, out_w = photo.shape[:2]
    ys, xs = np.nonzero(region)
    if len(xs) == 0:
        return photo
    x_lo, x_hi, y_lo, y_hi = xs.min(), xs.max(), ys.min(), ys.max()
    placed: list[tuple[int, int, int, int]] = []
    img = photo
    for _ in range(params.occluder_count):
        for _attempt in range(20):
            area = rng.uniform(0.3, 1.0) * params.occluder_max_area * out_w * out_h
            aspect = rng.uniform(0.4, 2.5)
            ow = int(max(np.sqrt(area * aspect), 4))
            oh = int(max(np.sqrt(area / aspect), 4))
            cx = int(rng.uniform(x_lo, x_hi))
            cy = int(rng.uniform(y_lo, y_hi))
            box = (cx - ow // 2, cy - oh // 2, cx + ow // 2, cy + oh // 2)
            overlap = any(
                not (box[2] < p[0] or box[0] > p[2] or box[3] < p[1] or box[1] > p[3])
                for p in placed
            )
            if not overlap:
                break
        placed.append(box)
        color = rng.uniform(20, 235, 3)
        patch = np.zeros((out_h, out_w), dtype=np.uint8)
        if rng.random() < 0.5:
            cv2.rectangle(patch, box[:2], box[2:], 255, -1)
        else:
            cv2.ellipse(patch, (cx, cy), (max(ow // 2, 2), max(oh // 2, 2)),
                        rng.uniform(0, 180), 0, 360, 255, -1)
        sel = patch > 0
        img[sel] = color[None, :]
    return img


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) bounding rectangle of a non-empty bool mask."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("empty mask has no bounding box")
    return int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)


def gen_corpus(
    out_dir: str | Path,
    n_products: int,
    n_photos: int,
    preset: str | DistortionParams = "mild",
    two_sided_fraction: float = 0.25,
    seed: int = 0,
    design_size: int = 448,
    photo_size: int = 512,
) -> DatasetManifest:
    """Generate a full corpus: designs, photos, ground-truth masks, manifest.

    A ``two_sided_fraction`` share of products gets a second design file
    (the two-sided-card case); each photo shows one side chosen at random.
    Photos render larger than the design raster (operators fill the frame),
    so at the default margin the warped design sits near 1:1 pixel scale.
    """
    if n_products < 1:
        raise ValueError("need at least one product")
    params = PRESETS[preset] if isinstance(preset, str) else preset
    out = Path(out_dir)
    (out / "designs").mkdir(parents=True, exist_ok=True)
    (out / "photos").mkdir(parents=True, exist_ok=True)
    (out / "masks" / "gt").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2024]))
    # Exact two-sided count so the total design count is a pure function of
    # (n_products, two_sided_fraction).
    n_two_sided = int(round(two_sided_fraction * n_products))
    two_sided = np.zeros(n_products, dtype=bool)
    two_sided[rng.permutation(n_products)[:n_two_sided]] = True

    products: list[ProductEntry] = []
    designs: list[DesignEntry] = []
    design_images: dict[str, np.ndarray] = {}
    for i in range(n_products):
        pid = f"p{i:04d}"
        sides = ["a", "b"] if two_sided[i] else ["a"]
        design_ids = []
        for side in sides:
            did = f"{pid}{side}"
            spec = DesignSpec(width=design_size, height=design_size,
                              palette_seed=int(rng.integers(0, 2**31)))
            img = gen_design(spec, seed=int(rng.integers(0, 2**31)))
            rel = f"designs/{did}.png"
            save_png(out / rel, img)
            designs.append(DesignEntry(design_id=did, path=rel))
            design_images[did] = img
            design_ids.append(did)
        products.append(ProductEntry(product_id=pid, design_ids=design_ids, photo_ids=[]))

    photo_products = rng.permutation(n_products)
    photos: list[PhotoEntry] = []
    for j in range(n_photos):
        prod = products[int(photo_products[j % n_products])]
        did = prod.design_ids[int(rng.integers(0, len(prod.design_ids)))]
        phid = f"ph{j:04d}"
        photo_params = dataclasses.replace(params, background_seed=int(rng.integers(0, 2**31)))
        photo, gt_mask, _ = render_photo(design_images[did], photo_params,
                                         seed=int(rng.integers(0, 2**31)),
                                         out_size=(photo_size, photo_size))
        rel_photo = f"photos/{phid}.png"
        rel_mask = f"masks/gt/{phid}.pgm"
        save_png(out / rel_photo, photo)
        write_pgm(out / rel_mask, gt_mask)
        rect = mask_bbox(gt_mask)
        photos.append(PhotoEntry(photo_id=phid, path=rel_photo, rect=rect,
                                 masks={"gt": rel_mask}))
        prod.photo_ids.append(phid)

    manifest = DatasetManifest(root=out, products=products, photos=photos, designs=designs)
    save_manifest(manifest, out / "manifest.json")
    return load_manifest(out / "manifest.json")
