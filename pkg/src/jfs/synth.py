"""Seeded desk-scale benchmark generator.

Scenes are axis-aligned rectangles and ellipses with per-class base colors
plus Gaussian noise, painted back-to-front (later shapes occlude earlier
ones). Class colors are far apart relative to the noise so a nearest-
prototype oracle has real signal to exploit; that is what makes end-to-end
verification of the judging pipeline possible without neural models.

Degraded masks are built by biting a contiguous chunk out of the ground
truth near its boundary and growing spurious blobs in the background. Both
region sizes are solved from an exact pixel-count identity, so a target IoU
band is hit almost surely on the first attempt; a rejection loop (50
attempts, then GenerationError) keeps the contract honest for adversarial
configurations.

Everything is a pure function of (seed, config). Per-sample child seeds are
derived as splitmix64(seed XOR golden_ratio * index), so parallel and serial
generation agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import dataio
from .dataio import CandidateBank, DatasetIndex
from .errors import GenerationError
from .maskcore import BinaryMask, LabelMap, extract_class, iou

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Base colors (background first, then class ids 1..7). Pairwise Chebyshev
# channel distance >= 70/255, so noise sigma up to ~0.068 keeps them apart
# by the required 4 sigma.
_BACKGROUND_COLOR = (120, 120, 120)
_CLASS_COLORS = (
    (220, 50, 50),
    (60, 200, 70),
    (60, 90, 220),
    (230, 210, 60),
    (200, 60, 200),
    (50, 200, 200),
    (240, 140, 40),
)


def derive_seed(seed: int, index: int) -> int:
    """Child-seed derivation: splitmix64 finalizer over seed XOR scaled index."""
    z = (seed ^ ((index * _GOLDEN) & _MASK64)) & _MASK64
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def seeded_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, index)))


@dataclass(frozen=True)
class SceneConfig:
    width: int = 64
    height: int = 64
    num_classes: int = 4
    shapes_per_image: tuple[int, int] = (3, 5)
    color_noise_sigma: float = 0.02  # per-channel std, [0,1] color units
    background_texture_sigma: float = 0.02

    def __post_init__(self):
        if self.num_classes < 1 or self.num_classes > len(_CLASS_COLORS):
            raise GenerationError(
                f"num_classes must be in 1..{len(_CLASS_COLORS)}, got {self.num_classes}"
            )
        lo, hi = self.shapes_per_image
        if lo < 1 or hi < lo:
            raise GenerationError(f"bad shapes_per_image range {self.shapes_per_image}")
        colors = np.array([_BACKGROUND_COLOR] + list(_CLASS_COLORS[: self.num_classes]))
        sep = min(
            np.abs(colors[i] - colors[j]).max()
            for i in range(len(colors))
            for j in range(i + 1, len(colors))
        )
        if sep < 4 * self.color_noise_sigma * 255:
            raise GenerationError(
                f"class colors are {sep}/255 apart; need >= 4*sigma = "
                f"{4 * self.color_noise_sigma * 255:.1f}/255"
            )


@dataclass(frozen=True)
class Shape:
    kind: str  # "rect" | "ellipse"
    class_id: int
    x0: int
    y0: int
    x1: int  # exclusive
    y1: int  # exclusive

    def contains(self, x: int, y: int) -> bool:
        """Membership test for a single pixel (used by the test oracles too)."""
        if self.kind == "rect":
            return self.x0 <= x < self.x1 and self.y0 <= y < self.y1
        cx = (self.x0 + self.x1) / 2.0
        cy = (self.y0 + self.y1) / 2.0
        rx = (self.x1 - self.x0) / 2.0
        ry = (self.y1 - self.y0) / 2.0
        return ((x + 0.5 - cx) / rx) ** 2 + ((y + 0.5 - cy) / ry) ** 2 <= 1.0


def sample_shapes(seed: int, config: SceneConfig) -> list[Shape]:
    """Draw the scene's shape list; classes cycle 1..K before going random."""
    w, h = config.width, config.height
    min_side = max(4, min(w, h) // 8)
    max_side = max(min_side + 2, min(w, h) // 3)
    if w < min_side or h < min_side or w < 16 or h < 16:
        raise GenerationError(f"scene {w}x{h} too small to fit shapes")
    rng = seeded_rng(seed, 1)
    count = int(rng.integers(config.shapes_per_image[0], config.shapes_per_image[1] + 1))
    shapes = []
    for i in range(count):
        if i < config.num_classes:
            class_id = i + 1
        else:
            class_id = int(rng.integers(1, config.num_classes + 1))
        sw = int(rng.integers(min_side, max_side + 1))
        sh = int(rng.integers(min_side, max_side + 1))
        x0 = int(rng.integers(0, w - sw + 1))
        y0 = int(rng.integers(0, h - sh + 1))
        kind = "rect" if rng.random() < 0.5 else "ellipse"
        shapes.append(Shape(kind, class_id, x0, y0, x0 + sw, y0 + sh))
    return shapes


def _rasterize(shapes: list[Shape], width: int, height: int) -> np.ndarray:
    labels = np.zeros((height, width), dtype=np.uint8)
    ys, xs = np.mgrid[0:height, 0:width]
    for s in shapes:  # painter's order: later shapes occlude earlier ones
        if s.kind == "rect":
            member = (s.x0 <= xs) & (xs < s.x1) & (s.y0 <= ys) & (ys < s.y1)
        else:
            cx = (s.x0 + s.x1) / 2.0
            cy = (s.y0 + s.y1) / 2.0
            rx = (s.x1 - s.x0) / 2.0
            ry = (s.y1 - s.y0) / 2.0
            member = ((xs + 0.5 - cx) / rx) ** 2 + ((ys + 0.5 - cy) / ry) ** 2 <= 1.0
        labels[member] = s.class_id
    return labels


def generate_scene(seed: int, config: SceneConfig) -> tuple[np.ndarray, LabelMap]:
    """Render one scene: (uint8 RGB image, ground-truth LabelMap)."""
    shapes = sample_shapes(seed, config)
    labels = _rasterize(shapes, config.width, config.height)
    palette = np.array([_BACKGROUND_COLOR] + list(_CLASS_COLORS), dtype=np.float64)
    base = palette[labels]
    rng = seeded_rng(seed, 2)
    noise = rng.normal(0.0, 1.0, size=base.shape)
    sigma = np.where(
        (labels == 0)[..., None], config.background_texture_sigma, config.color_noise_sigma
    )
    image = np.clip(np.rint(base + noise * sigma * 255.0), 0, 255).astype(np.uint8)
    return image, LabelMap(labels)


# ---------------------------------------------------------------------------
# Mask degradation


@dataclass(frozen=True)
class DegradeConfig:
    """How far from ground truth a fabricated mask should land.

    ``target_gap`` is a band of intended |IoU(refined,GT) - IoU(coarse,GT)|;
    the mode fixes the sign of that gap when a pair is fabricated. For a
    single degrade_mask call the band maps to IoU(out, gt) in
    [1 - hi, 1 - lo].
    """

    mode: str  # "improve" | "corrupt" | "marginal"
    boundary_jitter_radius: int = 2
    blob_rate: float = 1.0
    target_gap: tuple[float, float] = (0.1, 0.4)

    def __post_init__(self):
        if self.mode not in ("improve", "corrupt", "marginal"):
            raise ValueError(f"mode must be improve|corrupt|marginal, got {self.mode!r}")
        lo, hi = self.target_gap
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"target_gap band {self.target_gap} not within [0,1]")
        if self.blob_rate < 0:
            raise ValueError("blob_rate must be >= 0")


_NEIGHBORS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _grow_region(
    allowed: np.ndarray, count: int, rng: np.random.Generator, start_hint: np.ndarray | None = None
) -> np.ndarray:
    """Collect ``count`` pixels from ``allowed`` by BFS, re-seeding as needed.

    Seeds prefer ``start_hint`` pixels when given. Deterministic for a given
    rng state; raises GenerationError when allowed has fewer than count pixels.
    """
    h, w = allowed.shape
    if count == 0:
        return np.zeros_like(allowed)
    if int(np.count_nonzero(allowed)) < count:
        raise GenerationError(f"cannot grow region of {count} pixels")
    taken = np.zeros_like(allowed)
    frontier: list[tuple[int, int]] = []
    collected = 0

    def pick_seed() -> tuple[int, int]:
        pool = allowed & ~taken
        if start_hint is not None:
            pool = pool & start_hint
        coords = np.argwhere(pool)
        if coords.size == 0:
            coords = np.argwhere(allowed & ~taken)
        r, c = coords[int(rng.integers(0, len(coords)))]
        return int(r), int(c)

    while collected < count:
        if not frontier:
            seed_px = pick_seed()
            if not taken[seed_px]:
                taken[seed_px] = True
                collected += 1
                frontier.append(seed_px)
            continue
        next_frontier = []
        for r, c in frontier:
            for dr, dc in _NEIGHBORS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and allowed[nr, nc] and not taken[nr, nc]:
                    taken[nr, nc] = True
                    collected += 1
                    next_frontier.append((nr, nc))
                    if collected == count:
                        return taken
        frontier = next_frontier
    return taken


def _boundary_band(mask: np.ndarray, radius: int) -> np.ndarray:
    """Foreground pixels within ``radius`` of the mask boundary."""
    if radius < 1:
        return mask.copy()
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    interior = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    band = mask & ~interior
    return band if band.any() else mask.copy()


def degrade_mask(gt_mask: BinaryMask, seed: int, config: DegradeConfig) -> BinaryMask:
    """Fabricate a mask whose IoU against ``gt_mask`` lies in the config band.

    Up to 50 seeded attempts; each bites a contiguous boundary chunk out of
    the ground truth and grows spurious background blobs, with both sizes
    solved so the resulting IoU falls inside [1 - hi, 1 - lo] of target_gap.
    """
    gap_lo, gap_hi = config.target_gap
    iou_lo, iou_hi = 1.0 - gap_hi, 1.0 - gap_lo
    gt = gt_mask.pixels
    area = int(np.count_nonzero(gt))
    if area == 0 and config.mode in ("improve", "corrupt"):
        raise GenerationError(f"mode {config.mode!r} needs a nonempty ground-truth mask")
    for attempt in range(50):
        rng = seeded_rng(seed, attempt)
        out = _degrade_once(gt, area, iou_lo, iou_hi, config, rng)
        if out is not None:
            achieved = iou(BinaryMask(out), gt_mask)
            if iou_lo <= achieved <= iou_hi:
                return BinaryMask(out)
    raise GenerationError(
        f"no mask with IoU in [{iou_lo:.3f}, {iou_hi:.3f}] found in 50 attempts"
    )


def _degrade_once(gt, area, iou_lo, iou_hi, config, rng):
    if area == 0:
        return gt.copy() if iou_hi >= 1.0 else None
    t = float(rng.uniform(iou_lo, iou_hi))
    if t >= 1.0:
        return gt.copy()
    if t <= 0.0:
        return np.zeros_like(gt)
    removed = int(round(rng.uniform(0.0, 1.0 - t) * area))
    removed = min(removed, area - 1)
    added = max(0, int(round((area - removed) / t)) - area)
    bg = ~gt
    if int(np.count_nonzero(bg)) < added:
        return None
    out = gt.copy()
    if removed > 0:
        band = _boundary_band(gt, config.boundary_jitter_radius)
        bite = _grow_region(gt, removed, rng, start_hint=band)
        out &= ~bite
    if added > 0:
        blobs = max(1, int(rng.poisson(config.blob_rate))) if config.blob_rate > 0 else 1
        remaining = added
        grown = np.zeros_like(gt)
        for b in range(blobs):
            if remaining == 0:
                break
            chunk = remaining if b == blobs - 1 else max(1, remaining // (blobs - b))
            grown |= _grow_region(bg & ~grown, chunk, rng)
            remaining -= chunk
        out |= grown
    return out


# ---------------------------------------------------------------------------
# Oversegmentation (candidate banks)


def oversegment(
    gt: LabelMap, seed: int, granularity: int, image_id: str = ""
) -> CandidateBank:
    """Split every ground-truth region into <= granularity contiguous parts.

    Regions are connected components per label value (background included),
    split by seeded multi-source BFS region growing. The returned candidates
    are pairwise disjoint, cover the frame, and each lies entirely within one
    ground-truth region.
    """
    if granularity < 1:
        raise ValueError(f"granularity must be >= 1, got {granularity}")
    rng = seeded_rng(seed, 3)
    labels = gt.labels
    parts: list[BinaryMask] = []
    for value in sorted(int(v) for v in np.unique(labels)):
        components, n_comp = ndimage.label(labels == value)
        for comp in range(1, n_comp + 1):
            region = components == comp
            size = int(np.count_nonzero(region))
            k = min(size, int(rng.integers(1, granularity + 1)))
            parts.extend(_split_region(region, k, rng))
    return CandidateBank(image_id, tuple(parts))


def _split_region(region: np.ndarray, k: int, rng: np.random.Generator) -> list[BinaryMask]:
    if k == 1:
        return [BinaryMask(region.copy())]
    coords = np.argwhere(region)
    seed_rows = rng.choice(len(coords), size=k, replace=False)
    owner = np.full(region.shape, -1, dtype=np.int32)
    frontier: list[tuple[int, int]] = []
    for label, row in enumerate(seed_rows):
        r, c = (int(v) for v in coords[row])
        owner[r, c] = label
        frontier.append((r, c))
    h, w = region.shape
    while frontier:
        proposals: dict[tuple[int, int], int] = {}
        for r, c in frontier:
            for dr, dc in _NEIGHBORS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and region[nr, nc] and owner[nr, nc] < 0:
                    key = (nr, nc)
                    lab = owner[r, c]
                    if key not in proposals or lab < proposals[key]:
                        proposals[key] = lab
        frontier = []
        for (nr, nc), lab in sorted(proposals.items()):
            owner[nr, nc] = lab
            frontier.append((nr, nc))
    # BFS from seeds covers the whole component (it is connected by construction)
    return [BinaryMask(owner == label) for label in range(k)]


# ---------------------------------------------------------------------------
# Benchmark assembly


def default_scene_config() -> SceneConfig:
    """The frozen scene configuration used by the canonical benchmarks."""
    return SceneConfig()


def default_improve_config() -> DegradeConfig:
    return DegradeConfig(mode="improve", target_gap=(0.01, 0.5))


def default_corrupt_config() -> DegradeConfig:
    return DegradeConfig(mode="corrupt", target_gap=(0.01, 0.45))


_MIN_CLASS_AREA = 30  # degradation needs room to carve and grow


def _scene_with_class(seed: int, config: SceneConfig, class_id: int, min_area: int):
    for attempt in range(20):
        image, gt = generate_scene(derive_seed(seed, 10 + attempt), config)
        mask, _ = extract_class(gt, class_id)
        if mask.area >= min_area:
            return image, gt, mask
    raise GenerationError(f"no scene with class {class_id} of area >= {min_area} in 20 tries")


def _scene_with_all_classes(seed: int, config: SceneConfig):
    want = set(range(1, config.num_classes + 1))
    for attempt in range(20):
        image, gt = generate_scene(derive_seed(seed, 10 + attempt), config)
        if want.issubset(gt.present_classes()):
            return image, gt
    raise GenerationError(f"no scene containing all {config.num_classes} classes in 20 tries")


def _fabricate_pair(
    gt_mask: BinaryMask, sample_seed: int, config: DegradeConfig
) -> tuple[BinaryMask, BinaryMask, float, float]:
    """Build (coarse, refined) with the IoU ordering implied by config.mode."""
    window = 0.02
    for attempt in range(50):
        rng = seeded_rng(sample_seed, 100 + attempt)
        delta = float(rng.uniform(*config.target_gap))
        anchor = float(rng.uniform(0.78, 0.92))
        worse_target = max(0.05, anchor - delta)
        better = degrade_mask(
            gt_mask,
            derive_seed(sample_seed, 200 + attempt),
            replace(config, target_gap=(max(0.0, 1 - anchor - window), min(1.0, 1 - anchor + window))),
        )
        worse = degrade_mask(
            gt_mask,
            derive_seed(sample_seed, 300 + attempt),
            replace(config, target_gap=(max(0.0, 1 - worse_target - window), min(1.0, 1 - worse_target + window))),
        )
        iou_better = iou(better, gt_mask)
        iou_worse = iou(worse, gt_mask)
        if iou_better <= iou_worse:
            continue
        if config.mode == "corrupt":
            return better, worse, iou_better, iou_worse  # coarse, refined
        return worse, better, iou_worse, iou_better
    raise GenerationError(f"could not order a mask pair for mode {config.mode!r}")


def generate_benchmark(
    seed: int,
    n_samples: int,
    scene: SceneConfig,
    degrade_improve: DegradeConfig,
    degrade_corrupt: DegradeConfig,
    corrupt_fraction: float,
    out: Path | str,
    *,
    n_val: int = 8,
    with_candidates: bool = False,
    granularity: int = 3,
) -> DatasetIndex:
    """Write a complete benchmark tree and return its train index.

    Train entries are query scenes with per-class coarse and refined masks;
    val entries are the support pool (every val scene contains every class).
    Exactly floor(corrupt_fraction * n_samples) samples have the refined mask
    strictly worse than the coarse one. manifest.json records the true IoUs.
    """
    if not 0.0 <= corrupt_fraction <= 1.0:
        raise ValueError(f"corrupt_fraction must be in [0,1], got {corrupt_fraction}")
    if degrade_improve.mode != "improve" or degrade_corrupt.mode != "corrupt":
        raise ValueError("degrade configs must have modes 'improve' and 'corrupt'")
    out = Path(out)
    for sub in ("images", "labels", "splits", "coarse", "refined"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    if with_candidates:
        (out / "candidates").mkdir(exist_ok=True)

    n_corrupt = int(corrupt_fraction * n_samples)
    order = seeded_rng(seed, 4).permutation(n_samples)
    corrupt_set = set(int(i) for i in order[:n_corrupt])

    manifest = []
    train_ids = []
    for i in range(n_samples):
        sample_seed = derive_seed(seed, 0x51000000 + i)
        class_id = (i % scene.num_classes) + 1
        image, gt, gt_mask = _scene_with_class(sample_seed, scene, class_id, _MIN_CLASS_AREA)
        image_id = f"train_{i:04d}"
        mode = "corrupt" if i in corrupt_set else "improve"
        config = degrade_corrupt if mode == "corrupt" else degrade_improve
        coarse, refined, iou_coarse, iou_refined = _fabricate_pair(gt_mask, sample_seed, config)

        dataio.save_image_png(image, out / "images" / f"{image_id}.png")
        dataio.save_labelmap_png(gt, out / "labels" / f"{image_id}.png")
        dataio.save_mask_png(coarse, out / "coarse" / f"{image_id}_{class_id}.png")
        dataio.save_mask_png(refined, out / "refined" / f"{image_id}_{class_id}.png")
        if with_candidates:
            bank = oversegment(gt, derive_seed(sample_seed, 7), granularity, image_id)
            for k, cand in enumerate(bank.candidates):
                dataio.save_mask_png(cand, out / "candidates" / f"{image_id}_{k}.png")
        train_ids.append(image_id)
        manifest.append(
            {
                "image_id": image_id,
                "class_id": class_id,
                "iou_coarse_true": iou_coarse,
                "iou_refined_true": iou_refined,
                "mode": mode,
            }
        )

    val_ids = []
    for j in range(n_val):
        image_id = f"val_{j:04d}"
        image, gt = _scene_with_all_classes(derive_seed(seed, 0x7A000000 + j), scene)
        dataio.save_image_png(image, out / "images" / f"{image_id}.png")
        dataio.save_labelmap_png(gt, out / "labels" / f"{image_id}.png")
        val_ids.append(image_id)

    (out / "splits" / "train.txt").write_bytes(("\n".join(train_ids) + "\n").encode("utf-8"))
    (out / "splits" / "val.txt").write_bytes(("\n".join(val_ids) + "\n").encode("utf-8"))
    payload = {
        "seed": seed,
        "n_samples": n_samples,
        "corrupt_fraction": corrupt_fraction,
        "samples": manifest,
    }
    (out / "manifest.json").write_bytes((json.dumps(payload, indent=2) + "\n").encode("utf-8"))
    return dataio.load_dataset(out, "train")
