"""Two-domain synthetic dataset generator.

Both domains share one scene geometry distribution (near-round target
ellipses plus elongated distractor blobs) and differ only in appearance:
palette, texture, contrast and noise. Domain S is rendered clean and
high-contrast, domain T textured, low-contrast and noisy, so that a model
fit on S measurably degrades on T.

Geometry and appearance are drawn from separate RNG streams: the same
sample seed rendered under two styles yields identical masks and
different images.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .core import Sample

MIN_IMAGE_SIZE = 32

# RNG stream tags: geometry must stay style-independent.
_GEOM_STREAM = 0
_APPEARANCE_STREAM = 1
_SPLIT_STREAM = 99

_DOMAIN_INDEX = {"S": 0, "T": 1}


@dataclass(frozen=True)
class SceneSpec:
    """Geometry distribution shared by both domains."""

    image_size: int = 96
    target_count_range: Tuple[int, int] = (1, 3)
    target_radius_range: Tuple[float, float] = (0.10, 0.20)
    ellipticity_range: Tuple[float, float] = (0.70, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "target_count_range", tuple(self.target_count_range))
        object.__setattr__(self, "target_radius_range", tuple(self.target_radius_range))
        object.__setattr__(self, "ellipticity_range", tuple(self.ellipticity_range))
        lo, hi = self.target_radius_range
        if not (0.0 < lo <= hi < 0.5):
            raise ValueError(f"target_radius_range must lie within (0, 0.5): {self.target_radius_range}")
        if self.target_count_range[0] < 0 or self.target_count_range[0] > self.target_count_range[1]:
            raise ValueError(f"bad target_count_range {self.target_count_range}")
        elo, ehi = self.ellipticity_range
        if not (0.0 < elo <= ehi <= 1.0):
            raise ValueError(f"ellipticity_range must lie within (0, 1]: {self.ellipticity_range}")

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "target_count_range": list(self.target_count_range),
            "target_radius_range": list(self.target_radius_range),
            "ellipticity_range": list(self.ellipticity_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown SceneSpec keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class DomainStyle:
    """Appearance transform of one domain.

    base_palette holds (background, tissue texture, target interior) RGB
    colors in [0,1]. contrast scales how far target fill departs from the
    background; texture_density controls coarse blotch coverage.
    """

    base_palette: Tuple[Tuple[float, float, float], ...]
    noise_std: float
    texture_density: float
    contrast: float
    distractor_count_range: Tuple[int, int]

    def __post_init__(self):
        object.__setattr__(
            self, "base_palette", tuple(tuple(float(c) for c in col) for col in self.base_palette)
        )
        object.__setattr__(self, "distractor_count_range", tuple(self.distractor_count_range))
        if len(self.base_palette) != 3:
            raise ValueError("base_palette must hold exactly 3 RGB colors")
        for col in self.base_palette:
            if len(col) != 3 or any(not (0.0 <= c <= 1.0) for c in col):
                raise ValueError(f"invalid RGB color {col}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not (0.0 <= self.texture_density <= 1.0):
            raise ValueError("texture_density must lie in [0, 1]")
        if self.contrast <= 0:
            raise ValueError("contrast must be > 0")

    def to_dict(self) -> dict:
        return {
            "base_palette": [list(c) for c in self.base_palette],
            "noise_std": self.noise_std,
            "texture_density": self.texture_density,
            "contrast": self.contrast,
            "distractor_count_range": list(self.distractor_count_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DomainStyle":
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown DomainStyle keys: {sorted(unknown)}")
        return cls(
            base_palette=tuple(tuple(c) for c in d["base_palette"]),
            noise_std=d["noise_std"],
            texture_density=d["texture_density"],
            contrast=d["contrast"],
            distractor_count_range=tuple(d["distractor_count_range"]),
        )


# Clean, high-contrast rendering: dark violet targets on a pale warm field.
STYLE_S = DomainStyle(
    base_palette=((0.87, 0.83, 0.80), (0.70, 0.58, 0.62), (0.30, 0.16, 0.34)),
    noise_std=0.02,
    texture_density=0.12,
    contrast=1.0,
    distractor_count_range=(2, 5),
)

# Textured, noisy, low-contrast rendering: blue-grey targets barely lifted
# off a green-teal field littered with red streaks.
STYLE_T = DomainStyle(
    base_palette=((0.42, 0.58, 0.52), (0.66, 0.30, 0.28), (0.28, 0.42, 0.52)),
    noise_std=0.10,
    texture_density=0.45,
    contrast=0.60,
    distractor_count_range=(4, 9),
)

DEFAULT_SCENE = SceneSpec()


@dataclass
class DatasetManifest:
    """On-disk dataset description: ids per domain/split plus generator parameters."""

    root: Path
    splits: Dict[str, Dict[str, List[str]]]
    seed: int
    scene: SceneSpec
    styles: Dict[str, DomainStyle] = field(default_factory=dict)

    def sample_ids(self, domain: str, split: str) -> List[str]:
        return list(self.splits[domain][split])

    def image_path(self, domain: str, split: str, sample_id: str) -> Path:
        return Path(self.root) / domain / split / f"{sample_id}.img.png"

    def mask_path(self, domain: str, split: str, sample_id: str) -> Path:
        return Path(self.root) / domain / split / f"{sample_id}.mask.png"

    def validate(self) -> None:
        for domain, splits in self.splits.items():
            train = set(splits.get("train", ()))
            test = set(splits.get("test", ()))
            overlap = train & test
            if overlap:
                raise ValueError(f"train/test overlap in domain {domain}: {sorted(overlap)[:4]}")
            for split, ids in splits.items():
                for sid in ids:
                    for p in (self.image_path(domain, split, sid), self.mask_path(domain, split, sid)):
                        if not p.exists():
                            raise FileNotFoundError(f"sample {sid!r}: missing file {p}")

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "seed": self.seed,
            "scene": self.scene.to_dict(),
            "styles": {d: s.to_dict() for d, s in self.styles.items()},
            "splits": self.splits,
        }

    def save(self, path: Path) -> None:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: Path) -> "DatasetManifest":
        path = Path(path)
        d = json.loads(path.read_text())
        return cls(
            root=path.parent,
            splits=d["splits"],
            seed=d["seed"],
            scene=SceneSpec.from_dict(d["scene"]),
            styles={k: DomainStyle.from_dict(v) for k, v in d["styles"].items()},
        )


def _seed_atoms(seed) -> list:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def _ellipse_field(size: int, cx: float, cy: float, a: float, b: float, theta: float) -> np.ndarray:
    """Normalized quadratic form of an ellipse: <=1 inside, grows outward."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    u = (dx * np.cos(theta) + dy * np.sin(theta)) / a
    v = (-dx * np.sin(theta) + dy * np.cos(theta)) / b
    return u * u + v * v


def _soft_coverage(field: np.ndarray, radius_px: float) -> np.ndarray:
    # ~1px anti-aliased edge; mask itself stays the hard field <= 1 test.
    return np.clip((1.0 - np.sqrt(np.maximum(field, 0.0))) * radius_px, 0.0, 1.0)


def _sample_targets(rng: np.random.Generator, scene: SceneSpec) -> list:
    """Target ellipse parameters, placed fully inside the frame and pairwise disjoint."""
    size = scene.image_size
    lo, hi = scene.target_count_range
    count = int(rng.integers(lo, hi + 1))
    targets = []
    for _ in range(count):
        a = float(rng.uniform(*scene.target_radius_range)) * size
        ell = float(rng.uniform(*scene.ellipticity_range))
        theta = float(rng.uniform(0.0, np.pi))
        placed = None
        for _try in range(200):
            m = min(a + 1.0, (size - 1) / 2.0)
            cx = float(rng.uniform(m, size - 1 - m))
            cy = float(rng.uniform(m, size - 1 - m))
            if all(np.hypot(cx - t[0], cy - t[1]) >= a + t[2] for t in targets):
                placed = (cx, cy)
                break
        if placed is None:  # crowded scene: tolerate overlap rather than fail
            placed = (size / 2.0, size / 2.0)
        targets.append((placed[0], placed[1], a, a * ell, theta))
    return targets


def generate_sample(seed, scene: SceneSpec, style: DomainStyle, domain: str, sample_id: str | None = None) -> Sample:
    """Render one deterministic Sample.

    Geometry (targets) comes from a style-independent RNG stream, so the
    same seed rendered under different styles shares its mask exactly.
    """
    if scene.image_size < MIN_IMAGE_SIZE:
        raise ValueError(f"image_size must be >= {MIN_IMAGE_SIZE}, got {scene.image_size}")
    size = scene.image_size
    atoms = _seed_atoms(seed)
    geom_rng = np.random.default_rng(atoms + [_GEOM_STREAM])
    app_rng = np.random.default_rng(atoms + [_APPEARANCE_STREAM])

    targets = _sample_targets(geom_rng, scene)

    mask = np.zeros((size, size), dtype=np.uint8)
    for cx, cy, a, b, theta in targets:
        mask |= (_ellipse_field(size, cx, cy, a, b, theta) <= 1.0).astype(np.uint8)

    bg, tex_color, fg = (np.array(c, dtype=np.float64) for c in style.base_palette)
    img = np.broadcast_to(bg, (size, size, 3)).copy()

    # Coarse blotch field -> smooth tissue-like texture patches.
    if style.texture_density > 0:
        cell = max(4, size // 12)
        n_cells = -(-size // cell)
        coarse = app_rng.random((n_cells, n_cells))
        fieldt = np.repeat(np.repeat(coarse, cell, 0), cell, 1)[:size, :size]
        fieldt = gaussian_filter(fieldt, sigma=cell / 2.0)
        span = fieldt.max() - fieldt.min()
        if span > 1e-12:
            fieldt = (fieldt - fieldt.min()) / span
        alpha = np.clip((fieldt - (1.0 - style.texture_density)) / max(style.texture_density, 1e-9), 0.0, 1.0)
        img += alpha[..., None] * 0.85 * (tex_color - img)

    # Distractor blobs: elongated, never in the mask.
    dlo, dhi = style.distractor_count_range
    n_distr = int(app_rng.integers(dlo, dhi + 1))
    for _ in range(n_distr):
        a = float(app_rng.uniform(0.03, 0.09)) * size
        b = a * float(app_rng.uniform(0.25, 0.6))
        theta = float(app_rng.uniform(0.0, np.pi))
        cx = float(app_rng.uniform(0, size - 1))
        cy = float(app_rng.uniform(0, size - 1))
        strength = float(app_rng.uniform(0.5, 0.9))
        jitter = app_rng.uniform(-0.05, 0.05, 3)
        color = np.clip(tex_color + jitter, 0.0, 1.0)
        cov = _soft_coverage(_ellipse_field(size, cx, cy, a, b, theta), a)
        img += (strength * cov)[..., None] * (color - img)

    # Targets drawn last so the mask is exactly their union.
    for cx, cy, a, b, theta in targets:
        jitter = app_rng.uniform(-0.04, 0.04, 3)
        color = np.clip(fg + jitter, 0.0, 1.0)
        color = bg + style.contrast * (color - bg)
        cov = _soft_coverage(_ellipse_field(size, cx, cy, a, b, theta), a)
        img += cov[..., None] * (np.clip(color, 0.0, 1.0) - img)

    if style.noise_std > 0:
        img += app_rng.normal(0.0, style.noise_std, img.shape)

    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    sid = sample_id if sample_id is not None else f"{domain}{atoms[-1]:06d}"
    return Sample(image=img, mask=mask, domain=domain, id=sid)


def _write_png(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(arr).save(path, format="PNG")


def generate_dataset(
    out_dir,
    n_per_domain: int,
    scene: SceneSpec = DEFAULT_SCENE,
    style_S: DomainStyle = STYLE_S,
    style_T: DomainStyle = STYLE_T,
    split_fraction: float = 0.8,
    seed: int = 0,
) -> DatasetManifest:
    """Render n_per_domain samples per domain to disk and persist a manifest.

    Layout: <root>/<domain>/<split>/<id>.img.png (8-bit RGB) and
    <id>.mask.png (8-bit grayscale, 0 or 255), plus <root>/manifest.json.
    """
    if not (0.0 < split_fraction < 1.0):
        raise ValueError(f"split_fraction must lie in (0, 1), got {split_fraction}")
    if n_per_domain < 5:
        raise ValueError(f"n_per_domain must be >= 5, got {n_per_domain}")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    styles = {"S": style_S, "T": style_T}
    n_train = int(round(n_per_domain * split_fraction))
    split_rng = np.random.default_rng([seed, _SPLIT_STREAM])
    splits: Dict[str, Dict[str, List[str]]] = {}

    for domain in ("S", "T"):
        didx = _DOMAIN_INDEX[domain]
        perm = split_rng.permutation(n_per_domain)
        train_idx = set(int(i) for i in perm[:n_train])
        splits[domain] = {"train": [], "test": []}
        for split in ("train", "test"):
            (root / domain / split).mkdir(parents=True, exist_ok=True)
        for i in range(n_per_domain):
            split = "train" if i in train_idx else "test"
            sid = f"{domain}{i:04d}"
            sample = generate_sample([seed, didx, i], scene, styles[domain], domain, sample_id=sid)
            _write_png(root / domain / split / f"{sid}.img.png", np.round(sample.image * 255).astype(np.uint8))
            _write_png(root / domain / split / f"{sid}.mask.png", (sample.mask * 255).astype(np.uint8))
            splits[domain][split].append(sid)

    manifest = DatasetManifest(root=root, splits=splits, seed=seed, scene=scene, styles=styles)
    manifest.save(root / "manifest.json")
    return manifest


def sample_seed_for(manifest: DatasetManifest, sample_id: str) -> list:
    """Recover the generator seed sequence of a dataset sample (for re-rendering)."""
    domain, idx = sample_id[0], int(sample_id[1:])
    return [manifest.seed, _DOMAIN_INDEX[domain], idx]


class LoadedDataset:
    """Dataset read back from a manifest; samples load lazily per (domain, split)."""

    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest

    def samples(self, domain: str, split: str) -> List[Sample]:
        out = []
        for sid in self.manifest.sample_ids(domain, split):
            img_path = self.manifest.image_path(domain, split, sid)
            mask_path = self.manifest.mask_path(domain, split, sid)
            for p in (img_path, mask_path):
                if not p.exists():
                    raise FileNotFoundError(f"sample {sid!r}: missing file {p}")
            img = np.asarray(Image.open(img_path), dtype=np.float32) / 255.0
            raw = np.asarray(Image.open(mask_path))
            bad = np.setdiff1d(np.unique(raw), [0, 255])
            if bad.size:
                raise ValueError(f"sample {sid!r}: mask holds values other than 0/255: {bad[:8]}")
            mask = (raw == 255).astype(np.uint8)
            out.append(Sample(image=img, mask=mask, domain=domain, id=sid))
        return out


def load_dataset(manifest_path) -> LoadedDataset:
    """Load and validate a dataset manifest; raises naming the id on missing files."""
    manifest = DatasetManifest.load(Path(manifest_path))
    manifest.validate()
    return LoadedDataset(manifest)
