"""Toy identity dataset: families of striped textures seen by tinted cameras.

Identities come in look-alike families: every family shares a low-frequency
stripe mixture on a base color, and each identity adds its own fainter
high-frequency stripes. Cross-family matching is easy, within-family matching
needs fine detail, which is exactly the regime where short codes struggle and
longer codes can teach them. Cameras apply fixed color gains and brightness
offsets; every image gets a small random shift plus pixel noise.

The generator writes PNG images and three label files (train.csv,
gallery.csv, query.csv), each with columns path,person_id,camera_id; the
trainer only ever reads that directory layout.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import torch
from PIL import Image

IMG_H, IMG_W = 48, 24
SPLITS = ("train", "gallery", "query")


def _stripe_field(rng, yy, xx, freq_lo, freq_hi, amp):
    freq = rng.uniform(freq_lo, freq_hi)
    angle = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    color = rng.uniform(-amp, amp, size=3)
    wave = np.sin(freq * (np.cos(angle) * yy + np.sin(angle) * xx) + phase)
    return wave[:, :, None] * color


def _camera_palette(n_cams: int, rng: np.random.Generator) -> list[tuple[np.ndarray, float]]:
    return [
        (rng.uniform(0.75, 1.25, size=3), rng.uniform(-0.08, 0.08)) for _ in range(n_cams)
    ]


def _render(texture, cam_gain, cam_offset, rng: np.random.Generator, noise: float) -> np.ndarray:
    shifted = np.roll(texture, shift=(rng.integers(-3, 4), rng.integers(-2, 3)), axis=(0, 1))
    img = shifted * cam_gain + cam_offset
    img += rng.normal(0.0, noise, size=img.shape)
    return (np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)


def generate_dataset(
    root,
    n_families: int = 30,
    ids_per_family: int = 8,
    train_per_id: int = 8,
    gallery_per_id: int = 2,
    query_per_id: int = 2,
    n_cams: int = 4,
    family_amp: float = 0.3,
    detail_amp: float = 0.22,
    noise: float = 0.05,
    seed: int = 0,
) -> int:
    """Write the toy dataset directory; returns the number of identities."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    cams = _camera_palette(n_cams, rng)
    yy, xx = np.mgrid[0:IMG_H, 0:IMG_W].astype(np.float64)
    rows = {split: [] for split in SPLITS}
    per_id = {"train": train_per_id, "gallery": gallery_per_id, "query": query_per_id}

    pid = 0
    for _ in range(n_families):
        base = rng.uniform(0.25, 0.75, size=3)
        family = np.tile(base, (IMG_H, IMG_W, 1))
        for _ in range(2):
            family = family + _stripe_field(rng, yy, xx, 0.12, 0.5, family_amp)
        for _ in range(ids_per_family):
            texture = family.copy()
            for _ in range(2):
                texture = texture + _stripe_field(rng, yy, xx, 0.6, 2.0, detail_amp)
            texture = np.clip(texture, 0.0, 1.0)
            cam_cursor = 0
            for split in SPLITS:
                for _ in range(per_id[split]):
                    cam = cam_cursor % n_cams
                    cam_cursor += 1
                    gain, offset = cams[cam]
                    pixels = _render(texture, gain, offset, rng, noise)
                    rel = f"images/{split}_{pid:04d}_{len(rows[split]):05d}_c{cam}.png"
                    path = root / rel
                    path.parent.mkdir(parents=True, exist_ok=True)
                    Image.fromarray(pixels).save(path)
                    rows[split].append((rel, pid, cam))
            pid += 1

    for split in SPLITS:
        with open(root / f"{split}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["path", "person_id", "camera_id"])
            writer.writerows(rows[split])
    return pid


class ToySplit:
    """One split of the dataset held fully in memory as tensors."""

    def __init__(self, root, split: str):
        root = Path(root)
        self.images: list[torch.Tensor] = []
        ids, cams = [], []
        with open(root / f"{split}.csv") as f:
            for row in csv.DictReader(f):
                pixels = np.asarray(Image.open(root / row["path"]), dtype=np.float32) / 255.0
                self.images.append(torch.from_numpy(pixels).permute(2, 0, 1))
                ids.append(int(row["person_id"]))
                cams.append(int(row["camera_id"]))
        self.person_ids = np.array(ids, dtype=np.int64)
        self.camera_ids = np.array(cams, dtype=np.int64)
        self.tensor = torch.stack(self.images) if self.images else torch.empty(0, 3, IMG_H, IMG_W)

    def __len__(self) -> int:
        return len(self.person_ids)


class PKSampler:
    """Yields batches of P identities x K images, sampled without replacement per id."""

    def __init__(self, person_ids: np.ndarray, p: int, k: int, seed: int = 0):
        self.by_id = {}
        for idx, pid in enumerate(person_ids):
            self.by_id.setdefault(int(pid), []).append(idx)
        if len(self.by_id) < 2:
            raise ValueError("PK sampling needs at least two identities")
        self.p = min(p, len(self.by_id))
        self.k = k
        self.rng = np.random.default_rng(seed)

    def batch(self) -> np.ndarray:
        chosen_ids = self.rng.choice(sorted(self.by_id), size=self.p, replace=False)
        picks = []
        for pid in chosen_ids:
            pool = self.by_id[int(pid)]
            replace = len(pool) < self.k
            picks.extend(self.rng.choice(pool, size=self.k, replace=replace))
        return np.array(picks, dtype=np.int64)
