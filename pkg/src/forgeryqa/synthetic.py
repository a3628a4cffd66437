"""Synthetic face-like image pairs for demos and end-to-end tests.

Stands in for a real face corpus: "real" images are smooth, well-lit
ellipse faces with mild texture; the paired "fake" variant re-renders the
same face with visible manipulation artifacts (texture noise, color cast,
smearing).  No claim of realism, only of learnable separability at desk
scale.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from .dataset_io import save_image
from .seeding import derive_seed


def synthetic_face(size: int, rng: np.random.Generator) -> np.ndarray:
    """A smooth face-like image: skin ellipse, eye/mouth blobs, soft lighting."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    cy, cx = rng.uniform(0.46, 0.54), rng.uniform(0.46, 0.54)
    ry, rx = rng.uniform(0.30, 0.38), rng.uniform(0.24, 0.30)
    face = np.exp(-(((yy - cy) / ry) ** 4 + ((xx - cx) / rx) ** 4))

    skin = np.array([rng.uniform(0.65, 0.85), rng.uniform(0.45, 0.62), rng.uniform(0.35, 0.5)])
    background = np.array([rng.uniform(0.1, 0.3)] * 3) + rng.uniform(-0.05, 0.05, size=3)
    img = background[None, None, :] + face[..., None] * (skin - background)[None, None, :]

    for ex in (cx - 0.13, cx + 0.13):
        eye = np.exp(-(((yy - (cy - 0.12)) / 0.035) ** 2 + ((xx - ex) / 0.05) ** 2))
        img -= eye[..., None] * 0.45
    mouth = np.exp(-(((yy - (cy + 0.18)) / 0.03) ** 2 + ((xx - cx) / 0.09) ** 2))
    img[..., 0] += mouth * 0.1
    img[..., 1:] -= mouth[..., None] * 0.25

    light = 1.0 + 0.15 * (xx - 0.5) * rng.choice([-1.0, 1.0])
    img *= light[..., None]
    img += rng.normal(0.0, 0.01, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def manipulate_face(pixels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A visibly manipulated variant of a face: noise grain, cast, smearing."""
    img = np.array(pixels, copy=True)
    size = img.shape[0]
    # high-frequency texture grain over the whole frame
    grain = rng.normal(0.0, 0.12, size=img.shape)
    img = img + grain
    # global color cast
    cast = rng.uniform(0.05, 0.15, size=3) * rng.choice([-1.0, 1.0], size=3)
    img = img + cast[None, None, :]
    # directional smear of the central area
    k = int(rng.integers(2, 4))
    axis = int(rng.integers(0, 2))
    lo, hi = size // 4, 3 * size // 4
    patch = img[lo:hi, lo:hi]
    img[lo:hi, lo:hi] = ndimage.uniform_filter1d(patch, size=2 * k + 1, axis=axis)
    return np.clip(img, 0.0, 1.0)


def generate_pairs(
    num_pairs: int, size: int, seed: int
) -> List[Tuple[str, np.ndarray, np.ndarray]]:
    """(pair id, real pixels, fake pixels) triples, deterministically seeded."""
    out = []
    for i in range(num_pairs):
        pid = f"{i:04d}"
        rng = np.random.default_rng(derive_seed(seed, "synthetic", pid))
        real = synthetic_face(size, rng)
        fake = manipulate_face(real, rng)
        out.append((pid, real, fake))
    return out


def write_corpus(out_dir, num_pairs: int, size: int, seed: int) -> Path:
    """Write a real/ + fake/ paired corpus; returns the corpus directory."""
    out_dir = Path(out_dir)
    for pid, real, fake in generate_pairs(num_pairs, size, seed):
        save_image(real, out_dir / "real" / f"{pid}.png")
        save_image(fake, out_dir / "fake" / f"{pid}.png")
    return out_dir
