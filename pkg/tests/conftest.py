import json
from pathlib import Path

import cv2
import numpy as np
import pytest
from PIL import Image


def scene_frame(kind: int, jitter_seed: int, h: int = 120, w: int = 160) -> np.ndarray:
    """One frame of a synthetic scene; frames of the same kind are near-identical."""
    r = np.random.default_rng(jitter_seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    img = np.zeros((h, w, 3))
    if kind == 0:
        img[..., 0] = 130 + 110 * np.sin(xx / 4.0)
        img[..., 1] = img[..., 0]
        img[..., 2] = 40
    elif kind == 1:
        img[..., 0] = 40
        img[..., 1] = 130 + 110 * np.sin(yy / 6.0)
        img[..., 2] = img[..., 1]
    else:
        small = np.random.default_rng(77 + kind).random((6, 8, 3))
        img = cv2.resize(small, (w, h), interpolation=cv2.INTER_CUBIC) * 255
    img = img + r.normal(0, 2.0, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def landscape_frame(seed: int = 1, h: int = 270, w: int = 480) -> np.ndarray:
    """Photo-like scene: sky gradient, ground, sun and a tree blob."""
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    img = np.zeros((h, w, 3))
    img[..., 2] = 220 - 90 * (yy / h)
    img[..., 1] = 140 - 40 * (yy / h)
    img[..., 0] = 70
    ground = yy > 0.62 * h
    img[ground] = np.stack([80 + 30 * (yy / h), 140 - 20 * (yy / h), 60 + 0 * yy], axis=-1)[ground]
    sun = (yy - 0.25 * h) ** 2 + (xx - 0.7 * w) ** 2 < 28 ** 2
    img[sun] = (250, 230, 90)
    tree = (yy - 0.55 * h) ** 2 / 2 + (xx - 0.25 * w) ** 2 < 40 ** 2
    img[tree] = (40, 90, 35)
    img = img + np.random.default_rng(seed).normal(0, 2.0, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def mirrored_frame(seed: int = 3, h: int = 240, w: int = 320) -> np.ndarray:
    """Exactly mirror-symmetric frame with features spanning to the corners."""
    r = np.random.default_rng(seed)
    img = np.full((h, w // 2, 3), 200, dtype=np.uint8)
    for _ in range(40):
        cx = int(r.integers(4, w // 2 - 4))
        cy = int(r.integers(4, h - 4))
        rad = int(r.integers(3, 9))
        color = tuple(int(c) for c in r.integers(0, 255, 3))
        cv2.circle(img, (cx, cy), rad, color, -1)
    for cx, cy in [(8, 8), (8, h - 9), (w // 2 - 9, 8), (w // 2 - 9, h - 9)]:
        cv2.rectangle(img, (cx - 5, cy - 5), (cx + 5, cy + 5), (10, 10, 10), -1)
    return np.concatenate([img, img[:, ::-1]], axis=1)


def write_corpus(root: Path, frames_per_scene: int = 20, scenes: int = 3,
                 source_id: str = "cam0", fps: float = 30.0,
                 h: int = 120, w: int = 160) -> Path:
    """Write a synthetic corpus directory plus manifest; returns the manifest path."""
    src = root / source_id
    src.mkdir(parents=True)
    i = 0
    for scene in range(scenes):
        for _ in range(frames_per_scene):
            Image.fromarray(scene_frame(scene, 1000 * scene + i, h, w)).save(
                src / f"frame_{i:08d}.png")
            i += 1
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps({
        "sources": [{"source_id": source_id, "path": source_id, "start": 0.0, "fps": fps}],
    }))
    return manifest


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> Path:
    """60-frame, 3-scene corpus shared across tests (manifest path)."""
    root = tmp_path_factory.mktemp("corpus60")
    return write_corpus(root)
