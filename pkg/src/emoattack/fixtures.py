"""Deterministic desk-scale fixtures: a 16x16 RGB image and a small
linear-softmax classifier that assigns the image high confidence on its
first label.  Both are shipped in-repo; this module can regenerate them
bit-identically (python -m emoattack.fixtures).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .imaging import Image, read_ppm, write_ppm
from .oracle import ACT_NONE, BuiltinOracle, load_builtin

FIXTURE_DIR = Path(__file__).parent / "fixtures"
FIXTURE_IMAGE = FIXTURE_DIR / "fixture_16x16.ppm"
FIXTURE_MODEL = FIXTURE_DIR / "fixture_model.aemlp"

FIXTURE_LABELS = ("frog", "deer", "truck", "cat")
FIXTURE_SIZE = 16
_WEIGHT_SEED = 20250823
_TARGET_MARGIN = 4.0


def build_fixture_image() -> Image:
    n = FIXTURE_SIZE
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    px, py = 2 * np.pi * xx / n, 2 * np.pi * yy / n
    r = 100 + 80 * np.sin(px) * np.cos(py)
    g = 120 + 50 * np.cos(px + py)
    b = 90 + 70 * np.sin(py)
    data = np.stack([r, g, b], axis=2)
    return Image(np.clip(np.rint(data), 0, 255))


def build_fixture_oracle() -> BuiltinOracle:
    rng = np.random.default_rng(_WEIGHT_SEED)
    x0 = build_fixture_image().data.reshape(-1)
    dim = x0.shape[0]
    w = rng.normal(0.0, 0.002, size=(len(FIXTURE_LABELS), dim))
    logits = w @ x0
    margin = logits[0] - np.max(logits[1:])
    # raise the first label's logit so the clean image scores >= 0.9
    w[0] += (_TARGET_MARGIN - margin) / (x0 @ x0) * x0
    bias = np.zeros(len(FIXTURE_LABELS))
    return BuiltinOracle(
        layers=[(w, bias, ACT_NONE)],
        labels=FIXTURE_LABELS,
        input_shape=(FIXTURE_SIZE, FIXTURE_SIZE, 3),
        model_id="aemlp:fixture",
    )


def write_fixtures(directory=FIXTURE_DIR) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    image_path = directory / FIXTURE_IMAGE.name
    model_path = directory / FIXTURE_MODEL.name
    write_ppm(build_fixture_image(), image_path)
    build_fixture_oracle().save(model_path)
    return image_path, model_path


def fixture_image() -> Image:
    if not FIXTURE_IMAGE.exists():
        write_fixtures()
    return read_ppm(FIXTURE_IMAGE)


def fixture_oracle(cache=False) -> BuiltinOracle:
    if not FIXTURE_MODEL.exists():
        write_fixtures()
    return load_builtin(FIXTURE_MODEL, cache=cache)


if __name__ == "__main__":
    img, mdl = write_fixtures()
    print(f"wrote {img}\nwrote {mdl}")
