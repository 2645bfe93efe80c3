"""Dataset directory layout: PNG rasters plus a JSON manifest.

Layout::

    <root>/images/<id>.png    8-bit grayscale or RGB
    <root>/masks/<id>.png     palette-indexed class ids
    <root>/manifest.json      ids, K, domain tag, generator hash

Images are quantised to 8 bits on save; loading divides by 255, so a
save/load round trip is deterministic (identical bytes in, identical arrays
out) though not lossless against the float originals.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .core import Image, LabelMask
from .errors import BadImage, ConfigError
from .synthetic import Sample

_PALETTE = [
    (0, 0, 0),
    (230, 60, 60),
    (60, 120, 230),
    (60, 200, 120),
    (230, 200, 60),
]


def image_to_png_bytes(image: Image) -> bytes:
    import io

    arr = np.round(image.pixels * 255.0).astype(np.uint8)
    if arr.shape[0] == 1:
        pil = PILImage.fromarray(arr[0], mode="L")
    elif arr.shape[0] == 3:
        pil = PILImage.fromarray(np.moveaxis(arr, 0, 2), mode="RGB")
    else:
        raise ConfigError("only 1- or 3-channel images can be written as PNG")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_image(data: bytes) -> Image:
    import io

    try:
        pil = PILImage.open(io.BytesIO(data))
        pil.load()
    except Exception as exc:
        raise BadImage(f"cannot decode image: {exc}")
    if pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB" if pil.mode in ("RGBA", "P", "CMYK") else "L")
    arr = np.asarray(pil, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = np.moveaxis(arr, 2, 0)
    return Image(arr)


def mask_to_png_bytes(mask: LabelMask) -> bytes:
    import io

    pil = PILImage.fromarray(mask.labels.astype(np.uint8), mode="P")
    palette = []
    for rgb in _PALETTE:
        palette.extend(rgb)
    pil.putpalette(palette + [0] * (768 - len(palette)))
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_mask(data: bytes, num_classes: int) -> LabelMask:
    import io

    pil = PILImage.open(io.BytesIO(data))
    if pil.mode != "P":
        pil = pil.convert("P")
    return LabelMask(np.asarray(pil, dtype=np.int64), num_classes)


def save_dataset(
    samples: list[Sample],
    root,
    num_classes: int,
    domain_tag: str = "source",
    spec_hash: str = "",
) -> None:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    ids = []
    h = w = None
    channels = None
    for sample in samples:
        ids.append(sample.image_id)
        (root / "images" / f"{sample.image_id}.png").write_bytes(
            image_to_png_bytes(sample.image)
        )
        (root / "masks" / f"{sample.image_id}.png").write_bytes(
            mask_to_png_bytes(sample.mask)
        )
        h, w = sample.image.height, sample.image.width
        channels = sample.image.channels
    manifest = {
        "v": 1,
        "ids": ids,
        "num_classes": num_classes,
        "domain": domain_tag,
        "height": h,
        "width": w,
        "image_channels": channels,
        "spec_hash": spec_hash,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise ConfigError(f"no manifest.json under {root}")
    manifest = json.loads(path.read_text())
    if manifest.get("v") != 1:
        raise ConfigError("unsupported manifest version")
    return manifest


def load_dataset(root) -> tuple[list[Sample], dict]:
    root = Path(root)
    manifest = load_manifest(root)
    k = int(manifest["num_classes"])
    samples = []
    for image_id in manifest["ids"]:
        img = png_bytes_to_image((root / "images" / f"{image_id}.png").read_bytes())
        mask = png_bytes_to_mask(
            (root / "masks" / f"{image_id}.png").read_bytes(), k
        )
        samples.append(Sample(image_id, img, mask))
    return samples, manifest
