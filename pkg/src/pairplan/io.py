"""File formats: PNG frames, raw float64 dumps with JSON headers, JSON docs."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def read_image(path) -> np.ndarray:
    """Load an image as float64 in [0, 1], ``(H, W, 3)``.

    ``.bin`` paths are read as raw dumps instead, keeping full precision.
    """
    path = Path(path)
    if path.suffix == ".bin":
        return read_dump(path)
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_png(path, color: np.ndarray) -> None:
    arr = np.clip(np.rint(np.asarray(color) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def header_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def write_dump(path, array: np.ndarray, **extra) -> None:
    """Write ``array`` as little-endian float64 plus a sidecar JSON header."""
    path = Path(path)
    array = np.ascontiguousarray(array, dtype="<f8")
    path.write_bytes(array.tobytes())
    header = {"dtype": "<f8", "shape": list(array.shape), **extra}
    header_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def read_dump(path) -> np.ndarray:
    path = Path(path)
    header = json.loads(header_path(path).read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f8")
    return data.reshape(header["shape"]).astype(np.float64)


def write_pyramid_dump(path, pyramid, meta: dict | None = None) -> None:
    """Concatenate every band of every level into one flat float64 file.

    The header lists, per entry, its level, band, shape and element offset.
    """
    path = Path(path)
    entries, chunks, offset = [], [], 0
    for level, bands in enumerate(pyramid.levels, start=1):
        for name, arr in bands.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            entries.append({"level": level, "band": name, "shape": list(arr.shape), "offset": offset})
            chunks.append(arr.ravel())
            offset += arr.size
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    path.write_bytes(flat.astype("<f8").tobytes())
    header = {"dtype": "<f8", "count": int(offset), "entries": entries, **(meta or {})}
    header_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def read_pyramid_dump(path) -> dict[int, dict[str, np.ndarray]]:
    path = Path(path)
    header = json.loads(header_path(path).read_text())
    flat = np.frombuffer(path.read_bytes(), dtype="<f8")
    out: dict[int, dict[str, np.ndarray]] = {}
    for e in header["entries"]:
        size = int(np.prod(e["shape"]))
        out.setdefault(e["level"], {})[e["band"]] = flat[e["offset"] : e["offset"] + size].reshape(e["shape"])
    return out


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
