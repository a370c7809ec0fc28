import numpy as np
import pytest

from jfs import dataio
from jfs.maskcore import LabelMap


def write_entry(root, image_id, labels, rng=None):
    """Write one image + label-map pair into a dataset tree."""
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    labels = np.asarray(labels, dtype=np.uint8)
    h, w = labels.shape
    rng = rng or np.random.default_rng(0)
    image = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    dataio.save_image_png(image, root / "images" / f"{image_id}.png")
    dataio.save_labelmap_png(LabelMap(labels), root / "labels" / f"{image_id}.png")


def write_split(root, split, ids):
    (root / "splits").mkdir(parents=True, exist_ok=True)
    (root / "splits" / f"{split}.txt").write_text("".join(f"{i}\n" for i in ids))


@pytest.fixture
def tiny_tree(tmp_path):
    """Six images; 'train' lists four of them. Classes vary per entry."""
    rng = np.random.default_rng(42)
    root = tmp_path / "data"
    layouts = {
        "a": [[0, 1], [1, 0]],
        "b": [[0, 3], [255, 0]],
        "c": [[2, 2], [2, 2]],
        "d": [[0, 0], [0, 0]],
        "e": [[1, 2], [3, 0]],
        "f": [[0, 255], [255, 0]],
    }
    for image_id, labels in layouts.items():
        write_entry(root, image_id, labels, rng)
    write_split(root, "train", ["a", "b", "c", "d"])
    write_split(root, "val", ["e", "f"])
    return root
