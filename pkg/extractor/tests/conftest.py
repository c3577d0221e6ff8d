import numpy as np
import pytest
from PIL import Image

CSV_TEXT = """path,subject,true_label,disguised_label,frame_type
a.png,1,0,2,onset
b.png,1,3,1,apex
sub/c.png,2,4,0,Apex
d.png,3,5,2,ONSET
"""

# (path, subject, true, disguised, frame) in CSV order
EXPECTED_ROWS = [
    ("a.png", 1, 0, 2, 0),
    ("b.png", 1, 3, 1, 1),
    ("sub/c.png", 2, 4, 0, 1),
    ("d.png", 3, 5, 2, 0),
]


def _write_image(path, seed: int, mode: str = "RGB") -> None:
    rng = np.random.default_rng(seed)
    grid = rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8)
    img = Image.fromarray(grid, "RGB")
    if mode != "RGB":
        img = img.convert(mode)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path)


@pytest.fixture(scope="session")
def image_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("images")
    _write_image(root / "a.png", seed=10)
    _write_image(root / "b.png", seed=11)
    _write_image(root / "sub" / "c.png", seed=12)
    _write_image(root / "d.png", seed=13, mode="L")  # grayscale, converted on load
    return root


@pytest.fixture(scope="session")
def label_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("labels") / "labels.csv"
    path.write_text(CSV_TEXT, encoding="utf-8")
    return path
