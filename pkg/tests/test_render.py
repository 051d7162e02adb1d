import numpy as np

from mcfnet.data import SliceSample
from mcfnet.render import overlay_image, render_loss_curve, render_overlays


def _sample():
    image = np.zeros((32, 32), dtype=np.float32)
    mask = np.zeros((32, 32), dtype=np.uint8)
    mask[8:16, 8:16] = 1
    return SliceSample(image, mask, "case_000", 0)


def test_overlay_draws_gt_and_prediction_contours():
    pred = np.zeros((32, 32), dtype=np.int64)
    pred[10:20, 10:20] = 1
    rgb = overlay_image(_sample(), pred)
    assert rgb.shape == (32, 32, 3)
    assert rgb[8, 8, 1] > 0.8  # ground-truth contour is green
    assert rgb[19, 19, 0] > 0.8  # prediction contour is red


def test_overlay_with_empty_prediction_still_renders_gt():
    rgb = overlay_image(_sample(), np.zeros((32, 32), dtype=np.int64))
    assert rgb[8, 8, 1] > 0.8
    assert not (rgb[:, :, 0] > 0.8).any()  # no red anywhere


def test_render_overlays_writes_one_file_per_sample(tmp_path):
    samples = [_sample(), SliceSample(np.zeros((32, 32)), np.zeros((32, 32), np.uint8), "case_001", 2)]
    paths = render_overlays(samples, None, tmp_path)
    assert len(paths) == 2
    assert all(p.is_file() for p in paths)


def test_render_loss_curve(tmp_path):
    log = tmp_path / "train_log.tsv"
    header = "epoch\tlr\tloss\tl1\tl2\tl3\tl4\tw1\tw2\tw3\tw4\ttrain_dsc"
    rows = [
        f"{e}\t0.001\t{2.0 - 0.1 * e}\t1\t1\t1\t1\t0.25\t0.25\t0.25\t{0.25 + 0.01 * e}\t50.0"
        for e in range(5)
    ]
    log.write_text("\n".join([header, *rows]) + "\n")
    path = render_loss_curve(log, tmp_path / "out")
    assert path.is_file()
