import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from mcfnet.resize import bilinear_resize, bilinear_resize_np, nearest_resize_np


def reference_bilinear(src: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Per-pixel evaluation of the four-neighbor interpolation formula."""
    sh, sw = src.shape
    th, tw = target
    out = np.zeros(target, dtype=np.float64)
    for y in range(th):
        sy = min(max((y + 0.5) * sh / th - 0.5, 0.0), sh - 1.0)
        i1 = int(np.floor(sy))
        i2 = min(i1 + 1, sh - 1)
        beta = sy - i1
        for x in range(tw):
            sx = min(max((x + 0.5) * sw / tw - 0.5, 0.0), sw - 1.0)
            j1 = int(np.floor(sx))
            j2 = min(j1 + 1, sw - 1)
            alpha = sx - j1
            out[y, x] = (
                (1 - alpha) * (1 - beta) * src[i1, j1]
                + alpha * (1 - beta) * src[i1, j2]
                + (1 - alpha) * beta * src[i2, j1]
                + alpha * beta * src[i2, j2]
            )
    return out


def test_identity_is_bit_equal():
    x = torch.rand(3, 2, 17, 23, dtype=torch.float64)
    out = bilinear_resize(x, (17, 23))
    assert torch.equal(out, x)


def test_center_sample_of_2x2():
    # downsampling [[0,2],[4,6]] to a single pixel lands at fractional
    # offsets 0.5/0.5: all four weights are 0.25, giving (0+2+4+6)/4 = 3
    src = torch.tensor([[0.0, 2.0], [4.0, 6.0]], dtype=torch.float64)
    out = bilinear_resize(src, (1, 1))
    assert out.shape == (1, 1)
    assert abs(float(out[0, 0]) - 3.0) < 1e-12


@pytest.mark.parametrize(
    "src_size,target",
    [((2, 2), (2, 2)), ((2, 2), (3, 5)), ((4, 7), (9, 3)), ((16, 16), (32, 32)),
     ((32, 32), (7, 7)), ((5, 5), (5, 5)), ((64, 48), (48, 64)), ((1, 1), (4, 4)),
     ((12, 20), (20, 12)), ((31, 9), (8, 33))],
)
def test_matches_reference_formula(src_size, target):
    rng = np.random.default_rng(hash(src_size + target) % 2**32)
    src = rng.normal(size=src_size)
    expected = reference_bilinear(src, target)
    out = bilinear_resize(torch.from_numpy(src), target).numpy()
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)


def test_256_to_224_stays_within_source_bounds():
    rng = np.random.default_rng(1)
    src = rng.normal(size=(256, 256))
    out = bilinear_resize_np(src, (224, 224))
    assert out.shape == (224, 224)
    assert out.min() >= src.min() - 1e-12
    assert out.max() <= src.max() + 1e-12


@given(
    h=st.integers(1, 12), w=st.integers(1, 12),
    th=st.integers(1, 12), tw=st.integers(1, 12),
    seed=st.integers(0, 2**16),
)
@settings(max_examples=60, deadline=None)
def test_output_is_convex_combination_of_source(h, w, th, tw, seed):
    rng = np.random.default_rng(seed)
    src = rng.normal(size=(h, w))
    out = bilinear_resize(torch.from_numpy(src), (th, tw)).numpy()
    assert out.shape == (th, tw)
    assert out.min() >= src.min() - 1e-12
    assert out.max() <= src.max() + 1e-12


def test_empty_target_rejected():
    with pytest.raises(ValueError):
        bilinear_resize(torch.zeros(4, 4), (0, 3))


def test_gradients_flow_through_resize():
    x = torch.rand(1, 2, 8, 8, requires_grad=True)
    bilinear_resize(x, (5, 11)).sum().backward()
    assert x.grad is not None
    assert float(x.grad.abs().sum()) > 0


def test_nearest_preserves_label_set():
    rng = np.random.default_rng(2)
    mask = rng.integers(0, 4, size=(37, 53)).astype(np.int16)
    out = nearest_resize_np(mask, (256, 256))
    assert set(np.unique(out)) <= set(np.unique(mask))
    # identity resize returns the same labels in place
    np.testing.assert_array_equal(nearest_resize_np(mask, mask.shape), mask)
