import pytest
import torch

from mcfnet.seb import SamGate, SEBlock, SebBackbone, SebConfig, gate_input

MICRO = SebConfig(
    encoder_channels=(2, 4, 8, 16, 32), decoder_channels=(32, 16, 8, 8), se_reduction=2
)


def test_forward_shapes_at_256():
    net = SebBackbone().eval()
    with torch.no_grad():
        out = net(torch.rand(2, 1, 256, 256))
    assert [tuple(s.shape) for s in out.skips] == [
        (2, 16, 256, 256), (2, 32, 128, 128), (2, 64, 64, 64), (2, 128, 32, 32)]
    assert [tuple(f.shape) for f in out.decoder_features] == [
        (2, 64, 256, 256), (2, 64, 128, 128), (2, 128, 64, 64), (2, 256, 32, 32)]
    assert tuple(out.s_output.shape) == (2, 1, 256, 256)
    assert tuple(out.gated_image.shape) == (2, 1, 256, 256)


def test_forward_accepts_224():
    net = SebBackbone(MICRO).eval()
    with torch.no_grad():
        out = net(torch.rand(1, 1, 224, 224))
    assert tuple(out.s_output.shape) == (1, 1, 224, 224)


def test_forward_rejects_non_divisible_size():
    net = SebBackbone(MICRO)
    with pytest.raises(ValueError, match="divisible"):
        net(torch.rand(1, 1, 250, 250))


def test_se_identity_gate_limit():
    block = SEBlock(8, reduction=4)
    with torch.no_grad():
        block.fc2.weight.zero_()
        block.fc2.bias.fill_(50.0)  # sigmoid saturates to ~1
    x = torch.rand(2, 8, 5, 5)
    assert torch.allclose(block(x), x, atol=1e-6)


def test_se_zero_input_gives_zero_output():
    block = SEBlock(8, reduction=4)
    x = torch.zeros(2, 8, 5, 5)
    assert torch.equal(block(x), x)


def test_se_gate_recomputed_by_hand():
    torch.manual_seed(0)
    block = SEBlock(8, reduction=4).eval()
    x = torch.rand(3, 8, 6, 6)
    out = block(x)
    pooled = x.mean(dim=(2, 3))
    hidden = torch.nn.functional.silu(pooled @ block.fc1.weight.T + block.fc1.bias)
    gate = torch.sigmoid(hidden @ block.fc2.weight.T + block.fc2.bias)
    assert ((gate > 0) & (gate < 1)).all()
    assert torch.allclose(out, x * gate[:, :, None, None], atol=1e-6)


def test_se_channels_not_divisible_rejected():
    with pytest.raises(ValueError):
        SEBlock(6, reduction=4)
    with pytest.raises(ValueError):
        SEBlock(2, reduction=4)


def test_sam_zero_params_give_half():
    gate = SamGate(1)
    with torch.no_grad():
        gate.proj.weight.zero_()
        gate.proj.bias.zero_()
    z = gate(torch.rand(2, 1, 4, 4))
    assert torch.allclose(z, torch.full_like(z, 0.5))


def test_sam_large_bias_saturates_toward_one():
    gate = SamGate(1)
    with torch.no_grad():
        gate.proj.weight.zero_()
        gate.proj.bias.fill_(12.0)
    z = gate(torch.rand(1, 1, 4, 4))
    assert (z > 0.99999).all()


def test_sam_matches_direct_formula():
    gate = SamGate(1)
    with torch.no_grad():
        gate.proj.weight.fill_(0.7)
        gate.proj.bias.fill_(-0.3)
    x = torch.tensor([[[[1.0, -2.0], [0.25, 3.0]]]])
    expected = torch.sigmoid(0.7 * x - 0.3)
    assert torch.allclose(gate(x), expected, atol=1e-6)


def test_sam_outputs_strictly_inside_unit_interval():
    torch.manual_seed(1)
    gate = SamGate(1)
    for _ in range(100):
        z = gate(torch.randn(1, 1, 8, 8))
        assert ((z > 0) & (z < 1)).all()


def test_gate_input_identity_and_annihilation():
    x = torch.rand(2, 1, 4, 4)
    assert torch.equal(gate_input(x, torch.ones(2, 1, 4, 4)), x)
    assert torch.equal(gate_input(x, torch.zeros(2, 1, 4, 4)), torch.zeros_like(x))


def test_gate_input_elementwise_product():
    x = torch.tensor([[[[1.0, 2.0], [3.0, 4.0]]]])
    z = torch.full((1, 1, 2, 2), 0.5)
    expected = torch.tensor([[[[0.5, 1.0], [1.5, 2.0]]]])
    assert torch.allclose(gate_input(x, z), expected)


def test_gate_input_never_amplifies():
    torch.manual_seed(2)
    gate = SamGate(1)
    x = torch.randn(4, 1, 16, 16)
    z = gate(x)
    assert (gate_input(x, z).abs() <= x.abs() + 1e-7).all()


def test_gate_input_spatial_mismatch_rejected():
    with pytest.raises(ValueError):
        gate_input(torch.rand(1, 1, 4, 4), torch.rand(1, 1, 3, 3))


def test_every_parameter_reaches_s_output():
    torch.manual_seed(3)
    net = SebBackbone(MICRO).train()
    out = net(torch.rand(2, 1, 32, 32))
    out.s_output.pow(2).sum().backward()
    for name, p in net.named_parameters():
        if name.startswith("sam."):
            continue  # the gate sits after s_output
        assert p.grad is not None and float(p.grad.abs().sum()) > 0, name


def test_eval_forward_is_deterministic():
    torch.manual_seed(4)
    net = SebBackbone(MICRO).eval()
    x = torch.rand(1, 1, 32, 32)
    with torch.no_grad():
        a = net(x)
        b = net(x)
    assert torch.equal(a.s_output, b.s_output)
    assert torch.equal(a.gated_image, b.gated_image)
