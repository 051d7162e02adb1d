import math

import pytest
import torch

from mcfnet.config import TrainConfig
from mcfnet.data import make_split, save_dataset, synth_dataset
from mcfnet.trainer import (
    LOG_COLUMNS,
    evaluate,
    load_checkpoint,
    lr_schedule,
    train,
)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data") / "synth"
    samples = synth_dataset(6, 3, 64, seed=11)
    split = make_split([s.case_id for s in samples], 0.67, seed=11)
    save_dataset(samples, split, root, classes=3)
    return root


def micro_cfg(synth_dir, tmp_path, **overrides) -> TrainConfig:
    base = dict(
        dataset=str(synth_dir),
        classes=3,
        image_size=64,
        fcb_image_size=48,
        arch="cascade",
        adaptive_mfa=True,
        channel_div=8,
        se_reduction=2,
        max_epochs=2,
        batch_size=2,
        seed=5,
        out_dir=str(tmp_path / "run"),
    )
    base.update(overrides)
    return TrainConfig(**base).validate()


# ---------------------------------------------------------------------------
# lr schedule
# ---------------------------------------------------------------------------

def test_schedule_starts_at_base_lr():
    assert lr_schedule(0, 0.001, 300) == 0.001


def test_schedule_halves_at_midpoint():
    assert abs(lr_schedule(150, 0.001, 300) - 0.0005) < 1e-12


def test_schedule_near_zero_at_end():
    assert lr_schedule(299, 0.001, 300) < 1e-7


def test_schedule_monotone_non_increasing():
    values = [lr_schedule(e, 0.001, 300) for e in range(300)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_schedule_rejects_out_of_range():
    with pytest.raises(ValueError):
        lr_schedule(300, 0.001, 300)
    with pytest.raises(ValueError):
        lr_schedule(-1, 0.001, 300)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def test_train_writes_log_and_checkpoints(synth_dir, tmp_path):
    result = train(micro_cfg(synth_dir, tmp_path))
    assert result.last_checkpoint.is_file()
    assert result.best_checkpoint.is_file()
    lines = result.log_path.read_text().splitlines()
    assert lines[0] == "\t".join(LOG_COLUMNS)
    assert len(lines) == 1 + result.epochs_run
    row = lines[1].split("\t")
    assert len(row) == len(LOG_COLUMNS)
    assert int(row[0]) == 0
    assert float(row[1]) == 0.001  # epoch-0 lr equals base lr
    assert math.isfinite(float(row[2]))
    for v in row[3:7]:  # set losses present under adaptive mode
        assert math.isfinite(float(v))


def test_seb_only_checkpoint_has_no_fcb_state(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, arch="seb", max_epochs=1)
    result = train(cfg)
    model, loaded_cfg, _, payload = load_checkpoint(result.last_checkpoint)
    assert loaded_cfg.arch == "seb"
    assert not any(k.startswith(("fcb", "lats", "cab")) for k in payload["model"])


def test_mfa_off_logs_nan_set_losses(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, adaptive_mfa=False, max_epochs=1)
    result = train(cfg)
    row = result.log_path.read_text().splitlines()[1].split("\t")
    assert math.isfinite(float(row[2]))
    assert all(math.isnan(float(v)) for v in row[3:7])
    # weights stay at initialization when adaptation is off
    assert all(float(v) == 0.25 for v in row[7:11])


def test_adaptive_weights_move_during_training(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, max_epochs=3)
    result = train(cfg)
    assert result.mfa_state.weights != (0.25, 0.25, 0.25, 0.25)
    assert abs(sum(result.mfa_state.weights) - 1.0) < 1e-6


def test_non_finite_loss_aborts_with_diagnostic(synth_dir, tmp_path, monkeypatch):
    import mcfnet.trainer as train_mod

    def poisoned(logits, labels, cfg):
        return (logits.sum() * 0) + float("nan")

    monkeypatch.setattr(train_mod, "segmentation_loss", poisoned)
    cfg = micro_cfg(synth_dir, tmp_path, adaptive_mfa=False, max_epochs=1)
    with pytest.raises(RuntimeError, match="non-finite loss"):
        train(cfg)
    assert "ABORT" in (tmp_path / "run" / "train_log.tsv").read_text()


def test_epoch_zero_loss_reproducible(synth_dir, tmp_path):
    a = train(micro_cfg(synth_dir, tmp_path, out_dir=str(tmp_path / "a"), max_epochs=1))
    b = train(micro_cfg(synth_dir, tmp_path, out_dir=str(tmp_path / "b"), max_epochs=1))
    loss_a = float(a.log_path.read_text().splitlines()[1].split("\t")[2])
    loss_b = float(b.log_path.read_text().splitlines()[1].split("\t")[2])
    assert abs(loss_a - loss_b) < 1e-4


def test_max_iterations_caps_training(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, max_epochs=50, max_iterations=3)
    result = train(cfg)
    assert result.iterations_run == 3


def test_dataset_class_mismatch_rejected(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, classes=5)
    with pytest.raises(ValueError, match="classes"):
        train(cfg)


# ---------------------------------------------------------------------------
# evaluation and checkpoints
# ---------------------------------------------------------------------------

def test_evaluate_untrained_is_total_and_finite(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, max_epochs=1)
    result = train(cfg)
    report = evaluate(result.last_checkpoint, synth_dir, partition="test")
    assert report.rows
    for row in report.rows:
        assert math.isfinite(row.dsc) and math.isfinite(row.hd95)
        assert 0.0 <= row.dsc <= 100.0


def test_checkpoint_round_trip_bit_identical_report(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, max_epochs=1)
    result = train(cfg)
    model_a, *_ = load_checkpoint(result.last_checkpoint)
    model_b, *_ = load_checkpoint(result.last_checkpoint)
    for (name, a), (_, b) in zip(
        model_a.state_dict().items(), model_b.state_dict().items()
    ):
        assert torch.equal(a, b), name
    first = evaluate(result.last_checkpoint, synth_dir, partition="test")
    second = evaluate(result.last_checkpoint, synth_dir, partition="test")
    assert first.to_text() == second.to_text()


def test_evaluate_rejects_class_mismatch(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, max_epochs=1)
    result = train(cfg)
    other = tmp_path / "other"
    samples = synth_dataset(4, 5, 64, seed=3)
    split = make_split([s.case_id for s in samples], 0.5, seed=3)
    save_dataset(samples, split, other, classes=5)
    with pytest.raises(ValueError, match="classes"):
        evaluate(result.last_checkpoint, other)


def test_checkpoint_fingerprint_matches_config(synth_dir, tmp_path):
    cfg = micro_cfg(synth_dir, tmp_path, max_epochs=1)
    result = train(cfg)
    _, loaded_cfg, _, payload = load_checkpoint(result.last_checkpoint)
    assert payload["config_fingerprint"] == loaded_cfg.fingerprint() == cfg.fingerprint()
