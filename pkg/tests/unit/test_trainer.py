import csv
from pathlib import Path

import pytest
import torch

from config.settings import ModelConfig, TrainConfig, settings
from core.exceptions import (
    BadMagic,
    CorruptBlob,
    DivergenceDetected,
    EmptyDataset,
    IOFailure,
    VersionMismatch,
    WordTooLong,
)
from core.logger import get_logger
from models.recognizer import DecodeMode, build_model
from synth.dataset import Manifest, generate_dataset
from synth.render import DegradationRanges
from trainer.checkpoint import HEADER, MAGIC, load_checkpoint, save_checkpoint
from trainer.engine import METRICS_HEADER, TrainResult, Trainer
from trainer.evaluate import EvalReport, evaluate, run_evaluation, word_accuracy
from utils.image_io import load_grayscale, to_model_input

logger = get_logger()

DTYPE = torch.float64


def _sample_image(tiny_dataset: Manifest) -> torch.Tensor:
    return to_model_input(load_grayscale(tiny_dataset.image_path(0)), DTYPE).unsqueeze(0)


def _read_metrics(path: Path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(f))

# ==================== CHECKPOINTS ====================

@pytest.mark.smoke
class TestCheckpoint:

    def test_round_trip_reproduces_logits(self, trained_run: TrainResult, tiny_dataset, tmp_path):
        state = load_checkpoint(trained_run.checkpoint_path)
        model = state.build_model().eval()
        copy_path = save_checkpoint(state, tmp_path / "copy.bin")
        reloaded = load_checkpoint(copy_path).build_model().eval()

        image = _sample_image(tiny_dataset)
        with torch.no_grad():
            torch.testing.assert_close(model(image).slot_logits, reloaded(image).slot_logits, rtol=0, atol=0)
            torch.testing.assert_close(model(image).char_logits, reloaded(image).char_logits, rtol=0, atol=0)
        assert state.step == 3
        assert "torch" in state.rng_state and "loader" in state.rng_state
        logger.info("[TEST] ✅ Checkpoint round trip is bit-exact")

    def test_truncated_file(self, trained_run: TrainResult, tmp_path):
        blob = trained_run.checkpoint_path.read_bytes()
        for cut in (len(blob) - 10, HEADER.size - 4):
            path = tmp_path / f"cut_{cut}.bin"
            path.write_bytes(blob[:cut])
            with pytest.raises(CorruptBlob):
                load_checkpoint(path)

    def test_flipped_payload_byte(self, trained_run: TrainResult, tmp_path):
        blob = bytearray(trained_run.checkpoint_path.read_bytes())
        blob[HEADER.size + 100] ^= 0xFF
        path = tmp_path / "flipped.bin"
        path.write_bytes(bytes(blob))
        with pytest.raises(CorruptBlob):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "not_a_checkpoint.bin"
        path.write_bytes(b"PK\x03\x04" + b"\x00" * 64)
        with pytest.raises(BadMagic):
            load_checkpoint(path)

    def test_unknown_version(self, trained_run: TrainResult, tmp_path):
        blob = trained_run.checkpoint_path.read_bytes()
        _, _, length, digest = HEADER.unpack_from(blob)
        path = tmp_path / "future.bin"
        path.write_bytes(HEADER.pack(MAGIC, 99, length, digest) + blob[HEADER.size:])
        with pytest.raises(VersionMismatch):
            load_checkpoint(path)

    def test_mismatched_n(self, trained_run: TrainResult, tiny_model_config):
        other = ModelConfig(**{**tiny_model_config.model_dump(), "n_queries": 7})
        with pytest.raises(VersionMismatch):
            load_checkpoint(trained_run.checkpoint_path, expected=other)
        assert load_checkpoint(trained_run.checkpoint_path, expected=tiny_model_config).model_config == tiny_model_config

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOFailure):
            load_checkpoint(tmp_path / "absent.bin")

# ==================== TRAINING ====================

class TestTrainer:

    def test_metrics_log(self, trained_run: TrainResult):
        rows = _read_metrics(trained_run.metrics_path)
        assert tuple(rows[0]) == METRICS_HEADER
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
        for row in rows[1:]:
            det_char, det_pos, recog, total = map(float, row[1:])
            assert min(det_char, det_pos, recog) >= 0
            assert total == pytest.approx(det_char + det_pos + recog, rel=1e-6)
        assert trained_run.steps_run == 3

    def test_run_log(self, trained_run: TrainResult):
        run_log = trained_run.checkpoint_path.parent / settings.artifacts.RUN_LOG
        text = run_log.read_text(encoding="utf-8")
        assert "📉 step 0:" in text and "🏁 Training finished after 3 steps" in text
        attached = [getattr(h, "baseFilename", "") for h in logger.handlers]
        assert str(run_log.resolve()) not in attached

    def test_zero_steps_keeps_initialisation(self, tiny_model_config, tiny_dataset, tmp_path):
        cfg = TrainConfig(steps=0, batch_size=4, seed=5)
        result = Trainer(tiny_model_config, cfg, tmp_path, dtype=DTYPE).train(tiny_dataset)
        assert result.steps_run == 0 and result.history == []
        assert _read_metrics(result.metrics_path) == [list(METRICS_HEADER)]

        saved = load_checkpoint(result.checkpoint_path).model_state
        initial = build_model(tiny_model_config, seed=5).to(DTYPE).state_dict()
        for key, value in initial.items():
            torch.testing.assert_close(saved[key], value, rtol=0, atol=0)

    def test_same_seed_same_losses(self, tiny_model_config, tiny_dataset, tmp_path):
        cfg = TrainConfig(steps=4, batch_size=4, seed=11, checkpoint_every=0)
        first = Trainer(tiny_model_config, cfg, tmp_path / "a", dtype=DTYPE).train(tiny_dataset)
        second = Trainer(tiny_model_config, cfg, tmp_path / "b", dtype=DTYPE).train(tiny_dataset)
        assert first.history == second.history
        assert first.metrics_path.read_bytes() == second.metrics_path.read_bytes()
        logger.info(f"[TEST] ✅ Reproduced losses: {[h['total'] for h in first.history]}")

    def test_parameter_groups(self, tiny_model_config, tmp_path):
        cfg = TrainConfig(lr_backbone=3e-5, lr_transformer=2e-4)
        trainer = Trainer(tiny_model_config, cfg, tmp_path)
        groups = {g["name"]: g for g in trainer.optimizer.param_groups}
        assert groups["backbone"]["lr"] == 3e-5
        assert groups["transformer"]["lr"] == 2e-4
        backbone_ids = {id(p) for p in trainer.model.image_encoder.backbone.parameters()}
        assert {id(p) for p in groups["backbone"]["params"]} == backbone_ids
        assert not backbone_ids & {id(p) for p in groups["transformer"]["params"]}
        assert all(g["weight_decay"] == cfg.weight_decay for g in groups.values())

    def test_divergence_saves_last_good_state(self, tiny_model_config, tiny_dataset, tmp_path):
        trainer = Trainer(tiny_model_config, TrainConfig(steps=2, batch_size=4), tmp_path, dtype=DTYPE)
        with torch.no_grad():
            trainer.model.c2w.char_head.weight.fill_(float("nan"))
        with pytest.raises(DivergenceDetected) as info:
            trainer.train(tiny_dataset)
        assert info.value.step == 0
        assert info.value.checkpoint_path is not None and info.value.checkpoint_path.is_file()
        logger.info(f"[TEST] ✅ Divergence checkpoint: {info.value.checkpoint_path}")

    def test_non_finite_gradient_skips_update(self, tiny_model_config, tiny_dataset, tmp_path):
        trainer = Trainer(tiny_model_config, TrainConfig(steps=2, batch_size=4), tmp_path, dtype=DTYPE)
        head = trainer.model.c2w.char_head.weight
        before = head.detach().clone()
        head.register_hook(lambda grad: grad * float("inf"))
        with pytest.raises(DivergenceDetected, match="gradient norm") as info:
            trainer.train(tiny_dataset)
        assert info.value.step == 0
        torch.testing.assert_close(head.detach(), before, rtol=0, atol=0)
        saved = load_checkpoint(info.value.checkpoint_path).model_state["c2w.char_head.weight"]
        torch.testing.assert_close(saved, before, rtol=0, atol=0)

    def test_resume(self, tiny_model_config, tiny_dataset, tmp_path):
        first = Trainer(tiny_model_config, TrainConfig(steps=2, batch_size=4), tmp_path, dtype=DTYPE)
        checkpoint = first.train(tiny_dataset).checkpoint_path

        resumed = Trainer(tiny_model_config, TrainConfig(steps=4, batch_size=4), tmp_path, dtype=DTYPE)
        result = resumed.train(tiny_dataset, resume_from=checkpoint)
        assert result.steps_run == 2
        assert load_checkpoint(result.checkpoint_path).step == 4
        assert [int(r[0]) for r in _read_metrics(result.metrics_path)[1:]] == [0, 1, 2, 3]

    def test_empty_manifest(self, tiny_model_config, tmp_path):
        with pytest.raises(EmptyDataset):
            Trainer(tiny_model_config, TrainConfig(steps=1), tmp_path).train(Manifest(root=tmp_path))

    def test_word_without_ctc_path_rejected_before_training(self, tiny_model_config, tmp_path):
        manifest = generate_dataset(4, ["aaaa"], DegradationRanges(), seed=0, out_dir=tmp_path / "ds")
        run = tmp_path / "run"
        with pytest.raises(WordTooLong, match="needs 7 CTC slots"):
            Trainer(tiny_model_config, TrainConfig(steps=1, batch_size=4), run, dtype=DTYPE).train(manifest)
        assert not (run / settings.artifacts.METRICS).exists()

        cfg = TrainConfig(steps=1, batch_size=4, truncate_long_words=True)
        result = Trainer(tiny_model_config, cfg, run, dtype=DTYPE).train(manifest)
        assert result.steps_run == 1
        logger.info(f"[TEST] ✅ Truncated 'aaaa' trains: loss {result.final_loss:.4f}")

# ==================== EVALUATION ====================

class TestEvaluation:

    def test_word_accuracy_definition(self):
        assert word_accuracy(["cat", "dog"], ["cat", "dot"]) == 0.5
        assert word_accuracy(["CAT!"], ["cat"]) == 1.0

    def test_word_accuracy_empty(self):
        with pytest.raises(EmptyDataset):
            word_accuracy([], [])

    def test_empty_manifest(self, trained_run: TrainResult, tmp_path):
        (tmp_path / "manifest.txt").write_text("", encoding="utf-8")
        with pytest.raises(EmptyDataset):
            evaluate(trained_run.checkpoint_path, tmp_path)

    @pytest.mark.parametrize("mode", list(DecodeMode), ids=lambda m: m.value)
    def test_evaluate_checkpoint(self, trained_run: TrainResult, tiny_dataset, mode):
        accuracy = evaluate(trained_run.checkpoint_path, tiny_dataset.root, mode)
        assert 0.0 <= accuracy <= 1.0

    def test_report(self, trained_run: TrainResult, tiny_dataset):
        model = load_checkpoint(trained_run.checkpoint_path).build_model()
        report = run_evaluation(model, tiny_dataset, DecodeMode.I2C2W, batch_size=3)
        assert isinstance(report, EvalReport)
        assert report.total == len(tiny_dataset)
        assert [g for _, g in report.predictions] == tiny_dataset.transcriptions
        assert len(report.errors) == report.total - report.correct
        assert str(report).startswith("i2c2w ")

    def test_evaluation_does_not_mutate(self, trained_run: TrainResult, tiny_dataset):
        model = load_checkpoint(trained_run.checkpoint_path).build_model()
        model.train()
        before = {k: v.clone() for k, v in model.state_dict().items()}
        image = _sample_image(tiny_dataset)
        with model.inference():
            logits_before = model(image).slot_logits

        run_evaluation(model, tiny_dataset, DecodeMode.I2C_ONLY)
        run_evaluation(model, tiny_dataset, DecodeMode.I2C2W)

        assert model.training
        with model.inference():
            torch.testing.assert_close(model(image).slot_logits, logits_before, rtol=0, atol=0)
        for key, value in model.state_dict().items():
            torch.testing.assert_close(value, before[key], rtol=0, atol=0)
