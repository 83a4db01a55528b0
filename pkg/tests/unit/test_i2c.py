from typing import Sequence

import numpy as np
import pytest
import torch
from torch.func import functional_call

from config.settings import ModelConfig
from core.charset import DEFAULT_CHARSET, char_index
from core.exceptions import ShapeMismatch
from core.logger import get_logger
from models.backbone import Backbone, BackboneConfig
from models.gradcheck import grad_check
from models.i2c import I2C, CharCandidate, ImageEncoder, candidates_from_logits, i2c_standalone_decode

logger = get_logger()

DTYPE = torch.float64
N_DEFAULT = 25


def _candidate(symbol: str, pos: int, prob: float, query: int = 0, n: int = N_DEFAULT) -> CharCandidate:
    """Candidate whose top character has probability ``prob`` (rest spread evenly)."""
    c = char_index(symbol)
    char_probs = np.full(DEFAULT_CHARSET.size, (1.0 - prob) / (DEFAULT_CHARSET.size - 1))
    char_probs[c] = prob
    pos_probs = np.full(n + 1, 0.01 / n)
    pos_probs[pos] = 0.99
    return CharCandidate(char_class=c, pos_class=pos, char_probs=char_probs, pos_probs=pos_probs, query_index=query)


def _decode(specs: Sequence[tuple]) -> str:
    return i2c_standalone_decode([_candidate(s, p, q, query=i) for i, (s, p, q) in enumerate(specs)])


@pytest.fixture(scope="module")
def default_encoder() -> ImageEncoder:
    torch.manual_seed(0)
    return ImageEncoder(ModelConfig()).double().eval()

# ==================== BACKBONE ====================

@pytest.mark.smoke
class TestBackbone:

    def test_default_shape(self):
        backbone = Backbone().eval()
        with torch.no_grad():
            out = backbone(torch.rand(2, 3, 32, 128))
        assert out.shape == (2, 128, 4, 16)
        assert backbone.cfg.downsample_factor == 8

    def test_zero_image_is_finite_and_deterministic(self):
        backbone = Backbone().eval()
        zero = torch.zeros(1, 3, 32, 128)
        with torch.no_grad():
            first, second = backbone(zero), backbone(zero)
        assert torch.isfinite(first).all()
        torch.testing.assert_close(first, second, rtol=0, atol=0)

    def test_identical_images_identical_features(self):
        backbone = Backbone().eval()
        image = torch.rand(1, 3, 32, 128)
        with torch.no_grad():
            out = backbone(torch.cat([image, image]))
        torch.testing.assert_close(out[0], out[1], rtol=0, atol=0)

    def test_rejects_grayscale(self):
        with pytest.raises(ShapeMismatch):
            Backbone()(torch.rand(1, 1, 32, 128))

    @pytest.mark.gradcheck
    def test_first_conv_gradient(self):
        torch.manual_seed(3)
        backbone = Backbone(BackboneConfig(stages=((2, 2),))).double().eval()
        image = torch.rand(1, 3, 6, 8, dtype=DTYPE)

        def op(weight):
            return functional_call(backbone, {"stages.0.0.weight": weight}, (image,))

        report = grad_check(op, [backbone.first_conv.weight.detach()])
        assert report.passed, report
        logger.info(f"[TEST] ✅ first conv kernel rel error {report.max_rel_error:.2e}")

# ==================== ENCODER ====================

class TestImageEncoder:

    def test_encoded_shape(self, default_encoder):
        with torch.no_grad():
            z_e = default_encoder(torch.rand(2, 3, 32, 128, dtype=DTYPE))
        assert z_e.shape == (2, 64, 128)

    def test_equivariant_without_positional_encoding(self, default_encoder):
        features = torch.rand(1, 128, 4, 16, dtype=DTYPE)
        perm = torch.randperm(64, generator=torch.Generator().manual_seed(5))
        with torch.no_grad():
            tokens = default_encoder.tokens(features)
            permuted = default_encoder.encoder(tokens[:, perm])
            reference = default_encoder.encode(features, positional=False)[:, perm]
        torch.testing.assert_close(permuted, reference, rtol=0, atol=1e-6)

    def test_attention_rows_sum_to_one(self, default_encoder):
        features = torch.rand(2, 128, 4, 16, dtype=DTYPE)
        with torch.no_grad():
            _, weights = default_encoder.encoder(default_encoder.tokens(features), default_encoder.pos_encoding,
                                                 need_weights=True)
        assert len(weights) == 3
        for w in weights:
            torch.testing.assert_close(w.sum(-1), torch.ones(2, 64, dtype=DTYPE), rtol=0, atol=1e-6)

# ==================== I2C DECODER ====================

class TestI2C:

    @pytest.fixture(scope="class")
    def i2c(self) -> I2C:
        torch.manual_seed(1)
        return I2C(ModelConfig()).double().eval()

    def test_default_shapes(self, i2c):
        with torch.no_grad():
            out = i2c(torch.randn(2, 64, 128, dtype=DTYPE))
        assert out.e_pc.shape == (2, 25, 128)
        assert out.e_pc_matrix.shape == (2, 128, 25)
        assert out.char_logits.shape == (2, 25, 37)
        assert out.pos_logits.shape == (2, 25, 26)
        assert out.cross_attention.shape == (2, 25, 64)
        assert tuple(i2c.char_queries.shape) == (128, 25)
        torch.testing.assert_close(out.cross_attention.sum(-1), torch.ones(2, 25, dtype=DTYPE), rtol=0, atol=1e-6)

    def test_identical_queries_identical_rows(self, i2c):
        column = torch.randn(128, 1, dtype=DTYPE)
        with torch.no_grad():
            out = i2c(torch.randn(1, 64, 128, dtype=DTYPE), queries=column.expand(128, 25))
        torch.testing.assert_close(out.char_logits[0], out.char_logits[0, :1].expand(25, 37), rtol=0, atol=1e-10)
        torch.testing.assert_close(out.pos_logits[0], out.pos_logits[0, :1].expand(25, 26), rtol=0, atol=1e-10)

    def test_probabilities_normalised(self, i2c):
        with torch.no_grad():
            out = i2c(torch.randn(1, 64, 128, dtype=DTYPE))
        for cand in candidates_from_logits(out.char_logits[0], out.pos_logits[0]):
            assert abs(cand.char_probs.sum() - 1) < 1e-6
            assert abs(cand.pos_probs.sum() - 1) < 1e-6

    @pytest.mark.gradcheck
    def test_head_gradients(self, tiny_model_config):
        torch.manual_seed(2)
        i2c = I2C(tiny_model_config).double().eval()
        z_e = torch.randn(1, 64, tiny_model_config.d_model, dtype=DTYPE)

        def op(char_w, pos_w):
            out = functional_call(i2c, {"char_head.weight": char_w, "pos_head.weight": pos_w}, (z_e,))
            return torch.cat([out.char_logits.flatten(), out.pos_logits.flatten()])

        report = grad_check(op, [i2c.char_head.weight.detach(), i2c.pos_head.weight.detach()])
        assert report.passed, report

# ==================== STANDALONE DECODE ====================

class TestStandaloneDecode:

    def test_filters_null_positions(self):
        assert _decode([("p", 0, 0.9), ("o", 1, 0.7), ("x", 25, 0.8)]) == "po"

    def test_all_null(self):
        null = np.full(37, 0.01 / 36)
        null[36] = 0.99
        pos = np.full(26, 0.01 / 25)
        pos[25] = 0.99
        candidates = [CharCandidate(36, 25, null, pos, q) for q in range(25)]
        assert i2c_standalone_decode(candidates) == ""

    def test_duplicate_position_keeps_most_probable(self):
        assert _decode([("r", 2, 0.6), ("n", 2, 0.4), ("p", 0, 0.9), ("o", 1, 0.8), ("t", 3, 0.9)]) == "port"
        logger.info("[TEST] ✅ duplicate r/n at position 2 resolved to 'r'")

    def test_tie_goes_to_lowest_query(self):
        assert _decode([("a", 0, 0.5), ("b", 0, 0.5)]) == "a"
        assert _decode([("b", 0, 0.5), ("a", 0, 0.5)]) == "b"

    def test_argmax_consistency_enforced(self):
        probs = np.full(37, 1 / 37)
        probs[3] = 0.5
        with pytest.raises(ValueError):
            CharCandidate(char_class=4, pos_class=0, char_probs=probs, pos_probs=np.eye(26)[0])
