from dataclasses import dataclass
from typing import Tuple

from torch import Tensor, nn

from core.base_module import BaseModule
from core.exceptions import ShapeMismatch


@dataclass(frozen=True)
class BackboneConfig:
    stages: Tuple[Tuple[int, int], ...] = ((32, 2), (64, 2), (128, 2), (128, 1))
    in_channels: int = 3

    @property
    def out_channels(self) -> int:
        return self.stages[-1][0]

    @property
    def downsample_factor(self) -> int:
        factor = 1
        for _, stride in self.stages:
            factor *= stride
        return factor


def _stage(in_ch: int, out_ch: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, kernel_size=3, stride=1, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class Backbone(BaseModule):
    """Small conv stack: 3×32×128 image -> C×4×16 features at the default strides."""

    def __init__(self, cfg: BackboneConfig = BackboneConfig()):
        super().__init__()
        self.cfg = cfg
        layers = []
        in_ch = cfg.in_channels
        for out_ch, stride in cfg.stages:
            layers.append(_stage(in_ch, out_ch, stride))
            in_ch = out_ch
        self.stages = nn.Sequential(*layers)

    @property
    def first_conv(self) -> nn.Conv2d:
        return self.stages[0][0]

    def forward(self, images: Tensor) -> Tensor:
        if images.dim() != 4 or images.shape[1] != self.cfg.in_channels:
            raise ShapeMismatch(f"Expected B×{self.cfg.in_channels}×H×W images, got {tuple(images.shape)}")
        return self.stages(images)
