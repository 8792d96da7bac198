"""
Residual network body shared by the digit classifier and the inverse mapper.

The full-scale architecture is the 18-layer residual network (four stages of two basic
blocks, widths 64/128/256/512) adapted to one-channel spectrogram input. Toy profiles use
narrower stages and a compact stem; every variant exposes one feature tap per stage.
"""

from torch import nn
from torchvision.models.resnet import BasicBlock, conv1x1


class ResidualBody(nn.Module):
    """
    Stem plus residual stages; returns the output of every stage.

    Arguments:
        * `architecture` (ResidualArchitecture)
        * `in_channels` (int): 1 for spectrograms.
    """

    def __init__(self, architecture, in_channels=1):
        super().__init__()
        self.architecture = architecture
        first = architecture.stage_widths[0]
        if architecture.stem == 'imagenet':
            self.stem = nn.Sequential(
                nn.Conv2d(in_channels, first, kernel_size=7, stride=2, padding=3, bias=False),
                nn.BatchNorm2d(first),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(kernel_size=3, stride=2, padding=1),
            )
        else:
            self.stem = nn.Sequential(
                nn.Conv2d(in_channels, first, kernel_size=3, stride=1, padding=1, bias=False),
                nn.BatchNorm2d(first),
                nn.ReLU(inplace=True),
            )

        stages = []
        inplanes = first
        for index, width in enumerate(architecture.stage_widths):
            stride = 1 if index == 0 else 2
            stages.append(self._make_stage(inplanes, width, architecture.blocks_per_stage, stride))
            inplanes = width
        self.stages = nn.ModuleList(stages)
        self.out_features = inplanes
        self.pool = nn.AdaptiveAvgPool2d((1, 1))

        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_normal_(module.weight, mode='fan_out', nonlinearity='relu')
            elif isinstance(module, nn.BatchNorm2d):
                nn.init.constant_(module.weight, 1)
                nn.init.constant_(module.bias, 0)

    @staticmethod
    def _make_stage(inplanes, planes, blocks, stride):
        downsample = None
        if stride != 1 or inplanes != planes:
            downsample = nn.Sequential(conv1x1(inplanes, planes, stride), nn.BatchNorm2d(planes))
        layers = [BasicBlock(inplanes, planes, stride, downsample)]
        layers.extend(BasicBlock(planes, planes) for _ in range(1, blocks))
        return nn.Sequential(*layers)

    @property
    def tap_names(self):
        return ['stage{}'.format(index + 1) for index in range(len(self.stages))]

    def forward(self, x):
        """
        Return (pooled feature vector, list of per-stage activations).
        """
        x = self.stem(x)
        taps = []
        for stage in self.stages:
            x = stage(x)
            taps.append(x)
        return self.pool(x).flatten(1), taps
