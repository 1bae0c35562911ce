"""The full two-branch segmenter."""

from __future__ import annotations

import logging

import numpy as np

from spillseg.config.schema.models import GlobalConfig
from spillseg.core.errors import ShapeError
from spillseg.core.tensor import ParamStore, Tensor, as_tensor
from spillseg.models.base import Branch
from spillseg.models.deeplab import DeepLabBranch
from spillseg.models.fusion import FusionHead, binarize
from spillseg.models.segnet import SegNetBranch

logger = logging.getLogger(__name__)

BRANCH_TYPES: dict[str, type[Branch]] = {
    "segnet": SegNetBranch,
    "deeplab": DeepLabBranch,
}


class FusionSegmenter:
    """Enabled branches run independently on the same input; the fusion
    head turns their concatenated features into a spill probability map."""

    def __init__(self, config: GlobalConfig | None = None):
        self.config = config or GlobalConfig()
        section = {"segnet": self.config.segnet, "deeplab": self.config.deeplab}
        self.branches: dict[str, Branch] = {
            name: BRANCH_TYPES[name](section[name]) for name in self.config.fusion.branches
        }
        self.head = FusionHead(
            self.config.fused_channels, self.config.fusion.r, self.config.fusion.attention
        )

    @property
    def threshold(self) -> float:
        return self.config.fusion.threshold

    def init_params(self, rng: np.random.Generator | int | None = None) -> ParamStore:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(self.config.train.seed if rng is None else rng)
        params = ParamStore()
        for branch in self.branches.values():
            branch.init_params(params, rng)
        self.head.init_params(params, rng)
        logger.debug("initialised %d tensors (%d values)", len(params), params.num_elements())
        return params

    def check_input(self, x: Tensor) -> None:
        _, _, h, w = x.shape
        divisor = self.config.spatial_divisor
        if h % divisor or w % divisor:
            raise ShapeError(
                f"input of size {h}x{w} is not divisible by {divisor}; "
                "resize the tile first"
            )

    def forward(self, x, params: ParamStore) -> Tensor:
        x = as_tensor(x)
        self.check_input(x)
        features = [branch.forward(x, params) for branch in self.branches.values()]
        return self.head.forward(features, params)

    def backward(self, dprob, params: ParamStore) -> Tensor:
        dfeatures = self.head.backward(dprob, params)
        dx = None
        for branch, grad in zip(self.branches.values(), dfeatures):
            g = branch.backward(grad, params)
            dx = g if dx is None else dx + g
        return dx

    def predict(self, x, params: ParamStore) -> tuple[Tensor, np.ndarray]:
        prob = self.forward(x, params)
        return prob, binarize(prob, self.threshold)
