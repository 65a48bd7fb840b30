import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import ForestConstants
from ..core.custom_exceptions import DimensionMismatchError


class ForestParams(BaseModel):
    """Random forest hyperparameters (stored in the model file)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_trees: int = Field(default=ForestConstants.DEFAULT_N_TREES, ge=1)
    max_depth: Optional[int] = Field(default=None, ge=1, description="None means unlimited")
    min_samples_leaf: int = Field(default=ForestConstants.DEFAULT_MIN_SAMPLES_LEAF, ge=1)
    mtry: Optional[int] = Field(default=None, ge=1, description="None means ceil(n_features / 3)")
    seed: int = Field(default=ForestConstants.DEFAULT_SEED, ge=0, le=ForestConstants.UINT64_MASK)
    bootstrap: bool = True

    def resolve_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            return max(1, math.ceil(n_features / ForestConstants.MTRY_DIVISOR))
        if self.mtry > n_features:
            raise DimensionMismatchError(f"mtry {self.mtry} exceeds the {n_features} available features")
        return self.mtry


class Tree(BaseModel):
    """Binary regression tree in flat node arrays; node 0 is the root.

    Leaves have feature == -1. ``in_bag`` is the hex-packed bootstrap
    membership bitmap of the training rows.
    """

    model_config = ConfigDict(frozen=True)

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]
    gain: list[float]
    in_bag: str

    @model_validator(mode="after")
    def validate_shape(self):
        n_nodes = len(self.feature)
        if n_nodes == 0:
            raise ValueError("tree has no nodes")
        if any(len(column) != n_nodes for column in (self.threshold, self.left, self.right, self.value, self.gain)):
            raise ValueError("tree node arrays differ in length")
        if not all(math.isfinite(v) for v in self.value):
            raise ValueError("tree leaf values must be finite")
        for node, feature in enumerate(self.feature):
            if feature == ForestConstants.LEAF:
                continue
            if not (node < self.left[node] < n_nodes and node < self.right[node] < n_nodes):
                raise ValueError(f"node {node} has invalid children")
        return self

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(feature, threshold, left, right, value) as numpy arrays for traversal."""
        return (
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64),
        )

    def in_bag_mask(self, n_samples: int) -> np.ndarray:
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(self.in_bag), dtype=np.uint8))
        return bits[:n_samples].astype(bool)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


class Forest(BaseModel):
    """Trained forest with its feature names and the size of its training set"""

    model_config = ConfigDict(frozen=True)

    trees: list[Tree]
    feature_names: list[str]
    n_samples: int = Field(..., ge=1)
    params: ForestParams

    @model_validator(mode="after")
    def validate_consistency(self):
        if len(self.trees) != self.params.n_trees:
            raise ValueError(f"forest holds {len(self.trees)} trees, params declare {self.params.n_trees}")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        n_features = len(self.feature_names)
        for tree in self.trees:
            if any(f >= n_features or f < ForestConstants.LEAF for f in tree.feature):
                raise ValueError("tree references a feature outside the forest's feature list")
        return self

    @property
    def n_features(self) -> int:
        return len(self.feature_names)
