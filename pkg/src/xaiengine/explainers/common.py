"""Glue between source-feature space (TabularBatch) and encoded model inputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import TabularBatch
from ..errors import SchemaError
from ..models.base import ModelHandle
from ..preprocessing import FittedTransform, identity_transform

DEFAULT_BATCH_SIZE = 4096


@dataclass(frozen=True)
class FeatureSpace:
    """A model seen through a fitted transform.

    Each source feature ``j`` owns the encoded columns ``groups[j]``; since
    every encoding is column-local, substituting a source value is the same
    as substituting its encoded block.
    """

    model: ModelHandle
    transform: FittedTransform
    batch_size: int = DEFAULT_BATCH_SIZE

    @property
    def names(self) -> list[str]:
        return self.transform.feature_names

    @property
    def groups(self):
        return self.transform.groups

    @property
    def d(self) -> int:
        return len(self.transform.stats)

    def encode(self, batch: TabularBatch) -> np.ndarray:
        return self.transform.transform(batch)

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        """Batched predict; never more than ``batch_size`` rows per call."""
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        if n <= self.batch_size:
            return self.model.predict(matrix)
        parts = [self.model.predict(matrix[i:i + self.batch_size]) for i in range(0, n, self.batch_size)]
        return np.vstack(parts)


def feature_space(model: ModelHandle, transform: FittedTransform | None, batch: TabularBatch,
                  batch_size: int = DEFAULT_BATCH_SIZE) -> FeatureSpace:
    if transform is None:
        transform = identity_transform(batch.schema)
    return FeatureSpace(model, transform, batch_size)


def single_instance(instance: TabularBatch) -> TabularBatch:
    if instance.n_rows != 1:
        raise SchemaError(f"expected one instance row, got {instance.n_rows}")
    return instance


def resolve_output(model: ModelHandle, prediction: np.ndarray, output: int | None) -> int:
    """Explained output: given index, else predicted class / the single output."""
    if output is not None:
        if not 0 <= output < model.n_outputs:
            raise ValueError(f"output index {output} out of range for {model.n_outputs} outputs")
        return int(output)
    if model.task == "classification":
        return int(np.argmax(prediction))
    return 0


def shown_values(instance: TabularBatch, names) -> list:
    row = instance.row(0)
    return [row[n] for n in names]
