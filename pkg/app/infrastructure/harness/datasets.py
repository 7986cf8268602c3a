from dataclasses import dataclass
from enum import Enum

import numpy as np

from app.infrastructure.gaussian.rng import RngStream, StreamKey
from app.infrastructure.nets.losses import Batch

"""
Datasets sintéticos 2-D reproducibles (sustituto de MNIST a escala de escritorio).

  BLOBS      dos clases gaussianas N(±c·u, I), u = (1, 1)/√2, c = separation
  XOR_RINGS  radio 1 ó 1 + separation/2 (más ruido); clase = anillo XOR (x₀ > 0)
  LINREG     y = Xw + b + noise·N(0, 1) con w, b fijados por la seed

Con `separation` = 4 cada centro de BLOBS está a 4σ de la frontera de Bayes.
"""


class DatasetKind(str, Enum):
    BLOBS = "blobs"
    XOR_RINGS = "xor_rings"
    LINREG = "linreg"


@dataclass(frozen=True)
class SyntheticDataset:
    kind: DatasetKind
    inputs: np.ndarray
    targets: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return len(self.inputs)

    @property
    def is_classification(self) -> bool:
        return self.kind is not DatasetKind.LINREG

    def batch(self, indices: np.ndarray | None = None) -> Batch:
        if indices is None:
            return Batch(inputs=self.inputs, targets=self.targets)
        return Batch(inputs=self.inputs[indices], targets=self.targets[indices])


def make_synthetic_dataset(
    kind: DatasetKind,
    n: int,
    seed: int,
    separation: float = 4.0,
    noise: float = 0.1,
) -> SyntheticDataset:
    if n < 10:
        raise ValueError(f"n debe ser >= 10 (recibido {n})")
    kind = DatasetKind(kind)
    gen = RngStream(seed).child(StreamKey.DATA, list(DatasetKind).index(kind)).generator()

    if kind is DatasetKind.BLOBS:
        labels = gen.permutation(np.arange(n) % 2)
        centre = separation * np.array([1.0, 1.0]) / np.sqrt(2.0)
        sign = np.where(labels == 1, 1.0, -1.0)[:, None]
        inputs = sign * centre + gen.standard_normal((n, 2))
        return SyntheticDataset(kind, inputs, labels.astype(np.int64), seed)

    if kind is DatasetKind.XOR_RINGS:
        ring = gen.permutation(np.arange(n) % 2)
        angle = gen.uniform(0.0, 2.0 * np.pi, n)
        radius = 1.0 + 0.5 * separation * ring + noise * gen.standard_normal(n)
        inputs = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
        labels = ring ^ (inputs[:, 0] > 0).astype(np.int64)
        return SyntheticDataset(kind, inputs, labels.astype(np.int64), seed)

    w = gen.standard_normal(2)
    b = gen.standard_normal()
    inputs = gen.standard_normal((n, 2))
    targets = inputs @ w + b + noise * gen.standard_normal(n)
    return SyntheticDataset(kind, inputs, targets, seed)
