from dataclasses import dataclass
from enum import IntEnum

import numpy as np

"""
Streams de ruido reproducibles.

Cada RngStream es (seed, stream_id) sobre Philox (generador por contador):
la misma pareja reproduce exactamente los mismos draws y streams distintos
son independientes. `child(...)` deriva sub-streams con nombre
(capa, paso, réplica) para compartir ε entre estimadores.
"""


class StreamKey(IntEnum):
    INIT = 0
    TRAIN = 1
    BATCH = 2
    VARIANCE = 3
    EVAL = 4
    SITE = 5
    NOISE = 6
    CHECK = 7
    DATA = 8


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: tuple[int, ...] = ()

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        """Generador nuevo posicionado al inicio del stream."""

        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(seq))


def sample_standard_normal(n: int | tuple[int, ...], rng: RngStream) -> np.ndarray:
    """n draws N(0, 1) independientes; deterministas para un RngStream fijo."""

    shape = (n,) if isinstance(n, int) else tuple(n)
    if not shape or min(shape) < 1:
        raise ValueError(f"n debe ser >= 1 (recibido {n})")
    return rng.generator().standard_normal(shape)
