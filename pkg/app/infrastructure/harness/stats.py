from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from app.domain.errors import DimensionMismatchError
from app.infrastructure.linalg.dense import DenseVector

"""
Estadísticos Monte Carlo por coordenada de un estimador de gradiente.
"""


@dataclass(frozen=True)
class EstimatorStats:
    mean: DenseVector
    variance: DenseVector
    se_mean: DenseVector
    se_variance: DenseVector
    count: int
    estimator_id: str
    site: str = ""

    @classmethod
    def from_samples(cls, samples: ArrayLike, estimator_id: str, site: str = "") -> "EstimatorStats":
        """samples: (S, d) con un gradiente por fila; varianza insesgada (ddof=1)."""

        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise DimensionMismatchError("EstimatorStats", x.shape, ("S>=2", "d"))
        n = x.shape[0]
        mean = x.mean(axis=0)
        centred = x - mean
        var = np.sum(centred * centred, axis=0) / (n - 1)
        m4 = np.mean(centred ** 4, axis=0)
        # error estándar de la varianza muestral (momento central de orden 4)
        var_of_var = np.maximum(m4 - var * var * (n - 3) / (n - 1), 0.0) / n
        return cls(
            mean=mean,
            variance=var,
            se_mean=np.sqrt(var / n),
            se_variance=np.sqrt(var_of_var),
            count=n,
            estimator_id=str(estimator_id),
            site=site,
        )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def z_scores(self, truth: ArrayLike, atol: float = 1e-12) -> DenseVector:
        """
        (media − verdad)/SE por coordenada.

        Coordenadas con SE ≤ atol·max(1, |verdad|) (estimador determinista en esa
        coordenada, salvo redondeo) dan 0 si coinciden con la verdad dentro de esa
        misma tolerancia e ∞ si no.
        """

        truth = np.asarray(truth, dtype=np.float64)
        if truth.shape != self.mean.shape:
            raise DimensionMismatchError("z_scores", self.mean.shape, truth.shape)
        diff = self.mean - truth
        tol = atol * np.maximum(1.0, np.abs(truth))
        deterministic = self.se_mean <= tol
        safe_se = np.where(deterministic, 1.0, self.se_mean)
        return np.where(deterministic, np.where(np.abs(diff) <= tol, 0.0, np.inf), diff / safe_se)

    def mean_variance(self, sl: slice = slice(None)) -> float:
        return float(np.mean(self.variance[sl]))

    def as_dict(self) -> dict:
        return {
            "estimator": self.estimator_id,
            "site": self.site,
            "count": self.count,
            "mean": self.mean.tolist(),
            "variance": self.variance.tolist(),
            "se_mean": self.se_mean.tolist(),
            "se_variance": self.se_variance.tolist(),
        }


def variance_dominated(low: EstimatorStats, high: EstimatorStats, slack_se: float) -> np.ndarray:
    """Máscara por coordenada de var(low) ≤ var(high) + slack·√(se_low² + se_high²)."""

    if low.dim != high.dim:
        raise DimensionMismatchError("variance_dominated", (low.dim,), (high.dim,))
    pooled = np.sqrt(low.se_variance ** 2 + high.se_variance ** 2)
    return low.variance <= high.variance + slack_se * pooled
