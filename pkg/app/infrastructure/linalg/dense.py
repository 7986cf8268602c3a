import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.domain.errors import DimensionMismatchError, NonFiniteValueError

"""
Kernels densos (float64) compartidos por todos los estimadores.

DenseMatrix / DenseVector son ndarrays float64 validados (finitos, forma correcta).
Las operaciones aceptan un eje de lote inicial en el vector: x de forma (S, n).
"""

DenseMatrix = NDArray[np.float64]
DenseVector = NDArray[np.float64]


def as_matrix(data: ArrayLike, name: str = "A") -> DenseMatrix:
    """Convierte a matriz 2-D float64 y exige entradas finitas."""

    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} (se esperaba matriz)", arr.shape, ("rows", "cols"))
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contiene entradas no finitas")
    return arr


def as_vector(data: ArrayLike, name: str = "x") -> DenseVector:
    """Convierte a vector (o lote de vectores) float64 finito."""

    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"{name} contiene entradas no finitas")
    return arr


def matvec(A: ArrayLike, x: ArrayLike) -> DenseVector:
    """A·x con acumulación densa; x puede ser (n,) o (S, n)."""

    A = as_matrix(A)
    x = as_vector(x)
    if A.shape[1] != x.shape[-1]:
        raise DimensionMismatchError("matvec", A.shape, x.shape)
    return x @ A.T


def rmatvec(A: ArrayLike, y: ArrayLike) -> DenseVector:
    """Aᵀ·y; y puede ser (m,) o (S, m)."""

    A = as_matrix(A)
    y = as_vector(y, "y")
    if A.shape[0] != y.shape[-1]:
        raise DimensionMismatchError("rmatvec", A.shape, y.shape)
    return y @ A


def gram_matvec(A: ArrayLike, y: ArrayLike) -> DenseVector:
    """
    A·(Aᵀ·y) sin materializar AAᵀ.

    Sólo guarda el intermedio Aᵀy (tamaño n por sistema).
    """

    A = as_matrix(A)
    y = as_vector(y, "y")
    if A.shape[0] != y.shape[-1]:
        raise DimensionMismatchError("gram_matvec", A.shape, y.shape)
    return (y @ A) @ A.T
