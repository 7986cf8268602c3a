"""
Jerarquía de errores del laboratorio de gradientes.

La CLI traduce estas clases a códigos de salida y el router HTTP a status codes.
"""


class GradientLabError(Exception):
    """Raíz de todos los errores controlados."""


class DimensionMismatchError(GradientLabError, ValueError):
    def __init__(self, what: str, left: tuple, right: tuple):
        super().__init__(f"dimensiones incompatibles en {what}: {left} vs {right}")
        self.left = left
        self.right = right


class NonFiniteValueError(GradientLabError, ValueError):
    pass


class ConfigError(GradientLabError):
    pass


class MissingTraceError(GradientLabError):
    pass


class ArtifactWriteError(GradientLabError):
    def __init__(self, path: str, cause: Exception):
        super().__init__(f"no se pudo escribir {path}: {cause}")
        self.path = path


class NumericError(GradientLabError):
    """Fallo numérico (solver, varianza degenerada, gradiente no finito)."""


class CgBreakdownError(NumericError):
    def __init__(self, residual_norm: float, iteration: int):
        super().__init__(
            f"CG breakdown en la iteración {iteration}: pᵀAAᵀp ~ 0 con residuo {residual_norm:.3e}"
        )
        self.residual_norm = residual_norm
        self.iteration = iteration


class CgNonConvergenceError(NumericError):
    def __init__(self, residual_norm: float, iterations: int):
        super().__init__(
            f"CG non-convergence tras {iterations} iteraciones (residuo {residual_norm:.3e})"
        )
        self.residual_norm = residual_norm
        self.iterations = iterations


class DegenerateVarianceError(NumericError):
    pass


class OracleNonConvergenceError(NumericError):
    pass


class NonFiniteGradientError(NumericError):
    def __init__(self, step: int | None = None):
        where = f" en el paso {step}" if step is not None else ""
        super().__init__(f"gradiente no finito{where}; se aborta la actualización")
        self.step = step
