"""
Jerarquía de excepciones del analizador.

Dos familias, cada una asociada a un código de salida de la CLI:
- DataError (1): datos, esquema o especificación inválidos.
- NumericalError (2): fallos numéricos (sistema singular, no convergencia).
"""
from typing import Optional


class ReproLmmError(Exception):
    """Error base del paquete."""
    exit_code = 1


class DataError(ReproLmmError):
    """Errores de datos o de especificación (código de salida 1)."""
    exit_code = 1


class SchemaError(DataError):
    """El archivo no cumple el esquema (columna faltante, esquema mal formado)."""

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column


class ParseError(DataError):
    """Celda no numérica o vacía en una columna numérica."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyDataError(DataError):
    """Archivo o dataset sin filas."""


class UnknownFactorError(DataError):
    """Referencia a un factor o covariable no declarado."""


class ModelSpecError(DataError):
    """Fórmula o especificación de modelo inválida."""


class ColumnMismatchError(DataError):
    """Las columnas de X no coinciden con las del modelo ajustado."""


class NonNestedModelsError(DataError):
    """Los modelos comparados por la GLRT no están anidados."""


class DegenerateTestError(DataError):
    """La prueba no tiene grados de libertad (términos aliados)."""


class ZeroVarianceError(DataError):
    """Covariable con varianza cero (no se puede estandarizar)."""


class UndefinedReliabilityError(DataError):
    """Varianza total cero: el coeficiente de fiabilidad no está definido."""


class InfiniteEffectError(DataError):
    """Desviación combinada cero con medias distintas."""


class TextPropertyError(DataError):
    """Corpus vacío, texto vacío o texto faltante para un objeto."""


class ReportStructureError(DataError):
    """El dataset no tiene la estructura necesaria para el reporte."""


class SimulationSpecError(DataError):
    """Especificación de simulación inválida."""


class NumericalError(ReproLmmError):
    """Fallos numéricos (código de salida 2)."""
    exit_code = 2

    def __init__(self, message: str, condition_number: Optional[float] = None):
        super().__init__(message)
        self.condition_number = condition_number


class ConvergenceError(NumericalError):
    """El optimizador no convergió y el llamador exige convergencia."""
