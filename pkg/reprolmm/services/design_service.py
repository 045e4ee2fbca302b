"""
Servicio de construcción de matrices de diseño.

Codificación de tratamiento: el primer nivel (primera aparición) de cada
factor es la referencia, de modo que el intercepto es la media de la
referencia y cada columna indicadora es la desviación respecto a ella.
"""
import logging
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from reprolmm.errors import ColumnMismatchError, UnknownFactorError, ZeroVarianceError
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.design import DesignMatrices, ScalingRecord
from reprolmm.models.model_spec import ModelSpec

logger = logging.getLogger(__name__)

INTERCEPT_NAME = '(Intercept)'
DEFAULT_ALIAS_TOL = 1e-7


def factor_column_name(factor: str, level: str) -> str:
    return f"{factor}[T.{level}]"


def _variable_columns(ds: EvalDataset, name: str, full_rank: bool) -> List[Tuple[str, np.ndarray]]:
    """Columnas codificadas de una variable (factor o covariable)."""
    if ds.has_factor(name):
        codes = ds.codes(name)
        levels = ds.levels(name)
        start = 0 if full_rank else 1
        return [
            (factor_column_name(name, level) if not full_rank else f"{name}[{level}]",
             (codes == i).astype(float))
            for i, level in enumerate(levels) if i >= start
        ]
    if ds.has_covariate(name):
        return [(name, np.asarray(ds.covariate(name), dtype=float))]
    raise UnknownFactorError(f"Columna desconocida en la fórmula: '{name}'")


def _expand_fixed(ds: EvalDataset, spec: ModelSpec) -> List[Tuple[str, np.ndarray]]:
    """Expande los términos fijos en columnas (nombre, vector)."""
    n = len(ds)
    columns: List[Tuple[str, np.ndarray]] = []
    if spec.intercept:
        columns.append((INTERCEPT_NAME, np.ones(n)))
    full_rank_used = spec.intercept
    for term in spec.terms:
        parts = []
        for var in term.variables:
            # Sin intercepto, el primer efecto principal de factor usa todos sus niveles
            full_rank = (not full_rank_used and len(term.variables) == 1
                         and ds.has_factor(var))
            if full_rank:
                full_rank_used = True
            parts.append(_variable_columns(ds, var, full_rank))
        for combo in product(*parts):
            name = ':'.join(c[0] for c in combo)
            values = combo[0][1].copy()
            for _, v in combo[1:]:
                values = values * v
            columns.append((name, values))
    return columns


def find_aliased(X: np.ndarray, tol: float = DEFAULT_ALIAS_TOL) -> List[int]:
    """
    Índices de columnas aliadas (combinación lineal de columnas anteriores).

    QR sin pivoteo: |R_jj| es la norma de la parte de x_j ortogonal a las
    columnas previas, así que una columna se descarta cuando esa norma es
    despreciable relativa a ||x_j||. Equivale a un pivoteo limitado que
    mueve las columnas aliadas al final, conservando el orden del resto.
    """
    if X.shape[1] == 0:
        return []
    norms = np.linalg.norm(X, axis=0)
    R = np.linalg.qr(X, mode='r')
    diag = np.abs(np.diag(R))
    aliased = []
    for j in range(X.shape[1]):
        if norms[j] == 0.0 or diag[j] <= tol * norms[j]:
            aliased.append(j)
    return aliased


def build_design(
    ds: EvalDataset,
    spec: ModelSpec,
    columns: Optional[Sequence[str]] = None,
    alias_tol: float = DEFAULT_ALIAS_TOL,
) -> DesignMatrices:
    """
    Construye X y los bloques de Z a partir de la especificación.

    Args:
        ds: Dataset de evaluación
        spec: Especificación del modelo (debe ser válida contra ds)
        columns: Si se indica, selecciona exactamente estas columnas de X en
            este orden (predicción sobre datos nuevos); no se detecta aliasing
        alias_tol: Tolerancia relativa para descartar columnas aliadas

    Returns:
        DesignMatrices
    """
    spec.validate(ds)
    expanded = _expand_fixed(ds, spec)
    names = [name for name, _ in expanded]
    if expanded:
        X = np.column_stack([v for _, v in expanded])
    else:
        X = np.zeros((len(ds), 0))

    dropped: List[str] = []
    if columns is not None:
        index = {name: j for j, name in enumerate(names)}
        missing = [c for c in columns if c not in index]
        if missing:
            raise ColumnMismatchError(f"Columnas ausentes en el diseño nuevo: {', '.join(missing)}")
        X = X[:, [index[c] for c in columns]]
        names = list(columns)
    else:
        aliased = find_aliased(X, alias_tol)
        if aliased:
            dropped = [names[j] for j in aliased]
            keep = [j for j in range(len(names)) if j not in set(aliased)]
            X = X[:, keep]
            names = [names[j] for j in keep]
            logger.warning(f"Columnas aliadas descartadas en '{spec}': {', '.join(dropped)}")

    fixed_factors = [v for v in spec.variables if ds.has_factor(v)]
    return DesignMatrices(
        X=np.ascontiguousarray(X),
        column_names=names,
        random_factors=list(spec.random_factors),
        z_codes=[ds.codes(f) for f in spec.random_factors],
        z_levels=[ds.levels(f) for f in spec.random_factors],
        dropped_columns=dropped,
        factor_levels={f: ds.levels(f) for f in fixed_factors},
        covariate_names=[v for v in spec.variables if ds.has_covariate(v)],
    )


def standardize_covariates(ds: EvalDataset, names: Sequence[str]) -> Tuple[EvalDataset, ScalingRecord]:
    """
    Estandariza covariables (z-score, desviación con denominador n-1).

    Args:
        ds: Dataset
        names: Covariables a estandarizar

    Returns:
        Tupla (dataset_estandarizado, registro_de_escala)
    """
    record = ScalingRecord()
    values: Dict[str, np.ndarray] = {}
    for name in names:
        x = ds.covariate(name)
        if x.shape[0] < 2:
            raise ZeroVarianceError(f"La covariable '{name}' necesita al menos 2 filas")
        mean = float(np.mean(x))
        sd = float(np.std(x, ddof=1))
        if not sd > 0.0:
            raise ZeroVarianceError(f"La covariable '{name}' tiene varianza cero")
        values[name] = (x - mean) / sd
        record.params[name] = (mean, sd)
    if not values:
        return ds, record
    return ds.with_covariates(values), record


def interaction_covariates(ds: EvalDataset, spec: ModelSpec) -> List[str]:
    """Covariables que aparecen en algún término de interacción."""
    return [v for v in spec.variables if ds.has_covariate(v) and spec.has_interaction_with(v)]


def auto_standardize(ds: EvalDataset, spec: ModelSpec, enabled: Optional[bool] = None
                     ) -> Tuple[EvalDataset, ScalingRecord]:
    """
    Estandarización por defecto: activa en modelos con interacciones de covariables.
    Las covariables constantes se dejan sin tocar (su aliasing se resuelve en el diseño).
    """
    if enabled is None:
        names = interaction_covariates(ds, spec)
    elif enabled:
        names = [v for v in spec.variables if ds.has_covariate(v)]
    else:
        names = []
    usable = []
    for name in names:
        x = ds.covariate(name)
        if x.shape[0] > 1 and np.std(x, ddof=1) > 0.0:
            usable.append(name)
        else:
            logger.warning(f"Covariable '{name}' constante: no se estandariza")
    return standardize_covariates(ds, usable)
