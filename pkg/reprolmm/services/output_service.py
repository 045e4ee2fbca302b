"""
Servicio de salida: JSON determinista con versión de esquema y eco de la
configuración, CSV de rejillas de interacción y tablas legibles.
"""
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from reprolmm.models.results import FittedModel, GlrtResult, InteractionGrid, VcaReport
from reprolmm.services.dataset_service import atomic_write
from reprolmm.services.lmem_service import interaction_grid

logger = logging.getLogger(__name__)

GRID_COLUMNS = ('covariate_value', 'level', 'predicted_score')


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON no admite inf/nan
        return value if math.isfinite(value) else None
    return value


def to_json(payload: dict, schema_version: str, config: Optional[dict] = None) -> str:
    """
    Serializa con claves ordenadas; dos ejecuciones idénticas producen bytes idénticos.

    Args:
        payload: Resultado
        schema_version: Versión del esquema de salida
        config: Configuración resuelta (eco de procedencia)
    """
    document = dict(payload)
    document['schema_version'] = schema_version
    if config is not None:
        document['config'] = config
    return json.dumps(_jsonable(document), sort_keys=True, indent=2, ensure_ascii=False) + '\n'


def write_output(text: str, path: Union[str, Path, None] = None) -> Optional[Path]:
    """Escritura atómica si hay destino; None indica salida estándar."""
    if path is None or str(path) == '-':
        return None
    atomic_write(path, text)
    logger.info(f"Salida escrita en {path}")
    return Path(path)


def grid_to_csv(grid: InteractionGrid) -> str:
    """CSV (covariate_value, level, predicted_score), nivel por nivel."""
    frame = pd.DataFrame(list(grid.rows()), columns=list(GRID_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n')


def emit_interaction_grid(fm: FittedModel, covariate: str, grid: int = 50,
                          path: Union[str, Path, None] = None) -> str:
    """
    Evalúa la rejilla de predicciones del modelo y la emite como CSV.

    Raises:
        DataError: la covariable no está en el modelo
    """
    text = grid_to_csv(interaction_grid(fm, covariate, grid))
    write_output(text, path)
    return text


def format_table(header: Sequence[str], rows: List[Sequence[Any]]) -> str:
    """Tabla de texto alineada (mismos números que el JSON, redondeados para lectura)."""
    cells = [[str(h) for h in header]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = io.StringIO()
    for idx, row in enumerate(cells):
        out.write('  '.join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + '\n')
        if idx == 0:
            out.write('  '.join('-' * w for w in widths) + '\n')
    return out.getvalue()


def _cell(value: Any) -> str:
    if value is None:
        return '-'
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def vca_table(report: VcaReport) -> str:
    """Tabla con columnas componente, varianza y porcentaje (1 decimal), más phi."""
    rows = [(c.name, f"{c.variance:.5f}", f"{c.percent:.1f}") for c in report.components]
    text = format_table(('component', 'variance', 'percent'), rows)
    text += f"\nphi = {report.phi:.3f} ({report.interpretation})"
    if report.verdict:
        text += f"; threshold {report.threshold:g}: {report.verdict}"
    return text + '\n'


def glrt_table(result: GlrtResult) -> str:
    rows = [
        ('stat', result.stat),
        ('df', result.df),
        ('p_value', result.p_value),
        ('lambda_ratio', result.lambda_ratio),
        ('effect_size', result.effect_size),
        ('converged', result.converged),
    ]
    rows += [(f"mean[{level}]", mean) for level, mean in result.means.items()]
    if result.dropped_columns:
        rows.append(('dropped', ', '.join(result.dropped_columns)))
    return format_table(('quantity', 'value'), rows)


def fit_table(fm: FittedModel) -> str:
    rows = [(name, value) for name, value in fm.coefficients().items()]
    text = format_table(('term', 'estimate'), rows)
    comps = [(name, value) for name, value in fm.sigma2.items()]
    text += '\n' + format_table(('component', 'variance'), comps)
    text += (f"\n{fm.criterion} log-likelihood = {fm.log_likelihood:.6f}; "
             f"AIC = {fm.aic:.4f}; BIC = {fm.bic:.4f}; converged = {fm.converged}\n")
    return text


def properties_to_csv(props: Dict[str, Dict[str, float]]) -> str:
    frame = pd.DataFrame(
        [(key, p['rarity'], p['readability']) for key, p in props.items()],
        columns=['id', 'rarity', 'readability'],
    )
    return frame.to_csv(index=False, lineterminator='\n')
