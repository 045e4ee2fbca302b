"""
Servicio de ingesta y serialización de datasets de evaluación (CSV).
"""
import logging
import os
import tempfile
from itertools import combinations
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from reprolmm.errors import EmptyDataError, ParseError, SchemaError, UnknownFactorError
from reprolmm.models.dataset import ColumnSchema, CrossingReport, EvalDataset, PairCoverage

logger = logging.getLogger(__name__)


class DatasetService:
    """Lectura y escritura de datasets en formato largo."""

    def __init__(self, delimiter: str = ','):
        """
        Inicializa el servicio.

        Args:
            delimiter: Separador por defecto (',' o '\\t')
        """
        self.delimiter = delimiter
        self.logger = logger

    def load_csv(self, path: Union[str, Path], schema: ColumnSchema) -> EvalDataset:
        """
        Carga un CSV (UTF-8, con encabezado) según el esquema.

        Args:
            path: Ruta del archivo
            schema: Columnas de respuesta, factores y covariables

        Returns:
            EvalDataset validado, niveles en orden de primera aparición

        Raises:
            SchemaError: columna faltante
            ParseError: celda vacía o no numérica (con número de fila)
            EmptyDataError: archivo sin filas
        """
        path = Path(path)
        delimiter = schema.delimiter or self.delimiter
        if not path.exists():
            raise SchemaError(f"No existe el archivo: {path}")
        try:
            frame = pd.read_csv(
                path, sep=delimiter, dtype=str, keep_default_na=False,
                encoding='utf-8', skipinitialspace=False
            )
        except pd.errors.EmptyDataError:
            raise EmptyDataError(f"Archivo vacío: {path}")
        except (UnicodeDecodeError, pd.errors.ParserError) as e:
            raise SchemaError(f"No se pudo leer {path}: {e}")

        missing = [c for c in schema.columns if c not in frame.columns]
        if missing:
            raise SchemaError(f"Columna faltante en {path.name}: '{missing[0]}'", column=missing[0])
        if len(frame) == 0:
            raise EmptyDataError(f"El archivo {path.name} no tiene filas de datos")

        response = self._numeric_column(frame, schema.response)
        covariates = {name: self._numeric_column(frame, name) for name in schema.covariates}

        codes = {}
        levels = {}
        for name in schema.factors:
            labels = frame[name].to_numpy(dtype=object)
            empty = np.flatnonzero(labels == '')
            if empty.size:
                row = int(empty[0]) + 1
                raise ParseError(f"Celda vacía en el factor '{name}', fila {row}", row=row,
                                 column=name)
            # pd.factorize sin ordenar conserva el orden de primera aparición
            factor_codes, uniques = pd.factorize(labels, sort=False)
            codes[name] = factor_codes.astype(np.int64)
            levels[name] = [str(u) for u in uniques]

        ds = EvalDataset(
            response=response,
            factor_codes=codes,
            factor_levels=levels,
            covariates=covariates,
            response_name=schema.response,
            object_of_interest=schema.object_of_interest,
        )
        sizes = ', '.join(f"{k}:{len(v)}" for k, v in levels.items())
        self.logger.info(f"Dataset cargado de {path.name}: {len(ds)} filas ({sizes})")
        return ds

    @staticmethod
    def _numeric_column(frame: pd.DataFrame, name: str) -> np.ndarray:
        raw = frame[name].str.strip()
        values = pd.to_numeric(raw, errors='coerce').to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if not bad.size:
            # float() redondea correctamente: round-trip exacto con repr
            return raw.to_numpy(dtype=object).astype(float)
        i = int(bad[0])
        cell = raw.iloc[i]
        kind = 'vacía' if cell == '' else f"no numérica ({cell!r})"
        # fila 1 = primera fila de datos (después del encabezado)
        raise ParseError(f"Celda {kind} en la columna '{name}', fila {i + 1}",
                         row=i + 1, column=name)

    def to_frame(self, ds: EvalDataset) -> pd.DataFrame:
        """Dataset como DataFrame (respuesta, factores, covariables)."""
        data = {ds.response_name: ds.response}
        for name in ds.factor_names:
            data[name] = ds.labels(name)
        for name in ds.covariate_names:
            data[name] = ds.covariate(name)
        return pd.DataFrame(data, columns=list(data))

    def to_csv(self, ds: EvalDataset, path: Union[str, Path, None] = None,
               delimiter: str = None) -> str:
        """
        Serializa el dataset; los flotantes usan repr para un round-trip exacto.

        Args:
            ds: Dataset
            path: Destino (escritura atómica); si es None solo devuelve el texto
            delimiter: Separador

        Returns:
            Contenido CSV
        """
        frame = self.to_frame(ds)
        text = frame.to_csv(index=False, sep=delimiter or self.delimiter,
                            float_format=None, lineterminator='\n')
        if path is not None:
            atomic_write(path, text)
        return text

    def infer_schema(self, path: Union[str, Path], response: str,
                     factors: Sequence[str] = (), object_of_interest: str = None,
                     columns: Sequence[str] = None) -> ColumnSchema:
        """
        Deduce el esquema desde el encabezado: las columnas nombradas en
        `factors` son factores; del resto, las completamente numéricas son
        covariables y las demás, factores.

        Args:
            path: CSV
            response: Columna de respuesta
            factors: Columnas forzadas como factor (p. ej. factores aleatorios)
            object_of_interest: Objeto de interés (por defecto el primer factor)
            columns: Si se indica, solo se consideran estas columnas
        """
        path = Path(path)
        if not path.exists():
            raise SchemaError(f"No existe el archivo: {path}")
        try:
            frame = pd.read_csv(path, sep=self.delimiter, dtype=str, keep_default_na=False,
                                encoding='utf-8')
        except pd.errors.EmptyDataError:
            raise EmptyDataError(f"Archivo vacío: {path}")
        if response not in frame.columns:
            raise SchemaError(f"Columna faltante en {path.name}: '{response}'", column=response)
        for name in factors:
            if name not in frame.columns:
                raise SchemaError(f"Columna faltante en {path.name}: '{name}'", column=name)
        factor_cols = list(factors)
        covariate_cols = []
        for name in frame.columns:
            if name == response or name in factor_cols:
                continue
            if columns is not None and name not in columns:
                continue
            numeric = pd.to_numeric(frame[name].str.strip(), errors='coerce')
            if len(frame) and numeric.notna().all():
                covariate_cols.append(name)
            else:
                factor_cols.append(name)
        if not factor_cols:
            raise SchemaError(f"No se encontró ninguna columna de factor en {path.name}")
        return ColumnSchema(
            response=response,
            factors=factor_cols,
            covariates=covariate_cols,
            object_of_interest=object_of_interest or factor_cols[0],
            delimiter=self.delimiter,
        )

    def schema_for(self, ds: EvalDataset) -> ColumnSchema:
        """Esquema que describe el dataset (para releer su CSV)."""
        return ColumnSchema(
            response=ds.response_name,
            factors=ds.factor_names,
            covariates=ds.covariate_names,
            object_of_interest=ds.object_of_interest,
            delimiter=self.delimiter,
        )


def atomic_write(path: Union[str, Path], content: Union[str, bytes]) -> None:
    """
    Escribe en un temporal del mismo directorio y lo renombra sobre el destino.
    Texto en UTF-8 sin traducir saltos de línea; bytes tal cual.
    """
    path = Path(path)
    directory = path.parent if str(path.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=directory)
    try:
        if isinstance(content, bytes):
            with os.fdopen(fd, 'wb') as fh:
                fh.write(content)
        else:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as fh:
                fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_csv(path: Union[str, Path], schema: ColumnSchema) -> EvalDataset:
    return DatasetService(schema.delimiter).load_csv(path, schema)


def to_csv(ds: EvalDataset, path: Union[str, Path, None] = None, delimiter: str = ',') -> str:
    return DatasetService(delimiter).to_csv(ds, path)


def validate_crossing(ds: EvalDataset, factors: Sequence[str]) -> CrossingReport:
    """
    Fracción de combinaciones de niveles observadas por par de factores.
    Nunca rechaza datos desbalanceados, solo informa.

    Args:
        ds: Dataset
        factors: Factores a cruzar

    Returns:
        CrossingReport
    """
    factors: List[str] = list(factors)
    for name in factors:
        if not ds.has_factor(name):
            raise UnknownFactorError(f"Factor desconocido: {name}")
    pairs = {}
    for a, b in combinations(factors, 2):
        ma, mb = len(ds.levels(a)), len(ds.levels(b))
        cells = ds.codes(a) * mb + ds.codes(b)
        observed = int(np.unique(cells).size)
        pairs[(a, b)] = PairCoverage(observed=observed, possible=ma * mb)
        if observed < ma * mb:
            logger.info(f"Cruce incompleto {a} x {b}: {observed}/{ma * mb} celdas")
    return CrossingReport(factors=factors, pairs=pairs)
