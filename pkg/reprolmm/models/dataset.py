"""
Modelo del dataset de evaluación.
Tabla en formato largo: una respuesta (score), factores y covariables.
"""
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from reprolmm.errors import (
    DataError, EmptyDataError, ParseError, SchemaError, UnknownFactorError
)


@dataclass(frozen=True)
class Observation:
    """Una fila del dataset."""
    response: float
    factor_values: Dict[str, str]
    covariate_values: Dict[str, float] = field(default_factory=dict)


@dataclass
class ColumnSchema:
    """
    Describe qué columnas del CSV son respuesta, factores y covariables.

    Formato JSON del archivo sidecar:
        {"response": "...", "factors": [...], "covariates": [...],
         "object_of_interest": "..."}
    """
    response: str
    factors: List[str]
    covariates: List[str] = field(default_factory=list)
    object_of_interest: Optional[str] = None
    delimiter: str = ','

    def __post_init__(self):
        if not self.response:
            raise SchemaError("El esquema debe nombrar una columna de respuesta")
        if not self.factors:
            raise SchemaError("El esquema debe nombrar al menos un factor")
        names = [self.response] + list(self.factors) + list(self.covariates)
        duplicated = sorted({n for n in names if names.count(n) > 1})
        if duplicated:
            raise SchemaError(f"Columnas repetidas en el esquema: {', '.join(duplicated)}")
        if self.object_of_interest is None:
            self.object_of_interest = self.factors[0]
        elif self.object_of_interest not in self.factors:
            raise SchemaError(
                f"El objeto de interés '{self.object_of_interest}' no es un factor del esquema",
                column=self.object_of_interest
            )

    @property
    def columns(self) -> List[str]:
        return [self.response] + list(self.factors) + list(self.covariates)

    @classmethod
    def from_dict(cls, data: dict, delimiter: str = ',') -> 'ColumnSchema':
        """Crea el esquema desde un diccionario (formato del sidecar JSON)."""
        if 'response' not in data or 'factors' not in data:
            raise SchemaError("El esquema requiere las claves 'response' y 'factors'")
        return cls(
            response=data['response'],
            factors=list(data['factors']),
            covariates=list(data.get('covariates', [])),
            object_of_interest=data.get('object_of_interest'),
            delimiter=data.get('delimiter', delimiter),
        )

    @classmethod
    def from_json(cls, path: Union[str, Path], delimiter: str = ',') -> 'ColumnSchema':
        """Lee el esquema desde un archivo JSON."""
        try:
            with open(path, encoding='utf-8') as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise SchemaError(f"No se pudo leer el esquema {path}: {e}")
        return cls.from_dict(data, delimiter=delimiter)

    def to_dict(self) -> dict:
        return {
            'response': self.response,
            'factors': list(self.factors),
            'covariates': list(self.covariates),
            'object_of_interest': self.object_of_interest,
            'delimiter': self.delimiter,
        }


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class EvalDataset:
    """
    Dataset de evaluación inmutable en almacenamiento columnar.

    Los niveles de cada factor se guardan en orden de primera aparición;
    el primer nivel es el nivel de referencia en la codificación de tratamiento.
    Es seguro compartirlo entre lectores concurrentes.
    """

    def __init__(
        self,
        response: np.ndarray,
        factor_codes: Dict[str, np.ndarray],
        factor_levels: Dict[str, List[str]],
        covariates: Optional[Dict[str, np.ndarray]] = None,
        response_name: str = 'score',
        object_of_interest: Optional[str] = None,
    ):
        covariates = covariates or {}
        response = np.asarray(response, dtype=float)
        if response.ndim != 1:
            raise DataError("La respuesta debe ser un vector")
        n = response.shape[0]
        if n == 0:
            raise EmptyDataError("El dataset no tiene filas")
        if not factor_codes:
            raise DataError("El dataset necesita al menos un factor")
        bad = np.flatnonzero(~np.isfinite(response))
        if bad.size:
            raise ParseError(
                f"Respuesta no finita en la fila {int(bad[0]) + 1}", row=int(bad[0]) + 1,
                column=response_name
            )

        codes_out = {}
        levels_out = {}
        for name, codes in factor_codes.items():
            if name not in factor_levels:
                raise UnknownFactorError(f"Factor sin niveles declarados: {name}")
            levels = [str(level) for level in factor_levels[name]]
            if not levels:
                raise DataError(f"El factor '{name}' no tiene niveles")
            codes = np.asarray(codes, dtype=np.int64)
            if codes.shape[0] != n:
                raise DataError(f"El factor '{name}' no tiene {n} filas")
            if codes.size and (codes.min() < 0 or codes.max() >= len(levels)):
                raise DataError(f"Códigos fuera de rango en el factor '{name}'")
            codes_out[name] = _readonly(codes)
            levels_out[name] = tuple(levels)

        covs_out = {}
        for name, values in covariates.items():
            if name in codes_out or name == response_name:
                raise DataError(f"Nombre de columna repetido: {name}")
            values = np.asarray(values, dtype=float)
            if values.shape[0] != n:
                raise DataError(f"La covariable '{name}' no tiene {n} filas")
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                raise ParseError(
                    f"Covariable '{name}' no finita en la fila {int(bad[0]) + 1}",
                    row=int(bad[0]) + 1, column=name
                )
            covs_out[name] = _readonly(values)

        if object_of_interest is None:
            object_of_interest = next(iter(codes_out))
        if object_of_interest not in codes_out:
            raise UnknownFactorError(
                f"El objeto de interés '{object_of_interest}' no es un factor del dataset"
            )

        self._response = _readonly(response)
        self._codes = codes_out
        self._levels = levels_out
        self._covariates = covs_out
        self.response_name = response_name
        self.object_of_interest = object_of_interest

    # === Construcción ===

    @classmethod
    def from_columns(
        cls,
        response: Sequence[float],
        factors: Dict[str, Sequence[str]],
        covariates: Optional[Dict[str, Sequence[float]]] = None,
        response_name: str = 'score',
        object_of_interest: Optional[str] = None,
        factor_levels: Optional[Dict[str, Sequence[str]]] = None,
    ) -> 'EvalDataset':
        """
        Crea un dataset desde columnas con etiquetas de texto.

        Args:
            response: Scores de evaluación
            factors: Mapa factor -> etiquetas por fila
            covariates: Mapa covariable -> valores por fila
            response_name: Nombre de la columna de respuesta
            object_of_interest: Factor de los objetos de interés
            factor_levels: Niveles declarados (opcional); si falta se usa el
                orden de primera aparición

        Returns:
            EvalDataset validado
        """
        factor_levels = factor_levels or {}
        codes = {}
        levels = {}
        for name, labels in factors.items():
            labels = np.asarray([str(v) for v in labels], dtype=object)
            if name in factor_levels:
                declared = [str(v) for v in factor_levels[name]]
            else:
                declared = first_appearance_levels(labels)
            index = {level: i for i, level in enumerate(declared)}
            try:
                codes[name] = np.fromiter((index[v] for v in labels), dtype=np.int64,
                                          count=len(labels))
            except KeyError as e:
                raise UnknownFactorError(f"Nivel no declarado en el factor '{name}': {e.args[0]}")
            levels[name] = declared
        return cls(
            response=np.asarray(response, dtype=float),
            factor_codes=codes,
            factor_levels=levels,
            covariates={k: np.asarray(v, dtype=float) for k, v in (covariates or {}).items()},
            response_name=response_name,
            object_of_interest=object_of_interest,
        )

    # === Acceso ===

    def __len__(self) -> int:
        return self._response.shape[0]

    @property
    def n_rows(self) -> int:
        return len(self)

    @property
    def response(self) -> np.ndarray:
        return self._response

    @property
    def factor_names(self) -> List[str]:
        return list(self._codes)

    @property
    def factor_levels(self) -> Dict[str, List[str]]:
        return {name: list(levels) for name, levels in self._levels.items()}

    @property
    def covariate_names(self) -> List[str]:
        return list(self._covariates)

    def codes(self, factor: str) -> np.ndarray:
        """Códigos enteros (índice en factor_levels) del factor."""
        self._check_factor(factor)
        return self._codes[factor]

    def levels(self, factor: str) -> List[str]:
        self._check_factor(factor)
        return list(self._levels[factor])

    def labels(self, factor: str) -> np.ndarray:
        """Etiquetas de texto del factor por fila."""
        self._check_factor(factor)
        return np.asarray(self._levels[factor], dtype=object)[self._codes[factor]]

    def covariate(self, name: str) -> np.ndarray:
        if name not in self._covariates:
            raise UnknownFactorError(f"Covariable desconocida: {name}")
        return self._covariates[name]

    def has_factor(self, name: str) -> bool:
        return name in self._codes

    def has_covariate(self, name: str) -> bool:
        return name in self._covariates

    def observation(self, i: int) -> Observation:
        return Observation(
            response=float(self._response[i]),
            factor_values={f: self._levels[f][self._codes[f][i]] for f in self._codes},
            covariate_values={c: float(v[i]) for c, v in self._covariates.items()},
        )

    @property
    def rows(self) -> List[Observation]:
        return [self.observation(i) for i in range(len(self))]

    def __iter__(self):
        for i in range(len(self)):
            yield self.observation(i)

    def _check_factor(self, name: str):
        if name not in self._codes:
            raise UnknownFactorError(f"Factor desconocido: {name}")

    # === Transformaciones (devuelven datasets nuevos) ===

    def _replace(self, **changes) -> 'EvalDataset':
        args = dict(
            response=self._response,
            factor_codes=dict(self._codes),
            factor_levels={k: list(v) for k, v in self._levels.items()},
            covariates=dict(self._covariates),
            response_name=self.response_name,
            object_of_interest=self.object_of_interest,
        )
        args.update(changes)
        return EvalDataset(**args)

    def with_response(self, response: np.ndarray) -> 'EvalDataset':
        return self._replace(response=np.asarray(response, dtype=float))

    def with_covariates(self, values: Dict[str, np.ndarray]) -> 'EvalDataset':
        """Agrega o reemplaza covariables conservando el orden de filas."""
        covs = dict(self._covariates)
        covs.update({k: np.asarray(v, dtype=float) for k, v in values.items()})
        return self._replace(covariates=covs)

    def with_object_of_interest(self, factor: str) -> 'EvalDataset':
        self._check_factor(factor)
        return self._replace(object_of_interest=factor)

    def with_interaction_factor(self, a: str, b: str) -> 'EvalDataset':
        """
        Agrega el factor cruzado 'a:b' (una etiqueta por combinación observada).
        """
        self._check_factor(a)
        self._check_factor(b)
        name = f"{a}:{b}"
        labels_a = self.labels(a)
        labels_b = self.labels(b)
        labels = np.asarray([f"{x}:{y}" for x, y in zip(labels_a, labels_b)], dtype=object)
        levels = first_appearance_levels(labels)
        index = {level: i for i, level in enumerate(levels)}
        codes = np.fromiter((index[v] for v in labels), dtype=np.int64, count=len(labels))
        factor_codes = dict(self._codes)
        factor_levels = {k: list(v) for k, v in self._levels.items()}
        factor_codes[name] = codes
        factor_levels[name] = levels
        return self._replace(factor_codes=factor_codes, factor_levels=factor_levels)

    def filter_rows(self, mask: np.ndarray) -> 'EvalDataset':
        """
        Subconjunto de filas. Los niveles que desaparecen se eliminan y el
        resto conserva el orden declarado (la referencia no cambia si sigue presente).
        """
        mask = np.asarray(mask)
        if mask.dtype != bool:
            idx = mask.astype(np.int64)
        else:
            idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise EmptyDataError("El filtro no deja filas")
        codes = {}
        levels = {}
        for name, c in self._codes.items():
            sub = c[idx]
            present = np.zeros(len(self._levels[name]), dtype=bool)
            present[sub] = True
            remap = np.cumsum(present) - 1
            codes[name] = remap[sub]
            levels[name] = [lv for lv, keep in zip(self._levels[name], present) if keep]
        return self._replace(
            response=self._response[idx],
            factor_codes=codes,
            factor_levels=levels,
            covariates={k: v[idx] for k, v in self._covariates.items()},
        )

    def take(self, order: Sequence[int]) -> 'EvalDataset':
        """Reordena filas sin tocar los niveles declarados."""
        order = np.asarray(order, dtype=np.int64)
        return self._replace(
            response=self._response[order],
            factor_codes={k: v[order] for k, v in self._codes.items()},
            covariates={k: v[order] for k, v in self._covariates.items()},
        )

    # === Identidad ===

    def fingerprint(self) -> str:
        """Hash SHA-256 del contenido canónico (respuesta, factores, covariables)."""
        h = hashlib.sha256()
        h.update(self.response_name.encode('utf-8'))
        h.update(self._response.astype('<f8').tobytes())
        for name in self._codes:
            h.update(name.encode('utf-8'))
            h.update('\x1f'.join(self._levels[name]).encode('utf-8'))
            h.update(self._codes[name].astype('<i8').tobytes())
        for name, values in self._covariates.items():
            h.update(name.encode('utf-8'))
            h.update(values.astype('<f8').tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvalDataset):
            return NotImplemented
        return (
            self.response_name == other.response_name
            and self.object_of_interest == other.object_of_interest
            and self.factor_levels == other.factor_levels
            and self.covariate_names == other.covariate_names
            and np.array_equal(self._response, other._response)
            and all(np.array_equal(self._codes[k], other._codes[k]) for k in self._codes)
            and all(np.array_equal(self._covariates[k], other._covariates[k])
                    for k in self._covariates)
        )

    __hash__ = None

    def __repr__(self):
        sizes = ', '.join(f"{k}:{len(v)}" for k, v in self._levels.items())
        return f'<EvalDataset {len(self)} filas [{sizes}]>'


def first_appearance_levels(labels: Sequence[str]) -> List[str]:
    """Niveles distintos en orden de primera aparición."""
    labels = np.asarray(labels, dtype=object)
    if labels.size == 0:
        return []
    uniques, first = np.unique(labels, return_index=True)
    return [str(uniques[i]) for i in np.argsort(first, kind='stable')]


@dataclass(frozen=True)
class PairCoverage:
    """Cobertura de combinaciones de niveles para un par de factores."""
    observed: int
    possible: int

    @property
    def fraction(self) -> float:
        return self.observed / self.possible


@dataclass
class CrossingReport:
    """Fracción de celdas observadas por cada par de factores."""
    factors: List[str]
    pairs: Dict[Tuple[str, str], PairCoverage]

    def fraction(self, a: str, b: str) -> float:
        key = (a, b) if (a, b) in self.pairs else (b, a)
        return self.pairs[key].fraction

    @property
    def fully_crossed(self) -> bool:
        return all(p.observed == p.possible for p in self.pairs.values())

    def to_dict(self) -> dict:
        return {
            'factors': list(self.factors),
            'fully_crossed': self.fully_crossed,
            'pairs': [
                {'a': a, 'b': b, 'observed': p.observed, 'possible': p.possible,
                 'fraction': p.fraction}
                for (a, b), p in self.pairs.items()
            ],
        }
