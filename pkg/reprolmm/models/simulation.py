"""
Especificación de simulación (verdad de referencia de un LMEM) y resumen de
estudios Monte Carlo.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from reprolmm.errors import SimulationSpecError

Levels = Union[int, Sequence[str]]


def level_labels(name: str, levels: Levels) -> List[str]:
    """Etiquetas de nivel: lista explícita o '<factor>_<i>' para un conteo."""
    if isinstance(levels, (int, np.integer)):
        if levels < 1:
            raise SimulationSpecError(f"El factor '{name}' necesita al menos un nivel")
        return [f"{name}_{i + 1}" for i in range(int(levels))]
    labels = [str(v) for v in levels]
    if not labels:
        raise SimulationSpecError(f"El factor '{name}' necesita al menos un nivel")
    if len(set(labels)) != len(labels):
        raise SimulationSpecError(f"Niveles repetidos en el factor '{name}'")
    return labels


@dataclass
class SimSpec:
    """
    Proceso generador Y = X beta + sum_f Z_f b_f + e con diseño completamente cruzado.

    fixed_effects usa términos: 'intercept', 'factor[nivel]', nombres de
    covariables y productos con ':' (p. ej. 'system[sota]:lambda[l2]').
    Las covariables se sortean por objeto de N(media, sd).
    """
    n_objects: int
    object_factor: str = 'sentence_id'
    facet_levels: Dict[str, Levels] = field(default_factory=dict)
    fixed_factors: Dict[str, Levels] = field(default_factory=dict)
    fixed_effects: Dict[str, float] = field(default_factory=dict)
    variance_components: Dict[str, float] = field(default_factory=dict)
    covariates: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    residual_sd: float = 1.0
    dropout: float = 0.0
    seed: int = 0
    response_name: str = 'score'

    def __post_init__(self):
        if int(self.n_objects) < 1:
            raise SimulationSpecError("n_objects debe ser >= 1")
        self.n_objects = int(self.n_objects)
        names = [self.object_factor] + list(self.fixed_factors) + list(self.facet_levels)
        if len(set(names)) != len(names):
            raise SimulationSpecError("Nombres de factores repetidos en la simulación")
        for name in list(self.facet_levels) + list(self.fixed_factors):
            level_labels(name, {**self.facet_levels, **self.fixed_factors}[name])
        for name, value in self.variance_components.items():
            if name not in names:
                raise SimulationSpecError(f"Componente de varianza de un factor desconocido: {name}")
            if not math.isfinite(value) or value < 0:
                raise SimulationSpecError(f"La varianza de '{name}' debe ser >= 0")
        for name, params in self.covariates.items():
            if name in names:
                raise SimulationSpecError(f"La covariable '{name}' choca con un factor")
            mean, sd = params
            if not sd >= 0:
                raise SimulationSpecError(f"La desviación de '{name}' debe ser >= 0")
            self.covariates[name] = (float(mean), float(sd))
        if not (math.isfinite(self.residual_sd) and self.residual_sd > 0):
            raise SimulationSpecError("residual_sd debe ser > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise SimulationSpecError("dropout debe estar en [0, 1)")

    @property
    def factor_names(self) -> List[str]:
        return [self.object_factor] + list(self.fixed_factors) + list(self.facet_levels)

    def levels(self, name: str) -> List[str]:
        if name == self.object_factor:
            return level_labels('s', self.n_objects)
        if name in self.fixed_factors:
            return level_labels(name, self.fixed_factors[name])
        if name in self.facet_levels:
            return level_labels(name, self.facet_levels[name])
        raise SimulationSpecError(f"Factor desconocido en la simulación: {name}")

    def replace(self, **changes) -> 'SimSpec':
        values = self.to_dict()
        values.update(changes)
        return SimSpec.from_dict(values)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['covariates'] = {k: list(v) for k, v in self.covariates.items()}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'SimSpec':
        if 'n_objects' not in data:
            raise SimulationSpecError("La especificación requiere 'n_objects'")
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SimulationSpecError(f"Claves desconocidas en la especificación: {', '.join(unknown)}")
        data = dict(data)
        data['covariates'] = {k: tuple(v) for k, v in data.get('covariates', {}).items()}
        return cls(**data)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> 'SimSpec':
        try:
            with open(path, encoding='utf-8') as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise SimulationSpecError(f"No se pudo leer la especificación {path}: {e}")


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class McSummary:
    """Resultados por réplica (en orden de índice) y estadísticos resumen."""
    results: List[Any]
    seeds: List[int]

    @property
    def replications(self) -> int:
        return len(self.results)

    def values(self, key: Optional[str] = None) -> np.ndarray:
        if key is None:
            return np.asarray(self.results, dtype=float)
        return np.asarray([r[key] for r in self.results], dtype=float)

    def mean(self, key: Optional[str] = None) -> float:
        return float(np.mean(self.values(key)))

    def median(self, key: Optional[str] = None) -> float:
        return float(np.median(self.values(key)))

    def quantiles(self, key: Optional[str] = None) -> Dict[float, float]:
        values = self.values(key)
        return {q: float(np.quantile(values, q)) for q in QUANTILES}

    def fraction_below(self, threshold: float, key: Optional[str] = None) -> float:
        """Fracción de réplicas con valor < threshold (p. ej. tasa de rechazo)."""
        return float(np.mean(self.values(key) < threshold))

    def summary(self) -> dict:
        keys = list(self.results[0]) if isinstance(self.results[0], dict) else [None]
        out = {}
        for key in keys:
            out[key or 'value'] = {
                'mean': self.mean(key),
                'median': self.median(key),
                'quantiles': {str(q): v for q, v in self.quantiles(key).items()},
            }
        return out
