"""
Matrices de diseño X (efectos fijos) y Z (bloques indicadores de efectos aleatorios).
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sps


@dataclass
class DesignMatrices:
    """
    Matrices de diseño de un LMEM con interceptos aleatorios.

    Los bloques de Z se guardan como códigos enteros por fila; `Z_blocks`
    materializa las matrices dispersas N x m_j (una entrada igual a 1 por fila).
    """
    X: np.ndarray
    column_names: List[str]
    random_factors: List[str] = field(default_factory=list)
    z_codes: List[np.ndarray] = field(default_factory=list)
    z_levels: List[List[str]] = field(default_factory=list)
    dropped_columns: List[str] = field(default_factory=list)
    factor_levels: Dict[str, List[str]] = field(default_factory=dict)
    covariate_names: List[str] = field(default_factory=list)

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def level_counts(self) -> List[int]:
        return [len(levels) for levels in self.z_levels]

    @property
    def Z_blocks(self) -> List[sps.csr_matrix]:
        n = self.n_obs
        rows = np.arange(n)
        ones = np.ones(n)
        return [
            sps.csr_matrix((ones, (rows, codes)), shape=(n, len(levels)))
            for codes, levels in zip(self.z_codes, self.z_levels)
        ]

    @property
    def Z(self) -> sps.csr_matrix:
        """Z completa: bloques concatenados por columnas."""
        blocks = self.Z_blocks
        if not blocks:
            return sps.csr_matrix((self.n_obs, 0))
        return sps.hstack(blocks, format='csr')


@dataclass
class ScalingRecord:
    """Media y desviación estándar (n-1) de cada covariable estandarizada."""
    params: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def mean(self, name: str) -> float:
        return self.params[name][0]

    def sd(self, name: str) -> float:
        return self.params[name][1]

    def to_standard(self, name: str, values):
        if name not in self.params:
            return np.asarray(values, dtype=float)
        m, s = self.params[name]
        return (np.asarray(values, dtype=float) - m) / s

    def to_original(self, name: str, values):
        if name not in self.params:
            return np.asarray(values, dtype=float)
        m, s = self.params[name]
        return np.asarray(values, dtype=float) * s + m

    def slope_per_unit(self, name: str, slope: float) -> float:
        """Pendiente por unidad original de una pendiente estimada en escala z."""
        if name not in self.params:
            return slope
        return slope / self.params[name][1]

    def to_dict(self) -> dict:
        return {k: {'mean': m, 'sd': s} for k, (m, s) in self.params.items()}

    def coefficients_to_original(self, coefficients: Dict[str, float],
                                 intercept_name: str = '(Intercept)') -> Dict[str, float]:
        """
        Reexpresa coeficientes estimados con covariables estandarizadas en la
        escala original.

        Una columna b * z_1 * ... * z_k con z_j = (d_j - m_j) / s_j se expande
        en todos los subconjuntos de {d_j}; cada término aporta a la columna
        formada por las partes restantes. Pueden aparecer columnas de orden
        inferior que el modelo no contenía (p. ej. la intersección).
        """
        out: Dict[str, float] = {}
        for name, beta in coefficients.items():
            parts = [] if name == intercept_name else name.split(':')
            scaled = [p for p in parts if p in self.params]
            if not scaled:
                out[name] = out.get(name, 0.0) + beta
                continue
            base = beta / float(np.prod([self.params[p][1] for p in scaled]))
            for r in range(len(scaled) + 1):
                for kept in combinations(scaled, r):
                    value = base
                    for p in scaled:
                        if p not in kept:
                            value *= -self.params[p][0]
                    target = [p for p in parts if p not in scaled or p in kept]
                    key = ':'.join(target) if target else intercept_name
                    out[key] = out.get(key, 0.0) + value
        return out
