"""
Tipos de resultado: opciones de ajuste, modelo ajustado, GLRT y VCA.
"""
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional

import numpy as np

from reprolmm.errors import DataError

ML = 'ML'
REML = 'REML'
CRITERIA = (ML, REML)


def normalize_criterion(criterion: str) -> str:
    value = (criterion or '').upper()
    if value not in CRITERIA:
        raise DataError(f"Criterio inválido: {criterion!r} (use ML o REML)")
    return value


@dataclass
class FitOptions:
    """Opciones del optimizador (ver config.Config)."""
    criterion: str = REML
    max_iter: int = 10000
    ftol_rel: float = 1e-10
    xtol: float = 1e-8
    dense_threshold: int = 2000
    alias_tol: float = 1e-7

    def __post_init__(self):
        self.criterion = normalize_criterion(self.criterion)
        if self.max_iter < 1:
            raise DataError("max_iter debe ser positivo")

    @classmethod
    def from_config(cls, cfg, **overrides) -> 'FitOptions':
        values = dict(
            criterion=cfg.CRITERION,
            max_iter=cfg.MAX_ITER,
            ftol_rel=cfg.FTOL_REL,
            xtol=cfg.XTOL,
            dense_threshold=cfg.DENSE_THRESHOLD,
            alias_tol=cfg.ALIAS_TOL,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def replace(self, **changes) -> 'FitOptions':
        values = asdict(self)
        values.update(changes)
        return FitOptions(**values)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VarianceParams:
    """Cocientes de varianza gamma_j = sigma2_j / sigma2_res, uno por factor aleatorio."""
    gamma: tuple

    def __post_init__(self):
        values = tuple(float(g) for g in self.gamma)
        if any(not math.isfinite(g) or g < 0 for g in values):
            raise DataError(f"gamma debe ser finito y >= 0: {values}")
        object.__setattr__(self, 'gamma', values)

    def __len__(self):
        return len(self.gamma)

    @classmethod
    def from_delta(cls, delta) -> 'VarianceParams':
        """Desde la escala del optimizador delta = log(1 + gamma)."""
        return cls(tuple(np.expm1(np.maximum(np.asarray(delta, dtype=float), 0.0))))

    def to_delta(self) -> np.ndarray:
        return np.log1p(np.asarray(self.gamma, dtype=float))


@dataclass
class FittedModel:
    """
    LMEM ajustado.

    sigma2 contiene una entrada por factor aleatorio y la entrada 'residual'.
    """
    beta_hat: np.ndarray
    column_names: List[str]
    sigma2: Dict[str, float]
    log_likelihood: float
    criterion: str
    converged: bool
    n_iter: int
    n_obs: int
    gamma: VarianceParams
    formula: str = ''
    dropped_columns: List[str] = field(default_factory=list)
    random_factors: List[str] = field(default_factory=list)
    factor_levels: Dict[str, List[str]] = field(default_factory=dict)
    spec: Optional[object] = None
    # (mínimo, máximo, media) de cada covariable en escala original
    covariate_summary: Dict[str, tuple] = field(default_factory=dict)
    scaling: Optional[object] = None

    @property
    def deviance(self) -> float:
        return -2.0 * self.log_likelihood

    @property
    def k(self) -> int:
        return len(self.column_names)

    @property
    def n_params(self) -> int:
        return self.k + len(self.random_factors) + 1

    @property
    def residual_variance(self) -> float:
        return self.sigma2['residual']

    @property
    def aic(self) -> float:
        return self.deviance + 2 * self.n_params

    @property
    def bic(self) -> float:
        return self.deviance + math.log(self.n_obs) * self.n_params

    def coefficients(self) -> Dict[str, float]:
        return {name: float(b) for name, b in zip(self.column_names, self.beta_hat)}

    def coefficient(self, name: str, default: float = 0.0) -> float:
        return self.coefficients().get(name, default)

    def original_coefficients(self) -> Dict[str, float]:
        """Coeficientes en la escala original de las covariables estandarizadas."""
        if self.scaling is None or not self.scaling.params:
            return self.coefficients()
        return self.scaling.coefficients_to_original(self.coefficients())

    def summary(self) -> dict:
        summary = {
            'formula': self.formula,
            'criterion': self.criterion,
            'coefficients': self.coefficients(),
            'sigma2': dict(self.sigma2),
            'log_likelihood': self.log_likelihood,
            'deviance': self.deviance,
            'aic': self.aic,
            'bic': self.bic,
            'converged': self.converged,
            'n_iter': self.n_iter,
            'n_obs': self.n_obs,
            'n_params': self.n_params,
            'dropped_columns': list(self.dropped_columns),
        }
        if self.scaling is not None and self.scaling.params:
            summary['coefficients_original'] = self.original_coefficients()
        return summary


@dataclass
class GlrtResult:
    """Resultado de una prueba de razón de verosimilitud generalizada."""
    stat: float
    df: int
    p_value: Optional[float]
    lambda_ratio: float
    effect_size: Optional[float] = None
    converged_restricted: bool = True
    converged_general: bool = True
    dropped_columns: List[str] = field(default_factory=list)
    restricted_formula: str = ''
    general_formula: str = ''
    deviance_restricted: float = float('nan')
    deviance_general: float = float('nan')
    means: Dict[str, float] = field(default_factory=dict)
    fingerprint: str = ''

    @property
    def converged(self) -> bool:
        return self.converged_restricted and self.converged_general

    def to_dict(self) -> dict:
        return {
            'stat': self.stat,
            'df': self.df,
            'p_value': self.p_value,
            'lambda_ratio': self.lambda_ratio,
            'effect_size': self.effect_size,
            'converged_restricted': self.converged_restricted,
            'converged_general': self.converged_general,
            'dropped_columns': list(self.dropped_columns),
            'restricted_formula': self.restricted_formula,
            'general_formula': self.general_formula,
            'deviance_restricted': self.deviance_restricted,
            'deviance_general': self.deviance_general,
            'means': dict(self.means),
            'fingerprint': self.fingerprint,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'GlrtResult':
        return cls(**data)


@dataclass
class VarianceComponent:
    """Componente de varianza con su porcentaje del total."""
    name: str
    variance: float
    percent: float


@dataclass
class VcaReport:
    """Análisis de componentes de varianza y coeficiente de fiabilidad phi."""
    components: List[VarianceComponent]
    phi: float
    object_of_interest: str
    interpretation: str
    verdict: Optional[str] = None
    threshold: Optional[float] = None
    fingerprint: str = ''
    converged: bool = True

    def variances(self) -> Dict[str, float]:
        return {c.name: c.variance for c in self.components}

    def percents(self) -> Dict[str, float]:
        return {c.name: c.percent for c in self.components}

    def to_dict(self) -> dict:
        return {
            'components': [asdict(c) for c in self.components],
            'phi': self.phi,
            'object_of_interest': self.object_of_interest,
            'interpretation': self.interpretation,
            'verdict': self.verdict,
            'threshold': self.threshold,
            'fingerprint': self.fingerprint,
            'converged': self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'VcaReport':
        data = dict(data)
        data['components'] = [VarianceComponent(**c) for c in data['components']]
        return cls(**data)


@dataclass
class InteractionGrid:
    """Predicciones poblacionales sobre una rejilla de la covariable, una línea por nivel."""
    covariate: str
    factor: str
    covariate_values: List[float]
    lines: Dict[str, List[float]]

    def rows(self):
        """Filas (valor_covariable, nivel, score_predicho), nivel por nivel."""
        for level, preds in self.lines.items():
            for x, y in zip(self.covariate_values, preds):
                yield x, level, y

    def to_dict(self) -> dict:
        return {
            'covariate': self.covariate,
            'factor': self.factor,
            'covariate_values': list(self.covariate_values),
            'lines': {k: list(v) for k, v in self.lines.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'InteractionGrid':
        return cls(**data)


@dataclass
class ConditionalResult:
    """GLRT condicional a una propiedad de los datos (m0' contra m1')."""
    covariate: str
    glrt: GlrtResult
    fit_general: FittedModel
    coefficients: Dict[str, float]
    grid: Optional[InteractionGrid] = None
    scaling: Dict[str, dict] = field(default_factory=dict)
    # mismos coeficientes en la escala original de la covariable
    coefficients_original: Dict[str, float] = field(default_factory=dict)


@dataclass
class InteractionAnalysis:
    """Meta-parámetro como efecto fijo con interacción con una covariable."""
    fit: FittedModel
    glrt: GlrtResult
    grid: InteractionGrid
    scaling: Dict[str, dict] = field(default_factory=dict)
