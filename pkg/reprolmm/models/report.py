"""
Reporte de reproducibilidad: comparación en la mejor configuración, comparación
bajo variación de meta-parámetros, VCA e interacciones con propiedades de los datos.
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from reprolmm.errors import ReportStructureError
from reprolmm.models.results import GlrtResult, InteractionGrid, VcaReport


@dataclass
class ReportConfig:
    """
    Configuración del reporte.

    Args:
        system: Factor de sistemas (el primer nivel es el baseline)
        config_factors: Factores de configuración (meta-parámetros, semillas, ...)
        object_factor: Factor de objetos de interés (None = el del dataset)
        covariates: Covariables para las pruebas condicionales
        vca_system: Nivel del sistema cuyas filas entran al VCA (None = el competidor)
        interaction_only: Pruebas condicionales solo sobre la interacción (df=1)
        threshold: Umbral opcional del veredicto de fiabilidad
        grid_points: Puntos de las rejillas de interacción
    """
    system: str = 'system'
    config_factors: List[str] = field(default_factory=list)
    object_factor: Optional[str] = None
    covariates: List[str] = field(default_factory=list)
    vca_system: Optional[str] = None
    interaction_only: bool = False
    threshold: Optional[float] = None
    grid_points: int = 50

    def __post_init__(self):
        if not self.config_factors:
            raise ReportStructureError("El reporte necesita al menos un factor de configuración")
        if self.system in self.config_factors:
            raise ReportStructureError("El factor de sistemas no puede ser de configuración")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'ReportConfig':
        return cls(**data)


@dataclass
class ConditionalSection:
    """Prueba condicional a una covariable y su rejilla de predicciones."""
    covariate: str
    glrt: GlrtResult
    coefficients: Dict[str, float]
    grid: Optional[InteractionGrid] = None
    coefficients_original: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'covariate': self.covariate,
            'glrt': self.glrt.to_dict(),
            'coefficients': dict(self.coefficients),
            'coefficients_original': dict(self.coefficients_original),
            'grid': self.grid.to_dict() if self.grid else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ConditionalSection':
        return cls(
            covariate=data['covariate'],
            glrt=GlrtResult.from_dict(data['glrt']),
            coefficients=dict(data['coefficients']),
            coefficients_original=dict(data.get('coefficients_original', {})),
            grid=InteractionGrid.from_dict(data['grid']) if data.get('grid') else None,
        )


@dataclass
class ReproReport:
    """Secciones del reporte; todas registran la huella del dataset de entrada."""
    pairwise_best: GlrtResult
    under_variation: GlrtResult
    vca: Optional[VcaReport]
    conditional: List[ConditionalSection]
    selected_configurations: Dict[str, Dict[str, str]]
    fingerprint: str
    filtered_fingerprint: str
    config: ReportConfig

    def is_consistent(self) -> bool:
        prints = [self.pairwise_best.fingerprint, self.under_variation.fingerprint]
        prints += [c.glrt.fingerprint for c in self.conditional]
        if self.vca is not None:
            prints.append(self.vca.fingerprint)
        return all(p == self.fingerprint for p in prints)

    def unconverged_sections(self) -> List[str]:
        """Secciones con algún ajuste no convergido (VCA ausente = retenido)."""
        sections = []
        if not self.pairwise_best.converged:
            sections.append('pairwise_best')
        if not self.under_variation.converged:
            sections.append('under_variation')
        if self.vca is None:
            sections.append('vca')
        sections += [f"conditional:{c.covariate}" for c in self.conditional
                     if not c.glrt.converged]
        return sections

    def to_dict(self) -> dict:
        return {
            'pairwise_best': self.pairwise_best.to_dict(),
            'under_variation': self.under_variation.to_dict(),
            'vca': self.vca.to_dict() if self.vca else None,
            'conditional': [c.to_dict() for c in self.conditional],
            'selected_configurations': {k: dict(v) for k, v in self.selected_configurations.items()},
            'fingerprint': self.fingerprint,
            'filtered_fingerprint': self.filtered_fingerprint,
            'report_config': self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ReproReport':
        return cls(
            pairwise_best=GlrtResult.from_dict(data['pairwise_best']),
            under_variation=GlrtResult.from_dict(data['under_variation']),
            vca=VcaReport.from_dict(data['vca']) if data.get('vca') else None,
            conditional=[ConditionalSection.from_dict(c) for c in data['conditional']],
            selected_configurations=data['selected_configurations'],
            fingerprint=data['fingerprint'],
            filtered_fingerprint=data['filtered_fingerprint'],
            config=ReportConfig.from_dict(data['report_config']),
        )
