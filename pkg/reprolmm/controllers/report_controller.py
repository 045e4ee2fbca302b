"""
Controlador del reporte de reproducibilidad.
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from reprolmm.errors import ConvergenceError, ReportStructureError, UnknownFactorError
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.model_spec import FixedTerm, ModelSpec
from reprolmm.models.report import ConditionalSection, ReportConfig, ReproReport
from reprolmm.models.results import FitOptions, GlrtResult
from reprolmm.services.excel_service import ExcelService
from reprolmm.services.inference_service import glrt, glrt_conditional
from reprolmm.services.vca_service import vca

logger = logging.getLogger(__name__)


class ReportController:
    """Orquesta los cuatro análisis del reporte sobre un mismo dataset."""

    def __init__(self, opts: Optional[FitOptions] = None):
        """
        Args:
            opts: Opciones del optimizador compartidas por todos los ajustes
        """
        self.opts = opts or FitOptions()
        self.excel_service = ExcelService()
        self.logger = logger

    def build_report(self, ds: EvalDataset, config: ReportConfig) -> ReproReport:
        """
        Ejecuta en secuencia: mejor configuración, variación de meta-parámetros,
        VCA y pruebas condicionales.

        Args:
            ds: Dataset con factor de sistemas y factores de configuración
            config: Configuración del reporte

        Returns:
            ReproReport

        Raises:
            ReportStructureError: menos de 2 sistemas o factores ausentes
        """
        self._check_structure(ds, config)
        object_factor = config.object_factor or ds.object_of_interest
        fingerprint = ds.fingerprint()

        best_ds, selected = self.filter_best_configurations(ds, config)
        self.logger.info(f"Mejores configuraciones: {selected}")

        pairwise = self._system_glrt(best_ds, config.system, (object_factor,))
        pairwise.fingerprint = fingerprint
        self.logger.info(f"Sección mejor configuración: p={pairwise.p_value}")

        under = self._system_glrt(
            ds, config.system, (object_factor,) + tuple(config.config_factors)
        )
        under.fingerprint = fingerprint
        self.logger.info(f"Sección bajo variación: p={under.p_value}")

        vca_report = self._vca_section(ds, config, object_factor)
        if vca_report is not None:
            vca_report.fingerprint = fingerprint

        conditional = []
        for covariate in config.covariates:
            result = glrt_conditional(
                best_ds, covariate, config.system, object_factor,
                interaction_only=config.interaction_only, opts=self.opts,
                grid_points=config.grid_points,
            )
            result.glrt.fingerprint = fingerprint
            conditional.append(ConditionalSection(
                covariate=covariate,
                glrt=result.glrt,
                coefficients=result.coefficients,
                coefficients_original=result.coefficients_original,
                grid=result.grid,
            ))
            self.logger.info(f"Sección condicional '{covariate}': p={result.glrt.p_value}")

        return ReproReport(
            pairwise_best=pairwise,
            under_variation=under,
            vca=vca_report,
            conditional=conditional,
            selected_configurations=selected,
            fingerprint=fingerprint,
            filtered_fingerprint=best_ds.fingerprint(),
            config=config,
        )

    def export_excel(self, report: ReproReport, path) -> None:
        """Exporta el reporte a .xlsx."""
        self.excel_service.export_report(report, path)

    @staticmethod
    def _check_structure(ds: EvalDataset, config: ReportConfig):
        if not ds.has_factor(config.system):
            raise ReportStructureError(f"Falta el factor de sistemas '{config.system}'")
        if len(ds.levels(config.system)) < 2:
            raise ReportStructureError("El reporte necesita al menos 2 sistemas")
        for name in config.config_factors:
            if not ds.has_factor(name):
                raise ReportStructureError(f"Falta el factor de configuración '{name}'")
        for name in config.covariates:
            if not ds.has_covariate(name):
                raise UnknownFactorError(f"Covariable desconocida: {name}")

    @staticmethod
    def filter_best_configurations(ds: EvalDataset, config: ReportConfig
                                   ) -> Tuple[EvalDataset, Dict[str, Dict[str, str]]]:
        """
        Filtra cada sistema a su celda de configuración con mayor media.
        Empates: la primera celda en orden declarado de niveles.

        Returns:
            Tupla (dataset_filtrado, {sistema: {factor: nivel}})
        """
        factors = list(config.config_factors)
        shape = tuple(len(ds.levels(f)) for f in factors)
        cell = np.ravel_multi_index(tuple(ds.codes(f) for f in factors), shape)
        n_cells = int(np.prod(shape))
        systems = ds.codes(config.system)
        keep = np.zeros(len(ds), dtype=bool)
        selected = {}
        for s, level in enumerate(ds.levels(config.system)):
            mask = systems == s
            sums = np.bincount(cell[mask], weights=ds.response[mask], minlength=n_cells)
            counts = np.bincount(cell[mask], minlength=n_cells)
            means = np.full(n_cells, -np.inf)
            observed = counts > 0
            means[observed] = sums[observed] / counts[observed]
            best = int(np.argmax(means))
            keep |= mask & (cell == best)
            index = np.unravel_index(best, shape)
            selected[level] = {f: ds.levels(f)[int(i)] for f, i in zip(factors, index)}
        return ds.filter_rows(keep), selected

    def _system_glrt(self, ds: EvalDataset, system: str, random: Tuple[str, ...]) -> GlrtResult:
        restricted = ModelSpec(ds.response_name, (), random, True)
        general = restricted.with_terms(FixedTerm((system,)))
        return glrt(ds, restricted, general, self.opts)

    def _vca_section(self, ds: EvalDataset, config: ReportConfig, object_factor: str):
        levels = ds.levels(config.system)
        level = config.vca_system or levels[1]
        if level not in levels:
            raise UnknownFactorError(f"Nivel desconocido en '{config.system}': {level}")
        subset = ds.filter_rows(ds.labels(config.system) == level)
        try:
            return vca(subset, [object_factor] + list(config.config_factors), object_factor,
                       self.opts, threshold=config.threshold)
        except ConvergenceError as e:
            self.logger.warning(f"Sección VCA retenida: {e}")
            return None
