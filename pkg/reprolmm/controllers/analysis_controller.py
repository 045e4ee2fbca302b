"""
Controlador de análisis: ejecuta un comando de la CLI a partir de un
AnalysisConfig y devuelve el código de salida y los artefactos emitidos.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from config import Config
from reprolmm.errors import (
    ConvergenceError, DataError, ModelSpecError, ReproLmmError, SchemaError, TextPropertyError
)
from reprolmm.models.dataset import ColumnSchema, EvalDataset
from reprolmm.models.model_spec import parse_formula
from reprolmm.models.report import ReportConfig
from reprolmm.models.results import FitOptions
from reprolmm.models.simulation import SimSpec
from reprolmm.services import output_service as out
from reprolmm.services.dataset_service import DatasetService, validate_crossing
from reprolmm.services.excel_service import ExcelService
from reprolmm.services.inference_service import (
    compare_models, glrt_conditional, paired_t_test
)
from reprolmm.services.lmem_service import dataset_modes, fit_dataset, interaction_grid
from reprolmm.services.simulation_service import simulate
from reprolmm.services.text_service import (
    annotate_dataset, build_corpus_stats, text_properties
)
from reprolmm.services.vca_service import build_vca_report, vca, vca_with_interactions

logger = logging.getLogger(__name__)

COMMANDS = ('fit', 'glrt', 'glrt-conditional', 'vca', 'reliability', 'props', 'interact',
            'simulate', 'report', 'crossing')
FORMATS = ('table', 'json', 'csv')


@dataclass
class AnalysisConfig:
    """
    Configuración completa de una invocación (se repite en el JSON de salida).
    Solo se usan los campos que aplican al comando.
    """
    command: str
    data: Optional[str] = None
    schema: Optional[str] = None
    response: str = 'score'
    factors: List[str] = field(default_factory=list)
    object: Optional[str] = None
    delimiter: str = ','
    formula: Optional[str] = None
    restricted: Optional[str] = None
    general: Optional[str] = None
    criterion: Optional[str] = None
    random: List[str] = field(default_factory=list)
    interactions: List[str] = field(default_factory=list)
    components: Optional[str] = None
    threshold: Optional[float] = None
    verdict: bool = False
    covariate: Optional[str] = None
    system: str = 'system'
    meta_factor: Optional[str] = None
    interaction_only: bool = False
    modes: bool = False
    grid: Optional[int] = None
    grid_output: Optional[str] = None
    texts: Optional[str] = None
    corpus: Optional[str] = None
    spec: Optional[str] = None
    seed: Optional[int] = None
    config_factors: List[str] = field(default_factory=list)
    covariates: List[str] = field(default_factory=list)
    vca_system: Optional[str] = None
    format: str = 'table'
    output: Optional[str] = None
    xlsx: Optional[str] = None
    max_iter: Optional[int] = None
    tol: Optional[float] = None
    ftol_rel: Optional[float] = None
    xtol: Optional[float] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DataError(f"Comando desconocido: {self.command}")
        if self.format not in FORMATS:
            raise DataError(f"Formato desconocido: {self.format}")
        for text in (self.formula, self.restricted, self.general):
            if text:
                parse_formula(text)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AnalysisOutcome:
    """Código de salida, texto para stdout (si no hubo --output) y mensaje de error."""
    exit_code: int
    text: str = ''
    error: Optional[str] = None


class AnalysisController:
    """Despacha cada comando a los servicios correspondientes."""

    def __init__(self, cfg=Config):
        """
        Args:
            cfg: Clase de configuración activa (config.Config o subclase)
        """
        self.cfg = cfg
        self.excel_service = ExcelService()
        self.logger = logger
        self._unconverged: List[str] = []

    def run(self, config: AnalysisConfig) -> AnalysisOutcome:
        """
        Ejecuta el comando.

        Returns:
            AnalysisOutcome: 0 éxito, 1 error de datos/especificación, 2 error numérico.
            Un ajuste no convergido también devuelve 2, después de emitir el artefacto.
        """
        self._unconverged = []
        handler = getattr(self, '_cmd_' + config.command.replace('-', '_'))
        try:
            text = handler(config)
        except ReproLmmError as e:
            self.logger.error(f"{type(e).__name__}: {e}")
            return AnalysisOutcome(exit_code=e.exit_code, error=f"{type(e).__name__}: {e}")
        written = out.write_output(text, config.output)
        text = '' if written else text
        if self._unconverged:
            error = (f"{ConvergenceError.__name__}: sin convergencia en "
                     f"{', '.join(self._unconverged)}")
            self.logger.error(error)
            return AnalysisOutcome(exit_code=ConvergenceError.exit_code, text=text, error=error)
        return AnalysisOutcome(exit_code=0, text=text)

    # === Auxiliares ===

    def _track(self, label: str, converged: bool):
        if not converged:
            self._unconverged.append(label)

    def _options(self, config: AnalysisConfig, criterion: Optional[str] = None) -> FitOptions:
        return FitOptions.from_config(
            self.cfg,
            criterion=config.criterion or criterion,
            max_iter=config.max_iter,
            ftol_rel=config.ftol_rel if config.ftol_rel is not None else config.tol,
            xtol=config.xtol if config.xtol is not None else config.tol,
        )

    def _json(self, payload: dict, config: AnalysisConfig,
              opts: Optional[FitOptions] = None) -> str:
        echo = {'analysis': config.to_dict()}
        if opts is not None:
            echo['fit_options'] = opts.to_dict()
        return out.to_json(payload, self.cfg.SCHEMA_VERSION, echo)

    def _load(self, config: AnalysisConfig, factors=(), columns=None,
              not_object=()) -> EvalDataset:
        """
        Carga el dataset. Sin --object ni esquema, el objeto de interés es el
        primer factor que no esté en `not_object` (sistemas, configuraciones).
        """
        if not config.data:
            raise DataError("Falta --data")
        service = DatasetService(config.delimiter)
        if config.schema:
            schema = ColumnSchema.from_json(config.schema, delimiter=config.delimiter)
            return service.load_csv(config.data, schema)
        forced = list(dict.fromkeys(list(config.factors) + list(factors)))
        schema = service.infer_schema(config.data, config.response, forced,
                                      config.object, columns)
        ds = service.load_csv(config.data, schema)
        if config.object is None and ds.object_of_interest in not_object:
            candidates = [f for f in ds.factor_names if f not in not_object]
            if candidates:
                ds = ds.with_object_of_interest(candidates[0])
        return ds

    def _threshold(self, config: AnalysisConfig) -> Optional[float]:
        """Umbral explícito, o el de la configuración activa si se pidió --verdict."""
        if config.threshold is not None:
            return config.threshold
        return self.cfg.RELIABILITY_THRESHOLD if config.verdict else None

    @staticmethod
    def _require(value, flag: str):
        if value in (None, '', []):
            raise DataError(f"Falta {flag}")
        return value

    # === Comandos ===

    def _cmd_fit(self, config: AnalysisConfig) -> str:
        spec = parse_formula(self._require(config.formula, '--formula'))
        config.response = spec.response
        ds = self._load(config, spec.random_factors)
        opts = self._options(config)
        fm = fit_dataset(ds, spec, opts)
        self._track('fit', fm.converged)
        payload = {'fit': fm.summary(), 'fingerprint': ds.fingerprint()}
        if fm.scaling and fm.scaling.params:
            payload['scaling'] = fm.scaling.to_dict()
        if config.modes:
            payload['random_effects'] = dataset_modes(ds, fm, opts)
        if config.format == 'json':
            return self._json(payload, config, opts)
        return out.fit_table(fm)

    def _cmd_glrt(self, config: AnalysisConfig) -> str:
        restricted = parse_formula(self._require(config.restricted, '--restricted'))
        general = parse_formula(self._require(config.general, '--general'))
        config.response = general.response
        ds = self._load(config, tuple(general.random_factors) + tuple(restricted.random_factors))
        opts = self._options(config, 'ML')
        result, _, _ = compare_models(ds, restricted, general, opts)
        self._track('glrt', result.converged)
        if config.format == 'json':
            return self._json(result.to_dict(), config, opts.replace(criterion='ML'))
        text = out.glrt_table(result)
        added = general.term_keys() - restricted.term_keys()
        if len(added) == 1 and len(result.means) == 2 and general.random_factors:
            (key,) = added
            (factor,) = key
            paired = paired_t_test(ds, factor, general.random_factors[0])
            text += (f"\npaired t-test: t = {paired.statistic:.6g}, df = {paired.df}, "
                     f"p = {paired.p_value:.6g}\n")
        return text

    def _cmd_glrt_conditional(self, config: AnalysisConfig) -> str:
        covariate = self._require(config.covariate, '--covariate')
        ds = self._load(config, [config.system] + list(config.random),
                        not_object=(config.system,))
        opts = self._options(config, 'ML')
        object_factor = config.object or ds.object_of_interest
        grid_points = config.grid or self.cfg.GRID_POINTS
        result = glrt_conditional(
            ds, covariate, config.system, object_factor,
            extra_random=[f for f in config.random if f != object_factor],
            interaction_only=config.interaction_only, opts=opts, grid_points=grid_points,
        )
        self._track('glrt-conditional', result.glrt.converged)
        if config.grid_output:
            out.write_output(out.grid_to_csv(result.grid), config.grid_output)
        if config.format == 'csv':
            return out.grid_to_csv(result.grid)
        if config.format == 'json':
            payload = {
                'glrt': result.glrt.to_dict(),
                'coefficients': result.coefficients,
                'coefficients_original': result.coefficients_original,
                'scaling': result.scaling,
            }
            return self._json(payload, config, opts.replace(criterion='ML'))
        text = out.glrt_table(result.glrt)
        rows = [(name, value, result.coefficients_original.get(name))
                for name, value in result.coefficients.items()]
        text += '\n' + out.format_table(('term', 'estimate', 'estimate_original'), rows)
        return text

    def _cmd_vca(self, config: AnalysisConfig) -> str:
        random = self._require(config.random, '--random')
        ds = self._load(config, random)
        object_factor = config.object or random[0]
        pairs = []
        for item in config.interactions:
            parts = item.split(':')
            if len(parts) != 2:
                raise ModelSpecError(f"Interacción inválida '{item}' (use a:b)")
            pairs.append((parts[0], parts[1]))
        opts = self._options(config)
        report = vca(ds, random, object_factor, opts, pairs, self._threshold(config))
        if config.xlsx:
            self.excel_service.export_vca(report, config.xlsx)
        if config.format == 'json':
            return self._json(report.to_dict(), config, opts.replace(criterion='REML'))
        return out.vca_table(report)

    def _cmd_reliability(self, config: AnalysisConfig) -> str:
        raw = self._require(config.components, '--components')
        try:
            components = json.loads(raw)
        except json.JSONDecodeError as e:
            raise DataError(f"--components no es JSON válido: {e}")
        if not isinstance(components, dict):
            raise DataError("--components debe ser un objeto JSON nombre -> varianza")
        components = {str(k): float(v) for k, v in components.items()}
        object_factor = self._require(config.object, '--object')
        report = build_vca_report(components, object_factor, self._threshold(config))
        if config.format == 'json':
            return self._json(report.to_dict(), config)
        return out.vca_table(report)

    def _cmd_props(self, config: AnalysisConfig) -> str:
        texts = read_texts(self._require(config.texts, '--texts'))
        corpus = read_texts(config.corpus) if config.corpus else texts
        stats = build_corpus_stats(corpus.values())
        if config.data:
            ds = self._load(config)
            annotated = annotate_dataset(ds, texts, stats, config.object)
            return DatasetService(config.delimiter).to_csv(annotated)
        props = text_properties(texts, stats)
        if config.format == 'json':
            return self._json({'properties': props}, config)
        return out.properties_to_csv(props)

    def _cmd_interact(self, config: AnalysisConfig) -> str:
        covariate = self._require(config.covariate, '--covariate')
        opts = self._options(config, 'ML')
        grid_points = config.grid or self.cfg.GRID_POINTS
        if config.formula:
            spec = parse_formula(config.formula)
            config.response = spec.response
            ds = self._load(config, spec.random_factors)
            fm = fit_dataset(ds, spec, opts)
            self._track('interact', fm.converged)
            grid = interaction_grid(fm, covariate, grid_points)
            payload = {'fit': fm.summary()}
        else:
            meta = self._require(config.meta_factor, '--factor')
            ds = self._load(config, [meta] + list(config.random), not_object=(meta,))
            analysis = vca_with_interactions(ds, meta, covariate, config.object, opts,
                                             grid_points)
            self._track('interact', analysis.glrt.converged)
            grid = analysis.grid
            payload = {'fit': analysis.fit.summary(), 'glrt': analysis.glrt.to_dict(),
                       'scaling': analysis.scaling}
        if config.format == 'json':
            payload['grid'] = grid.to_dict()
            return self._json(payload, config, opts)
        return out.grid_to_csv(grid)

    def _cmd_simulate(self, config: AnalysisConfig) -> str:
        spec = SimSpec.from_json(self._require(config.spec, '--spec'))
        if config.seed is not None:
            spec = spec.replace(seed=config.seed)
        ds = simulate(spec)
        return DatasetService(config.delimiter).to_csv(ds)

    def _cmd_report(self, config: AnalysisConfig) -> str:
        from reprolmm.controllers.report_controller import ReportController

        config_factors = self._require(config.config_factors, '--config-factors')
        ds = self._load(config, [config.system] + list(config_factors)
                        + ([config.object] if config.object else []),
                        not_object=[config.system] + list(config_factors))
        opts = self._options(config, 'ML')
        report_config = ReportConfig(
            system=config.system,
            config_factors=list(config_factors),
            object_factor=config.object,
            covariates=list(config.covariates),
            vca_system=config.vca_system,
            interaction_only=config.interaction_only,
            threshold=self._threshold(config),
            grid_points=config.grid or self.cfg.GRID_POINTS,
        )
        controller = ReportController(opts)
        report = controller.build_report(ds, report_config)
        for section in report.unconverged_sections():
            self._track('report:' + section, False)
        if config.xlsx:
            controller.export_excel(report, config.xlsx)
        if config.format == 'json':
            return self._json(report.to_dict(), config, opts)
        return report_summary(report)

    def _cmd_crossing(self, config: AnalysisConfig) -> str:
        factors = self._require(config.factors, '--factors')
        ds = self._load(config, factors)
        report = validate_crossing(ds, factors)
        if config.format == 'json':
            return self._json(report.to_dict(), config)
        rows = [(a, b, p.observed, p.possible, p.fraction) for (a, b), p in report.pairs.items()]
        return out.format_table(('factor_a', 'factor_b', 'observed', 'possible', 'fraction'), rows)


def read_texts(path: str) -> Dict[str, str]:
    """
    Lee textos: CSV con columnas (id, text) o un documento por línea
    (el id es el número de línea, desde 1).
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"No existe el archivo: {path}")
    if path.suffix.lower() == '.csv':
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
        if 'id' not in frame.columns or 'text' not in frame.columns:
            raise SchemaError(f"{path.name} debe tener columnas 'id' y 'text'")
        return dict(zip(frame['id'], frame['text']))
    with open(path, encoding='utf-8') as fh:
        lines = [line.rstrip('\n') for line in fh]
    texts = {str(i + 1): line for i, line in enumerate(lines) if line.strip()}
    if not texts:
        raise TextPropertyError(f"{path.name} no contiene textos")
    return texts


def report_summary(report) -> str:
    """Resumen legible del reporte de reproducibilidad."""
    parts = ['== Mejor configuración por sistema ==']
    for system, cells in report.selected_configurations.items():
        cells_text = ', '.join(f"{k}={v}" for k, v in cells.items())
        parts.append(f"{system}: {cells_text}")
    parts += ['', '== Comparación en la mejor configuración ==', out.glrt_table(report.pairwise_best)]
    parts += ['== Comparación bajo variación de meta-parámetros ==',
              out.glrt_table(report.under_variation)]
    if report.vca is not None:
        parts += ['== Componentes de varianza ==', out.vca_table(report.vca)]
    for section in report.conditional:
        parts += [f"== Condicional a {section.covariate} ==", out.glrt_table(section.glrt)]
    return '\n'.join(parts) + '\n'
