"""
Modelos del analizador: tipos de datos sin lógica numérica.
"""
from reprolmm.models.dataset import ColumnSchema, CrossingReport, EvalDataset, Observation
from reprolmm.models.design import DesignMatrices, ScalingRecord
from reprolmm.models.model_spec import FixedTerm, ModelSpec, build_spec, parse_formula
from reprolmm.models.report import ConditionalSection, ReportConfig, ReproReport
from reprolmm.models.results import (
    FitOptions, FittedModel, GlrtResult, InteractionGrid, VarianceParams, VcaReport
)
from reprolmm.models.simulation import McSummary, SimSpec

__all__ = [
    'ColumnSchema',
    'CrossingReport',
    'EvalDataset',
    'Observation',
    'DesignMatrices',
    'ScalingRecord',
    'FixedTerm',
    'ModelSpec',
    'build_spec',
    'parse_formula',
    'ConditionalSection',
    'ReportConfig',
    'ReproReport',
    'FitOptions',
    'FittedModel',
    'GlrtResult',
    'InteractionGrid',
    'VarianceParams',
    'VcaReport',
    'McSummary',
    'SimSpec',
]
