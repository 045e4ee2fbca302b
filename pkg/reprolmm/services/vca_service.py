"""
Análisis de componentes de varianza (VCA) y coeficiente de fiabilidad phi.

phi = sigma2_objeto / (sigma2_objeto + suma del resto de componentes, incluido el residual).
"""
import logging
from typing import Dict, Optional, Sequence, Tuple

from reprolmm.errors import ConvergenceError, DataError, UndefinedReliabilityError, UnknownFactorError
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.model_spec import FixedTerm, ModelSpec
from reprolmm.models.results import (
    REML, FitOptions, InteractionAnalysis, VarianceComponent, VcaReport
)
from reprolmm.services.inference_service import compare_models
from reprolmm.services.lmem_service import fit_dataset, interaction_grid

logger = logging.getLogger(__name__)

RESIDUAL = 'residual'

# Cotas inferiores de cada banda de interpretación (en porcentaje)
BANDS = (
    (90.0, 'excellent'),
    (75.0, 'good'),
    (50.0, 'moderate'),
    (0.0, 'poor'),
)


def interpret(phi: float) -> str:
    """Banda de fiabilidad: <50 poor, [50,75) moderate, [75,90) good, >=90 excellent."""
    percent = 100.0 * phi
    for lower, label in BANDS:
        if percent >= lower:
            return label
    return 'poor'


def reliability_verdict(phi: float, threshold: float = 0.8) -> str:
    """Veredicto binario con umbral (80 % por defecto)."""
    if not 0.0 < threshold <= 1.0:
        raise DataError(f"Umbral de fiabilidad fuera de (0, 1]: {threshold}")
    return 'reliable' if phi >= threshold else 'unreliable'


def compute_phi(components: Dict[str, float], object_of_interest: str) -> Tuple[float, str]:
    """
    Coeficiente de fiabilidad a partir de componentes ya estimados.

    Args:
        components: Mapa nombre -> varianza (incluye el residual)
        object_of_interest: Componente del numerador

    Returns:
        Tupla (phi, interpretación)

    Raises:
        UndefinedReliabilityError: varianza total cero
    """
    if object_of_interest not in components:
        raise UnknownFactorError(f"Componente '{object_of_interest}' ausente")
    for name, value in components.items():
        if value < 0:
            raise DataError(f"Varianza negativa en '{name}': {value}")
    total = float(sum(components.values()))
    if total <= 0.0:
        raise UndefinedReliabilityError("La varianza total es cero: phi no está definido")
    phi = float(components[object_of_interest]) / total
    return phi, interpret(phi)


def build_vca_report(components: Dict[str, float], object_of_interest: str,
                     threshold: Optional[float] = None, fingerprint: str = '',
                     converged: bool = True) -> VcaReport:
    """Arma el VcaReport (porcentajes sin redondear) desde las varianzas."""
    phi, label = compute_phi(components, object_of_interest)
    total = sum(components.values())
    rows = [
        VarianceComponent(name=name, variance=float(v), percent=100.0 * float(v) / total)
        for name, v in components.items()
    ]
    return VcaReport(
        components=rows,
        phi=phi,
        object_of_interest=object_of_interest,
        interpretation=label,
        verdict=reliability_verdict(phi, threshold) if threshold is not None else None,
        threshold=threshold,
        fingerprint=fingerprint,
        converged=converged,
    )


def vca(
    ds: EvalDataset,
    random_factors: Sequence[str],
    object_of_interest: Optional[str] = None,
    opts: Optional[FitOptions] = None,
    interactions: Sequence[Tuple[str, str]] = (),
    threshold: Optional[float] = None,
) -> VcaReport:
    """
    Ajusta por REML Y = mu + sum_f b_f + e y descompone la varianza.

    Las interacciones quedan absorbidas en el residual salvo que se pidan
    explícitamente como factores cruzados (requiere réplicas por celda).

    Args:
        ds: Dataset
        random_factors: Factores aleatorios (incluye el objeto de interés)
        object_of_interest: Numerador de phi (por defecto el del dataset)
        opts: Opciones del optimizador
        interactions: Pares (a, b) que se agregan como factores 'a:b'
        threshold: Umbral opcional para el veredicto binario

    Returns:
        VcaReport

    Raises:
        ConvergenceError: el ajuste no convergió (reporte retenido)
    """
    object_of_interest = object_of_interest or ds.object_of_interest
    factors = list(random_factors)
    if object_of_interest not in factors:
        raise DataError(
            f"El objeto de interés '{object_of_interest}' debe estar entre los factores aleatorios"
        )
    for a, b in interactions:
        ds = ds.with_interaction_factor(a, b)
        factors.append(f"{a}:{b}")

    opts = (opts or FitOptions()).replace(criterion=REML)
    spec = ModelSpec(ds.response_name, (), tuple(factors), True)
    fm = fit_dataset(ds, spec, opts, REML)
    if not fm.converged:
        raise ConvergenceError(
            f"El ajuste VCA no convergió tras {fm.n_iter} evaluaciones; "
            f"varianzas provisionales: {fm.sigma2}"
        )
    components = {f: fm.sigma2[f] for f in factors}
    components[RESIDUAL] = fm.sigma2[RESIDUAL]
    report = build_vca_report(components, object_of_interest, threshold, ds.fingerprint(),
                              fm.converged)
    logger.info(f"VCA: phi={report.phi:.4f} ({report.interpretation})")
    return report


def vca_with_interactions(
    ds: EvalDataset,
    fixed_meta: str,
    covariate: str,
    object_factor: Optional[str] = None,
    opts: Optional[FitOptions] = None,
    grid_points: int = 50,
) -> InteractionAnalysis:
    """
    Meta-parámetro como efecto fijo con interacción con una propiedad de los datos:
    Y = b + r + d + r:d + (1|s), ajustado por ML. La significancia del bloque de
    interacción se prueba contra el modelo sin r:d.

    Raises:
        DegenerateTestError: interacción completamente aliada (covariable constante)
    """
    object_factor = object_factor or ds.object_of_interest
    if not ds.has_factor(fixed_meta):
        raise UnknownFactorError(f"Factor desconocido: {fixed_meta}")
    if not ds.has_covariate(covariate):
        raise UnknownFactorError(f"Covariable desconocida: {covariate}")
    r = FixedTerm((fixed_meta,))
    d = FixedTerm((covariate,))
    rd = FixedTerm((fixed_meta, covariate))
    restricted = ModelSpec(ds.response_name, (r, d), (object_factor,), True)
    general = restricted.with_terms(rd)
    result, _, fm_g = compare_models(ds, restricted, general, opts)
    grid = interaction_grid(fm_g, covariate, grid_points, factor=fixed_meta)
    return InteractionAnalysis(
        fit=fm_g,
        glrt=result,
        grid=grid,
        scaling=fm_g.scaling.to_dict() if fm_g.scaling else {},
    )

