"""
Pruebas de razón de verosimilitud generalizada (GLRT) entre LMEM anidados,
pruebas condicionales a una propiedad de los datos y tamaños de efecto.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from reprolmm.errors import (
    DataError, DegenerateTestError, InfiniteEffectError, NonNestedModelsError, UnknownFactorError
)
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.model_spec import FixedTerm, ModelSpec
from reprolmm.models.results import (
    ML, REML, ConditionalResult, FitOptions, FittedModel, GlrtResult
)
from reprolmm.services.lmem_service import fit_dataset, interaction_grid

logger = logging.getLogger(__name__)


@dataclass
class PairedTestResult:
    """Prueba t pareada sobre diferencias por objeto (baseline - competidor)."""
    statistic: float
    df: int
    p_value: float
    mean_difference: float
    n_objects: int


def _ml_options(opts: Optional[FitOptions]) -> FitOptions:
    opts = opts or FitOptions(criterion=ML)
    if opts.criterion == REML:
        logger.warning("La GLRT compara efectos fijos: se ajusta con ML en lugar de REML")
        opts = opts.replace(criterion=ML)
    return opts


def compare_models(
    ds: EvalDataset,
    restricted: ModelSpec,
    general: ModelSpec,
    opts: Optional[FitOptions] = None,
    standardize: Optional[bool] = None,
) -> Tuple[GlrtResult, FittedModel, FittedModel]:
    """
    Ajusta ambos modelos por ML y calcula la GLRT.

    Returns:
        Tupla (resultado, ajuste_restringido, ajuste_general)
    """
    if not restricted.is_nested_in(general):
        raise NonNestedModelsError(
            f"'{restricted.to_formula()}' no está anidado en '{general.to_formula()}'"
        )
    opts = _ml_options(opts)

    fm_r = fit_dataset(ds, restricted, opts, ML, standardize, scaling_spec=general)
    fm_g = fit_dataset(ds, general, opts, ML, standardize, scaling_spec=general)

    df = fm_g.k - fm_r.k
    dropped = sorted(set(fm_r.dropped_columns) | set(fm_g.dropped_columns))
    if df <= 0:
        raise DegenerateTestError(
            f"La prueba no tiene grados de libertad (df={df}); columnas aliadas: "
            f"{', '.join(dropped) or 'ninguna'}"
        )

    stat = max(0.0, fm_r.deviance - fm_g.deviance)
    converged = fm_r.converged and fm_g.converged
    p_value = float(stats.chi2.sf(stat, df)) if converged else None
    if not converged:
        logger.warning("Algún ajuste no convergió: se omite el p-valor")

    result = GlrtResult(
        stat=float(stat),
        df=int(df),
        p_value=p_value,
        lambda_ratio=math.exp(-stat / 2.0),
        converged_restricted=fm_r.converged,
        converged_general=fm_g.converged,
        dropped_columns=dropped,
        restricted_formula=restricted.to_formula(),
        general_formula=general.to_formula(),
        deviance_restricted=fm_r.deviance,
        deviance_general=fm_g.deviance,
        fingerprint=ds.fingerprint(),
    )

    factor = _added_factor(ds, restricted, general)
    if factor is not None:
        result.means = level_means(ds, factor)
        levels = ds.levels(factor)
        if len(levels) == 2:
            labels = ds.labels(factor)
            try:
                result.effect_size = standardized_mean_difference(
                    ds.response[labels == levels[0]], ds.response[labels == levels[1]]
                )
            except InfiniteEffectError as e:
                logger.warning(f"Tamaño de efecto no definido: {e}")
    logger.info(
        f"GLRT stat={result.stat:.6g} df={result.df} p={result.p_value} "
        f"({restricted.to_formula()} vs {general.to_formula()})"
    )
    return result, fm_r, fm_g


def glrt(ds: EvalDataset, restricted: ModelSpec, general: ModelSpec,
         opts: Optional[FitOptions] = None, standardize: Optional[bool] = None) -> GlrtResult:
    """
    GLRT entre dos modelos anidados.

    Args:
        ds: Dataset de evaluación
        restricted: Modelo restringido (p. ej. m0: 1 + (1|sentence))
        general: Modelo general (p. ej. m1: 1 + system + (1|sentence))
        opts: Opciones del optimizador (el criterio se fuerza a ML)
        standardize: Estandarización de covariables (None = automática)

    Returns:
        GlrtResult (p_value None si algún ajuste no convergió)
    """
    result, _, _ = compare_models(ds, restricted, general, opts, standardize)
    return result


def _added_factor(ds: EvalDataset, restricted: ModelSpec, general: ModelSpec) -> Optional[str]:
    """Factor del único término que agrega el modelo general, si es un efecto principal de factor."""
    added = general.term_keys() - restricted.term_keys()
    if len(added) != 1:
        return None
    (key,) = added
    if len(key) != 1:
        return None
    (name,) = key
    return name if ds.has_factor(name) else None


def level_means(ds: EvalDataset, factor: str) -> Dict[str, float]:
    """Media de la respuesta por nivel del factor (orden declarado)."""
    codes = ds.codes(factor)
    sums = np.bincount(codes, weights=ds.response, minlength=len(ds.levels(factor)))
    counts = np.bincount(codes, minlength=len(ds.levels(factor)))
    return {
        level: float(sums[i] / counts[i])
        for i, level in enumerate(ds.levels(factor)) if counts[i] > 0
    }


def standardized_mean_difference(scores_a: Sequence[float], scores_b: Sequence[float]) -> float:
    """
    d de Cohen con desviación combinada: (media_a - media_b) / s_pooled.

    El primer argumento es el baseline, de modo que un valor negativo indica
    que el competidor obtiene scores más altos.

    Raises:
        DataError: vector vacío
        InfiniteEffectError: s_pooled = 0 con medias distintas
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DataError("Ambos vectores de scores deben tener elementos")
    diff = float(np.mean(a) - np.mean(b))
    dof = a.size + b.size - 2
    ss = 0.0
    if a.size > 1:
        ss += (a.size - 1) * float(np.var(a, ddof=1))
    if b.size > 1:
        ss += (b.size - 1) * float(np.var(b, ddof=1))
    pooled = math.sqrt(ss / dof) if dof > 0 else 0.0
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0
        raise InfiniteEffectError(
            f"Desviación combinada cero con medias distintas (diferencia {diff:.6g})"
        )
    return diff / pooled


def paired_t_test(ds: EvalDataset, system: str, object_factor: Optional[str] = None,
                  levels: Optional[Tuple[str, str]] = None) -> PairedTestResult:
    """
    Prueba t pareada clásica sobre la diferencia de medias por objeto.

    Args:
        ds: Dataset
        system: Factor de sistemas
        object_factor: Factor de objetos (por defecto el objeto de interés)
        levels: (baseline, competidor); por defecto los dos primeros niveles

    Returns:
        PairedTestResult
    """
    object_factor = object_factor or ds.object_of_interest
    all_levels = ds.levels(system)
    if levels is None:
        if len(all_levels) < 2:
            raise DataError(f"El factor '{system}' necesita al menos 2 niveles")
        levels = (all_levels[0], all_levels[1])
    for level in levels:
        if level not in all_levels:
            raise UnknownFactorError(f"Nivel desconocido en '{system}': {level}")

    m = len(ds.levels(object_factor))
    obj = ds.codes(object_factor)
    sys_codes = ds.codes(system)
    means = []
    for level in levels:
        mask = sys_codes == all_levels.index(level)
        sums = np.bincount(obj[mask], weights=ds.response[mask], minlength=m)
        counts = np.bincount(obj[mask], minlength=m)
        means.append((sums, counts))
    (s_a, n_a), (s_b, n_b) = means
    both = (n_a > 0) & (n_b > 0)
    if int(both.sum()) < 2:
        raise DataError("Se necesitan al menos 2 objetos observados con ambos sistemas")
    mean_a = s_a[both] / n_a[both]
    mean_b = s_b[both] / n_b[both]
    res = stats.ttest_rel(mean_a, mean_b)
    return PairedTestResult(
        statistic=float(res.statistic),
        df=int(both.sum()) - 1,
        p_value=float(res.pvalue),
        mean_difference=float(np.mean(mean_a - mean_b)),
        n_objects=int(both.sum()),
    )


def conditional_specs(
    ds: EvalDataset,
    covariate: str,
    system: str,
    object_factor: Optional[str] = None,
    extra_random: Sequence[str] = (),
    interaction_only: bool = False,
) -> Tuple[ModelSpec, ModelSpec]:
    """
    Modelos m0' = 1 + d + (1|s) y m1' = 1 + d + c + c:d + (1|s).
    Con interaction_only el restringido incluye c y la prueba es solo de c:d.
    """
    object_factor = object_factor or ds.object_of_interest
    if not ds.has_covariate(covariate):
        raise UnknownFactorError(f"Covariable desconocida: {covariate}")
    if not ds.has_factor(system):
        raise UnknownFactorError(f"Factor de sistemas desconocido: {system}")
    random = (object_factor,) + tuple(f for f in extra_random if f != object_factor)
    d = FixedTerm((covariate,))
    c = FixedTerm((system,))
    cd = FixedTerm((system, covariate))
    base = ModelSpec(ds.response_name, (d,), random, True)
    general = base.with_terms(c, cd)
    restricted = base.with_terms(c) if interaction_only else base
    return restricted, general


def glrt_conditional(
    ds: EvalDataset,
    covariate: str,
    system: str = 'system',
    object_factor: Optional[str] = None,
    extra_random: Sequence[str] = (),
    interaction_only: bool = False,
    opts: Optional[FitOptions] = None,
    grid_points: int = 50,
) -> ConditionalResult:
    """
    GLRT condicional a la propiedad de los datos d (conjunta sobre beta_c y
    beta_cd con df = 2, o solo beta_cd con interaction_only).

    Una covariable constante deja aliadas las columnas de d y c:d; la prueba
    degenera en la comparación m0 contra m1 con df = 1.

    Returns:
        ConditionalResult con la GLRT, el ajuste general, sus coeficientes y
        la rejilla de interacción
    """
    restricted, general = conditional_specs(
        ds, covariate, system, object_factor, extra_random, interaction_only
    )
    result, _, fm_g = compare_models(ds, restricted, general, opts)
    grid = interaction_grid(fm_g, covariate, grid_points, factor=system)
    return ConditionalResult(
        covariate=covariate,
        glrt=result,
        fit_general=fm_g,
        coefficients=fm_g.coefficients(),
        grid=grid,
        scaling=fm_g.scaling.to_dict() if fm_g.scaling else {},
        coefficients_original=fm_g.original_coefficients(),
    )
