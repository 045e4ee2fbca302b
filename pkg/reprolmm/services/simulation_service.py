"""
Simulación de datasets de evaluación con verdad de referencia conocida y
estudios Monte Carlo (calibración y potencia).

Generador: numpy PCG64 inicializado con SeedSequence(seed). Cada dataset usa
cuatro sub-streams derivados con spawn, en este orden: covariables, efectos
aleatorios, residuos y dropout. La réplica i de un estudio usa la semilla
SeedSequence(seed, spawn_key=(i,)), independiente del orden de ejecución.
"""
import logging
import threading
from queue import Empty, Queue
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config import Config
from reprolmm.errors import SimulationSpecError
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.simulation import McSummary, SimSpec

logger = logging.getLogger(__name__)

INTERCEPT_TERMS = ('intercept', '(intercept)', '1')


def _generator(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seq))


def replication_seed(seed: int, index: int) -> int:
    """Semilla derivada de la réplica `index`."""
    seq = np.random.SeedSequence(seed, spawn_key=(index,))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _parse_indicator(part: str):
    """'factor[nivel]' o 'factor[T.nivel]' -> (factor, nivel); None si no es indicador."""
    if not part.endswith(']') or '[' not in part:
        return None
    factor, level = part[:-1].split('[', 1)
    if level.startswith('T.'):
        level = level[2:]
    return factor, level


def _term_values(term: str, spec: SimSpec, labels: Dict[str, np.ndarray],
                 covariates: Dict[str, np.ndarray], n: int) -> np.ndarray:
    if term.strip().lower() in INTERCEPT_TERMS:
        return np.ones(n)
    values = np.ones(n)
    for part in term.split(':'):
        part = part.strip()
        indicator = _parse_indicator(part)
        if indicator is not None:
            factor, level = indicator
            if factor not in labels:
                raise SimulationSpecError(f"Factor desconocido en el término '{term}': {factor}")
            if level not in spec.levels(factor):
                raise SimulationSpecError(f"Nivel desconocido en el término '{term}': {level}")
            values = values * (labels[factor] == level)
        elif part in covariates:
            values = values * covariates[part]
        else:
            raise SimulationSpecError(f"Término de efecto fijo desconocido: '{term}'")
    return values


def simulate(spec: SimSpec) -> EvalDataset:
    """
    Genera un dataset completamente cruzado a partir de la especificación.

    Args:
        spec: Especificación validada

    Returns:
        EvalDataset (determinista dada la semilla)
    """
    streams = np.random.SeedSequence(spec.seed).spawn(4)
    rng_cov, rng_effects, rng_resid, rng_drop = (_generator(s) for s in streams)

    names = spec.factor_names
    all_levels = [spec.levels(name) for name in names]
    grids = np.meshgrid(*[np.arange(len(lv)) for lv in all_levels], indexing='ij')
    codes = {name: g.ravel().astype(np.int64) for name, g in zip(names, grids)}
    n = codes[names[0]].shape[0]
    labels = {
        name: np.asarray(levels, dtype=object)[codes[name]]
        for name, levels in zip(names, all_levels)
    }

    obj = codes[spec.object_factor]
    covariates = {}
    for name, (mean, sd) in spec.covariates.items():
        per_object = rng_cov.normal(mean, sd, size=spec.n_objects)
        covariates[name] = per_object[obj]

    y = np.zeros(n)
    for term, coef in spec.fixed_effects.items():
        y += float(coef) * _term_values(term, spec, labels, covariates, n)

    for name, variance in spec.variance_components.items():
        m = len(spec.levels(name))
        effects = rng_effects.normal(0.0, np.sqrt(variance), size=m)
        y += effects[codes[name]]

    y += rng_resid.normal(0.0, spec.residual_sd, size=n)

    if spec.dropout > 0.0:
        keep = rng_drop.random(n) >= spec.dropout
        if not keep.any():
            raise SimulationSpecError("El dropout eliminó todas las filas")
    else:
        keep = np.ones(n, dtype=bool)

    ds = EvalDataset(
        response=y[keep],
        factor_codes={name: c[keep] for name, c in codes.items()},
        factor_levels={name: lv for name, lv in zip(names, all_levels)},
        covariates={name: v[keep] for name, v in covariates.items()},
        response_name=spec.response_name,
        object_of_interest=spec.object_factor,
    )
    if spec.dropout > 0.0:
        # niveles que desaparecen por completo se podan
        ds = ds.filter_rows(np.ones(len(ds), dtype=bool))
    logger.debug(f"Simulación seed={spec.seed}: {len(ds)} filas")
    return ds


class MonteCarloRunner:
    """
    Ejecuta réplicas simulate + análisis en paralelo con threads.
    Los resultados se ordenan por índice de réplica.
    """

    def __init__(self, max_workers: Optional[int] = None):
        """
        Args:
            max_workers: Número máximo de threads (por defecto Config.MC_MAX_WORKERS)
        """
        self.max_workers = max(1, int(max_workers or Config.MC_MAX_WORKERS))
        self.lock = threading.Lock()
        self.logger = logger

    def run(self, spec: SimSpec, analysis: Callable[[EvalDataset], Any], replications: int,
            progress_callback: Optional[Callable[[int, int], None]] = None) -> McSummary:
        """
        Args:
            spec: Especificación base (su semilla deriva las de cada réplica)
            analysis: Función dataset -> resultado (número o dict de números)
            replications: Número de réplicas (>= 1)
            progress_callback: Función (hechas, total)

        Returns:
            McSummary

        Raises:
            La primera excepción del análisis (menor índice), con el atributo
            `replication` y el índice en el mensaje de log
        """
        if replications < 1:
            raise SimulationSpecError("replications debe ser >= 1")
        seeds = [replication_seed(spec.seed, i) for i in range(replications)]
        results: List[Any] = [None] * replications
        errors: Dict[int, BaseException] = {}
        done = [0]

        work_queue: Queue = Queue()
        for i in range(replications):
            work_queue.put(i)

        def worker():
            while True:
                try:
                    i = work_queue.get_nowait()
                except Empty:
                    break
                try:
                    value = analysis(simulate(spec.replace(seed=seeds[i])))
                    with self.lock:
                        results[i] = value
                except Exception as e:
                    self.logger.error(f"Error en la réplica {i}: {e}")
                    with self.lock:
                        errors[i] = e
                finally:
                    with self.lock:
                        done[0] += 1
                        if progress_callback:
                            progress_callback(done[0], replications)
                    work_queue.task_done()

        threads = []
        for _ in range(min(self.max_workers, replications)):
            thread = threading.Thread(target=worker, daemon=True)
            thread.start()
            threads.append(thread)
        for thread in threads:
            thread.join()

        if errors:
            index = min(errors)
            error = errors[index]
            error.replication = index
            raise error
        return McSummary(results=results, seeds=seeds)


def mc_study(spec: SimSpec, analysis: Callable[[EvalDataset], Any], replications: int,
             max_workers: Optional[int] = None) -> McSummary:
    """Estudio Monte Carlo: `replications` réplicas con sub-semillas derivadas."""
    return MonteCarloRunner(max_workers).run(spec, analysis, replications)
