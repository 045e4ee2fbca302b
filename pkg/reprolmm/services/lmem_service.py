"""
Servicio de estimación de LMEM (subfamilia de componentes de varianza).

La verosimilitud (ML) o verosimilitud restringida (REML) se perfila sobre
beta y sigma2_res, y solo se optimizan los cocientes gamma_j = sigma2_j / sigma2_res.
Se usa la formulación de mínimos cuadrados penalizados con factor relativo
Lambda = diag(sqrt(gamma_j)) repetido por nivel:

    [Lambda Z'Z Lambda + I, Lambda Z'X, Lambda Z'y]
    [X'Z Lambda,            X'X,        X'y       ]  = L L'
    [y'Z Lambda,            y'X,        y'y       ]

de modo que log|Lambda Z'Z Lambda + I|, log|R_X|^2 y la suma de cuadrados
penalizada r^2 salen directamente de la diagonal de L. Con gamma_j = 0 el
bloque queda como identidad (equivale a excluirlo).
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg
from scipy.optimize import minimize

from reprolmm.errors import DataError, ModelSpecError, NumericalError, ColumnMismatchError
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.design import DesignMatrices, ScalingRecord
from reprolmm.models.model_spec import ModelSpec
from reprolmm.models.results import (
    ML, REML, FitOptions, FittedModel, InteractionGrid, VarianceParams, normalize_criterion
)
from reprolmm.services.design_service import auto_standardize, build_design

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class PenalizedSystem:
    """
    Productos cruzados precomputados para evaluar la deviance perfilada.

    Dos rutas de factorización:
    - densa: Cholesky del sistema completo cuando k + sum(m_j) <= dense_threshold;
    - por bloques: el bloque aleatorio con más niveles (Z_b'Z_b diagonal) se
      elimina primero de forma analítica y el complemento de Schur restante se
      factoriza denso (o disperso si sigue siendo grande).

    Las filas se ordenan canónicamente antes de sumar, así que el resultado
    no depende del orden de filas del dataset.
    """

    def __init__(self, dm: DesignMatrices, y: np.ndarray, dense_threshold: int = 2000):
        y = np.asarray(y, dtype=float)
        if y.shape[0] != dm.n_obs:
            raise DataError(f"La respuesta tiene {y.shape[0]} filas y el diseño {dm.n_obs}")
        self.n = dm.n_obs
        self.k = dm.k
        self.J = len(dm.z_codes)
        self.m = [len(levels) for levels in dm.z_levels]
        self.column_names = list(dm.column_names)

        order = self._canonical_order(dm, y)
        X = dm.X[order]
        y = y[order]
        codes = [c[order] for c in dm.z_codes]

        # Centrado y escala de y para el condicionamiento de y'y
        self.y_shift, self.shift_coef = self._intercept_shift(X, y)
        y_c = y - self.y_shift
        scale = float(np.std(y_c))
        self.y_scale = scale if scale > 0.0 else 1.0
        y_s = y_c / self.y_scale
        self.yy = float(y_s @ y_s)
        if self.yy == 0.0:
            raise NumericalError("Respuesta constante: la varianza residual es nula")

        blocks = [self._indicator(c, mj) for c, mj in zip(codes, self.m)]
        dense_size = sum(self.m) + self.k
        self.blocked = self.J > 0 and dense_size > dense_threshold
        self.dense_threshold = dense_threshold

        tail = sps.csr_matrix(np.column_stack([X, y_s])) if self.k else sps.csr_matrix(y_s[:, None])
        if not self.blocked:
            self.order_z = list(range(self.J))
            W = sps.hstack(blocks + [tail], format='csr')
            self.G = np.asarray((W.T @ W).todense())
        else:
            self.b = int(np.argmax(self.m))
            self.order_z = [j for j in range(self.J) if j != self.b]
            rest = [blocks[j] for j in self.order_z]
            W_rest = sps.hstack(rest + [tail], format='csr')
            Zb = blocks[self.b]
            self.counts_b = np.asarray(Zb.sum(axis=0)).ravel()
            self.B = Zb.T @ W_rest
            self.H = W_rest.T @ W_rest
            self.rest_size = W_rest.shape[1]
            if self.rest_size <= dense_threshold:
                self.B = np.asarray(self.B.todense())
                self.H = np.asarray(self.H.todense())
            logger.debug(
                f"Eliminación por bloques: factor {dm.random_factors[self.b]} "
                f"({self.m[self.b]} niveles), sistema restante {self.rest_size}"
            )
        self.q_rest = sum(self.m[j] for j in self.order_z)

    # === Preparación ===

    @staticmethod
    def _canonical_order(dm: DesignMatrices, y: np.ndarray) -> np.ndarray:
        keys = [y] + [dm.X[:, j] for j in range(dm.k - 1, -1, -1)]
        keys += [c for c in reversed(dm.z_codes)]
        return np.lexsort(keys)

    @staticmethod
    def _indicator(codes: np.ndarray, m: int) -> sps.csr_matrix:
        n = codes.shape[0]
        return sps.csr_matrix((np.ones(n), (np.arange(n), codes)), shape=(n, m))

    @staticmethod
    def _intercept_shift(X: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
        """
        Si el vector constante está en el espacio columna de X, centra y en su
        media y devuelve los coeficientes a con X a = 1 para reponer el desplazamiento en beta.
        """
        n, k = X.shape
        if k == 0:
            return 0.0, np.zeros(0)
        ones = np.ones(n)
        a, *_ = np.linalg.lstsq(X, ones, rcond=None)
        if np.linalg.norm(X @ a - ones) > 1e-8 * math.sqrt(n):
            return 0.0, np.zeros(k)
        return float(np.mean(y)), a

    # === Factorización ===

    def _scale_vector(self, gamma: np.ndarray, factors: List[int]) -> np.ndarray:
        parts = [np.full(self.m[j], math.sqrt(gamma[j])) for j in factors]
        parts.append(np.ones(self.k + 1))
        return np.concatenate(parts)

    def _cholesky(self, A: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        """
        Cholesky del bloque [u, beta] y fila de la respuesta por sustitución.

        Returns:
            Tupla (L del bloque, l con L l = A[:-1, -1], r2 escalada)
        """
        M = A[:-1, :-1]
        b = A[:-1, -1]
        if M.shape[0] == 0:
            return M, b, self._floor(float(A[-1, -1]))
        try:
            L = scipy.linalg.cholesky(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            cond = float(np.linalg.cond(M))
            raise NumericalError(
                f"Sistema penalizado singular (número de condición {cond:.3e})",
                condition_number=cond
            )
        l = scipy.linalg.solve_triangular(L, b, lower=True, check_finite=False)
        return L, l, self._floor(float(A[-1, -1] - l @ l))

    def _floor(self, r2: float) -> float:
        # Ajuste exacto: r2 cae a cero (o negativo por redondeo)
        return max(r2, self.yy * np.finfo(float).eps ** 2)

    def factorize(self, gamma) -> dict:
        """
        Factoriza el sistema penalizado para gamma dado.

        Returns:
            Diccionario con logdet_z, logdet_x, r2 (escala original) y los
            factores necesarios para resolver beta y los modos aleatorios.
        """
        gamma = np.asarray(gamma, dtype=float)
        q_tail = self.k
        if not self.blocked:
            s = self._scale_vector(gamma, self.order_z)
            A = self.G * np.outer(s, s)
            q = sum(self.m)
            idx = np.arange(q)
            A[idx, idx] += 1.0
            L, l, r2 = self._cholesky(A)
            d = np.diag(L)
            logdet_z = 2.0 * float(np.sum(np.log(d[:q])))
            logdet_x = 2.0 * float(np.sum(np.log(d[q:q + q_tail])))
            return {'L': L, 'l': l, 'q': q, 'logdet_z': logdet_z, 'logdet_x': logdet_x,
                    'r2': r2 * self.y_scale ** 2, 'dense': True, 's': s}

        gb = gamma[self.b]
        c = gb * self.counts_b + 1.0
        s = self._scale_vector(gamma, self.order_z)
        q = self.q_rest
        if sps.issparse(self.H):
            return self._factorize_sparse(gb, c, s, q)
        Bs = math.sqrt(gb) * self.B * s[None, :]
        S = self.H * np.outer(s, s)
        idx = np.arange(q)
        S[idx, idx] += 1.0
        S -= Bs.T @ (Bs / c[:, None])
        L, l, r2 = self._cholesky(S)
        d = np.diag(L)
        logdet_z = float(np.sum(np.log(c))) + 2.0 * float(np.sum(np.log(d[:q])))
        logdet_x = 2.0 * float(np.sum(np.log(d[q:q + q_tail])))
        return {'L': L, 'l': l, 'q': q, 'logdet_z': logdet_z, 'logdet_x': logdet_x,
                'r2': r2 * self.y_scale ** 2, 'dense': False, 's': s, 'c': c, 'Bs': Bs}

    def _factorize_sparse(self, gb: float, c: np.ndarray, s: np.ndarray, q: int) -> dict:
        """Complemento de Schur disperso: LU sin pivoteo (orden natural) sobre una matriz SPD."""
        Sd = sps.diags(s)
        Bs = (self.B @ Sd) * math.sqrt(gb)
        S = Sd @ self.H @ Sd
        S = S + sps.diags(np.concatenate([np.ones(q), np.zeros(self.k + 1)]))
        S = (S - Bs.T @ sps.diags(1.0 / c) @ Bs).tocsc()
        M = S[:-1, :-1].tocsc()
        b = S[:-1, -1].toarray().ravel()
        try:
            lu = scipy.sparse.linalg.splu(M, permc_spec='NATURAL', diag_pivot_thresh=0.0,
                                          options={'SymmetricMode': True})
        except RuntimeError as e:
            raise NumericalError(f"Sistema penalizado singular: {e}")
        pivots = lu.U.diagonal()
        if np.any(pivots <= 0):
            raise NumericalError("Sistema penalizado no definido positivo")
        x = lu.solve(b)
        r2 = self._floor(float(S[-1, -1] - b @ x))
        logs = np.log(pivots)
        logdet_z = float(np.sum(np.log(c))) + float(np.sum(logs[:q]))
        logdet_x = float(np.sum(logs[q:q + self.k]))
        return {'x': x, 'q': q, 'logdet_z': logdet_z, 'logdet_x': logdet_x,
                'r2': r2 * self.y_scale ** 2, 'dense': False, 's': s, 'c': c, 'Bs': Bs}

    # === Deviance y soluciones ===

    def deviance(self, gamma, criterion: str) -> float:
        f = self.factorize(gamma)
        return self._deviance_from(f, criterion)

    def _deviance_from(self, f: dict, criterion: str) -> float:
        n = self.n
        if criterion == ML:
            return f['logdet_z'] + n * (1.0 + LOG_2PI + math.log(f['r2'] / n))
        dof = n - self.k
        return f['logdet_z'] + f['logdet_x'] + dof * (1.0 + LOG_2PI + math.log(f['r2'] / dof))

    def solve(self, gamma) -> dict:
        """
        Resuelve beta y los modos aleatorios esféricos u en la escala original.

        Returns:
            Diccionario con beta, r2, logdet_* y u por factor (en orden de dm)
        """
        gamma = np.asarray(gamma, dtype=float)
        f = self.factorize(gamma)
        k = self.k
        if 'x' in f:
            x_rest = f['x']
        elif f['L'].shape[0] == 0:
            x_rest = np.zeros(0)
        else:
            x_rest = scipy.linalg.solve_triangular(f['L'].T, f['l'], lower=False, check_finite=False)
        beta_s = x_rest[len(x_rest) - k:] if k else np.zeros(0)
        u_parts = {}
        offset = 0
        for j in self.order_z:
            u_parts[j] = x_rest[offset:offset + self.m[j]]
            offset += self.m[j]
        if self.blocked:
            Bs = f['Bs']
            if sps.issparse(Bs):
                Bs = Bs.toarray()
            u_parts[self.b] = (Bs[:, -1] - Bs[:, :-1] @ x_rest) / f['c']
        beta = beta_s * self.y_scale + self.y_shift * self.shift_coef
        u = [u_parts[j] * self.y_scale for j in range(self.J)]
        f.update({'beta': beta, 'u': u})
        return f


def profiled_deviance(dm: DesignMatrices, y: np.ndarray, gamma: VarianceParams,
                      criterion: str = REML, dense_threshold: int = 2000) -> float:
    """
    -2 veces la log-verosimilitud (ML) o log-verosimilitud restringida (REML)
    perfilada sobre beta y sigma2_res, evaluada en gamma.

    Args:
        dm: Matrices de diseño
        y: Vector de respuesta
        gamma: Cocientes de varianza (uno por factor aleatorio)
        criterion: 'ML' o 'REML'

    Returns:
        Deviance perfilada
    """
    criterion = normalize_criterion(criterion)
    if not isinstance(gamma, VarianceParams):
        gamma = VarianceParams(tuple(gamma))
    if len(gamma) != len(dm.z_codes):
        raise DataError(f"gamma tiene {len(gamma)} entradas y hay {len(dm.z_codes)} factores aleatorios")
    system = PenalizedSystem(dm, y, dense_threshold)
    return system.deviance(gamma.gamma, criterion)


def _check_identifiable(dm: DesignMatrices):
    if dm.n_obs <= dm.k + len(dm.z_codes):
        raise ModelSpecError(
            f"Observaciones insuficientes: N={dm.n_obs} <= k + J = {dm.k + len(dm.z_codes)}"
        )
    if dm.n_obs - dm.k <= 0:
        raise ModelSpecError("Sin grados de libertad residuales")


def fit(dm: DesignMatrices, y: np.ndarray, criterion: str = REML,
        opts: Optional[FitOptions] = None) -> FittedModel:
    """
    Ajusta el LMEM minimizando la deviance perfilada sobre gamma >= 0.

    Nelder-Mead acotado sobre delta_j = log(1 + gamma_j) >= 0, inicio en gamma_j = 1.
    Los óptimos en la frontera (gamma_j = 0) son resultados válidos.

    Args:
        dm: Matrices de diseño
        y: Vector de respuesta
        criterion: 'ML' o 'REML'
        opts: Opciones del optimizador

    Returns:
        FittedModel (converged=False si se agotan las evaluaciones)
    """
    opts = opts or FitOptions(criterion=criterion)
    criterion = normalize_criterion(criterion)
    _check_identifiable(dm)
    system = PenalizedSystem(dm, y, opts.dense_threshold)
    J = system.J

    def objective(delta):
        return system.deviance(np.expm1(np.clip(delta, 0.0, None)), criterion)

    if J == 0:
        delta_hat = np.zeros(0)
        converged, n_iter = True, 0
    else:
        x0 = np.full(J, math.log(2.0))
        fatol = opts.ftol_rel * max(1.0, abs(objective(x0)))
        simplex = np.vstack([x0] + [x0 + 0.5 * np.eye(J)[i] for i in range(J)])
        res = minimize(
            objective, x0, method='Nelder-Mead',
            bounds=[(0.0, None)] * J,
            options={
                'maxfev': opts.max_iter,
                'maxiter': opts.max_iter,
                'xatol': opts.xtol,
                'fatol': fatol,
                'initial_simplex': simplex,
            },
        )
        delta_hat = np.clip(res.x, 0.0, None)
        n_iter = int(res.nfev)
        converged = bool(res.success) and _simplex_converged(res, fatol, opts.xtol)
        if not converged:
            logger.warning(
                f"El optimizador no convergió tras {n_iter} evaluaciones: {res.message}"
            )

    gamma_hat = np.expm1(delta_hat)
    sol = system.solve(gamma_hat)
    deviance = system._deviance_from(sol, criterion)
    dof = system.n if criterion == ML else system.n - system.k
    sigma2_res = sol['r2'] / dof
    sigma2 = {f: float(g * sigma2_res) for f, g in zip(dm.random_factors, gamma_hat)}
    sigma2['residual'] = float(sigma2_res)

    return FittedModel(
        beta_hat=np.asarray(sol['beta'], dtype=float),
        column_names=list(dm.column_names),
        sigma2=sigma2,
        log_likelihood=-0.5 * deviance,
        criterion=criterion,
        converged=converged,
        n_iter=n_iter,
        n_obs=dm.n_obs,
        gamma=VarianceParams(tuple(gamma_hat)),
        dropped_columns=list(dm.dropped_columns),
        random_factors=list(dm.random_factors),
        factor_levels={k: list(v) for k, v in dm.factor_levels.items()},
    )


def _simplex_converged(res, fatol: float, xatol: float) -> bool:
    """El simplex final cumple ambas tolerancias (deviance y parámetros)."""
    simplex, values = res.final_simplex
    f_change = float(np.max(np.abs(values - values[0])))
    x_change = float(np.max(np.abs(simplex - simplex[0])))
    return f_change <= fatol and x_change <= xatol


def fit_dataset(ds: EvalDataset, spec: ModelSpec, opts: Optional[FitOptions] = None,
                criterion: Optional[str] = None, standardize: Optional[bool] = None,
                scaling_spec: Optional[ModelSpec] = None) -> FittedModel:
    """
    Estandariza (si corresponde), construye el diseño y ajusta el modelo.

    Args:
        ds: Dataset de evaluación
        spec: Especificación del modelo
        opts: Opciones del optimizador
        criterion: Sobrescribe opts.criterion
        standardize: None = automático (solo con interacciones de covariables)
        scaling_spec: Modelo que decide qué covariables se estandarizan; en una
            comparación ambos modelos usan el del modelo general

    Returns:
        FittedModel con spec, escala y resumen de covariables adjuntos
    """
    opts = opts or FitOptions()
    criterion = normalize_criterion(criterion or opts.criterion)
    covariates = [v for v in spec.variables if ds.has_covariate(v)]
    summary = {
        name: (float(np.min(ds.covariate(name))), float(np.max(ds.covariate(name))),
               float(np.mean(ds.covariate(name))))
        for name in covariates
    }
    ds_std, scaling = auto_standardize(ds, scaling_spec or spec, standardize)
    dm = build_design(ds_std, spec, alias_tol=opts.alias_tol)
    fm = fit(dm, ds_std.response, criterion, opts)
    fm.formula = spec.to_formula()
    fm.spec = spec
    fm.covariate_summary = summary
    fm.scaling = scaling
    logger.info(
        f"Modelo ajustado ({criterion}) '{fm.formula}': deviance={fm.deviance:.6f}, "
        f"convergió={fm.converged}"
    )
    return fm


def predict_fixed(fm: FittedModel, dm_new: DesignMatrices) -> np.ndarray:
    """
    Predicciones poblacionales X_new @ beta (efectos aleatorios en su media 0).

    Raises:
        ColumnMismatchError: si las columnas no coinciden con las del modelo
    """
    if list(dm_new.column_names) != list(fm.column_names):
        raise ColumnMismatchError(
            f"Columnas {dm_new.column_names} no coinciden con {fm.column_names}"
        )
    return dm_new.X @ fm.beta_hat


def random_effect_modes(dm: DesignMatrices, y: np.ndarray, fm: FittedModel,
                        dense_threshold: int = 2000) -> Dict[str, Dict[str, float]]:
    """
    Modos condicionales (BLUP) de los interceptos aleatorios en el óptimo.

    Returns:
        Mapa factor -> {nivel: efecto predicho}
    """
    system = PenalizedSystem(dm, y, dense_threshold)
    gamma = np.asarray(fm.gamma.gamma, dtype=float)
    sol = system.solve(gamma)
    out = {}
    for j, factor in enumerate(dm.random_factors):
        b = math.sqrt(gamma[j]) * sol['u'][j]
        out[factor] = {level: float(v) for level, v in zip(dm.z_levels[j], b)}
    return out


def dataset_modes(ds: EvalDataset, fm: FittedModel,
                  opts: Optional[FitOptions] = None) -> Dict[str, Dict[str, float]]:
    """BLUP de un modelo ajustado con fit_dataset, reconstruyendo su diseño."""
    opts = opts or FitOptions()
    if fm.spec is None:
        raise DataError("El modelo no conserva su especificación")
    scaling = fm.scaling or ScalingRecord()
    ds_std = ds.with_covariates(
        {name: scaling.to_standard(name, ds.covariate(name)) for name in scaling.params}
    ) if scaling.params else ds
    dm = build_design(ds_std, fm.spec, columns=fm.column_names)
    return random_effect_modes(dm, ds_std.response, fm, opts.dense_threshold)


def interaction_factor(fm: FittedModel, covariate: str) -> str:
    """Factor fijo que interactúa con la covariable en el modelo ajustado."""
    spec = fm.spec
    if spec is None or covariate not in fm.covariate_summary:
        raise DataError(f"La covariable '{covariate}' no está en el modelo")
    for term in spec.terms:
        if term.is_interaction and covariate in term.variables:
            for var in term.variables:
                if var in fm.factor_levels:
                    return var
    raise DataError(f"Ningún factor interactúa con '{covariate}' en el modelo")


def interaction_grid(fm: FittedModel, covariate: str, points: int = 50,
                     factor: Optional[str] = None) -> InteractionGrid:
    """
    Evalúa predict_fixed sobre una rejilla equiespaciada del rango observado
    de la covariable, una línea por nivel del factor que interactúa con ella.

    Los demás factores fijos quedan en su nivel de referencia y las demás
    covariables en su media.
    """
    if points < 1:
        raise DataError("La rejilla necesita al menos un punto")
    factor = factor or interaction_factor(fm, covariate)
    if factor not in fm.factor_levels:
        raise DataError(f"El factor '{factor}' no es un efecto fijo del modelo")
    spec: ModelSpec = fm.spec
    scaling: ScalingRecord = fm.scaling or ScalingRecord()
    lo, hi, _ = fm.covariate_summary[covariate]
    grid = np.linspace(lo, hi, points)
    fixed_spec = ModelSpec(spec.response, spec.terms, (), spec.intercept)

    lines = {}
    for level in fm.factor_levels[factor]:
        factors = {}
        for name, levels in fm.factor_levels.items():
            factors[name] = [level if name == factor else levels[0]] * points
        covariates = {}
        for name, (_, _, mean) in fm.covariate_summary.items():
            values = grid if name == covariate else np.full(points, mean)
            covariates[name] = scaling.to_standard(name, values)
        if not factors:
            factors = {'_grid': ['0'] * points}
        grid_ds = EvalDataset.from_columns(
            response=np.zeros(points),
            factors=factors,
            covariates=covariates,
            response_name=spec.response,
            factor_levels=fm.factor_levels,
        )
        dm_new = build_design(grid_ds, fixed_spec, columns=fm.column_names)
        lines[level] = [float(v) for v in predict_fixed(fm, dm_new)]
    return InteractionGrid(
        covariate=covariate,
        factor=factor,
        covariate_values=[float(v) for v in grid],
        lines=lines,
    )
