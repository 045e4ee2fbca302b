"""
Tests para la GLRT, la GLRT condicional y los tamaños de efecto.
"""
import math

import numpy as np
import pytest
from scipy import stats

from reprolmm.errors import (
    DataError, DegenerateTestError, InfiniteEffectError, NonNestedModelsError, UnknownFactorError
)
from reprolmm.models.model_spec import build_spec
from reprolmm.models.results import FitOptions
from reprolmm.models.simulation import SimSpec
from reprolmm.services.inference_service import (
    glrt, glrt_conditional, level_means, paired_t_test, standardized_mean_difference
)
from reprolmm.services.simulation_service import mc_study
from reprolmm.services.vca_service import vca_with_interactions

M0 = build_spec('score', [], ['sentence_id'])
M1 = build_spec('score', ['system'], ['sentence_id'])


class TestStandardizedMeanDifference:
    """Tests de la d de Cohen con desviación combinada"""

    def test_known_value(self):
        """Test [1,2] contra [2,3]: -1 / sqrt(0.5)"""
        assert standardized_mean_difference([1.0, 2.0], [2.0, 3.0]) == pytest.approx(-1.41421356)

    def test_antisymmetric(self):
        """Test d(a, b) = -d(b, a)"""
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=15), rng.normal(1.0, size=20)
        assert standardized_mean_difference(a, b) == pytest.approx(
            -standardized_mean_difference(b, a))

    def test_identical(self):
        """Test vectores idénticos dan 0"""
        assert standardized_mean_difference([0.3, 0.3], [0.3, 0.3]) == 0.0

    def test_infinite(self):
        """Test desviación cero con medias distintas"""
        with pytest.raises(InfiniteEffectError):
            standardized_mean_difference([1.0, 1.0], [2.0, 2.0])

    def test_empty(self):
        """Test vector vacío"""
        with pytest.raises(DataError):
            standardized_mean_difference([], [1.0, 2.0])


class TestGlrt:
    """Tests de la GLRT m0 contra m1"""

    def test_paired_difference(self, paired_ds):
        """Test diferencia real de 0.5: df 1, p pequeño y d negativa"""
        result = glrt(paired_ds, M0, M1)
        assert result.df == 1
        assert result.converged
        assert result.stat > 0
        assert result.p_value == pytest.approx(stats.chi2.sf(result.stat, 1))
        assert result.p_value < 0.05
        assert result.lambda_ratio * math.exp(result.stat / 2.0) == pytest.approx(1.0)
        labels = paired_ds.labels('system')
        expected = standardized_mean_difference(paired_ds.response[labels == 'bl'],
                                                paired_ds.response[labels == 'sota'])
        assert result.effect_size == pytest.approx(expected)
        assert result.effect_size < 0
        assert set(result.means) == {'bl', 'sota'}
        assert result.means['sota'] > result.means['bl']
        assert result.fingerprint == paired_ds.fingerprint()
        assert result.deviance_restricted - result.deviance_general == pytest.approx(result.stat)

    def test_identical_means(self, identical_ds):
        """Test medias idénticas: estadístico nulo, p = 1 y lambda = 1"""
        result = glrt(identical_ds, M0, M1)
        assert result.stat < 1e-6
        assert result.p_value == pytest.approx(1.0, abs=1e-3)
        assert result.lambda_ratio == pytest.approx(1.0, abs=1e-6)
        assert result.effect_size == pytest.approx(0.0, abs=1e-12)

    def test_reml_forced_to_ml(self, paired_ds):
        """Test opciones REML se reemplazan por ML"""
        ml = glrt(paired_ds, M0, M1)
        forced = glrt(paired_ds, M0, M1, opts=FitOptions(criterion='REML'))
        assert forced.stat == pytest.approx(ml.stat, rel=1e-12)

    def test_invariant_to_affine_response(self, paired_ds):
        """Test estadístico invariante a y -> 2y + 5"""
        base = glrt(paired_ds, M0, M1)
        moved = glrt(paired_ds.with_response(2.0 * paired_ds.response + 5.0), M0, M1)
        assert moved.stat == pytest.approx(base.stat, rel=1e-6)

    def test_row_order_invariant(self, facet_ds):
        """Test filas permutadas dan el mismo estadístico"""
        restricted = build_spec('score', [], ['sentence_id', 'lambda'])
        general = build_spec('score', ['system'], ['sentence_id', 'lambda'])
        order = np.random.default_rng(1).permutation(len(facet_ds))
        a = glrt(facet_ds, restricted, general)
        b = glrt(facet_ds.take(order), restricted, general)
        assert a.stat == b.stat

    def test_non_nested(self, paired_ds):
        """Test modelos no anidados"""
        with pytest.raises(NonNestedModelsError):
            glrt(paired_ds, M1, M0)

    def test_zero_df(self, paired_ds):
        """Test mismo modelo: df = 0"""
        with pytest.raises(DegenerateTestError):
            glrt(paired_ds, M1, M1)

    def test_not_converged_drops_p_value(self, facet_ds):
        """Test p_value None si algún ajuste no converge"""
        restricted = build_spec('score', [], ['sentence_id', 'lambda', 'seed'])
        general = build_spec('score', ['system'], ['sentence_id', 'lambda', 'seed'])
        result = glrt(facet_ds, restricted, general, opts=FitOptions(criterion='ML', max_iter=3))
        assert not result.converged
        assert result.p_value is None
        assert result.stat >= 0.0

    def test_level_means(self, paired_ds):
        """Test medias por nivel en orden declarado"""
        means = level_means(paired_ds, 'system')
        assert list(means) == ['bl', 'sota']
        labels = paired_ds.labels('system')
        assert means['bl'] == pytest.approx(paired_ds.response[labels == 'bl'].mean())


class TestGlrtConditional:
    """Tests de la GLRT condicional a una propiedad de los datos"""

    def test_joint_test(self, covariate_ds):
        """Test m0' contra m1': df = 2 con coeficientes y rejilla"""
        result = glrt_conditional(covariate_ds, 'readability', grid_points=5)
        assert result.glrt.df == 2
        assert result.glrt.converged
        assert result.covariate == 'readability'
        assert set(result.coefficients) == {
            '(Intercept)', 'readability', 'system[T.sota]', 'system[T.sota]:readability'
        }
        assert list(result.grid.lines) == ['bl', 'sota']
        assert len(result.grid.covariate_values) == 5
        assert 'readability' in result.scaling

    def test_original_scale_coefficients(self, covariate_ds):
        """Test coeficientes por unidad de legibilidad junto a los de escala z"""
        result = glrt_conditional(covariate_ds, 'readability', grid_points=2)
        z, original = result.coefficients, result.coefficients_original
        mean, sd = result.scaling['readability']['mean'], result.scaling['readability']['sd']
        assert set(original) == set(z)
        assert original['readability'] == pytest.approx(z['readability'] / sd)
        assert original['system[T.sota]:readability'] == pytest.approx(
            z['system[T.sota]:readability'] / sd)
        # en la media de la covariable ambas escalas predicen lo mismo
        assert original['(Intercept)'] + original['readability'] * mean == pytest.approx(
            z['(Intercept)'])

    def test_interaction_only(self, covariate_ds):
        """Test solo beta_cd: df = 1"""
        result = glrt_conditional(covariate_ds, 'readability', interaction_only=True)
        assert result.glrt.df == 1

    def test_constant_covariate(self, paired_ds):
        """Test covariable constante: columnas aliadas y df = 1"""
        ds = paired_ds.with_covariates({'zero': np.zeros(len(paired_ds))})
        result = glrt_conditional(ds, 'zero')
        assert result.glrt.df == 1
        assert 'zero' in result.glrt.dropped_columns
        assert 'system[T.sota]:zero' in result.glrt.dropped_columns
        plain = glrt(paired_ds, M0, M1)
        assert result.glrt.stat == pytest.approx(plain.stat, rel=1e-6)

    def test_unknown_covariate(self, paired_ds):
        """Test covariable desconocida"""
        with pytest.raises(UnknownFactorError):
            glrt_conditional(paired_ds, 'readability')

    def test_meta_parameter_constant_covariate(self, facet_ds):
        """Test interacción meta-parámetro x covariable constante: prueba degenerada"""
        ds = facet_ds.with_covariates({'d': np.full(len(facet_ds), 3.0)})
        with pytest.raises(DegenerateTestError):
            vca_with_interactions(ds, 'lambda', 'd')


class TestPairedTTest:
    """Tests de la prueba t pareada"""

    def test_matches_scipy(self, paired_ds):
        """Test contra scipy.stats.ttest_rel sobre las diferencias por oración"""
        result = paired_t_test(paired_ds, 'system')
        labels = paired_ds.labels('system')
        bl = paired_ds.response[labels == 'bl']
        sota = paired_ds.response[labels == 'sota']
        expected = stats.ttest_rel(bl, sota)
        assert result.statistic == pytest.approx(expected.statistic)
        assert result.p_value == pytest.approx(expected.pvalue)
        assert result.df == 29
        assert result.n_objects == 30
        assert result.mean_difference == pytest.approx(np.mean(bl - sota))

    def test_unknown_level(self, paired_ds):
        """Test nivel inexistente"""
        with pytest.raises(UnknownFactorError):
            paired_t_test(paired_ds, 'system', levels=('bl', 'other'))


def _null_spec(n_objects, seed):
    return SimSpec(
        n_objects=n_objects,
        fixed_factors={'system': ['bl', 'sota']},
        fixed_effects={'intercept': 0.0},
        variance_components={'sentence_id': 1.0},
        residual_sd=1.0,
        seed=seed,
    )


@pytest.mark.slow
class TestCalibration:
    """Estudios Monte Carlo de calibración y potencia"""

    def test_agrees_with_paired_t(self):
        """Test p-valores de GLRT y t pareada cercanos con 1000 oraciones"""
        spec = SimSpec(
            n_objects=1000,
            fixed_factors={'system': ['bl', 'sota']},
            fixed_effects={'intercept': 0.0, 'system[sota]': 0.03},
            variance_components={'sentence_id': 1.0},
            residual_sd=0.5,
            seed=21,
        )

        def analysis(ds):
            return {'glrt': glrt(ds, M0, M1).p_value, 't': paired_t_test(ds, 'system').p_value}

        summary = mc_study(spec, analysis, 20)
        diff = np.abs(summary.values('glrt') - summary.values('t'))
        assert diff.max() < 0.02

    def test_null_calibration(self):
        """Test bajo H0: tasa de rechazo al 5 % en [0.03, 0.07] y p uniformes"""
        summary = mc_study(_null_spec(200, 99), lambda ds: glrt(ds, M0, M1).p_value, 2000)
        assert 0.03 <= summary.fraction_below(0.05) <= 0.07
        assert stats.kstest(summary.values(), 'uniform').pvalue > 0.01

    def test_conditional_power(self):
        """Test interacción 0.5 con d ~ N(0,1): potencia > 0.9"""
        spec = SimSpec(
            n_objects=500,
            fixed_factors={'system': ['bl', 'sota']},
            fixed_effects={'intercept': 0.0, 'system[sota]:d': 0.5},
            variance_components={'sentence_id': 1.0},
            covariates={'d': (0.0, 1.0)},
            residual_sd=1.0,
            seed=5,
        )
        summary = mc_study(spec, lambda ds: glrt_conditional(ds, 'd', grid_points=2).glrt.p_value,
                           50)
        assert summary.fraction_below(0.05) > 0.9

    def test_conditional_null(self):
        """Test GLRT condicional bajo H0: p uniformes"""
        spec = _null_spec(200, 13).replace(covariates={'d': [0.0, 1.0]})
        summary = mc_study(spec, lambda ds: glrt_conditional(ds, 'd', grid_points=2).glrt.p_value,
                           500)
        assert stats.kstest(summary.values(), 'uniform').pvalue > 0.01
