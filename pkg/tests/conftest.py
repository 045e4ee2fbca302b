"""
Configuración compartida para tests.
"""
import numpy as np
import pytest

from reprolmm import create_cli
from reprolmm.models.dataset import EvalDataset
from reprolmm.models.simulation import SimSpec
from reprolmm.services.dataset_service import DatasetService
from reprolmm.services.simulation_service import simulate


@pytest.fixture
def cli():
    """Grupo de comandos con la configuración de testing."""
    return create_cli('testing')


@pytest.fixture
def paired_spec():
    """Dos sistemas sobre 30 oraciones, diferencia 0.5 a favor de sota."""
    return SimSpec(
        n_objects=30,
        object_factor='sentence_id',
        fixed_factors={'system': ['bl', 'sota']},
        fixed_effects={'intercept': 1.0, 'system[sota]': 0.5},
        variance_components={'sentence_id': 1.0},
        residual_sd=0.5,
        seed=7,
    )


@pytest.fixture
def paired_ds(paired_spec):
    """Dataset pareado simulado."""
    return simulate(paired_spec)


@pytest.fixture
def facet_spec():
    """Dos sistemas, 3 lambdas y 2 semillas sobre 20 oraciones."""
    return SimSpec(
        n_objects=20,
        object_factor='sentence_id',
        fixed_factors={'system': ['bl', 'sota']},
        facet_levels={'lambda': 3, 'seed': 2},
        fixed_effects={'intercept': 0.4, 'system[sota]': 0.02},
        variance_components={'sentence_id': 0.01, 'lambda': 0.002, 'seed': 0.0001},
        residual_sd=0.05,
        seed=11,
    )


@pytest.fixture
def facet_ds(facet_spec):
    return simulate(facet_spec)


@pytest.fixture
def covariate_spec():
    """Modelo m1' con una propiedad de los datos tipo legibilidad."""
    return SimSpec(
        n_objects=40,
        object_factor='sentence_id',
        fixed_factors={'system': ['bl', 'sota']},
        fixed_effects={
            'intercept': 0.4,
            'system[sota]': 0.02,
            'readability': 0.001,
            'system[sota]:readability': 0.002,
        },
        variance_components={'sentence_id': 0.01},
        covariates={'readability': (60.0, 15.0)},
        residual_sd=0.05,
        seed=3,
    )


@pytest.fixture
def covariate_ds(covariate_spec):
    return simulate(covariate_spec)


@pytest.fixture
def identical_ds():
    """Ambos sistemas con la misma media exacta: y_bl = a + e, y_sota = a - e."""
    rng = np.random.default_rng(5)
    m = 25
    a = rng.normal(0.0, 1.0, size=m)
    e = rng.normal(0.0, 0.3, size=m)
    e -= e.mean()
    response = np.concatenate([a + e, a - e])
    sentences = [f"s{i}" for i in range(m)] * 2
    systems = ['bl'] * m + ['sota'] * m
    return EvalDataset.from_columns(
        response=response,
        factors={'sentence_id': sentences, 'system': systems},
        object_of_interest='sentence_id',
    )


@pytest.fixture
def write_csv(tmp_path):
    """Escribe un dataset (o un texto CSV) en tmp_path y devuelve la ruta."""
    def _write(content, name='scores.csv'):
        path = tmp_path / name
        if isinstance(content, EvalDataset):
            DatasetService().to_csv(content, path)
        else:
            path.write_text(content, encoding='utf-8')
        return path
    return _write
