"""
Tests para la interfaz de línea de comandos.
"""
import json

import pytest
from click.testing import CliRunner

from reprolmm import __version__
from reprolmm.models.dataset import EvalDataset

M0 = 'score ~ 1 + (1|sentence_id)'
M1 = 'score ~ 1 + system + (1|sentence_id)'
R1 = ('{"sentence_id": 0.00923, "lambda": 0.00254, "noise": 0.00012, "seed": 0.00005, '
      '"residual": 0.00464}')


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def paired_csv(write_csv, paired_ds):
    return str(write_csv(paired_ds))


class TestGlrtCommand:
    """Tests de glrt"""

    def test_json(self, cli, runner, paired_csv):
        """Test JSON con df, versión de esquema y eco de configuración"""
        result = runner.invoke(cli, ['glrt', '--data', paired_csv, '--restricted', M0,
                                     '--general', M1, '--format', 'json'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data['df'] == 1
        assert data['schema_version'] == '1.0'
        assert data['config']['analysis']['command'] == 'glrt'
        assert data['config']['fit_options']['criterion'] == 'ML'
        assert data['p_value'] < 0.05

    def test_byte_identical(self, cli, runner, paired_csv):
        """Test dos ejecuciones producen bytes idénticos"""
        args = ['glrt', '--data', paired_csv, '--restricted', M0, '--general', M1,
                '--format', 'json']
        first = runner.invoke(cli, args)
        second = runner.invoke(cli, args)
        assert first.exit_code == 0
        assert first.output == second.output

    def test_table_includes_paired_t(self, cli, runner, paired_csv):
        """Test tabla con la prueba t pareada de referencia"""
        result = runner.invoke(cli, ['glrt', '--data', paired_csv, '--restricted', M0,
                                     '--general', M1])
        assert result.exit_code == 0, result.output
        assert 'stat' in result.output
        assert 'paired t-test' in result.output

    def test_output_file(self, cli, runner, paired_csv, tmp_path):
        """Test --output escribe el archivo y no imprime"""
        target = tmp_path / 'out' / 'glrt.json'
        result = runner.invoke(cli, ['glrt', '--data', paired_csv, '--restricted', M0,
                                     '--general', M1, '--format', 'json', '-o', str(target)])
        assert result.exit_code == 0
        assert result.output == ''
        assert json.loads(target.read_text(encoding='utf-8'))['df'] == 1

    def test_not_converged_withholds_p_value(self, cli, runner, paired_csv, tmp_path):
        """Test GLRT sin convergencia: p-valor retenido y código 2"""
        target = tmp_path / 'glrt.json'
        result = runner.invoke(cli, ['glrt', '--data', paired_csv, '--restricted', M0,
                                     '--general', M1, '--max-iter', '2', '--format', 'json',
                                     '-o', str(target)])
        assert result.exit_code == 2
        data = json.loads(target.read_text(encoding='utf-8'))
        assert data['p_value'] is None
        assert data['converged_general'] is False

    def test_unknown_term(self, cli, runner, paired_csv):
        """Test término desconocido: código 1"""
        result = runner.invoke(cli, ['glrt', '--data', paired_csv, '--restricted', M0,
                                     '--general', 'score ~ 1 + lambda + (1|sentence_id)'])
        assert result.exit_code == 1
        assert 'lambda' in result.output

    def test_bad_formula(self, cli, runner, paired_csv):
        """Test fórmula inválida: código 1"""
        result = runner.invoke(cli, ['glrt', '--data', paired_csv, '--restricted', 'score',
                                     '--general', M1])
        assert result.exit_code == 1

    def test_missing_file(self, cli, runner, tmp_path):
        """Test archivo inexistente: código 1"""
        result = runner.invoke(cli, ['glrt', '--data', str(tmp_path / 'none.csv'),
                                     '--restricted', M0, '--general', M1])
        assert result.exit_code == 1


class TestFitCommand:
    """Tests de fit"""

    def test_json_fit(self, cli, runner, paired_csv):
        """Test coeficientes, componentes y BLUP"""
        result = runner.invoke(cli, ['fit', '--data', paired_csv, '--formula', M1,
                                     '--format', 'json', '--modes'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert set(data['fit']['coefficients']) == {'(Intercept)', 'system[T.sota]'}
        assert data['fit']['criterion'] == 'REML'
        assert len(data['random_effects']['sentence_id']) == 30

    def test_numerical_failure(self, cli, runner, write_csv):
        """Test scores constantes: varianza residual nula, código 2"""
        ds = EvalDataset.from_columns(
            response=[2.0] * 12,
            factors={'sentence_id': [f"s{i}" for i in range(6)] * 2,
                     'system': ['bl'] * 6 + ['sota'] * 6},
        )
        path = write_csv(ds, 'constant.csv')
        result = runner.invoke(cli, ['fit', '--data', str(path), '--formula', M1])
        assert result.exit_code == 2
        assert 'NumericalError' in result.output

    def test_not_converged_exit_code(self, cli, runner, paired_csv, tmp_path):
        """Test ajuste sin convergencia: se emite el resultado y el código es 2"""
        target = tmp_path / 'fit.json'
        result = runner.invoke(cli, ['fit', '--data', paired_csv, '--formula', M1,
                                     '--max-iter', '2', '--format', 'json', '-o', str(target)])
        assert result.exit_code == 2
        assert 'ConvergenceError' in result.output
        data = json.loads(target.read_text(encoding='utf-8'))
        assert data['fit']['converged'] is False

    def test_tol_sets_both_tolerances(self, cli, runner, paired_csv):
        """Test --tol fija la tolerancia de la deviance y la de los parámetros"""
        result = runner.invoke(cli, ['fit', '--data', paired_csv, '--formula', M1,
                                     '--tol', '1e-6', '--format', 'json'])
        assert result.exit_code == 0, result.output
        options = json.loads(result.output)['config']['fit_options']
        assert options['ftol_rel'] == 1e-6
        assert options['xtol'] == 1e-6

    def test_finer_tolerance_flag_wins(self, cli, runner, paired_csv):
        """Test --xtol prevalece sobre --tol"""
        result = runner.invoke(cli, ['fit', '--data', paired_csv, '--formula', M1,
                                     '--tol', '1e-6', '--xtol', '1e-9', '--format', 'json'])
        assert result.exit_code == 0, result.output
        options = json.loads(result.output)['config']['fit_options']
        assert options['ftol_rel'] == 1e-6
        assert options['xtol'] == 1e-9

    def test_criterion_case_insensitive(self, cli, runner, paired_csv):
        """Test --criterion ml"""
        result = runner.invoke(cli, ['fit', '--data', paired_csv, '--formula', M1,
                                     '--criterion', 'ml', '--format', 'json'])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)['fit']['criterion'] == 'ML'


class TestReliabilityCommands:
    """Tests de reliability y vca"""

    def test_reliability_table(self, cli, runner):
        """Test phi de R1 con interpretación"""
        result = runner.invoke(cli, ['reliability', '--components', R1, '--object', 'sentence_id'])
        assert result.exit_code == 0, result.output
        assert 'phi = 0.557 (moderate)' in result.output

    def test_reliability_verdict(self, cli, runner):
        """Test --verdict usa el umbral 0.8"""
        result = runner.invoke(cli, ['reliability', '--components', R1, '--object',
                                     'sentence_id', '--verdict', '--format', 'json'])
        data = json.loads(result.output)
        assert data['phi'] == pytest.approx(0.5567, abs=1e-4)
        assert data['verdict'] == 'unreliable'
        assert data['threshold'] == 0.8

    def test_reliability_bad_json(self, cli, runner):
        """Test componentes inválidos"""
        result = runner.invoke(cli, ['reliability', '--components', '{bad', '--object', 'x'])
        assert result.exit_code == 1

    def test_vca_table(self, cli, runner, write_csv, facet_ds):
        """Test tabla de componentes del VCA"""
        path = write_csv(facet_ds)
        result = runner.invoke(cli, ['vca', '--data', str(path), '--random',
                                     'sentence_id,lambda,seed'])
        assert result.exit_code == 0, result.output
        assert 'component' in result.output
        assert 'residual' in result.output
        assert 'phi = ' in result.output

    def test_vca_xlsx(self, cli, runner, write_csv, facet_ds, tmp_path):
        """Test exportación a Excel desde la CLI"""
        path = write_csv(facet_ds)
        target = tmp_path / 'vca.xlsx'
        result = runner.invoke(cli, ['vca', '--data', str(path), '--random', 'sentence_id',
                                     '--random', 'lambda', '--xlsx', str(target)])
        assert result.exit_code == 0, result.output
        assert target.exists()


class TestDataCommands:
    """Tests de simulate, props y crossing"""

    def test_simulate(self, cli, runner, tmp_path, paired_spec):
        """Test simulate emite CSV reproducible"""
        spec_path = tmp_path / 'spec.json'
        spec_path.write_text(json.dumps(paired_spec.to_dict()), encoding='utf-8')
        first = runner.invoke(cli, ['simulate', '--spec', str(spec_path)])
        second = runner.invoke(cli, ['simulate', '--spec', str(spec_path)])
        assert first.exit_code == 0, first.output
        lines = first.output.strip().split('\n')
        assert lines[0] == 'score,sentence_id,system'
        assert len(lines) == 61
        assert first.output == second.output
        other = runner.invoke(cli, ['simulate', '--spec', str(spec_path), '--seed', '99'])
        assert other.output != first.output

    def test_props(self, cli, runner, tmp_path):
        """Test props por línea de texto"""
        texts = tmp_path / 'texts.txt'
        texts.write_text("The cat sat on the mat.\nA dog ran.\n", encoding='utf-8')
        result = runner.invoke(cli, ['props', '--texts', str(texts), '--format', 'json'])
        assert result.exit_code == 0, result.output
        props = json.loads(result.output)['properties']
        assert props['1']['readability'] == pytest.approx(116.145)
        assert set(props) == {'1', '2'}

    def test_crossing(self, cli, runner, write_csv, facet_ds):
        """Test cruce completo"""
        path = write_csv(facet_ds)
        result = runner.invoke(cli, ['crossing', '--data', str(path), '--factors',
                                     'sentence_id,lambda', '--format', 'json'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data['fully_crossed'] is True


class TestConditionalCommands:
    """Tests de glrt-conditional, interact y report"""

    def test_glrt_conditional(self, cli, runner, write_csv, covariate_ds, tmp_path):
        """Test df 2 y rejilla CSV"""
        path = write_csv(covariate_ds)
        grid_path = tmp_path / 'grid.csv'
        result = runner.invoke(cli, ['glrt-conditional', '--data', str(path), '--covariate',
                                     'readability', '--grid', '3', '--grid-output',
                                     str(grid_path), '--format', 'json'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert data['glrt']['df'] == 2
        assert set(data['coefficients_original']) == set(data['coefficients'])
        assert len(grid_path.read_text(encoding='utf-8').strip().split('\n')) == 7

    def test_glrt_conditional_not_converged(self, cli, runner, write_csv, covariate_ds):
        """Test condicional sin convergencia: código 2"""
        path = write_csv(covariate_ds)
        result = runner.invoke(cli, ['glrt-conditional', '--data', str(path), '--covariate',
                                     'readability', '--max-iter', '2'])
        assert result.exit_code == 2
        assert 'glrt-conditional' in result.output
        assert 'stat' in result.output

    def test_report_not_converged(self, cli, runner, write_csv, facet_ds, tmp_path):
        """Test reporte con secciones sin convergencia: se escribe y el código es 2"""
        path = write_csv(facet_ds)
        target = tmp_path / 'report.json'
        result = runner.invoke(cli, ['report', '--data', str(path), '--config-factors',
                                     'lambda,seed', '--max-iter', '2', '--format', 'json',
                                     '-o', str(target)])
        assert result.exit_code == 2
        assert 'report:pairwise_best' in result.output
        assert json.loads(target.read_text(encoding='utf-8'))['vca'] is None

    def test_interact(self, cli, runner, write_csv, covariate_ds):
        """Test rejilla desde una fórmula con interacción"""
        path = write_csv(covariate_ds)
        formula = 'score ~ 1 + system*readability + (1|sentence_id)'
        result = runner.invoke(cli, ['interact', '--data', str(path), '--covariate',
                                     'readability', '--formula', formula, '--grid', '2'])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().split('\n')
        assert lines[0] == 'covariate_value,level,predicted_score'
        assert len(lines) == 5

    def test_report(self, cli, runner, write_csv, facet_ds):
        """Test reporte JSON con secciones y huella"""
        path = write_csv(facet_ds)
        result = runner.invoke(cli, ['report', '--data', str(path), '--config-factors',
                                     'lambda,seed', '--format', 'json'])
        assert result.exit_code == 0, result.output
        data = json.loads(result.output)
        assert {'pairwise_best', 'under_variation', 'vca', 'conditional'} <= set(data)
        assert data['pairwise_best']['fingerprint'] == data['fingerprint']


class TestGroup:
    """Tests del grupo de comandos"""

    def test_version(self, cli, runner):
        """Test --version"""
        result = runner.invoke(cli, ['--version'])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_commands_registered(self, cli):
        """Test todos los subcomandos presentes"""
        assert set(cli.commands) == {
            'fit', 'glrt', 'glrt-conditional', 'interact', 'vca', 'reliability',
            'props', 'simulate', 'crossing', 'report',
        }
