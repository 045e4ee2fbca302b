"""
Comando del reporte de reproducibilidad.
"""
import click

from reprolmm.views.common import data_options, execute, fit_options, output_options, split_list


@click.command('report')
@data_options
@fit_options
@output_options
@click.option('--system', default='system', show_default=True)
@click.option('--config-factors', multiple=True, callback=split_list, required=True,
              help='Factores de configuración, p. ej. lambda,seed,noise')
@click.option('--covariates', multiple=True, callback=split_list,
              help='Covariables para las pruebas condicionales')
@click.option('--vca-system', default=None, help='Sistema cuyas filas entran al VCA')
@click.option('--interaction-only', is_flag=True)
@click.option('--threshold', type=float, default=None)
@click.option('--verdict', is_flag=True,
              help='Veredicto reliable/unreliable con el umbral por defecto (0.8)')
@click.option('--grid', type=int, default=None)
@click.option('--xlsx', type=click.Path(dir_okay=False), default=None)
@click.pass_context
def report_command(ctx, **kwargs):
    """Reporte completo: mejor configuración, variación, VCA y condicionales."""
    execute(ctx, 'report', **kwargs)


COMMANDS = [report_command]
