"""
Comandos de componentes de varianza y fiabilidad: vca, reliability.
"""
import click

from reprolmm.views.common import data_options, execute, fit_options, output_options, split_list


@click.command('vca')
@data_options
@fit_options
@output_options
@click.option('--random', multiple=True, callback=split_list, required=True,
              help='Factores aleatorios, p. ej. sentence,lambda,seed,noise')
@click.option('--interaction', 'interactions', multiple=True,
              help='Factor cruzado a:b como componente explícito')
@click.option('--threshold', type=float, default=None,
              help='Umbral del veredicto reliable/unreliable (p. ej. 0.8)')
@click.option('--verdict', is_flag=True,
              help='Veredicto reliable/unreliable con el umbral por defecto (0.8)')
@click.option('--xlsx', type=click.Path(dir_okay=False), default=None)
@click.pass_context
def vca_command(ctx, **kwargs):
    """Descompone la varianza (REML) y calcula phi."""
    execute(ctx, 'vca', **kwargs)


@click.command('reliability')
@output_options
@click.option('--components', required=True, help='JSON nombre -> varianza')
@click.option('--object', 'object_', required=True, help='Componente del objeto de interés')
@click.option('--threshold', type=float, default=None)
@click.option('--verdict', is_flag=True,
              help='Veredicto reliable/unreliable con el umbral por defecto (0.8)')
@click.pass_context
def reliability_command(ctx, **kwargs):
    """phi e interpretación a partir de varianzas dadas."""
    execute(ctx, 'reliability', **kwargs)


COMMANDS = [vca_command, reliability_command]
