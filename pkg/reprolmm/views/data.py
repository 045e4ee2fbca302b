"""
Comandos de datos: props, simulate, crossing.
"""
import click

from reprolmm.views.common import data_options, execute, output_options


@click.command('props')
@click.option('--texts', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Un documento por línea, o CSV (id,text)')
@click.option('--corpus', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Corpus de referencia (por defecto los mismos textos)')
@data_options
@output_options
@click.pass_context
def props_command(ctx, **kwargs):
    """Rareza y legibilidad por texto; con --data anota el dataset."""
    if kwargs.get('fmt') == 'table':
        kwargs['fmt'] = 'csv'
    execute(ctx, 'props', **kwargs)


@click.command('simulate')
@click.option('--spec', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Especificación JSON de la simulación')
@click.option('--seed', type=int, default=None, help='Sobrescribe la semilla de la especificación')
@click.option('--tab', is_flag=True)
@output_options
@click.pass_context
def simulate_command(ctx, **kwargs):
    """Genera un dataset CSV desde una verdad de referencia conocida."""
    kwargs['fmt'] = 'csv'
    execute(ctx, 'simulate', **kwargs)


@click.command('crossing')
@data_options
@output_options
@click.pass_context
def crossing_command(ctx, **kwargs):
    """Fracción de combinaciones de niveles observadas por par de factores."""
    execute(ctx, 'crossing', **kwargs)


COMMANDS = [props_command, simulate_command, crossing_command]
