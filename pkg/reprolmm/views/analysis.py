"""
Comandos de ajuste y pruebas: fit, glrt, glrt-conditional, interact.
"""
import click

from reprolmm.views.common import data_options, execute, fit_options, output_options, split_list


@click.command('fit')
@data_options
@fit_options
@output_options
@click.option('--formula', required=True, help='p. ej. "score ~ 1 + system + (1|sentence_id)"')
@click.option('--modes', is_flag=True, help='Incluir los BLUP de los efectos aleatorios (JSON)')
@click.pass_context
def fit_command(ctx, **kwargs):
    """Ajusta un LMEM y muestra coeficientes y componentes de varianza."""
    execute(ctx, 'fit', **kwargs)


@click.command('glrt')
@data_options
@fit_options
@output_options
@click.option('--restricted', required=True, help='Modelo restringido (m0)')
@click.option('--general', required=True, help='Modelo general (m1)')
@click.pass_context
def glrt_command(ctx, **kwargs):
    """GLRT entre dos modelos anidados (ajustados por ML)."""
    execute(ctx, 'glrt', **kwargs)


@click.command('glrt-conditional')
@data_options
@fit_options
@output_options
@click.option('--covariate', required=True, help='Propiedad de los datos d')
@click.option('--system', default='system', show_default=True, help='Factor de sistemas')
@click.option('--random', multiple=True, callback=split_list,
              help='Factores aleatorios adicionales')
@click.option('--interaction-only', is_flag=True, help='Probar solo la interacción (df=1)')
@click.option('--grid', type=int, default=None, help='Puntos de la rejilla de interacción')
@click.option('--grid-output', type=click.Path(dir_okay=False), default=None,
              help='CSV de la rejilla de interacción')
@click.pass_context
def glrt_conditional_command(ctx, **kwargs):
    """GLRT condicional a una propiedad de los datos (m0' contra m1')."""
    execute(ctx, 'glrt-conditional', **kwargs)


@click.command('interact')
@data_options
@fit_options
@output_options
@click.option('--covariate', required=True)
@click.option('--formula', default=None, help='Modelo con interacción factor:covariable')
@click.option('--factor', 'meta_factor', default=None,
              help='Meta-parámetro como efecto fijo (sin --formula)')
@click.option('--random', multiple=True, callback=split_list)
@click.option('--grid', type=int, default=None)
@click.pass_context
def interact_command(ctx, **kwargs):
    """Emite la rejilla (covariate_value, level, predicted_score) de un modelo con interacción."""
    if kwargs.get('fmt') == 'table':
        kwargs['fmt'] = 'csv'
    execute(ctx, 'interact', **kwargs)


COMMANDS = [fit_command, glrt_command, glrt_conditional_command, interact_command]
