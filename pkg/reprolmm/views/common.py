"""
Opciones compartidas y ejecución de comandos de la CLI.
"""
import logging

import click

from reprolmm.controllers.analysis_controller import AnalysisConfig, FORMATS
from reprolmm.errors import ReproLmmError

logger = logging.getLogger(__name__)


def split_list(ctx, param, value):
    """Callback: 'a,b,c' (o la opción repetida) -> ['a', 'b', 'c']."""
    items = []
    for chunk in value or ():
        items += [v.strip() for v in chunk.split(',') if v.strip()]
    return items


def data_options(func):
    """--data, --schema, --response, --factors, --object, --delimiter."""
    options = [
        click.option('--data', type=click.Path(dir_okay=False), help='CSV de scores (formato largo)'),
        click.option('--schema', type=click.Path(exists=True, dir_okay=False),
                     help='Esquema JSON sidecar'),
        click.option('--response', default='score', show_default=True,
                     help='Columna de respuesta'),
        click.option('--factors', multiple=True, callback=split_list,
                     help='Columnas a tratar como factor (separadas por coma)'),
        click.option('--object', 'object_', default=None, help='Factor de objetos de interés'),
        click.option('--tab', is_flag=True, help='Separador tabulador en lugar de coma'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def output_options(func):
    """--format, --output."""
    func = click.option('--output', '-o', type=click.Path(dir_okay=False), default=None,
                        help='Archivo de salida (escritura atómica)')(func)
    func = click.option('--format', 'fmt', type=click.Choice(FORMATS), default='table',
                        show_default=True)(func)
    return func


def fit_options(func):
    """--criterion, --max-iter, --tol (o por separado --ftol-rel y --xtol)."""
    options = [
        click.option('--criterion', type=click.Choice(['ML', 'REML'], case_sensitive=False),
                     default=None),
        click.option('--max-iter', type=int, default=None),
        click.option('--tol', type=float, default=None,
                     help='Tolerancia relativa de la deviance y de los parámetros'),
        click.option('--ftol-rel', type=float, default=None,
                     help='Tolerancia relativa de la deviance (prevalece sobre --tol)'),
        click.option('--xtol', type=float, default=None,
                     help='Tolerancia de los parámetros (prevalece sobre --tol)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def execute(ctx: click.Context, command: str, **kwargs):
    """
    Construye el AnalysisConfig, ejecuta el controlador y sale con su código.
    """
    kwargs = dict(kwargs)
    if 'object_' in kwargs:
        kwargs['object'] = kwargs.pop('object_')
    if 'fmt' in kwargs:
        kwargs['format'] = kwargs.pop('fmt')
    if kwargs.pop('tab', False):
        kwargs['delimiter'] = '\t'
    if kwargs.get('seed') is None and ctx.obj.get('seed') is not None:
        kwargs['seed'] = ctx.obj['seed']
    kwargs = {k: (list(v) if isinstance(v, tuple) else v) for k, v in kwargs.items()}
    try:
        config = AnalysisConfig(command=command, **kwargs)
    except ReproLmmError as e:
        click.echo(f"{type(e).__name__}: {e}", err=True)
        ctx.exit(e.exit_code)
    outcome = ctx.obj['controller'].run(config)
    if outcome.text:
        click.echo(outcome.text, nl=False)
    if outcome.exit_code != 0:
        click.echo(outcome.error, err=True)
        ctx.exit(outcome.exit_code)
