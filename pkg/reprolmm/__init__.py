"""
Analizador de reproducibilidad de evaluaciones de ML con modelos lineales de
efectos mixtos. La CLI se construye con un factory, igual que la aplicación.
"""
import logging

import click

from config import config

__version__ = '1.0.0'

_logging_configured = False


def setup_logging(cfg) -> None:
    """Configura el handler raíz una sola vez."""
    global _logging_configured
    if _logging_configured:
        logging.getLogger().setLevel(cfg.LOG_LEVEL)
        return
    handlers = [logging.StreamHandler()]
    if cfg.LOG_FILE:
        handlers.append(logging.FileHandler(cfg.LOG_FILE, encoding='utf-8'))
    logging.basicConfig(level=cfg.LOG_LEVEL, format=cfg.LOG_FORMAT, handlers=handlers)
    _logging_configured = True


def create_cli(config_name='default'):
    """
    Factory function para crear el grupo de comandos.

    Args:
        config_name: Nombre de la configuración a usar

    Returns:
        click.Group con todos los subcomandos registrados
    """
    cfg = config[config_name]
    setup_logging(cfg)

    from reprolmm.controllers.analysis_controller import AnalysisController

    @click.group()
    @click.version_option(__version__, prog_name='reprolmm')
    @click.option('--seed', type=int, default=None, help='Semilla explícita para la aleatoriedad')
    @click.pass_context
    def cli(ctx, seed):
        """Análisis de scores de evaluación con LMEM, GLRT y fiabilidad."""
        ctx.ensure_object(dict)
        ctx.obj['seed'] = seed
        ctx.obj['config'] = cfg
        ctx.obj['controller'] = AnalysisController(cfg)

    register_commands(cli)
    return cli


def register_commands(cli):
    """Registra los subcomandos de cada módulo de vistas."""
    from reprolmm.views import analysis, data, reliability, reports

    for module in (analysis, reliability, data, reports):
        for command in module.COMMANDS:
            cli.add_command(command)
