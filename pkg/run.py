"""
Punto de entrada de la CLI
"""
import os

from dotenv import load_dotenv

load_dotenv()

from reprolmm import create_cli  # noqa: E402

# Crear la CLI
config_name = os.environ.get('REPROLMM_ENV', 'default')
cli = create_cli(config_name)

if __name__ == '__main__':
    cli()
