"""
Configuración del analizador de reproducibilidad
"""
import os

basedir = os.path.abspath(os.path.dirname(__file__))


class Config:
    """Configuración base"""

    # Logging (única configuración que se lee del entorno)
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FILE = os.environ.get('LOG_FILE')
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

    # Optimización de la deviance perfilada
    # Los valores numéricos NO se leen del entorno: todo lo que afecta
    # resultados se fija aquí o con flags explícitos de la CLI.
    MAX_ITER = 10000
    FTOL_REL = 1e-10
    XTOL = 1e-8
    CRITERION = 'REML'

    # Factorización: sistema denso completo hasta este tamaño (k + sum m_j)
    DENSE_THRESHOLD = 2000

    # Tolerancia relativa para detectar columnas aliadas en X
    ALIAS_TOL = 1e-7

    # Salidas
    SCHEMA_VERSION = '1.0'
    GRID_POINTS = 50

    # Fiabilidad
    RELIABILITY_THRESHOLD = 0.8

    # Simulación Monte Carlo
    MC_MAX_WORKERS = 4


class DevelopmentConfig(Config):
    """Configuración para desarrollo"""
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'DEBUG')


class ProductionConfig(Config):
    """Configuración para producción"""
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'WARNING')


class TestingConfig(Config):
    """Configuración para testing"""
    TESTING = True
    LOG_LEVEL = 'WARNING'
    MC_MAX_WORKERS = 1


# Diccionario de configuraciones
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': ProductionConfig
}
