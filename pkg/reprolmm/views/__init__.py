"""
Comandos click, uno por módulo de familia de subcomandos.
"""
