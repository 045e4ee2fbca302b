"""
Servicios numéricos y de entrada/salida.
"""
