"""
Controladores: orquestación de servicios.
"""
