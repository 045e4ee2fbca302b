"""
Tests unitarios
"""
