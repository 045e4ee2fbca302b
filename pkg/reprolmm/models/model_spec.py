"""
Especificación declarativa de un LMEM: efectos fijos, interacciones
e interceptos aleatorios (una componente de varianza por factor aleatorio).

Mini-lenguaje de fórmulas:
    score ~ 1 + system + readability + system:readability + (1|sentence_id) + (1|lambda)

- `0` o `-1` suprimen el intercepto.
- `a:b` es la interacción (producto elemento a elemento de columnas codificadas).
- `a*b` se expande a `a + b + a:b`.
- `(1|f)` agrega un intercepto aleatorio por nivel del factor f.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Tuple

import regex

from reprolmm.errors import ModelSpecError, UnknownFactorError

NAME = r'[A-Za-z_][\w.]*'
RANDOM_RE = regex.compile(rf'^\(\s*1\s*\|\s*({NAME})\s*\)$')
TERM_RE = regex.compile(rf'^{NAME}(?:\s*[:*]\s*{NAME})*$')


@dataclass(frozen=True)
class FixedTerm:
    """
    Término fijo: tupla de nombres de variables.
    () es el intercepto; una variable es efecto principal; dos o más, interacción.
    """
    variables: Tuple[str, ...] = ()

    @property
    def is_intercept(self) -> bool:
        return len(self.variables) == 0

    @property
    def is_interaction(self) -> bool:
        return len(self.variables) > 1

    @property
    def label(self) -> str:
        return '1' if self.is_intercept else ':'.join(self.variables)

    def __str__(self):
        return self.label


INTERCEPT = FixedTerm(())


@dataclass(frozen=True)
class ModelSpec:
    """Especificación de un modelo (m0, m1, m0', m1' y variantes)."""
    response: str = 'score'
    terms: Tuple[FixedTerm, ...] = ()
    random_factors: Tuple[str, ...] = ()
    intercept: bool = True

    def __post_init__(self):
        seen = set()
        for term in self.terms:
            if term.is_intercept:
                raise ModelSpecError("El intercepto se controla con 'intercept', no como término")
            if len(set(term.variables)) != len(term.variables):
                raise ModelSpecError(f"Variable repetida en la interacción '{term.label}'")
            key = frozenset(term.variables)
            if key in seen:
                raise ModelSpecError(f"Término repetido: '{term.label}'")
            seen.add(key)
        if len(set(self.random_factors)) != len(self.random_factors):
            raise ModelSpecError("Factor aleatorio repetido")
        main_effects = {t.variables[0] for t in self.terms if len(t.variables) == 1}
        clash = main_effects.intersection(self.random_factors)
        if clash:
            raise ModelSpecError(
                f"El factor '{sorted(clash)[0]}' no puede ser fijo y aleatorio a la vez"
            )

    @property
    def fixed_terms(self) -> List[FixedTerm]:
        """Términos fijos incluyendo el intercepto (si no fue suprimido)."""
        return ([INTERCEPT] if self.intercept else []) + list(self.terms)

    @property
    def variables(self) -> List[str]:
        names = []
        for term in self.terms:
            for v in term.variables:
                if v not in names:
                    names.append(v)
        return names

    def has_interaction_with(self, covariate: str) -> bool:
        return any(t.is_interaction and covariate in t.variables for t in self.terms)

    def term_keys(self) -> set:
        return {frozenset(t.variables) for t in self.fixed_terms}

    def is_nested_in(self, other: 'ModelSpec') -> bool:
        """True si los términos fijos de este modelo están contenidos en los de `other`."""
        return (
            self.response == other.response
            and self.term_keys() <= other.term_keys()
            and set(self.random_factors) == set(other.random_factors)
        )

    def with_terms(self, *extra: FixedTerm) -> 'ModelSpec':
        return ModelSpec(self.response, self.terms + tuple(extra), self.random_factors,
                         self.intercept)

    def with_random(self, *factors: str) -> 'ModelSpec':
        return ModelSpec(self.response, self.terms, self.random_factors + tuple(factors),
                         self.intercept)

    def validate(self, ds) -> None:
        """
        Verifica la especificación contra el dataset.

        Raises:
            UnknownFactorError: si un término o factor aleatorio no existe
            ModelSpecError: si el factor aleatorio no es un factor
        """
        if self.response != ds.response_name:
            raise UnknownFactorError(
                f"La respuesta '{self.response}' no es la columna de respuesta '{ds.response_name}'"
            )
        for name in self.variables:
            if not (ds.has_factor(name) or ds.has_covariate(name)):
                raise UnknownFactorError(f"Columna desconocida en la fórmula: '{name}'")
        for name in self.random_factors:
            if not ds.has_factor(name):
                if ds.has_covariate(name):
                    raise ModelSpecError(f"'{name}' es covariable; (1|{name}) requiere un factor")
                raise UnknownFactorError(f"Factor aleatorio desconocido: '{name}'")

    def to_formula(self) -> str:
        parts = ['1' if self.intercept else '0']
        parts += [t.label for t in self.terms]
        parts += [f'(1|{f})' for f in self.random_factors]
        return f"{self.response} ~ {' + '.join(parts)}"

    def __str__(self):
        return self.to_formula()


def _split_top_level(rhs: str) -> List[Tuple[str, str]]:
    """Divide el lado derecho por '+'/'-' fuera de paréntesis. Devuelve (signo, texto)."""
    pieces = []
    depth = 0
    sign = '+'
    current = []
    for ch in rhs:
        if ch == '(':
            depth += 1
        elif ch == ')':
            depth -= 1
            if depth < 0:
                raise ModelSpecError("Paréntesis desbalanceados en la fórmula")
        if ch in '+-' and depth == 0:
            pieces.append((sign, ''.join(current).strip()))
            sign = ch
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise ModelSpecError("Paréntesis desbalanceados en la fórmula")
    pieces.append((sign, ''.join(current).strip()))
    return pieces


def parse_formula(text: str) -> ModelSpec:
    """
    Parsea una fórmula del mini-lenguaje.

    Args:
        text: Fórmula, p. ej. "score ~ 1 + system + (1|sentence_id)"

    Returns:
        ModelSpec
    """
    if not text or '~' not in text:
        raise ModelSpecError(f"Fórmula inválida (falta '~'): {text!r}")
    lhs, rhs = text.split('~', 1)
    response = lhs.strip()
    if not regex.fullmatch(NAME, response):
        raise ModelSpecError(f"Respuesta inválida en la fórmula: {response!r}")

    intercept = True
    terms: List[FixedTerm] = []
    random_factors: List[str] = []

    for sign, piece in _split_top_level(rhs):
        if piece == '':
            if sign == '-':
                raise ModelSpecError("Término vacío después de '-'")
            continue
        if piece == '0' or (piece == '1' and sign == '-'):
            intercept = False
            continue
        if piece == '1':
            continue
        if sign == '-':
            raise ModelSpecError(f"Solo se admite '-1' para suprimir el intercepto: '-{piece}'")
        match = RANDOM_RE.match(piece)
        if match:
            random_factors.append(match.group(1))
            continue
        if piece.startswith('('):
            raise ModelSpecError(
                f"Término aleatorio no soportado: '{piece}' (solo interceptos (1|factor))"
            )
        if not TERM_RE.match(piece):
            raise ModelSpecError(f"Término inválido: '{piece}'")
        for term in _expand_term(piece):
            if frozenset(term.variables) not in {frozenset(t.variables) for t in terms}:
                terms.append(term)

    return ModelSpec(response=response, terms=tuple(terms),
                     random_factors=tuple(random_factors), intercept=intercept)


def _expand_term(piece: str) -> List[FixedTerm]:
    """Expande 'a*b' en a, b, a:b; 'a:b' queda como interacción."""
    if '*' not in piece:
        return [FixedTerm(tuple(p.strip() for p in piece.split(':')))]
    factors = [p.strip() for p in piece.split('*')]
    if any(':' in f for f in factors):
        raise ModelSpecError(f"No se admite mezclar ':' y '*' en '{piece}'")
    out = []
    for size in range(1, len(factors) + 1):
        for combo in combinations(factors, size):
            out.append(FixedTerm(tuple(combo)))
    return out


def build_spec(
    response: str,
    fixed: Optional[List[str]] = None,
    random: Optional[List[str]] = None,
    intercept: bool = True,
) -> ModelSpec:
    """Construye un ModelSpec desde listas ('a', 'a:b')."""
    terms = tuple(FixedTerm(tuple(t.split(':'))) for t in (fixed or []))
    return ModelSpec(response=response, terms=terms,
                     random_factors=tuple(random or ()), intercept=intercept)
