"""
Servicio de propiedades de texto: rareza de palabras y legibilidad.

- Rareza: media por token de -log p(w) (logaritmo natural) con las
  probabilidades empíricas del corpus.
- Legibilidad: Flesch reading ease,
  206.835 - 1.015 * (palabras/oraciones) - 84.6 * (sílabas/palabra).
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping

import numpy as np
import regex

from reprolmm.errors import TextPropertyError
from reprolmm.models.dataset import EvalDataset

logger = logging.getLogger(__name__)

# Token: secuencia de letras o dígitos Unicode; la puntuación se descarta
TOKEN_PATTERN = regex.compile(r'[\p{L}\p{N}]+')
SENTENCE_END_PATTERN = regex.compile(r'[.!?]+')
VOWEL_GROUP_PATTERN = regex.compile(r'[aeiouy]+')
CONSONANT_LE_PATTERN = regex.compile(r'[^aeiouy]le$')

FLESCH_BASE = 206.835
FLESCH_SENTENCE_WEIGHT = 1.015
FLESCH_SYLLABLE_WEIGHT = 84.6


def tokenize(text: str) -> List[str]:
    """Minúsculas y partición en letras/dígitos."""
    return TOKEN_PATTERN.findall(text.lower())


@dataclass(frozen=True)
class CorpusStats:
    """Conteos de tokens del corpus (inmutable)."""
    token_counts: Mapping[str, int] = field(default_factory=dict)
    total_tokens: int = 0

    def __post_init__(self):
        counts = dict(self.token_counts)
        if any(c < 1 for c in counts.values()):
            raise TextPropertyError("Todos los conteos del corpus deben ser >= 1")
        if sum(counts.values()) != self.total_tokens:
            raise TextPropertyError("total_tokens no coincide con la suma de conteos")
        object.__setattr__(self, 'token_counts', MappingProxyType(counts))

    @property
    def vocabulary_size(self) -> int:
        return len(self.token_counts)

    def probability(self, token: str) -> float:
        """
        Probabilidad empírica; un token no visto usa 1 / (total + V + 1).
        """
        count = self.token_counts.get(token)
        if count is None:
            return 1.0 / (self.total_tokens + self.vocabulary_size + 1)
        return count / self.total_tokens

    def to_dict(self) -> dict:
        return {'token_counts': dict(sorted(self.token_counts.items())),
                'total_tokens': self.total_tokens}


def build_corpus_stats(texts: Iterable[str]) -> CorpusStats:
    """
    Acumula conteos de tokens sobre los textos.

    Raises:
        TextPropertyError: corpus vacío después de tokenizar
    """
    counts: Counter = Counter()
    for text in texts:
        counts.update(tokenize(text))
    total = sum(counts.values())
    if total == 0:
        raise TextPropertyError("Corpus vacío: ningún texto contiene tokens")
    logger.debug(f"Corpus: {total} tokens, vocabulario {len(counts)}")
    return CorpusStats(token_counts=dict(counts), total_tokens=total)


def word_rarity(text: str, stats: CorpusStats) -> float:
    """
    Rareza media del texto (nats por token).

    Raises:
        TextPropertyError: texto sin tokens o corpus vacío
    """
    if stats.total_tokens == 0:
        raise TextPropertyError("El corpus está vacío")
    tokens = tokenize(text)
    if not tokens:
        raise TextPropertyError("Rareza no definida: el texto no tiene tokens")
    return float(np.mean([-math.log(stats.probability(t)) for t in tokens]))


def count_syllables(word: str) -> int:
    """
    Heurística de sílabas: grupos de vocales (aeiouy), menos una por 'e'
    final muda salvo en consonante + 'le'; mínimo 1.
    """
    word = word.lower()
    count = len(VOWEL_GROUP_PATTERN.findall(word))
    if word.endswith('e') and not CONSONANT_LE_PATTERN.search(word):
        count -= 1
    return max(1, count)


def count_sentences(text: str) -> int:
    return max(1, len(SENTENCE_END_PATTERN.findall(text)))


def readability(text: str) -> float:
    """
    Flesch reading ease del texto (en principio no acotado).

    Raises:
        TextPropertyError: texto sin palabras
    """
    words = tokenize(text)
    if not words:
        raise TextPropertyError("Legibilidad no definida: el texto no tiene palabras")
    sentences = count_sentences(text)
    syllables = sum(count_syllables(w) for w in words)
    return (FLESCH_BASE
            - FLESCH_SENTENCE_WEIGHT * (len(words) / sentences)
            - FLESCH_SYLLABLE_WEIGHT * (syllables / len(words)))


def text_properties(texts: Mapping[str, str], stats: CorpusStats) -> Dict[str, Dict[str, float]]:
    """Rareza y legibilidad por identificador de texto."""
    return {
        key: {'rarity': word_rarity(text, stats), 'readability': readability(text)}
        for key, text in texts.items()
    }


def annotate_dataset(ds: EvalDataset, texts: Mapping[str, str], stats: CorpusStats,
                     object_factor: str = None) -> EvalDataset:
    """
    Agrega las covariables 'rarity' y 'readability' por objeto de interés.

    Args:
        ds: Dataset
        texts: Mapa id del objeto -> texto
        stats: Estadísticas del corpus
        object_factor: Factor de objetos (por defecto el objeto de interés)

    Returns:
        Dataset nuevo, mismo orden de filas, valores constantes por objeto

    Raises:
        TextPropertyError: falta el texto de algún nivel
    """
    object_factor = object_factor or ds.object_of_interest
    levels = ds.levels(object_factor)
    missing = [level for level in levels if level not in texts]
    if missing:
        raise TextPropertyError(f"Falta el texto del objeto '{missing[0]}'")
    props = text_properties({level: texts[level] for level in levels}, stats)
    codes = ds.codes(object_factor)
    rarity = np.asarray([props[level]['rarity'] for level in levels])[codes]
    read = np.asarray([props[level]['readability'] for level in levels])[codes]
    logger.info(f"Dataset anotado con propiedades de {len(levels)} textos")
    return ds.with_covariates({'rarity': rarity, 'readability': read})
