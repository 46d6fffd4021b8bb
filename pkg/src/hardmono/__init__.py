"""Character-level transduction with exact hard (monotonic) attention."""

from .config import ModelConfig, VariantKind
from .data import TaskKind, Vocabularies, Vocabulary, load_g2p, load_inflection, load_translit
from .decoder import greedy_decode
from .model import Transducer, count_parameters

__all__ = [
    "ModelConfig",
    "TaskKind",
    "Transducer",
    "VariantKind",
    "Vocabularies",
    "Vocabulary",
    "count_parameters",
    "greedy_decode",
    "load_g2p",
    "load_inflection",
    "load_translit",
]

__version__ = "0.1.0"
