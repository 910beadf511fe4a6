"""Sequence labeler pairing a global transformer encoder with multi-window
bidirectional local feature extractors fused by attention."""

from .autodiff import Tensor
from .config import RunConfig, load_config, parse_config, write_config
from .data import LabeledSequence, Vocab, gen_synthetic, read_conll, write_conll
from .fusion import FusionConfig
from .gang import GangConfig, encode_span_bidirectional, extract_subsequence, gang_forward
from .hero import FrozenHero, HeroConfig, encode
from .model import HGNModel
from .tagger import LabelScheme, Metrics, bio_decode, entity_prf
from .train import ablate_run, evaluate, load_model, train_run

__version__ = "0.1.0"

__all__ = [
    "Tensor", "RunConfig", "load_config", "parse_config", "write_config",
    "LabeledSequence", "Vocab", "gen_synthetic", "read_conll", "write_conll",
    "FusionConfig", "GangConfig", "encode_span_bidirectional",
    "extract_subsequence", "gang_forward", "FrozenHero", "HeroConfig", "encode",
    "HGNModel", "LabelScheme", "Metrics", "bio_decode", "entity_prf",
    "ablate_run", "evaluate", "load_model", "train_run", "__version__",
]
