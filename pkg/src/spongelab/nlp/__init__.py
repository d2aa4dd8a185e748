from .corpus import build_toy_vocab, natural_corpus, natural_sentence, random_corpus, random_string
from .text import ALPHABET, EOS_ID, PAD_ID, UNK_ID, TokenSequence, Vocab, bpe_encode, detokenize, encode_text, normalize
from .translator import (
    PipelineDims,
    ToyTranslator,
    TranslationResult,
    build_toy_translator,
    pipeline_cost_estimate,
    pipeline_traffic_estimate,
    translate,
    translate_text,
)

__all__ = [
    "ALPHABET",
    "EOS_ID",
    "PAD_ID",
    "UNK_ID",
    "PipelineDims",
    "TokenSequence",
    "ToyTranslator",
    "TranslationResult",
    "Vocab",
    "bpe_encode",
    "build_toy_translator",
    "build_toy_vocab",
    "detokenize",
    "encode_text",
    "natural_corpus",
    "natural_sentence",
    "normalize",
    "pipeline_cost_estimate",
    "pipeline_traffic_estimate",
    "random_corpus",
    "random_string",
    "translate",
    "translate_text",
]
