"""Builds tiny local models once per session.

The sandbox has no model-hub access, so a small word-level masked LM (and a
decoder variant for generation) is constructed with random weights and
saved through the standard pretrained-model directory layout.  Every
exporter contract is independent of the weights' provenance.
"""

import pytest
import torch
from transformers import BertConfig, BertForMaskedLM, BertLMHeadModel, BertTokenizerFast

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

SENTENCE_WORDS = [
    "the", "a", "an", "is", "was", "are", "to", "of", "and", "in", "said",
    "engineer", "nurse", "doctor", "teacher", "tired", "kind", "smart",
    "he", "she", "his", "hers", "him", "her", "man", "woman", "boy", "girl",
    "brother", "sister", "son", "daughter", "male", "female",
    "math", "algebra", "geometry", "calculus", "equations", "computation",
    "numbers", "addition", "poetry", "art", "dance", "literature", "novel",
    "symphony", "drama", "sculpture", "good", "at", "person", ".", ",",
]


def _build_models(root):
    vocab = SPECIALS + SENTENCE_WORDS
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n")
    tokenizer = BertTokenizerFast(str(vocab_file), do_lower_case=True)

    common = dict(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(20240810)
    mlm_dir = root / "mlm"
    mlm = BertForMaskedLM(BertConfig(**common))
    mlm.save_pretrained(mlm_dir)
    tokenizer.save_pretrained(mlm_dir)

    torch.manual_seed(20240811)
    clm_dir = root / "clm"
    clm = BertLMHeadModel(BertConfig(is_decoder=True, **common))
    clm.save_pretrained(clm_dir)
    tokenizer.save_pretrained(clm_dir)
    return {"mlm": str(mlm_dir), "clm": str(clm_dir)}


@pytest.fixture(scope="session")
def model_dirs(tmp_path_factory):
    return _build_models(tmp_path_factory.mktemp("tiny-models"))
