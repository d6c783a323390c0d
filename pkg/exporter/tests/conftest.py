from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import BertProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "la", "el", "de", "y", "en", "gente", "canta", "plaza", "rey", "corona",
    "luces", "noche", "ciudad", "historia", "tiempo", "gent", "##e", "##s",
    ".", ",",
]


def build_checkpoint(directory: Path, hidden_size: int) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    vocab = {token: i for i, token in enumerate(VOCAB)}
    core = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    core.normalizer = BertNormalizer(lowercase=False, strip_accents=False)
    core.pre_tokenizer = BertPreTokenizer()
    core.post_processor = BertProcessing(
        ("[SEP]", vocab["[SEP]"]), ("[CLS]", vocab["[CLS]"])
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=core,
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
    )
    tokenizer.save_pretrained(directory)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=hidden_size,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=hidden_size,
        max_position_embeddings=128,
    )
    BertModel(config).save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def bert768(tmp_path_factory) -> Path:
    return build_checkpoint(tmp_path_factory.mktemp("bert768"), hidden_size=768)


@pytest.fixture(scope="session")
def bert32(tmp_path_factory) -> Path:
    return build_checkpoint(tmp_path_factory.mktemp("bert32"), hidden_size=32)


CHUNKS = [
    {"doc_id": "d0", "chunk_index": 0, "text": "la gente canta en la plaza.",
     "token_count": 8, "period": "old", "year": 1850},
    {"doc_id": "d1", "chunk_index": 0, "text": "el rey y la corona en la noche.",
     "token_count": 10, "period": "old", "year": 1860},
    {"doc_id": "d1", "chunk_index": 1, "text": "luces de la ciudad y gentes.",
     "token_count": 9, "period": "new", "year": 2000},
]

# "gente" in d0 spans [3, 8); "rey" in d1/0 spans [3, 6);
# "gentes" (prefix match "gent") in d1/1 spans [22, 26)
OCCURRENCES = [
    {"id": "gente:d0:0:3", "word": "gente", "doc_id": "d0", "chunk_index": 0,
     "period": "old", "char_start": 3, "char_end": 8,
     "matched_form": "gente", "match_kind": "exact"},
    {"id": "rey:d1:0:3", "word": "rey", "doc_id": "d1", "chunk_index": 0,
     "period": "old", "char_start": 3, "char_end": 6,
     "matched_form": "rey", "match_kind": "exact"},
    {"id": "gente:d1:1:22", "word": "gente", "doc_id": "d1", "chunk_index": 1,
     "period": "new", "char_start": 22, "char_end": 26,
     "matched_form": "gent", "match_kind": "subword_prefix"},
]


@pytest.fixture
def corpus_files(tmp_path) -> tuple[Path, Path]:
    chunks = tmp_path / "chunks.jsonl"
    chunks.write_text(
        "\n".join(json.dumps(row) for row in CHUNKS) + "\n", encoding="utf-8"
    )
    occurrences = tmp_path / "occ.jsonl"
    occurrences.write_text(
        "\n".join(json.dumps(row) for row in OCCURRENCES) + "\n", encoding="utf-8"
    )
    return occurrences, chunks
