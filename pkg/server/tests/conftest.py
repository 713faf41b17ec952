"""Shared fixtures: a tiny randomly-initialized checkpoint that loads offline.

The checkpoint is a full byte-level BPE tokenizer (every byte is a token, no
merges) plus a two-layer encoder saved with its masked-language head. Victim
classification heads absent from the checkpoint are initialized under a fixed
seed, so responses are deterministic for a given server process and across
runs. Real fine-tuned checkpoints load through the same path.
"""

from pathlib import Path

import pytest
import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers, processors
from transformers import RobertaConfig, RobertaForMaskedLM, RobertaTokenizerFast

from fastapi.testclient import TestClient

from model_server.app import create_app
from model_server.engine import InferenceEngine


def byte_level_alphabet() -> list[str]:
    """The byte-level BPE alphabet: one printable unicode char per byte value."""
    printable = list(range(ord("!"), ord("~") + 1)) + \
        list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    chars = {b: chr(b) for b in printable}
    shift = 0
    for b in range(256):
        if b not in chars:
            chars[b] = chr(256 + shift)
            shift += 1
    return [chars[b] for b in range(256)]


def build_tiny_checkpoint(target: Path) -> Path:
    target.mkdir(parents=True, exist_ok=True)

    specials = ["<s>", "<pad>", "</s>", "<unk>"]
    vocab = {tok: i for i, tok in enumerate(specials + byte_level_alphabet())}
    vocab["<mask>"] = len(vocab)

    backend = Tokenizer(models.BPE(vocab=vocab, merges=[]))
    backend.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    backend.decoder = decoders.ByteLevel()
    backend.post_processor = processors.RobertaProcessing(
        sep=("</s>", vocab["</s>"]), cls=("<s>", vocab["<s>"]))
    tokenizer = RobertaTokenizerFast(
        tokenizer_object=backend,
        bos_token="<s>", eos_token="</s>", sep_token="</s>", cls_token="<s>",
        unk_token="<unk>", pad_token="<pad>", mask_token="<mask>",
        model_max_length=128)
    tokenizer.save_pretrained(target)

    config = RobertaConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=130,
        num_labels=2,
        pad_token_id=vocab["<pad>"],
        bos_token_id=vocab["<s>"],
        eos_token_id=vocab["</s>"],
    )
    torch.manual_seed(42)
    model = RobertaForMaskedLM(config)
    model.save_pretrained(target)
    return target


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    return build_tiny_checkpoint(tmp_path_factory.mktemp("ckpt") / "tiny")


@pytest.fixture(scope="session")
def engine(checkpoint) -> InferenceEngine:
    return InferenceEngine(str(checkpoint), task="classification", device="cpu")


@pytest.fixture(scope="session")
def client(engine) -> TestClient:
    return TestClient(create_app(engine))


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return Path(__file__).parent / "golden"
