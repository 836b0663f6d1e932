import string

import pytest
import torch


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A small randomly initialized BERT-style checkpoint on disk.

    The WordPiece vocabulary is character-level (every letter and digit,
    plus their ## continuations), so every multi-character word tokenizes
    into several subwords and the word-alignment path gets exercised.
    """
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    ckpt_dir = tmp_path_factory.mktemp("checkpoint")
    pieces = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    alphabet = list(string.ascii_lowercase + string.digits)
    pieces += alphabet + [f"##{ch}" for ch in alphabet]
    vocab = {piece: i for i, piece in enumerate(pieces)}

    backend = Tokenizer(WordPiece(vocab=vocab, unk_token="[UNK]", continuing_subword_prefix="##"))
    backend.normalizer = BertNormalizer(lowercase=True)
    backend.pre_tokenizer = BertPreTokenizer()
    backend.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    tokenizer.save_pretrained(ckpt_dir)

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(pieces),
        hidden_size=16,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=512,
    )
    BertModel(config).save_pretrained(ckpt_dir)
    return str(ckpt_dir)


@pytest.fixture(scope="session")
def corpus_files(tmp_path_factory):
    """Small train/test splits in the nine-column layout."""
    from mwetag.corpus import write_dimsum
    from mwetag.synth import synthetic_corpus

    data_dir = tmp_path_factory.mktemp("corpus")
    paths = {}
    # The train split must be large enough that the fixed frozen-feature
    # recipe (3 epochs of batch-32 steps) sees a few hundred updates, and
    # span-dense enough that randomly initialized features can separate
    # the classes within those updates.
    for name, n_sentences, n_tokens, seed in (
        ("train", 1600, 12800, 51),
        ("test", 200, 1600, 52),
    ):
        corpus = synthetic_corpus(
            n_sentences, n_tokens, seed=seed, id_prefix=name, span_probability=1.0
        )
        path = data_dir / f"{name}.tsv"
        with open(path, "w", encoding="utf-8") as fh:
            write_dimsum(corpus, fh)
        paths[name] = str(path)
    return paths
