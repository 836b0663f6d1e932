"""Trainable taggers assembled from the corpus, CRF, and network kernels.

Two model kinds:

* ``bilstm_crf`` — trainable word embeddings feeding a bidirectional LSTM,
  a linear projection to three label scores per token, and a linear-chain
  CRF trained by per-sentence SGD on the sequence NLL.
* ``linear_head`` — a linear softmax classifier over precomputed
  per-token embeddings, trained with Adam under a linear warmup schedule.

Training is deterministic given (data, config, seed): one seeded RNG
drives initialization and the per-epoch shuffles, and all math is
float64.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import BinaryIO, Sequence

import numpy as np

from . import crf, neuralnet
from .corpus import Corpus, Label, N_LABELS, Sentence
from .neuralnet import (
    AdamState,
    CorruptPayload,
    EmbeddingTable,
    LinearParams,
    LstmCellParams,
)
from .tagscheme import SchemeMode

UNK = "<unk>"

MODEL_KINDS = ("bilstm_crf", "linear_head")


class EmptyCorpus(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


class DimMismatch(ValueError):
    pass


class NonFiniteLoss(RuntimeError):
    def __init__(self, epoch: int, sentence: int, value: float):
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, sentence {sentence}; "
            "lower the learning rate or tighten clipping"
        )
        self.epoch = epoch
        self.sentence = sentence


@dataclass
class TrainConfig:
    model_kind: str
    learning_rate: float
    epochs: int
    batch_size: int = 1
    warmup_fraction: float = 0.0
    seed: int = 0
    hidden_size: int = 200
    embed_dim: int = 100
    scheme: SchemeMode = SchemeMode.IOB2
    clip_norm: float = 5.0
    decay: str = "linear"  # lr after warmup: "linear" to zero, or "constant"

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1]")
        if self.decay not in ("linear", "constant"):
            raise ValueError("decay must be 'linear' or 'constant'")

    @classmethod
    def bilstm_crf(cls, **overrides) -> "TrainConfig":
        """Recurrent-tagger recipe: SGD at 0.15 for 50 epochs, clip 5.0."""
        base = cls(model_kind="bilstm_crf", learning_rate=0.15, epochs=50, batch_size=1)
        return replace(base, **overrides)

    @classmethod
    def linear_head(cls, **overrides) -> "TrainConfig":
        """Frozen-embedding recipe: Adam at 4e-5, 3 epochs, batches of 32,
        linear warmup over the first 10% of optimizer steps."""
        base = cls(
            model_kind="linear_head",
            learning_rate=4e-5,
            epochs=3,
            batch_size=32,
            warmup_fraction=0.1,
        )
        return replace(base, **overrides)


@dataclass
class TaggerModel:
    model_kind: str
    config: TrainConfig
    vocab: dict[str, int] = field(default_factory=dict)
    embedding: EmbeddingTable | None = None
    lstm_fwd: LstmCellParams | None = None
    lstm_bwd: LstmCellParams | None = None
    proj: LinearParams | None = None
    crf_params: crf.CrfParams | None = None
    head: LinearParams | None = None

    def tensors(self) -> dict[str, np.ndarray]:
        """Named parameter arrays, in a fixed order for serialization and
        optimizer bookkeeping."""
        if self.model_kind == "bilstm_crf":
            return {
                "embedding.vectors": self.embedding.vectors,
                "lstm_fwd.W": self.lstm_fwd.W,
                "lstm_fwd.U": self.lstm_fwd.U,
                "lstm_fwd.b": self.lstm_fwd.b,
                "lstm_bwd.W": self.lstm_bwd.W,
                "lstm_bwd.U": self.lstm_bwd.U,
                "lstm_bwd.b": self.lstm_bwd.b,
                "proj.W": self.proj.W,
                "proj.b": self.proj.b,
                "crf.transitions": self.crf_params.transitions,
                "crf.start": self.crf_params.start,
                "crf.end": self.crf_params.end,
            }
        return {"head.W": self.head.W, "head.b": self.head.b}


def build_vocab(corpus: Corpus) -> dict[str, int]:
    """Lowercased training words in first-seen order; index 0 is UNK."""
    vocab = {UNK: 0}
    for sentence in corpus.sentences:
        for token in sentence.tokens:
            word = token.word.lower()
            if word not in vocab:
                vocab[word] = len(vocab)
    return vocab


def encode_words(vocab: dict[str, int], sentence: Sentence) -> np.ndarray:
    return np.array([vocab.get(t.word.lower(), 0) for t in sentence.tokens], dtype=np.intp)


def _init_bilstm_model(cfg: TrainConfig, vocab: dict[str, int]) -> TaggerModel:
    rng = np.random.default_rng(cfg.seed)
    embedding = EmbeddingTable.init(rng, len(vocab), cfg.embed_dim)
    lstm_fwd = LstmCellParams.init(rng, cfg.embed_dim, cfg.hidden_size)
    lstm_bwd = LstmCellParams.init(rng, cfg.embed_dim, cfg.hidden_size)
    proj = LinearParams.init(rng, 2 * cfg.hidden_size, N_LABELS)
    return TaggerModel(
        model_kind="bilstm_crf",
        config=cfg,
        vocab=vocab,
        embedding=embedding,
        lstm_fwd=lstm_fwd,
        lstm_bwd=lstm_bwd,
        proj=proj,
        crf_params=crf.CrfParams.zeros(N_LABELS),
    )


def _sentence_grads(
    model: TaggerModel, word_ids: np.ndarray, gold: np.ndarray
) -> tuple[float, dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """NLL plus gradients for every dense parameter; embedding gradients
    come back sparsely as (unique row ids, per-row grads)."""
    inputs = model.embedding.vectors[word_ids]
    encoded, bicache = neuralnet.bilstm_forward(model.lstm_fwd, model.lstm_bwd, inputs)
    emissions = neuralnet.linear_forward(model.proj, encoded)
    loss, grad_e, grad_crf = crf.nll_and_grads(emissions, model.crf_params, gold)
    grad_proj, grad_encoded = neuralnet.linear_backward(model.proj, encoded, grad_e)
    grad_fwd, grad_bwd, grad_inputs = neuralnet.bilstm_backward(bicache, grad_encoded)

    rows, inverse = np.unique(word_ids, return_inverse=True)
    grad_rows = np.zeros((rows.shape[0], inputs.shape[1]))
    np.add.at(grad_rows, inverse, grad_inputs)

    grads = {
        "lstm_fwd.W": grad_fwd.W,
        "lstm_fwd.U": grad_fwd.U,
        "lstm_fwd.b": grad_fwd.b,
        "lstm_bwd.W": grad_bwd.W,
        "lstm_bwd.U": grad_bwd.U,
        "lstm_bwd.b": grad_bwd.b,
        "proj.W": grad_proj.W,
        "proj.b": grad_proj.b,
        "crf.transitions": grad_crf.transitions,
        "crf.start": grad_crf.start,
        "crf.end": grad_crf.end,
    }
    return loss, grads, rows, grad_rows


def train_bilstm_crf(corpus: Corpus, cfg: TrainConfig) -> tuple[TaggerModel, list[float]]:
    """Per-sentence SGD on the CRF negative log-likelihood.

    Sentence order reshuffles each epoch from one seed-derived stream.
    The returned trace holds one mean NLL per token for every epoch.
    """
    if cfg.model_kind != "bilstm_crf":
        raise ValueError(f"config is for {cfg.model_kind!r}")
    if not corpus.sentences:
        raise EmptyCorpus("training corpus has no sentences")

    vocab = build_vocab(corpus)
    model = _init_bilstm_model(cfg, vocab)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    encoded_sentences = [
        (encode_words(vocab, s), np.asarray([int(l) for l in s.labels], dtype=np.intp))
        for s in corpus.sentences
    ]
    total_tokens = sum(len(ids) for ids, _ in encoded_sentences)

    dense_params = {k: v for k, v in model.tensors().items() if k != "embedding.vectors"}
    trace: list[float] = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(encoded_sentences))
        epoch_loss = 0.0
        for sent_idx in order:
            word_ids, gold = encoded_sentences[sent_idx]
            loss, grads, rows, grad_rows = _sentence_grads(model, word_ids, gold)
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, int(sent_idx), loss)
            epoch_loss += loss

            clip_view = dict(grads)
            clip_view["embedding.rows"] = grad_rows
            neuralnet.clip_global_norm(clip_view, cfg.clip_norm)

            neuralnet.sgd_step(dense_params, grads, cfg.learning_rate)
            model.embedding.vectors[rows] -= cfg.learning_rate * grad_rows
        trace.append(epoch_loss / total_tokens)
    return model, trace


def _lr_at(step: int, total: int, warmup: int, peak: float, decay: str) -> float:
    """0-based step -> learning rate: linear 0->peak over the warmup steps,
    then linear decay to zero (or flat, when decay='constant')."""
    if warmup > 0 and step < warmup:
        return peak * (step + 1) / warmup
    if decay == "constant" or total <= warmup:
        return peak
    return peak * (total - step) / (total - warmup)


def train_linear_head(
    dataset: Sequence[tuple[Sentence, np.ndarray]], cfg: TrainConfig
) -> tuple[TaggerModel, list[float]]:
    """Token-level softmax cross-entropy over frozen embedding vectors."""
    if cfg.model_kind != "linear_head":
        raise ValueError(f"config is for {cfg.model_kind!r}")
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("no aligned sentences to train on")
    dim = dataset[0][1].shape[1]
    for sentence, vectors in dataset:
        if vectors.shape != (len(sentence), dim):
            raise DimMismatch(
                f"sentence {sentence.id!r}: vectors {vectors.shape} vs {len(sentence)} tokens x {dim}"
            )

    model = TaggerModel(
        model_kind="linear_head", config=cfg, head=LinearParams.zeros(dim, N_LABELS)
    )
    params = model.tensors()
    state = AdamState.for_params(params)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    n_batches = math.ceil(len(dataset) / cfg.batch_size)
    total_steps = n_batches * cfg.epochs
    warmup_steps = math.ceil(cfg.warmup_fraction * total_steps)

    features = [np.asarray(v, dtype=np.float64) for _, v in dataset]
    labels = [np.asarray([int(l) for l in s.labels], dtype=np.intp) for s, _ in dataset]

    step = 0
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        epoch_tokens = 0
        for b in range(n_batches):
            chunk = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            x = np.concatenate([features[i] for i in chunk], axis=0)
            y = np.concatenate([labels[i] for i in chunk], axis=0)

            logits = neuralnet.linear_forward(model.head, x)
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            n = y.shape[0]
            loss = -log_probs[np.arange(n), y].mean()
            epoch_loss += loss * n
            epoch_tokens += n

            grad_logits = np.exp(log_probs)
            grad_logits[np.arange(n), y] -= 1.0
            grad_logits /= n
            grad_head, _ = neuralnet.linear_backward(model.head, x, grad_logits)

            lr = _lr_at(step, total_steps, warmup_steps, cfg.learning_rate, cfg.decay)
            neuralnet.adam_step(params, {"head.W": grad_head.W, "head.b": grad_head.b}, state, lr)
            step += 1
        trace.append(epoch_loss / epoch_tokens)
    return model, trace


def _bilstm_emissions(model: TaggerModel, sentence: Sentence) -> np.ndarray:
    word_ids = encode_words(model.vocab, sentence)
    inputs = model.embedding.vectors[word_ids]
    encoded, _ = neuralnet.bilstm_forward(model.lstm_fwd, model.lstm_bwd, inputs)
    return neuralnet.linear_forward(model.proj, encoded)


def predict(
    model: TaggerModel, sentence: Sentence, vectors: np.ndarray | None = None
) -> list[Label]:
    """Label a sentence: Viterbi decode for bilstm_crf, per-token argmax
    for linear_head (ties go to the lowest label index)."""
    if model.model_kind == "bilstm_crf":
        emissions = _bilstm_emissions(model, sentence)
        path, _ = crf.viterbi(emissions, model.crf_params)
        return [Label(i) for i in path]

    if vectors is None:
        raise DimMismatch("linear_head prediction needs the sentence's embedding vectors")
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape != (len(sentence), model.head.W.shape[1]):
        raise DimMismatch(
            f"vectors {vectors.shape} do not match {len(sentence)} tokens x {model.head.W.shape[1]}"
        )
    logits = neuralnet.linear_forward(model.head, vectors)
    return [Label(int(i)) for i in np.argmax(logits, axis=1)]


# --- persistence -----------------------------------------------------------
#
# Layout: magic "MWEP", version u32, u32-length-prefixed JSON header
# (model_kind, config snapshot, vocabulary), then named tensor records.

MODEL_MAGIC = neuralnet.TENSOR_MAGIC
MODEL_VERSION = 1


def _config_to_json(cfg: TrainConfig) -> dict:
    data = asdict(cfg)
    data["scheme"] = cfg.scheme.value
    return data


def _config_from_json(data: dict) -> TrainConfig:
    data = dict(data)
    data["scheme"] = SchemeMode(data["scheme"])
    return TrainConfig(**data)


def save_model(model: TaggerModel, stream: BinaryIO) -> None:
    header = json.dumps(
        {
            "model_kind": model.model_kind,
            "config": _config_to_json(model.config),
            "vocab": model.vocab,
        },
        sort_keys=True,
    ).encode("utf-8")
    stream.write(MODEL_MAGIC)
    stream.write(struct.pack("<I", MODEL_VERSION))
    stream.write(struct.pack("<I", len(header)))
    stream.write(header)
    for name, array in model.tensors().items():
        neuralnet.write_tensor_record(stream, name, array)


def load_model(stream: BinaryIO) -> TaggerModel:
    magic = stream.read(4)
    if magic != MODEL_MAGIC:
        raise neuralnet.BadMagic(f"expected {MODEL_MAGIC!r}, got {magic!r}")
    raw = stream.read(4)
    if len(raw) != 4:
        raise CorruptPayload("truncated version field")
    (version,) = struct.unpack("<I", raw)
    if version != MODEL_VERSION:
        raise neuralnet.VersionUnsupported(f"model file version {version} not supported")
    raw = stream.read(4)
    if len(raw) != 4:
        raise CorruptPayload("truncated header length")
    (header_len,) = struct.unpack("<I", raw)
    header_bytes = stream.read(header_len)
    if len(header_bytes) != header_len:
        raise CorruptPayload("truncated JSON header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"unreadable JSON header: {exc}") from None

    tensors: dict[str, np.ndarray] = {}
    while True:
        record = neuralnet.read_tensor_record(stream)
        if record is None:
            break
        tensors[record[0]] = record[1]

    kind = header["model_kind"]
    cfg = _config_from_json(header["config"])
    model = TaggerModel(model_kind=kind, config=cfg, vocab=dict(header["vocab"]))
    try:
        if kind == "bilstm_crf":
            model.embedding = EmbeddingTable(tensors["embedding.vectors"])
            model.lstm_fwd = LstmCellParams(
                tensors["lstm_fwd.W"], tensors["lstm_fwd.U"], tensors["lstm_fwd.b"]
            )
            model.lstm_bwd = LstmCellParams(
                tensors["lstm_bwd.W"], tensors["lstm_bwd.U"], tensors["lstm_bwd.b"]
            )
            model.proj = LinearParams(tensors["proj.W"], tensors["proj.b"])
            model.crf_params = crf.CrfParams(
                tensors["crf.transitions"], tensors["crf.start"], tensors["crf.end"]
            )
        elif kind == "linear_head":
            model.head = LinearParams(tensors["head.W"], tensors["head.b"])
        else:
            raise CorruptPayload(f"unknown model kind {kind!r}")
    except KeyError as exc:
        raise CorruptPayload(f"missing tensor {exc.args[0]!r}") from None
    return model
