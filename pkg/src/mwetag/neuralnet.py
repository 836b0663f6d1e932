"""Dense neural-network kernel with hand-derived gradients.

Provides exactly what the taggers need: an embedding table, an LSTM cell,
a bidirectional wrapper, a linear projection, SGD and Adam steps, global
gradient-norm clipping, and a little-endian binary format for named
float64 tensors.  All math is float64; every backward pass is exact, not
approximated, so finite-difference checks can run at tight tolerances.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np


class ShapeMismatch(ValueError):
    pass


class StaleCache(ValueError):
    pass


class BadMagic(ValueError):
    pass


class VersionUnsupported(ValueError):
    pass


class CorruptPayload(ValueError):
    pass


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Piecewise form avoids overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class EmbeddingTable:
    """Word-vector lookup table; row 0 is reserved for unknown words."""

    vectors: np.ndarray  # (V, D)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, vocab_size: int, dim: int, scale: float = 0.1):
        return cls(vectors=rng.uniform(-scale, scale, size=(vocab_size, dim)))


@dataclass
class LstmCellParams:
    """Gate-stacked LSTM weights, gate order: input, forget, cell, output."""

    W: np.ndarray  # (4H, D) input weights
    U: np.ndarray  # (4H, H) recurrent weights
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, rng: np.random.Generator, input_size: int, hidden_size: int, scale: float = 0.1):
        return cls(
            W=rng.uniform(-scale, scale, size=(4 * hidden_size, input_size)),
            U=rng.uniform(-scale, scale, size=(4 * hidden_size, hidden_size)),
            b=np.zeros(4 * hidden_size),
        )


@dataclass
class LinearParams:
    W: np.ndarray  # (O, I)
    b: np.ndarray  # (O,)

    @classmethod
    def init(cls, rng: np.random.Generator, in_size: int, out_size: int, scale: float = 0.1):
        return cls(W=rng.uniform(-scale, scale, size=(out_size, in_size)), b=np.zeros(out_size))

    @classmethod
    def zeros(cls, in_size: int, out_size: int):
        return cls(W=np.zeros((out_size, in_size)), b=np.zeros(out_size))


@dataclass
class LstmCache:
    params: LstmCellParams
    inputs: np.ndarray
    h0: np.ndarray
    c0: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    hidden: np.ndarray


def lstm_forward(
    params: LstmCellParams,
    inputs: np.ndarray,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
) -> tuple[np.ndarray, LstmCache]:
    """Run the cell over a T x D input sequence.

    Returns the T x H hidden states and a cache of every intermediate the
    backward pass needs.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ShapeMismatch("inputs must be T x D with T >= 1")
    T, D = inputs.shape
    H = params.hidden_size
    if D != params.input_size:
        raise ShapeMismatch(f"input dim {D} != cell input size {params.input_size}")
    h_prev = np.zeros(H) if h0 is None else np.asarray(h0, dtype=np.float64)
    c_prev = np.zeros(H) if c0 is None else np.asarray(c0, dtype=np.float64)
    if h_prev.shape != (H,) or c_prev.shape != (H,):
        raise ShapeMismatch("h0/c0 must have shape (H,)")

    xw = inputs @ params.W.T  # (T, 4H), one matmul for all steps
    gates_i = np.empty((T, H))
    gates_f = np.empty((T, H))
    gates_g = np.empty((T, H))
    gates_o = np.empty((T, H))
    cells = np.empty((T, H))
    tanh_c = np.empty((T, H))
    hidden = np.empty((T, H))

    h0_saved, c0_saved = h_prev.copy(), c_prev.copy()
    for t in range(T):
        z = xw[t] + params.U @ h_prev + params.b
        i_t = _sigmoid(z[:H])
        f_t = _sigmoid(z[H : 2 * H])
        g_t = np.tanh(z[2 * H : 3 * H])
        o_t = _sigmoid(z[3 * H :])
        c_t = f_t * c_prev + i_t * g_t
        tc_t = np.tanh(c_t)
        h_t = o_t * tc_t

        gates_i[t], gates_f[t], gates_g[t], gates_o[t] = i_t, f_t, g_t, o_t
        cells[t], tanh_c[t], hidden[t] = c_t, tc_t, h_t
        h_prev, c_prev = h_t, c_t

    cache = LstmCache(
        params=params,
        inputs=inputs,
        h0=h0_saved,
        c0=c0_saved,
        i=gates_i,
        f=gates_f,
        g=gates_g,
        o=gates_o,
        c=cells,
        tanh_c=tanh_c,
        hidden=hidden,
    )
    return hidden, cache


def lstm_backward(
    cache: LstmCache, grad_hidden: np.ndarray
) -> tuple[LstmCellParams, np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of sum_t <grad_hidden[t], hidden[t]>.

    Returns (grad_params, grad_inputs, grad_h0, grad_c0).
    """
    grad_hidden = np.asarray(grad_hidden, dtype=np.float64)
    if grad_hidden.shape != cache.hidden.shape:
        raise StaleCache(
            f"grad_hidden shape {grad_hidden.shape} does not match cached {cache.hidden.shape}"
        )
    params = cache.params
    T, H = cache.hidden.shape

    dW = np.zeros_like(params.W)
    dU = np.zeros_like(params.U)
    db = np.zeros_like(params.b)
    d_inputs = np.empty_like(cache.inputs)
    dh_carry = np.zeros(H)
    dc_carry = np.zeros(H)

    for t in range(T - 1, -1, -1):
        i_t, f_t, g_t, o_t = cache.i[t], cache.f[t], cache.g[t], cache.o[t]
        tc_t = cache.tanh_c[t]
        c_prev = cache.c[t - 1] if t > 0 else cache.c0
        h_prev = cache.hidden[t - 1] if t > 0 else cache.h0

        dh = grad_hidden[t] + dh_carry
        do = dh * tc_t
        dc = dh * o_t * (1.0 - tc_t * tc_t) + dc_carry
        di = dc * g_t
        df = dc * c_prev
        dg = dc * i_t
        dc_carry = dc * f_t

        dz = np.concatenate(
            (
                di * i_t * (1.0 - i_t),
                df * f_t * (1.0 - f_t),
                dg * (1.0 - g_t * g_t),
                do * o_t * (1.0 - o_t),
            )
        )
        dW += np.outer(dz, cache.inputs[t])
        dU += np.outer(dz, h_prev)
        db += dz
        d_inputs[t] = params.W.T @ dz
        dh_carry = params.U.T @ dz

    return LstmCellParams(W=dW, U=dU, b=db), d_inputs, dh_carry, dc_carry


@dataclass
class BilstmCache:
    fwd: LstmCache
    bwd: LstmCache


def bilstm_forward(
    fwd: LstmCellParams, bwd: LstmCellParams, inputs: np.ndarray
) -> tuple[np.ndarray, BilstmCache]:
    """Concatenate a forward pass with a reversed-sequence pass: T x 2H."""
    if fwd.hidden_size != bwd.hidden_size:
        raise ShapeMismatch("both directions must share the hidden size")
    h_fwd, cache_fwd = lstm_forward(fwd, inputs)
    h_bwd_rev, cache_bwd = lstm_forward(bwd, np.asarray(inputs, dtype=np.float64)[::-1])
    output = np.concatenate((h_fwd, h_bwd_rev[::-1]), axis=1)
    return output, BilstmCache(fwd=cache_fwd, bwd=cache_bwd)


def bilstm_backward(
    cache: BilstmCache, grad_output: np.ndarray
) -> tuple[LstmCellParams, LstmCellParams, np.ndarray]:
    """Gradients for both directions plus the shared input sequence."""
    H = cache.fwd.params.hidden_size
    grad_output = np.asarray(grad_output, dtype=np.float64)
    if grad_output.shape != (cache.fwd.hidden.shape[0], 2 * H):
        raise StaleCache(f"grad_output shape {grad_output.shape} does not match cache")
    grad_fwd_params, d_in_fwd, _, _ = lstm_backward(cache.fwd, grad_output[:, :H])
    grad_bwd_params, d_in_bwd_rev, _, _ = lstm_backward(cache.bwd, grad_output[::-1, H:])
    return grad_fwd_params, grad_bwd_params, d_in_fwd + d_in_bwd_rev[::-1]


def linear_forward(params: LinearParams, x: np.ndarray) -> np.ndarray:
    """y = W x + b, applied row-wise when x is a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.W.shape[1]:
        raise ShapeMismatch(f"input size {x.shape[-1]} != weight columns {params.W.shape[1]}")
    return x @ params.W.T + params.b


def linear_backward(
    params: LinearParams, x: np.ndarray, grad_y: np.ndarray
) -> tuple[LinearParams, np.ndarray]:
    """Exact gradients of <grad_y, y>; returns (grad_params, grad_x)."""
    x = np.asarray(x, dtype=np.float64)
    grad_y = np.asarray(grad_y, dtype=np.float64)
    if grad_y.shape[-1] != params.W.shape[0] or grad_y.shape[:-1] != x.shape[:-1]:
        raise ShapeMismatch("grad_y shape does not match the forward output")
    if x.ndim == 1:
        dW = np.outer(grad_y, x)
        db = grad_y.copy()
    else:
        dW = grad_y.T @ x
        db = grad_y.sum(axis=0)
    return LinearParams(W=dW, b=db), grad_y @ params.W


# --- optimizers -----------------------------------------------------------
#
# Both steps operate on name -> array dicts so one call updates a whole
# model; updates are in place and the containers are returned for chaining.


def _check_aligned(params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
    if params.keys() != grads.keys():
        raise ShapeMismatch(f"parameter/gradient keys differ: {sorted(params)} vs {sorted(grads)}")
    for name, p in params.items():
        if p.shape != grads[name].shape:
            raise ShapeMismatch(f"{name}: param shape {p.shape} != grad shape {grads[name].shape}")


def sgd_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float
) -> dict[str, np.ndarray]:
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    _check_aligned(params, grads)
    for name, p in params.items():
        p -= lr * grads[name]
    return params


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    _check_aligned(params, grads)
    _check_aligned(params, state.m)
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for name, p in params.items():
        g = grads[name]
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip norm.
    """
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


# --- tensor serialization -------------------------------------------------

TENSOR_MAGIC = b"MWEP"
TENSOR_VERSION = 1


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise CorruptPayload(f"expected {n} bytes, got {len(data)}")
    return data


def write_tensor_record(stream: BinaryIO, name: str, array: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(array, dtype="<f8")
    stream.write(struct.pack("<I", len(encoded)))
    stream.write(encoded)
    stream.write(struct.pack("<I", array.ndim))
    stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
    stream.write(array.tobytes())


def read_tensor_record(stream: BinaryIO) -> tuple[str, np.ndarray] | None:
    """One (name, tensor) pair, or None at a clean end of stream."""
    head = stream.read(4)
    if not head:
        return None
    if len(head) != 4:
        raise CorruptPayload("truncated record header")
    (name_len,) = struct.unpack("<I", head)
    name = _read_exact(stream, name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", _read_exact(stream, 4))
    dims = struct.unpack(f"<{rank}I", _read_exact(stream, 4 * rank)) if rank else ()
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    payload = _read_exact(stream, 8 * count)
    array = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    return name, array


def save_tensors(stream: BinaryIO, tensors: dict[str, np.ndarray]) -> None:
    """Versioned blob: magic, version, then named records until EOF."""
    stream.write(TENSOR_MAGIC)
    stream.write(struct.pack("<I", TENSOR_VERSION))
    for name, array in tensors.items():
        write_tensor_record(stream, name, array)


def load_tensors(stream: BinaryIO) -> dict[str, np.ndarray]:
    magic = stream.read(4)
    if magic != TENSOR_MAGIC:
        raise BadMagic(f"expected {TENSOR_MAGIC!r}, got {magic!r}")
    (version,) = struct.unpack("<I", _read_exact(stream, 4))
    if version != TENSOR_VERSION:
        raise VersionUnsupported(f"tensor blob version {version} not supported")
    tensors: dict[str, np.ndarray] = {}
    while True:
        record = read_tensor_record(stream)
        if record is None:
            return tensors
        name, array = record
        tensors[name] = array
