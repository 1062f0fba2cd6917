"""From-scratch LSTM for hourly relapse probability.

One cell with forget/input/output gates and a tanh candidate, a logistic
readout to a single probability per step, sum-of-squared-errors loss over the
labeled steps, and an exact backpropagation-through-time gradient. Training is
plain full-batch gradient descent with global-norm clipping, so results are
bitwise deterministic for a given seed and data.

Checkpoint format (little-endian), covered by a round-trip test:

    magic   b"AFLSTM1\\n"
    u32     header length
    header  UTF-8 JSON: {"hidden_size", "input_size", "config": {...}}
    arrays  float64 row-major, in order: w_f u_f b_f w_i u_i b_i
            w_o u_o b_o w_k u_k b_k w_out b_out
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

FEATURE_COUNT = 5


class ShapeMismatch(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class AlignmentError(ValueError):
    pass


class DivergenceDetected(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    seed: int = 0
    gradient_clip: float = 5.0
    window_hours: int = 720  # 30 days of hourly buckets
    hidden_size: int = 16

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.gradient_clip <= 0:
            raise ValueError("gradient_clip must be positive")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "seed": self.seed,
            "gradient_clip": self.gradient_clip,
            "window_hours": self.window_hours,
            "hidden_size": self.hidden_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{f.name: d[f.name] for f in fields(cls) if f.name in d})


@dataclass
class LstmParams:
    """All weights: per gate q in {f, i, o, k}, w_q (H x m), u_q (H x H),
    b_q (H), plus the scalar readout w_out (H), b_out."""

    w_f: np.ndarray
    u_f: np.ndarray
    b_f: np.ndarray
    w_i: np.ndarray
    u_i: np.ndarray
    b_i: np.ndarray
    w_o: np.ndarray
    u_o: np.ndarray
    b_o: np.ndarray
    w_k: np.ndarray
    u_k: np.ndarray
    b_k: np.ndarray
    w_out: np.ndarray
    b_out: float = 0.0

    @property
    def hidden_size(self) -> int:
        return self.w_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_f.shape[1]

    def copy(self) -> "LstmParams":
        return LstmParams(**{f.name: _copy_field(getattr(self, f.name)) for f in fields(self)})

    def array_fields(self) -> list[str]:
        return [f.name for f in fields(self) if f.name != "b_out"]


def _copy_field(v):
    return v.copy() if isinstance(v, np.ndarray) else v


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray


def zero_state(hidden_size: int) -> LstmState:
    return LstmState(np.zeros(hidden_size), np.zeros(hidden_size))


def init_params(hidden_size: int, input_size: int = FEATURE_COUNT, seed: int = 0) -> LstmParams:
    """Uniform init in [-0.08, 0.08] from a seeded generator."""
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-0.08, 0.08, shape)

    H, m = hidden_size, input_size
    return LstmParams(
        w_f=u(H, m), u_f=u(H, H), b_f=u(H),
        w_i=u(H, m), u_i=u(H, H), b_i=u(H),
        w_o=u(H, m), u_o=u(H, H), b_o=u(H),
        w_k=u(H, m), u_k=u(H, H), b_k=u(H),
        w_out=u(H), b_out=float(u(1)[0]),
    )


def zeros_like_params(p: LstmParams) -> LstmParams:
    return LstmParams(
        **{name: np.zeros_like(getattr(p, name)) for name in p.array_fields()},
        b_out=0.0,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_step(p: LstmParams, x_t: np.ndarray, prev: LstmState) -> LstmState:
    """One cell update: gates through the logistic sigmoid, candidate through
    tanh, c_t = f*c_prev + i*k, h_t = o*tanh(c_t), all elementwise."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (p.input_size,):
        raise ShapeMismatch(f"input shape {x_t.shape}, expected ({p.input_size},)")
    if prev.h.shape != (p.hidden_size,) or prev.c.shape != (p.hidden_size,):
        raise ShapeMismatch("state shape inconsistent with hidden size")
    f = _sigmoid(p.w_f @ x_t + p.u_f @ prev.h + p.b_f)
    i = _sigmoid(p.w_i @ x_t + p.u_i @ prev.h + p.b_i)
    o = _sigmoid(p.w_o @ x_t + p.u_o @ prev.h + p.b_o)
    k = np.tanh(p.w_k @ x_t + p.u_k @ prev.h + p.b_k)
    c = f * prev.c + i * k
    h = o * np.tanh(c)
    return LstmState(h=h, c=c)


def _forward_pass_batched(p: LstmParams, xs: np.ndarray) -> dict:
    """Run the cell over a (B, T, m) stack of equal-length sequences, caching
    per-step values for BPTT. States start at zero for every sequence."""
    B, T, _ = xs.shape
    H = p.hidden_size
    cache = {name: np.zeros((B, T, H)) for name in ("f", "i", "o", "k", "c", "h", "tc")}
    ys = np.zeros((B, T))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        x = xs[:, t, :]
        f = _sigmoid(x @ p.w_f.T + h @ p.u_f.T + p.b_f)
        i = _sigmoid(x @ p.w_i.T + h @ p.u_i.T + p.b_i)
        o = _sigmoid(x @ p.w_o.T + h @ p.u_o.T + p.b_o)
        k = np.tanh(x @ p.w_k.T + h @ p.u_k.T + p.b_k)
        c = f * c + i * k
        tc = np.tanh(c)
        h = o * tc
        for name, val in (("f", f), ("i", i), ("o", o), ("k", k), ("c", c), ("h", h), ("tc", tc)):
            cache[name][:, t, :] = val
        ys[:, t] = _sigmoid(h @ p.w_out + p.b_out)
    cache["y"] = ys
    return cache


def _forward_pass(p: LstmParams, xs: np.ndarray) -> dict:
    """Single-sequence forward: (T, m) in, per-step caches out."""
    cache = _forward_pass_batched(p, xs[None, :, :])
    return {name: arr[0] for name, arr in cache.items()}


def forward(p: LstmParams, seq: Union[np.ndarray, Sequence[Sequence[float]]]) -> np.ndarray:
    """Probability per step for the whole sequence, state zero-initialized."""
    xs = np.asarray(seq, dtype=float)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise EmptySequence("sequence must be a non-empty (T, m) array")
    if xs.shape[1] != p.input_size:
        raise ShapeMismatch(f"feature width {xs.shape[1]}, expected {p.input_size}")
    return _forward_pass(p, xs)["y"]


Batch = Sequence[tuple[np.ndarray, np.ndarray]]


def _check_batch(p: LstmParams, batch: Batch) -> list[tuple[np.ndarray, np.ndarray]]:
    checked = []
    for xs, ys in batch:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 2 or xs.shape[0] < 2:
            raise AlignmentError("each sequence needs at least 2 steps")
        if ys.shape != (xs.shape[0] - 1,):
            raise AlignmentError(
                f"labels {ys.shape} must be sequence length - 1 = {xs.shape[0] - 1}"
            )
        if xs.shape[1] != p.input_size:
            raise ShapeMismatch(f"feature width {xs.shape[1]}, expected {p.input_size}")
        checked.append((xs, ys))
    return checked


def _group_by_length(
    checked: list[tuple[np.ndarray, np.ndarray]]
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stack equal-length sequences into (B, T, m) / (B, T-1) groups so the
    time loop runs once per length, not once per sequence."""
    order: list[int] = []
    groups: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    for xs, ys in checked:
        T = xs.shape[0]
        if T not in groups:
            groups[T] = []
            order.append(T)
        groups[T].append((xs, ys))
    return [
        (np.stack([xs for xs, _ in groups[T]]), np.stack([ys for _, ys in groups[T]]))
        for T in order
    ]


def loss(p: LstmParams, batch: Batch) -> float:
    """Sum of squared errors over all labeled steps of all sequences.

    The prediction at the final step of each sequence carries no label and is
    excluded. Zero iff every labeled prediction is exact.
    """
    total = 0.0
    for xs, ys in _group_by_length(_check_batch(p, batch)):
        yhat = _forward_pass_batched(p, xs)["y"]
        err = yhat[:, :-1] - ys
        total += float(np.sum(err * err))
    return total


def sequence_rmse(p: LstmParams, batch: Batch) -> float:
    """Reported metric: root of the mean squared error over labeled steps."""
    total, count = 0.0, 0
    for xs, ys in _check_batch(p, batch):
        yhat = _forward_pass(p, xs)["y"]
        err = yhat[:-1] - ys
        total += float(err @ err)
        count += len(ys)
    return float(np.sqrt(total / count)) if count else 0.0


def gradient(p: LstmParams, batch: Batch) -> LstmParams:
    """Exact gradient of loss() via backpropagation through time."""
    g = zeros_like_params(p)
    for xs, ys in _group_by_length(_check_batch(p, batch)):
        _accumulate_group_gradient(p, xs, ys, g)
    return g


def _accumulate_group_gradient(
    p: LstmParams, xs: np.ndarray, ys: np.ndarray, g: LstmParams
) -> None:
    """BPTT over a (B, T, m) stack of sequences with (B, T-1) labels."""
    cache = _forward_pass_batched(p, xs)
    B, T, _ = xs.shape
    H = p.hidden_size
    f, i, o, k = cache["f"], cache["i"], cache["o"], cache["k"]
    c, h, tc, y = cache["c"], cache["h"], cache["tc"], cache["y"]

    # d loss / d readout pre-activation, zero at the unlabeled final step
    e = np.zeros((B, T))
    e[:, :-1] = 2.0 * (y[:, :-1] - ys) * y[:, :-1] * (1.0 - y[:, :-1])

    zeros = np.zeros((B, H))
    dh_next = zeros.copy()
    dc_next = zeros.copy()
    for t in range(T - 1, -1, -1):
        h_t = h[:, t, :]
        g.w_out += e[:, t] @ h_t
        g.b_out += float(np.sum(e[:, t]))
        dh = e[:, t, None] * p.w_out + dh_next
        o_t, tc_t = o[:, t, :], tc[:, t, :]
        do = dh * tc_t
        dz_o = do * o_t * (1.0 - o_t)
        dc = dh * o_t * (1.0 - tc_t ** 2) + dc_next
        c_prev = c[:, t - 1, :] if t > 0 else zeros
        h_prev = h[:, t - 1, :] if t > 0 else zeros
        f_t, i_t, k_t = f[:, t, :], i[:, t, :], k[:, t, :]
        dz_f = dc * c_prev * f_t * (1.0 - f_t)
        dz_i = dc * k_t * i_t * (1.0 - i_t)
        dz_k = dc * i_t * (1.0 - k_t ** 2)

        x_t = xs[:, t, :]
        g.w_f += dz_f.T @ x_t
        g.u_f += dz_f.T @ h_prev
        g.b_f += dz_f.sum(axis=0)
        g.w_i += dz_i.T @ x_t
        g.u_i += dz_i.T @ h_prev
        g.b_i += dz_i.sum(axis=0)
        g.w_o += dz_o.T @ x_t
        g.u_o += dz_o.T @ h_prev
        g.b_o += dz_o.sum(axis=0)
        g.w_k += dz_k.T @ x_t
        g.u_k += dz_k.T @ h_prev
        g.b_k += dz_k.sum(axis=0)

        dh_next = dz_f @ p.u_f + dz_i @ p.u_i + dz_o @ p.u_o + dz_k @ p.u_k
        dc_next = dc * f_t


def _global_norm(g: LstmParams) -> float:
    total = g.b_out ** 2
    for name in g.array_fields():
        a = getattr(g, name)
        total += float(np.sum(a * a))
    return float(np.sqrt(total))


def _apply_update(p: LstmParams, g: LstmParams, scale: float) -> None:
    for name in p.array_fields():
        getattr(p, name)[...] += scale * getattr(g, name)
    p.b_out += scale * g.b_out


def train(p0: LstmParams, data: Batch, cfg: TrainConfig) -> LstmParams:
    """Full-batch gradient descent with global-norm clipping.

    Runs cfg.epochs passes and returns the best parameters seen, so the
    loss of the returned model never exceeds any earlier epoch's. Halts with
    DivergenceDetected the moment the loss turns non-finite.
    """
    if cfg.epochs == 0:
        return p0
    p = p0.copy()
    data = _check_batch(p, data)
    best = p.copy()
    best_loss = loss(p, data)
    if not np.isfinite(best_loss):
        raise DivergenceDetected(f"loss is {best_loss} before training")
    for _ in range(cfg.epochs):
        g = gradient(p, data)
        norm = _global_norm(g)
        if norm > cfg.gradient_clip:
            scale = -cfg.learning_rate * cfg.gradient_clip / norm
        else:
            scale = -cfg.learning_rate
        _apply_update(p, g, scale)
        cur = loss(p, data)
        if not np.isfinite(cur):
            raise DivergenceDetected(f"loss became {cur}")
        if cur <= best_loss:
            best_loss = cur
            best = p.copy()
    return best


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"AFLSTM1\n"
_ARRAY_ORDER = (
    "w_f", "u_f", "b_f",
    "w_i", "u_i", "b_i",
    "w_o", "u_o", "b_o",
    "w_k", "u_k", "b_k",
    "w_out",
)


def dumps_params(p: LstmParams, cfg: Optional[TrainConfig] = None) -> bytes:
    header = {
        "hidden_size": p.hidden_size,
        "input_size": p.input_size,
        "config": cfg.to_dict() if cfg else None,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [_MAGIC, struct.pack("<I", len(blob)), blob]
    for name in _ARRAY_ORDER:
        parts.append(np.ascontiguousarray(getattr(p, name), dtype="<f8").tobytes())
    parts.append(struct.pack("<d", p.b_out))
    return b"".join(parts)


def loads_params(data: bytes) -> tuple[LstmParams, Optional[TrainConfig]]:
    if data[: len(_MAGIC)] != _MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    pos = len(_MAGIC)
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    H, m = header["hidden_size"], header["input_size"]
    shapes = {
        "w_f": (H, m), "u_f": (H, H), "b_f": (H,),
        "w_i": (H, m), "u_i": (H, H), "b_i": (H,),
        "w_o": (H, m), "u_o": (H, H), "b_o": (H,),
        "w_k": (H, m), "u_k": (H, H), "b_k": (H,),
        "w_out": (H,),
    }
    arrays = {}
    for name in _ARRAY_ORDER:
        shape = shapes[name]
        n = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).copy()
        pos += 8 * n
    (b_out,) = struct.unpack_from("<d", data, pos)
    cfg = TrainConfig.from_dict(header["config"]) if header.get("config") else None
    return LstmParams(**arrays, b_out=b_out), cfg


def save_params(path: Union[str, Path], p: LstmParams, cfg: Optional[TrainConfig] = None) -> None:
    Path(path).write_bytes(dumps_params(p, cfg))


def load_params(path: Union[str, Path]) -> tuple[LstmParams, Optional[TrainConfig]]:
    return loads_params(Path(path).read_bytes())
