"""Instrumented toy encoder-decoder translator.

The model is a one-layer encoder (self-attention + ReLU feed-forward) and a
one-layer decoder (self-attention over everything emitted so far,
cross-attention over the encoder memory, ReLU feed-forward, output
projection). Decoding is greedy.

Alignment is hard-monotonic. The decoder keeps a pointer into the source
and its query carries the pointer's positional code, so cross-attention
locks onto one source token. After every step a scalar *advance gate*
decides whether the pointer moves on. Each source piece carries a fixed
familiarity score: whole words advance at once (one output token per word),
multi-character fragments nearly always, and bare letters inside a word
are left to random weights and a dwell counter, so runs of junk letters can
hold the pointer for several steps. Familiarity depends only on the
vocabulary, which is what lets inputs found on one model stay expensive on
another. Once the pointer passes the
last source token it attends to an end-of-source slot, which drives the EOS
logit.

Nothing in the recorded computation is cached between decode steps: every
step re-projects the full decoder history and the full encoder memory, which
makes the multiply count of step ``t`` depend on ``t`` and on the source
length, as in the reference pipeline.

Every matrix product is counted into the trace, together with its DRAM
traffic under a per-layer full-flush policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from ..energy import ActivationTrace, LayerIO, LayerTraceEntry, count_matmul, layer_dram_words
from .corpus import WORDS, build_toy_vocab
from .text import CONTINUATION, EOS_ID, PAD_ID, PUNCTUATION, UNK_ID, TokenSequence, Vocab, encode_text

CHECKPOINT_FORMAT = "spongelab-translator"
CHECKPOINT_VERSION = 1

# Positional code frequencies; pairwise code similarity stays <= 0.571 for
# every pair of distinct positions below 257.
POS_FREQS = np.array([1.00002852, 1.24538971, 2.11795534, 2.20149386, 2.30363183, 2.71449207])
N_POS = 2 * len(POS_FREQS)
N_SPECIAL = N_POS + 3
MAX_POSITIONS = 256


def positional_codes(n: int) -> np.ndarray:
    t = np.arange(n, dtype=np.float64)[:, None] * POS_FREQS
    return np.concatenate([np.cos(t), np.sin(t)], axis=1) / np.sqrt(len(POS_FREQS))


_POS_TABLE = positional_codes(MAX_POSITIONS + 1)


class Layout(NamedTuple):
    content: slice
    pos: slice
    known: int
    end: int
    dwell: int


def layout(d: int) -> Layout:
    if d < N_SPECIAL + 4:
        raise ValueError(f"model width {d} too small; need at least {N_SPECIAL + 4}")
    c = d - N_SPECIAL
    return Layout(slice(0, c), slice(c, c + N_POS), c + N_POS, c + N_POS + 1, c + N_POS + 2)


class PipelineDims(NamedTuple):
    l_tin: int
    l_tout: int
    l_ein: int
    l_eout: int


class TranslationResult(NamedTuple):
    output: TokenSequence
    trace: ActivationTrace
    dims: PipelineDims


PARAM_NAMES = (
    "emb_in", "enc_wq", "enc_wk", "enc_wv", "enc_w1", "enc_b1", "enc_w2",
    "emb_out", "dec_wq", "dec_wk", "dec_wv", "x_wk", "x_wv", "end_value",
    "dec_w1", "dec_b1", "dec_w2", "out_w", "out_b", "gate_w", "gate_b",
)


@dataclass(frozen=True, eq=False)
class ToyTranslator:
    params: dict[str, np.ndarray]
    vocab_size: int
    max_decode_steps: int | None = None
    align_scale: float = 40.0
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [n for n in PARAM_NAMES if n not in self.params]
        if missing:
            raise ValueError(f"missing parameters: {missing}")
        p = self.params
        V, d_in = p["emb_in"].shape
        d_out = p["emb_out"].shape[1]
        f_in, f_out = p["enc_w1"].shape[1], p["dec_w1"].shape[1]
        expected = {
            "emb_in": (V, d_in), "enc_wq": (d_in, d_in), "enc_wk": (d_in, d_in),
            "enc_wv": (d_in, d_in), "enc_w1": (d_in, f_in), "enc_b1": (f_in,),
            "enc_w2": (f_in, d_in), "emb_out": (V, d_out), "dec_wq": (d_out, d_out),
            "dec_wk": (d_out, d_out), "dec_wv": (d_out, d_out), "x_wk": (d_in, d_out),
            "x_wv": (d_in, d_out), "end_value": (d_out,), "dec_w1": (d_out, f_out),
            "dec_b1": (f_out,), "dec_w2": (f_out, d_out), "out_w": (d_out, V),
            "out_b": (V,), "gate_w": (d_out,), "gate_b": (),
        }
        for name, shape in expected.items():
            if p[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {p[name].shape}, expected {shape}")
        if V != self.vocab_size:
            raise ValueError("embedding rows do not match vocab_size")
        layout(d_in), layout(d_out)
        for a in p.values():
            a.setflags(write=False)

    @property
    def l_ein(self) -> int:
        return self.params["emb_in"].shape[1]

    @property
    def l_eout(self) -> int:
        return self.params["emb_out"].shape[1]

    @property
    def ffn_in(self) -> int:
        return self.params["enc_w1"].shape[1]

    @property
    def ffn_out(self) -> int:
        return self.params["dec_w1"].shape[1]

    def decode_cap(self, l_tin: int) -> int:
        return self.max_decode_steps if self.max_decode_steps is not None else 4 * l_tin

    # -- checkpoint ----------------------------------------------------------
    def save(self, path) -> None:
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "vocab_size": self.vocab_size,
            "max_decode_steps": self.max_decode_steps,
            "align_scale": self.align_scale,
            "config": self.config,
            "arrays": {
                name: {"shape": list(self.params[name].shape), "data": self.params[name].ravel().tolist()}
                for name in PARAM_NAMES
            },
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path) -> "ToyTranslator":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} translator checkpoint")
        params = {
            name: np.asarray(a["data"], dtype=np.float64).reshape(a["shape"])
            for name, a in doc["arrays"].items()
        }
        return cls(params, doc["vocab_size"], doc["max_decode_steps"], doc["align_scale"], doc.get("config", {}))


def familiarity(vocab: Vocab, known_words=WORDS) -> np.ndarray:
    """Per-piece familiarity in [0, 1] used by the advance gate."""
    known = set(known_words) | set(PUNCTUATION)
    fam = np.zeros(len(vocab))
    for i, piece in enumerate(vocab.pieces):
        bare = piece[len(CONTINUATION):] if piece.startswith(CONTINUATION) else piece
        if i == UNK_ID or i in (PAD_ID, EOS_ID):
            continue
        if piece in known:
            fam[i] = 1.0
        elif len(bare) > 1:
            fam[i] = 0.6
        elif not piece.startswith(CONTINUATION):
            fam[i] = 0.3
    return fam


def build_toy_translator(
    vocab: Vocab | None = None,
    seed: int = 0,
    d_in: int = 32,
    d_out: int = 32,
    ffn: int = 48,
    *,
    known_words=WORDS,
    max_decode_steps: int | None = None,
    align_scale: float = 40.0,
    eos_margin: float = 50.0,
    known_gate: float = 10.0,
    dwell_gate: float = 1.0,
    gate_bias: float = -0.5,
    gate_noise: float = 1.5,
    eos_bias: float = 0.0,
) -> ToyTranslator:
    """Random content weights on top of the hand-set alignment machinery.

    ``eos_bias`` shifts the EOS logit: a large positive value makes the
    decoder stop at its first step, a large negative one stops it never.
    """
    vocab = vocab or build_toy_vocab()
    V = len(vocab)
    rng = np.random.default_rng(seed)
    li, lo = layout(d_in), layout(d_out)
    ci, co = li.content, lo.content

    def rand(shape, fan_in, out_mask=None):
        w = rng.standard_normal(shape) / np.sqrt(fan_in)
        if out_mask is not None:
            keep = np.zeros(shape[-1], dtype=bool)
            keep[out_mask] = True
            w[..., ~keep] = 0.0
        return w

    emb_in = np.zeros((V, d_in))
    emb_in[:, ci] = rng.standard_normal((V, ci.stop))
    emb_in[:, li.known] = familiarity(vocab, known_words)
    emb_out = np.zeros((V, d_out))
    emb_out[:, co] = rng.standard_normal((V, co.stop))

    x_wk = np.zeros((d_in, d_out))
    x_wk[ci, co] = rng.standard_normal((ci.stop, co.stop)) * (0.3 / d_in)
    x_wk[li.pos, lo.pos] = np.eye(N_POS) * align_scale
    x_wv = np.zeros((d_in, d_out))
    x_wv[ci, co] = rng.standard_normal((ci.stop, co.stop)) / np.sqrt(ci.stop)
    x_wv[li.known, lo.known] = 1.0
    end_value = np.zeros(d_out)
    end_value[lo.end] = 1.0

    out_w = np.zeros((d_out, V))
    out_w[co, :] = rng.standard_normal((co.stop, V)) * (2.0 / np.sqrt(co.stop))
    out_w[lo.end, EOS_ID] = eos_margin
    out_b = np.zeros(V)
    out_b[EOS_ID] = -eos_margin / 2 + eos_bias
    out_b[PAD_ID] = -1e4

    gate_w = np.zeros(d_out)
    gate_w[co] = rng.standard_normal(co.stop) * (gate_noise / np.sqrt(co.stop))
    gate_w[lo.known] = known_gate
    gate_w[lo.dwell] = dwell_gate

    params = {
        "emb_in": emb_in,
        "enc_wq": rand((d_in, d_in), d_in) / np.sqrt(d_in),
        "enc_wk": rand((d_in, d_in), d_in),
        "enc_wv": rand((d_in, d_in), d_in, ci),
        "enc_w1": rand((d_in, ffn), d_in),
        "enc_b1": rng.standard_normal(ffn) * 0.5 - 0.25,
        "enc_w2": rand((ffn, d_in), ffn, ci),
        "emb_out": emb_out,
        "dec_wq": rand((d_out, d_out), d_out) / np.sqrt(d_out),
        "dec_wk": rand((d_out, d_out), d_out),
        "dec_wv": rand((d_out, d_out), d_out, co),
        "x_wk": x_wk,
        "x_wv": x_wv,
        "end_value": end_value,
        "dec_w1": rand((d_out, ffn), d_out),
        "dec_b1": rng.standard_normal(ffn) * 0.5 - 0.25,
        "dec_w2": rand((ffn, d_out), ffn, co),
        "out_w": out_w,
        "out_b": out_b,
        "gate_w": gate_w,
        "gate_b": np.array(gate_bias),
    }
    config = {"seed": seed, "d_in": d_in, "d_out": d_out, "ffn": ffn}
    return ToyTranslator(params, V, max_decode_steps, align_scale, config)


# -- instrumented forward pass --------------------------------------------------


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


_ROW_NNZ: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _row_nonzero(w: np.ndarray):
    # Parameters are read-only, so their per-row counts can be cached by
    # identity; activations are counted afresh.
    if w.flags.writeable or w.base is not None:
        return None
    hit = _ROW_NNZ.get(id(w))
    if hit is None or hit[0] is not w:
        hit = (w, (w != 0).sum(axis=-1))
        _ROW_NNZ[id(w)] = hit
    return hit[1]


class _Recorder:
    """Collects trace entries; ``mults`` are the ``(x, w)`` operand pairs of a layer."""

    __slots__ = ("entries",)

    def __init__(self):
        self.entries: list[LayerTraceEntry] = []

    def record(self, name, mults, inputs, weight_words, output):
        mt = mz = 0
        for x, w in mults:
            t, z = count_matmul(x, w, _row_nonzero(w))
            mt += t
            mz += z
        out_nz = np.count_nonzero(output)
        io = LayerIO(
            tuple(a.size for a in inputs),
            tuple(np.count_nonzero(a) for a in inputs),
            int(weight_words),
            int(output.size),
            out_nz,
        )
        raw, comp = layer_dram_words(io)
        self.entries.append(LayerTraceEntry(name, mt, mz, int(output.size), out_nz, raw, comp))


class _NullRecorder(_Recorder):
    __slots__ = ()

    def record(self, *args):
        pass


def _encode(model: ToyTranslator, ids: np.ndarray, rec: _Recorder) -> np.ndarray:
    p = model.params
    n = len(ids)
    lay = layout(model.l_ein)
    x0 = p["emb_in"][ids].copy()
    x0[:, lay.pos] += _POS_TABLE[:n]
    rec.record("enc.embed", [], [ids], n * model.l_ein, x0)

    q, k, v = x0 @ p["enc_wq"], x0 @ p["enc_wk"], x0 @ p["enc_wv"]
    a = _softmax(q @ k.T)
    x1 = x0 + a @ v
    rec.record(
        "enc.self_attn",
        [(x0, p["enc_wq"]), (x0, p["enc_wk"]), (x0, p["enc_wv"]),
         (q, k.T), (a, v)],
        [x0],
        3 * model.l_ein**2,
        x1,
    )
    h = np.maximum(x1 @ p["enc_w1"] + p["enc_b1"], 0.0)
    rec.record("enc.ffn1", [(x1, p["enc_w1"])], [x1], p["enc_w1"].size + p["enc_b1"].size, h)
    mem = x1 + h @ p["enc_w2"]
    rec.record("enc.ffn2", [(h, p["enc_w2"])], [h, x1], p["enc_w2"].size, mem)
    return mem


def translate(
    model: ToyTranslator,
    tokens: TokenSequence,
    monitor: Callable[[list[LayerTraceEntry]], None] | None = None,
    *,
    record: bool = True,
) -> TranslationResult:
    """Greedy decode with a full activation trace.

    ``monitor`` is called with the new trace entries after the encoder and
    after every decode step; raising from it aborts the inference. With
    ``record=False`` no trace is kept (the returned trace is empty), which
    is several times faster when only the output and dimensions matter.
    """
    n = len(tokens.ids)
    if n == 0:
        raise ValueError("cannot translate an empty token sequence")
    if n > MAX_POSITIONS:
        raise ValueError(f"input of {n} tokens exceeds the {MAX_POSITIONS}-position limit")
    if max(tokens.ids) >= model.vocab_size or min(tokens.ids) < 0:
        raise ValueError("token id outside the model vocabulary")
    p = model.params
    d_out = model.l_eout
    lay = layout(d_out)
    if monitor is not None and not record:
        raise ValueError("a monitor needs a recorded trace")
    rec = _Recorder() if record else _NullRecorder()
    ids = np.asarray(tokens.ids, dtype=np.int64)
    mem = _encode(model, ids, rec)
    if monitor is not None:
        monitor(list(rec.entries))

    # The modelled pipeline re-projects the memory at every step and the
    # trace charges it that way; the product is identical each time, so it
    # is only computed once here.
    keys = mem @ p["x_wk"]
    vals = mem @ p["x_wv"]
    mem_pos = _POS_TABLE[: n + 1]
    cap = model.decode_cap(n)
    history = np.zeros((cap, d_out))
    outputs: list[int] = []
    conf = 0.0
    pointer, dwell, prev = 0, 0, EOS_ID
    truncated = True
    for t in range(cap):
        mark = len(rec.entries)
        g = p["emb_out"][prev].copy()
        g[lay.pos] += mem_pos[pointer]
        g[lay.dwell] = dwell
        history[t] = g
        rec.record(f"dec{t}.embed", [], [np.array([prev])], d_out, g)

        hist = history[: t + 1]
        q = g @ p["dec_wq"]
        k = hist @ p["dec_wk"]
        v = hist @ p["dec_wv"]
        a = _softmax(k @ q)
        h1 = g + a @ v
        rec.record(
            f"dec{t}.self_attn",
            [(g[None], p["dec_wq"]), (hist, p["dec_wk"]),
             (hist, p["dec_wv"]), (k, q[:, None]), (a[None], v)],
            [g, hist],
            3 * d_out**2,
            h1,
        )

        scores = np.empty(n + 1)
        scores[:n] = keys @ h1
        end_key = mem_pos[n] * model.align_scale
        scores[n] = end_key @ h1[lay.pos]
        w = _softmax(scores)
        ctx_mem = w[:n] @ vals
        ctx_end = w[n] * p["end_value"]
        h2 = h1 + ctx_mem + ctx_end
        rec.record(
            f"dec{t}.cross_attn",
            [(mem, p["x_wk"]), (mem, p["x_wv"]),
             (keys, h1[:, None]), (w[None, :n], vals)],
            [h1, mem],
            p["x_wk"].size + p["x_wv"].size,
            ctx_mem,
        )
        rec.record(
            f"dec{t}.end_attn",
            [(end_key[None], h1[lay.pos, None]), (w[None, n:], p["end_value"][None])],
            [h1],
            N_POS + d_out,
            h2,
        )

        hid = np.maximum(h2 @ p["dec_w1"] + p["dec_b1"], 0.0)
        rec.record(f"dec{t}.ffn1", [(h2[None], p["dec_w1"])], [h2], p["dec_w1"].size + p["dec_b1"].size, hid)
        h3 = h2 + hid @ p["dec_w2"]
        rec.record(f"dec{t}.ffn2", [(hid[None], p["dec_w2"])], [hid, h2], p["dec_w2"].size, h3)

        logits = h3 @ p["out_w"] + p["out_b"]
        gate = float(h3 @ p["gate_w"] + p["gate_b"])
        head = np.append(logits, gate)
        rec.record(
            f"dec{t}.out_proj",
            [(h3[None], p["out_w"]), (h3[None], p["gate_w"][:, None])],
            [h3],
            p["out_w"].size + p["out_b"].size + d_out + 1,
            head,
        )
        tok = int(np.argmax(logits))  # first maximum wins ties
        conf += float(_softmax(logits)[tok])
        outputs.append(tok)
        if monitor is not None:
            monitor(rec.entries[mark:])
        if tok == EOS_ID:
            truncated = False
            break
        if gate > 0.0:
            pointer = min(pointer + 1, n)
            dwell = 0
        else:
            dwell += 1
        prev = tok

    out = TokenSequence(tuple(outputs), "", truncated=truncated, confidence=conf / len(outputs))
    dims = PipelineDims(n, len(outputs), model.l_ein, model.l_eout)
    return TranslationResult(out, ActivationTrace(rec.entries), dims)


def translate_text(model: ToyTranslator, vocab: Vocab, text: str, monitor=None, *, record=True) -> TranslationResult:
    return translate(model, encode_text(text, vocab), monitor, record=record)


# -- closed-form cost -----------------------------------------------------------


def _decoder_sums(l_tout: int) -> tuple[int, int]:
    # sum over steps of history length (t+1), t = 0..l_tout-1
    return l_tout, l_tout * (l_tout + 1) // 2


def pipeline_cost_estimate(dims: PipelineDims, model: ToyTranslator) -> int:
    """Multiplies needed for an inference of the given dimensions.

    Depends only on shapes, never on activation values, so it is what a
    white-box attacker can compute without running the model. Equals the
    ``mult_total`` of the instrumented trace.
    """
    n, T, di, do = dims
    f_in, f_out, V = model.ffn_in, model.ffn_out, model.vocab_size
    encoder = 3 * n * di * di + 2 * n * n * di + 2 * n * di * f_in
    steps, hist = _decoder_sums(T)
    self_attn = steps * do * do + hist * (2 * do * do + 2 * do)
    cross = steps * n * (2 * di * do + 2 * do)
    end = steps * (N_POS + do)
    ffn = steps * 2 * do * f_out
    out = steps * (do * V + do)
    return encoder + self_attn + cross + end + ffn + out


def pipeline_traffic_estimate(dims: PipelineDims, model: ToyTranslator) -> int:
    """Uncompressed DRAM words for an inference of the given dimensions."""
    n, T, di, do = dims
    f_in, f_out, V = model.ffn_in, model.ffn_out, model.vocab_size
    encoder = (
        (n + n * di + n * di)  # embed: ids, rows, output
        + (n * di + 3 * di * di + n * di)  # self-attention
        + (n * di + di * f_in + f_in + n * f_in)  # ffn1
        + (n * f_in + n * di + f_in * di + n * di)  # ffn2
    )
    steps, hist = _decoder_sums(T)
    per_step = (
        (1 + do + do)  # embed
        + (do + 3 * do * do + do)  # self-attention, without history rows
        + (do + n * di + 2 * di * do + do)  # cross-attention
        + (do + N_POS + do + do)  # end-of-source slot
        + (do + do * f_out + f_out + f_out)  # ffn1
        + (f_out + do + f_out * do + do)  # ffn2
        + (do + do * V + V + do + 1 + V + 1)  # output projection + gate
    )
    return encoder + steps * per_step + hist * do


def cross_attention_mults(trace: ActivationTrace) -> int:
    return sum(e.mult_total for e in trace if e.layer_name.endswith(".cross_attn"))
