"""Forward and backward passes of the cross-modal attention classifier.

Lexical path: token embeddings -> LSTM -> final hidden state -> linear query.
Acoustic path: 1-D time convolution (same padding, stride 1) + ReLU gives one
key per feature frame; keys double as values. Scaled dot-product attention
pools the keys into a context vector that a linear head maps to 4 logits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..corpus import EMOTION_INDEX


@dataclass(frozen=True)
class Example:
    """One utterance encoded for the network."""

    uid: str
    token_ids: np.ndarray
    features: np.ndarray
    label: int


def encode(utterance, vocabulary, unk_id=None):
    """Map tokens to ids; unknown tokens go to ``unk_id`` (default ``len(vocabulary)``)."""
    unk = len(vocabulary) if unk_id is None else unk_id
    ids = np.fromiter((vocabulary.get(t, unk) for t in utterance.tokens), dtype=np.int64)
    return Example(utterance.id, ids, utterance.features, EMOTION_INDEX[utterance.emotion])


def encode_corpus(corpus, utterances=None):
    utts = corpus.utterances if utterances is None else utterances
    return [encode(u, corpus.vocabulary) for u in utts]


@dataclass
class ForwardTrace:
    attention_weights: np.ndarray
    context_vector: np.ndarray
    logits: np.ndarray
    # cached intermediates for the backward pass
    token_ids: np.ndarray
    embedded: np.ndarray
    hidden: np.ndarray
    cells: np.ndarray
    gates: np.ndarray
    query: np.ndarray
    cols: np.ndarray
    keys_pre: np.ndarray
    keys: np.ndarray


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x):
    z = x - np.max(x)
    e = np.exp(z)
    return e / e.sum()


def log_softmax(x):
    z = x - np.max(x)
    return z - np.log(np.exp(z).sum())


def lstm_forward(embedded, params):
    """Hidden states ``(n, d_h)``, final hidden ``h_n``, and the cell/gate caches."""
    d_e = embedded.shape[1]
    w = params["lstm_W"]
    zx = np.ascontiguousarray(embedded @ w[:d_e] + params["lstm_b"])
    hs, cs, gates = _kernels.lstm_recurrence(zx, np.ascontiguousarray(w[d_e:]))
    return hs, hs[-1], cs, gates


def im2col(features, width):
    pad = width // 2
    t, m = features.shape
    padded = np.zeros((t + 2 * pad, m), dtype=features.dtype)
    padded[pad:pad + t] = features
    win = np.lib.stride_tricks.sliding_window_view(padded, (width, m))
    return np.ascontiguousarray(win.reshape(t, width * m))


def conv_keys(features, params, return_cache=False):
    w = params["conv_W"]
    width = w.shape[0]
    cols = im2col(np.asarray(features, dtype=w.dtype), width)
    pre = cols @ w.reshape(-1, w.shape[2]) + params["conv_b"]
    keys = np.maximum(pre, 0.0)
    if return_cache:
        return keys, cols, pre
    return keys


def attention(query, keys):
    scores = keys @ query / np.sqrt(keys.shape[1])
    return softmax(scores)


def forward(example, params):
    emb = params["embeddings"][example.token_ids]
    hs, h_n, cs, gates = lstm_forward(emb, params)
    query = h_n @ params["query_W"] + params["query_b"]
    keys, cols, pre = conv_keys(example.features, params, return_cache=True)
    weights = attention(query, keys)
    context = weights @ keys
    logits = context @ params["cls_W"] + params["cls_b"]
    return ForwardTrace(
        attention_weights=weights,
        context_vector=context,
        logits=logits,
        token_ids=example.token_ids,
        embedded=emb,
        hidden=hs,
        cells=cs,
        gates=gates,
        query=query,
        cols=cols,
        keys_pre=pre,
        keys=keys,
    )


def loss(logits, label, weight=1.0):
    """Class-weighted cross-entropy for one utterance."""
    return float(-weight * log_softmax(np.asarray(logits, dtype=np.float64))[label])


def backward(trace, label, weight, params, grads, scale=1.0):
    """Accumulate ``scale * d loss / d params`` for one utterance into ``grads``."""
    dt = params.dtype
    p = softmax(trace.logits)
    dlogits = p.copy()
    dlogits[label] -= 1.0
    dlogits = (dlogits * (weight * scale)).astype(dt)

    grads["cls_W"] += np.outer(trace.context_vector, dlogits)
    grads["cls_b"] += dlogits
    dctx = params["cls_W"] @ dlogits

    a = trace.attention_weights
    keys = trace.keys
    dk = dt.type(np.sqrt(keys.shape[1]))
    # value path
    dkeys = np.outer(a, dctx)
    da = keys @ dctx
    ds = a * (da - a @ da)
    # score path: s_t = k_t . q / sqrt(d_k)
    dquery = keys.T @ ds / dk
    dkeys += np.outer(ds, trace.query / dk)

    dpre = dkeys * (trace.keys_pre > 0)
    w = params["conv_W"]
    grads["conv_W"] += (trace.cols.T @ dpre).reshape(w.shape)
    grads["conv_b"] += dpre.sum(axis=0)

    hs = trace.hidden
    grads["query_W"] += np.outer(hs[-1], dquery)
    grads["query_b"] += dquery
    dhs = np.zeros_like(hs)
    dhs[-1] = params["query_W"] @ dquery

    d_e = trace.embedded.shape[1]
    lw = params["lstm_W"]
    dz = _kernels.lstm_recurrence_backward(
        dhs, trace.cells, trace.gates, np.ascontiguousarray(lw[d_e:])
    )
    grads["lstm_W"][:d_e] += trace.embedded.T @ dz
    if hs.shape[0] > 1:
        grads["lstm_W"][d_e:] += hs[:-1].T @ dz[1:]
    grads["lstm_b"] += dz.sum(axis=0)
    demb = dz @ lw[:d_e].T
    np.add.at(grads["embeddings"], trace.token_ids, demb)


def gradients(batch, params, class_weights):
    """Mean weighted cross-entropy over ``batch`` and its exact gradients.

    ``class_weights`` is a length-4 sequence indexed by label. Returns
    ``(loss, grads, traces)``.
    """
    if not batch:
        raise ValueError("empty batch")
    grads = params.zeros_like()
    scale = 1.0 / len(batch)
    total = 0.0
    traces = []
    for ex in batch:
        tr = forward(ex, params)
        w = float(class_weights[ex.label])
        total += loss(tr.logits, ex.label, w)
        backward(tr, ex.label, w, params, grads, scale)
        traces.append(tr)
    return total * scale, grads, traces


def batch_loss(batch, params, class_weights):
    total = 0.0
    for ex in batch:
        tr = forward(ex, params)
        total += loss(tr.logits, ex.label, float(class_weights[ex.label]))
    return total / len(batch)
