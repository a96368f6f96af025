"""Skip-gram word embeddings trained with negative sampling."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .text import tokenize


@dataclass(frozen=True, eq=False)
class SkipGramModel:
    vocab: dict[str, int]
    w_in: np.ndarray   # (V, d) word vectors
    w_out: np.ndarray  # (V, d) context vectors

    @property
    def dim(self) -> int:
        return self.w_in.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def vector(self, token: str) -> np.ndarray:
        return self.w_in[self.vocab[token]]

    def context_score(self, center: str, context: str) -> float:
        """Logit that ``context`` appears near ``center``."""
        return float(self.w_in[self.vocab[center]] @ self.w_out[self.vocab[context]])


@njit(cache=True)
def _sgd(tokens, bounds, w_in, w_out, table, window, negatives, epochs, lr0, seed):
    np.random.seed(seed)
    d = w_in.shape[1]
    n_tokens = tokens.shape[0]
    total = epochs * n_tokens
    grad = np.empty(d)
    step = 0
    for _ in range(epochs):
        for s in range(bounds.shape[0] - 1):
            lo, hi = bounds[s], bounds[s + 1]
            for i in range(lo, hi):
                lr = max(lr0 * (1.0 - step / total), lr0 * 1e-4)
                step += 1
                center = tokens[i]
                # word2vec-style shrunken window
                b = np.random.randint(0, window)
                for j in range(max(lo, i - window + b), min(hi, i + window - b + 1)):
                    if j == i:
                        continue
                    grad[:] = 0.0
                    for k in range(negatives + 1):
                        if k == 0:
                            target = tokens[j]
                            label = 1.0
                        else:
                            target = table[np.random.randint(0, table.shape[0])]
                            if target == tokens[j]:
                                continue
                            label = 0.0
                        f = 0.0
                        for q in range(d):
                            f += w_in[center, q] * w_out[target, q]
                        if f > 20.0:
                            sig = 1.0
                        elif f < -20.0:
                            sig = 0.0
                        else:
                            sig = 1.0 / (1.0 + math.exp(-f))
                        g = lr * (label - sig)
                        for q in range(d):
                            grad[q] += g * w_out[target, q]
                            w_out[target, q] += g * w_in[center, q]
                    for q in range(d):
                        w_in[center, q] += grad[q]


def train_skipgram(corpus: Sequence[Sequence[str]], d: int = 50, window: int = 5,
                   negatives: int = 5, epochs: int = 5, seed: int = 0, min_count: int = 1,
                   learning_rate: float = 0.025, table_size: int = 1_000_000) -> SkipGramModel:
    """Fit embeddings on tokenised sentences. Deterministic given ``seed``."""
    if d < 2:
        raise ValueError("embedding dimension must be at least 2")
    if window < 1 or negatives < 0 or epochs < 1:
        raise ValueError("window and epochs must be positive, negatives non-negative")
    counts = Counter(tok for sent in corpus for tok in sent)
    words = sorted(w for w, c in counts.items() if c >= min_count)
    if not words:
        raise ValueError("empty corpus")
    vocab = {w: i for i, w in enumerate(words)}
    ids, bounds = [], [0]
    for sent in corpus:
        ids.extend(vocab[t] for t in sent if t in vocab)
        bounds.append(len(ids))
    tokens = np.array(ids, dtype=np.int64)
    freq = np.array([counts[w] for w in words], dtype=float) ** 0.75
    table = np.repeat(np.arange(len(words)), np.maximum(
        1, np.round(freq / freq.sum() * min(table_size, 100 * len(words))).astype(np.int64)))
    rng = np.random.default_rng(seed)
    w_in = (rng.random((len(words), d)) - 0.5) / d
    w_out = np.zeros((len(words), d))
    _sgd(tokens, np.array(bounds, dtype=np.int64), w_in, w_out, table, window, negatives,
         epochs, learning_rate, seed % (2**32))
    return SkipGramModel(vocab, w_in, w_out)


def vectorize(text, model: SkipGramModel) -> np.ndarray:
    """Mean of the in-vocabulary token vectors; zero when none are known."""
    tokens = tokenize(text) if isinstance(text, str) else list(text)
    idx = [model.vocab[t] for t in tokens if t in model.vocab]
    if not idx:
        return np.zeros(model.dim)
    return model.w_in[idx].mean(axis=0)
