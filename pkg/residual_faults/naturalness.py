"""
Code naturalness: an add-k smoothed n-gram model over lexical tokens and
the per-function cross-entropy metric ENT.

P(w | h) = (c(h, w) + k) / (c(h) + k * (|V| + 1)) where the extra outcome
is the unknown token. Scoring uses the last ``order - 1`` tokens as the
context with no backoff, so an unseen context gives 1 / (|V| + 1). ENT floors
each token probability at that uniform value.
"""

import json
import logging
import math
import tokenize
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from residual_faults.errors import InputError
from residual_faults.syntax import FSTRING_END, FSTRING_START, fallback_tokens, safe_tokens

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
DEFAULT_ORDER = 3
DEFAULT_K = 0.01
MAX_ORDER = 5

_DROP = {
    tokenize.NL, tokenize.NEWLINE, tokenize.INDENT, tokenize.DEDENT,
    tokenize.COMMENT, tokenize.ENDMARKER, tokenize.ENCODING,
}


def tokenize_source(source_text: str) -> list[str]:
    """Lexical tokens wrapped in begin/end sentinels; comments and layout dropped."""
    tokens, complete = safe_tokens(source_text)
    if not complete:
        lines = source_text.splitlines()
        last = tokens[-1].end[0] if tokens else 0
        for row in range(last + 1, len(lines) + 1):
            tokens.extend(fallback_tokens(lines[row - 1], row))
    out = [BOS]
    for tok in tokens:
        if tok.type in _DROP or tok.type == tokenize.ERRORTOKEN and not tok.string.strip():
            continue
        if FSTRING_START is not None and tok.type in (FSTRING_START, FSTRING_END) and not tok.string:
            continue
        if tok.string:
            out.append(tok.string)
    out.append(EOS)
    return out


@dataclass
class NgramModel:
    order: int
    k: float
    counts: dict[tuple[str, ...], Counter] = field(default_factory=lambda: defaultdict(Counter))
    context_totals: dict[tuple[str, ...], int] = field(default_factory=lambda: defaultdict(int))
    vocabulary: set[str] = field(default_factory=set)

    def add(self, tokens: Sequence[str]) -> None:
        for i, word in enumerate(tokens):
            if word == BOS:
                continue
            self.vocabulary.add(word)
            for n in range(self.order):
                if i - n < 0:
                    break
                context = tuple(tokens[i - n:i])
                self.counts[context][word] += 1
                self.context_totals[context] += 1

    def probability(self, word: str, history: Sequence[str]) -> float:
        """Smoothed P(word | last order-1 tokens of history); unseen words are UNK."""
        n_ctx = self.order - 1
        context = tuple(history[-n_ctx:]) if n_ctx > 0 else ()
        v = len(self.vocabulary) + 1
        total = self.context_totals.get(context, 0)
        if total == 0:
            return 1.0 / v
        count = self.counts[context].get(word, 0) if word in self.vocabulary else 0
        return (count + self.k) / (total + self.k * v)

    def dumps(self) -> str:
        """Flat text: a header line, then ``k-gram<TAB>count`` lines sorted by key."""
        header = json.dumps({"order": self.order, "k": self.k, "vocab": len(self.vocabulary)}, sort_keys=True)
        rows = []
        for context, counter in self.counts.items():
            for word, count in counter.items():
                rows.append((json.dumps([*context, word], ensure_ascii=False), count))
        rows.sort()
        return "\n".join([f"# {header}"] + [f"{key}\t{count}" for key, count in rows]) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NgramModel":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise InputError("n-gram model text has no header line.")
        header = json.loads(lines[0][2:])
        model = cls(order=int(header["order"]), k=float(header["k"]))
        for line in lines[1:]:
            if not line.strip():
                continue
            key, count = line.rsplit("\t", 1)
            gram = json.loads(key)
            context, word = tuple(gram[:-1]), gram[-1]
            model.counts[context][word] += int(count)
            model.context_totals[context] += int(count)
            if not context:
                model.vocabulary.add(word)
        return model


def train_ngram(corpus: Iterable[Sequence[str]], order: int = DEFAULT_ORDER, k: float = DEFAULT_K) -> NgramModel:
    if not 1 <= int(order) <= MAX_ORDER:
        raise InputError(f"n-gram order must be in [1, {MAX_ORDER}], got {order}.")
    if k <= 0:
        raise InputError(f"smoothing constant k must be > 0, got {k}.")
    model = NgramModel(order=int(order), k=float(k))
    seen = 0
    for tokens in corpus:
        model.add(list(tokens))
        seen += 1
    if seen == 0 or not model.vocabulary:
        raise InputError("n-gram training corpus is empty.")
    logger.info("Trained %d-gram model on %d sequences, |V|=%d", order, seen, len(model.vocabulary))
    return model


def cross_entropy(model: NgramModel, function_tokens: Sequence[str]) -> float:
    """
    Mean negative log2 probability per predicted token (bits per token).

    Each token's probability is floored at the uniform 1 / (|V| + 1), so
    the result lies in [0, log2(|V| + 1)].
    """
    tokens = list(function_tokens)
    floor = 1.0 / (len(model.vocabulary) + 1)
    total = 0.0
    n = 0
    for i, word in enumerate(tokens):
        if word == BOS:
            continue
        p = max(model.probability(word, tokens[max(0, i - model.order + 1):i]), floor)
        total -= math.log2(p)
        n += 1
    if n == 0:
        return 0.0
    return max(total / n, 0.0)
