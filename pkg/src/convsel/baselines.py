"""Non-neural reference systems: uniform chance and a TF-IDF cosine
ranker over raw term counts."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Sample
from .rng import RandomStream


def chance_select(sample: Sample, rng: RandomStream) -> tuple[str, int]:
    """Uniform over the addressee pool and over the candidate set,
    independently."""
    addressee = sample.agents[rng.randint(len(sample.agents))]
    response = rng.randint(len(sample.candidates))
    return addressee, response


@dataclass
class TfidfIndex:
    df: dict[str, int]
    n_docs: int

    def idf(self, term: str) -> float:
        return math.log(self.n_docs / max(self.df.get(term, 0), 1))

    def vector(self, tokens: list[str]) -> dict[str, float]:
        return {t: c * self.idf(t) for t, c in Counter(tokens).items()}


def build_tfidf_index(train_samples: list[Sample]) -> TfidfIndex:
    """Document frequencies over the training split, one candidate
    response counted as one document."""
    if not train_samples:
        raise ValueError("cannot build a TF-IDF index from zero samples")
    df: Counter[str] = Counter()
    n_docs = 0
    for s in train_samples:
        for cand in s.candidates:
            n_docs += 1
            for term in set(cand):
                df[term] += 1
    return TfidfIndex(df=dict(df), n_docs=n_docs)


def _cosine(u: dict[str, float], v: dict[str, float]) -> float:
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return sum(w * v[t] for t, w in u.items() if t in v) / (nu * nv)


def tfidf_rank(index: TfidfIndex, sample: Sample) -> tuple[str, int]:
    """Cosine-highest candidate, lowest index on ties.

    The addressee pick is a heuristic, not part of the TF-IDF method
    itself: the most recent context speaker other than the responder.
    """
    context_tokens = [tok for _, tokens in sample.context for tok in tokens]
    ctx_vec = index.vector(context_tokens)
    best, best_sim = 0, -1.0
    for j, cand in enumerate(sample.candidates):
        sim = _cosine(ctx_vec, index.vector(cand))
        if sim > best_sim:
            best, best_sim = j, sim

    addressee = sample.agents[0]
    for speaker, _ in reversed(sample.context):
        if speaker != sample.responder and speaker in sample.agents:
            addressee = speaker
            break
    return addressee, best
