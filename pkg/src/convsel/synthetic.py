"""Synthetic multilingual conversation generators.

Used by the demos and the test suite to manufacture desk-scale corpora
with known structure: each conversation sticks to one topic cluster,
speakers alternate, and most utterances address the previous speaker
with the "name :" convention. Per-language embedding tables share the
same latent topic geometry, optionally rotated, so cross-lingual
transfer is possible by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Conversation, Sample, Utterance
from .embeddings import EmbeddingTable, make_table
from .rng import RandomStream


@dataclass
class SyntheticLanguage:
    lang: str
    convs: list[Conversation]
    table: EmbeddingTable
    clusters: list[list[str]]


def topic_words(lang: str, n_topics: int, words_per_topic: int) -> list[list[str]]:
    return [[f"{lang}w{t}_{i}" for i in range(words_per_topic)] for t in range(n_topics)]


def random_rotation(dim: int, rng: RandomStream) -> np.ndarray:
    """A uniform-ish random orthogonal matrix via QR of a Gaussian."""
    gauss = rng.normal(0.0, 1.0, (dim, dim))
    q, r = np.linalg.qr(gauss)
    return q * np.sign(np.diag(r))


def topic_bases(seed: int, n_topics: int, dim: int) -> np.ndarray:
    """Latent topic directions shared by every language built from the
    same seed."""
    rng = RandomStream(seed, "topic-bases")
    return rng.normal(0.0, 1.0, (n_topics, dim))


def make_embeddings(lang: str, clusters: list[list[str]], dim: int, seed: int,
                    rotation: np.ndarray | None = None,
                    noise: float = 0.15) -> EmbeddingTable:
    bases = topic_bases(seed, len(clusters), dim)
    rng = RandomStream(seed, f"embed/{lang}")
    words, rows = [], []
    for t, cluster in enumerate(clusters):
        for word in cluster:
            vec = bases[t] + rng.normal(0.0, noise, (dim,))
            if rotation is not None:
                vec = rotation @ vec
            words.append(word)
            rows.append(vec)
    return make_table(lang, words, np.array(rows))


def make_conversations(lang: str, clusters: list[list[str]], n_docs: int,
                       utts_per_doc: int, n_agents: int, rng: RandomStream,
                       address_prob: float = 0.85) -> list[Conversation]:
    convs = []
    for d in range(n_docs):
        agents = [f"{lang}_u{d}_{i}" for i in range(n_agents)]
        topic = rng.randint(len(clusters))
        cluster = clusters[topic]
        utts = []
        prev_speaker = None
        for t in range(utts_per_doc):
            others = [a for a in agents if a != prev_speaker]
            speaker = others[rng.randint(len(others))]
            content = [cluster[rng.randint(len(cluster))]
                       for _ in range(2 + rng.randint(4))]
            if prev_speaker is not None and rng.random() < address_prob:
                content = [prev_speaker, ":"] + content
            utts.append(Utterance(t=t, speaker=speaker, tokens=content))
            prev_speaker = speaker
        convs.append(Conversation(doc_id=f"{lang}-doc{d}", lang=lang, utterances=utts))
    return convs


def make_language(lang: str, seed: int, n_docs: int, utts_per_doc: int,
                  n_agents: int = 4, n_topics: int = 4, words_per_topic: int = 12,
                  dim: int = 16, rotation: np.ndarray | None = None,
                  address_prob: float = 0.85, noise: float = 0.15) -> SyntheticLanguage:
    clusters = topic_words(lang, n_topics, words_per_topic)
    table = make_embeddings(lang, clusters, dim, seed, rotation=rotation, noise=noise)
    rng = RandomStream(seed, f"convs/{lang}")
    convs = make_conversations(lang, clusters, n_docs, utts_per_doc, n_agents, rng,
                               address_prob=address_prob)
    return SyntheticLanguage(lang=lang, convs=convs, table=table, clusters=clusters)


def make_dummy_samples(n: int, r_size: int, rng: RandomStream,
                       lang: str = "xx", max_agents: int = 5) -> list[Sample]:
    """Bare selection problems with meaningless tokens, for baselines
    and accuracy-accounting tests that never encode content."""
    samples = []
    for i in range(n):
        n_agents = 1 + rng.randint(max_agents)
        agents = sorted(f"a{j}" for j in range(n_agents))
        responder = "resp"
        context = [(agents[rng.randint(n_agents)], [f"tok{rng.randint(50)}"])
                   for _ in range(3)]
        candidates = [[f"cand{i}_{j}"] for j in range(r_size)]
        samples.append(Sample(
            lang=lang,
            responder=responder,
            agents=agents,
            context=context,
            candidates=candidates,
            truth_addressee=agents[rng.randint(n_agents)],
            truth_index=rng.randint(r_size),
        ))
    return samples
