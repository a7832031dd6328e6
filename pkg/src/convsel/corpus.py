"""Conversation corpus handling: JSONL parsing, sample construction
with ground-truth addressees and sampled distractors, splits and stats.

Corpus lines hold one conversation each:

    {"doc_id": str, "lang": str,
     "utterances": [{"t": int, "speaker": str, "text_tokens": [str, ...]}, ...]}

Sample lines hold one selection problem each:

    {"lang": str, "responder": str, "agents": [str, ...],
     "context": [[speaker, token, ...], ...],
     "candidates": [[token, ...], ...],
     "truth_addressee": str, "truth_index": int}

An utterance addresses agent X when its first token equals X (the IRC
"name: message" convention); that token, plus one following punctuation
token, is stripped during anonymization, and any other token equal to a
participant id is replaced by a placeholder so that names never leak
into contexts or candidates.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass

from .rng import RandomStream

MENTION_TOKEN = "<mention>"

_PUNCT = set(string.punctuation)


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid sample requests."""


@dataclass
class Utterance:
    t: int
    speaker: str
    tokens: list[str]
    addressee: str | None = None


@dataclass
class Conversation:
    doc_id: str
    lang: str
    utterances: list[Utterance]

    def speakers(self) -> set[str]:
        return {u.speaker for u in self.utterances}


@dataclass
class Sample:
    lang: str
    responder: str
    agents: list[str]                       # A(C), sorted, excludes responder
    context: list[tuple[str, list[str]]]    # (speaker, anonymized tokens)
    candidates: list[list[str]]
    truth_addressee: str
    truth_index: int


@dataclass
class SplitSpec:
    train: float = 0.9
    dev: float = 0.05
    test: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        fracs = (self.train, self.dev, self.test)
        if any(f <= 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise CorpusError(f"split fractions must be positive and sum to 1, got {fracs}")


def _field(obj: dict, name: str, kind, line_no: int):
    if name not in obj:
        raise CorpusError(f"line {line_no}: missing field {name!r}")
    value = obj[name]
    if not isinstance(value, kind):
        raise CorpusError(f"line {line_no}: field {name!r} has wrong type {type(value).__name__}")
    return value


def parse_corpus(path) -> list[Conversation]:
    """Parse a corpus JSONL file, validating every conversation."""
    convs: list[Conversation] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            doc_id = _field(obj, "doc_id", str, line_no)
            lang = _field(obj, "lang", str, line_no)
            raw_utts = _field(obj, "utterances", list, line_no)
            utts = []
            prev_t = -1
            for u in raw_utts:
                if not isinstance(u, dict):
                    raise CorpusError(f"line {line_no}: utterance entries must be objects")
                t = _field(u, "t", int, line_no)
                speaker = _field(u, "speaker", str, line_no)
                tokens = _field(u, "text_tokens", list, line_no)
                if not speaker:
                    raise CorpusError(f"line {line_no}: field 'speaker' is empty")
                if not tokens or not all(isinstance(tok, str) for tok in tokens):
                    raise CorpusError(
                        f"line {line_no}: field 'text_tokens' must be a non-empty list of strings")
                if t <= prev_t:
                    raise CorpusError(
                        f"line {line_no}: field 't' must be strictly increasing ({t} after {prev_t})")
                prev_t = t
                utts.append(Utterance(t=t, speaker=speaker, tokens=list(tokens)))
            if len({u.speaker for u in utts}) < 2:
                raise CorpusError(f"line {line_no}: conversation {doc_id!r} needs >= 2 speakers")
            convs.append(Conversation(doc_id=doc_id, lang=lang, utterances=utts))
    if not convs:
        raise CorpusError(f"{path}: empty corpus")
    return convs


def write_corpus(convs: list[Conversation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in convs:
            obj = {
                "doc_id": conv.doc_id,
                "lang": conv.lang,
                "utterances": [
                    {"t": u.t, "speaker": u.speaker, "text_tokens": u.tokens}
                    for u in conv.utterances
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def detect_addressee(utt: Utterance, agent_ids: set[str]) -> str | None:
    """First-token mention of another participant, if any."""
    first = utt.tokens[0] if utt.tokens else None
    if first is not None and first in agent_ids and first != utt.speaker:
        return first
    return None


def anonymize(tokens: list[str], agent_ids: set[str]) -> list[str]:
    """Strip a leading mention (and trailing punctuation token) and mask
    every other participant id."""
    toks = list(tokens)
    if toks and toks[0] in agent_ids:
        toks = toks[1:]
        if toks and all(ch in _PUNCT for ch in toks[0]):
            toks = toks[1:]
    return [MENTION_TOKEN if t in agent_ids else t for t in toks]


def build_distractor_pool(convs: list[Conversation]) -> list[list[str]]:
    """All anonymized, non-empty utterances of a language partition."""
    pool = []
    for conv in convs:
        ids = conv.speakers()
        for utt in conv.utterances:
            toks = anonymize(utt.tokens, ids)
            if toks:
                pool.append(toks)
    return pool


def extract_samples(conv: Conversation, r_size: int, context_len: int,
                    rng: RandomStream, pool: list[list[str]]) -> list[Sample]:
    """One sample per utterance that addresses a recent other speaker.

    The candidate set holds the anonymized utterance itself at a random
    position plus ``r_size - 1`` distractors drawn uniformly without
    replacement from ``pool`` (same-language utterances), never equal to
    the true response token-for-token.
    """
    if r_size not in (2, 10):
        raise CorpusError(f"candidate set size must be 2 or 10, got {r_size}")
    if context_len < 1:
        raise CorpusError(f"context length must be >= 1, got {context_len}")
    if len(pool) < r_size:
        raise CorpusError(
            f"distractor pool of {len(pool)} utterances too small for |R|={r_size}")

    agent_ids = conv.speakers()
    samples = []
    for idx, utt in enumerate(conv.utterances):
        if idx == 0:
            continue
        addressee = detect_addressee(utt, agent_ids)
        if addressee is None:
            continue
        ctx_utts = conv.utterances[max(0, idx - context_len):idx]
        ctx_speakers = {u.speaker for u in ctx_utts}
        if addressee not in ctx_speakers:
            continue
        truth = anonymize(utt.tokens, agent_ids)
        if not truth:
            continue
        agents = sorted(ctx_speakers - {utt.speaker})
        if not agents:
            continue

        distractors = _draw_distractors(pool, truth, r_size - 1, agent_ids, rng)
        truth_index = rng.randint(r_size)
        candidates = distractors[:truth_index] + [truth] + distractors[truth_index:]
        # a context utterance that was purely an address keeps a placeholder
        context = [(u.speaker, anonymize(u.tokens, agent_ids) or [MENTION_TOKEN])
                   for u in ctx_utts]
        samples.append(Sample(
            lang=conv.lang,
            responder=utt.speaker,
            agents=agents,
            context=context,
            candidates=candidates,
            truth_addressee=addressee,
            truth_index=truth_index,
        ))
    return samples


def extract_all_samples(convs: list[Conversation], r_size: int, context_len: int,
                        rng: RandomStream) -> dict[str, list[Sample]]:
    """Samples grouped by language, each language with its own
    distractor pool and per-conversation random streams."""
    by_lang: dict[str, list[Conversation]] = {}
    for conv in convs:
        by_lang.setdefault(conv.lang, []).append(conv)
    out: dict[str, list[Sample]] = {}
    for lang in sorted(by_lang):
        pool = build_distractor_pool(by_lang[lang])
        lang_samples: list[Sample] = []
        for conv in by_lang[lang]:
            conv_rng = rng.stream(f"extract/{lang}/{conv.doc_id}")
            lang_samples.extend(extract_samples(conv, r_size, context_len, conv_rng, pool))
        out[lang] = lang_samples
    return out


def _draw_distractors(pool, truth, count, agent_ids, rng) -> list[list[str]]:
    chosen: list[int] = []
    attempts = 0
    while len(chosen) < count:
        attempts += 1
        if attempts > 200 * (count + 1):
            raise CorpusError("distractor pool too small: cannot draw "
                              f"{count} utterances distinct from the response")
        i = rng.randint(len(pool))
        if i in chosen or pool[i] == truth:
            continue
        chosen.append(i)
    # mask any token that collides with this conversation's participants
    return [[MENTION_TOKEN if t in agent_ids else t for t in pool[i]] for i in chosen]


def split_dataset(samples: list[Sample], spec: SplitSpec):
    """Shuffled, disjoint, exhaustive (train, dev, test) partition."""
    spec.validate()
    n = len(samples)
    if n < 20:
        raise CorpusError(f"need at least 20 samples to split, got {n}")
    order = list(range(n))
    RandomStream(spec.seed, "split").shuffle(order)
    n_train = round(spec.train * n)
    n_dev = round(spec.dev * n)
    train = [samples[i] for i in order[:n_train]]
    dev = [samples[i] for i in order[n_train:n_train + n_dev]]
    test = [samples[i] for i in order[n_train + n_dev:]]
    return train, dev, test


def corpus_stats(convs: list[Conversation]) -> dict:
    """Doc/utterance/word counts plus per-utterance and per-doc means."""
    if not convs:
        raise CorpusError("no conversations to summarize")
    docs = len(convs)
    utters = sum(len(c.utterances) for c in convs)
    words = sum(len(u.tokens) for c in convs for u in c.utterances)
    agents = sum(len(c.speakers()) for c in convs)
    return {
        "docs": docs,
        "utterances": utters,
        "words": words,
        "words_per_utterance": words / utters,
        "agents_per_doc": agents / docs,
    }


def sample_to_dict(s: Sample) -> dict:
    return {
        "lang": s.lang,
        "responder": s.responder,
        "agents": s.agents,
        "context": [[speaker] + tokens for speaker, tokens in s.context],
        "candidates": s.candidates,
        "truth_addressee": s.truth_addressee,
        "truth_index": s.truth_index,
    }


def sample_from_dict(obj: dict) -> Sample:
    context = []
    for entry in obj["context"]:
        if not entry:
            raise CorpusError("context entries must start with a speaker id")
        context.append((entry[0], list(entry[1:])))
    return Sample(
        lang=obj["lang"],
        responder=obj["responder"],
        agents=list(obj["agents"]),
        context=context,
        candidates=[list(c) for c in obj["candidates"]],
        truth_addressee=obj["truth_addressee"],
        truth_index=int(obj["truth_index"]),
    )


def write_samples(samples: list[Sample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_dict(s), ensure_ascii=False, sort_keys=True) + "\n")


def read_samples(path) -> list[Sample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(sample_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"line {line_no}: bad sample record ({exc})") from exc
    if not out:
        raise CorpusError(f"{path}: no samples")
    return out
