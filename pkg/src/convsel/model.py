"""The dynamic conversation model.

Every participant is represented by a hidden state that evolves over
the context: at each time step the current speaker's state is updated
by an agent-level GRU fed with the encoded utterance, while everyone
else receives the same GRU update fed with a zero vector. Utterances
(and candidate responses, which share the encoder) are encoded by a
word-level GRU over frozen embeddings; a third GRU over the utterance
encodings summarizes the context into a single vector.

Scoring is bilinear through a sigmoid: an addressee candidate's state
or an encoded response is matched against the concatenation of the
responder's state and the context summary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import tensor as T
from .corpus import Sample
from .embeddings import EmbeddingTable, lookup
from .rng import RandomStream
from .tensor import Tensor

_GATE_PARTS = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")


@dataclass
class ModelConfig:
    embed_dim: int = 512
    state_dim: int = 256

    def to_dict(self) -> dict:
        return {"embed_dim": self.embed_dim, "state_dim": self.state_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(embed_dim=int(d["embed_dim"]), state_dim=int(d["state_dim"]))


class GRUParams:
    """Weights for one GRU: three gates, each with input, recurrent and
    bias parameters oriented (in, out)."""

    def __init__(self, prefix: str, in_dim: int, state_dim: int, rng: RandomStream,
                 init_scale: float = 0.08):
        self.in_dim = in_dim
        self.state_dim = state_dim
        shapes = {
            "wz": (in_dim, state_dim), "uz": (state_dim, state_dim), "bz": (state_dim,),
            "wr": (in_dim, state_dim), "ur": (state_dim, state_dim), "br": (state_dim,),
            "wh": (in_dim, state_dim), "uh": (state_dim, state_dim), "bh": (state_dim,),
        }
        for part in _GATE_PARTS:
            name = f"{prefix}.{part}"
            data = rng.stream(f"init/{name}").uniform(-init_scale, init_scale, shapes[part])
            setattr(self, part, Tensor(data, requires_grad=True, name=name))

    def tensors(self) -> list[Tensor]:
        return [getattr(self, part) for part in _GATE_PARTS]


def gru_step(p: GRUParams, x: Tensor, h: Tensor) -> Tensor:
    """z = sig(xWz + hUz + bz); r = sig(xWr + hUr + br);
    hc = tanh(xWh + (r*h)Uh + bh); h' = z*h + (1-z)*hc.

    Fused into one tape node: the recurrence dominates the training
    profile, so its backward is hand-derived rather than composed from
    elementwise ops.
    """
    xd, hd = x.data, h.data
    z = expit(xd @ p.wz.data + hd @ p.uz.data + p.bz.data)
    r = expit(xd @ p.wr.data + hd @ p.ur.data + p.br.data)
    rh = r * hd
    hc = np.tanh(xd @ p.wh.data + rh @ p.uh.data + p.bh.data)
    out = z * hd + (1.0 - z) * hc

    parents = (x, h, p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wh, p.uh, p.bh)

    def back(g):
        da_c = (g * (1.0 - z)) * (1.0 - hc * hc)
        d_rh = p.uh.data @ da_c
        da_r = (d_rh * hd) * (r * (1.0 - r))
        da_z = (g * (hd - hc)) * (z * (1.0 - z))
        gx = gh = None
        if x.requires_grad:
            gx = p.wz.data @ da_z + p.wr.data @ da_r + p.wh.data @ da_c
        if h.requires_grad:
            gh = (g * z + d_rh * r
                  + p.uz.data @ da_z + p.ur.data @ da_r)
        xcol = xd[:, None]
        hcol = hd[:, None]
        return (
            gx, gh,
            xcol * da_z, hcol * da_z, da_z,
            xcol * da_r, hcol * da_r, da_r,
            xcol * da_c, rh[:, None] * da_c, da_c,
        )

    return Tensor._from_op(out, parents, back)


class DynamicModel:
    """Model parameters plus the (frozen, swappable) embedding table."""

    def __init__(self, config: ModelConfig, table: EmbeddingTable, seed: int | None = None,
                 _params: dict[str, Tensor] | None = None):
        if table.dim != config.embed_dim:
            raise ValueError(
                f"embedding table dimension {table.dim} != model embed_dim {config.embed_dim}")
        self.config = config
        self.table = table
        d, s = config.embed_dim, config.state_dim
        if _params is None:
            if seed is None:
                raise ValueError("need a seed to initialize a fresh model")
            rng = RandomStream(seed, "model")
            self.utt_gru = GRUParams("utt", d, s, rng)
            self.agent_gru = GRUParams("agent", s, s, rng)
            self.ctx_gru = GRUParams("ctx", s, s, rng)
            self.w_a = Tensor(rng.stream("init/w_a").uniform(-0.08, 0.08, (2 * s, s)),
                              requires_grad=True, name="w_a")
            self.w_r = Tensor(rng.stream("init/w_r").uniform(-0.08, 0.08, (2 * s, s)),
                              requires_grad=True, name="w_r")
        else:
            self.utt_gru = GRUParams.__new__(GRUParams)
            self.agent_gru = GRUParams.__new__(GRUParams)
            self.ctx_gru = GRUParams.__new__(GRUParams)
            for gru, prefix in ((self.utt_gru, "utt"), (self.agent_gru, "agent"),
                                (self.ctx_gru, "ctx")):
                gru.in_dim = d if prefix == "utt" else s
                gru.state_dim = s
                for part in _GATE_PARTS:
                    setattr(gru, part, _params[f"{prefix}.{part}"])
            self.w_a = _params["w_a"]
            self.w_r = _params["w_r"]

    def parameters(self) -> list[Tensor]:
        return (self.utt_gru.tensors() + self.agent_gru.tensors()
                + self.ctx_gru.tensors() + [self.w_a, self.w_r])

    def param_dict(self) -> dict[str, Tensor]:
        return {p.name: p for p in self.parameters()}

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.param_dict()
        missing = set(params) - set(arrays)
        if missing:
            raise ValueError(f"checkpoint missing parameters: {sorted(missing)}")
        for name, p in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"parameter {name}: shape {arr.shape} != expected {p.data.shape}")
            p.data = arr.copy()

    def clone(self) -> "DynamicModel":
        fresh = {name: Tensor(p.data.copy(), requires_grad=True, name=name)
                 for name, p in self.param_dict().items()}
        return DynamicModel(self.config, self.table, _params=fresh)


def model_from_checkpoint(ckpt, table: EmbeddingTable) -> DynamicModel:
    """Rebuild a model from a checkpoint's config echo and arrays."""
    config = ModelConfig.from_dict(ckpt.config["model"])
    model = DynamicModel(config, table, seed=0)
    model.load_state(ckpt.arrays)
    return model


def replace_table(model: DynamicModel, new_table: EmbeddingTable) -> DynamicModel:
    """Swap the embedding table; every other parameter is shared untouched."""
    if new_table.dim != model.config.embed_dim:
        raise ValueError(
            f"table dimension {new_table.dim} does not match model embed_dim "
            f"{model.config.embed_dim}")
    return DynamicModel(model.config, new_table, _params=model.param_dict())


def encode_utterance(model: DynamicModel, tokens: list[str],
                     cache: dict | None = None) -> Tensor:
    """Final state of the word-level GRU, run left to right from zero.

    ``cache`` memoizes encodings of repeated utterances within one tape
    (context windows overlap heavily); the shared node backpropagates
    identically to separate copies.
    """
    if not tokens:
        raise ValueError("cannot encode an empty utterance")
    key = tuple(tokens) if cache is not None else None
    if key is not None and key in cache:
        return cache[key]
    vecs = lookup(model.table, tokens)
    h = Tensor(np.zeros(model.config.state_dim))
    for i in range(vecs.shape[0]):
        h = gru_step(model.utt_gru, Tensor(vecs[i]), h)
    if key is not None:
        cache[key] = h
    return h


def track_agents(model: DynamicModel, context: list[tuple[str, list[str]]],
                 agent_ids: list[str],
                 cache: dict | None = None) -> tuple[dict[str, Tensor], Tensor]:
    """Run the per-agent state updates over the context.

    Returns the final state of every tracked agent and the context
    summary h_c. Agents who never speak share the zero-input update
    chain, which is mathematically identical to updating each of them
    separately.
    """
    if not context:
        raise ValueError("context must be non-empty")
    s = model.config.state_dim
    zero_in = Tensor(np.zeros(s))
    encodings = [encode_utterance(model, tokens, cache) for _, tokens in context]

    silent = Tensor(np.zeros(s))          # state after t zero-input updates
    spoken: dict[str, Tensor] = {}
    tracked = set(agent_ids)
    for t, (speaker, _) in enumerate(context):
        for agent in list(spoken):
            x = encodings[t] if agent == speaker else zero_in
            spoken[agent] = gru_step(model.agent_gru, x, spoken[agent])
        if speaker in tracked and speaker not in spoken:
            spoken[speaker] = gru_step(model.agent_gru, encodings[t], silent)
        silent = gru_step(model.agent_gru, zero_in, silent)

    states = {a: spoken.get(a, silent) for a in agent_ids}

    h_c = Tensor(np.zeros(s))
    for enc in encodings:
        h_c = gru_step(model.ctx_gru, enc, h_c)
    return states, h_c


def extract_features(model: DynamicModel, sample: Sample,
                     cache: dict | None = None) -> Tensor:
    """Concatenation of the responder's final state and the context
    summary; the input every scoring function and critic consumes."""
    states, h_c = track_agents(model, sample.context,
                               sorted(set(sample.agents) | {sample.responder}), cache)
    return T.concat([states[sample.responder], h_c])


def score_addressee(model: DynamicModel, features: Tensor, agent_state: Tensor) -> Tensor:
    return T.sigmoid(T.matmul(T.matmul(features, model.w_a), agent_state))


def score_response(model: DynamicModel, features: Tensor, response_enc: Tensor) -> Tensor:
    return T.sigmoid(T.matmul(T.matmul(features, model.w_r), response_enc))


@dataclass
class SampleScores:
    features: Tensor
    addressee_probs: list[Tensor]   # aligned with sample.agents (sorted)
    response_probs: list[Tensor]    # aligned with sample.candidates


def forward_sample(model: DynamicModel, sample: Sample,
                   cache: dict | None = None) -> SampleScores:
    """Score every addressee candidate and every response candidate."""
    if not sample.agents:
        raise ValueError("sample has no addressee candidates")
    tracked = sorted(set(sample.agents) | {sample.responder})
    states, h_c = track_agents(model, sample.context, tracked, cache)
    features = T.concat([states[sample.responder], h_c])

    fa = T.matmul(features, model.w_a)
    fr = T.matmul(features, model.w_r)
    addressee_probs = [T.sigmoid(T.matmul(fa, states[a])) for a in sample.agents]
    response_probs = [T.sigmoid(T.matmul(fr, encode_utterance(model, cand, cache)))
                      for cand in sample.candidates]
    return SampleScores(features, addressee_probs, response_probs)


def predict(model: DynamicModel, sample: Sample,
            cache: dict | None = None) -> tuple[str, int]:
    """Argmax addressee and response; ties break toward the
    lexicographically first agent and the lowest candidate index.

    ``cache`` may share utterance encodings across calls, but only
    while the parameters and embedding table stay fixed.
    """
    with T.no_grad():
        scores = forward_sample(model, sample, cache)
        a_vals = [p.item() for p in scores.addressee_probs]
        r_vals = [p.item() for p in scores.response_probs]
    best_a = max(range(len(a_vals)), key=lambda i: (a_vals[i], -i))
    best_r = max(range(len(r_vals)), key=lambda j: (r_vals[j], -j))
    return sample.agents[best_a], best_r
