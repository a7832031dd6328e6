"""Training strategies: supervised single-language training, fine
tuning, joint multi-language training, and multi-language adversarial
training with weight-clipped Wasserstein critics.

All strategies share one engine: per step, one batch per language is
drawn (smaller corpora cycle with per-cycle reshuffles, so every
language contributes a same-size batch), per-language cross-entropy
losses are computed with that language's frozen embedding table, and a
single Adam update is applied. The adversarial strategy additionally
maintains one critic per (source, target) language pair; each step runs
``n_critic`` clipped critic ascents on detached features before the
model update, which then carries the weighted critic terms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import Checkpoint
from .corpus import Sample
from .embeddings import EmbeddingTable
from .evaluation import LanguageResult, evaluate, macro_average
from .model import DynamicModel, ModelConfig, forward_sample, predict, replace_table
from .optim import Adam, clip_params
from .rng import RandomStream
from .tensor import Tensor, backward

_PROB_EPS = 1e-12

METHODS = ("trgonly", "enonly", "finetune", "joint", "wgan")


class TrainError(ValueError):
    pass


@dataclass
class TrainConfig:
    method: str
    source_langs: list[str] = field(default_factory=list)
    target_langs: list[str] = field(default_factory=list)
    batch_size: int = 32
    max_epochs: int = 30
    alpha_grid: list[float] = field(default_factory=lambda: [0.001, 0.0005, 0.0001])
    l2_grid: list[float] = field(default_factory=lambda: [0.001, 0.0005, 0.0001])
    lam: float = 0.5
    n_critic: int = 5
    clip: float = 0.01
    critic_hidden: int = 512
    critic_alpha: float | None = None
    embed_dim: int = 512
    state_dim: int = 256
    seed: int = 0

    def validate(self) -> None:
        if self.method not in METHODS:
            raise TrainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.lam < 0:
            raise TrainError(f"adversarial weight must be >= 0, got {self.lam}")
        if self.n_critic < 1:
            raise TrainError(f"critic iterations must be >= 1, got {self.n_critic}")
        if self.batch_size < 1:
            raise TrainError(f"batch size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise TrainError(f"max epochs must be >= 0, got {self.max_epochs}")
        if self.clip <= 0:
            raise TrainError(f"clip range must be positive, got {self.clip}")
        if not self.alpha_grid or not self.l2_grid:
            raise TrainError("alpha/l2 grids must be non-empty")
        overlap = set(self.source_langs) & set(self.target_langs)
        if overlap:
            raise TrainError(f"source and target language sets overlap: {sorted(overlap)}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(embed_dim=self.embed_dim, state_dim=self.state_dim)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "source_langs": list(self.source_langs),
            "target_langs": list(self.target_langs),
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "alpha_grid": list(self.alpha_grid),
            "l2_grid": list(self.l2_grid),
            "lam": self.lam,
            "n_critic": self.n_critic,
            "clip": self.clip,
            "critic_hidden": self.critic_hidden,
            "critic_alpha": self.critic_alpha,
            "embed_dim": self.embed_dim,
            "state_dim": self.state_dim,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        cfg = cls(method=d["method"])
        for key, value in d.items():
            if not hasattr(cfg, key):
                raise TrainError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        cfg.validate()
        return cfg


@dataclass
class LanguageData:
    lang: str
    table: EmbeddingTable
    train: list[Sample]
    dev: list[Sample]


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]     # one entry per (alpha, l2, epoch)


def ce_loss(model: DynamicModel, batch: list[Sample]) -> Tensor:
    """Mean over the batch of the summed binary cross-entropy over all
    addressee and response candidates."""
    loss, _ = batch_forward(model, batch)
    return loss


def batch_forward(model: DynamicModel, batch: list[Sample]) -> tuple[Tensor, list[Tensor]]:
    """Batch loss plus the per-sample feature vectors from the same
    forward pass (so adversarial terms share the tape)."""
    if not batch:
        raise TrainError("empty batch")
    per_sample = []
    features = []
    cache: dict = {}
    for sample in batch:
        scores = forward_sample(model, sample, cache)
        features.append(scores.features)
        terms = []
        for agent, p in zip(sample.agents, scores.addressee_probs):
            target = 1.0 if agent == sample.truth_addressee else 0.0
            terms.append(T.bce(T.clamp(p, _PROB_EPS, 1.0 - _PROB_EPS), target))
        for j, p in enumerate(scores.response_probs):
            target = 1.0 if j == sample.truth_index else 0.0
            terms.append(T.bce(T.clamp(p, _PROB_EPS, 1.0 - _PROB_EPS), target))
        total = terms[0]
        for term in terms[1:]:
            total = total + term
        per_sample.append(total)
    loss = per_sample[0]
    for term in per_sample[1:]:
        loss = loss + term
    return loss * (1.0 / len(batch)), features


def joint_ce_loss(model: DynamicModel, tables: dict[str, EmbeddingTable],
                  batches: dict[str, list[Sample]]) -> Tensor:
    """Sum of per-language batch losses, each under its own table."""
    total = None
    for lang in sorted(batches):
        loss = ce_loss(replace_table(model, tables[lang]), batches[lang])
        total = loss if total is None else total + loss
    if total is None:
        raise TrainError("joint loss over zero languages")
    return total


class Critic:
    """MLP critic: input -> hidden ReLU -> scalar, no output nonlinearity.

    Weights start inside the clip box so the 1-Lipschitz constraint
    holds from the first step.
    """

    def __init__(self, in_dim: int, hidden: int, clip: float, rng: RandomStream,
                 name: str = "critic"):
        def init(label, shape):
            data = rng.stream(f"init/{label}").uniform(-clip, clip, shape)
            return Tensor(data, requires_grad=True, name=f"{name}.{label}")

        self.w1 = init("w1", (in_dim, hidden))
        self.b1 = init("b1", (hidden,))
        self.w2 = init("w2", (hidden, 1))
        self.b2 = init("b2", (1,))

    def forward(self, feats: Tensor) -> Tensor:
        hidden = T.relu(T.affine(feats, self.w1, self.b1))
        return T.affine(hidden, self.w2, self.b2)

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]


def critic_objective(critic: Critic, h_source: Tensor, h_target: Tensor) -> Tensor:
    """Mean critic output on source features minus mean on target
    features; the quantity the critic ascends and the extractor descends."""
    return T.mean(critic.forward(h_source)) - T.mean(critic.forward(h_target))


def fit_critic(feats_source: np.ndarray, feats_target: np.ndarray, *,
               hidden: int, clip: float, steps: int, batch_size: int,
               alpha: float, seed: int, name: str = "probe") -> tuple[Critic, float]:
    """Train a fresh clipped critic to separate two fixed feature sets;
    returns the critic and its objective over the full sets.

    Used to probe the estimated distance between two feature
    distributions, e.g. before and after adversarial training.
    """
    dim = feats_source.shape[1]
    rng = RandomStream(seed, f"critic/{name}")
    critic = Critic(dim, hidden, clip, rng.stream("params"), name=name)
    opt = Adam(critic.parameters(), alpha=alpha)
    pick = rng.stream("batches")
    n_s, n_t = len(feats_source), len(feats_target)
    for _ in range(steps):
        bs = [pick.randint(n_s) for _ in range(min(batch_size, n_s))]
        bt = [pick.randint(n_t) for _ in range(min(batch_size, n_t))]
        obj = critic_objective(critic, Tensor(feats_source[bs]), Tensor(feats_target[bt]))
        grads = backward(T.neg(obj))
        opt.step(grads)
        clip_params(critic.parameters(), clip)
    final = critic_objective(critic, Tensor(feats_source), Tensor(feats_target)).item()
    return critic, final


def extract_feature_matrix(model: DynamicModel, samples: list[Sample]) -> np.ndarray:
    """Detached feature vectors for a sample set, one row per sample."""
    from .model import extract_features
    rows = []
    cache: dict = {}
    with T.no_grad():
        for s in samples:
            rows.append(extract_features(model, s, cache).data)
    return np.stack(rows)


class _Cycler:
    """Shuffled index stream over one language's training samples.

    The epoch-driving language consumes its list exactly once; smaller
    languages wrap around, reshuffling on every wrap.
    """

    def __init__(self, samples: list[Sample], lang: str, seed: int, epoch: int):
        self.samples = samples
        self.lang = lang
        self.seed = seed
        self.epoch = epoch
        self.cycle = 0
        self.ptr = 0
        self.order = self._shuffled()

    def _shuffled(self) -> list[int]:
        order = list(range(len(self.samples)))
        RandomStream(self.seed, f"shuffle/{self.lang}/{self.epoch}/{self.cycle}").shuffle(order)
        return order

    def take(self, k: int) -> list[Sample]:
        out: list[Sample] = []
        while len(out) < k:
            if self.ptr == len(self.order):
                self.cycle += 1
                self.order = self._shuffled()
                self.ptr = 0
            grab = min(k - len(out), len(self.order) - self.ptr)
            out.extend(self.samples[i] for i in self.order[self.ptr:self.ptr + grab])
            self.ptr += grab

        return out


def _epoch_batch_sizes(max_n: int, batch_size: int) -> list[int]:
    sizes = [batch_size] * (max_n // batch_size)
    if max_n % batch_size:
        sizes.append(max_n % batch_size)
    return sizes


def evaluate_model(model: DynamicModel, data: dict[str, LanguageData],
                   split: str = "dev") -> dict[str, LanguageResult]:
    """Per-language accuracies, each language scored under its own
    embedding table."""
    results = {}
    for lang in sorted(data):
        samples = getattr(data[lang], split)
        if not samples:
            raise TrainError(f"{split} set for language {lang!r} is empty")
        scoped = replace_table(model, data[lang].table)
        cache: dict = {}
        results[lang] = evaluate(lambda s: predict(scoped, s, cache), samples)
    return results


def _fit(config: TrainConfig, data: dict[str, LanguageData], langs: list[str],
         init_arrays: dict | None, alpha: float, l2: float,
         pairs: list[tuple[str, str]] | None):
    """One full training run at fixed hyperparameters.

    Returns (best_arrays, best_score, best_epoch, history). Model
    selection is dev ADR-RES, macro-averaged over ``langs``.
    """
    model = DynamicModel(config.model_config(), data[langs[0]].table, seed=config.seed)
    if init_arrays is not None:
        model.load_state(init_arrays)
    for lang in langs:
        if not data[lang].train:
            raise TrainError(f"training set for language {lang!r} is empty")
        if not data[lang].dev:
            raise TrainError(f"dev set for language {lang!r} is empty")

    opt = Adam(model.parameters(), alpha=alpha, weight_decay=l2)
    critics: dict[tuple[str, str], Critic] = {}
    critic_opts: dict[tuple[str, str], Adam] = {}
    if pairs:
        for s_lang, t_lang in pairs:
            rng = RandomStream(config.seed, f"critic/{s_lang}/{t_lang}")
            critic = Critic(2 * config.state_dim, config.critic_hidden, config.clip,
                            rng, name=f"critic[{s_lang}->{t_lang}]")
            critics[(s_lang, t_lang)] = critic
            critic_opts[(s_lang, t_lang)] = Adam(
                critic.parameters(), alpha=config.critic_alpha or alpha)

    if config.max_epochs == 0:
        score = macro_average(evaluate_model(model, {k: data[k] for k in langs}))["adr_res"]
        return model.state_arrays(), score, 0, []

    tables = {lang: data[lang].table for lang in langs}
    max_n = max(len(data[lang].train) for lang in langs)
    history = []
    best_arrays, best_score, best_epoch = None, -1.0, -1

    for epoch in range(1, config.max_epochs + 1):
        cyclers = {lang: _Cycler(data[lang].train, lang, config.seed, epoch)
                   for lang in langs}
        epoch_loss = 0.0
        sizes = _epoch_batch_sizes(max_n, config.batch_size)
        for step, size in enumerate(sizes):
            batches = {lang: cyclers[lang].take(size) for lang in langs}

            if pairs:
                feats = {lang: Tensor(extract_feature_matrix(
                    replace_table(model, tables[lang]), batches[lang]))
                    for lang in sorted({l for p in pairs for l in p})}
                for pair in pairs:
                    critic, copt = critics[pair], critic_opts[pair]
                    for _ in range(config.n_critic):
                        obj = critic_objective(critic, feats[pair[0]], feats[pair[1]])
                        copt.step(backward(T.neg(obj)))
                        clip_params(critic.parameters(), config.clip)

            total = None
            feat_rows: dict[str, list[Tensor]] = {}
            for lang in langs:
                loss_k, feats_k = batch_forward(replace_table(model, tables[lang]),
                                                batches[lang])
                feat_rows[lang] = feats_k
                total = loss_k if total is None else total + loss_k
            if pairs and config.lam != 0.0:
                for s_lang, t_lang in pairs:
                    w_term = critic_objective(critics[(s_lang, t_lang)],
                                              T.stack_rows(feat_rows[s_lang]),
                                              T.stack_rows(feat_rows[t_lang]))
                    total = total + config.lam * w_term

            loss_val = total.item()
            if not math.isfinite(loss_val):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch} step {step} (alpha={alpha}, l2={l2})")
            opt.step(backward(total))
            epoch_loss += loss_val

        dev = evaluate_model(model, {k: data[k] for k in langs})
        score = macro_average(dev)["adr_res"]
        history.append({
            "alpha": alpha, "l2": l2, "epoch": epoch,
            "train_loss": epoch_loss / len(sizes),
            "dev_adr_res": round(score, 4),
        })
        if score > best_score:
            best_arrays, best_score, best_epoch = model.state_arrays(), score, epoch

    return best_arrays, best_score, best_epoch, history


def _grid_fit(config: TrainConfig, data: dict[str, LanguageData], langs: list[str],
              init_arrays: dict | None,
              pairs: list[tuple[str, str]] | None = None) -> TrainResult:
    config.validate()
    for lang in langs:
        if lang not in data:
            raise TrainError(f"no data for language {lang!r}")
    history: list[dict] = []
    best = None
    for alpha, l2 in itertools.product(config.alpha_grid, config.l2_grid):
        arrays, score, epoch, runs = _fit(config, data, langs, init_arrays,
                                          alpha, l2, pairs)
        history.extend(runs)
        if best is None or score > best[1]:
            best = (arrays, score, epoch, alpha, l2)

    arrays, score, epoch, alpha, l2 = best
    ckpt = Checkpoint(
        arrays=arrays,
        config={"model": config.model_config().to_dict(), "train": config.to_dict()},
        meta={
            "method": config.method,
            "alpha": alpha,
            "l2": l2,
            "best_epoch": epoch,
            "dev_adr_res": round(score, 4),
            "train_langs": list(langs),
            "embedding_lang": langs[0] if len(langs) == 1 else "per-language",
            "replace_table_at_test": config.method == "enonly",
        },
    )
    return TrainResult(checkpoint=ckpt, history=history)


def train(config: TrainConfig, data: dict[str, LanguageData],
          init: Checkpoint | None = None) -> TrainResult:
    """Supervised training on a single language: the target language
    for ``trgonly``, the source language for ``enonly``."""
    if config.method not in ("trgonly", "enonly"):
        raise TrainError(f"train() handles trgonly/enonly, got {config.method!r}")
    if config.method == "trgonly":
        langs = list(config.target_langs)
    else:
        langs = list(config.source_langs)
    if len(langs) != 1:
        raise TrainError(f"{config.method} trains on exactly one language, got {langs}")
    init_arrays = init.arrays if init is not None else None
    return _grid_fit(config, data, langs, init_arrays)


def fine_tune(config: TrainConfig, data: dict[str, LanguageData],
              pretrained: Checkpoint) -> TrainResult:
    """Re-train a source-language checkpoint on the target language,
    under the target language's embedding table."""
    if len(config.target_langs) != 1:
        raise TrainError(f"fine_tune expects one target language, got {config.target_langs}")
    return _grid_fit(config, data, list(config.target_langs), pretrained.arrays)


def joint_train(config: TrainConfig, data: dict[str, LanguageData],
                init: Checkpoint) -> TrainResult:
    """One batch per language per step; the losses are summed and a
    single update applied."""
    langs = sorted(set(config.source_langs) | set(config.target_langs))
    if not langs:
        raise TrainError("joint training needs at least one language")
    return _grid_fit(config, data, langs, init.arrays)


def wgan_train(config: TrainConfig, data: dict[str, LanguageData],
               init: Checkpoint) -> TrainResult:
    """Joint training plus, per step and per (source, target) pair,
    ``n_critic`` clipped critic ascents followed by one model update on
    the joint loss with the weighted critic objectives added."""
    if not config.source_langs or not config.target_langs:
        raise TrainError("adversarial training needs non-empty source and target sets")
    langs = sorted(set(config.source_langs) | set(config.target_langs))
    pairs = [(s, t) for s in sorted(config.source_langs)
             for t in sorted(config.target_langs)]
    return _grid_fit(config, data, langs, init.arrays, pairs=pairs)
