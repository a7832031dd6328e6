"""Shared builders for desk-scale synthetic training setups."""

import numpy as np
import pytest

from convsel.corpus import extract_all_samples
from convsel.rng import RandomStream
from convsel.synthetic import make_language
from convsel.training import LanguageData, TrainConfig


def lang_data(lang, seed, n_docs=6, utts_per_doc=10, dim=8, r_size=2,
              context_len=4, n_train=None, n_dev=None, rotation=None,
              n_agents=3, address_prob=0.85):
    pack = make_language(lang, seed=seed, n_docs=n_docs, utts_per_doc=utts_per_doc,
                         n_agents=n_agents, dim=dim, rotation=rotation,
                         address_prob=address_prob)
    samples = extract_all_samples(pack.convs, r_size, context_len,
                                  RandomStream(seed, "samples"))[lang]
    n_train = n_train if n_train is not None else max(len(samples) - 10, 1)
    n_dev = n_dev if n_dev is not None else min(10, len(samples) - n_train)
    assert n_train + n_dev <= len(samples), "synthetic corpus too small"
    return LanguageData(lang=lang, table=pack.table,
                        train=samples[:n_train], dev=samples[n_train:n_train + n_dev])


def tiny_config(method, **overrides):
    base = dict(
        method=method, batch_size=16, max_epochs=2,
        alpha_grid=[0.01], l2_grid=[0.0],
        lam=0.5, n_critic=2, clip=0.01, critic_hidden=16,
        embed_dim=8, state_dim=8, seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture
def two_languages():
    src = lang_data("en", seed=11, n_docs=6, utts_per_doc=10)
    trg = lang_data("de", seed=12, n_docs=5, utts_per_doc=9)
    return {"en": src, "de": trg}
