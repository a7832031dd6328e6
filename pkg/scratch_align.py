import time

import numpy as np

from convsel.checkpoint import Checkpoint
from convsel.corpus import extract_all_samples
from convsel.model import model_from_checkpoint, replace_table
from convsel.rng import RandomStream
from convsel.synthetic import make_language, random_rotation
from convsel.training import (
    LanguageData, TrainConfig, extract_feature_matrix, fine_tune, fit_critic,
    train, wgan_train,
)

DIM, STATE = 10, 8


def build_data(seed):
    rot = random_rotation(DIM, RandomStream(seed, "rot"))
    en = make_language("en", seed=seed, n_docs=30, utts_per_doc=14, dim=DIM)
    de = make_language("de", seed=seed + 100, n_docs=10, utts_per_doc=12, dim=DIM,
                       rotation=rot)
    en_s = extract_all_samples(en.convs, 2, 4, RandomStream(seed, "s"))["en"]
    de_s = extract_all_samples(de.convs, 2, 4, RandomStream(seed, "t"))["de"]
    return {
        "en": LanguageData("en", en.table, en_s[:280], en_s[280:320]),
        "de": LanguageData("de", de.table, de_s[:80], de_s[80:100]),
    }


def probe(ckpt, data, seed):
    model = model_from_checkpoint(ckpt, data["en"].table)
    fs = extract_feature_matrix(replace_table(model, data["en"].table), data["en"].train[:80])
    ft = extract_feature_matrix(replace_table(model, data["de"].table), data["de"].train[:80])
    _, obj = fit_critic(fs, ft, hidden=64, clip=0.01, steps=250, batch_size=32,
                        alpha=0.005, seed=seed, name="probe")
    return obj


wins = 0
t0 = time.time()
for seed in range(5):
    data = build_data(seed)
    pre_cfg = TrainConfig(method="enonly", source_langs=["en"], batch_size=16,
                          max_epochs=3, alpha_grid=[0.01], l2_grid=[0.0],
                          embed_dim=DIM, state_dim=STATE, seed=seed)
    pre = train(pre_cfg, data)
    ft_cfg = TrainConfig(method="finetune", source_langs=["en"], target_langs=["de"],
                         batch_size=16, max_epochs=3, alpha_grid=[0.01], l2_grid=[0.0],
                         embed_dim=DIM, state_dim=STATE, seed=seed)
    ft = fine_tune(ft_cfg, data, pre.checkpoint)

    d_init = probe(ft.checkpoint, data, seed)

    wgan_cfg = TrainConfig(method="wgan", source_langs=["en"], target_langs=["de"],
                           batch_size=16, max_epochs=3, alpha_grid=[0.005], l2_grid=[0.0],
                           lam=0.5, n_critic=5, clip=0.01, critic_hidden=64,
                           embed_dim=DIM, state_dim=STATE, seed=seed)
    wg = wgan_train(wgan_cfg, data, ft.checkpoint)
    d_after = probe(wg.checkpoint, data, seed)
    win = d_after < d_init
    wins += win
    print(f"seed={seed} d_init={d_init:.4f} d_after={d_after:.4f} win={win} "
          f"({time.time()-t0:.0f}s)")
print(f"wins {wins}/5, total {time.time()-t0:.0f}s")
