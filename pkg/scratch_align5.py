import time

from convsel.corpus import extract_all_samples
from convsel.model import model_from_checkpoint, replace_table
from convsel.rng import RandomStream
from convsel.synthetic import make_language, random_rotation
from convsel.training import (
    LanguageData, TrainConfig, extract_feature_matrix, fine_tune, fit_critic,
    joint_train, train, wgan_train,
)

DIM, STATE = 10, 8


def build_data(seed):
    rot = random_rotation(DIM, RandomStream(seed, "rot"))
    en = make_language("en", seed=seed, n_docs=30, utts_per_doc=14, dim=DIM)
    de = make_language("de", seed=seed + 100, n_docs=12, utts_per_doc=12, dim=DIM,
                       rotation=rot)
    en_s = extract_all_samples(en.convs, 2, 4, RandomStream(seed, "s"))["en"]
    de_s = extract_all_samples(de.convs, 2, 4, RandomStream(seed, "t"))["de"]
    return {
        "en": LanguageData("en", en.table, en_s[:160], en_s[280:320]),
        "de": LanguageData("de", de.table, de_s[:90], de_s[90:110]),
    }


def probe(ckpt, data, seed):
    model = model_from_checkpoint(ckpt, data["en"].table)
    fs = extract_feature_matrix(replace_table(model, data["en"].table), data["en"].train[:120])
    ft = extract_feature_matrix(replace_table(model, data["de"].table), data["de"].train[:90])
    _, obj = fit_critic(fs, ft, hidden=64, clip=0.05, steps=300, batch_size=32,
                        alpha=0.01, seed=seed, name="probe")
    return obj


t0 = time.time()
for clip, lam, alpha, epochs, calpha in [(0.1, 1.0, 0.002, 10, 0.03)]:
    wins = 0
    rows = []
    for seed in range(5):
        data = build_data(seed)
        pre = train(TrainConfig(method="enonly", source_langs=["en"], batch_size=16,
                                max_epochs=4, alpha_grid=[0.01], l2_grid=[0.0],
                                embed_dim=DIM, state_dim=STATE, seed=seed), data)
        ft = fine_tune(TrainConfig(method="finetune", source_langs=["en"],
                                   target_langs=["de"],
                                   batch_size=16, max_epochs=6, alpha_grid=[0.01],
                                   l2_grid=[0.0],
                                   embed_dim=DIM, state_dim=STATE, seed=seed),
                       data, pre.checkpoint)
        d_init = probe(ft.checkpoint, data, seed)
        wg = wgan_train(TrainConfig(method="wgan", source_langs=["en"], target_langs=["de"],
                                    batch_size=16, max_epochs=epochs, alpha_grid=[alpha],
                                    l2_grid=[0.0], lam=lam, n_critic=5, clip=clip,
                                    critic_hidden=64, critic_alpha=calpha,
                                    embed_dim=DIM, state_dim=STATE, seed=seed),
                        data, ft.checkpoint)
        d_wgan = probe(wg.checkpoint, data, seed)
        wins += d_wgan < d_init
        rows.append(f"  seed={seed} init={d_init:.4f} wgan={d_wgan:.4f}")
    print(f"clip={clip} lam={lam} alpha={alpha} ep={epochs}: wins {wins}/5 ({time.time()-t0:.0f}s)")
    print("\n".join(rows))
