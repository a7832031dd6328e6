import time

from convsel.corpus import extract_all_samples
from convsel.rng import RandomStream
from convsel.synthetic import make_language
from convsel.training import LanguageData, TrainConfig, fine_tune, train

DIM, STATE = 10, 8

t0 = time.time()
en = make_language("en", seed=500, n_docs=160, utts_per_doc=80, dim=DIM, n_topics=6, noise=0.45)
de = make_language("de", seed=501, n_docs=12, utts_per_doc=60, dim=DIM, n_topics=6, noise=0.45)
en_s = extract_all_samples(en.convs, 2, 4, RandomStream(500, "s"))["en"]
de_s = extract_all_samples(de.convs, 2, 4, RandomStream(501, "t"))["de"]
print(f"en={len(en_s)} de={len(de_s)} gen {time.time()-t0:.0f}s")
data = {
    "en": LanguageData("en", en.table, en_s[:10000], en_s[10000:10200]),
    "de": LanguageData("de", de.table, de_s[:500], de_s[500:])  ,
}

ft_scores, tr_scores = [], []
for seed in range(5):
    t1 = time.time()
    pre = train(TrainConfig(method="enonly", source_langs=["en"], batch_size=32,
                            max_epochs=1, alpha_grid=[0.01], l2_grid=[0.0],
                            embed_dim=DIM, state_dim=STATE, seed=seed), data)
    t2 = time.time()
    ft = fine_tune(TrainConfig(method="finetune", source_langs=["en"], target_langs=["de"],
                               batch_size=32, max_epochs=5, alpha_grid=[0.01], l2_grid=[0.0],
                               embed_dim=DIM, state_dim=STATE, seed=seed),
                   data, pre.checkpoint)
    tr = train(TrainConfig(method="trgonly", target_langs=["de"], batch_size=32,
                           max_epochs=5, alpha_grid=[0.01], l2_grid=[0.0],
                           embed_dim=DIM, state_dim=STATE, seed=seed), data)
    ft_scores.append(ft.checkpoint.meta["dev_adr_res"])
    tr_scores.append(tr.checkpoint.meta["dev_adr_res"])
    print(f"seed={seed} pretrain={t2-t1:.0f}s ft={ft_scores[-1]} trg={tr_scores[-1]} "
          f"({time.time()-t0:.0f}s)")

ft_med = sorted(ft_scores)[2]
tr_med = sorted(tr_scores)[2]
print(f"median finetune={ft_med} trgonly={tr_med} pass={ft_med >= tr_med}")
