import time

from convsel.corpus import extract_all_samples
from convsel.rng import RandomStream
from convsel.synthetic import make_language
from convsel.training import LanguageData, TrainConfig, train

t0 = time.time()
pack = make_language("en", seed=5, n_docs=8, utts_per_doc=12, n_agents=3,
                     n_topics=4, words_per_topic=10, dim=8)
samples = extract_all_samples(pack.convs, 2, 4, RandomStream(5, "x"))["en"]
print("samples:", len(samples), "gen time", time.time() - t0)
samples = samples[:50]

data = {"en": LanguageData(lang="en", table=pack.table, train=samples, dev=samples)}
cfg = TrainConfig(method="trgonly", target_langs=["en"], batch_size=32,
                  max_epochs=30, alpha_grid=[0.01], l2_grid=[0.0],
                  embed_dim=8, state_dim=8, seed=1)
t0 = time.time()
res = train(cfg, data)
dt = time.time() - t0
print(f"30 epochs in {dt:.1f}s ({dt/30*1000:.0f} ms/epoch)")
for h in res.history[::3]:
    print(h)
print("best:", res.checkpoint.meta)
