import time

from convsel.corpus import extract_all_samples
from convsel.rng import RandomStream
from convsel.synthetic import make_language
from convsel.training import LanguageData, TrainConfig, evaluate_model, train
from convsel.model import model_from_checkpoint
from convsel.checkpoint import Checkpoint

pack = make_language("en", seed=5, n_docs=8, utts_per_doc=12, n_agents=3,
                     n_topics=4, words_per_topic=10, dim=8)
samples = extract_all_samples(pack.convs, 2, 4, RandomStream(5, "x"))["en"][:50]
data = {"en": LanguageData(lang="en", table=pack.table, train=samples, dev=samples)}

for alpha, state in [(0.02, 12), (0.01, 12), (0.03, 8)]:
    cfg = TrainConfig(method="trgonly", target_langs=["en"], batch_size=32,
                      max_epochs=60, alpha_grid=[alpha], l2_grid=[0.0],
                      embed_dim=8, state_dim=state, seed=1)
    t0 = time.time()
    res = train(cfg, data)
    dt = time.time() - t0
    model = model_from_checkpoint(res.checkpoint, pack.table)
    r = evaluate_model(model, data, "dev")["en"]
    print(f"alpha={alpha} state={state}: best={res.checkpoint.meta['dev_adr_res']} "
          f"adr={r.adr:.0f} res={r.res:.0f} both={r.adr_res:.0f} "
          f"({dt:.0f}s, {dt/60*1000:.0f} ms/epoch)")
