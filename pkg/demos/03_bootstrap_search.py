# %% [markdown]
# # Bootstrap search on a space small enough to enumerate
#
# Every valid 4-node cell is scored exactly, so the search result can be
# placed within the full score distribution.

# %%
import numpy as np

from gemnas.encoder import train_encoder
from gemnas.graph import DEFAULT_PALETTE, RandomDagSampler, enumerate_dags
from gemnas.metrics import pca_project
from gemnas.nn import TrainConfig
from gemnas.oracle import SyntheticOracle, efficiency_score
from gemnas.predictor import build_estimator, predict_many
from gemnas.search import bootstrap_optimize, exhaustive_oracle_search
from gemnas.wl_kernel import WlConfig

lam = 0.01
oracle = SyntheticOracle()
space = list(enumerate_dags(4, DEFAULT_PALETTE, valid_only=True))
scores = np.array([efficiency_score(oracle.evaluate(g), lam) for g in space])
print(len(space), "cells, best score", scores.max().round(4))

# %%
bundle, _ = train_encoder(2000, 4, 16, TrainConfig(iterations=3000, rng_seed=0), WlConfig(3, True),
                          hidden=(128, 128), include_ops=True)
sampler = RandomDagSampler(4, 0.5)
predictor = build_estimator(oracle, bundle, 100, TrainConfig(rng_seed=1), lam, sampler)
result = bootstrap_optimize(bundle, predictor, sampler, 5000, seed=2, oracle=oracle, lam=lam)
print("found", round(result.true_score, 4), "better than", f"{np.mean(scores < result.true_score):.1%}")

best, best_score = exhaustive_oracle_search(space, oracle, lam)
print("exhaustive optimum", round(best_score, 4), best.edges)

# %% [markdown]
# A 2-D projection of the embeddings, coloured by predicted score, is the
# usual way to eyeball the surface the search climbs.

# %%
z = bundle.embed_many(space)
proj = pca_project(z, k=2)
pred = predict_many(predictor, z)
print("explained share", proj.explained_share.round(3))
print("corr(pred, true)", np.corrcoef(pred, scores)[0, 1].round(3))
