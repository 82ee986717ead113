# %% [markdown]
# # Kernel-guided encoder vs plain autoencoder
#
# Both encoders share architecture and budget. The kernel-guided one also
# fits cosine similarity of embeddings to WL similarity.

# %%
import numpy as np

from gemnas.encoder import PairGraphSampler, cosine_similarity, train_encoder
from gemnas.nn import TrainConfig
from gemnas.wl_kernel import WlConfig, wl_similarity

n, d = 7, 16
cfg = TrainConfig(iterations=3000, rng_seed=0)
kernel, history = train_encoder(2000, n, d, cfg, WlConfig(), hidden=(128, 128))
plain, _ = train_encoder(2000, n, d, cfg, WlConfig(), hidden=(128, 128), similarity_weight=0.0)

for row in history[::5]:
    print(row)

# %%
rng = np.random.default_rng(1)
sampler = PairGraphSampler(n)
pairs = [(sampler.sample(rng), sampler.sample(rng)) for _ in range(500)]
target = np.array([wl_similarity(a, b) for a, b in pairs])

for name, bundle in (("kernel", kernel), ("autoencoder", plain)):
    za = bundle.embed_many([a for a, _ in pairs])
    zb = bundle.embed_many([b for _, b in pairs])
    cos = np.array([cosine_similarity(x, y) for x, y in zip(za, zb)])
    print(name, "corr(cos, WL) =", round(float(np.corrcoef(cos, target)[0, 1]), 3))
