"""Inside the pair scorer: trigger pairs, feature pairs, and the gate.

The gate decides, per coordinate, how much of a feature pair's new
(orthogonal) information to pass through versus how much to fall back
on what the trigger context already carries.
"""

import numpy as np

from evcoref.autodiff import Tape, concat, project_decompose
from evcoref.corpus import Document, FeatureSchema, Mention
from evcoref.encoder import embed_features, encode_tokens, trigger_repr
from evcoref.model import CorefModel, Dims
from evcoref.pair_model import (
    assemble_pair,
    cdgm,
    feature_pair,
    ffnn_apply,
    score_pair,
    trigger_pair,
)

schema = FeatureSchema((("Type", 4), ("Modality", 2)))
doc = Document(
    "demo",
    ["the", "troops", "leave", "as", "they", "head", "out", "today"],
    [
        Mention(2, 2, (1, 2), gold_cluster=0),
        Mention(5, 6, (1, 1), gold_cluster=0),
    ],
)
model = CorefModel(schema, ["<unk>"] + sorted(set(doc.tokens)), "cdgm",
                   Dims(d=12, l=6, p=8, w=2), seed=3)

tape = Tape()
x = encode_tokens(doc, model.encoder, tape)
t0 = trigger_repr(x, doc.mentions[0])
t1 = trigger_repr(x, doc.mentions[1])
t01 = trigger_pair(t1, t0, model.pair)
print("trigger-pair vector t_ij:", np.round(t01.value, 3))

h0 = embed_features(doc.mentions[0], model.embedders, tape)
h1 = embed_features(doc.mentions[1], model.embedders, tape)
for u, name in enumerate(schema.names):
    h01 = feature_pair(h1[u], h0[u], model.pair, u)
    gate = ffnn_apply(model.pair.ffnn_g[u], concat([t01, h01]))
    par, orth = project_decompose(t01, h01)
    fused = cdgm(t01, h01, model.pair, u)
    print(f"\nfeature {name}:")
    print("  pair vector h_ij:", np.round(h01.value, 3))
    print("  gate (0=trust context, 1=trust feature):", np.round(gate.value, 3))
    print("  parallel part:  ", np.round(par.value, 3))
    print("  orthogonal part:", np.round(orth.value, 3))
    print("  fused output:   ", np.round(fused.value, 3))

parts = [
    cdgm(t01, feature_pair(h1[u], h0[u], model.pair, u), model.pair, u)
    for u in range(schema.k)
]
f01 = assemble_pair(t01, parts, "cdgm")
score = score_pair(f01, model.pair)
print(f"\nfinal pair representation width: {f01.value.shape[0]}")
print(f"coreference score s(1, 0) at random init: {float(score.value):+.4f}")
print("(the dummy antecedent is pinned at 0, so positive means 'link')")
