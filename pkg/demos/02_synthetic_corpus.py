"""Generating a synthetic coreference corpus with planted ambiguity.

Each document hides a few latent events.  With probability `ambiguity`
two distinct events share the same trigger word, so the trigger alone
cannot tell them apart; their categorical features can.  A second pass
corrupts the observed feature values at configurable per-feature
accuracies, imitating an imperfect upstream predictor.
"""

from evcoref.corpus import (
    DEFAULT_TEST_ACCURACY,
    FeatureSchema,
    GenConfig,
    corrupt_features,
    generate_corpus,
    gold_clustering,
)

schema = FeatureSchema.default()
cfg = GenConfig(n_docs=3, tokens=(25, 35), mentions=(4, 6), clusters=(2, 3),
                ambiguity=1.0, seed=42)

docs = generate_corpus(cfg, schema, "train")
doc = docs[0]

print(f"document {doc.doc_id}: {len(doc.tokens)} tokens, {len(doc.mentions)} mentions")
print(" ".join(doc.tokens))
print()
for i, m in enumerate(doc.mentions):
    trigger = " ".join(doc.tokens[m.start : m.end + 1])
    feats = dict(zip(schema.names, m.features))
    print(f"mention {i}: '{trigger}' tokens [{m.start},{m.end}] cluster {m.gold_cluster} {feats}")
print()
print("gold clustering:", gold_clustering(doc))

shared = {}
for m in doc.mentions:
    shared.setdefault(tuple(doc.tokens[m.start : m.end + 1]), set()).add(m.gold_cluster)
for trigger, clusters in shared.items():
    if len(clusters) > 1:
        print(f"planted ambiguity: trigger {' '.join(trigger)!r} covers events {sorted(clusters)}")

print()
print("== observation noise (held-out accuracies) ==")
accuracies = [DEFAULT_TEST_ACCURACY[n] for n in schema.names]
observed, truth = corrupt_features(docs, schema, accuracies, seed=7)
flips = sum(
    o.features != t
    for od, td in zip(observed, truth)
    for o, t in zip(od.mentions, td)
)
total = sum(len(d.mentions) for d in docs)
print(f"{flips} of {total} mentions had at least one feature flipped")
for o, t in zip(observed[0].mentions, truth[0]):
    if o.features != t:
        print(f"  true {t} -> observed {o.features}")
