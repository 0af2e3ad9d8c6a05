"""Train the gated model on a small synthetic corpus and score it.

Training features are nearly clean while test features are noisy, so
the run also injects feature noise per batch; the dev split picks the
checkpoint by AVG score.
"""

from evcoref.corpus import FeatureSchema, GenConfig, gold_clustering
from evcoref.encoder import build_vocab
from evcoref.experiment import make_corpora
from evcoref.inference import predict_corpus
from evcoref.metrics import corpus_report, format_report
from evcoref.model import CorefModel, Dims
from evcoref.training import NoiseConfig, TrainConfig, train

schema = FeatureSchema.default()
corpora = make_corpora(GenConfig(), schema, {"train": 60, "dev": 12, "test": 24}, seed=5)
train_docs = corpora["train"][1]
dev_docs = corpora["dev"][1]
test_docs = corpora["test"][1]

model = CorefModel(schema, build_vocab(train_docs + dev_docs), "cdgm", Dims(), seed=5)
history = train(
    model,
    train_docs,
    TrainConfig(epochs=10, seed=5, noise=True),
    noise=NoiseConfig.for_schema(schema),
    dev_docs=dev_docs,
)

print("epoch loss:", [round(x, 3) for x in history.epoch_loss])
print("dev AVG:   ", [round(x, 3) for x in history.dev_avg])
print(f"best checkpoint: epoch {history.best_epoch}")
print()

keys = {doc.doc_id: gold_clustering(doc) for doc in test_docs}
report = corpus_report(keys, predict_corpus(model, test_docs))
print("test-set scores:")
print(format_report(report))

doc = test_docs[0]
predicted = predict_corpus(model, [doc])[doc.doc_id]
print()
print(f"example document {doc.doc_id}:")
print("  gold:     ", gold_clustering(doc))
print("  predicted:", predicted)
