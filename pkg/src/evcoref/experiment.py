"""Seeded ablation grid over model variants on shared synthetic corpora.

Each repetition seed fixes one train/dev/test corpus triple; every
variant trains on exactly those documents, so score differences isolate
the modeling change.  The five standard variants are the trigger-only
baseline, plain feature concatenation with and without noisy training,
and the gated module with and without noisy training.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .corpus import FeatureSchema, GenConfig, corrupt_features, generate_corpus, gold_clustering
from .encoder import build_vocab
from .inference import predict_corpus
from .metrics import corpus_report
from .model import CorefModel, Dims
from .training import DEFAULT_NOISE_EPS, NoiseConfig, TrainConfig, train

# variant name -> (pair-model mode, noisy training)
VARIANTS = {
    "baseline": ("baseline", False),
    "simple": ("simple", False),
    "simple+noise": ("simple", True),
    "cdgm": ("cdgm", False),
    "cdgm+noise": ("cdgm", True),
}

DEFAULT_DOC_COUNTS = {"train": 100, "dev": 16, "test": 40}


def make_corpora(gen, schema, counts, seed):
    """Generate one observed corpus per split; dev uses test accuracies."""
    out = {}
    for split, count in counts.items():
        cfg = replace(gen, seed=seed, n_docs=count)
        true_docs = generate_corpus(cfg, schema, split)
        acc = cfg.accuracies_for(split, schema)
        observed, _ = corrupt_features(true_docs, schema, acc, seed=(seed, 977, len(split)))
        out[split] = (true_docs, observed)
    return out


@dataclass(frozen=True)
class ExperimentSpec:
    schema: FeatureSchema
    gen: GenConfig
    dims: Dims = Dims()
    train: TrainConfig = TrainConfig()
    noise_table: dict = field(default_factory=lambda: dict(DEFAULT_NOISE_EPS))
    variants: tuple[str, ...] = tuple(VARIANTS)
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    doc_counts: dict = field(default_factory=lambda: dict(DEFAULT_DOC_COUNTS))

    def validate(self):
        if not self.variants:
            raise ValueError("need at least one variant")
        if not self.seeds:
            raise ValueError("need at least one seed")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}; known: {sorted(VARIANTS)}")


def run_variant(spec, corpora, variant, seed):
    """Train one variant on prebuilt corpora and score the test split."""
    mode, use_noise = VARIANTS[variant]
    train_obs = corpora["train"][1]
    dev_obs = corpora["dev"][1]
    test_obs = corpora["test"][1]
    vocab = build_vocab(train_obs + dev_obs)
    model = CorefModel(spec.schema, vocab, mode, spec.dims, seed=seed)
    noise = NoiseConfig.for_schema(spec.schema, spec.noise_table) if use_noise else None
    tcfg = replace(spec.train, seed=seed, noise=use_noise)
    history = train(model, train_obs, tcfg, noise=noise, dev_docs=dev_obs)
    keys = {doc.doc_id: gold_clustering(doc) for doc in test_obs}
    report = corpus_report(keys, predict_corpus(model, test_obs))
    return {
        "variant": variant,
        "seed": seed,
        "conll": report.conll,
        "avg": report.avg,
        "dev_best": max(history.dev_avg) if history.dev_avg else None,
        "report": report.to_dict(),
    }


def run_experiment(spec):
    """Full grid: every variant on every seed's shared corpora."""
    spec.validate()
    runs = []
    for seed in spec.seeds:
        corpora = make_corpora(spec.gen, spec.schema, spec.doc_counts, seed)
        for variant in spec.variants:
            runs.append(run_variant(spec, corpora, variant, seed))
    summary = {}
    for variant in spec.variants:
        rows = [r for r in runs if r["variant"] == variant]
        summary[variant] = {
            "conll": sum(r["conll"] for r in rows) / len(rows),
            "avg": sum(r["avg"] for r in rows) / len(rows),
        }
    return {"runs": runs, "summary": summary, "seeds": list(spec.seeds)}


def format_experiment_table(result):
    """Mean CoNLL/AVG per variant, in points (x100)."""
    header = ("variant", "CoNLL", "AVG")
    rows = [header]
    for variant, stats in result["summary"].items():
        rows.append((variant, f"{100 * stats['conll']:.2f}", f"{100 * stats['avg']:.2f}"))
    widths = [max(len(r[c]) for r in rows) for c in range(3)]
    return "\n".join(
        "  ".join(val.ljust(widths[c]) for c, val in enumerate(row)).rstrip() for row in rows
    )
