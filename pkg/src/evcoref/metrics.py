"""Coreference metric suite: MUC, B3, CEAF_e, BLANC, CoNLL and AVG.

Each metric exposes a *_counts function returning precision/recall
numerators and denominators so that corpus-level scores micro-average
across documents, in the style of the standard reference scorers.

Conventions: any 0/0 ratio is 0.  BLANC averages the F1 over coreference
links and the F1 over non-links, except in the degenerate cases where
only one link type exists on both sides, in which case that type's
triple is the score outright.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class MetricTriple:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, p_num, p_den, r_num, r_den):
        p = p_num / p_den if p_den > 0 else 0.0
        r = r_num / r_den if r_den > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)

    def to_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class MetricReport:
    muc: MetricTriple
    b3: MetricTriple
    ceaf_e: MetricTriple
    blanc: MetricTriple
    conll: float
    avg: float
    flags: tuple[str, ...] = field(default=())

    def to_dict(self):
        return {
            "muc": self.muc.to_dict(),
            "b3": self.b3.to_dict(),
            "ceaf_e": self.ceaf_e.to_dict(),
            "blanc": self.blanc.to_dict(),
            "conll": self.conll,
            "avg": self.avg,
            "flags": list(self.flags),
        }


def _check_partition(clusters, name):
    seen = set()
    for c in clusters:
        if not c:
            raise ValueError(f"{name}: empty cluster")
        for m in c:
            if m in seen:
                raise ValueError(f"{name}: mention {m!r} appears in two clusters")
            seen.add(m)
    return seen


def align_universes(key, response):
    """Extend each side with singletons for the other side's extra mentions."""
    key_mentions = _check_partition(key, "key")
    resp_mentions = _check_partition(response, "response")
    key = list(key) + [[m] for m in sorted(resp_mentions - key_mentions)]
    response = list(response) + [[m] for m in sorted(key_mentions - resp_mentions)]
    return key, response


def _mention_map(clusters):
    return {m: i for i, c in enumerate(clusters) for m in c}


def muc_counts(key, response):
    """Link-based counts: cluster size minus number of partitions."""

    def halves(gold, system):
        mapping = _mention_map(system)
        num = den = 0
        for c in gold:
            den += len(c) - 1
            parts = {mapping[m] for m in c if m in mapping}
            parts_count = len(parts) + sum(1 for m in c if m not in mapping)
            num += len(c) - parts_count
        return num, den

    r_num, r_den = halves(key, response)
    p_num, p_den = halves(response, key)
    return p_num, p_den, r_num, r_den


def muc(key, response):
    key, response = align_universes(key, response)
    return MetricTriple.from_counts(*muc_counts(key, response))


def b_cubed_counts(key, response):
    """Per-mention overlap ratios, summed (denominator = mention count)."""

    def halves(gold, system):
        mapping = _mention_map(system)
        num = 0.0
        den = 0
        for c in gold:
            for m in c:
                den += 1
                other = system[mapping[m]] if m in mapping else ()
                overlap = sum(1 for x in c if x in set(other))
                num += overlap / len(c)
        return num, den

    r_num, r_den = halves(key, response)
    p_num, p_den = halves(response, key)
    return p_num, p_den, r_num, r_den


def b_cubed(key, response):
    key, response = align_universes(key, response)
    return MetricTriple.from_counts(*b_cubed_counts(key, response))


def phi4(key_cluster, response_cluster):
    overlap = len(set(key_cluster) & set(response_cluster))
    return 2.0 * overlap / (len(key_cluster) + len(response_cluster))


def hungarian(similarity):
    """Maximum-weight one-to-one alignment value of a similarity matrix."""
    similarity = np.asarray(similarity, dtype=np.float64)
    if similarity.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(similarity, maximize=True)
    return float(similarity[rows, cols].sum())


def ceaf_e_counts(key, response):
    sim = np.array([[phi4(kc, rc) for rc in response] for kc in key], dtype=np.float64)
    total = hungarian(sim)
    return total, len(response), total, len(key)


def ceaf_e(key, response):
    key, response = align_universes(key, response)
    return MetricTriple.from_counts(*ceaf_e_counts(key, response))


def _coref_links(clusters):
    links = set()
    for c in clusters:
        members = sorted(c)
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                links.add((members[a], members[b]))
    return links


def blanc_counts(key, response):
    """(num, p_den, r_den) for coref links and for non-coref links."""
    universe = sorted(_check_partition(key, "key"))
    ck = _coref_links(key)
    cr = _coref_links(response)
    n_pairs = len(universe) * (len(universe) - 1) // 2
    c_num = len(ck & cr)
    n_num = n_pairs - len(ck | cr)
    return (c_num, len(cr), len(ck)), (n_num, n_pairs - len(cr), n_pairs - len(ck))


def blanc_from_counts(coref, non):
    c_triple = MetricTriple.from_counts(coref[0], coref[1], coref[0], coref[2])
    n_triple = MetricTriple.from_counts(non[0], non[1], non[0], non[2])
    if coref[1] == 0 and coref[2] == 0:
        return n_triple
    if non[1] == 0 and non[2] == 0:
        return c_triple
    return MetricTriple(
        precision=(c_triple.precision + n_triple.precision) / 2,
        recall=(c_triple.recall + n_triple.recall) / 2,
        f1=(c_triple.f1 + n_triple.f1) / 2,
    )


def blanc(key, response):
    """Rand-style mean of the link F1 and the non-link F1.

    With fewer than two mentions there are no pairs at all; the score is
    0 by convention and the caller is expected to flag it.
    """
    key, response = align_universes(key, response)
    if len(_check_partition(key, "key")) < 2:
        return MetricTriple(0.0, 0.0, 0.0)
    return blanc_from_counts(*blanc_counts(key, response))


def summarize(muc_t, b3_t, ceafe_t, blanc_t):
    """(CoNLL, AVG): mean F1 over three resp. four metrics."""
    conll = (muc_t.f1 + b3_t.f1 + ceafe_t.f1) / 3
    avg = (muc_t.f1 + b3_t.f1 + ceafe_t.f1 + blanc_t.f1) / 4
    return conll, avg


@dataclass
class _Tally:
    muc: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    b3: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    ceafe: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    blanc_c: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    blanc_n: list = field(default_factory=lambda: [0.0, 0.0, 0.0])

    def add(self, key, response):
        for acc, counts in (
            (self.muc, muc_counts(key, response)),
            (self.b3, b_cubed_counts(key, response)),
            (self.ceafe, ceaf_e_counts(key, response)),
        ):
            for i, c in enumerate(counts):
                acc[i] += c
        coref, non = blanc_counts(key, response)
        for i in range(3):
            self.blanc_c[i] += coref[i]
            self.blanc_n[i] += non[i]

    def report(self):
        muc_t = MetricTriple.from_counts(*self.muc)
        b3_t = MetricTriple.from_counts(*self.b3)
        ceafe_t = MetricTriple.from_counts(*self.ceafe)
        flags = []
        if all(v == 0 for v in (*self.blanc_c, *self.blanc_n)):
            blanc_t = MetricTriple(0.0, 0.0, 0.0)
            flags.append("blanc degenerate: fewer than 2 mentions")
        else:
            blanc_t = blanc_from_counts(tuple(self.blanc_c), tuple(self.blanc_n))
        conll, avg = summarize(muc_t, b3_t, ceafe_t, blanc_t)
        return MetricReport(muc=muc_t, b3=b3_t, ceaf_e=ceafe_t, blanc=blanc_t,
                            conll=conll, avg=avg, flags=tuple(flags))


def document_report(key, response):
    """Score one document's clusterings."""
    key, response = align_universes(key, response)
    tally = _Tally()
    tally.add(key, response)
    return tally.report()


def corpus_report(keys, responses):
    """Micro-averaged scores over aligned {doc_id: clustering} maps."""
    missing = sorted(set(keys) - set(responses))
    if missing:
        raise ValueError(f"missing doc_id in response: {missing[0]!r}")
    extra = sorted(set(responses) - set(keys))
    if extra:
        raise ValueError(f"missing doc_id in key: {extra[0]!r}")
    tally = _Tally()
    for doc_id in keys:
        key, response = align_universes(keys[doc_id], responses[doc_id])
        tally.add(key, response)
    return tally.report()


def format_report(report):
    """Aligned plain-text table of a MetricReport."""
    rows = [("metric", "P", "R", "F1")]
    for name, triple in (("MUC", report.muc), ("B3", report.b3),
                         ("CEAF_e", report.ceaf_e), ("BLANC", report.blanc)):
        rows.append((name, f"{triple.precision:.4f}", f"{triple.recall:.4f}", f"{triple.f1:.4f}"))
    widths = [max(len(r[c]) for r in rows) for c in range(4)]
    lines = ["  ".join(val.ljust(widths[c]) for c, val in enumerate(row)).rstrip() for row in rows]
    lines.append(f"CoNLL  {report.conll:.4f}")
    lines.append(f"AVG    {report.avg:.4f}")
    for flag in report.flags:
        lines.append(f"note: {flag}")
    return "\n".join(lines)
