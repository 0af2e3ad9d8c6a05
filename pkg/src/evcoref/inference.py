"""Greedy antecedent decoding and link-to-cluster consolidation."""
from __future__ import annotations

import json

import numpy as np

from .pair_model import score_document

# Marker for "no antecedent" in an assignment list.
DUMMY = None


def decode_antecedents(scores):
    """Pick each mention's best-scoring antecedent, or DUMMY.

    The dummy antecedent has fixed score 0, so a mention links only when
    some predecessor scores strictly above 0.  Ties at the maximum pick
    the earliest antecedent; a tie with the dummy stays DUMMY.
    """
    out = []
    for i in range(scores.k):
        if i == 0:
            out.append(DUMMY)
            continue
        row = scores.row(i)
        if not np.all(np.isfinite(row)):
            raise ValueError(f"non-finite score for mention {i}")
        best = row.max()
        out.append(DUMMY if best <= 0.0 else int(np.argmax(row)))
    return out


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:  # path compression
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def clusters_from_links(assignment):
    """Transitive closure of antecedent links, singletons retained.

    Returns clusters as sorted index lists, ordered by first mention.
    """
    k = len(assignment)
    uf = UnionFind(k)
    for i, a in enumerate(assignment):
        if a is not DUMMY:
            if not 0 <= a < i:
                raise ValueError(f"antecedent {a} of mention {i} is not a predecessor")
            uf.union(i, a)
    groups = {}
    for i in range(k):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted(groups.values(), key=lambda c: c[0])


def predict_document(model, doc, drop_singletons=False):
    clusters = clusters_from_links(decode_antecedents(score_document(doc, model)))
    if drop_singletons:
        clusters = [c for c in clusters if len(c) > 1]
    return clusters


def predict_corpus(model, docs, drop_singletons=False):
    return {doc.doc_id: predict_document(model, doc, drop_singletons) for doc in docs}


def save_clusterings(clusterings, path):
    """Write one {"doc_id", "clusters"} object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, clusters in clusterings.items():
            fh.write(json.dumps({"doc_id": doc_id, "clusters": clusters}) + "\n")


def load_clusterings(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {ln}: malformed JSON ({exc.msg})") from None
            if "doc_id" not in obj or "clusters" not in obj:
                raise ValueError(f"{path}: line {ln}: need doc_id and clusters fields")
            out[str(obj["doc_id"])] = [[int(m) for m in c] for c in obj["clusters"]]
    return out
