"""Mention-pair representations, the context-dependent gate, and scoring.

A pair of mentions is represented by a trigger-based vector t_ij and one
feature-based vector h_ij per symbolic feature.  In "cdgm" mode each
h_ij is split into components parallel and orthogonal to t_ij and mixed
by a learned sigmoid gate before the final concatenation; "simple" mode
concatenates the raw h_ij; "baseline" mode uses t_ij alone.

Every function below works on single vectors and on row-batched
matrices alike, so ``score_document`` can push all j < i pairs of a
document through the model in one tape.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, Tape, affine, concat, project_decompose, relu, reshape, sigmoid, take_rows
from .encoder import encode_tokens, feature_rows, trigger_reprs

MODES = ("baseline", "simple", "cdgm")


@dataclass
class FFNN:
    """One-hidden-layer feedforward block: affine, ReLU, affine.

    ``out_sigmoid`` tags the gate networks, which squash their output
    through a logistic function.
    """

    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter
    out_sigmoid: bool = False

    @property
    def in_width(self):
        return self.w1.value.shape[1]

    @property
    def out_width(self):
        return self.w2.value.shape[0]

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]


def hidden_width(out_width):
    # Smallest shape that is not a linear map but still trains in seconds.
    return max(2 * out_width, 32)


def init_ffnn(name, in_width, out_width, rng, out_sigmoid=False):
    hidden = hidden_width(out_width)
    b1 = 1.0 / np.sqrt(in_width)
    b2 = 1.0 / np.sqrt(hidden)
    return FFNN(
        w1=Parameter(f"{name}.w1", rng.uniform(-b1, b1, size=(hidden, in_width))),
        b1=Parameter(f"{name}.b1", np.zeros(hidden)),
        w2=Parameter(f"{name}.w2", rng.uniform(-b2, b2, size=(out_width, hidden))),
        b2=Parameter(f"{name}.b2", np.zeros(out_width)),
        out_sigmoid=out_sigmoid,
    )


def ffnn_apply(f, x):
    tape = x.tape
    out = affine(tape.watch(f.w2), tape.watch(f.b2), relu(affine(tape.watch(f.w1), tape.watch(f.b1), x)))
    return sigmoid(out) if f.out_sigmoid else out


@dataclass
class PairModelParams:
    """All pair-level FFNNs for one mode.

    baseline: only ffnn_t and a p -> 1 scorer.
    simple:   adds one ffnn per feature; scorer takes (K+1)p.
    cdgm:     adds per-feature sigmoid gates on top of "simple".
    """

    mode: str
    ffnn_t: FFNN
    ffnn_u: list[FFNN] = field(default_factory=list)
    ffnn_g: list[FFNN] = field(default_factory=list)
    ffnn_a: FFNN = None

    @property
    def k(self):
        return len(self.ffnn_u)

    def params(self):
        out = list(self.ffnn_t.params())
        for f in self.ffnn_u:
            out.extend(f.params())
        for f in self.ffnn_g:
            out.extend(f.params())
        out.extend(self.ffnn_a.params())
        return out


def init_pair_model(schema, d, l, p, mode, rng):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ffnn_t = init_ffnn("pair.t", 3 * d, p, rng)
    ffnn_u, ffnn_g = [], []
    if mode != "baseline":
        for name, _ in schema.features:
            ffnn_u.append(init_ffnn(f"pair.u.{name}", 3 * l, p, rng))
        if mode == "cdgm":
            for name, _ in schema.features:
                ffnn_g.append(init_ffnn(f"pair.g.{name}", 2 * p, p, rng, out_sigmoid=True))
    score_in = p if mode == "baseline" else (schema.k + 1) * p
    ffnn_a = init_ffnn("pair.a", score_in, 1, rng)
    return PairModelParams(mode=mode, ffnn_t=ffnn_t, ffnn_u=ffnn_u, ffnn_g=ffnn_g, ffnn_a=ffnn_a)


def trigger_pair(t_i, t_j, pm):
    """t_ij from [t_i ; t_j ; t_i o t_j]."""
    return ffnn_apply(pm.ffnn_t, concat([t_i, t_j, t_i * t_j]))


def feature_pair(h_i, h_j, pm, u):
    """h_ij for feature u from [h_i ; h_j ; h_i o h_j]."""
    if not 0 <= u < len(pm.ffnn_u):
        raise ValueError(f"feature index {u} out of range for K={len(pm.ffnn_u)}")
    return ffnn_apply(pm.ffnn_u[u], concat([h_i, h_j, h_i * h_j]))


def cdgm(t_ij, h_ij, pm, u):
    """Gate the orthogonal/parallel split of h_ij against the context t_ij.

    The parallel component carries what t_ij already knows; the
    orthogonal one carries new information.  A gate near 1 trusts the
    new information, near 0 it falls back on the trigger context.
    """
    gate = ffnn_apply(pm.ffnn_g[u], concat([t_ij, h_ij]))
    par, orth = project_decompose(t_ij, h_ij)
    return gate * orth + (1.0 - gate) * par


def assemble_pair(t_ij, parts, mode):
    """Final pair representation f_ij for the given mode."""
    if mode == "baseline":
        if parts:
            raise ValueError("baseline mode takes no feature parts")
        return t_ij
    return concat([t_ij] + list(parts)) if parts else t_ij


def score_pair(f_ij, pm):
    """Unbounded coreference score; scalar node for a single pair."""
    out = ffnn_apply(pm.ffnn_a, f_ij)
    if out.value.ndim == 1:
        return reshape(out, ())
    return reshape(out, (out.value.shape[0],))


class PairScores:
    """Scores s(i, j) for all j < i of a k-mention document."""

    def __init__(self, k, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (k * (k - 1) // 2,):
            raise ValueError(f"expected {k * (k - 1) // 2} scores for k={k}, got {flat.shape}")
        self.k = k
        self.flat = flat

    @staticmethod
    def index(i, j):
        if not 0 <= j < i:
            raise ValueError(f"need j < i, got ({i}, {j})")
        return i * (i - 1) // 2 + j

    def score(self, i, j):
        return float(self.flat[self.index(i, j)])

    def row(self, i):
        """Scores against all antecedent candidates of mention i."""
        base = i * (i - 1) // 2
        return self.flat[base : base + i]

    def matrix(self):
        m = np.zeros((self.k, self.k))
        for i in range(1, self.k):
            m[i, :i] = self.row(i)
        return m


def pair_indices(k):
    """Row indices (i_vec, j_vec) for all pairs j < i, in score order."""
    i_vec = np.array([i for i in range(1, k) for _ in range(i)], dtype=np.intp)
    j_vec = np.array([j for i in range(1, k) for j in range(i)], dtype=np.intp)
    return i_vec, j_vec


def score_document_node(doc, model, tape):
    """Scores for all j < i pairs as one (P,) node on ``tape``."""
    k = len(doc.mentions)
    if k < 2:
        return None
    x = encode_tokens(doc, model.encoder, tape)
    t_all = trigger_reprs(x, doc.mentions)
    i_vec, j_vec = pair_indices(k)
    t_i = take_rows(t_all, i_vec)
    t_j = take_rows(t_all, j_vec)
    t_ij = trigger_pair(t_i, t_j, model.pair)

    parts = []
    if model.pair.mode != "baseline":
        for u, emb in enumerate(model.embedders):
            card = emb.value.shape[0]
            h_all = feature_rows(doc.mentions, u, tape.watch(emb), card)
            h_i = take_rows(h_all, i_vec)
            h_j = take_rows(h_all, j_vec)
            h_ij = feature_pair(h_i, h_j, model.pair, u)
            parts.append(cdgm(t_ij, h_ij, model.pair, u) if model.pair.mode == "cdgm" else h_ij)

    return score_pair(assemble_pair(t_ij, parts, model.pair.mode), model.pair)


def score_document(doc, model):
    """Forward-only scoring; returns a PairScores of plain floats."""
    k = len(doc.mentions)
    node = score_document_node(doc, model, Tape())
    flat = np.zeros(0) if node is None else node.value.copy()
    return PairScores(k, flat)
