"""
Interpretation of a trained model.

Words are assigned to aspects by their per-word importance weights, aspects
are summarised by their highest-ranked words, and single predictions are
broken down into per-aspect importance and score.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Tuple

import numpy as np
from rich.console import Group
from rich.panel import Panel
from rich.table import Table

from ..corpus.text import Vocabulary
from ..kernel import ops
from ..model.params import ModelParams
from ..model.rpr import RPRModel
from ..schemas.reports import AspectRow, ExplanationReport

logger = logging.getLogger(__name__)

RankedWords = List[List[Tuple[str, float]]]


def word_aspect_weights(
    params: ModelParams, tokens: np.ndarray, positive: bool
) -> np.ndarray:
    """ReLU(W c_j + b) for every word position j, shape (l, n_aspects)"""
    view = params.view()
    head = view.head(positive)
    n_aspects = head.W.shape[0]
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.size == 0:
        return np.zeros((0, n_aspects))
    embedded = ops.gather_rows(view.embeddings, ids)
    features = ops.conv_context(
        embedded, view.conv.K, view.conv.b, ids == params.pad_index
    )
    return ops.linear_relu(features, head.W, head.b).value


def _word_means(
    params: ModelParams, tokens: np.ndarray, positive: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct token ids, their occurrence counts and mean weight vectors"""
    ids = np.asarray(tokens, dtype=np.int64)
    weights = word_aspect_weights(params, ids, positive)
    distinct, inverse, counts = np.unique(ids, return_inverse=True, return_counts=True)
    sums = np.zeros((len(distinct), weights.shape[1]))
    np.add.at(sums, inverse, weights)
    return distinct, counts, sums / counts[:, None]


def classify_words(
    params: ModelParams, tokens: np.ndarray, positive: bool, vocab: Vocabulary
) -> Dict[str, int]:
    """
    Aspect of every distinct word of a polarity document.

    A word's weight vector is averaged over its occurrences and the argmax
    taken, lowest aspect index first on ties. PAD positions are skipped.
    """
    ids = np.asarray(tokens, dtype=np.int64)
    distinct, _, means = _word_means(params, ids, positive)
    return {
        vocab.index_to_token[int(tok)]: int(np.argmax(row))
        for tok, row in zip(distinct, means)
        if tok != params.pad_index
    }


def top_aspect_words(
    params: ModelParams,
    tokens: np.ndarray,
    positive: bool,
    vocab: Vocabulary,
    k: int = 10,
) -> RankedWords:
    """
    Up to ``k`` words per aspect ranked by mean aspect weight times count.

    Each word only competes in the aspect it is classified into; ties are
    ordered by token text.
    """
    head_w = params["head_p.W"] if positive else params["head_r.W"]
    ranked: RankedWords = [[] for _ in range(head_w.shape[0])]
    distinct, counts, means = _word_means(params, tokens, positive)
    for tok, count, row in zip(distinct, counts, means):
        if tok == params.pad_index:
            continue
        aspect = int(np.argmax(row))
        word = vocab.index_to_token[int(tok)]
        ranked[aspect].append((word, float(row[aspect] * count)))
    return [sorted(words, key=lambda w: (-w[1], w[0]))[:k] for words in ranked]


def explain_rating(model: RPRModel, user_id: str, item_id: str) -> ExplanationReport:
    """
    Per-aspect breakdown of one prediction.

    The predicted rating is the model's own prediction for the pair, and
    equals positive_term - negative_term.
    """
    prof = model.profile(user_id, item_id)
    positive = prof.rho_p_plus * prof.s_p
    negative = prof.rho_r_plus * prof.s_r

    def rows(importance: np.ndarray, scores: np.ndarray, terms: np.ndarray):
        return [
            AspectRow(
                aspect=x,
                importance=float(importance[x]),
                score=float(scores[x]),
                contribution=float(terms[x]),
            )
            for x in range(len(scores))
        ]

    return ExplanationReport(
        user_id=user_id,
        item_id=item_id,
        preferred=rows(prof.rho_p_plus, prof.s_p, positive),
        rejected=rows(prof.rho_r_plus, prof.s_r, negative),
        predicted_rating=prof.r_hat,
        positive_term=float(np.sum(positive)),
        negative_term=float(np.sum(negative)),
    )


def _aspect_table(title: str, rows: List[AspectRow]) -> Table:
    table = Table(title=title, expand=False)
    table.add_column("Aspect", justify="right", style="bold cyan")
    table.add_column("Importance", justify="right", style="magenta")
    table.add_column("Score", justify="right", style="yellow")
    table.add_column("Contribution", justify="right", style="green")
    for row in rows:
        table.add_row(
            str(row.aspect),
            f"{row.importance:.3f}",
            f"{row.score:.3f}",
            f"{row.contribution:.3f}",
        )
    return table


def render_explanation(report: ExplanationReport) -> Panel:
    summary = (
        f"[bold]{report.predicted_rating:.3f}[/bold] = "
        f"[green]{report.positive_term:.3f}[/green] - "
        f"[red]{report.negative_term:.3f}[/red]"
    )
    return Panel(
        Group(
            _aspect_table("User-preferred aspects", report.preferred),
            _aspect_table("User-rejected aspects", report.rejected),
            summary,
        ),
        title=f"[bold]user {report.user_id} / item {report.item_id}[/bold]",
        border_style="blue",
        expand=False,
    )


def render_top_words(ranked: RankedWords, positive: bool) -> Table:
    side = "preferred" if positive else "rejected"
    table = Table(title=f"Top words per user-{side} aspect")
    table.add_column("Aspect", justify="right", style="bold cyan")
    table.add_column("Words")
    for aspect, words in enumerate(ranked):
        table.add_row(str(aspect), ", ".join(word for word, _ in words))
    return table
