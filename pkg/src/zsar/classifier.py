"""Cosine-similarity zero-shot classification.

A video is the mean of its frame embeddings, a class is the mean of its
descriptor-text embeddings, and the prediction is the class whose mean
embedding has the highest cosine similarity with the video's. Means are
accumulated in float64 regardless of the encoder's output precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEmbeddingError, DomainError
from .labels import ActionClass


def _mean_rows(matrix, what: str) -> np.ndarray:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise DomainError(f"{what} must be a non-empty 2-D matrix, got shape {matrix.shape}")
    return matrix.mean(axis=0, dtype=np.float64)


def video_embedding(frame_embs) -> np.ndarray:
    """Componentwise mean of the sampled frames' embeddings."""
    return _mean_rows(frame_embs, "frame embeddings")


def class_embedding(text_embs) -> np.ndarray:
    """Componentwise mean of one class's descriptor-text embeddings."""
    return _mean_rows(text_embs, "text embeddings")


@dataclass
class ClassEmbedding:
    """A class's mean text embedding plus its label-space index for tie-breaks."""

    action: ActionClass
    z: np.ndarray
    M: int
    index: int

    @classmethod
    def from_texts(cls, action: ActionClass, text_embs, index: int) -> "ClassEmbedding":
        z = class_embedding(text_embs)
        return cls(action=action, z=z, M=int(np.asarray(text_embs).shape[0]), index=index)


@dataclass
class Prediction:
    """Classes ranked by cosine similarity, best first."""

    ranking: list[tuple[ActionClass, float]]
    predicted: ActionClass


def predict(vbar, classes: list[ClassEmbedding]) -> Prediction:
    """Rank classes by cosine similarity to the video embedding.

    Ties break toward the lower label-space index. A zero-norm embedding
    anywhere is an upstream encoding bug and raises rather than scoring 0.
    """
    if not classes:
        raise DomainError("at least one class embedding is required")
    v = np.asarray(vbar, dtype=np.float64)
    v_norm = float(np.linalg.norm(v))
    if v_norm == 0.0:
        raise DegenerateEmbeddingError("video embedding has zero norm")
    scored = []
    for ce in classes:
        z = np.asarray(ce.z, dtype=np.float64)
        z_norm = float(np.linalg.norm(z))
        if z_norm == 0.0:
            raise DegenerateEmbeddingError(
                f"class embedding for {ce.action.display!r} has zero norm"
            )
        score = float(np.dot(z, v) / (z_norm * v_norm))
        scored.append((ce, score))
    scored.sort(key=lambda item: (-item[1], item[0].index))
    ranking = [(ce.action, score) for ce, score in scored]
    return Prediction(ranking=ranking, predicted=ranking[0][0])


def topk_hit(prediction: Prediction, truth: ActionClass, k: int) -> bool:
    """True iff the ground-truth class is among the k best-ranked classes."""
    if k < 1 or k > len(prediction.ranking):
        raise DomainError(f"k={k} out of range for ranking of {len(prediction.ranking)}")
    return any(action == truth for action, _ in prediction.ranking[:k])


def dump_class_embeddings(classes: list[ClassEmbedding], path, dim: int) -> None:
    """Persist class embeddings to the binary table format for reuse."""
    from .vectable import write_table

    table = {
        ce.action.display.encode("utf-8"): np.asarray(ce.z, dtype=np.float32)
        for ce in classes
    }
    write_table(path, table, dim)
