"""Food-crisis forecasting toolkit.

Bootstrap augmentation of news-sentence panels, a multi-task attention
regression model over precomputed sentence embeddings, gist (important
sentence) extraction, LDA topic profiling, a lagged-regression baseline,
and a deterministic synthetic-data generator for end-to-end validation.
"""

from . import baseline, bootstrap, dataset, embeddings, gist, model, panel, synthgen, topics, trainer

__all__ = [
    "baseline",
    "bootstrap",
    "dataset",
    "embeddings",
    "gist",
    "model",
    "panel",
    "synthgen",
    "topics",
    "trainer",
]

__version__ = "0.1.0"
