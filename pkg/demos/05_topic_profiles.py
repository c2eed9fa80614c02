"""Topic modeling of the corpus and profiles of high vs low gists.

Fits collapsed-Gibbs LDA on a two-topic planted corpus, prints the top
words per topic, then sums inferred topic distributions for gist sentences
drawn from each side's vocabulary. The profiles should point at opposite
topics.
"""
import numpy as np

from gistcast.gist import GistRecord, GistReport, Occurrence, Side
from gistcast.panel import CountryMonthKey, Month
from gistcast.synthgen import SynthConfig, generate
from gistcast.topics import Vocabulary, fit_lda, preprocess, profile_gists

data = generate(SynthConfig(countries=4, months=24, articles_per_month=6,
                            sentences_per_article=4, dim=8, seed=3))
docs = [preprocess(" ".join(a.sentences)) for a in data.corpus]
vocab = Vocabulary.build(docs, min_df=2, max_df_frac=0.9)
model = fit_lda(docs, k=2, iterations=80, seed=3, vocab=vocab)

for topic in range(model.k):
    words = ", ".join(w for w, _ in model.top_words(topic, 8))
    print(f"topic {topic}: {words}")

key = CountryMonthKey("UG", Month(2018, 1))


def fake_gists(texts: list[str], side: Side) -> list[GistRecord]:
    sign = 1.0 if side is Side.HIGH else -1.0
    return [GistRecord(f"{side.value}{i}", t, sign, Occurrence(key, 0, 0),
                       sign, 3.0, side) for i, t in enumerate(texts)]


high_months = [a for a in data.corpus if data.truth.true_latent[a.key] > 0.5]
low_months = [a for a in data.corpus if data.truth.true_latent[a.key] < -0.5]
report = GistReport(
    high=fake_gists([a.sentences[0] for a in high_months[:10]], Side.HIGH),
    low=fake_gists([a.sentences[0] for a in low_months[:10]], Side.LOW),
    fraction=0.05, population_size=20,
)

high, low = profile_gists(report, model, seed=3)
print("\nsummed topic mass (10 sentences per side):")
print(f"  high-crisis gists: {np.round(high.mass, 2)}")
print(f"  low-crisis gists:  {np.round(low.mass, 2)}")
print(f"  dominant topics differ: {int(np.argmax(high.mass)) != int(np.argmax(low.mass))}")
