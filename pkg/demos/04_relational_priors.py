"""
Relational priors: datasets, training, and what cosine similarity misses
========================================================================

Utility scoring rests on two relations: does room r plausibly contain query
q, and does object o co-occur with q. A recorded (here: synthetic) oracle
response set turns into supervised datasets; two small MLPs over
concatenated label embeddings learn the relations; and cosine similarity of
the same embeddings, the usual baseline, separates the planted pairs far
worse than the trained scorers.
"""

import numpy as np

from scenesearch.datasets import (
    build_contain_dataset,
    build_cooccur_dataset,
    build_household_set,
    synth_oracle,
)
from scenesearch.embeddings import HashProvider
from scenesearch.relational import TrainConfig, init_model, train
from scenesearch.scoring import CosineBackend, LearnedBackend

# A planted world: every object has a home room, containment scores peak
# there, and objects co-occur exactly when their home rooms match.
oracle = synth_oracle(seed=3, n_rooms=4, n_objects=30)
household = build_household_set(oracle.responses)
print(f"household set: {len(household)} objects across {len(oracle.responses.rooms)} rooms")

cooccur = build_cooccur_dataset(oracle.responses, household, seed=0)
contain = build_contain_dataset(oracle.responses, household, seed=0)
print(f"datasets: {len(cooccur)} co-occurrence rows, {len(contain)} containment rows")

# Deterministic hash embeddings carry no relational signal by construction,
# so whatever the models learn comes from the labels' planted relations.
# That also means held-out PAIRS cannot be predicted (there is nothing to
# generalize from); distillation here means fitting the full response table,
# so we train on every row. With a real pretrained encoder the usual
# train/val split and early stopping apply.
provider = HashProvider(seed=3, dim=16)

models = {}
for name, dataset in (("cooccur", cooccur), ("contain", contain)):
    x, y = dataset.vectorize(provider)
    result = train(init_model(name, provider.dim, seed=0), x, y,
                   config=TrainConfig(seed=0, max_epochs=600))
    models[name] = result.model
    print(f"{name}: {result.epochs_run} epochs, final loss {result.train_losses[-1]:.4f}")

learned = LearnedBackend(provider, models["cooccur"], models["contain"])
cosine = CosineBackend(provider)


def separation(backend):
    """Mean score on positive pairs minus mean score on negative pairs."""
    positives, negatives = [], []
    for row in cooccur.rows:
        value = backend.score_object(row.text_a, row.text_b)
        (positives if row.label == 1.0 else negatives).append(value)
    return np.mean(positives) - np.mean(negatives)


print(f"\npositive/negative separation, trained scorer: {separation(learned):+.3f}")
print(f"positive/negative separation, cosine baseline: {separation(cosine):+.3f}")

query = sorted(household)[0]
print(f"\nroom scores for query {query!r}:")
for room in oracle.responses.rooms:
    planted = oracle.contain_table[(room, query)]
    print(f"  {room}: learned {learned.score_room(room, query):.2f}, planted {planted:.2f}")
