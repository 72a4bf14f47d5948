"""scikit-learn style estimators wrapping the episodic model.

``FewShotContextClassifier`` meta-trains on a base set of classes with
`fit(X, y, contexts=...)` and can then either classify among those base
classes directly or spawn a ``PrototypeClassifier`` for a novel support
set via ``episode``. Both follow the usual conventions: hyperparameters in
``__init__`` (so ``get_params`` / ``set_params`` / ``clone`` work), learned
state in trailing-underscore attributes, ValueError on malformed input.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .attention import ContextSource, select_context
from .corpus import Corpus, SceneInstance
from .episodes import EpisodeSpec
from .model import ModelConfig, ModelVariant, TrainedModel, build_prototypes, query_distributions
from .training import TrainSettings, train
from .validation import check_contexts, check_feature_matrix, check_labels, check_sizes
from .wordvec import WordTable


def _as_word_table(word_vectors, labels: list[str]) -> WordTable:
    if isinstance(word_vectors, WordTable):
        table = word_vectors
    else:
        names = list(word_vectors.keys())
        table = WordTable(names, np.stack([np.asarray(word_vectors[n], dtype=np.float64) for n in names]))
    missing = [l for l in labels if l not in table]
    if missing:
        raise ValueError(f"word_vectors missing entries for classes {missing[:5]}")
    return table


class PrototypeClassifier(BaseEstimator, ClassifierMixin):
    """Nearest-prototype classification under a trained context model.

    ``fit`` builds one prototype per class from the given support set using
    the model's active pathways (context attention, gated fusion, word
    refinement); ``predict`` softmax-scores queries by distance to those
    prototypes.

    Parameters
    ----------
    model : TrainedModel
        Weights, word table, and variant produced by training (or by
        ``FewShotContextClassifier.fit``).
    context_source : str, default "union"
        Which class pools context labels may come from ("cs", "ct", "union").
    """

    def __init__(self, model: TrainedModel | None = None, context_source: str = "union"):
        self.model = model
        self.context_source = context_source

    def _require_model(self) -> TrainedModel:
        if self.model is None:
            raise ValueError("PrototypeClassifier needs a trained model; pass model=... at construction")
        return self.model

    def _filter(self, contexts):
        model = self._require_model()
        source = ContextSource.parse(self.context_source)
        return [
            tuple(select_context(ctx, source, model.train_classes, model.test_classes))
            for ctx in contexts
        ]

    def fit(self, X, y, contexts=None):
        model = self._require_model()
        X = check_feature_matrix(X, model.params.config.d_f)
        labels = check_labels(y, X.shape[0])
        contexts = self._filter(check_contexts(contexts, X.shape[0]))
        self.classes_ = np.array(sorted(set(labels)))
        support = [[] for _ in self.classes_]
        index = {c: i for i, c in enumerate(self.classes_)}
        for row, label, ctx in zip(X, labels, contexts):
            support[index[label]].append(SceneInstance(label=label, features=row, context=ctx))
        self.prototypes_, self.lambdas_ = build_prototypes(
            list(self.classes_), support, model.variant, model.params, model.word_table
        )
        return self

    def predict_proba(self, X, contexts=None):
        model = self._require_model()
        if not hasattr(self, "prototypes_"):
            raise ValueError("PrototypeClassifier is not fitted yet; call fit first")
        X = check_feature_matrix(X, model.params.config.d_f)
        contexts = self._filter(check_contexts(contexts, X.shape[0]))
        instances = [SceneInstance(label="", features=r, context=c) for r, c in zip(X, contexts)]
        return query_distributions(instances, self.prototypes_, model.variant, model.params, model.word_table)

    def predict(self, X, contexts=None):
        probs = self.predict_proba(X, contexts=contexts)
        return self.classes_[np.argmax(probs, axis=1)]


class FewShotContextClassifier(BaseEstimator, ClassifierMixin):
    """Episodically meta-trained few-shot classifier with scene context.

    ``fit`` treats (X, y, contexts) as the base corpus: it trains the chosen
    variant on sampled ways/shots episodes, then keeps per-class prototypes
    built from all base instances so ``predict`` works on the base classes.
    Use ``episode(X, y, contexts)`` to adapt to novel classes from a small
    support set.

    Parameters
    ----------
    variant : str, default "full"
        One of protonet, am3, cavg, ccam, cavg-w2v, full.
    ways, shots, queries_per_class : int
        Episode shape used during meta-training; every class needs at least
        shots + queries_per_class instances.
    episodes : int, default 2000
        Number of training episodes.
    learning_rate : float, default 1e-3
        Base Adam learning rate (decays by 10x at each third of the run).
    context_source : str, default "union"
        Context-label filtering mode.
    d_x, d_c, d_z, d_h : int or None
        Embedding and hidden dimensions; None picks the library defaults.
    top_k : int, default 1
        Reserved for top-k scoring helpers; predict always returns the argmax.
    random_state : int, default 0
        Seed for initialization and episode sampling.

    Attributes
    ----------
    classes_ : ndarray of base class names (sorted)
    model_ : TrainedModel with the learned weights
    loss_curve_ : list of per-episode training losses
    """

    def __init__(self, variant: str = "full", ways: int = 5, shots: int = 1,
                 queries_per_class: int = 15, episodes: int = 2000, learning_rate: float = 1e-3,
                 context_source: str = "union", d_x: int = 64, d_c: int | None = None,
                 d_z: int | None = None, d_h: int | None = None, top_k: int = 1,
                 random_state: int = 0):
        self.variant = variant
        self.ways = ways
        self.shots = shots
        self.queries_per_class = queries_per_class
        self.episodes = episodes
        self.learning_rate = learning_rate
        self.context_source = context_source
        self.d_x = d_x
        self.d_c = d_c
        self.d_z = d_z
        self.d_h = d_h
        self.top_k = top_k
        self.random_state = random_state

    def fit(self, X, y, contexts=None, sizes=None, word_vectors=None):
        X = check_feature_matrix(X)
        labels = check_labels(y, X.shape[0])
        contexts = check_contexts(contexts, X.shape[0])
        sizes = check_sizes(sizes, X.shape[0])
        classes = sorted(set(labels))
        if len(classes) < self.ways:
            raise ValueError(f"only {len(classes)} classes in y but ways={self.ways}")

        variant = ModelVariant.parse(self.variant)
        if word_vectors is None:
            if variant is not ModelVariant.PROTONET:
                raise ValueError(f"variant {variant.value!r} needs word_vectors for every class in y")
            table = WordTable(classes, np.zeros((len(classes), 1)))
        else:
            table = _as_word_table(word_vectors, classes)

        instances = [
            SceneInstance(label=l, features=r, context=c, size=s)
            for r, l, c, s in zip(X, labels, contexts, sizes)
        ]
        corpus = Corpus(
            instances=instances,
            word_table=table,
            classes=classes,
            train_classes=classes,
            test_classes=[],
        )
        corpus.validate()

        spec = EpisodeSpec(
            ways=self.ways, shots=self.shots, queries=self.queries_per_class,
            context_source=ContextSource.parse(self.context_source),
        )
        config = ModelConfig(d_f=X.shape[1], d_x=self.d_x, d_w=table.d_w,
                             d_c=self.d_c, d_z=self.d_z, d_h=self.d_h)
        settings = TrainSettings(episodes=self.episodes, learning_rate=self.learning_rate,
                                 seed=self.random_state)
        result = train(variant, corpus, spec, settings, config=config)
        self.model_ = result.model
        self.loss_curve_ = result.loss_curve
        self.classes_ = np.array(classes)

        head = PrototypeClassifier(model=self.model_, context_source=self.context_source)
        head.fit(X, labels, contexts=contexts)
        self._head = head
        return self

    def episode(self, X, y, contexts=None) -> PrototypeClassifier:
        """Adapt to novel classes: fit a prototype head on a support set."""
        if not hasattr(self, "model_"):
            raise ValueError("call fit before episode")
        head = PrototypeClassifier(model=self.model_, context_source=self.context_source)
        return head.fit(X, y, contexts=contexts)

    def predict_proba(self, X, contexts=None):
        if not hasattr(self, "model_"):
            raise ValueError("FewShotContextClassifier is not fitted yet; call fit first")
        return self._head.predict_proba(X, contexts=contexts)

    def predict(self, X, contexts=None):
        probs = self.predict_proba(X, contexts=contexts)
        return self.classes_[np.argmax(probs, axis=1)]
