"""Context-aware few-shot classification toolkit.

Prototype-based episodic classification where class prototypes and query
embeddings are grounded in scene context: attention over context labels,
a gated fusion of visual and context embeddings, and word-vector prototype
refinement. Ships a small reverse-mode tensor core, a synthetic corpus
generator with controllable context value, an episodic train/eval harness,
scikit-learn style estimators, and a CLI (``contextproto``).
"""

from .attention import AttentionParams, AttentionResult, ContextSet, ContextSource, attend_context, \
    context_average, inject_noise, select_context
from .autodiff import Tensor, backward, grad_check
from .corpus import Corpus, CorpusSpec, SceneInstance, filter_rare, generate_corpus, load_corpus, \
    save_corpus, split_classes
from .episodes import Episode, EpisodeSpec, sample_episode
from .errors import ContextProtoError
from .estimator import FewShotContextClassifier, PrototypeClassifier
from .evaluation import EvalReport, evaluate, noise_sweep, strata_eval
from .fusion import FusionTrace, GateParams, RefineParams, class_prototype, context_aware_prototype, \
    gated_fuse, refine_with_word
from .model import ModelConfig, ModelParams, ModelVariant, TrainedModel, episode_loss, forward_episode
from .training import TrainResult, TrainSettings, train
from .wordvec import WordTable, cosine_similarity, load_word_table, save_word_table

__version__ = "0.1.0"

__all__ = [
    "AttentionParams",
    "AttentionResult",
    "ContextProtoError",
    "ContextSet",
    "ContextSource",
    "Corpus",
    "CorpusSpec",
    "Episode",
    "EpisodeSpec",
    "EvalReport",
    "FewShotContextClassifier",
    "FusionTrace",
    "GateParams",
    "ModelConfig",
    "ModelParams",
    "ModelVariant",
    "PrototypeClassifier",
    "RefineParams",
    "SceneInstance",
    "Tensor",
    "TrainResult",
    "TrainSettings",
    "TrainedModel",
    "WordTable",
    "attend_context",
    "backward",
    "class_prototype",
    "context_average",
    "context_aware_prototype",
    "cosine_similarity",
    "episode_loss",
    "evaluate",
    "filter_rare",
    "forward_episode",
    "gated_fuse",
    "generate_corpus",
    "grad_check",
    "inject_noise",
    "load_corpus",
    "load_word_table",
    "noise_sweep",
    "refine_with_word",
    "sample_episode",
    "save_corpus",
    "save_word_table",
    "select_context",
    "split_classes",
    "strata_eval",
    "train",
]
