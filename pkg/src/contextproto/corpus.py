"""Synthetic scene corpora with controllable context value.

A corpus is a set of focal-object instances (features + surrounding context
labels + scalar size), a word table over the class vocabulary, and a
train/test class partition. The generator controls two independent axes:

* context informativeness: the probability that a context label comes from
  the focal class's affinity group rather than being uniform noise. Group
  draws cycle through a per-instance shuffle of the group, so at full
  informativeness the observed label set equals the affinity set whenever
  the context is large enough, making context alone sufficient to identify
  the class.
* visual ambiguity: the fraction of classes arranged in pairs that share a
  Gaussian feature cluster. Paired classes sit in different affinity groups
  and the pairing never crosses the train/test split.

An optional pool of background classes (train side, like walls and floors
in real scenes) belongs to no affinity group: they are never informative
for any focal class, and when present they serve as the decoy pool for the
non-informative context draws.

Word vectors are group centroids (near-orthogonal across groups) plus small
noise, so same-group classes have high cosine similarity and the similarity
split filter has real geometry to act on.

Corpus files are JSON-lines: a header object carrying schema id, provenance
(spec + seed), the class split, affinity metadata, and the word table,
followed by one instance object per line.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, FormatError, IntegrityError, ParseError
from .serialize import dataclass_from_dict
from .wordvec import WordTable, cosine_similarity

CORPUS_SCHEMA = "contextproto/corpus-v1"


@dataclass(frozen=True)
class SceneInstance:
    """One focal object: class label, raw features, context labels, size."""

    label: str
    features: np.ndarray
    context: tuple[str, ...]
    size: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "context", tuple(self.context))


@dataclass(frozen=True)
class CorpusSpec:
    """Knobs for the synthetic generator; all draws derive from `seed`."""

    n_classes: int = 60
    instances_per_class: int = 50
    d_f: int = 32
    d_w: int = 16
    context_size: tuple[int, int] = (3, 8)
    informativeness: float = 0.8
    visual_ambiguity: float = 0.8
    informative_per_context: int | None = None
    background_classes: int = 0
    test_fraction: float = 1.0 / 3.0
    group_size: int = 4
    cluster_scale: float = 1.0
    feature_noise: float = 1.0
    word_noise: float = 0.25
    word_scale: float = 1.0
    size_range: tuple[float, float] = (1.0, 1000.0)
    degrade_small: bool = False
    degrade_strength: float = 3.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "context_size", tuple(self.context_size))
        object.__setattr__(self, "size_range", tuple(self.size_range))

    def validate(self) -> None:
        lo, hi = self.context_size
        if self.n_classes < 4:
            raise ConfigError("need at least 4 classes to form 2-class train and test splits")
        if self.instances_per_class < 1 or self.d_f < 1 or self.d_w < 1:
            raise ConfigError("instances_per_class, d_f, and d_w must be positive")
        if not (0 <= lo <= hi):
            raise ConfigError(f"bad context_size range {self.context_size}")
        for name in ("informativeness", "visual_ambiguity", "test_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.group_size < 2:
            raise ConfigError("group_size must be at least 2")
        if self.informative_per_context is not None and self.informative_per_context > lo:
            raise ConfigError("informative_per_context cannot exceed the minimum context size")
        if self.background_classes < 0 or (self.background_classes and self.background_classes < 2):
            raise ConfigError("background_classes must be 0 or at least 2 (decoys need variety)")
        if self.word_scale <= 0:
            raise ConfigError(f"word_scale must be positive, got {self.word_scale}")
        if self.size_range[0] <= 0 or self.size_range[1] < self.size_range[0]:
            raise ConfigError(f"bad size_range {self.size_range}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["context_size"] = list(self.context_size)
        d["size_range"] = list(self.size_range)
        return d

    @classmethod
    def from_dict(cls, data: dict, path: str = "corpus") -> "CorpusSpec":
        return dataclass_from_dict(cls, data, path)


@dataclass
class Corpus:
    """Instances + word table + class split; see module docstring."""

    instances: list[SceneInstance]
    word_table: WordTable
    classes: list[str]
    train_classes: list[str]
    test_classes: list[str]
    affinity: dict[str, tuple[str, ...]] = field(default_factory=dict)
    spec: CorpusSpec | None = None
    _by_class: dict[str, list[SceneInstance]] | None = field(default=None, repr=False, compare=False)

    def by_class(self) -> dict[str, list[SceneInstance]]:
        if self._by_class is None:
            table: dict[str, list[SceneInstance]] = {c: [] for c in self.classes}
            for inst in self.instances:
                table[inst.label].append(inst)
            self._by_class = table
        return self._by_class

    def split_members(self, split: str) -> list[str]:
        if split == "train":
            return self.train_classes
        if split == "test":
            return self.test_classes
        raise DomainError(f"unknown split {split!r}; expected 'train' or 'test'")

    def validate(self) -> None:
        train = set(self.train_classes)
        test = set(self.test_classes)
        if train & test:
            raise IntegrityError(f"train and test classes overlap: {sorted(train & test)}")
        if train | test != set(self.classes):
            raise IntegrityError("class list does not match the union of the train/test split")
        for c in self.classes:
            if c not in self.word_table:
                raise IntegrityError(f"class {c!r} missing from the word table")
        for i, inst in enumerate(self.instances):
            if inst.label not in train and inst.label not in test:
                raise IntegrityError(f"instance {i}: label {inst.label!r} not in the class split")
            for l in inst.context:
                if l not in self.word_table:
                    raise IntegrityError(f"instance {i}: context label {l!r} missing from the word table")

    def equals(self, other: "Corpus") -> bool:
        if (
            self.classes != other.classes
            or self.train_classes != other.train_classes
            or self.test_classes != other.test_classes
            or {k: tuple(v) for k, v in self.affinity.items()} != {k: tuple(v) for k, v in other.affinity.items()}
            or self.word_table.names != other.word_table.names
            or self.word_table.vectors.tobytes() != other.word_table.vectors.tobytes()
            or len(self.instances) != len(other.instances)
        ):
            return False
        if (self.spec is None) != (other.spec is None):
            return False
        if self.spec is not None and self.spec.to_dict() != other.spec.to_dict():
            return False
        for a, b in zip(self.instances, other.instances):
            if a.label != b.label or a.context != b.context or a.size != b.size:
                return False
            if a.features.tobytes() != b.features.tobytes():
                return False
        return True


def _split_layout(members: list[str], group_size: int, alpha: float):
    """Round-robin affinity groups plus visually ambiguous pairs.

    Consecutive members land in different groups, so the pairs (built from
    consecutive members) are contextually distinct wherever possible.
    """
    m = len(members)
    if m < 2:
        raise ConfigError(f"a split needs at least 2 classes, got {m}")
    n_groups = max(1, m // group_size)
    groups = [members[i::n_groups] for i in range(n_groups)]
    n_amb = int(round(alpha * m))
    if n_amb % 2 == 1:
        if alpha >= 1.0:
            raise ConfigError(f"visual_ambiguity 1.0 requires an even class count per split, got {m}")
        n_amb -= 1
    pairs = [(members[i], members[i + 1]) for i in range(0, n_amb, 2)]
    return groups, pairs


def _group_centroids(n_groups: int, d_w: int, rng: np.random.Generator) -> list[np.ndarray]:
    # orthonormal while dimensions allow, random unit directions beyond that
    q, _ = np.linalg.qr(rng.normal(size=(d_w, d_w)))
    cents = [q[:, i].copy() for i in range(min(n_groups, d_w))]
    while len(cents) < n_groups:
        v = rng.normal(size=d_w)
        cents.append(v / np.linalg.norm(v))
    return cents


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Deterministically generate a corpus from a spec (see module docstring)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    names = [f"obj{i:03d}" for i in range(spec.n_classes)]

    order = [names[i] for i in rng.permutation(spec.n_classes)]
    n_test = int(round(spec.test_fraction * spec.n_classes))
    n_test = min(max(n_test, 2), spec.n_classes - 2)
    test_members = order[:n_test]
    train_members = order[n_test:]

    # Background classes (train side) are never informative for anyone: they
    # have no affinity group and serve as the decoy pool when one is needed.
    background = train_members[: spec.background_classes]
    grouped_train = train_members[spec.background_classes:]
    if len(grouped_train) < 2:
        raise ConfigError("background_classes leaves fewer than 2 grouped train classes")

    train_groups, train_pairs = _split_layout(grouped_train, spec.group_size, spec.visual_ambiguity)
    test_groups, test_pairs = _split_layout(test_members, spec.group_size, spec.visual_ambiguity)
    all_groups = train_groups + test_groups

    affinity: dict[str, tuple[str, ...]] = {c: () for c in background}
    for group in all_groups:
        for c in group:
            affinity[c] = tuple(x for x in group if x != c)

    centroids = _group_centroids(len(all_groups) + len(background), spec.d_w, rng)
    word_rows = np.zeros((spec.n_classes, spec.d_w))
    pos = {n: i for i, n in enumerate(names)}
    def member_vector(centroid: np.ndarray) -> np.ndarray:
        # word_noise is the total perturbation norm relative to the unit
        # centroid, so same-group cosines stay near 1/(1 + word_noise^2)
        # regardless of d_w
        noise = rng.normal(size=spec.d_w)
        v = centroid + spec.word_noise * noise / np.linalg.norm(noise)
        return spec.word_scale * v / np.linalg.norm(v)

    for g, group in enumerate(all_groups):
        for c in group:
            word_rows[pos[c]] = member_vector(centroids[g])
    for b, c in enumerate(background):
        word_rows[pos[c]] = member_vector(centroids[len(all_groups) + b])
    table = WordTable(names, word_rows)

    cluster_mean: dict[str, np.ndarray] = {}
    for pairs, members in ((train_pairs, grouped_train), (test_pairs, test_members)):
        paired = {c for ab in pairs for c in ab}
        for a, b in pairs:
            mu = spec.cluster_scale * rng.normal(size=spec.d_f)
            cluster_mean[a] = mu
            cluster_mean[b] = mu
        for c in members:
            if c not in paired:
                cluster_mean[c] = spec.cluster_scale * rng.normal(size=spec.d_f)
    for c in background:
        cluster_mean[c] = spec.cluster_scale * rng.normal(size=spec.d_f)

    lo, hi = spec.context_size
    slo, shi = spec.size_range
    log_lo, log_hi = np.log(slo), np.log(shi)
    instances: list[SceneInstance] = []
    for c in names:
        if background:
            decoy_pool = [n for n in background if n != c]
        else:
            decoy_pool = [n for n in names if n != c and n not in affinity[c]]
        for _ in range(spec.instances_per_class):
            size = float(np.exp(rng.uniform(log_lo, log_hi)))
            mult = 1.0
            if spec.degrade_small and log_hi > log_lo:
                # ramp over the lower half of the log-size range only, so
                # large instances stay clean
                t = (np.log(size) - log_lo) / (log_hi - log_lo)
                mult = 1.0 + spec.degrade_strength * max(0.0, 1.0 - t / 0.5)
            x = cluster_mean[c] + spec.feature_noise * mult * rng.normal(size=spec.d_f)

            n_s = int(rng.integers(lo, hi + 1))
            if spec.informative_per_context is not None:
                k_inf = min(spec.informative_per_context, n_s)
                flags = np.zeros(n_s, dtype=bool)
                flags[rng.permutation(n_s)[:k_inf]] = True
            else:
                flags = rng.random(n_s) < spec.informativeness
            cycle = [affinity[c][j] for j in rng.permutation(len(affinity[c]))]
            context: list[str] = []
            taken = 0
            for slot in range(n_s):
                if flags[slot] and cycle:
                    context.append(cycle[taken % len(cycle)])
                    taken += 1
                elif spec.informative_per_context is not None or background:
                    context.append(decoy_pool[int(rng.integers(len(decoy_pool)))])
                else:
                    context.append(names[int(rng.integers(len(names)))])
            instances.append(SceneInstance(label=c, features=x, context=tuple(context), size=size))

    corpus = Corpus(
        instances=instances,
        word_table=table,
        classes=list(names),
        train_classes=list(train_members),
        test_classes=list(test_members),
        affinity=affinity,
        spec=spec,
    )
    corpus.validate()
    return corpus


def split_classes(classes, word_table: WordTable, test_fraction: float, sim_threshold: float = 0.75,
                  rng: np.random.Generator | None = None) -> tuple[list[str], list[str]]:
    """Random class partition, then drop test classes too similar to train.

    A test class is removed when its cosine similarity to ANY train class is
    strictly greater than sim_threshold; a similarity of exactly the
    threshold is retained.
    """
    classes = list(classes)
    for c in classes:
        if c not in word_table:
            raise DomainError(f"class {c!r} not in word table")
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = rng or np.random.default_rng(0)
    order = [classes[i] for i in rng.permutation(len(classes))]
    n_test = max(1, int(round(test_fraction * len(classes))))
    test_raw = order[:n_test]
    train = order[n_test:]
    test = []
    for t in test_raw:
        tv = word_table.vector(t)
        if all(cosine_similarity(tv, word_table.vector(tr)) <= sim_threshold for tr in train):
            test.append(t)
    if not test:
        raise DomainError(
            "similarity filter removed every test class; lower sim_threshold or raise test_fraction"
        )
    return train, test


def filter_rare(corpus: Corpus, min_count: int = 10) -> Corpus:
    """Drop classes with fewer than min_count instances as focal classes.

    Their instances are pruned and they leave the class split, but context
    labels referring to them are kept as-is (they stay in the word table).
    """
    if min_count < 1:
        raise DomainError(f"min_count must be at least 1, got {min_count}")
    counts: dict[str, int] = {c: 0 for c in corpus.classes}
    for inst in corpus.instances:
        counts[inst.label] += 1
    keep = {c for c in corpus.classes if counts[c] >= min_count}
    return Corpus(
        instances=[i for i in corpus.instances if i.label in keep],
        word_table=corpus.word_table,
        classes=[c for c in corpus.classes if c in keep],
        train_classes=[c for c in corpus.train_classes if c in keep],
        test_classes=[c for c in corpus.test_classes if c in keep],
        affinity=dict(corpus.affinity),
        spec=corpus.spec,
    )


def save_corpus(corpus: Corpus, path) -> None:
    header = {
        "schema": CORPUS_SCHEMA,
        "spec": corpus.spec.to_dict() if corpus.spec is not None else None,
        "classes": corpus.classes,
        "train_classes": corpus.train_classes,
        "test_classes": corpus.test_classes,
        "affinity": {c: list(v) for c, v in corpus.affinity.items()},
        "word_table": {
            "names": corpus.word_table.names,
            "vectors": corpus.word_table.vectors.tolist(),
        },
    }
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")))
        fh.write("\n")
        for inst in corpus.instances:
            rec = {
                "class": inst.label,
                "features": inst.features.tolist(),
                "context": list(inst.context),
                "size": inst.size,
            }
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def load_corpus(path) -> Corpus:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty corpus file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line 1: bad header ({exc})") from None
    if not isinstance(header, dict) or header.get("schema") != CORPUS_SCHEMA:
        raise FormatError(f"{path}: unsupported corpus schema {header.get('schema') if isinstance(header, dict) else header!r}")
    try:
        table = WordTable(header["word_table"]["names"], header["word_table"]["vectors"])
        spec = None if header.get("spec") is None else CorpusSpec.from_dict(header["spec"])
        affinity = {c: tuple(v) for c, v in header.get("affinity", {}).items()}
        classes = list(header["classes"])
        train_classes = list(header["train_classes"])
        test_classes = list(header["test_classes"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: header missing field ({exc})") from None

    instances: list[SceneInstance] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            instances.append(
                SceneInstance(
                    label=rec["class"],
                    features=np.asarray(rec["features"], dtype=np.float64),
                    context=tuple(rec["context"]),
                    size=rec.get("size"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: line {lineno}: bad instance record ({exc})") from None

    corpus = Corpus(
        instances=instances,
        word_table=table,
        classes=classes,
        train_classes=train_classes,
        test_classes=test_classes,
        affinity=affinity,
        spec=spec,
    )
    corpus.validate()
    return corpus
