import json
import math

import numpy as np
import pytest

from contextproto.corpus import Corpus, CorpusSpec, SceneInstance, filter_rare, generate_corpus, \
    load_corpus, save_corpus, split_classes
from contextproto.episodes import EpisodeSpec, sample_episode
from contextproto.errors import ConfigError, DomainError, FormatError, IntegrityError, ParseError
from contextproto.wordvec import WordTable, cosine_similarity


def test_generation_is_deterministic_and_files_are_byte_identical(tmp_path):
    spec = CorpusSpec(n_classes=12, instances_per_class=8, d_f=5, d_w=8, seed=3)
    a = generate_corpus(spec)
    b = generate_corpus(spec)
    assert a.equals(b)
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_corpus(a, pa)
    save_corpus(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_round_trip_is_lossless(tmp_path):
    corpus = generate_corpus(CorpusSpec(n_classes=10, instances_per_class=6, d_f=4, d_w=8, seed=9))
    path = tmp_path / "c.jsonl"
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded.equals(corpus)
    save_corpus(loaded, tmp_path / "c2.jsonl")
    assert (tmp_path / "c2.jsonl").read_bytes() == path.read_bytes()


def test_unresolvable_context_label_fails_integrity_check(tmp_path):
    corpus = generate_corpus(CorpusSpec(n_classes=8, instances_per_class=5, d_f=4, d_w=8, seed=1))
    bad = Corpus(
        instances=corpus.instances + [SceneInstance("obj000", np.zeros(4), ("ghost",))],
        word_table=corpus.word_table, classes=corpus.classes,
        train_classes=corpus.train_classes, test_classes=corpus.test_classes,
        affinity=corpus.affinity, spec=corpus.spec,
    )
    path = tmp_path / "bad.jsonl"
    save_corpus(bad, path)
    with pytest.raises(IntegrityError, match="ghost"):
        load_corpus(path)


def test_truncated_file_is_a_parse_error(tmp_path):
    corpus = generate_corpus(CorpusSpec(n_classes=8, instances_per_class=5, d_f=4, d_w=8, seed=1))
    path = tmp_path / "t.jsonl"
    save_corpus(corpus, path)
    text = path.read_text()
    path.write_text(text[: len(text) - 40])
    with pytest.raises(ParseError, match="line"):
        load_corpus(path)


def test_empty_and_wrong_schema_files(tmp_path):
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_corpus(empty)
    wrong = tmp_path / "w.jsonl"
    wrong.write_text(json.dumps({"schema": "something-else"}) + "\n")
    with pytest.raises(FormatError, match="schema"):
        load_corpus(wrong)


def test_spec_validation_rejects_bad_knobs():
    with pytest.raises(ConfigError):
        generate_corpus(CorpusSpec(n_classes=3))
    with pytest.raises(ConfigError):
        CorpusSpec(informativeness=1.5).validate()
    with pytest.raises(ConfigError):
        CorpusSpec(context_size=(5, 3)).validate()
    with pytest.raises(ConfigError):
        CorpusSpec(informative_per_context=4, context_size=(3, 8)).validate()
    with pytest.raises(ConfigError):
        CorpusSpec(word_scale=0.0).validate()
    with pytest.raises(ConfigError):
        CorpusSpec(background_classes=1).validate()


def test_full_ambiguity_needs_even_split_sizes():
    # 10 classes at test_fraction 0.5 -> two splits of 5, unpairable
    with pytest.raises(ConfigError, match="even"):
        generate_corpus(CorpusSpec(n_classes=10, instances_per_class=4, d_f=4, d_w=8,
                                   test_fraction=0.5, visual_ambiguity=1.0, seed=0))


def test_context_labels_and_split_are_consistent():
    spec = CorpusSpec(n_classes=16, instances_per_class=6, d_f=4, d_w=8,
                      context_size=(2, 5), test_fraction=0.25, seed=4)
    corpus = generate_corpus(spec)
    corpus.validate()
    assert set(corpus.train_classes) | set(corpus.test_classes) == set(corpus.classes)
    assert not set(corpus.train_classes) & set(corpus.test_classes)
    for inst in corpus.instances:
        assert len(inst.context) >= 2 and len(inst.context) <= 5
        assert all(l in corpus.word_table for l in inst.context)
        assert inst.label not in corpus.affinity[inst.label]


def test_affinity_groups_have_elevated_cosine():
    spec = CorpusSpec(n_classes=20, instances_per_class=4, d_f=4, d_w=16, test_fraction=0.3, seed=6)
    corpus = generate_corpus(spec)
    for cls, group in corpus.affinity.items():
        for other in group:
            assert cosine_similarity(corpus.word_table.vector(cls),
                                     corpus.word_table.vector(other)) > 0.75


def test_word_scale_sets_vector_norms():
    corpus = generate_corpus(CorpusSpec(n_classes=8, instances_per_class=4, d_f=4, d_w=8,
                                        word_scale=3.0, seed=2))
    norms = np.linalg.norm(corpus.word_table.vectors, axis=1)
    np.testing.assert_allclose(norms, 3.0, atol=1e-12)


def test_background_classes_are_never_informative():
    spec = CorpusSpec(n_classes=20, instances_per_class=6, d_f=4, d_w=16, context_size=(4, 4),
                      informative_per_context=2, background_classes=4, test_fraction=0.3, seed=11)
    corpus = generate_corpus(spec)
    backgrounds = {c for c, aff in corpus.affinity.items() if not aff}
    assert len(backgrounds) == 4
    assert backgrounds <= set(corpus.train_classes)
    for inst in corpus.instances:
        informative = [l for l in inst.context if l in corpus.affinity[inst.label]]
        decoys = [l for l in inst.context if l not in corpus.affinity[inst.label]]
        if inst.label not in backgrounds:
            assert len(informative) == 2
        assert all(d in backgrounds for d in decoys)


def test_exact_informative_count_mode():
    spec = CorpusSpec(n_classes=12, instances_per_class=6, d_f=4, d_w=8, context_size=(5, 5),
                      informative_per_context=2, test_fraction=0.5, seed=8)
    corpus = generate_corpus(spec)
    for inst in corpus.instances:
        aff = set(corpus.affinity[inst.label])
        assert sum(l in aff for l in inst.context) == 2


def test_full_informativeness_and_ambiguity_construction():
    spec = CorpusSpec(n_classes=16, instances_per_class=12, d_f=6, d_w=16, context_size=(4, 6),
                      informativeness=1.0, visual_ambiguity=1.0, feature_noise=0.5,
                      test_fraction=0.25, seed=13)
    corpus = generate_corpus(spec)

    # contexts identify the class uniquely: observed label set == affinity set
    affinity_sets = {c: frozenset(a) for c, a in corpus.affinity.items()}
    assert len(set(affinity_sets.values())) == len(affinity_sets)
    for inst in corpus.instances:
        assert set(inst.context) == set(corpus.affinity[inst.label])

    # every visual cluster holds at least 2 classes: each class has a partner
    # whose empirical feature mean is nearby
    means = {c: np.mean([i.features for i in insts], axis=0) for c, insts in corpus.by_class().items()}
    for c in corpus.classes:
        others = [np.linalg.norm(means[c] - means[o]) for o in corpus.classes if o != c]
        assert min(others) < 1.0, f"{c} shares no visual cluster"

    # a context-only exact-match classifier solves 5-way tasks perfectly
    spec_ep = EpisodeSpec(ways=5, shots=1, queries=2)
    correct = total = 0
    for i in range(100):
        ep = sample_episode(corpus, spec_ep, np.random.default_rng((5, i)), split="train")
        for q, target in zip(ep.queries, ep.query_targets):
            scores = [len(set(q.context) & set(corpus.affinity[c])) - len(set(q.context) - set(corpus.affinity[c]))
                      for c in ep.roster]
            correct += int(np.argmax(scores) == target)
            total += 1
    assert correct == total


def test_null_informativeness_has_no_mutual_information():
    spec = CorpusSpec(n_classes=50, instances_per_class=200, d_f=4, d_w=16, context_size=(3, 6),
                      informativeness=0.0, test_fraction=0.2, seed=17)
    corpus = generate_corpus(spec)

    def plugin_mi(pairs):
        joint: dict = {}
        left: dict = {}
        right: dict = {}
        for a, b in pairs:
            joint[(a, b)] = joint.get((a, b), 0) + 1
            left[a] = left.get(a, 0) + 1
            right[b] = right.get(b, 0) + 1
        n = len(pairs)
        mi = 0.0
        for (a, b), c in joint.items():
            p = c / n
            mi += p * math.log(p * n * n / (left[a] * right[b]))
        return mi

    pairs = [(inst.label, l) for inst in corpus.instances for l in inst.context]
    assert len(corpus.instances) == 10_000
    mi = plugin_mi(pairs)
    assert mi < 0.05, f"plug-in MI {mi:.4f} nats"

    informative = generate_corpus(
        CorpusSpec(n_classes=50, instances_per_class=200, d_f=4, d_w=16, context_size=(3, 6),
                   informativeness=0.9, test_fraction=0.2, seed=17))
    pairs = [(inst.label, l) for inst in informative.instances for l in inst.context]
    assert plugin_mi(pairs) > 0.5


def test_split_apart_identical_vectors():
    table = WordTable(["a", "b", "c", "d"], [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    rng = np.random.default_rng(0)
    train, test = split_classes(["a", "b", "c", "d"], table, 0.5, rng=rng)
    for t in test:
        for tr in train:
            assert cosine_similarity(table.vector(t), table.vector(tr)) <= 0.75


def test_similarity_exactly_at_threshold_is_retained():
    # cosine((2,0,0,0,0), (6,5,1,1,1)) = 12 / (2 * 8) = 0.75 exactly in floats
    u = [2.0, 0.0, 0.0, 0.0, 0.0]
    v = [6.0, 5.0, 1.0, 1.0, 1.0]
    assert cosine_similarity(u, v) == 0.75
    table = WordTable(["u", "v"], [u, v])
    kept_somewhere = False
    for seed in range(8):
        train, test = split_classes(["u", "v"], table, 0.5, rng=np.random.default_rng(seed))
        assert len(test) == 1  # never filtered, similarity is not strictly above 0.75
        kept_somewhere = True
    assert kept_somewhere


def test_split_matches_exhaustive_pairwise_oracle():
    rng = np.random.default_rng(23)
    names = [f"c{i}" for i in range(40)]
    table = WordTable(names, rng.normal(size=(40, 6)))
    shuffle_rng = np.random.default_rng(5)
    train, test = split_classes(names, table, 0.4, sim_threshold=0.75, rng=shuffle_rng)

    order = [names[i] for i in np.random.default_rng(5).permutation(40)]
    n_test = round(0.4 * 40)
    raw_test, raw_train = order[:n_test], order[n_test:]
    oracle = []
    for t in raw_test:
        sims = [cosine_similarity(table.vector(t), table.vector(tr)) for tr in raw_train]
        if max(sims) <= 0.75:
            oracle.append(t)
    assert train == raw_train
    assert test == oracle
    for t in test:
        assert all(cosine_similarity(table.vector(t), table.vector(tr)) <= 0.75 for tr in train)


def test_split_with_everything_filtered_is_an_error():
    table = WordTable(["a", "b"], [[1.0, 0.0], [1.0, 1e-12]])
    with pytest.raises(DomainError, match="threshold"):
        split_classes(["a", "b"], table, 0.5, rng=np.random.default_rng(0))


def test_filter_rare_removes_scarce_focal_classes():
    corpus = generate_corpus(CorpusSpec(n_classes=8, instances_per_class=12, d_f=4, d_w=8, seed=3))
    scarce = corpus.classes[0]
    pruned = [i for i in corpus.instances if i.label != scarce] + \
        [i for i in corpus.instances if i.label == scarce][:9]
    smaller = Corpus(instances=pruned, word_table=corpus.word_table, classes=corpus.classes,
                     train_classes=corpus.train_classes, test_classes=corpus.test_classes,
                     affinity=corpus.affinity, spec=corpus.spec)
    filtered = filter_rare(smaller, min_count=10)
    assert scarce not in filtered.classes
    assert all(i.label != scarce for i in filtered.instances)
    counts: dict = {}
    for inst in filtered.instances:
        counts[inst.label] = counts.get(inst.label, 0) + 1
    assert all(v >= 10 for v in counts.values())
    # contexts keep raw labels referring to the removed class
    assert any(scarce in i.context for i in filtered.instances)
    filtered.validate()


def test_filter_rare_with_min_count_one_is_identity():
    corpus = generate_corpus(CorpusSpec(n_classes=8, instances_per_class=5, d_f=4, d_w=8, seed=3))
    assert filter_rare(corpus, min_count=1).equals(corpus)
