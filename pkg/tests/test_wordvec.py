import io
import math

import numpy as np
import pytest

from contextproto.errors import DomainError, FormatError, ParseError, UnknownLabelError
from contextproto.wordvec import WordTable, cosine_similarity, load_word_table, save_word_table


def test_load_two_line_file():
    table = load_word_table(io.StringIO("cat\t0.1 0.2 0.3\ndog\t1 2 3\n"))
    assert len(table) == 2
    assert table.d_w == 3
    np.testing.assert_array_equal(table.vector("dog"), [1.0, 2.0, 3.0])


def test_duplicate_name_rejected():
    with pytest.raises(FormatError, match="duplicate"):
        load_word_table(io.StringIO("cat\t1 2\ncat\t3 4\n"))


def test_malformed_line_reports_line_number():
    with pytest.raises(ParseError, match="line 2"):
        load_word_table(io.StringIO("cat\t1 2\nno-tab-here\n"))
    with pytest.raises(ParseError, match="line 1"):
        load_word_table(io.StringIO("cat\t1 two\n"))


def test_inconsistent_dimension_rejected():
    with pytest.raises(FormatError, match="line 2"):
        load_word_table(io.StringIO("cat\t1 2 3\ndog\t1 2\n"))


def test_unknown_lookup_is_an_error_not_zero():
    table = load_word_table(io.StringIO("cat\t1 2\n"))
    with pytest.raises(UnknownLabelError, match="zebra"):
        table.vector("zebra")


def test_large_table_round_trips_bit_exactly(tmp_path):
    rng = np.random.default_rng(42)
    names = [f"class{i:04d}" for i in range(1211)]
    table = WordTable(names, rng.normal(size=(1211, 300)))
    path = tmp_path / "words.tsv"
    save_word_table(table, path)
    loaded = load_word_table(path)
    assert loaded.names == table.names
    assert loaded.vectors.tobytes() == table.vectors.tobytes()


def test_vectors_are_frozen():
    table = WordTable(["a"], [[1.0, 2.0]])
    with pytest.raises((ValueError, RuntimeError)):
        table.vectors[0, 0] = 9.0


def test_context_matrix_column_order():
    table = WordTable(["a", "b"], [[1.0, 0.0], [0.0, 1.0]])
    mat = table.context_matrix(["b", "a", "b"])
    np.testing.assert_array_equal(mat, [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])


def test_cosine_similarity_closed_forms():
    assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)
    assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(math.sqrt(0.5), abs=1e-4)


def test_cosine_similarity_symmetric_and_scale_invariant():
    rng = np.random.default_rng(3)
    for _ in range(100):
        u = rng.normal(size=6)
        v = rng.normal(size=6)
        alpha = float(rng.uniform(0.1, 10.0))
        assert cosine_similarity(u, v) == pytest.approx(cosine_similarity(v, u), abs=1e-12)
        assert cosine_similarity(alpha * u, v) == pytest.approx(cosine_similarity(u, v), abs=1e-12)


def test_cosine_similarity_zero_vector_rejected():
    with pytest.raises(DomainError):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])
