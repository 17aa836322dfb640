import numpy as np
import pytest
from hypothesis import given, strategies as st

from codeintent.labeling import (
    LabelMatrix,
    LearningFunctionSpec,
    LFCompileError,
    apply_lf,
    build_label_matrix,
    compile_lf,
    default_lfs,
    lf_diagnostics,
    load_lf_specs,
)

# (query, lf name, label) for every example query listed with the heuristics
EXAMPLE_QUERIES = [
    ("c# example of restful post api call form url encode", "api", 1),
    ("java immutablelist api", "api", 1),
    ("500 internal server error in web api c#", "debug", 0),
    ("java createnewfile not working", "debug", 0),
    ("c# asp.net how to implement click event for textbox", "howto", 1),
    ("how to do quicksort in java", "howto", 1),
    ("block body vs lambda method c#", "learn", 0),
    ("what is the order of precedence for java math", "learn", 0),
    ("c# .net install .msi remotely", "install", 0),
    ("download selenium web driver jars for java", "install", 0),
    ("proxysocket c# code sample", "code_search", 1),
    ("java void method no parameters example", "code_search", 1),
    ("c# array questions for interviews", "non_programming", 0),
    ("part time java coding jobs", "non_programming", 0),
    ("cs7038 wcf c# failed to emit module", "error_codes", 0),
    ("java.io.eofexception: postman", "error_codes", 0),
]


@pytest.fixture(scope="module")
def lfs():
    return {lf.name: lf for lf in default_lfs()}


@pytest.mark.parametrize("query, name, label", EXAMPLE_QUERIES)
def test_table_examples_trigger(lfs, query, name, label):
    assert apply_lf(lfs[name], query) == label


def test_default_set_has_eight_lfs():
    specs = load_lf_specs()
    assert len(specs) == 8
    assert {s.emit_label for s in specs} == {0, 1}


def test_howto_fires_on_token_only():
    lf = compile_lf(LearningFunctionSpec("howto", 1, ("how",)))
    assert lf("how to sort") == 1
    assert lf("showing lists") == -1
    assert lf("java immutablelist api") == -1


def test_keyword_boundaries():
    lf = compile_lf(LearningFunctionSpec("api", 1, ("api", "not working")))
    assert lf("rapid prototyping") == -1
    assert lf("web-api call") == 1
    assert lf("it is not working") == 1
    assert lf("not workingset") == -1


def test_multiple_keywords_one_vote():
    lf = compile_lf(LearningFunctionSpec("debug", 0, ("error", "exception")))
    assert lf("error exception error") == 0


def test_bad_regex_names_lf_and_pattern():
    with pytest.raises(LFCompileError, match=r"broken.*\(\["):
        compile_lf(LearningFunctionSpec("broken", 1, regexes=("([",)))


def test_empty_spec_rejected():
    with pytest.raises(ValueError):
        LearningFunctionSpec("empty", 1)


def test_bad_emit_label_rejected():
    with pytest.raises(ValueError):
        LearningFunctionSpec("x", -1, ("a",))


def test_row_for_howto_query(lfs):
    matrix = build_label_matrix([(1, "how to do quicksort in java")], list(lfs.values()))
    expected = [1 if name == "howto" else -1 for name in lfs]
    assert matrix.values.tolist() == [expected]


def test_matrix_shape_and_order(lfs):
    items = [(i, q) for i, (q, _, _) in enumerate(EXAMPLE_QUERIES)]
    matrix = build_label_matrix(items, list(lfs.values()))
    assert matrix.shape == (16, 8)
    assert matrix.query_ids == list(range(16))
    assert matrix.lf_names == list(lfs)


def test_empty_lf_list():
    with pytest.raises(ValueError):
        build_label_matrix([(1, "x")], [])


queries = st.lists(st.text(alphabet="abcdefghijklmnopqrstuvwxyz .#", max_size=40), min_size=1, max_size=10)


@given(queries, st.text(alphabet="abcdefghijklmnopqrstuvwxyz .#", max_size=40))
def test_rows_are_local(lfs, qs, extra):
    lf_list = list(lfs.values())
    base = build_label_matrix(list(enumerate(qs)), lf_list)
    grown = build_label_matrix(list(enumerate(qs + [extra])), lf_list)
    assert np.array_equal(grown.values[:-1], base.values)
    assert np.isin(grown.values, (-1, 0, 1)).all()


def test_label_matrix_validation():
    with pytest.raises(ValueError):
        LabelMatrix(np.array([[2]]), ["a"], [1])
    with pytest.raises(ValueError):
        LabelMatrix(np.array([[1, 0]]), ["a"], [1])


def test_label_matrix_round_trip(tmp_path, lfs):
    m = build_label_matrix([(i, q) for i, (q, _, _) in enumerate(EXAMPLE_QUERIES)], list(lfs.values()))
    m.save(tmp_path / "m.tsv")
    back = LabelMatrix.load(tmp_path / "m.tsv")
    assert np.array_equal(back.values, m.values)
    assert back.lf_names == m.lf_names and back.query_ids == m.query_ids


def _matrix(cols):
    values = np.array(cols).T
    return LabelMatrix(values, [f"c{j}" for j in range(values.shape[1])], list(range(values.shape[0])))


def test_diagnostics_examples():
    d = lf_diagnostics(_matrix([[-1, -1], [1, 1], [1, 1]]))
    assert d.coverage[0] == 0
    assert d.overlap[1, 2] == 1 and d.conflict[1, 2] == 0
    d = lf_diagnostics(_matrix([[1, 1], [0, -1]]))
    assert d.overlap[0, 1] == 0.5 and d.conflict[0, 1] == 0.5


@given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3), min_size=1, max_size=30))
def test_diagnostics_self_consistency(rows):
    d = lf_diagnostics(LabelMatrix(np.array(rows), ["a", "b", "c"], list(range(len(rows)))))
    assert np.allclose(np.diag(d.conflict), 0)
    assert np.allclose(np.diag(d.overlap), d.coverage)
    for arr in (d.coverage, d.overlap, d.conflict):
        assert ((arr >= 0) & (arr <= 1)).all()
    assert "coverage" in d.summary()
