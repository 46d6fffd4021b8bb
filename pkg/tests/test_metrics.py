import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardmono import metrics
from hardmono.errors import ContractError

words = st.text("abcd", max_size=8)
pairs = st.lists(st.tuples(words, words), min_size=1, max_size=10)


def textbook_levenshtein(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[-1][-1]


def true_lcs(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = d[i - 1][j - 1] + 1 if a[i - 1] == b[j - 1] else max(d[i - 1][j], d[i][j - 1])
    return d[-1][-1]


def indel_distance(a, b):
    return len(a) + len(b) - 2 * true_lcs(a, b)


def test_kitten_sitting():
    assert metrics.edit_distance("kitten", "sitting") == 3
    assert metrics.lcs_length("kitten", "sitting") == 5
    assert metrics.fscore("kitten", "sitting") == pytest.approx(10 / 13, abs=1e-15)


def test_identical_strings_score_one():
    assert metrics.lcs_length("abc", "abc") == 3
    assert metrics.fscore("abc", "abc") == 1.0


@given(st.integers(1, 10))
def test_disjoint_equal_length_strings(n):
    c, r = "a" * n, "b" * n
    assert metrics.edit_distance(c, r) == n
    assert metrics.lcs_length(c, r) == n / 2
    assert metrics.fscore(c, r) == pytest.approx(0.5)


def test_empty_prediction_scores_zero():
    assert metrics.fscore("", "abc") == 0.0
    assert metrics.mean_fscore(["", "abc"], ["abc", "abc"]) == 0.5


@given(words)
def test_edit_distance_to_empty(r):
    assert metrics.edit_distance("", r) == len(r)
    assert metrics.edit_distance(r, r) == 0


@given(words, words)
def test_edit_distance_matches_textbook_dp(a, b):
    assert metrics.edit_distance(a, b) == textbook_levenshtein(a, b)


@given(words, words, words)
def test_edit_distance_is_a_metric(a, b, c):
    ab = metrics.edit_distance(a, b)
    assert ab == metrics.edit_distance(b, a)
    assert (ab == 0) == (a == b)
    assert metrics.edit_distance(a, c) <= ab + metrics.edit_distance(b, c)


@given(words, words)
def test_lcs_formula_against_independent_dp(a, b):
    # the closed form is exact for insert/delete distance and an upper bound
    # on the common-subsequence length under unit-cost substitution
    assert 0.5 * (len(a) + len(b) - indel_distance(a, b)) == true_lcs(a, b)
    assert metrics.lcs_length(a, b) >= true_lcs(a, b)


@given(words.filter(len), words.filter(len))
def test_fscore_is_one_iff_exact(c, r):
    fs = metrics.fscore(c, r)
    assert 0.0 <= fs <= 1.0
    assert (fs == 1.0) == (c == r)


@given(pairs)
def test_accuracy_plus_wer_is_one(ps):
    preds, refs = zip(*ps)
    assert metrics.accuracy(preds, refs) + metrics.wer(preds, refs) == pytest.approx(1.0, abs=1e-15)
    report = metrics.evaluate(preds, refs)
    assert report.accuracy + report.wer == pytest.approx(1.0, abs=1e-15)
    assert 0 <= report.mfs <= 1 and report.mld >= 0 and report.per >= 0


def test_accuracy_and_mld_examples():
    assert metrics.accuracy(["ab", "cd"], ["ab", "cd"]) == 1.0
    assert metrics.mld(["ab", "cd"], ["ab", "cd"]) == 0.0
    assert metrics.accuracy(["ab", "xy"], ["ab", "cd"]) == 0.5
    assert metrics.mld(["ab", "xy"], ["ab", "cd"]) == 1.0


def test_per_examples():
    assert metrics.per(["abc"], ["abc"]) == 0.0
    assert metrics.per(["abcdx"], ["abcde"]) == 0.2
    with pytest.raises(ContractError):
        metrics.per([""], [""])


def test_per_is_corpus_level():
    preds, refs = ["ab", "abcdefgh"], ["xb", "abcdefgh"]
    macro = sum(metrics.edit_distance(c, r) / len(r) for c, r in zip(preds, refs)) / len(refs)
    assert metrics.per(preds, refs) == pytest.approx(1 / 10)
    assert macro == pytest.approx(0.25)


@given(st.integers(1, 6), st.lists(st.tuples(words, words), min_size=1, max_size=6))
def test_per_definitions_agree_for_equal_lengths(n, ps):
    preds = [c[:n].ljust(n, "a") for c, _ in ps]
    refs = [r[:n].ljust(n, "b") for _, r in ps]
    macro = sum(metrics.edit_distance(c, r) / len(r) for c, r in zip(preds, refs)) / len(refs)
    assert metrics.per(preds, refs) == pytest.approx(macro)


def test_phoneme_sequences():
    assert metrics.edit_distance(("AE", "K", "SH"), ("AE", "SH")) == 1
    assert metrics.accuracy([("AE",)], [("AE",)]) == 1.0


def test_mismatched_lengths_rejected():
    with pytest.raises(ContractError):
        metrics.accuracy(["a"], [])


def test_report_table_and_dict():
    report = metrics.evaluate(["ab"], ["ab"])
    assert report.to_dict()["count"] == 1
    assert "ACC" in report.table() and "100.00" in report.table()
