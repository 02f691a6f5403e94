import json

import pytest

from emocal.lexicon import (
    LexiconError,
    TaxonomyError,
    VadPoint,
    load_lexicon,
    load_taxonomy,
    parse_taxonomy,
    resolve_points,
)


@pytest.fixture
def two_word_lexicon(tmp_path):
    path = tmp_path / "vad.tsv"
    path.write_text("joy\t0.98\t0.82\t0.69\ngrief\t0.06\t0.58\t0.27\n", encoding="utf-8")
    return load_lexicon(path)


def _taxonomy_file(tmp_path, categories, name="toy", aliases=None):
    doc = {"name": name, "categories": categories}
    if aliases:
        doc["aliases"] = aliases
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_load_lexicon_round_trip(two_word_lexicon):
    assert len(two_word_lexicon) == 2
    assert two_word_lexicon.lookup("joy") == VadPoint(0.98, 0.82, 0.69)
    assert two_word_lexicon.lookup("grief") == VadPoint(0.06, 0.58, 0.27)


def test_load_lexicon_empty_file(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("", encoding="utf-8")
    assert len(load_lexicon(path)) == 0


def test_load_lexicon_malformed_row_names_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("joy\ta\tb\tc\n", encoding="utf-8")
    with pytest.raises(LexiconError, match="line 1"):
        load_lexicon(path)


def test_load_lexicon_malformed_later_row(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("joy\t0.9\t0.8\t0.7\nawe\t0.9\toops\t0.7\n", encoding="utf-8")
    with pytest.raises(LexiconError, match="line 2"):
        load_lexicon(path)


def test_load_lexicon_skips_header(tmp_path):
    path = tmp_path / "vad.tsv"
    path.write_text("word\tvalence\tarousal\tdominance\njoy\t0.9\t0.8\t0.7\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert len(lex) == 1
    assert "word" not in lex


def test_load_lexicon_lowercases_keys(tmp_path):
    path = tmp_path / "vad.tsv"
    path.write_text("Joy\t0.9\t0.8\t0.7\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert lex.lookup("JOY") == VadPoint(0.9, 0.8, 0.7)


def test_load_lexicon_duplicates_keep_last_and_warn(tmp_path):
    path = tmp_path / "vad.tsv"
    path.write_text("joy\t0.1\t0.1\t0.1\njoy\t0.9\t0.8\t0.7\n", encoding="utf-8")
    with pytest.warns(UserWarning, match="1 duplicate"):
        lex = load_lexicon(path)
    assert len(lex) == 1
    assert lex.n_duplicates == 1
    assert lex.lookup("joy") == VadPoint(0.9, 0.8, 0.7)


def test_load_lexicon_rejects_nan(tmp_path):
    path = tmp_path / "vad.tsv"
    path.write_text("joy\tnan\t0.8\t0.7\n", encoding="utf-8")
    with pytest.raises(LexiconError, match="non-finite"):
        load_lexicon(path)


def test_load_lexicon_missing_file(tmp_path):
    with pytest.raises(LexiconError, match="cannot read"):
        load_lexicon(tmp_path / "nope.tsv")


def test_lookup_absent_key_raises(two_word_lexicon):
    with pytest.raises(KeyError):
        two_word_lexicon.lookup("melancholy")
    assert two_word_lexicon.get("melancholy") is None


def test_load_taxonomy_flat_two(tmp_path):
    path = _taxonomy_file(
        tmp_path,
        [
            {"label": "positive", "lexicon_key": "positive", "parent": None},
            {"label": "negative", "lexicon_key": "negative", "parent": None},
        ],
    )
    tax = load_taxonomy(path)
    assert not tax.hierarchical
    assert len(tax) == 2
    assert tax.labels() == ["positive", "negative"]


def test_load_taxonomy_mikels_eight(tmp_path):
    labels = [
        "amusement",
        "anger",
        "awe",
        "contentment",
        "disgust",
        "excitement",
        "fear",
        "sadness",
    ]
    path = _taxonomy_file(tmp_path, [{"label": l, "lexicon_key": l} for l in labels])
    tax = load_taxonomy(path)
    assert len(tax) == 8
    assert not tax.hierarchical


def test_load_taxonomy_inconsistent_hierarchy(tmp_path):
    path = _taxonomy_file(
        tmp_path,
        [
            {"label": "joy", "lexicon_key": "joy", "parent": "positive"},
            {"label": "grief", "lexicon_key": "grief", "parent": None},
        ],
    )
    with pytest.raises(TaxonomyError, match="inconsistent hierarchy"):
        load_taxonomy(path)


def test_load_taxonomy_hierarchical_flag(tmp_path):
    path = _taxonomy_file(
        tmp_path,
        [
            {"label": "joy", "lexicon_key": "joy", "parent": "positive"},
            {"label": "grief", "lexicon_key": "grief", "parent": "negative"},
        ],
    )
    tax = load_taxonomy(path)
    assert tax.hierarchical
    assert tax.parent_map() == {"joy": "positive", "grief": "negative"}


def test_load_taxonomy_duplicate_labels(tmp_path):
    path = _taxonomy_file(
        tmp_path,
        [{"label": "Joy", "lexicon_key": "joy"}, {"label": "joy", "lexicon_key": "joy"}],
    )
    with pytest.raises(TaxonomyError, match="duplicate label"):
        load_taxonomy(path)


def test_load_taxonomy_too_few(tmp_path):
    path = _taxonomy_file(tmp_path, [{"label": "joy", "lexicon_key": "joy"}])
    with pytest.raises(TaxonomyError, match="at least 2"):
        load_taxonomy(path)


def test_multiword_label_needs_explicit_key():
    with pytest.raises(TaxonomyError, match="explicit lexicon_key"):
        parse_taxonomy(
            {"categories": [{"label": "quiet joy"}, {"label": "grief"}]}
        )
    tax = parse_taxonomy(
        {
            "categories": [
                {"label": "quiet joy", "lexicon_key": "serenity"},
                {"label": "grief"},
            ]
        }
    )
    assert tax.categories[0].lexicon_key == "serenity"
    assert tax.categories[1].lexicon_key == "grief"


def test_resolve_points_preserves_order(tmp_path, two_word_lexicon):
    path = _taxonomy_file(
        tmp_path,
        [{"label": "Joy", "lexicon_key": "joy"}, {"label": "Grief", "lexicon_key": "grief"}],
    )
    points = resolve_points(load_taxonomy(path), two_word_lexicon)
    assert points == [
        ("Joy", VadPoint(0.98, 0.82, 0.69)),
        ("Grief", VadPoint(0.06, 0.58, 0.27)),
    ]


def test_resolve_points_lists_all_missing(tmp_path, two_word_lexicon):
    path = _taxonomy_file(
        tmp_path,
        [
            {"label": "melancholy", "lexicon_key": "melancholy"},
            {"label": "elation", "lexicon_key": "elation"},
            {"label": "joy", "lexicon_key": "joy"},
        ],
    )
    with pytest.raises(LexiconError) as err:
        resolve_points(load_taxonomy(path), two_word_lexicon)
    assert "melancholy" in str(err.value) and "elation" in str(err.value)
    assert err.value.code == "missing_keys"


def test_resolve_points_duplicate_keys_allowed(tmp_path, two_word_lexicon):
    path = _taxonomy_file(
        tmp_path,
        [{"label": "happy", "lexicon_key": "joy"}, {"label": "joyful", "lexicon_key": "joy"}],
    )
    points = resolve_points(load_taxonomy(path), two_word_lexicon)
    assert points[0][1] == points[1][1]
