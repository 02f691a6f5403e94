import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emocal.errors import EmocalError, FormatViolationError
from emocal.transcript import (
    RecordError,
    STEP_KINDS,
    Transcript,
    parse,
    read_records,
    serialize,
    write_records,
)

GOOD = """<think>
<element>a lone tree on a hill</element>
<human>no people are present</human>
<context>storm clouds gather behind the ridge</context>
<interaction>the dark sky looms over the small tree</interaction>
<analysis>the scene reads as foreboding and bleak</analysis>
</think>
<answer>fear</answer>
<confidence>0.87</confidence>"""


def make_steps(**overrides):
    steps = {
        "element": "tree",
        "human": "none visible",
        "context": "storm light",
        "interaction": "sky dwarfs tree",
        "analysis": "bleak overall",
    }
    steps.update(overrides)
    return steps


def test_well_formed():
    t, verdict = parse(GOOD)
    assert verdict.ok
    assert verdict.violations == ()
    assert t.answer == "fear"
    assert t.confidence == 0.87
    assert set(t.steps) == set(STEP_KINDS)
    assert t.steps["element"] == "a lone tree on a hill"


def test_no_confidence_is_still_ok():
    raw = GOOD.rsplit("\n", 1)[0]
    t, verdict = parse(raw)
    assert verdict.ok
    assert t.confidence is None


def test_missing_interaction():
    raw = GOOD.replace("<interaction>the dark sky looms over the small tree</interaction>\n", "")
    _, verdict = parse(raw)
    assert not verdict.ok
    assert "missing_step:interaction" in verdict.violations


def test_confidence_out_of_range():
    raw = GOOD.replace("0.87", "1.5")
    t, verdict = parse(raw)
    assert not verdict.ok
    assert "confidence_out_of_range" in verdict.violations
    assert t.confidence is None


def test_strict_mode_raises():
    with pytest.raises(FormatViolationError) as err:
        parse(GOOD.replace("<answer>fear</answer>", ""), strict=True)
    assert "missing_answer" in err.value.violations


def test_whitespace_between_tags_is_fine():
    raw = GOOD.replace("\n", "\n\n  ")
    _, verdict = parse(raw)
    assert verdict.ok


def test_single_line_layout_is_fine():
    raw = GOOD.replace("\n", " ")
    _, verdict = parse(raw)
    assert verdict.ok


def _drop(tag_body):
    return lambda raw: raw.replace(tag_body + "\n", "").replace(tag_body, "")


def _duplicate(tag_body):
    return lambda raw: raw.replace(tag_body, tag_body + "\n" + tag_body)


MUTATIONS = [
    ("drop element", _drop("<element>a lone tree on a hill</element>"), "missing_step:element"),
    ("drop human", _drop("<human>no people are present</human>"), "missing_step:human"),
    (
        "drop context",
        _drop("<context>storm clouds gather behind the ridge</context>"),
        "missing_step:context",
    ),
    (
        "drop interaction",
        _drop("<interaction>the dark sky looms over the small tree</interaction>"),
        "missing_step:interaction",
    ),
    (
        "drop analysis",
        _drop("<analysis>the scene reads as foreboding and bleak</analysis>"),
        "missing_step:analysis",
    ),
    (
        "swap element/human",
        lambda raw: raw.replace(
            "<element>a lone tree on a hill</element>\n<human>no people are present</human>",
            "<human>no people are present</human>\n<element>a lone tree on a hill</element>",
        ),
        "step_order",
    ),
    (
        "swap interaction/analysis",
        lambda raw: raw.replace(
            "<interaction>the dark sky looms over the small tree</interaction>\n"
            "<analysis>the scene reads as foreboding and bleak</analysis>",
            "<analysis>the scene reads as foreboding and bleak</analysis>\n"
            "<interaction>the dark sky looms over the small tree</interaction>",
        ),
        "step_order",
    ),
    (
        "duplicate element",
        _duplicate("<element>a lone tree on a hill</element>"),
        "multiple_step:element",
    ),
    (
        "empty human",
        lambda raw: raw.replace("no people are present", ""),
        "empty_step:human",
    ),
    (
        "whitespace-only analysis",
        lambda raw: raw.replace("the scene reads as foreboding and bleak", "   "),
        "empty_step:analysis",
    ),
    ("drop think open", lambda raw: raw.replace("<think>\n", ""), "missing_think"),
    ("drop think close", lambda raw: raw.replace("\n</think>", ""), "missing_think"),
    (
        "duplicate think block",
        lambda raw: raw.replace("<answer>", "<think><element>x</element></think>\n<answer>", 1),
        "multiple_think",
    ),
    (
        "nested think",
        lambda raw: raw.replace(
            "<element>a lone tree on a hill</element>",
            "<element>a lone <think>tree</think> on a hill</element>",
        ),
        "multiple_think",
    ),
    ("drop answer", _drop("<answer>fear</answer>"), "missing_answer"),
    ("duplicate answer", _duplicate("<answer>fear</answer>"), "multiple_answer"),
    ("empty answer", lambda raw: raw.replace("<answer>fear</answer>", "<answer> </answer>"), "empty_answer"),
    (
        "answer before think",
        lambda raw: "<answer>fear</answer>\n"
        + raw.replace("<answer>fear</answer>\n", ""),
        "answer_position",
    ),
    (
        "confidence before answer",
        lambda raw: raw.replace(
            "<answer>fear</answer>\n<confidence>0.87</confidence>",
            "<confidence>0.87</confidence>\n<answer>fear</answer>",
        ),
        "confidence_position",
    ),
    (
        "confidence inside think",
        lambda raw: raw.replace(
            "</think>\n<answer>fear</answer>\n<confidence>0.87</confidence>",
            "<confidence>0.87</confidence>\n</think>\n<answer>fear</answer>",
        ),
        "confidence_position",
    ),
    (
        "duplicate confidence",
        _duplicate("<confidence>0.87</confidence>"),
        "multiple_confidence",
    ),
    ("confidence not numeric", lambda raw: raw.replace("0.87", "very sure"), "confidence_not_numeric"),
    ("confidence above one", lambda raw: raw.replace("0.87", "1.5"), "confidence_out_of_range"),
    ("confidence negative", lambda raw: raw.replace("0.87", "-0.2"), "confidence_out_of_range"),
    ("confidence scientific", lambda raw: raw.replace("0.87", "8.7e-1"), "confidence_not_numeric"),
    ("trailing junk", lambda raw: raw + "\nBy the way,", "stray_text"),
    (
        "junk between think and answer",
        lambda raw: raw.replace("</think>\n<answer>", "</think>\nhmm\n<answer>"),
        "stray_text",
    ),
    (
        "junk inside think",
        lambda raw: raw.replace("</element>\n<human>", "</element>\nloose words\n<human>"),
        "stray_text_in_think",
    ),
]


@pytest.mark.parametrize("name,mutate,expected", MUTATIONS, ids=[m[0] for m in MUTATIONS])
def test_mutation_flips_verdict(name, mutate, expected):
    mutated = mutate(GOOD)
    assert mutated != GOOD, name
    _, verdict = parse(mutated)
    assert not verdict.ok, name
    assert expected in verdict.violations, f"{name}: {verdict.violations}"


def test_mutation_suite_size():
    assert len(MUTATIONS) >= 20


def test_serialize_round_trip_minimal():
    t = Transcript(raw="", steps=make_steps(), answer="awe")
    text = serialize(t)
    parsed, verdict = parse(text)
    assert verdict.ok
    assert parsed.steps == make_steps()
    assert parsed.answer == "awe"
    assert parsed.confidence is None


def test_serialize_confidence_two_decimals():
    t = Transcript(raw="", steps=make_steps(), answer="awe", confidence=0.9)
    assert serialize(t).endswith("<confidence>0.90</confidence>")


def test_serialize_missing_answer():
    with pytest.raises(EmocalError) as err:
        serialize(Transcript(raw="", steps=make_steps(), answer=None))
    assert err.value.code == "missing_field"


def test_serialize_missing_step():
    steps = make_steps()
    del steps["context"]
    with pytest.raises(EmocalError, match="context"):
        serialize(Transcript(raw="", steps=steps, answer="awe"))


def test_serialize_rejects_embedded_tags():
    with pytest.raises(EmocalError) as err:
        serialize(Transcript(raw="", steps=make_steps(element="x </think> y"), answer="awe"))
    assert err.value.code == "tag_in_field"


_body = st.text(
    alphabet=st.characters(blacklist_characters="<>", blacklist_categories=("Cs", "Cc")),
    min_size=1,
    max_size=40,
).map(str.strip).filter(bool)


@settings(max_examples=100, deadline=None)
@given(
    element=_body,
    human=_body,
    context=_body,
    interaction=_body,
    analysis=_body,
    answer=_body,
    confidence=st.one_of(st.none(), st.integers(min_value=0, max_value=100).map(lambda i: i / 100)),
)
def test_round_trip_property(element, human, context, interaction, analysis, answer, confidence):
    t = Transcript(
        raw="",
        steps={
            "element": element,
            "human": human,
            "context": context,
            "interaction": interaction,
            "analysis": analysis,
        },
        answer=answer,
        confidence=confidence,
    )
    parsed, verdict = parse(serialize(t))
    assert verdict.ok
    assert parsed.steps == t.steps
    assert parsed.answer == answer
    if confidence is None:
        assert parsed.confidence is None
    else:
        assert parsed.confidence == pytest.approx(confidence, abs=5e-3)


def record(idx, raw=GOOD, **extra):
    return {
        "id": f"r{idx}",
        "task": "toy",
        "raw": raw,
        "gold_label": "fear",
        "token_probs": None,
        "mean_prob": 0.8,
        **extra,
    }


def test_read_records_in_order(tmp_path):
    path = tmp_path / "records.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for i in range(3):
            f.write(json.dumps(record(i)) + "\n")
    got = list(read_records(path))
    assert [meta["id"] for _, meta in got] == ["r0", "r1", "r2"]
    assert all(t.answer == "fear" for t, _ in got)


def test_read_records_reports_bad_line(tmp_path):
    path = tmp_path / "records.jsonl"
    lines = [json.dumps(record(1)), "{not json", json.dumps(record(3))]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(RecordError, match="line 2"):
        list(read_records(path))
    errors: list[str] = []
    got = list(read_records(path, errors=errors))
    assert [meta["id"] for _, meta in got] == ["r1", "r3"]
    assert len(errors) == 1 and "line 2" in errors[0]


def test_read_records_empty_file(tmp_path):
    path = tmp_path / "records.jsonl"
    path.write_text("", encoding="utf-8")
    assert list(read_records(path)) == []


def test_write_records_round_trip_preserves_unknown_fields(tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text(json.dumps(record(1, extra_field={"nested": [1, 2]})) + "\n", encoding="utf-8")
    out = tmp_path / "out.jsonl"
    write_records(out, read_records(src))
    loaded = json.loads(out.read_text(encoding="utf-8"))
    assert loaded["extra_field"] == {"nested": [1, 2]}
    assert loaded["answer"] == "fear"
    assert loaded["confidence"] == 0.87
    assert loaded["format_ok"] is True
