import random
import sys

import pytest

from bridgekit.augment import (
    AugmentConfig,
    Span,
    SrlFrame,
    SubprocessScorer,
    build_instances,
    create_target,
    filter_augmented,
    truncate_history,
)
from bridgekit.errors import SpanOutOfRange
from bridgekit.pipeline import TransitionInstance


FLORENCE = "the chef trained in florence. the pasta tastes nice here."


def florence_frames():
    return [
        SrlFrame(Span("trained", 9, 16), [Span("the chef", 0, 8), Span("in florence", 17, 28)]),
        SrlFrame(Span("tastes", 40, 46), [Span("the pasta", 30, 39), Span("nice here", 47, 56)]),
    ]


def test_create_target_last_clause():
    assert create_target(FLORENCE, florence_frames()) == "the pasta tastes nice here."


def test_create_target_no_frames():
    assert create_target(FLORENCE, []) is None


def test_create_target_phone_number():
    response = "now i need your phone number"
    frames = [
        SrlFrame(Span("need", 6, 10), [Span("i", 4, 5), Span("your phone number", 11, 28)])
    ]
    assert create_target(response, frames) == "i need your phone number"


def test_create_target_span_out_of_range():
    with pytest.raises(SpanOutOfRange):
        create_target("short", [SrlFrame(Span("nope", 2, 99), [])])
    with pytest.raises(SpanOutOfRange):
        create_target("short", [SrlFrame(Span("x", 3, 3), [])])


def test_clause_is_ordered_token_subsequence():
    rng = random.Random(6)
    words = "alpha bravo charlie delta echo foxtrot golf hotel".split()
    response = " ".join(words)
    for _ in range(50):
        starts = []
        pos = 0
        for w in words:
            starts.append(pos)
            pos += len(w) + 1
        picks = sorted(rng.sample(range(len(words)), rng.randint(1, 4)))
        spans = [Span(words[i], starts[i], starts[i] + len(words[i])) for i in picks]
        frame = SrlFrame(spans[0], spans[1:])
        clause = create_target(response, [frame])
        clause_tokens = clause.rstrip(".").split()
        it = iter(response.split())
        assert all(tok in it for tok in clause_tokens)


def test_latest_predicate_wins():
    response = "aaa bbb ccc"
    early = SrlFrame(Span("aaa", 0, 3), [])
    late = SrlFrame(Span("ccc", 8, 11), [])
    assert create_target(response, [late, early]) == "ccc"
    assert create_target(response, [early, late]) == "ccc"


def test_truncate_history():
    assert truncate_history(["u1", "u2", "u3", "u4", "u5"], 2) == ["u4", "u5"]
    assert truncate_history(["only"], 2) == ["only"]
    assert truncate_history(["a", "b"], 0) == []
    with pytest.raises(ValueError):
        truncate_history([], 2)


def test_build_instances_skips():
    records = [
        {  # usable
            "dialogue": ["hi", "nice weather"],
            "response": FLORENCE,
            "frames": [
                {
                    "predicate": {"text": "tastes", "start": 40, "end": 46},
                    "arguments": [
                        {"text": "the pasta", "start": 30, "end": 39},
                        {"text": "nice here", "start": 47, "end": 56},
                    ],
                }
            ],
        },
        {"dialogue": ["hey"], "response": "no frames here", "frames": []},
        {  # target would equal the whole response
            "dialogue": ["hey"],
            "response": "i need sleep",
            "frames": [
                {
                    "predicate": {"text": "need", "start": 2, "end": 6},
                    "arguments": [
                        {"text": "i", "start": 0, "end": 1},
                        {"text": "sleep", "start": 7, "end": 12},
                    ],
                }
            ],
        },
    ]
    instances, skips = build_instances(records, AugmentConfig())
    assert len(instances) == 1
    assert instances[0].target == "the pasta tastes nice here."
    assert instances[0].context == ["hi", "nice weather"]
    assert {s["reason"] for s in skips} == {"no frames", "target equals whole response"}


def _mk_instances(n):
    return [
        TransitionInstance([f"ctx {i}"], f"target {i}", f"response {i}") for i in range(n)
    ]


def test_filter_constant_scorers():
    instances = _mk_instances(4)
    cfg = AugmentConfig(threshold=0.7)
    assert filter_augmented(instances, lambda c, r, t: 1.0, cfg) == instances
    assert filter_augmented(instances, lambda c, r, t: 0.0, cfg) == []


def test_filter_boundary_is_inclusive():
    instances = _mk_instances(3)
    scores = iter([0.69, 0.70, 0.71])
    kept = filter_augmented(instances, lambda c, r, t: next(scores), AugmentConfig(0.7))
    assert kept == instances[1:]


def test_filter_scorer_failure_drops_row_and_continues():
    instances = _mk_instances(3)

    def flaky(context, response, target):
        if "1" in response:
            raise RuntimeError("boom")
        return 1.0

    log = []
    kept = filter_augmented(instances, flaky, AugmentConfig(0.5), score_log=log)
    assert kept == [instances[0], instances[2]]
    assert any("error" in e for e in log)
    assert sorted(e["index"] for e in log) == [0, 1, 2]


def test_filter_kept_count_monotone_in_threshold():
    instances = _mk_instances(10)
    rng = random.Random(3)
    scores = [rng.random() for _ in instances]

    def scorer(c, r, t):
        return scores[int(r.split()[-1])]

    counts = [
        len(filter_augmented(instances, scorer, AugmentConfig(th)))
        for th in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
    assert counts == sorted(counts, reverse=True)


def test_subprocess_scorer_protocol(tmp_path):
    script = tmp_path / "scorer.py"
    script.write_text(
        "import sys\n"
        "for line in sys.stdin:\n"
        "    context, response, target = line.rstrip('\\n').split('\\t')\n"
        "    print(0.9 if 'good' in response else 0.1)\n"
        "    sys.stdout.flush()\n"
    )
    with SubprocessScorer([sys.executable, str(script)]) as scorer:
        assert scorer("c", "a good reply", "t") == 0.9
        assert scorer("c", "bad", "t") == 0.1
        with pytest.raises(ValueError):
            scorer("has\ttab", "r", "t")


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(threshold=1.5)
