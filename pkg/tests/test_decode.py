import math
import sys
from pathlib import Path

import pytest

from bridgekit.decode import (
    DecodeConfig,
    ExternalPathGenerator,
    ReferencePathGenerator,
    generate_path,
)
from bridgekit.errors import NoPathFound, UnknownConcept
from bridgekit.ngram import train_path_model
from bridgekit.sequence import BOS_TOKEN, EOS_TOKEN, SEP_TOKEN, TARGET_TOKEN

from conftest import mk_path

STUB = [sys.executable, str(Path(__file__).parent / "stubs" / "echo_generator.py")]


def exhaustive_config(model, num_samples=5, max_len=7):
    """Settings under which the beam search is provably exhaustive."""
    width = (len(model.concept_tokens) * len(model.relation_tokens) + 1) * 50
    return DecodeConfig(
        top_p=1.0, beam_width=width, num_samples=num_samples, seed=0, max_len=max_len
    )


def enumerate_valid_sequences(model, head, tail, required, max_hops):
    """Brute-force oracle: every alternating body of <= max_hops hops that
    starts at head, ends at tail, and covers the required set, ranked by
    the model probability of the continuation after the head (accumulated
    independently from the count tables, in the same left-to-right order
    the search uses so exact ties agree bitwise)."""
    k = model.order - 1
    prompt = [BOS_TOKEN] * k + [TARGET_TOKEN, tail, SEP_TOKEN]
    concepts = sorted(model.concept_tokens)
    relations = sorted(model.relation_tokens)
    eps = model.smoothing
    v = len(model.vocabulary)

    def raw_logprob(body):
        stream = prompt + list(body) + [EOS_TOKEN]
        total = 0.0
        for i in range(len(prompt) + 1, len(stream)):  # head is given, not scored
            ctx = tuple(stream[i - k : i])
            counter = model.counts.get(ctx, {})
            csum = sum(counter.values())
            if csum == 0:
                p = 1.0 / v
            else:
                p = (counter.get(stream[i], 0) / csum + eps) / (1.0 + eps * v)
            total += math.log(p)
        return total

    results = []

    def rec(body):
        hops = len(body) // 2
        if hops >= 1 and body[-1] == tail and set(required) <= set(body[0::2]):
            results.append((raw_logprob(body), tuple(body)))
        if hops >= max_hops:
            return
        for r in relations:
            for c in concepts:
                rec(body + [r, c])

    rec([head])
    results.sort(key=lambda x: (-x[0], x[1]))
    return results


def test_single_continuation_dominates():
    model = train_path_model([mk_path("a", "IsA", "b")], order=3, smoothing=1e-9)
    out = generate_path(model, "a", "b", decode=exhaustive_config(model, num_samples=1))
    assert out == [mk_path("a", "IsA", "b")]


def test_unknown_concept():
    model = train_path_model([mk_path("a", "IsA", "b")], order=3)
    with pytest.raises(UnknownConcept) as exc:
        generate_path(model, "a", "z")
    assert exc.value.token == "z"
    with pytest.raises(UnknownConcept):
        generate_path(model, "a", "b", required=["zz"])


def test_wc_generation_matches_enumeration_oracle():
    corpus = [mk_path("a", "R1", "m", "R2", "b"), mk_path("a", "R3", "b")]
    model = train_path_model(corpus, order=3, smoothing=1e-6)
    cfg = exhaustive_config(model)
    got = generate_path(model, "a", "b", required=["m"], decode=cfg)
    assert all("m" in p.nodes for p in got)
    assert got[0] == mk_path("a", "R1", "m", "R2", "b")

    oracle = enumerate_valid_sequences(model, "a", "b", ["m"], max_hops=(cfg.max_len - 1) // 2)
    oracle_bodies = [body for _, body in oracle[: cfg.num_samples]]
    got_bodies = [tuple(p.tokens()) for p in got]
    assert got_bodies == oracle_bodies


def test_ht_generation_matches_enumeration_oracle():
    corpus = [
        mk_path("a", "R1", "m", "R2", "b"),
        mk_path("a", "R3", "b"),
        mk_path("m", "R2", "b", "R4", "c"),
    ]
    model = train_path_model(corpus, order=3, smoothing=1e-4)
    cfg = exhaustive_config(model, num_samples=4)
    got = generate_path(model, "a", "b", decode=cfg)
    oracle = enumerate_valid_sequences(model, "a", "b", [], max_hops=(cfg.max_len - 1) // 2)
    assert [tuple(p.tokens()) for p in got] == [body for _, body in oracle[:4]]


def test_generated_paths_terminate_at_tail(fixture_model):
    cfg = DecodeConfig(top_p=1.0, beam_width=40, num_samples=5, seed=1, max_len=9)
    for head, tail in [("n00", "n05"), ("n10", "n03"), ("n42", "n49")]:
        for p in generate_path(fixture_model, head, tail, decode=cfg):
            assert p.head == head
            assert p.tail == tail


def test_wc_constraint_satisfaction(fixture_model):
    cfg = DecodeConfig(top_p=1.0, beam_width=60, num_samples=5, seed=2, max_len=9)
    for head, tail, req in [("n00", "n04", ["n02"]), ("n07", "n14", ["n08"])]:
        got = generate_path(fixture_model, head, tail, required=req, decode=cfg)
        for p in got:
            assert p.head == head and p.tail == tail
            assert set(req) <= set(p.nodes)


def test_generation_is_seeded_and_deterministic(fixture_model):
    cfg = DecodeConfig(temperature=0.7, top_p=0.8, beam_width=3, num_samples=3, seed=11)
    a = generate_path(fixture_model, "n00", "n10", decode=cfg)
    b = generate_path(fixture_model, "n00", "n10", decode=cfg)
    assert a == b


def test_no_path_found_when_budget_too_small():
    corpus = [mk_path("a", "R1", "m", "R2", "b")]
    model = train_path_model(corpus, order=3, smoothing=1e-6)
    # requiring two distinct intermediates cannot fit in one hop
    with pytest.raises(NoPathFound):
        generate_path(
            model,
            "a",
            "b",
            required=["m"],
            decode=DecodeConfig(top_p=1.0, beam_width=50, max_len=3, seed=0),
        )


def test_paths_can_leave_the_graph(fixture_model, fixture_graph):
    # generated paths are not restricted to stored edges
    cfg = DecodeConfig(top_p=1.0, beam_width=80, num_samples=10, seed=5, max_len=7)
    got = generate_path(fixture_model, "n00", "n25", decode=cfg)
    assert any(not p.edges_in_graph(fixture_graph) for p in got)


def test_reference_generator_adapter(fixture_model):
    gen = ReferencePathGenerator(fixture_model, DecodeConfig(top_p=1.0, beam_width=40, seed=0))
    out1 = gen.generate("n00", "n05", num_samples=2, seed=9)
    out2 = gen.generate("n00", "n05", num_samples=2, seed=9)
    assert out1 == out2 and len(out1) <= 2
    assert gen.perplexity(out1[0]) > 0
    assert "n00" in gen.concept_vocab


def test_external_generator_protocol():
    with ExternalPathGenerator(STUB) as gen:
        paths = gen.generate("x", "y", num_samples=3)
        assert [p.line() for p in paths] == ["x IsA y"]  # duplicates collapse
        wc = gen.generate("x", "y", required=["k1", "k2"], num_samples=1)
        assert wc[0].nodes == ("x", "k1", "k2", "y")
        assert gen.perplexity(wc[0]) == 1.0
        canned = gen.generate("sand", "puppy", num_samples=1)
        assert canned[0].line() == "sand AtLocation beach _UsedFor walk _Desires puppy"


def test_external_generator_rejects_nonconforming(tmp_path):
    # generator that answers with the wrong tail: adapter must reject all
    script = tmp_path / "bad_gen.py"
    script.write_text(
        "import sys\n"
        "for line in sys.stdin:\n"
        "    print('[target] zzz [sep] a IsA zzz')\n"
        "    sys.stdout.flush()\n"
    )
    with ExternalPathGenerator([sys.executable, str(script)]) as gen:
        with pytest.raises(NoPathFound):
            gen.generate("a", "b", num_samples=2)


def test_decode_config_validation():
    with pytest.raises(ValueError):
        DecodeConfig(temperature=0.0)
    with pytest.raises(ValueError):
        DecodeConfig(top_p=0.0)
    with pytest.raises(ValueError):
        DecodeConfig(beam_width=0)
    assert DecodeConfig().temperature == 0.7
    assert DecodeConfig().top_p == 0.9
