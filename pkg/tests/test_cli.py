import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from bridgekit.cli import main, run_steer
from bridgekit.manifest import load_manifest

from conftest import fixture_graph_lines

STUB = str(Path(__file__).parent / "stubs" / "echo_generator.py")


@pytest.fixture()
def workspace(tmp_path):
    (tmp_path / "cn.tsv").write_text("\n".join(fixture_graph_lines()) + "\n")
    instances = [
        {
            "context": ["the sand is hot"],
            "target": "my puppy waits",
            "response": "the beach was great",
            "context_tagged": ["the/DT sand/NN is/VBZ hot/JJ"],
            "target_tagged": "my/PRP$ puppy/NN waits/VBZ",
            "response_tagged": "the/DT beach/NN was/VBD great/JJ",
        },
    ]
    (tmp_path / "inst.jsonl").write_text(
        "".join(json.dumps(r) + "\n" for r in instances)
    )
    docs = ["common words appear everywhere here"] * 20 + ["n00 n01 n02 rare"]
    (tmp_path / "docs.txt").write_text("\n".join(docs) + "\n")
    return tmp_path


def _run(args):
    return main([str(a) for a in args])


def test_ingest_writes_manifest(workspace):
    out = workspace / "g.json"
    assert _run(["ingest", "--assertions", workspace / "cn.tsv", "--out", out]) == 0
    assert out.exists()
    manifest = load_manifest(f"{out}.manifest.json")
    assert manifest["subcommand"] == "ingest"
    assert str(out) in manifest["outputs"]


def test_pipeline_subcommands_and_replay(workspace, capsys):
    g = workspace / "g.json"
    corpus = workspace / "corpus.txt"
    model = workspace / "m.json"
    idf = workspace / "idf.tsv"
    assert _run(["ingest", "--assertions", workspace / "cn.tsv", "--out", g]) == 0
    assert _run(["sample-paths", "--graph", g, "--out", corpus, "--count", 300, "--seed", 7]) == 0
    assert _run(["train-pathlm", "--corpus", corpus, "--out", model]) == 0
    assert _run(["build-idf", "--corpus", workspace / "docs.txt", "--out", idf]) == 0
    capsys.readouterr()

    # gen-path determinism on stdout
    args = ["gen-path", "--model", model, "--head", "n00", "--tail", "n05", "--seed", 7]
    assert _run(args) == 0
    first = capsys.readouterr().out
    assert _run(args) == 0
    assert capsys.readouterr().out == first
    assert first.strip()

    # replay reproduces the corpus byte for byte
    original = corpus.read_bytes()
    corpus.unlink()
    assert _run(["--replay", f"{corpus}.manifest.json"]) == 0
    assert corpus.read_bytes() == original


def test_usage_and_data_error_exit_codes(workspace, capsys):
    assert _run(["no-such-command"]) == 1
    assert _run(["ingest", "--assertions", workspace / "cn.tsv"]) == 1  # missing --out
    err = capsys.readouterr().err
    assert "usage" in err
    # data error: malformed assertions
    bad = workspace / "bad.tsv"
    bad.write_text("only_one_field\n")
    assert _run(["ingest", "--assertions", bad, "--out", workspace / "x.json"]) == 2


def test_config_file_precedence(workspace, capsys):
    g = workspace / "g.json"
    _run(["ingest", "--assertions", workspace / "cn.tsv", "--out", g])
    cfg = workspace / "conf.toml"
    cfg.write_text(
        '[sample-paths]\ngraph = "%s"\ncount = 11\nseed = 1\nk-max = 2\n' % g
    )
    out = workspace / "c.txt"
    # count from flags beats config; graph/seed come from config
    assert _run(["--config", cfg, "sample-paths", "--out", out, "--count", 5]) == 0
    assert len(out.read_text().splitlines()) == 5
    manifest = load_manifest(f"{out}.manifest.json")
    assert manifest["options"]["count"] == 5
    assert manifest["options"]["seed"] == 1


def test_prep_crg_cli(workspace):
    g = workspace / "g.json"
    corpus = workspace / "corpus.txt"
    model = workspace / "m.json"
    idf = workspace / "idf.tsv"
    for args in (
        ["ingest", "--assertions", workspace / "cn.tsv", "--out", g],
        ["sample-paths", "--graph", g, "--out", corpus, "--count", 400, "--seed", 9],
        ["train-pathlm", "--corpus", corpus, "--out", model],
        ["build-idf", "--corpus", workspace / "docs.txt", "--out", idf],
    ):
        assert _run(args) == 0
    out = workspace / "crg.jsonl"
    assert _run(
        [
            "prep-crg", "--instances", workspace / "inst.jsonl", "--model", model,
            "--idf", idf, "--phase", "infer", "--out", out, "--seed", 5,
        ]
    ) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    skips = (workspace / "crg.jsonl.skips.jsonl").read_text().splitlines()
    assert rows or skips
    for row in rows:
        seq = row["crg_sequence"]
        assert seq.index("[target]") < seq.index("[context]")
        assert "[response]" not in seq


def test_synth_eval_probe_clean_cli(workspace, capsys):
    gold = workspace / "gold.jsonl"
    rows = [
        {"context": [f"context {i} alpha"], "target": f"target {i} beta", "response": f"response {i} gamma"}
        for i in range(4)
    ]
    gold.write_text("".join(json.dumps(r) + "\n" for r in rows))
    out = workspace / "tc.jsonl"
    assert _run(["synth-tc", "--instances", gold, "--out", out, "--seed", 3]) == 0
    labeled = [json.loads(l) for l in out.read_text().splitlines()]
    pos = sum(r["label"] == "positive" for r in labeled)
    assert pos == len(labeled) - pos

    evalfile = workspace / "eval.jsonl"
    eval_rows = [
        {"context": "c one", "target": "t one", "hypothesis": "the cat sat",
         "references": ["the cat sat", "a cat sat down"]},
        {"context": "c two", "target": "t two", "hypothesis": "dogs run fast",
         "references": ["dogs run fast", "the dog runs"]},
    ]
    evalfile.write_text("".join(json.dumps(r) + "\n" for r in eval_rows))
    report = workspace / "report.tsv"
    assert _run(["eval", "--input", evalfile, "--report", report]) == 0
    body = report.read_text()
    assert body.startswith("metric\tvalue\n") and "bleu" in body and "rouge_l" in body

    probe_report = workspace / "probe.tsv"
    assert _run(["probe", "--input", evalfile, "--report", probe_report, "--metrics", "bleu"]) == 0
    assert "target_as_response" in probe_report.read_text()

    ratings = workspace / "ratings.csv"
    ratings.write_text(
        "instance_id,metric_score,human_rating\n"
        "a,0.1,0.2\nb,0.5,0.6\nc,0.3,0.3\nd,0.9,0.8\n"
    )
    report2 = workspace / "report2.tsv"
    assert _run(["eval", "--input", evalfile, "--report", report2, "--ratings", ratings]) == 0
    assert "spearman\t1.000000" in report2.read_text()

    dirty = workspace / "dirty.jsonl"
    dirty.write_text(
        json.dumps({"context": ["c"], "target": "keep me around", "response": "unrelated text"}) + "\n"
        + json.dumps({"context": ["c"], "target": "copy me", "response": "copy me"}) + "\n"
    )
    cleaned = workspace / "cleaned.jsonl"
    assert _run(["clean", "--instances", dirty, "--out", cleaned]) == 0
    assert len(cleaned.read_text().splitlines()) == 1


def test_augment_cli(workspace):
    records = [
        {
            "dialogue": ["is my booking complete?", "almost done"],
            "response": "your reservation is confirmed. now i need your phone number",
            "frames": [
                {
                    "predicate": {"text": "confirmed", "start": 20, "end": 29},
                    "arguments": [{"text": "your reservation", "start": 0, "end": 16}],
                },
                {
                    "predicate": {"text": "need", "start": 37, "end": 41},
                    "arguments": [
                        {"text": "i", "start": 35, "end": 36},
                        {"text": "your phone number", "start": 42, "end": 59},
                    ],
                },
            ],
        }
    ]
    infile = workspace / "dialogs.jsonl"
    infile.write_text("".join(json.dumps(r) + "\n" for r in records))
    out = workspace / "aug.jsonl"
    assert _run(["augment", "--input", infile, "--out", out, "--threshold", 0.0]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert rows[0]["target"] == "i need your phone number"
    assert rows[0]["context"] == ["is my booking complete?", "almost done"]
    assert "score" in rows[0]


def test_steer_interactive(workspace):
    opts = {
        "model": None,
        "generator_cmd": f"{sys.executable} {STUB}",
        "context": "i have an amazing garden",
        "target": "you can try our restaurant",
        "idf": None,
        "templates": None,
        "seed": 1,
        "num": 2,
    }
    stdin = io.StringIO("best ingredients\n1\nq\n")
    stdout = io.StringIO()
    run_steer(opts, stdin=stdin, stdout=stdout)
    output = stdout.getvalue()
    assert "best ingredients" in output  # rendered candidate contains the keyword
    assert "[target] you can try our restaurant" in output


def test_steer_subprocess_end_to_end(workspace):
    cmd = [
        sys.executable, "-m", "bridgekit.cli", "steer",
        "--generator-cmd", f"{sys.executable} {STUB}",
        "--context", "i have an amazing garden",
        "--target", "you can try our restaurant",
        "--seed", "1", "--num", "2",
    ]
    proc = subprocess.run(
        cmd, input="best ingredients\n1\n", capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    assert "best ingredients" in proc.stdout
