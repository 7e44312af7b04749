"""Single executable exposing every pipeline stage as a subcommand.

Option precedence is flags > config file (TOML, one section per
subcommand) > defaults. Every data-producing run writes a manifest next
to each output; `bridgekit --replay <manifest>` reruns the recorded
options and reproduces the output byte-identically (given the same
inputs). Seeds are mandatory wherever randomness is involved: there is
no wall-clock seeding anywhere.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import csv
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .augment import AugmentConfig, SubprocessScorer, build_instances, filter_augmented
from .decode import DecodeConfig, ExternalPathGenerator, ReferencePathGenerator, generate_path
from .entities import (
    PHASE_INFER,
    IdfTable,
    SubprocessTagger,
    build_idf_table,
    load_idf_table,
    load_stop_entities,
    save_idf_table,
    score_pairs,
    select_pairs,
)
from .errors import BridgekitError
from .evalkit import EvalInstance, bias_probe, bleu, clean_test_set, rouge_l, spearman
from .kg import GraphConfig, load_exclusion_file, load_graph_file, open_graph, save_graph
from .manifest import load_manifest, utc_now, write_manifest
from .ngram import load_model, save_model, train_path_model
from .paths import read_corpus_file
from .pipeline import (
    PipelineConfig,
    TransitionInstance,
    assemble_crg_sequence,
    instance_entity_sets,
    instance_from_record,
    read_jsonl,
    run_prep_crg,
    write_jsonl,
)
from .render import load_templates, render_text
from .sampler import SamplerConfig, write_corpus
from .seeding import derive_seed
from .sequence import MODE_HT, MODE_ONEENT, MODE_WC
from .tcmetric import (
    ResponseGeneratorProcess,
    SynthConfig,
    balance,
    reference_scorer,
    synthesize_negatives,
)
from .textutil import normalize_concept


class UsageError(Exception):
    def __init__(self, message, parser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


_SENTINEL = object()


def _add(parser, spec):
    """Register options with no argparse defaults so config-file values
    can slot in underneath explicit flags."""
    for name, kwargs in spec.items():
        kwargs = dict(kwargs)
        kwargs.pop("default", None)
        kwargs.pop("required", None)
        parser.add_argument(name, default=None, **kwargs)


def _resolve(spec, args, config_section):
    """flags > config file > defaults; missing required options error."""
    opts = {}
    for name, kwargs in spec.items():
        key = name.lstrip("-").replace("-", "_")
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            opts[key] = flag_value
        elif key in config_section:
            opts[key] = config_section[key]
        elif "default" in kwargs:
            opts[key] = kwargs["default"]
        elif kwargs.get("required"):
            raise UsageError(f"missing required option --{key.replace('_', '-')}", None)
        else:
            opts[key] = None
    return opts


_SPECS = {
    "ingest": {
        "--assertions": {"required": True, "help": "assertions TSV"},
        "--out": {"required": True, "help": "graph cache output"},
        "--exclusions": {"help": "exclusion override file, one relation per line"},
        "--no-inverses": {"action": "store_true", "default": False},
    },
    "sample-paths": {
        "--graph": {"required": True, "help": "graph cache or assertions TSV"},
        "--out": {"required": True},
        "--count": {"type": int, "required": True},
        "--seed": {"type": int, "required": True},
        "--k-max": {"type": int, "default": 6},
        "--allow-backtrack": {"action": "store_true", "default": False},
        "--degree-weighted-start": {"action": "store_true", "default": False},
        "--workers": {"type": int, "default": 1},
    },
    "build-idf": {
        "--corpus": {"required": True, "help": "text corpus, one document per line"},
        "--out": {"required": True},
    },
    "train-pathlm": {
        "--corpus": {"required": True, "help": "path corpus file"},
        "--out": {"required": True},
        "--order": {"type": int, "default": 3},
        "--smoothing": {"type": float, "default": 1e-3},
    },
    "gen-path": {
        "--model": {"required": True},
        "--head": {"required": True},
        "--tail": {"required": True},
        "--require": {"help": "comma-joined entities the path must contain"},
        "--seed": {"type": int, "required": True},
        "--num": {"type": int, "default": DecodeConfig.num_samples},
        "--temperature": {"type": float, "default": DecodeConfig.temperature},
        "--top-p": {"type": float, "default": DecodeConfig.top_p},
        "--beam-width": {"type": int, "default": DecodeConfig.beam_width},
        "--max-len": {"type": int, "default": DecodeConfig.max_len},
        "--out": {"help": "write paths here instead of stdout"},
    },
    "prep-crg": {
        "--instances": {"required": True},
        "--model": {"help": "reference path model file"},
        "--generator-cmd": {"help": "external generator command (line protocol)"},
        "--idf": {"required": True},
        "--phase": {"choices": ["train", "infer"], "required": True},
        "--out": {"required": True},
        "--skip-log": {"help": "defaults to <out>.skips.jsonl"},
        "--seed": {"type": int, "required": True},
        "--q": {"type": int, "default": PipelineConfig.q},
        "--pairs": {"type": int, "default": PipelineConfig.D},
        "--perplexity-factor": {"type": float, "default": PipelineConfig.perplexity_factor},
        "--templates": {"help": "relation template override TSV"},
        "--stop-entities": {"help": "stop-entity list file"},
        "--tagger-cmd": {"help": "external POS tagger command (line protocol)"},
        "--lemma-match": {"action": "store_true", "default": False},
        "--workers": {"type": int, "default": 1},
    },
    "augment": {
        "--input": {"required": True, "help": "dialogue records with SRL frames"},
        "--out": {"required": True},
        "--skip-log": {"help": "defaults to <out>.skips.jsonl"},
        "--threshold": {"type": float, "default": AugmentConfig.threshold},
        "--max-history": {"type": int, "default": AugmentConfig.max_history},
        "--scorer-cmd": {"help": "external scorer command; default: built-in scorer"},
    },
    "synth-tc": {
        "--instances": {"required": True},
        "--out": {"required": True},
        "--seed": {"type": int, "required": True},
        "--max-per-mechanism": {"type": int, "default": SynthConfig.max_per_mechanism},
        "--mechanisms": {"default": "1,2,3"},
        "--generator-cmd": {"help": "mechanism-2 response generator command"},
        "--no-balance": {"action": "store_true", "default": False},
    },
    "eval": {
        "--input": {"required": True},
        "--report": {"required": True},
        "--metrics": {"default": "bleu,rouge_l"},
        "--ratings": {"help": "CSV instance_id,metric_score,human_rating"},
    },
    "probe": {
        "--input": {"required": True},
        "--report": {"required": True},
        "--metrics": {"default": "bleu,rouge_l"},
    },
    "clean": {
        "--instances": {"required": True},
        "--out": {"required": True},
        "--threshold": {"type": float, "default": 0.75},
        "--denominator": {"choices": ["target", "response", "union"], "default": "target"},
    },
    "steer": {
        "--model": {"help": "reference path model file"},
        "--generator-cmd": {"help": "external generator command"},
        "--context": {"required": True},
        "--target": {"required": True},
        "--idf": {"help": "idf table for pair selection"},
        "--templates": {},
        "--seed": {"type": int, "default": 0},
        "--num": {"type": int, "default": 5},
    },
}


def _metric_fn(name):
    if name == "bleu":
        return bleu
    if name == "rouge_l":
        return lambda corpus: sum(rouge_l(h, refs) for h, refs in corpus) / len(corpus)
    raise UsageError(f"unknown metric: {name}", None)


def _make_generator(opts, decode=None):
    if opts.get("generator_cmd"):
        ppl_model = load_model(opts["model"]) if opts.get("model") else None
        return ExternalPathGenerator(opts["generator_cmd"], ppl_model)
    if not opts.get("model"):
        raise UsageError("need --model or --generator-cmd", None)
    return ReferencePathGenerator(load_model(opts["model"]), decode)


def run_ingest(opts):
    excluded = (
        load_exclusion_file(opts["exclusions"])
        if opts["exclusions"]
        else GraphConfig.excluded_relations
    )
    config = GraphConfig(excluded, synthesize_inverses=not opts["no_inverses"])
    graph = load_graph_file(opts["assertions"], config)
    save_graph(graph, opts["out"])
    print(f"{len(graph)} concepts, {graph.num_edges} directed edges -> {opts['out']}")
    return [opts["assertions"]], [opts["out"]], None


def run_sample_paths(opts):
    graph = open_graph(opts["graph"])
    config = SamplerConfig(
        count=opts["count"],
        seed=opts["seed"],
        K_max=opts["k_max"],
        allow_immediate_backtrack=opts["allow_backtrack"],
        degree_weighted_start=opts["degree_weighted_start"],
    )
    write_corpus(graph, config, opts["out"], workers=opts["workers"])
    print(f"{opts['count']} paths -> {opts['out']}")
    return [opts["graph"]], [opts["out"]], opts["seed"]


def run_build_idf(opts):
    with open(opts["corpus"], encoding="utf-8") as f:
        table = build_idf_table(line.rstrip("\n") for line in f if line.strip())
    save_idf_table(table, opts["out"])
    print(f"{len(table.values)} tokens -> {opts['out']}")
    return [opts["corpus"]], [opts["out"]], None


def run_train_pathlm(opts):
    corpus = read_corpus_file(opts["corpus"])
    model = train_path_model(corpus, order=opts["order"], smoothing=opts["smoothing"])
    save_model(model, opts["out"])
    print(
        f"order-{model.order} model over {len(model.vocabulary)} tokens -> {opts['out']}"
    )
    return [opts["corpus"]], [opts["out"]], None


def run_gen_path(opts):
    model = load_model(opts["model"])
    decode = DecodeConfig(
        temperature=opts["temperature"],
        top_p=opts["top_p"],
        beam_width=opts["beam_width"],
        max_len=opts["max_len"],
        num_samples=opts["num"],
        seed=opts["seed"],
    )
    required = [normalize_concept(e) for e in opts["require"].split(",")] if opts["require"] else []
    head = normalize_concept(opts["head"])
    tail = normalize_concept(opts["tail"])
    paths = generate_path(model, head, tail, required, decode)
    lines = [p.line() for p in paths]
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8") as f:
            f.write("".join(line + "\n" for line in lines))
        return [opts["model"]], [opts["out"]], opts["seed"]
    for line in lines:
        print(line)
    return [opts["model"]], [], opts["seed"]


def run_prep_crg_cmd(opts):
    decode = DecodeConfig(seed=opts["seed"])
    generator = _make_generator(opts, decode)
    idf = load_idf_table(opts["idf"])
    templates = load_templates(opts["templates"]) if opts["templates"] else None
    cfg = PipelineConfig(
        q=opts["q"],
        D=opts["pairs"],
        perplexity_factor=opts["perplexity_factor"],
        seed=opts["seed"],
        decode=decode,
        lemma_match_gold=opts["lemma_match"],
    )
    records = read_jsonl(opts["instances"])
    stops = load_stop_entities(opts["stop_entities"]) if opts["stop_entities"] else None
    tagger = SubprocessTagger(opts["tagger_cmd"]) if opts["tagger_cmd"] else None
    workers = 1 if tagger is not None else opts["workers"]
    try:
        outputs, skips = run_prep_crg(
            records,
            opts["phase"],
            generator,
            cfg,
            idf,
            templates,
            tagger=tagger,
            stop_entities=stops,
            workers=workers,
        )
    finally:
        if hasattr(generator, "close"):
            generator.close()
        if tagger is not None:
            tagger.close()
    write_jsonl(outputs, opts["out"])
    skip_path = opts["skip_log"] or f"{opts['out']}.skips.jsonl"
    write_jsonl(skips, skip_path)
    print(f"{len(outputs)} records, {len(skips)} skipped -> {opts['out']}")
    inputs = [opts["instances"], opts["idf"]]
    if opts.get("model"):
        inputs.append(opts["model"])
    return inputs, [opts["out"], skip_path], opts["seed"]


def run_augment(opts):
    records = read_jsonl(opts["input"])
    cfg = AugmentConfig(threshold=opts["threshold"], max_history=opts["max_history"])
    instances, skips = build_instances(records, cfg)
    scorer = SubprocessScorer(opts["scorer_cmd"]) if opts["scorer_cmd"] else reference_scorer
    score_log = []
    try:
        kept = filter_augmented(instances, scorer, cfg, score_log)
    finally:
        if opts["scorer_cmd"]:
            scorer.close()
    scores = {e["index"]: e["score"] for e in score_log if "score" in e}
    kept_ids = set(map(id, kept))
    out_rows = [
        {
            "context": inst.context,
            "target": inst.target,
            "response": inst.response,
            "score": scores[idx],
        }
        for idx, inst in enumerate(instances)
        if id(inst) in kept_ids
    ]
    write_jsonl(out_rows, opts["out"])
    skip_path = opts["skip_log"] or f"{opts['out']}.skips.jsonl"
    scorer_failures = [e for e in score_log if "error" in e]
    write_jsonl(skips + scorer_failures, skip_path)
    print(f"{len(out_rows)} kept of {len(instances)} candidates -> {opts['out']}")
    return [opts["input"]], [opts["out"], skip_path], None


def run_synth_tc(opts):
    records = read_jsonl(opts["instances"])
    dataset = [instance_from_record(r) for r in records]
    mechanisms = frozenset(int(m) for m in str(opts["mechanisms"]).split(",") if m != "")
    cfg = SynthConfig(
        max_per_mechanism=opts["max_per_mechanism"], seed=opts["seed"], mechanisms=mechanisms
    )
    generator = ResponseGeneratorProcess(opts["generator_cmd"]) if opts["generator_cmd"] else None
    try:
        labeled = synthesize_negatives(dataset, generator, cfg)
    finally:
        if generator is not None:
            generator.close()
    if not opts["no_balance"]:
        labeled = balance(labeled, seed=derive_seed(opts["seed"], "balance"))
    write_jsonl([t.to_dict() for t in labeled], opts["out"])
    n_pos = sum(t.label == "positive" for t in labeled)
    print(f"{n_pos} positive / {len(labeled) - n_pos} negative -> {opts['out']}")
    return [opts["instances"]], [opts["out"]], opts["seed"]


def _load_eval_instances(path):
    instances = []
    for row in read_jsonl(path):
        instances.append(
            EvalInstance(
                context=row["context"] if isinstance(row["context"], str) else " ".join(row["context"]),
                target=row["target"],
                hypothesis=row.get("hypothesis", ""),
                references=row["references"],
            )
        )
    return instances


def run_eval(opts):
    instances = _load_eval_instances(opts["input"])
    names = [m.strip() for m in opts["metrics"].split(",") if m.strip()]
    rows = []
    corpus = [(inst.hypothesis, inst.references) for inst in instances]
    for name in names:
        rows.append((name, _metric_fn(name)(corpus)))
    if opts["ratings"]:
        with open(opts["ratings"], newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            pairs = [(float(r["metric_score"]), float(r["human_rating"])) for r in reader]
        rows.append(("spearman", spearman([p[0] for p in pairs], [p[1] for p in pairs])))
    with open(opts["report"], "w", encoding="utf-8") as f:
        f.write("metric\tvalue\n")
        for name, value in rows:
            f.write(f"{name}\t{value:.6f}\n")
    for name, value in rows:
        print(f"{name}\t{value:.6f}")
    inputs = [opts["input"]] + ([opts["ratings"]] if opts["ratings"] else [])
    return inputs, [opts["report"]], None


def run_probe(opts):
    instances = _load_eval_instances(opts["input"])
    names = [m.strip() for m in opts["metrics"].split(",") if m.strip()]
    lines = ["metric\trow\tscore"]
    for name in names:
        report = bias_probe(instances, _metric_fn(name))
        for row, score in report.scores.items():
            lines.append(f"{name}\t{row}\t{score:.6f}")
        if report.flagged:
            lines.append(
                f"{name}\tdegenerate_instances\t"
                f"{report.degenerate_targets + report.degenerate_contexts}"
            )
    with open(opts["report"], "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return [opts["input"]], [opts["report"]], None


def run_clean(opts):
    records = read_jsonl(opts["instances"])
    instances = [instance_from_record(r) for r in records]
    kept = clean_test_set(
        instances, overlap_threshold=opts["threshold"], denominator=opts["denominator"]
    )
    kept_keys = {(tuple(i.context), i.target, i.response) for i in kept}
    rows = [
        r
        for r, i in zip(records, instances)
        if (tuple(i.context), i.target, i.response) in kept_keys
    ]
    write_jsonl(rows, opts["out"])
    print(f"kept {len(rows)} of {len(records)} -> {opts['out']}")
    return [opts["instances"]], [opts["out"]], None


def run_steer(opts, stdin=None, stdout=None):
    """Interactive keyword steering: the user supplies one concept per
    round, paths constrained to contain it are rendered for choice, and
    the chosen path's conditioning sequence is emitted."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    generator = _make_generator(opts)
    idf = load_idf_table(opts["idf"]) if opts["idf"] else IdfTable()
    templates = load_templates(opts["templates"]) if opts["templates"] else None
    context, target = opts["context"], opts["target"]
    instance = TransitionInstance([context], target)
    e_h, e_t, _ = instance_entity_sets(instance, kg_vocab=generator.concept_vocab)
    if not e_h or not e_t:
        raise BridgekitError("could not extract entities from context/target")
    (head, tail), = select_pairs(score_pairs(e_h, e_t, idf), PHASE_INFER)

    def say(text):
        stdout.write(text + "\n")
        stdout.flush()

    say(f"context: {context}")
    say(f"target: {target}")
    say(f"bridging pair: {head} -> {tail}")
    turn = 0
    candidates = []
    try:
        while True:
            stdout.write("keyword> ")
            stdout.flush()
            line = stdin.readline()
            if not line:
                break
            line = line.strip()
            if not line or line in {"q", "quit", "exit"}:
                break
            if line.isdigit() and candidates:
                pick = int(line)
                if 1 <= pick <= len(candidates):
                    path, text = candidates[pick - 1]
                    say(assemble_crg_sequence(text, target, [context]))
                else:
                    say(f"pick a number between 1 and {len(candidates)}")
                continue
            keyword = normalize_concept(line)
            turn += 1
            try:
                paths = generator.generate(
                    head,
                    tail,
                    required=[keyword],
                    num_samples=opts["num"],
                    seed=derive_seed(opts["seed"], "steer", turn),
                )
            except BridgekitError as exc:
                say(f"no path: {exc}")
                continue
            candidates = [(p, render_text(p, templates)) for p in paths]
            for i, (_, text) in enumerate(candidates, start=1):
                say(f"  [{i}] {text}")
            say("enter a number to emit its conditioning sequence, or a new keyword")
    finally:
        if hasattr(generator, "close"):
            generator.close()
    return [], [], opts["seed"]


_RUNNERS = {
    "ingest": run_ingest,
    "sample-paths": run_sample_paths,
    "build-idf": run_build_idf,
    "train-pathlm": run_train_pathlm,
    "gen-path": run_gen_path,
    "prep-crg": run_prep_crg_cmd,
    "augment": run_augment,
    "synth-tc": run_synth_tc,
    "eval": run_eval,
    "probe": run_probe,
    "clean": run_clean,
    "steer": run_steer,
}

# steer is interactive and produces no files; everything else records a
# manifest per output.
_NO_MANIFEST = {"steer"}


def build_parser():
    parser = _Parser(prog="bridgekit", description=__doc__)
    parser.add_argument("--replay", metavar="MANIFEST", help="re-run a recorded manifest")
    parser.add_argument("--config", metavar="TOML", help="config file (one section per subcommand)")
    parser.add_argument("--version", action="version", version=f"bridgekit {__version__}")
    sub = parser.add_subparsers(dest="subcommand")
    for name, spec in _SPECS.items():
        p = sub.add_parser(name)
        _add(p, spec)
    return parser


def execute(subcommand, options):
    """Run one subcommand from resolved options; returns exit code 0."""
    started = utc_now()
    runner = _RUNNERS[subcommand]
    inputs, outputs, seed = runner(options)
    if subcommand not in _NO_MANIFEST and outputs:
        write_manifest(subcommand, options, inputs, outputs, started, __version__, seed)
    return 0


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.replay:
            manifest = load_manifest(args.replay)
            return execute(manifest["subcommand"], manifest["options"])
        if not args.subcommand:
            raise UsageError("a subcommand is required", parser)
        config_section = {}
        if args.config:
            with open(args.config, "rb") as f:
                config_section = tomllib.load(f).get(args.subcommand, {})
        opts = _resolve(_SPECS[args.subcommand], args, config_section)
        return execute(args.subcommand, opts)
    except UsageError as exc:
        target = exc.parser or parser
        sys.stderr.write(target.format_usage())
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (BridgekitError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
