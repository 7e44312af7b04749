"""Re-purposing free-flow dialogue data into target-guided instances.

Targets come from semantic-role frames supplied as annotations (this
package never runs an SRL parser itself): the clause of the last
predicate in the response becomes the target, the preceding turns are
truncated to a short history, and a smoothness scorer gates what is
kept.
"""

import shlex
import subprocess
from dataclasses import dataclass

from .errors import ScorerFailure, SpanOutOfRange
from .pipeline import CONTEXT_JOIN, TransitionInstance

_TERMINAL = ".!?"


@dataclass(frozen=True)
class Span:
    text: str
    start: int
    end: int


@dataclass
class SrlFrame:
    predicate: Span
    arguments: list

    @classmethod
    def from_dict(cls, data):
        pred = Span(**data["predicate"])
        args = [Span(**a) for a in data.get("arguments", [])]
        return cls(pred, args)


@dataclass(frozen=True)
class AugmentConfig:
    threshold: float = 0.7
    max_history: int = 2

    def __post_init__(self):
        if not 0 <= self.threshold <= 1:
            raise ValueError("threshold must be in [0, 1]")


def _check_span(span, length):
    if span.start < 0 or span.end > length or span.start >= span.end:
        raise SpanOutOfRange((span.start, span.end), length)


def create_target(response, frames):
    """Assemble a target clause from the last-predicate frame.

    Spans are re-joined in original character order with single spaces;
    sentence-terminal punctuation is copied when the clause ends the
    sentence. Returns None when no frames are given.
    """
    if not frames:
        return None
    for frame in frames:
        _check_span(frame.predicate, len(response))
        for arg in frame.arguments:
            _check_span(arg, len(response))
    chosen = max(frames, key=lambda f: f.predicate.start)
    spans = sorted([chosen.predicate, *chosen.arguments], key=lambda s: (s.start, s.end))
    clause = " ".join(" ".join(s.text.split()) for s in spans)
    last_end = spans[-1].end
    rest = response[last_end:]
    if rest and rest[0] in _TERMINAL:
        clause += rest[0]
    return clause


def truncate_history(dialogue, max_history):
    """Last `max_history` utterances preceding the response, in order."""
    if not dialogue:
        raise ValueError("dialogue must be non-empty")
    if max_history <= 0:
        return []
    return list(dialogue[-max_history:])


def build_instances(records, cfg=None):
    """Turn {dialogue, response, frames} records into transition instances.

    Skipped: records with no usable frames, an empty truncated history,
    or a created target equal to the whole response (nothing left to
    transition toward). Returns (instances, skip records).
    """
    cfg = cfg or AugmentConfig()
    instances = []
    skips = []
    for index, record in enumerate(records):
        response = record["response"]
        frames = [SrlFrame.from_dict(f) for f in record.get("frames", [])]
        target = create_target(response, frames)
        if target is None:
            skips.append({"index": index, "reason": "no frames"})
            continue
        if " ".join(target.split()) == " ".join(response.split()):
            skips.append({"index": index, "reason": "target equals whole response"})
            continue
        context = truncate_history(record["dialogue"], cfg.max_history)
        if not context:
            skips.append({"index": index, "reason": "empty context"})
            continue
        instances.append(TransitionInstance(context, target, response))
    return instances, skips


def filter_augmented(instances, scorer, cfg=None, score_log=None):
    """Keep instances whose smoothness score reaches the threshold.

    `scorer` maps (context string, response, target) to [0, 1]. Failures
    are recorded (ScorerFailure in `score_log`) and the instance dropped;
    the batch continues. Order is preserved.
    """
    cfg = cfg or AugmentConfig()
    kept = []
    for index, inst in enumerate(instances):
        context = CONTEXT_JOIN.join(inst.context)
        try:
            score = float(scorer(context, inst.response, inst.target))
        except Exception as exc:  # scorer contract: any failure drops the row
            failure = ScorerFailure(index, exc)
            if score_log is not None:
                score_log.append({"index": index, "error": str(failure)})
            continue
        if score_log is not None:
            score_log.append({"index": index, "score": score})
        if score >= cfg.threshold:
            kept.append(inst)
    return kept


class SubprocessScorer:
    """Smoothness scorer over a line-protocol subprocess.

    One "context<TAB>response<TAB>target" line in, one score line out.
    """

    def __init__(self, cmd):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def __call__(self, context, response, target):
        for piece in (context, response, target):
            if "\t" in piece or "\n" in piece:
                raise ValueError("protocol fields must not contain tabs or newlines")
        self.proc.stdin.write(f"{context}\t{response}\t{target}\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise RuntimeError("scorer subprocess closed its output")
        return float(line.strip())

    def close(self):
        if self.proc.poll() is None:
            self.proc.terminate()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream and not stream.closed:
                stream.close()
        self.proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def frames_from_record(record):
    return [SrlFrame.from_dict(f) for f in record.get("frames", [])]
