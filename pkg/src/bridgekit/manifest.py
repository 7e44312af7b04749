"""Run manifests: enough recorded state to reproduce any data-producing
CLI run byte-identically (given unchanged inputs)."""

import json
import os
from datetime import datetime, timezone

from .errors import FileFormatError

MANIFEST_FORMAT = "bridgekit-run"
MANIFEST_VERSION = 1


def manifest_path(output_path):
    return f"{output_path}.manifest.json"


def write_manifest(subcommand, options, inputs, outputs, started, version, seed=None):
    """Write one manifest next to every output path, atomically."""
    finished = datetime.now(timezone.utc).isoformat()
    payload = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "subcommand": subcommand,
        "options": options,
        "inputs": sorted(inputs),
        "outputs": sorted(outputs),
        "seed": seed,
        "started": started,
        "finished": finished,
        "package_version": version,
    }
    data = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    for out in outputs:
        path = manifest_path(out)
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(data)
        os.replace(tmp, path)


def load_manifest(path):
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict) or payload.get("format") != MANIFEST_FORMAT:
        raise FileFormatError(f"{path}: not a run manifest")
    if payload.get("version") != MANIFEST_VERSION:
        raise FileFormatError(f"{path}: unsupported version {payload.get('version')}")
    return payload


def utc_now():
    return datetime.now(timezone.utc).isoformat()
