"""Run manifests: every CLI command records how to reproduce its outputs."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata


def package_version() -> str:
    try:
        return metadata.version("spingen")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    """What ran, with which parameters and seeds, and what it produced."""

    command: str
    argv: list[str]
    parameters: dict
    seeds: list[int] = field(default_factory=list)
    version: str = field(default_factory=package_version)
    outputs: list[str] = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    created_utc: str = ""

    def write(self, path) -> None:
        self.created_utc = datetime.now(timezone.utc).isoformat()
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(asdict(self), handle, indent=2, sort_keys=True)
            handle.write("\n")


def read_manifest(path) -> RunManifest:
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    return RunManifest(**data)


class Stopwatch:
    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self._start
        return False
