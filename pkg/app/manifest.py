"""
Run manifests: a `key=value` record written next to every output file,
holding enough to re-run the command and check its inputs.
"""
import hashlib
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import __version__
from .config import (
    BRUTE_FORCE_LIMIT,
    EPSILON_CARDINALITY,
    EPSILON_KNAPSACK,
    IC_CHUNK_SIZE,
    RNG_ALGORITHM,
    TAU_FALLBACK,
)

logger = logging.getLogger(__name__)


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    inputs: List[str] = field(default_factory=list)
    values: Dict[str, str] = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    def record(self, key: str, value) -> None:
        self.values[key] = str(value)

    def lines(self, output: Optional[str] = None) -> List[str]:
        entries = [
            ("command", self.command),
            ("argv", " ".join(self.argv)),
            ("version", __version__),
            ("rng_algorithm", RNG_ALGORITHM),
            ("epsilon_cardinality", repr(EPSILON_CARDINALITY)),
            ("epsilon_knapsack", repr(EPSILON_KNAPSACK)),
            ("tau_fallback", repr(TAU_FALLBACK)),
            ("ic_chunk_size", str(IC_CHUNK_SIZE)),
            ("brute_force_limit", str(BRUTE_FORCE_LIMIT)),
        ]
        entries.extend(sorted(self.values.items()))
        for path in self.inputs:
            entries.append((f"sha256:{path}", sha256_of(path)))
        if output is not None:
            entries.append((f"sha256:{output}", sha256_of(output)))
        entries.append(("elapsed_s", f"{time.perf_counter() - self.started:.6f}"))
        return [f"{key}={value}" for key, value in entries]

    def write(self, output: str) -> str:
        """Write `<output>.manifest` for an output file that already exists"""
        path = f"{output}.manifest"
        with open(path, "w") as f:
            for line in self.lines(output):
                f.write(line + "\n")
        logger.debug(f"Wrote manifest {path}")
        return path


def read_manifest(path: str) -> Dict[str, str]:
    entries = {}
    with open(path) as f:
        for raw in f:
            line = raw.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("=")
            entries[key] = value
    return entries
