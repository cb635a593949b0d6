"""Atomic file output, hashing and the run manifest.

Commands never leave partial files behind: content is written to a temporary
sibling and renamed into place only on success.  Every command also writes a
manifest (no timestamps, nothing machine-specific) listing its argument
vector, input digests and output paths, so replaying the manifest reproduces
every output byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _np_default(obj):
    import numpy as np

    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, default=_np_default) + "\n"


@dataclass
class RunManifest:
    """Reproducibility record of one command invocation."""

    command: list[str]
    inputs: list[dict] = field(default_factory=list)
    seed: int | None = None
    defaults: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def add_input(self, path: str) -> None:
        self.inputs.append({"path": path, "sha256": sha256_file(path)})

    def add_output(self, path: str) -> None:
        if path not in self.outputs:
            self.outputs.append(path)

    def write(self, path: str) -> None:
        self.add_output(path)
        atomic_write_text(path, json_text({
            "command": self.command,
            "inputs": self.inputs,
            "seed": self.seed,
            "defaults": self.defaults,
            "outputs": self.outputs,
        }))

    @staticmethod
    def load(path: str) -> dict:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
