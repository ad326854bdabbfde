"""Output directories: one writer per directory and a manifest written last."""
from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__

OUTPUT_ROOT_ENV = "SALTNS_OUTPUT_ROOT"
MANIFEST_NAME = "manifest.txt"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV) or ".")


def resolve_output(path: Optional[str], default: str) -> Path:
    """Relative paths (and the default) live under the output root."""
    p = Path(path) if path else Path(default)
    return p if p.is_absolute() else output_root() / p


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config_echo: str = ""
    seeds: List[int] = field(default_factory=list)
    basis_hashes: Dict[str, str] = field(default_factory=dict)
    xi_stamp: str = ""
    started: str = field(default_factory=_now)
    finished: str = ""
    files: Dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    extra: Dict[str, str] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"tool_version: {self.tool_version}", f"command: {self.command}",
                 f"started: {self.started}", f"finished: {self.finished}",
                 f"seeds: {', '.join(str(s) for s in self.seeds)}", f"xi_stamp: {self.xi_stamp}"]
        lines += [f"basis: {k} {v}" for k, v in sorted(self.basis_hashes.items())]
        lines += [f"{k}: {v}" for k, v in sorted(self.extra.items())]
        lines += [f"file: {v} {k}" for k, v in sorted(self.files.items())]
        if self.config_echo:
            lines.append("config:")
            lines += ["  " + ln for ln in self.config_echo.splitlines()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        m = cls(command="")
        lines = text.splitlines()
        for i, ln in enumerate(lines):
            if ln == "config:":
                m.config_echo = "\n".join(x[2:] for x in lines[i + 1:]) + "\n"
                break
            key, _, val = ln.partition(": ")
            if key == "file":
                digest, name = val.split(" ", 1)
                m.files[name] = digest
            elif key == "basis":
                name, digest = val.split(" ", 1)
                m.basis_hashes[name] = digest
            elif key == "seeds":
                m.seeds = [int(s) for s in val.split(",") if s.strip()]
            elif key in ("tool_version", "command", "started", "finished", "xi_stamp"):
                setattr(m, key, val)
            else:
                m.extra[key] = val
        return m


class OutputWriter:
    """Sole writer for one output directory.

    Every file goes through :meth:`write`, which records its digest; the
    manifest is written by :meth:`close`, so its presence marks a complete
    directory.
    """

    def __init__(self, directory, manifest: RunManifest):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        stale = self.directory / MANIFEST_NAME
        if stale.exists():
            stale.unlink()
        self.manifest = manifest
        self._lock = threading.Lock()
        self._closed = False

    def write(self, name: str, data) -> Path:
        if isinstance(data, str):
            data = data.encode("utf-8")
        if name == MANIFEST_NAME:
            raise ValueError("the manifest is written by close()")
        with self._lock:
            if self._closed:
                raise RuntimeError("writer already closed")
            path = self.directory / name
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".part")
            tmp.write_bytes(data)
            os.replace(tmp, path)
            self.manifest.files[name] = sha256(data)
        return path

    def close(self) -> Path:
        with self._lock:
            self.manifest.finished = _now()
            path = self.directory / MANIFEST_NAME
            path.write_text(self.manifest.to_text(), encoding="utf-8")
            self._closed = True
        return path

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if not self._closed:
            self.close()


def check_manifest(directory) -> Dict[str, bool]:
    """Recompute the digest of every inventoried file."""
    directory = Path(directory)
    m = RunManifest.from_text((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    return {name: (directory / name).exists() and sha256((directory / name).read_bytes()) == digest
            for name, digest in m.files.items()}
