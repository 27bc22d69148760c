"""File plumbing shared by the CLI and pipeline: atomic writes, flat
key=value config files, content digests, and run manifests."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path


def write_bytes_atomic(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))


def read_lines(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# flat key=value files
#
# One "key = value" per line; blank lines and lines starting with '#' are
# ignored.  Values stay strings; callers coerce.

def parse_kv_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_kv_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_kv_text(f.read())


def format_kv(items: dict[str, object]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def write_kv_file(path, items: dict[str, object]) -> None:
    write_text_atomic(path, format_kv(items))


def parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


class Manifest:
    """Run provenance record: resolved config, input digests, outputs."""

    def __init__(self, subcommand: str, seed: int):
        self.items: dict[str, object] = {"subcommand": subcommand, "seed": seed}

    def set(self, key: str, value) -> None:
        self.items[key] = value

    def record_config(self, config: dict[str, object]) -> None:
        for k, v in config.items():
            self.items[f"config.{k}"] = v

    def record_input(self, name: str, path) -> None:
        self.items[f"input.{name}"] = f"{path}:{sha256_file(path)}"

    def record_output(self, name: str, path) -> None:
        self.items[f"output.{name}"] = str(path)

    def write(self, path, wall_clock_s: float) -> None:
        items = dict(self.items)
        items["wall_clock_s"] = f"{wall_clock_s:.3f}"
        write_kv_file(path, items)
