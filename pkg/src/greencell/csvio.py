"""CSV and manifest writing with reproducibility headers.

Every CSV starts with `#` comment lines carrying the tool version, the
config hash, the seed, and the command line, so any output file can be
traced back to the exact run that produced it.  Writes are atomic
(temp file in the target directory, then rename).
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def header_lines(version: str, config_hash: str, seed: int, command: str) -> list[str]:
    return [
        f"# tool_version: {version}",
        f"# config_hash: {config_hash}",
        f"# seed: {seed}",
        f"# command: {command}",
    ]


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | os.PathLike, headers: list[str],
              fieldnames: list[str], rows: list[dict]) -> None:
    lines = list(headers)
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(format_value(row[name]) for name in fieldnames))
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    outputs: list[str]
    wall_clock_s: float
    tool_version: str


def write_manifest(path: str | os.PathLike, manifest: RunManifest) -> None:
    atomic_write_text(path, json.dumps(dataclasses.asdict(manifest), indent=2) + "\n")


def read_csv(path: str | os.PathLike) -> tuple[dict, list[str], list[dict]]:
    """Parse a file written by write_csv: (header metadata, fieldnames, rows).

    Row values come back as strings; callers convert.  Intended for tests
    and scripts, not a general CSV reader.
    """
    meta: dict[str, str] = {}
    fieldnames: list[str] = []
    rows: list[dict] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            if not fieldnames:
                fieldnames = line.split(",")
                continue
            rows.append(dict(zip(fieldnames, line.split(","))))
    return meta, fieldnames, rows
