"""
Plot-ready outputs: CSV tables, JSON records, gnuplot scripts and the run
manifest written next to every output file.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys as _sys

from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import jinja2
import numpy as np

from . import VERSION, ConfigException, log

TEMPLATE_PATH = Path(__file__).parent / "data" / "templates"


def format_number(value) -> str:
    """Shortest round-trip decimal text of a number; locale independent"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # strict JSON has no infinities
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    return value


def json_text(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n"


def table_records(header: Sequence[str], rows: Iterable[Sequence]) -> List[dict]:
    return [dict(zip(header, row)) for row in rows]


def write_text(text: str, out: Union[str, Path, None]) -> Union[Path, None]:
    """Write to `out`, or to stdout when no path is given"""
    if out is None:
        _sys.stdout.write(text)
        return None
    path = Path(out)
    if path.parent and not path.parent.exists():
        raise ConfigException(f"output directory {path.parent} does not exist")
    path.write_text(text, encoding="utf-8")
    log.debug("wrote %s", path)
    return path


def sibling(out: Union[str, Path], suffix: str) -> Path:
    """foo.csv -> foo<suffix>"""
    out = Path(out)
    return out.with_name(out.stem + suffix)


@dataclass
class RunManifest:
    """
    Everything needed to reproduce an output: the command, its resolved parameters,
    the catalog version, the seed and the files written.
    """

    subcommand: str
    parameters: dict
    argv: List[str]
    catalog_version: Union[str, None] = None
    seed: Union[int, None] = None
    outputs: List[str] = field(default_factory=list)
    tool_version: str = f"satspec-{VERSION}"
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))

    @staticmethod
    def path_for(out: Union[str, Path]) -> Path:
        return Path(str(out) + ".manifest.json")

    def write(self, out: Union[str, Path]) -> Path:
        path = self.path_for(out)
        path.write_text(json_text(asdict(self)), encoding="utf-8")
        return path

    @classmethod
    def load(cls, filename: Union[str, Path]) -> RunManifest:
        try:
            document = json.loads(Path(filename).read_text(encoding="utf-8"))
        except FileNotFoundError as ex:
            raise ConfigException(f"Manifest {filename} not found") from ex
        except json.JSONDecodeError as ex:
            raise ConfigException(f"Unable to parse manifest {filename}: {ex}") from ex

        if not isinstance(document, dict):
            raise ConfigException(f"{filename} is not a satspec manifest")
        missing = {"subcommand", "parameters", "argv"} - set(document.keys())
        if missing:
            raise ConfigException(f"{filename} is not a satspec manifest (missing {sorted(missing)})")
        unknown = set(document.keys()) - set(cls.__dataclass_fields__.keys())
        if unknown:
            raise ConfigException(f"{filename} has unexpected keys: {sorted(unknown)}")
        return cls(**document)


def gnuplot_script(template: str, **context) -> str:
    """Render one of the bundled gnuplot templates"""
    env = jinja2.Environment(
        loader=jinja2.FileSystemLoader(TEMPLATE_PATH),
        line_statement_prefix="##",
        undefined=jinja2.StrictUndefined,
        keep_trailing_newline=True,
    )
    try:
        return env.get_template(f"{template}.gp.j2").render(**context)
    except jinja2.TemplateNotFound as ex:
        raise ConfigException(f"no gnuplot template named {template}") from ex
