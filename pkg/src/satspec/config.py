"""
Loading of species catalogs and system configuration files.

A system is assembled from (lowest precedence first) a catalog entry, a config
file and `key=value` overrides given on the command line.
"""
from __future__ import annotations

import json
import math

from pathlib import Path
from typing import Dict, List, Union

import yaml

from . import ConfigException, log
from .params import DEFAULT_BETA, DEFAULT_CAVITY_LENGTH, DEFAULT_MODE_AREA, PhysicalSystem

BUILTIN_CATALOG = Path(__file__).parent / "data" / "species.json"


class SystemRecord(dict):
    """
    One species/system record as found in a catalog or config file. Only known
    keys are accepted - an unknown key is almost certainly a typo.
    """

    EXPECTED_KEYS = set(
        [
            "name",
            "transition",
            "lambda_m",
            "gamma_rad_s",
            "gamma_hz",
            "T2_s",
            "N",
            "finesse",
            "mode_area_m2",
            "cavity_length_m",
            "detector_efficiency",
            "beta",
        ]
    )

    def __init__(self, record: Union[dict, None], source: str = "anonymous"):
        super().__init__()
        self.source = source
        if record is None:
            return
        if not isinstance(record, dict):
            raise ConfigException(f"{source}: expected a mapping of system parameters, got {type(record).__name__}")
        self.update(record)
        self._ensure_valid_keys()

    def _ensure_valid_keys(self):
        unknown_keys = set(self.keys()) - self.EXPECTED_KEYS
        if unknown_keys:
            raise ConfigException(f"{self.source} has unexpected keys: {sorted(unknown_keys)}")
        if "gamma_hz" in self and "gamma_rad_s" in self:
            raise ConfigException(f"{self.source} defines both gamma_hz and gamma_rad_s")

    def merged(self, other: SystemRecord) -> SystemRecord:
        """Return a new record with `other` taking precedence"""
        ret_val = SystemRecord(dict(self), source=f"{self.source}+{other.source}")
        # gamma can be given in either unit; the higher precedence one wins
        if "gamma_hz" in other or "gamma_rad_s" in other:
            ret_val.pop("gamma_hz", None)
            ret_val.pop("gamma_rad_s", None)
        ret_val.update(other)
        ret_val._ensure_valid_keys()
        return ret_val

    def system(self) -> PhysicalSystem:
        missing = [k for k in ["lambda_m", "T2_s", "N", "finesse"] if k not in self]
        if "gamma_hz" not in self and "gamma_rad_s" not in self:
            missing.append("gamma_hz|gamma_rad_s")
        if missing:
            raise ConfigException(f"{self.source} is missing required keys: {', '.join(missing)}")

        if "gamma_rad_s" in self:
            gamma = _number(self, "gamma_rad_s")
        else:
            gamma = 2.0 * math.pi * _number(self, "gamma_hz")

        T2 = self["T2_s"]
        if not (isinstance(T2, str) and T2 == "radiative"):
            T2 = _number(self, "T2_s")

        N = _number(self, "N")
        if N != int(N):
            raise ConfigException(f"{self.source}: N must be an integer, got {self['N']!r}")

        return PhysicalSystem(
            name=str(self.get("name", "custom")),
            wavelength=_number(self, "lambda_m"),
            gamma=gamma,
            T2=T2,
            N=int(N),
            finesse=_number(self, "finesse"),
            cavity_length=_number(self, "cavity_length_m", DEFAULT_CAVITY_LENGTH),
            mode_area=_number(self, "mode_area_m2", DEFAULT_MODE_AREA),
            detector_efficiency=_number(self, "detector_efficiency", 1.0),
            beta=_number(self, "beta", DEFAULT_BETA),
        )


def _number(record: dict, key: str, default: Union[float, None] = None) -> float:
    """
    Numeric value of `key`. YAML 1.1 reads '1e4' as a string, so numeric strings
    are accepted too.
    """
    value = record.get(key, default)
    if isinstance(value, bool):
        raise ConfigException(f"{getattr(record, 'source', 'config')}: {key} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as ex:
        raise ConfigException(f"{getattr(record, 'source', 'config')}: {key} must be a number, got {value!r}") from ex


def load_document(filename: Union[str, Path]) -> dict:
    """Parse a JSON or YAML document"""
    filepath = Path(filename)
    try:
        with open(filepath, "r", encoding="utf-8") as fh:
            if filepath.suffix == ".json":
                return json.load(fh)
            return yaml.safe_load(fh) or {}
    except FileNotFoundError as ex:
        raise ConfigException(f"Configuration file {filepath} not found") from ex
    except (yaml.YAMLError, json.JSONDecodeError) as ex:
        log.debug("unable to parse %s", filepath, exc_info=ex)
        raise ConfigException(f"Unable to parse {filepath}: {ex}") from ex


class Catalog:
    """
    A versioned collection of species records, keyed by name.
    """

    def __init__(self, document: dict, source: str = "anonymous"):
        if not isinstance(document, dict) or "species" not in document:
            raise ConfigException(f"{source} is not a species catalog (expected keys: version, species)")

        self.source = source
        self.version = str(document.get("version", "unversioned"))
        self.records: Dict[str, SystemRecord] = {}

        for i, raw in enumerate(document["species"] or []):
            record = SystemRecord(raw, source=f"{source}[{i}]")
            if "name" not in record:
                raise ConfigException(f"{record.source} has no name")
            if record["name"] in self.records:
                raise ConfigException(f"{source} defines species {record['name']} twice")
            self.records[record["name"]] = record

    @classmethod
    def load(cls, filename: Union[str, Path]) -> Catalog:
        return cls(load_document(filename), source=str(filename))

    @classmethod
    def builtin(cls) -> Catalog:
        return cls.load(BUILTIN_CATALOG)

    def names(self) -> List[str]:
        return list(self.records.keys())

    def record(self, name: str) -> SystemRecord:
        if name not in self.records:
            raise ConfigException(f"Unknown species {name} - only know about {', '.join(self.names())}")
        return self.records[name]

    def system(self, name: str) -> PhysicalSystem:
        return self.record(name).system()

    def systems(self) -> List[PhysicalSystem]:
        return [record.system() for record in self.records.values()]


def parse_override_list(overrides: List[str]) -> dict:
    """
    Parse user-provided `key=value` arguments into a dict. Values are parsed as YAML
    so that --set 'N=10000' gives a number, while --set name=foo needs no quoting.
    """
    ret_val = {}
    for kv in overrides:
        if "=" not in kv:
            raise ConfigException(f"override {kv!r} is not of the form key=value")
        key, value = kv.split("=", 1)
        try:
            parsed_value = yaml.safe_load(value)
        except yaml.YAMLError:
            parsed_value = value
        ret_val[key.strip()] = parsed_value

    return ret_val


def load_system(
    species: Union[str, None] = None,
    config: Union[str, Path, None] = None,
    overrides: Union[List[str], None] = None,
    catalog: Union[Catalog, None] = None,
) -> PhysicalSystem:
    """
    Build a PhysicalSystem from a catalog entry, a config file and overrides, in
    increasing order of precedence.
    """
    record = SystemRecord({}, source="defaults")

    if species:
        catalog = catalog or Catalog.builtin()
        record = record.merged(catalog.record(species))

    if config:
        document = load_document(config)
        record = record.merged(SystemRecord(document, source=str(config)))

    if overrides:
        record = record.merged(SystemRecord(parse_override_list(overrides), source="--set"))

    if not species and not config and not overrides:
        raise ConfigException("No system given - use --species, --config or --set")

    log.debug("resolved system record %s from %s", dict(record), record.source)
    return record.system()


def system_record(sys: PhysicalSystem) -> dict:
    """Serializable record of a system, the inverse of SystemRecord.system()"""
    return {
        "name": sys.name,
        "lambda_m": sys.wavelength,
        "gamma_rad_s": sys.gamma,
        "T2_s": "radiative" if sys.radiatively_limited else sys.T2,
        "N": sys.N,
        "finesse": sys.finesse,
        "mode_area_m2": sys.mode_area,
        "cavity_length_m": sys.cavity_length,
        "detector_efficiency": sys.detector_efficiency,
        "beta": sys.beta,
    }
