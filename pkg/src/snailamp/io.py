"""Device files, result CSVs and run manifests.

Device files are JSON with unit-suffixed keys; every quantity is converted to
SI (angular frequencies in rad/s) on the way in and back on the way out. This
module is the only place where the /2pi GHz/MHz convention is applied.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from importlib import resources
from pathlib import Path

from .circuit import DeviceSpec
from .errors import SchemaError, UnitError

SCHEMA_VERSION = "1.0"
TOOL_VERSION = "0.1.0"
TWO_PI = 2 * math.pi

# base name -> (DeviceSpec field, {suffix: SI factor}, required)
UNIT_FIELDS = {
    "L_J": ("L_J", {"pH": 1e-12, "nH": 1e-9}, True),
    "C_c": ("C_c", {"fF": 1e-15, "pF": 1e-12}, True),
    "omega0": ("omega_0", {"GHz": TWO_PI * 1e9, "MHz": TWO_PI * 1e6}, True),
    "Z_c": ("Z_c", {"ohm": 1.0}, False),
    "Z_0": ("Z_0", {"ohm": 1.0}, False),
}
DEFAULT_Z_C = 45.0  # ohm; microstrip impedance shared by the bundled devices
PLAIN_FIELDS = {"M": int, "alpha": float, "g3_scale": float, "allow_hysteretic": bool, "name": str}
REQUIRED_PLAIN = ("M", "alpha")
SERIAL_UNITS = {"L_J": "pH", "C_c": "pF", "omega0": "GHz", "Z_c": "ohm", "Z_0": "ohm"}
TOP_LEVEL = {"schema_version", "device", "kappa_table", "metadata"}


def _num(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {value!r}", path)
    if not math.isfinite(value):
        raise SchemaError("value must be finite", path)
    return float(value)


def _round15(x: float) -> float:
    # stable text form so that parse -> serialize -> parse is an identity
    return float(f"{x:.15g}")


def device_from_dict(data, source: str = "<dict>") -> DeviceSpec:
    if not isinstance(data, dict):
        raise SchemaError(f"{source}: top level must be an object", "")
    for key in data:
        if key not in TOP_LEVEL:
            raise SchemaError(f"{source}: unknown field", key)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{source}: unsupported schema_version {version!r}", "schema_version")
    dev = data.get("device")
    if not isinstance(dev, dict):
        raise SchemaError(f"{source}: missing device object", "device")
    kwargs = {}
    seen_units = set()
    for key, value in dev.items():
        path = f"device.{key}"
        if key in PLAIN_FIELDS:
            typ = PLAIN_FIELDS[key]
            if typ is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise SchemaError("expected an integer", path)
                kwargs[key] = value
            elif typ is float:
                kwargs[key] = _num(value, path)
            elif typ is bool:
                if not isinstance(value, bool):
                    raise SchemaError("expected true or false", path)
                kwargs[key] = value
            else:
                kwargs[key] = str(value)
            continue
        base, _, suffix = key.rpartition("_")
        if key in UNIT_FIELDS:
            raise UnitError(f"{key} needs a unit suffix such as {key}_{SERIAL_UNITS[key]}", path)
        if base not in UNIT_FIELDS:
            raise SchemaError("unknown field", path)
        field, units, _ = UNIT_FIELDS[base]
        if suffix not in units:
            raise UnitError(f"unsupported unit {suffix!r}; use one of {sorted(units)}", path)
        if base in seen_units:
            raise SchemaError(f"{base} given more than once", path)
        seen_units.add(base)
        kwargs[field] = _num(value, path) * units[suffix]
    for base, (field, units, required) in UNIT_FIELDS.items():
        if required and base not in seen_units:
            raise UnitError(f"missing {base} (with unit suffix, e.g. {base}_{SERIAL_UNITS[base]})",
                            f"device.{base}_{SERIAL_UNITS[base]}")
    kwargs.setdefault("Z_c", DEFAULT_Z_C)
    for key in REQUIRED_PLAIN:
        if key not in kwargs:
            raise SchemaError("missing required field", f"device.{key}")
    table = data.get("kappa_table")
    if table is not None:
        if not isinstance(table, list) or not table:
            raise SchemaError("kappa_table must be a non-empty list of [flux, kappa_MHz]", "kappa_table")
        rows = []
        for i, row in enumerate(table):
            if not isinstance(row, list) or len(row) != 2:
                raise SchemaError("expected [flux, kappa_MHz]", f"kappa_table[{i}]")
            rows.append((_num(row[0], f"kappa_table[{i}][0]"),
                         _num(row[1], f"kappa_table[{i}][1]") * TWO_PI * 1e6))
        kwargs["kappa_override"] = tuple(rows)
    meta = data.get("metadata", {})
    if not isinstance(meta, dict):
        raise SchemaError("metadata must be an object", "metadata")
    try:
        return DeviceSpec(**kwargs)
    except ValueError as err:
        raise SchemaError(str(err), "device") from err


def parse_device(path) -> DeviceSpec:
    """Read and validate a device JSON file."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise SchemaError(f"{path}: empty file", "")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: invalid JSON ({err})", "") from err
    return device_from_dict(data, str(path))


def device_to_dict(spec: DeviceSpec, metadata: dict | None = None) -> dict:
    dev = {}
    if spec.name:
        dev["name"] = spec.name
    for base, unit in SERIAL_UNITS.items():
        field, units, _ = UNIT_FIELDS[base]
        dev[f"{base}_{unit}"] = _round15(getattr(spec, field) / units[unit])
    dev["M"] = spec.M
    dev["alpha"] = spec.alpha
    dev["g3_scale"] = spec.g3_scale
    dev["allow_hysteretic"] = spec.allow_hysteretic
    out = {"schema_version": SCHEMA_VERSION, "device": dev}
    if spec.kappa_override:
        out["kappa_table"] = [[f, _round15(k / (TWO_PI * 1e6))] for f, k in spec.kappa_override]
    out["metadata"] = dict(metadata or {})
    return out


def write_device(spec: DeviceSpec, path, metadata: dict | None = None):
    Path(path).write_text(json.dumps(device_to_dict(spec, metadata), indent=2) + "\n")


def builtin_devices() -> list[str]:
    root = resources.files("snailamp") / "devices"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_device(ref: str) -> tuple[DeviceSpec, str | None]:
    """Device from a file path, or from a bundled name (A to E). Returns (spec, path)."""
    path = Path(ref)
    if path.exists():
        return parse_device(path), str(path)
    if ref in builtin_devices():
        res = resources.files("snailamp") / "devices" / f"{ref}.json"
        with resources.as_file(res) as p:
            return parse_device(p), str(p)
    raise SchemaError(f"no device file or bundled device named {ref!r}", "")


# -- results ----------------------------------------------------------------


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v + 0.0:.12g}"  # + 0.0 folds -0.0 into 0
    try:
        return format_value(float(v))
    except (TypeError, ValueError):
        return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_manifest(command: str, argv: list, inputs: list, settings: dict,
                   outputs: list, point_status: list) -> dict:
    return {
        "tool": "snailamp",
        "tool_version": TOOL_VERSION,
        "command": command,
        "argv": list(argv),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "settings": settings,
        "outputs": [str(p) for p in outputs],
        "point_status": point_status,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def write_manifest(path, manifest: dict):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
