"""Scenario documents: a flat TOML file with one level of sections.

Minimal example::

    algebra = "matrix:2"
    control = "powersum eps=0.1 p=0.5"
    mode = "homomorphism"

Every section, key and default is listed in :data:`SCHEMA`.  Parsing resolves
defaults, validates every object through its constructor and keeps the
resolved document for echoing.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass

import tomli
import tomli_w

from .algebra import FiniteAlgebra, algebra_from_name
from .control import (
    DERIVATION,
    HOMOMORPHISM,
    ControlError,
    ControlFunction,
    LinearMap,
    base_map_from_name,
)
from .fuzzy_norm import DEFAULT_RANDOM_POINTS, DEFAULT_SCALARS, DEFAULT_THRESHOLDS, FuzzyNorm, NormKind, SampleGrid, default_grid
from .stabilizer import DYADIC, LINEAR, SUPERLINEAR, StabilizerConfig

REQUIRED = object()

SCHEMA: dict[str, dict[str, tuple[type | tuple[type, ...], object]]] = {
    "algebra": {
        "name": (str, None),
        "norm": (str, "sup"),
        "dim": (int, None),
        "structure_constants": (list, None),
        "label": (str, "custom"),
    },
    "norm": {
        "kind": (str, "indicator"),
        "levels": (list, None),
        "codomain_kind": (str, None),
        "codomain_levels": (list, None),
    },
    "control": {
        "kind": (str, REQUIRED),
        "eps": (float, REQUIRED),
        "p": (float, None),
        "alpha": (float, None),
    },
    "perturbation": {
        "mode": (str, REQUIRED),
        "base": (str, None),
        "seed": (int, 0),
        "noise_scale": (float, 0.0),
        "profile": (str, "hashed"),
        "max_retries": (int, 8),
    },
    "stabilizer": {
        "mode": (str, DYADIC),
        "max_iters": (int, 64),
        "tol": (float, 1e-10),
        "overflow_cap": (float, 1e150),
        "fuzzy_delta": (float, 1e-6),
    },
    "grid": {
        "thresholds": (list, list(DEFAULT_THRESHOLDS)),
        "random_points": (int, DEFAULT_RANDOM_POINTS),
        "seed": (int, 0),
        "scalars": (list, list(DEFAULT_SCALARS)),
    },
    "uniqueness": {
        "mode": (str, None),
        "max_iters": (int, 20000),
        "tol": (float, 1e-9),
        "crisp_tol": (float, 1e-4),
        "delta": (float, 1e-4),
    },
    "verify": {
        "identity_tol": (float, None),
    },
    "outputs": {
        "dir": (str, None),
    },
}

SHORTHANDS = {"algebra": ("algebra", "name"), "mode": ("perturbation", "mode")}
DEFAULT_BASE = {HOMOMORPHISM: "identity", DERIVATION: "inner"}
NORM_KIND_NAMES = {k.value: k for k in NormKind}


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid scenario:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class Scenario:
    resolved: dict
    algebra: FiniteAlgebra
    norm: FuzzyNorm
    control: ControlFunction
    base: LinearMap
    grid: SampleGrid
    stabilizer: StabilizerConfig
    alt_stabilizer: StabilizerConfig
    scalars: tuple[float, ...]

    @property
    def mode(self) -> str:
        return self.resolved["perturbation"]["mode"]

    @property
    def perturbation(self) -> dict:
        return self.resolved["perturbation"]

    @property
    def uniqueness(self) -> dict:
        return self.resolved["uniqueness"]

    @property
    def identity_tol(self) -> float:
        return self.resolved["verify"]["identity_tol"]

    def echo(self) -> str:
        return echo(self.resolved)


def _locate(text: str, section: str | None, key: str | None) -> str:
    """Best-effort ``line N`` for a section/key in the source document."""
    if not text:
        return ""
    current = None
    header = re.compile(r"^\s*\[([^\]]+)\]\s*(#.*)?$")
    for lineno, line in enumerate(text.splitlines(), 1):
        m = header.match(line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return f"line {lineno}: "
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return f"line {lineno}: "
    return ""


def _parse_control_shorthand(text: str) -> dict:
    """``"powersum eps=0.1 p=0.5"`` -> ``{"kind": "powersum", "eps": 0.1, "p": 0.5}``."""
    parts = text.split()
    if not parts:
        raise ValueError("empty control shorthand")
    out: dict = {"kind": parts[0]}
    for item in parts[1:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value in control shorthand, got {item!r}")
        out[key] = float(value)
    return out


def _coerce(value, typ, path: str, problems: list[str], where: str):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}{path}: expected a number, got {value!r}")
            return None
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}{path}: expected an integer, got {value!r}")
            return None
        return value
    if not isinstance(value, typ):
        problems.append(f"{where}{path}: expected {typ.__name__}, got {value!r}")
        return None
    return value


def _expand_shorthands(doc: dict, text: str, problems: list[str]) -> None:
    """Rewrite top-level shorthands (``algebra``, ``mode``, ``control``) into their sections, in place."""
    for short, (section, key) in SHORTHANDS.items():
        if short in doc and not isinstance(doc[short], dict):
            value = doc.pop(short)
            doc.setdefault(section, {})
            if key in doc[section]:
                problems.append(f"{_locate(text, None, short)}{short}: given both as shorthand and as {section}.{key}")
            doc[section][key] = value
    if "control" in doc and isinstance(doc["control"], str):
        try:
            doc["control"] = _parse_control_shorthand(doc["control"])
        except ValueError as exc:
            problems.append(f"{_locate(text, None, 'control')}control: {exc}")
            doc["control"] = {}


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values are read as TOML, else as bare strings."""
    doc = copy.deepcopy(doc)
    problems: list[str] = []
    _expand_shorthands(doc, "", problems)
    if problems:
        raise ScenarioError(problems)
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep:
            raise ScenarioError([f"--set {item!r}: expected section.key=value"])
        path = path.strip()
        try:
            value = tomli.loads(f"v = {raw.strip()}")["v"]
        except tomli.TOMLDecodeError:
            value = raw.strip()
        if path in SHORTHANDS:
            path = ".".join(SHORTHANDS[path])
        elif path == "control" and isinstance(value, str):
            try:
                doc["control"] = _parse_control_shorthand(value)
            except ValueError as exc:
                raise ScenarioError([f"--set control: {exc}"]) from None
            continue
        if "." in path:
            section, key = path.split(".", 1)
            doc.setdefault(section, {})
            if not isinstance(doc[section], dict):
                doc[section] = {}
            doc[section][key] = value
        else:
            doc[path] = value
    return doc


def load_document(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError([f"malformed document: {exc}"]) from None


def parse_scenario(text: str, overrides: list[str] | None = None) -> Scenario:
    """Parse, resolve defaults and validate a scenario document."""
    doc = load_document(text)
    if overrides:
        doc = apply_overrides(doc, overrides)
    return resolve(doc, text)


def resolve(doc: dict, text: str = "") -> Scenario:
    problems: list[str] = []
    doc = copy.deepcopy(doc)

    _expand_shorthands(doc, text, problems)

    resolved: dict = {}
    for section, value in doc.items():
        if section not in SCHEMA:
            problems.append(f"{_locate(text, section, None) or _locate(text, None, section)}{section}: unknown section")
        elif not isinstance(value, dict):
            problems.append(f"{_locate(text, None, section)}{section}: expected a table")
    for section, fields in SCHEMA.items():
        given = doc.get(section, {}) if isinstance(doc.get(section, {}), dict) else {}
        out = {}
        for key in given:
            if key not in fields:
                problems.append(f"{_locate(text, section, key)}{section}.{key}: unknown field")
        for key, (typ, default) in fields.items():
            if key in given:
                out[key] = _coerce(given[key], typ, f"{section}.{key}", problems, _locate(text, section, key))
            elif default is REQUIRED:
                problems.append(f"{section}.{key}: required field missing")
                out[key] = None
            else:
                out[key] = copy.deepcopy(default)
        resolved[section] = out
    alg_spec = resolved["algebra"]
    if alg_spec["name"] is None and alg_spec["structure_constants"] is None:
        problems.append("algebra.name: required field missing (or give algebra.dim and algebra.structure_constants)")
    if problems:
        raise ScenarioError(problems)
    return _build(resolved, text)


def _norm_from(kind: str, levels, alg, path: str, where: str) -> FuzzyNorm:
    if kind not in NORM_KIND_NAMES:
        raise ScenarioError([f"{where}{path}: unknown fuzzy norm kind {kind!r}; expected one of {sorted(NORM_KIND_NAMES)}"])
    nk = NORM_KIND_NAMES[kind]
    if nk is NormKind.LEVELS:
        if not levels:
            raise ScenarioError([f"{where}{path}: a level family needs a levels table [[c, weight], ...]"])
        try:
            return FuzzyNorm.level_family([tuple(map(float, row)) for row in levels], alg)
        except (TypeError, ValueError) as exc:
            raise ScenarioError([f"{where}{path}: {exc}"]) from None
    if levels:
        raise ScenarioError([f"{where}{path}: levels are only meaningful for kind 'levels'"])
    return FuzzyNorm.ratio(alg) if nk is NormKind.RATIO else FuzzyNorm.indicator(alg)


def _build(r: dict, text: str) -> Scenario:
    problems: list[str] = []

    def fail(section, key, msg):
        problems.append(f"{_locate(text, section, key)}{section}.{key}: {msg}")

    a = r["algebra"]
    alg = None
    try:
        if a["structure_constants"] is not None:
            if a["name"] is not None:
                raise ValueError("give either a built-in name or inline structure constants, not both")
            dim = a["dim"]
            if dim is None:
                raise ValueError("inline structure constants need algebra.dim")
            flat = [float(v) for v in a["structure_constants"]]
            if len(flat) != dim**3:
                raise ValueError(f"expected dim^3 = {dim**3} structure constants, got {len(flat)}")
            import numpy as np

            alg = FiniteAlgebra(dim, np.array(flat).reshape(dim, dim, dim), a["norm"], a["label"])
        else:
            alg = algebra_from_name(a["name"], a["norm"])
            a["label"] = alg.label
            a["dim"] = alg.dim
    except (TypeError, ValueError) as exc:
        fail("algebra", "name" if a["name"] else "structure_constants", str(exc))
    if alg is None:
        raise ScenarioError(problems)

    nspec = r["norm"]
    if nspec["codomain_kind"] is None:
        nspec["codomain_kind"] = nspec["kind"]
        if nspec["codomain_levels"] is None:
            nspec["codomain_levels"] = nspec["levels"]
    try:
        norm = _norm_from(nspec["kind"], nspec["levels"], alg, "norm.kind", _locate(text, "norm", "kind"))
        cod_norm = _norm_from(nspec["codomain_kind"], nspec["codomain_levels"], None, "norm.codomain_kind", _locate(text, "norm", "codomain_kind"))
    except ScenarioError as exc:
        raise ScenarioError(problems + exc.problems) from None
    for key in ("levels", "codomain_levels"):
        if nspec[key] is None:
            nspec[key] = []

    st = r["stabilizer"]
    c = r["control"]
    ctrl = None
    try:
        ctrl = ControlFunction(c["kind"], c["eps"], cod_norm, p=c["p"], alpha=c["alpha"], superlinear=st["mode"] == SUPERLINEAR)
        c["alpha"] = ctrl.alpha
        if c["p"] is None:
            c["p"] = 0.0 if ctrl.kind == "constant" else ctrl.p
    except ControlError as exc:
        fail("control", "p" if c.get("p") is not None else "kind", str(exc))

    pert = r["perturbation"]
    if pert["mode"] not in (HOMOMORPHISM, DERIVATION):
        fail("perturbation", "mode", f"expected 'homomorphism' or 'derivation', got {pert['mode']!r}")
    else:
        if pert["base"] is None:
            pert["base"] = "euler" if pert["mode"] == DERIVATION and alg.label.startswith("poly:") else DEFAULT_BASE[pert["mode"]]
    if pert["noise_scale"] is not None and not pert["noise_scale"] >= 0:
        fail("perturbation", "noise_scale", "must be nonnegative")
    if pert["profile"] not in ("hashed", "aligned"):
        fail("perturbation", "profile", f"expected 'hashed' or 'aligned', got {pert['profile']!r}")
    if pert["max_retries"] < 0:
        fail("perturbation", "max_retries", "must be nonnegative")
    if not 0 <= pert["seed"] < 2**64:
        fail("perturbation", "seed", "must be an unsigned 64-bit integer")
    base = None
    if pert["mode"] in (HOMOMORPHISM, DERIVATION):
        try:
            base = base_map_from_name(pert["base"], alg, pert["mode"])
        except ValueError as exc:
            fail("perturbation", "base", str(exc))

    cfg = alt = None
    try:
        cfg = StabilizerConfig(st["mode"], st["max_iters"], st["tol"], st["overflow_cap"], st["fuzzy_delta"])
    except ValueError as exc:
        fail("stabilizer", "mode", str(exc))
    u = r["uniqueness"]
    if u["mode"] is None:
        u["mode"] = {DYADIC: LINEAR, LINEAR: DYADIC, SUPERLINEAR: SUPERLINEAR}.get(st["mode"], LINEAR)
    try:
        alt = StabilizerConfig(u["mode"], u["max_iters"], u["tol"], st["overflow_cap"], st["fuzzy_delta"])
    except ValueError as exc:
        fail("uniqueness", "mode", str(exc))
    if not 0 < u["delta"] < 1:
        fail("uniqueness", "delta", "must lie in (0, 1)")
    if not u["crisp_tol"] > 0:
        fail("uniqueness", "crisp_tol", "must be positive")
    if r["verify"]["identity_tol"] is None and cfg is not None:
        r["verify"]["identity_tol"] = 100.0 * cfg.tol

    g = r["grid"]
    grid = None
    try:
        thresholds = [float(t) for t in g["thresholds"]]
        if g["random_points"] < 0:
            raise ValueError("random_points must be nonnegative")
        grid = default_grid(alg, g["seed"], g["random_points"], thresholds)
        g["thresholds"] = thresholds
    except (TypeError, ValueError) as exc:
        fail("grid", "thresholds", str(exc))
    try:
        scalars = tuple(float(s) for s in g["scalars"])
        if any(s == 0 or not math.isfinite(s) for s in scalars):
            raise ValueError("scalars must be finite and nonzero")
        g["scalars"] = list(scalars)
    except (TypeError, ValueError) as exc:
        fail("grid", "scalars", str(exc))
        scalars = ()

    if problems:
        raise ScenarioError(problems)
    return Scenario(r, alg, norm, ctrl, base, grid, cfg, alt, scalars)


def _toml_safe(value):
    if isinstance(value, dict):
        return {k: _toml_safe(v) for k, v in value.items() if v is not None}
    if isinstance(value, list):
        return [_toml_safe(v) for v in value]
    return value


def echo(resolved: dict) -> str:
    """Resolved scenario as TOML (unset optional fields omitted)."""
    return tomli_w.dumps(_toml_safe(resolved))
