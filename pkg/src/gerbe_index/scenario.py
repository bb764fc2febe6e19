"""Versioned structured-text scenario files and the bundled registry.

A scenario file is line-oriented: a version header, then ``[section]``
blocks of ``key = value`` pairs.  Values are plain tokens; lists use
whitespace, simplex tuples use ``;`` separators.  Bulk complex tables may
live in little-endian float64 sidecar files (interleaved re/im) referenced
with ``samples:<path> shape=<dims>``.  Everything the bundled fixtures need
is expressible; unknown keys are parse errors so files stay self-checking.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioError, UnsupportedVersion

VERSION_LINE = "gerbe-index-scenario v1"

KNOWN_SECTIONS = {"meta", "complex", "gerbe", "atlas", "bundle", "family",
                  "thom", "verification"}


@dataclass
class Scenario:
    """Parsed scenario: named sections with typed convenience accessors."""

    name: str
    sections: dict = field(default_factory=dict)
    path: str = ""

    def get(self, section: str, key: str, default=None, cast=str):
        sec = self.sections.get(section)
        if sec is None or key not in sec:
            return default
        val = sec[key]
        if cast is bool:
            return val.strip().lower() in ("1", "true", "yes", "on")
        return cast(val)

    def get_ints(self, section: str, key: str, default=()):
        sec = self.sections.get(section, {})
        if key not in sec:
            return tuple(default)
        return tuple(int(x) for x in sec[key].split())

    def has(self, section: str) -> bool:
        return section in self.sections


def parse_scenario_text(text: str, path: str = "") -> Scenario:
    lines = text.splitlines()
    if not lines or lines[0].strip() != VERSION_LINE:
        head = lines[0].strip() if lines else "<empty>"
        if head.startswith("gerbe-index-scenario"):
            raise UnsupportedVersion("unsupported scenario version %r" % head,
                                     module="cli", operation="parse")
        raise ScenarioError("missing version header (expected %r)" % VERSION_LINE,
                            line=1, module="cli", operation="parse")
    sections = {}
    current = None
    for n, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("unterminated section header", line=n,
                                    module="cli", operation="parse")
            name = line[1:-1].strip()
            base = name.split()[0]
            if base not in KNOWN_SECTIONS:
                raise ScenarioError("unknown section %r" % name, line=n,
                                    module="cli", operation="parse")
            current = sections.setdefault(name, {})
            continue
        if current is None:
            raise ScenarioError("key outside any section", line=n,
                                module="cli", operation="parse")
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", line=n,
                                module="cli", operation="parse")
        key, val = line.split("=", 1)
        current[key.strip()] = val.strip()
    name = sections.get("meta", {}).get("name", "unnamed")
    return Scenario(name=name, sections=sections, path=path)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError("cannot read scenario file: %s" % exc,
                            module="cli", operation="load")
    return parse_scenario_text(text, path=path)


def load_sidecar(spec: str, base_dir: str) -> np.ndarray:
    """Load ``samples:<file> shape=a,b,...`` little-endian float64 re/im."""
    parts = spec.split()
    path = parts[0].split(":", 1)[1]
    shape = None
    for p in parts[1:]:
        if p.startswith("shape="):
            shape = tuple(int(x) for x in p[len("shape="):].split(","))
    if shape is None:
        raise ScenarioError("sidecar reference lacks shape=",
                            module="cli", operation="load_sidecar")
    full = os.path.join(base_dir, path)
    raw = np.fromfile(full, dtype="<f8")
    expect = 2 * int(np.prod(shape))
    if raw.size != expect:
        raise ScenarioError("sidecar %s holds %d floats, expected %d"
                            % (path, raw.size, expect),
                            module="cli", operation="load_sidecar")
    return (raw[0::2] + 1j * raw[1::2]).reshape(shape)


def write_sidecar(path: str, values: np.ndarray):
    arr = np.asarray(values, dtype=complex)
    out = np.empty(arr.size * 2, dtype="<f8")
    out[0::2] = arr.real.reshape(-1)
    out[1::2] = arr.imag.reshape(-1)
    out.tofile(path)


# ---------------------------------------------------------------------------
# bundled scenario texts


def _monopole_text(charge: int = 1, grid: int = 64) -> str:
    return f"""{VERSION_LINE}

[meta]
name = monopole

[complex]
vertices = 2
simplices = 0 1

[gerbe]
order = 1

[atlas]
preset = sphere2
chart = area
grid = {grid} {grid}

[bundle E]
rank = 1
transitions = preset:monopole({charge})
connection = preset:monopole({charge})

[verification]
checks = validate chern convergence
tolerance = 1e-6
"""


def _suspended_rp2_text() -> str:
    return f"""{VERSION_LINE}

[meta]
name = suspended-rp2-gerbe

[complex]
preset = suspended-rp2

[gerbe]
order = 2
theta = preset:suspended-rp2

[verification]
checks = ddclass
"""


def _bott_text(twisted: bool, grid: int = 64, truncation: int = 16) -> str:
    name = "bott-toeplitz-twisted" if twisted else "bott-toeplitz"
    atlas = "sphere3" if twisted else "sphere2"
    vertices = "3" if twisted else "2"
    simplices = "0 1 2" if twisted else "0 1"
    gerbe = "order = 2\nmu = 1 0 0" if twisted else "order = 1"
    return f"""{VERSION_LINE}

[meta]
name = {name}

[complex]
vertices = {vertices}
simplices = {simplices}

[gerbe]
{gerbe}

[atlas]
preset = {atlas}
chart = angle
grid = {grid} {grid}

[family]
preset = toeplitz-clutching
truncation = {truncation}
fiber-rank = 2
mode = hardy
theta-grid = 32

[verification]
checks = elliptic compat index det-line
tolerance = 1e-3
stabilizer-margin = 0.25
"""


def _thom_text() -> str:
    return f"""{VERSION_LINE}

[meta]
name = thom-rr-line

[complex]
vertices = 2
simplices = 0 1

[gerbe]
order = 1

[atlas]
preset = disc-bundle
chart = area
grid = 32 32
fiber-grid = 56 8
radius = 1.0

[thom]
cases = 0 0 ; 1 0 ; 2 1
sigma-fraction = 0.25

[verification]
checks = thom-rr
tolerance = 1e-3
leak-tolerance = 1e-6
"""


BUNDLED = {
    "monopole": _monopole_text,
    "suspended-rp2-gerbe": _suspended_rp2_text,
    "bott-toeplitz": lambda: _bott_text(False),
    "bott-toeplitz-twisted": lambda: _bott_text(True),
    "thom-rr-line": _thom_text,
}


def bundled_scenario(name: str, **kw) -> Scenario:
    if name not in BUNDLED:
        raise ScenarioError("unknown bundled scenario %r (have: %s)"
                            % (name, ", ".join(sorted(BUNDLED))),
                            module="cli", operation="bundled_scenario")
    return parse_scenario_text(BUNDLED[name](**kw), path="<bundled:%s>" % name)


def resolve_scenario(path_or_name: str) -> Scenario:
    if path_or_name in BUNDLED:
        return bundled_scenario(path_or_name)
    return load_scenario(path_or_name)
