"""Report rendering: parse machine reports, print tables, draw figures.

The machine form is the stable interface (byte-identical for identical
inputs); this module is the downstream consumer that renders a summary
table and, on request, writes comparison figures next to the delimited
output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass
class ParsedReport:
    scenario: str
    metadata: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)   # dicts with name/analytic/...
    extras: dict = field(default_factory=dict)
    passed: bool = True


def parse_machine_report(text: str) -> ParsedReport:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "gerbe-index-report v1":
        raise ValueError("not a machine report (missing header)")
    rep = ParsedReport(scenario="unnamed")
    section = None
    row = None
    for raw in lines[1:]:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("["):
            name = line[1:-1]
            if name.startswith("check "):
                row = {"name": name[len("check "):]}
                rep.rows.append(row)
                section = "check"
            else:
                section = name
                row = None
            continue
        key, val = [p.strip() for p in line.split("=", 1)]
        if section == "scenario":
            if key == "name":
                rep.scenario = val
            else:
                rep.metadata[key] = val
        elif section == "check":
            row[key] = val
        elif section == "extras":
            rep.extras[key] = val
        elif section == "result":
            if key == "passed":
                rep.passed = (val == "yes")
    return rep


def render_table(rep: ParsedReport) -> str:
    lines = []
    lines.append("scenario: %s" % rep.scenario)
    for k in sorted(rep.metadata):
        lines.append("  %s: %s" % (k, rep.metadata[k]))
    lines.append("")
    header = "%-32s %14s %14s %12s %10s  %s" % (
        "check", "analytic", "topological", "residual", "tolerance", "status")
    lines.append(header)
    lines.append("-" * len(header))
    for row in rep.rows:
        lines.append("%-32s %14.6g %14.6g %12.3e %10.1e  %s" % (
            row["name"], float(row["analytic"]), float(row["topological"]),
            float(row["residual"]), float(row["tolerance"]),
            "pass" if row.get("passed") == "yes" else "FAIL"))
    for k in sorted(rep.extras):
        lines.append("extra %s = %s" % (k, rep.extras[k]))
    lines.append("")
    lines.append("overall: %s" % ("pass" if rep.passed else "FAIL"))
    return "\n".join(lines)


def render_figures(rep: ParsedReport, out_dir: str, stem: str) -> list:
    """Write comparison and residual figures; returns the file paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    names = [r["name"] for r in rep.rows]
    analytic = [float(r["analytic"]) for r in rep.rows]
    topo = [float(r["topological"]) for r in rep.rows]
    resid = [max(float(r["residual"]), 1e-18) for r in rep.rows]
    tol = [float(r["tolerance"]) for r in rep.rows]
    x = np.arange(len(names))

    fig, ax = plt.subplots(figsize=(max(6.0, 1.4 * len(names)), 4.0))
    w = 0.38
    ax.bar(x - w / 2, analytic, w, label="analytic", color="#2c6fbb")
    ax.bar(x + w / 2, topo, w, label="topological", color="#bb4430")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=25, ha="right", fontsize=8)
    ax.set_ylabel("paired value")
    ax.set_title("%s: pipeline comparison" % rep.scenario)
    ax.legend()
    fig.tight_layout()
    p1 = os.path.join(out_dir, "%s_comparison.png" % stem)
    fig.savefig(p1, dpi=150)
    plt.close(fig)
    paths.append(p1)

    fig, ax = plt.subplots(figsize=(max(6.0, 1.4 * len(names)), 4.0))
    ax.bar(x, resid, 0.5, color="#2c6fbb", label="residual")
    ax.plot(x, tol, "k_", markersize=18, label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=25, ha="right", fontsize=8)
    ax.set_ylabel("|analytic - topological|")
    ax.set_title("%s: residuals vs tolerances" % rep.scenario)
    ax.legend()
    fig.tight_layout()
    p2 = os.path.join(out_dir, "%s_residuals.png" % stem)
    fig.savefig(p2, dpi=150)
    plt.close(fig)
    paths.append(p2)
    return paths
