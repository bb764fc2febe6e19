"""Scenario execution: build objects from parsed sections and run checks."""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import fixtures
from .atlas import Atlas, sphere_three_patch, sphere_two_patch
from .bundles import validate
from .chernweil import (chern_character_form, curvature, integrate,
                        thom_rr_check)
from .errors import ScenarioError
from .family import FamilySpec, stabilize
from .gerbe import CombinatorialCover, GerbeCocycle, classify_per_degree
from .scenario import Scenario
from .simplicial import SimplicialComplex
from .verify import VerificationReport, verify_family


def build_complex(scn: Scenario) -> SimplicialComplex:
    sec = scn.sections.get("complex", {})
    preset = sec.get("preset")
    if preset == "suspended-rp2":
        return fixtures.suspended_rp2()
    if preset == "rp2":
        return fixtures.rp2_six_vertex()
    if preset is not None:
        raise ScenarioError("unknown complex preset %r" % preset,
                            module="cli", operation="build_complex")
    try:
        vertices = int(sec["vertices"])
        sims = [tuple(int(v) for v in part.split())
                for part in sec.get("simplices", "").split(";") if part.strip()]
    except (KeyError, ValueError) as exc:
        raise ScenarioError("bad complex section: %s" % exc,
                            module="cli", operation="build_complex")
    return SimplicialComplex.from_simplices(vertices, sims)


def build_twist(scn: Scenario, cover: CombinatorialCover) -> GerbeCocycle:
    sec = scn.sections.get("gerbe", {})
    n = int(sec.get("order", 1))
    if sec.get("theta") == "preset:suspended-rp2":
        X, theta = fixtures.suspended_rp2_z2_cocycle()
        if cover.base != X:
            raise ScenarioError("theta preset requires the suspended-rp2 complex",
                                module="cli", operation="build_twist")
        return GerbeCocycle(cover, 2, theta)
    if "theta-values" in sec:
        vals = tuple(int(x) % n for x in sec["theta-values"].split())
        return GerbeCocycle(cover, n, vals)
    if "mu" in sec:
        mu = [int(x) for x in sec["mu"].split()]
        return fixtures.coboundary_twist(cover, mu, n)
    from .gerbe import zero_twist
    return zero_twist(cover, n)


def build_atlas(scn: Scenario, resolution: int = None):
    sec = scn.sections.get("atlas")
    if sec is None:
        return None
    preset = sec.get("preset", "sphere2")
    grid = [int(x) for x in sec.get("grid", "64 64").split()]
    if resolution:
        grid = [resolution, resolution]
    chart = sec.get("chart", "area")
    grading = float(sec.get("grading", 6e-4))
    if preset == "sphere2":
        return sphere_two_patch(grid[0], grid[1], grading, chart)
    if preset == "sphere3":
        return sphere_three_patch(grid[0], grid[1], grading, chart)
    if preset == "disc-bundle":
        fiber = [int(x) for x in sec.get("fiber-grid", "56 8").split()]
        from .atlas import disc_bundle_atlas
        base = sphere_two_patch(grid[0], grid[1], grading, chart)
        return disc_bundle_atlas(base, n_rho=fiber[0], n_angle=fiber[1],
                                 radius=float(sec.get("radius", 1.0)))
    raise ScenarioError("unknown atlas preset %r" % preset,
                        module="cli", operation="build_atlas")


_MONO_RE = re.compile(r"preset:monopole\((-?\d+)\)")


def monopole_charge(scn: Scenario) -> int:
    for name, sec in scn.sections.items():
        if name.startswith("bundle"):
            m = _MONO_RE.match(sec.get("transitions", ""))
            if m:
                return int(m.group(1))
    return 1


def build_family(scn: Scenario, atlas: Atlas, truncation: int = None
                 ) -> FamilySpec:
    sec = scn.sections.get("family")
    if sec is None:
        raise ScenarioError("scenario has no family section",
                            module="cli", operation="build_family")
    preset = sec.get("preset", "toeplitz-clutching")
    K = truncation or int(sec.get("truncation", 16))
    twisted = scn.has("gerbe") and "mu" in scn.sections["gerbe"]
    if preset == "toeplitz-clutching":
        F = fixtures.bott_toeplitz_family(atlas, truncation=K, twisted=twisted)
    elif preset == "dirac-twist":
        F = fixtures.dirac_twist_family(atlas, truncation=K)
    elif preset.startswith("multiplier("):
        m = int(preset[len("multiplier("):-1])
        F = fixtures.winding_family(atlas, m, truncation=K)
    else:
        raise ScenarioError("unknown family preset %r" % preset,
                            module="cli", operation="build_family")
    F.n_theta = int(sec.get("theta-grid", 32))
    return F


@dataclass
class RunOptions:
    resolution: int = None
    truncation: int = None
    tolerance: float = None
    threads: int = 1
    n_theta: int = None


def structural_validate(scn: Scenario, opts: RunOptions) -> VerificationReport:
    """Light checks: cocycle laws, partition sums, ellipticity; no index."""
    report = VerificationReport(scenario=scn.name,
                                metadata={"mode": "validate",
                                          "threads": opts.threads})
    X = build_complex(scn)
    cover = CombinatorialCover(X)
    twist = build_twist(scn, cover)
    twist.check_cocycle("cmd_validate")
    report.extras["twist_order"] = twist.n
    atlas = build_atlas(scn, opts.resolution)
    if atlas is not None:
        dev = atlas.check_partition_of_unity()
        report.add("partition-of-unity", dev, 0.0, 1e-10)
    if atlas is not None and scn.name in ("monopole",):
        E = fixtures.monopole_bundle(atlas, monopole_charge(scn))
        rep = validate(E)
        report.add("weak-cocycle-residual", rep.max_residual, 0.0, E.tolerance)
    if atlas is not None and scn.has("family"):
        from .family import check_elliptic
        F = build_family(scn, atlas, opts.truncation)
        cert = check_elliptic(F)
        report.add("symbol-condition", cert.worst_condition, 1.0,
                   F.kappa_max)
    return report


def run_ddclass(scn: Scenario, opts: RunOptions):
    X = build_complex(scn)
    cover = CombinatorialCover(X)
    twist = build_twist(scn, cover)
    beta, cls, desc = classify_per_degree(twist)
    return cls, desc


def chern_integrals(scn: Scenario, opts: RunOptions):
    """Character integrals for the scenario's bundle, degree by degree."""
    atlas = build_atlas(scn, opts.resolution)
    charge = monopole_charge(scn)
    twisted = scn.has("gerbe") and "mu" in scn.sections.get("gerbe", {})
    if twisted:
        tm = fixtures.twisted_monopole(atlas, charge)
        conn = tm.connection()
        rank = tm.bundle.rank
    else:
        conn = fixtures.monopole_connection(atlas, charge)
        rank = 1
    ch = chern_character_form(curvature(conn))
    deg2 = integrate(ch, atlas)
    return {"degree-0": float(rank), "degree-2": deg2.real}


def run_verify(scn: Scenario, opts: RunOptions) -> VerificationReport:
    checks = scn.get("verification", "checks", default="", cast=str).split()
    tolerance = opts.tolerance or scn.get("verification", "tolerance",
                                          default=1e-3, cast=float)
    meta = {"threads": opts.threads,
            "resolution": opts.resolution
            or scn.get_ints("atlas", "grid", (64, 64))[0],
            "tolerance": tolerance}

    if "thom-rr" in checks:
        return _verify_thom(scn, opts, tolerance, meta)
    if "ddclass" in checks:
        report = VerificationReport(scenario=scn.name, metadata=meta)
        cls, desc = run_ddclass(scn, opts)
        expected_nontrivial = scn.get("gerbe", "theta", "") == \
            "preset:suspended-rp2"
        report.add("torsion-class-order",
                   0.0 if cls.is_zero else float(cls.torsion[0]),
                   2.0 if expected_nontrivial else 0.0, 0.0)
        report.extras["class"] = desc
        return report
    if "chern" in checks:
        report = VerificationReport(scenario=scn.name, metadata=meta)
        charge = monopole_charge(scn)
        vals = chern_integrals(scn, opts)
        report.add("chern-degree-2", vals["degree-2"], float(charge), tolerance)
        if "convergence" in checks:
            res = opts.resolution or scn.get_ints("atlas", "grid", (64, 64))[0]
            opts2 = RunOptions(resolution=2 * res, threads=opts.threads)
            vals2 = chern_integrals(scn, opts2)
            e1 = abs(vals["degree-2"] - charge)
            e2 = abs(vals2["degree-2"] - charge)
            ratio = e1 / e2 if e2 else float("inf")
            report.add("convergence-ratio", ratio, 4.0, 0.5)
            report.extras["error_coarse"] = e1
            report.extras["error_fine"] = e2
        return report

    # family scenarios
    atlas = build_atlas(scn, opts.resolution)
    F = build_family(scn, atlas, opts.truncation)
    if opts.n_theta:
        F.n_theta = opts.n_theta
    margin = scn.get("verification", "stabilizer-margin", default=1e-6,
                     cast=float)
    stab = stabilize(F, sv_min=margin)
    meta["truncation"] = F.fiber.truncation
    meta["theta_grid"] = F.n_theta
    meta["stabilizer_margin"] = margin
    return verify_family(F, scn.name, tolerance=tolerance, n_theta=F.n_theta,
                         metadata=meta, stab=stab)


def _verify_thom(scn: Scenario, opts: RunOptions, tolerance, meta
                 ) -> VerificationReport:
    report = VerificationReport(scenario=scn.name, metadata=meta)
    leak_tol = scn.get("verification", "leak-tolerance", default=1e-6,
                       cast=float)
    cases = [tuple(int(v) for v in part.split())
             for part in scn.get("thom", "cases", default="1 0").split(";")]
    grid = scn.get_ints("atlas", "grid", (32, 32))
    fiber = scn.get_ints("atlas", "fiber-grid", (56, 8))
    for (e, f) in cases:
        sc = fixtures.thom_line_scenario(
            e, f, n_base=opts.resolution or grid[0],
            n_rho=fiber[0], n_angle=fiber[1],
            radius=scn.get("atlas", "radius", 1.0, float))
        res = thom_rr_check(sc.base, sc.product, sc.alpha_phi, sc.dalpha,
                            sc.F_curv, sc.F_rank, sc.E_curv, sc.profile,
                            leak_tolerance=leak_tol)
        report.add("pushforward-identity-e%d-f%d" % (e, f),
                   res.lhs, res.rhs, tolerance)
        report.add("boundary-leak-e%d-f%d" % (e, f),
                   res.boundary_leak, 0.0, leak_tol)
    return report
