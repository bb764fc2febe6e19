"""Dual-pipeline verification of the family index at character level.

The analytic side runs stabilization, kernel frames, and the Berry
character integrals.  The topological side integrates the odd character
transgression of the clutching symbol over the fiber circle (the
de Rham representative of the symbol push-forward), multiplied by the
vertical Todd form (identically 1 for flat circle fibers) and the fiber
dimension sign.  Reports store every integral, residual, and tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atlas import Atlas, components, diff_axis
from .chernweil import (a_hat_form, average_scalar, chern_character_form,
                        curvature, det_line_c1, integrate, todd_form)
from .errors import NotCertified, NotDiracPreset, NotElliptic
from .family import (EllipticityReport, FamilySpec, IndexBundle,
                     Stabilizer, analytic_index, berry_connection,
                     check_elliptic, check_projective_compat)
from .forms import FormField

FIBER_DIMENSION = 1          # circle fibers throughout
SIGN = (-1) ** FIBER_DIMENSION


@dataclass
class SymbolClass:
    """Clutching data of the family symbol with an invertibility certificate."""

    family: FamilySpec
    certificate: EllipticityReport
    n_theta: int
    compat_residual: float


def symbol_class(F: FamilySpec, n_theta: int = None) -> SymbolClass:
    cert = check_elliptic(F)
    if not cert.ok:
        raise NotElliptic("symbol condition number %.3g exceeds the bound"
                          % cert.worst_condition,
                          module="index-theorem", operation="symbol_class",
                          location=cert.witness)
    compat = check_projective_compat(F)
    return SymbolClass(family=F, certificate=cert,
                       n_theta=n_theta or max(F.n_theta, 16),
                       compat_residual=compat)


def _theta_derivative(sigma: np.ndarray) -> np.ndarray:
    """Spectral derivative along the periodic theta axis (axis 1)."""
    nt = sigma.shape[1]
    freqs = np.fft.fftfreq(nt, d=1.0 / nt)
    hat = np.fft.fft(sigma, axis=1)
    hat *= (1j * freqs)[None, :, None, None]
    return np.fft.ifft(hat, axis=1)


def transgression_form(F: FamilySpec, xi: int, n_theta: int,
                       atlas: Atlas = None) -> FormField:
    """Odd character transgression of the clutching section at one cone ray.

    Degree 0 carries the fiber winding, degree 2 the two-form
    -(1 / 24 pi^2) * integral over theta of the antisymmetrized triple trace
    of sigma^{-1} d sigma, with the fiber leg extracted leftmost.
    """
    atlas = atlas or F.atlas
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    w_theta = 2 * np.pi / n_theta
    out = FormField.zero(atlas, 0)
    for key in sorted(atlas.patches):
        patch = atlas.patches[key]
        shape = patch.shape
        sigma = F.symbol_in_chart(key, thetas, xi)         # (m, nt, v, v)
        m = sigma.shape[0]
        sig_inv = np.linalg.inv(sigma)
        M_t = sig_inv @ _theta_derivative(sigma)
        grid_sigma = sigma.reshape(shape + sigma.shape[1:])
        M_base = []
        for axis, ax in enumerate(patch.axes):
            d = diff_axis(grid_sigma, axis, ax.h, ax.periodic, array_axis=axis)
            M_base.append(sig_inv @ d.reshape(sigma.shape))

        deg0 = (np.einsum("mtvv->m", M_t) * w_theta) / (2j * np.pi)
        out.data[key][0] = deg0.reshape((1,) + shape)

        comp2 = components(patch.dim, 2)
        arr2 = np.zeros((len(comp2),) + shape, dtype=complex)
        for ci, (i, j) in enumerate(comp2):
            Mi, Mj = M_base[i], M_base[j]
            even = np.einsum("mtab,mtbc,mtca->m", M_t, Mi, Mj)
            odd = np.einsum("mtab,mtbc,mtca->m", M_t, Mj, Mi)
            val = 3.0 * (even - odd) * w_theta
            arr2[ci] = (val * (-1.0 / (24 * np.pi ** 2))).reshape(shape)
        out.data[key][2] = arr2
    return out


def topological_index_chern(S: SymbolClass) -> FormField:
    """Topological index form: signed fiber transgression times vertical Todd.

    The vertical tangent is flat for circle fibers, so the Todd factor is
    the constant form 1; it is still multiplied in to keep the formula shape.
    """
    if not S.certificate.ok:
        raise NotCertified("symbol class lacks an invertibility certificate",
                           module="index-theorem",
                           operation="topological_index_chern")
    F = S.family
    plus = transgression_form(F, +1, S.n_theta)
    minus = transgression_form(F, -1, S.n_theta)
    td_vertical = todd_form(FormField.zero(F.atlas, 1))
    return (plus - minus).scaled(SIGN).wedge(td_vertical)


def dirac_index_chern(F: FamilySpec, n_theta: int = 32) -> FormField:
    """Specialized index form for twisted fiber Dirac presets.

    For circle fibers the A-roof form of the flat vertical tangent is 1 and
    the formula reduces to the signed fiber transgression of the twisting
    clutching data alone.
    """
    if not getattr(F.preset, "dirac", False):
        raise NotDiracPreset("family preset %r is not a Dirac twist"
                             % F.preset.name,
                             module="index-theorem", operation="dirac_index_chern")
    cert = check_elliptic(F)
    if not cert.ok:
        raise NotElliptic("twisting clutching is not invertible",
                          module="index-theorem", operation="dirac_index_chern")
    twist_part = transgression_form(F, +1, n_theta)
    a_roof = a_hat_form(FormField.zero(F.atlas, 1))
    return twist_part.scaled(SIGN).wedge(a_roof)


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class CheckRow:
    name: str
    analytic: float
    topological: float
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


@dataclass
class VerificationReport:
    scenario: str
    metadata: dict
    rows: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def add(self, name, analytic, topological, tolerance):
        self.rows.append(CheckRow(name=name, analytic=float(analytic),
                                  topological=float(topological),
                                  residual=abs(float(analytic)
                                               - float(topological)),
                                  tolerance=float(tolerance)))

    def to_machine_text(self) -> str:
        lines = ["gerbe-index-report v1", ""]
        lines.append("[scenario]")
        lines.append("name = %s" % self.scenario)
        for k in sorted(self.metadata):
            lines.append("%s = %r" % (k, self.metadata[k]))
        lines.append("")
        for row in self.rows:
            lines.append("[check %s]" % row.name)
            lines.append("analytic = %r" % row.analytic)
            lines.append("topological = %r" % row.topological)
            lines.append("residual = %r" % row.residual)
            lines.append("tolerance = %r" % row.tolerance)
            lines.append("passed = %s" % ("yes" if row.passed else "no"))
            lines.append("")
        if self.extras:
            lines.append("[extras]")
            for k in sorted(self.extras):
                lines.append("%s = %r" % (k, self.extras[k]))
            lines.append("")
        lines.append("[result]")
        lines.append("passed = %s" % ("yes" if self.passed else "no"))
        return "\n".join(lines) + "\n"


@dataclass
class PipelineResult:
    """Everything the verifier computed for one family."""

    index_bundle: IndexBundle
    analytic_deg0: float
    analytic_deg2: float
    det_line: float
    topological_form: FormField
    topological_deg0: float
    topological_deg2: float
    deg0_deviation: float
    compat_residual: float
    berry_residual_scale: float


def run_pipelines(F: FamilySpec, stab: Stabilizer = None,
                  n_theta: int = 32) -> PipelineResult:
    """Both index pipelines for one family on its atlas."""
    S = symbol_class(F, n_theta)
    ib = analytic_index(F, stab)
    a0 = ib.kernel_rank - ib.stabilizer.count
    if ib.kernel_rank:
        conn = berry_connection(ib)
        Fcurv = curvature(conn)
        ch = chern_character_form(Fcurv)
        a2 = integrate(ch, F.atlas).real
        _, c1_int = det_line_c1(conn)
        det = complex(c1_int).real
    else:
        a2 = 0.0
        det = 0.0

    topo = topological_index_chern(S)
    t0, dev0 = average_scalar(topo, F.atlas, 0)
    t2 = integrate(topo, F.atlas).real if F.atlas.dim >= 2 else 0.0
    return PipelineResult(
        index_bundle=ib,
        analytic_deg0=float(a0), analytic_deg2=float(a2), det_line=float(det),
        topological_form=topo,
        topological_deg0=float(t0.real), topological_deg2=float(t2),
        deg0_deviation=float(dev0),
        compat_residual=S.compat_residual,
        berry_residual_scale=0.0)


def verify_family(F: FamilySpec, name: str, tolerance: float = 1e-3,
                  n_theta: int = 32, metadata: dict = None,
                  stab: Stabilizer = None,
                  det_line_tolerance: float = None) -> VerificationReport:
    """Run both pipelines and assemble the comparison report."""
    meta = dict(metadata or {})
    res = run_pipelines(F, stab=stab, n_theta=n_theta)
    meta.setdefault("kernel_rank", res.index_bundle.kernel_rank)
    meta.setdefault("stabilizer_count", res.index_bundle.stabilizer.count)
    meta.setdefault("symbol_compat_residual", res.compat_residual)
    meta.setdefault("deg0_constancy_deviation", res.deg0_deviation)
    report = VerificationReport(scenario=name, metadata=meta)
    report.add("index-degree-0", res.analytic_deg0, res.topological_deg0,
               max(tolerance, 1e-9))
    report.add("index-degree-2", res.analytic_deg2, res.topological_deg2,
               tolerance)
    report.add("det-line-degree-2", res.det_line, res.topological_deg2,
               det_line_tolerance or tolerance)
    report.extras["analytic_deg2"] = res.analytic_deg2
    report.extras["topological_deg2"] = res.topological_deg2
    report.extras["det_line"] = res.det_line
    return report
