"""Base-parameterized truncated operator families on circle fibers.

Operators act on a Fourier-truncated space (modes 0..K in Hardy mode,
-K..K in full mode) tensored with a coefficient space; families are
evaluated at the geometric points of an atlas.  Stabilization augments the
family by a map from copies of the twisted-trivial pattern until it is
surjective everywhere; the kernel frames of the augmented family, smoothed
into a per-patch gauge, become sampled projective bundle data whose
transitions inherit the base twist exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .atlas import Atlas, diff_axis
from .bundles import (Constant, KClassDifference, ProjectiveBundleData,
                      Sampled, validate)
from .chernweil import ConnectionData
from .errors import (FrameDegeneracy, NonConstantKernel,
                     StabilizationFailed)
from .gerbe import zero_twist

KERNEL_REL_TOL = 1e-8
FRAME_ORTHO_TOL = 1e-10
SV_MIN = 1e-6


@dataclass(frozen=True)
class FiberModel:
    """Fourier truncation of the fiber function space."""

    truncation: int
    rank: int = 1
    mode: str = "hardy"

    @property
    def modes(self):
        if self.mode == "hardy":
            return np.arange(0, self.truncation + 1)
        return np.arange(-self.truncation, self.truncation + 1)

    @property
    def dim(self) -> int:
        return self.rank * len(self.modes)


def toeplitz_matrix(coeffs: dict, fiber: FiberModel) -> np.ndarray:
    """Block Toeplitz compression of a multiplier from Fourier coefficients.

    ``coeffs`` maps integer frequency j to (npts, v, v) blocks; the result is
    (npts, dim, dim) with block (m, n) equal to the coefficient at m - n.
    Blocks are written band by band to avoid dense intermediates.
    """
    nm = len(fiber.modes)
    some = next(iter(coeffs.values()))
    npts = some.shape[0]
    v = fiber.rank
    out = np.zeros((npts, nm * v, nm * v), dtype=complex)
    for j, block in coeffs.items():
        j = int(j)
        for n_idx in range(nm):
            m_idx = n_idx + j
            if 0 <= m_idx < nm:
                out[:, m_idx * v:(m_idx + 1) * v,
                    n_idx * v:(n_idx + 1) * v] = block
    return out


def spin_projector(points: np.ndarray, azimuth_sign: float = -1.0) -> np.ndarray:
    """Rank-1 spin projector family over unit vectors.

    The azimuth of the Bloch map is reversed by default; with the bundled
    chart orientation this makes the kernel line of the stabilized clutching
    family integrate its degree-2 character to -1.
    """
    b = np.array(points, dtype=float)
    b[..., 1] = azimuth_sign * b[..., 1]
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    bs = (b[..., 0, None, None] * sx + b[..., 1, None, None] * sy
          + b[..., 2, None, None] * sz)
    return 0.5 * (np.eye(2) + bs)


def spin_up_frame(points: np.ndarray, south: bool,
                  azimuth_sign: float = -1.0) -> np.ndarray:
    """Smooth unit section of the +1 eigenline of the spin projector.

    Two chart families: the north form degenerates only at the south pole
    and vice versa; both poles are excluded from every node grid, and the
    formulas stay floating-point stable at node distances.
    """
    b = np.array(points, dtype=float)
    b[..., 1] = azimuth_sign * b[..., 1]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    if south:
        comp = np.stack([bx - 1j * by, 1.0 - bz], axis=-1)
    else:
        comp = np.stack([1.0 + bz, bx + 1j * by], axis=-1)
    norm = np.linalg.norm(comp, axis=-1)
    return comp / norm[..., None]


@dataclass
class FamilyPreset:
    """Named generator for operator, symbol, and target-window structure.

    The finite model keeps the full band-reachable target window: source
    modes 0..K, target the same window plus whatever the top Fourier block
    of the symbol can reach at mode K+1 (full extra modes for invertible
    top blocks, a single projector line for rank-1 top blocks).  A plain
    square compression would carry the K-class of its own window difference
    (identically trivial), not the symbol class.
    """

    name: str
    fiber: FiberModel
    clutching: object            # callable(points, thetas) -> (m, nt, v, v)
    dirac: bool = False
    spill_full_modes: int = 0    # extra full target modes above the window
    spill_projector: object = None   # callable(points) -> (m, v, v) projector

    @property
    def has_top_line(self) -> bool:
        return self.spill_projector is not None

    def source_dim(self) -> int:
        return self.fiber.dim

    def target_dim(self) -> int:
        return (self.fiber.dim + self.fiber.rank * self.spill_full_modes
                + (1 if self.has_top_line else 0))

    def _coefficients(self, points: np.ndarray) -> dict:
        nt = 4 * (self.fiber.truncation + 1)
        thetas = 2 * np.pi * np.arange(nt) / nt
        w = self.clutching(points, thetas)       # (m, nt, v, v)
        all_c = np.fft.fft(w, axis=1) / nt       # uniform grid: exact DFT
        coeffs = {}
        for j in range(nt):
            freq = j if j <= nt // 2 else j - nt
            block = all_c[:, j]
            if np.max(np.abs(block)) > 1e-13:
                coeffs[freq] = block
        return coeffs

    def operator(self, points: np.ndarray, top_frame: np.ndarray = None
                 ) -> np.ndarray:
        """Band-faithful compression onto the declared target window."""
        coeffs = self._coefficients(points)
        fiber = self.fiber
        v = fiber.rank
        K = fiber.truncation
        n_src_modes = len(fiber.modes)
        n_tgt_modes = n_src_modes + self.spill_full_modes
        m = points.shape[0]
        out = np.zeros((m, self.target_dim(), self.source_dim()), dtype=complex)
        for j, block in coeffs.items():
            for n_idx in range(n_src_modes):
                row_mode = n_idx + int(j)
                if 0 <= row_mode < n_tgt_modes:
                    out[:, row_mode * v:(row_mode + 1) * v,
                        n_idx * v:(n_idx + 1) * v] += block
        if self.has_top_line:
            if top_frame is None:
                raise ValueError("projector spill needs top-line frames")
            top = coeffs.get(1)
            if top is None:
                top = np.zeros((m, v, v), dtype=complex)
            # row: frame^H (top block applied to the highest source mode)
            row = np.einsum("mc,mcd->md", np.conj(top_frame), top)
            out[:, -1, (n_src_modes - 1) * v:n_src_modes * v] = row
        return out

    def symbol(self, points: np.ndarray, thetas: np.ndarray, xi: int) -> np.ndarray:
        if xi == +1:
            return self.clutching(points, thetas)
        v = self.fiber.rank
        m, nt = points.shape[0], len(thetas)
        return np.broadcast_to(np.eye(v, dtype=complex), (m, nt, v, v)).copy()


def toeplitz_clutching_preset(fiber: FiberModel, power: int = 1) -> FamilyPreset:
    """Spin-projector clutching; the mode-(K+1) spill is the rank-1 line."""
    if power != 1:
        raise ValueError("the projector clutching preset models winding 1")

    def clutch(points, thetas):
        pr = spin_projector(points)
        ph = np.exp(1j * thetas)
        eye = np.eye(fiber.rank, dtype=complex)
        return (ph[None, :, None, None] * pr[:, None]
                + (eye - pr)[:, None])

    return FamilyPreset("toeplitz-clutching", fiber, clutch,
                        spill_projector=spin_projector)


def winding_scalar_preset(fiber: FiberModel, m: int) -> FamilyPreset:
    """Scalar winding-m clutching; all spilled modes are full slots."""
    if m < 0:
        raise ValueError("use the adjoint flag for negative winding")

    def clutch(points, thetas):
        ph = np.exp(1j * m * thetas)
        return ph[None, :, None, None] * np.ones((points.shape[0], 1, 1, 1))

    return FamilyPreset("multiplier", fiber, clutch, spill_full_modes=m)


def dirac_twist_preset(fiber: FiberModel, winding: int = 1) -> FamilyPreset:
    preset = toeplitz_clutching_preset(fiber, power=winding)
    return replace(preset, name="dirac-twist", dirac=True)


@dataclass
class FamilySpec:
    """A projective family of truncated fiber operators over an atlas.

    The source space is (plus pattern) x (fiber window); the target is
    (minus pattern) x (fiber window extended by the preset's spill
    structure).  When the spill is a projector line, each patch carries a
    smooth frame of that line and the target transitions pick up the
    induced scalar factor.
    """

    atlas: Atlas
    preset: FamilyPreset
    plus: ProjectiveBundleData          # base-level source pattern
    minus: ProjectiveBundleData         # base-level target pattern
    tau_unit: ProjectiveBundleData = None   # twisted-trivial rank-1 pattern
    conjugators: dict = None            # per-patch (dim_t, dim_t) frame changes
    adjoint: bool = False
    n_theta: int = 32
    kappa_max: float = 1e6

    def __post_init__(self):
        if self.tau_unit is None:
            cover = self.plus.cover
            self.tau_unit = ProjectiveBundleData(
                cover=cover, rank=1, twist=zero_twist(cover, self.plus.twist.n),
                transitions={key: Constant(np.eye(1, dtype=complex))
                             for key in self.plus.transitions},
                atlas=self.atlas)
        self._frame_cache = {}
        self._point_cache = {}

    @property
    def fiber(self) -> FiberModel:
        return self.preset.fiber

    def points(self, key: int) -> np.ndarray:
        if key not in self._point_cache:
            pts = self.atlas.patches[key].points()
            self._point_cache[key] = pts.reshape(-1, pts.shape[-1])
        return self._point_cache[key]

    def _south(self, key: int) -> bool:
        return key in self.atlas.meta.get("south_keys", {1})

    def top_frame(self, key: int) -> np.ndarray:
        if not self.preset.has_top_line:
            return None
        if key not in self._frame_cache:
            self._frame_cache[key] = spin_up_frame(self.points(key),
                                                   south=self._south(key))
        return self._frame_cache[key]

    def source_dim(self) -> int:
        base = self.preset.target_dim() if self.adjoint else self.preset.source_dim()
        return base

    def target_dim(self) -> int:
        base = self.preset.source_dim() if self.adjoint else self.preset.target_dim()
        return base

    def operator_in_chart(self, key: int) -> np.ndarray:
        P = self.preset.operator(self.points(key), self.top_frame(key))
        if self.adjoint:
            P = np.conj(np.swapaxes(P, -1, -2))
        if self.conjugators and key in self.conjugators:
            W = self.conjugators[key]
            P = W @ P @ np.linalg.inv(W)
        return P

    def symbol_in_chart(self, key: int, thetas: np.ndarray, xi: int) -> np.ndarray:
        s = self.preset.symbol(self.points(key), thetas, xi)
        if self.adjoint:
            s = np.conj(np.swapaxes(s, -1, -2))
        return s

    def _pattern_scalars(self, pattern: ProjectiveBundleData, a: int, b: int,
                         count: int) -> np.ndarray:
        t = pattern.transition(a, b)
        if isinstance(t, Constant):
            return np.broadcast_to(t.matrix, (count,) + t.matrix.shape)
        return t.values

    def _window_transition(self, a: int, b: int, count: int,
                           with_spill: bool) -> np.ndarray:
        """kron(base pattern, fiber window) plus the spill blocks."""
        pattern = self.minus if with_spill else self.plus
        q = self._pattern_scalars(pattern, a, b, count)
        nw = self.fiber.dim + (self.fiber.rank * self.preset.spill_full_modes
                               if with_spill else 0)
        ntop = 1 if (with_spill and self.preset.has_top_line) else 0
        dim = pattern.rank * nw + ntop
        full = np.zeros((count, dim, dim), dtype=complex)
        eye = np.eye(nw)
        full[:, :pattern.rank * nw, :pattern.rank * nw] = np.einsum(
            "mij,kl->mikjl", q, eye).reshape(count, pattern.rank * nw,
                                             pattern.rank * nw)
        if ntop:
            ov = self.atlas.overlap(a, b)
            fa = self.top_frame(a)[ov.idx_a]
            fb = self.top_frame(b)[ov.idx_b]
            scal = np.einsum("mc,mc->m", np.conj(fa), fb)
            full[:, -1, -1] = q[:, 0, 0] * scal
        return full

    def source_transition(self, a: int, b: int, count: int,
                          extra: int = 0) -> np.ndarray:
        core = self._window_transition(a, b, count, with_spill=self.adjoint)
        if not extra:
            return core
        n = core.shape[1]
        full = np.zeros((count, n + extra, n + extra), dtype=complex)
        full[:, :n, :n] = core
        tu = self.tau_unit.transition(a, b)
        if isinstance(tu, Constant):
            scal = np.broadcast_to(tu.matrix[..., 0, 0], (count,))
        else:
            scal = tu.values[..., 0, 0]
        full[:, n:, n:] = scal[:, None, None] * np.eye(extra)
        return full

    def target_transition(self, a: int, b: int, count: int) -> np.ndarray:
        return self._window_transition(a, b, count, with_spill=not self.adjoint)


@dataclass
class EllipticityReport:
    ok: bool
    worst_condition: float
    witness: tuple = ()


def _extreme_singular_values(s: np.ndarray):
    """(smax, smin) of stacked small matrices; closed form for v <= 2."""
    v = s.shape[-1]
    if v == 1:
        a = np.abs(s[..., 0, 0])
        return a, a
    if v == 2:
        frob2 = np.sum(np.abs(s) ** 2, axis=(-2, -1))
        det = np.abs(s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] * s[..., 1, 0])
        gap = np.sqrt(np.maximum(frob2 ** 2 - 4.0 * det ** 2, 0.0))
        smax = np.sqrt(0.5 * (frob2 + gap))
        smin = np.sqrt(np.maximum(0.5 * (frob2 - gap), 0.0))
        return smax, smin
    sv = np.linalg.svd(s, compute_uv=False)
    return sv[..., 0], sv[..., -1]


def check_elliptic(F: FamilySpec) -> EllipticityReport:
    """Invertibility of the symbol at every sample and both cone directions."""
    worst = 0.0
    witness = ()
    thetas = 2 * np.pi * np.arange(F.n_theta) / F.n_theta
    for key in sorted(F.atlas.patches):
        for xi in (+1, -1):
            s = F.symbol_in_chart(key, thetas, xi)
            smax, smin = _extreme_singular_values(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                kappa = np.where(smin > 0, smax / smin, np.inf)
            k = float(np.max(kappa))
            if k > worst:
                worst = k
                flat = int(np.argmax(kappa))
                witness = (key, flat // len(thetas), flat % len(thetas), xi)
    return EllipticityReport(ok=bool(worst < F.kappa_max), worst_condition=worst,
                             witness=witness)


def _is_scalar_pattern(pattern: ProjectiveBundleData) -> bool:
    return pattern.rank == 1


def check_projective_compat(F: FamilySpec) -> float:
    """Worst overlap residual of the transported family against itself.

    The target-side transition multiplies on the left and the inverse
    source-side transition on the right; central twist scalars cancel.
    Rank-1 patterns use the scalar fast path (no batched inversion).
    """
    worst = 0.0
    scalar = (_is_scalar_pattern(F.plus) and _is_scalar_pattern(F.minus)
              and F.conjugators is None)
    for (a, b) in F.atlas.overlaps:
        ov = F.atlas.overlap(a, b)
        count = len(ov.idx_a)
        Pa = F.operator_in_chart(a)[ov.idx_a]
        Pb = F.operator_in_chart(b)[ov.idx_b]
        if scalar:
            # window transitions are central scalars; only the projector
            # spill slot carries the extra frame factor
            src_pat = F.minus if F.adjoint else F.plus
            tgt_pat = F.plus if F.adjoint else F.minus
            c_src = F._pattern_scalars(src_pat, a, b, count)[..., 0, 0]
            c_tgt = F._pattern_scalars(tgt_pat, a, b, count)[..., 0, 0]
            transported = (c_tgt / c_src)[:, None, None] * Pb
            if F.preset.has_top_line:
                fa = F.top_frame(a)[ov.idx_a]
                fb = F.top_frame(b)[ov.idx_b]
                s_top = np.einsum("mc,mc->m", np.conj(fa), fb)
                if F.adjoint:
                    transported[:, :, -1] /= s_top[:, None]
                else:
                    transported[:, -1, :] *= s_top[:, None]
            resid = transported - Pa
        else:
            q_src = F.source_transition(a, b, count)
            q_tgt = F.target_transition(a, b, count)
            resid = q_tgt @ Pb @ np.linalg.inv(q_src) - Pa
        if resid.size:
            worst = max(worst, float(np.max(np.abs(resid))))
    return worst


@dataclass
class Stabilizer:
    count: int
    columns: np.ndarray          # (dim_target, count)
    smallest_sv: float


def _min_sv_augmented(P: np.ndarray, f: np.ndarray = None) -> float:
    """Smallest singular value governing surjectivity of [P | f]."""
    if f is not None and f.shape[1]:
        m = P.shape[0]
        aug = np.concatenate([P, np.broadcast_to(f, (m,) + f.shape)], axis=2)
    else:
        aug = P
    if aug.shape[-1] < aug.shape[-2]:
        return 0.0
    sv = np.linalg.svd(aug, compute_uv=False)
    return float(np.min(sv[..., -1]))


def stabilize(F: FamilySpec, columns: np.ndarray = None, max_extra: int = 8,
              sv_min: float = SV_MIN) -> Stabilizer:
    """Augment the family from the twisted-trivial pattern until surjective.

    The default stabilizer injects the lowest Fourier modes (constant mode
    first); the count search starts at the largest cokernel dimension found
    and is deterministic.
    """
    ops = {key: F.operator_in_chart(key) for key in sorted(F.atlas.patches)}
    dim_t = next(iter(ops.values())).shape[1]
    max_coker = 0
    for P in ops.values():
        sv = np.linalg.svd(P, compute_uv=False)
        smax = np.maximum(sv[..., 0], 1e-300)
        ranks = np.sum(sv > KERNEL_REL_TOL * smax[..., None], axis=-1)
        max_coker = max(max_coker, int(np.max(dim_t - ranks)))
    start = max_coker
    for n in range(start, start + max_extra + 1):
        if columns is not None:
            f = columns[:, :n]
            if f.shape[1] < n:
                raise StabilizationFailed(
                    "supplied stabilizer has too few columns",
                    module="elliptic-family", operation="stabilize")
        else:
            f = np.eye(dim_t, dtype=complex)[:, :n]
        worst = min(_min_sv_augmented(P, f) for P in ops.values())
        if worst > sv_min:
            return Stabilizer(count=n, columns=f, smallest_sv=worst)
    raise StabilizationFailed(
        "no stabilizer of size <= %d makes the family surjective"
        % (start + max_extra),
        module="elliptic-family", operation="stabilize")


def _smooth_gauge_rank1(frames: np.ndarray) -> np.ndarray:
    """Smooth periodic gauge of a rank-1 frame field on an (s, phi) grid.

    Column 0 is phase-aligned along s, every row is aligned along phi, and
    the row holonomy (unwrapped along s) is spread evenly so the field is
    smooth across the periodic seam.
    """
    f = frames.copy()                          # (ns, nphi, dim, 1)
    ns, nphi = f.shape[0], f.shape[1]
    v = f[..., 0]
    col = v[:, 0]
    z = np.einsum("id,id->i", np.conj(col[:-1]), col[1:])
    u = z / np.maximum(np.abs(z), 1e-300)
    gauge = np.concatenate([[1.0 + 0j], np.cumprod(np.conj(u))])
    v = v * gauge[:, None, None]
    z = np.einsum("ijd,ijd->ij", np.conj(v[:, :-1]), v[:, 1:])
    u = z / np.maximum(np.abs(z), 1e-300)
    row_gauge = np.concatenate(
        [np.ones((ns, 1), dtype=complex), np.cumprod(np.conj(u), axis=1)], axis=1)
    v = v * row_gauge[..., None]
    wrap = np.einsum("id,id->i", np.conj(v[:, -1]), v[:, 0])
    delta = np.unwrap(np.angle(wrap))
    j = np.arange(nphi)
    v = v * np.exp(1j * delta[:, None] * j[None, :] / nphi)[..., None]
    return v[..., None]


def _polar_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _smooth_gauge_general(frames: np.ndarray) -> np.ndarray:
    f = frames.copy()
    ns, nphi = f.shape[0], f.shape[1]
    for i in range(1, ns):
        w = _polar_unitary(np.conj(f[i, 0]).T @ f[i - 1, 0])
        f[i, 0] = f[i, 0] @ w
    for i in range(ns):
        for j in range(1, nphi):
            w = _polar_unitary(np.conj(f[i, j]).T @ f[i, j - 1])
            f[i, j] = f[i, j] @ w
    prev_log = None
    for i in range(ns):
        hol = _polar_unitary(np.conj(f[i, -1]).T @ f[i, 0])
        vals, vecs = np.linalg.eig(hol)
        ang = np.angle(vals)
        if prev_log is not None:
            ang = ang + 2 * np.pi * np.round((prev_log - ang) / (2 * np.pi))
        prev_log = ang
        for j in range(nphi):
            frac = np.diag(np.exp(-1j * ang * j / nphi))
            g = vecs @ frac @ np.linalg.inv(vecs)
            f[i, j] = f[i, j] @ _polar_unitary(g)
    return f


@dataclass
class IndexBundle:
    """Stabilized kernel data with frames and induced transitions."""

    difference: KClassDifference
    frames: dict                 # patch -> (*grid, dim_aug, r_k)
    stabilizer: Stabilizer
    family: FamilySpec
    kernel_rank: int

    @property
    def rank(self) -> int:
        return self.kernel_rank - self.stabilizer.count


def analytic_index(F: FamilySpec, stab: Stabilizer = None,
                   frame_tol: float = 1e-6) -> IndexBundle:
    """Kernel bundle of the stabilized family minus the stabilizing pattern.

    Per-node kernels come from singular vectors of the augmented operator;
    the kernel dimension must be constant.  Frames are smoothed per patch
    and the induced transitions are sampled along the overlap pairings,
    inheriting the base twist through the ambient transition.
    """
    if stab is None:
        stab = stabilize(F)
    atlas = F.atlas
    frames = {}
    kernel_rank = None
    for key in sorted(atlas.patches):
        P = F.operator_in_chart(key)
        m, dt = P.shape[0], P.shape[1]
        aug = np.concatenate(
            [P, np.broadcast_to(stab.columns, (m,) + stab.columns.shape)], axis=2) \
            if stab.count else P
        _, sv, vh = np.linalg.svd(aug, full_matrices=True)
        smax = np.maximum(sv[..., 0], 1e-300)
        ranks = np.sum(sv > KERNEL_REL_TOL * smax[..., None], axis=-1)
        r0 = int(ranks[0])
        if not np.all(ranks == r0):
            bad = int(np.argmax(ranks != r0))
            raise NonConstantKernel(
                "kernel dimension jumps (stabilization insufficient)",
                module="elliptic-family", operation="analytic_index",
                location=(key, bad))
        kdim = aug.shape[2] - r0
        if kernel_rank is None:
            kernel_rank = kdim
        elif kernel_rank != kdim:
            raise NonConstantKernel(
                "kernel dimension differs between patches",
                module="elliptic-family", operation="analytic_index",
                location=key)
        fr = np.conj(np.swapaxes(vh[..., r0:, :], -1, -2))
        shape = atlas.patches[key].shape
        fr = fr.reshape(shape + fr.shape[1:])
        if kdim:
            gauge = _smooth_gauge_rank1 if kdim == 1 else _smooth_gauge_general
            fr = gauge(fr)
        frames[key] = fr

    transitions = {}
    for (a, b) in atlas.overlaps:
        ov = atlas.overlap(a, b)
        fa = frames[a].reshape((atlas.patches[a].size,)
                               + frames[a].shape[-2:])[ov.idx_a]
        fb = frames[b].reshape((atlas.patches[b].size,)
                               + frames[b].shape[-2:])[ov.idx_b]
        q_amb = F.source_transition(a, b, len(ov.idx_a), extra=stab.count)
        q = np.conj(np.swapaxes(fa, -1, -2)) @ q_amb @ fb
        if kernel_rank:
            sv = np.linalg.svd(q, compute_uv=False)
            if float(np.min(sv[..., -1])) < frame_tol:
                raise FrameDegeneracy(
                    "kernel frames fail to match across the overlap",
                    module="elliptic-family", operation="analytic_index",
                    location=(a, b))
            resid = float(np.max(np.abs(q_amb @ fb - fa @ q)))
            if resid > np.sqrt(frame_tol):
                raise FrameDegeneracy(
                    "kernel subspace is not transition-invariant (%.3g)" % resid,
                    module="elliptic-family", operation="analytic_index",
                    location=(a, b))
        transitions[(a, b)] = Sampled(q)

    cover = F.plus.cover
    plus = ProjectiveBundleData(
        cover=cover, rank=kernel_rank, twist=F.plus.twist,
        transitions=transitions, atlas=atlas)
    minus_tr = {}
    for key, t in F.tau_unit.transitions.items():
        if isinstance(t, Constant):
            minus_tr[key] = Constant(t.matrix[0, 0] * np.eye(stab.count,
                                                             dtype=complex))
        else:
            minus_tr[key] = Sampled(t.values[..., 0, 0][:, None, None]
                                    * np.eye(stab.count, dtype=complex))
    minus = ProjectiveBundleData(
        cover=cover, rank=stab.count, twist=F.plus.twist,
        transitions=minus_tr, atlas=atlas)
    if kernel_rank:
        validate(plus)
    diff = KClassDifference(plus=plus, minus=minus)
    return IndexBundle(difference=diff, frames=frames, stabilizer=stab,
                       family=F, kernel_rank=kernel_rank)


def berry_connection(ib: IndexBundle, tolerance: float = 1e-3) -> ConnectionData:
    """Compression of the flat ambient connection onto the kernel frames.

    A = frame* d frame per chart direction, with the skew part kept; the
    compatibility residual is bounded by the frame differencing floor, which
    is the documented tolerance for sampled kernel data.
    """
    atlas = ib.family.atlas
    coeffs = {}
    for key in sorted(atlas.patches):
        patch = atlas.patches[key]
        fr = ib.frames[key]
        comps = []
        for axis, ax in enumerate(patch.axes):
            d = diff_axis(fr, axis, ax.h, ax.periodic, array_axis=axis)
            A = np.einsum("...di,...dj->...ij", np.conj(fr), d)
            A = 0.5 * (A - np.conj(np.swapaxes(A, -1, -2)))
            comps.append(A)
        coeffs[key] = np.stack(comps, axis=0)
    return ConnectionData(bundle=ib.difference.plus, atlas=atlas,
                          coefficients=coeffs, tolerance=tolerance)
