import numpy as np
import pytest

from gerbe_index.errors import NotScalar
from gerbe_index.fixtures import (random_unitary, suspended_rp2,
                                  suspended_rp2_z2_cocycle, triangle_cover)
from gerbe_index.gerbe import (CombinatorialCover, GerbeCocycle, PULift,
                               dd_class, dd_cocycle, gauge_transform,
                               zero_twist)


def lift_from_frames(cover, n, frames, central=None, rng=None):
    """G_ab = zeta^c_ab h_a h_b^{-1}: a consistent lift with central noise."""
    mats = {}
    base = cover.base
    for idx, (a, b) in enumerate(base.simplex_list(1)):
        g = frames[a] @ frames[b].conj().T
        if central is not None:
            g = np.exp(2j * np.pi * central[idx] / n) * g
        mats[(a, b)] = g
    return PULift(cover=cover, n=n, matrices=mats)


def test_identity_lift_gives_zero_cocycle():
    cover = triangle_cover()
    mats = {e: np.eye(2, dtype=complex) for e in cover.base.simplex_list(1)}
    theta = dd_cocycle(PULift(cover=cover, n=2, matrices=mats))
    assert theta.is_zero()


def test_three_set_minus_identity():
    cover = triangle_cover()
    mats = {(0, 1): np.eye(2, dtype=complex),
            (1, 2): np.eye(2, dtype=complex),
            (0, 2): -np.eye(2, dtype=complex)}   # G_ca = -I means G_ac = -I
    theta = dd_cocycle(PULift(cover=cover, n=2, matrices=mats))
    assert theta.values == (1,)
    _, cls = dd_class(theta)
    assert cls.is_zero        # coboundary of the 1-cochain marking edge ca


def test_not_scalar_error():
    cover = triangle_cover()
    h = np.array([[0, 1], [-1, 0]], dtype=complex)   # special unitary
    mats = {(0, 1): h, (1, 2): np.eye(2, dtype=complex),
            (0, 2): np.eye(2, dtype=complex)}
    with pytest.raises(NotScalar):
        dd_cocycle(PULift(cover=cover, n=2, matrices=mats))


def test_random_lifts_produce_cocycles():
    rng = np.random.default_rng(3)
    cover = CombinatorialCover(suspended_rp2())
    n = 4
    frames = {v: random_unitary(rng, n) for v in range(cover.base.vertex_count)}
    frames = {v: f / np.linalg.det(f) ** (1.0 / n) for v, f in frames.items()}
    central = rng.integers(0, n, size=cover.base.n_simplices(1))
    theta = dd_cocycle(lift_from_frames(cover, n, frames, central))
    assert theta.is_cocycle()
    _, cls = dd_class(theta)
    assert cls.is_zero        # central noise only shifts by a coboundary


def test_edge_reversal_leaves_class_unchanged():
    cover = triangle_cover()
    mats = {(0, 1): np.eye(2, dtype=complex),
            (1, 2): -np.eye(2, dtype=complex),
            (0, 2): np.eye(2, dtype=complex)}
    lift = PULift(cover=cover, n=2, matrices=mats)
    theta = dd_cocycle(lift)
    # reverse edge (1,2): storing the inverse matrix gives the same product
    mats2 = dict(mats)
    mats2[(1, 2)] = np.linalg.inv(mats[(1, 2)])
    theta2 = dd_cocycle(PULift(cover=cover, n=2, matrices=mats2))
    assert dd_class(theta)[1] == dd_class(theta2)[1]


def test_central_rescaling_invariance():
    rng = np.random.default_rng(5)
    cover = CombinatorialCover(suspended_rp2())
    n = 3
    frames = {v: random_unitary(rng, n) for v in range(cover.base.vertex_count)}
    frames = {v: f / np.linalg.det(f) ** (1.0 / n) for v, f in frames.items()}
    theta = dd_cocycle(lift_from_frames(cover, n, frames))
    noise = rng.integers(0, n, size=cover.base.n_simplices(1))
    theta2 = dd_cocycle(lift_from_frames(cover, n, frames, noise))
    assert dd_class(theta)[1] == dd_class(theta2)[1]


def test_gauge_transform_properties():
    X, values = suspended_rp2_z2_cocycle()
    cover = CombinatorialCover(X)
    theta = GerbeCocycle(cover, 2, values)
    mu = [0] * X.n_simplices(1)
    assert gauge_transform(theta, mu).values == theta.values

    rng = np.random.default_rng(9)
    mu = rng.integers(0, 2, size=X.n_simplices(1))
    shifted = gauge_transform(theta, mu)
    assert dd_class(theta)[1] == dd_class(shifted)[1]

    zero = zero_twist(cover, 2)
    dmu = gauge_transform(zero, mu)
    assert dd_class(dmu)[1].is_zero


def test_nontrivial_override_class_has_order_two():
    X, values = suspended_rp2_z2_cocycle()
    theta = GerbeCocycle(CombinatorialCover(X), 2, values)
    _, cls = dd_class(theta)
    assert cls.torsion == (2,) and cls.residues == (1,)


def test_antisymmetry_of_values():
    X, values = suspended_rp2_z2_cocycle()
    theta = GerbeCocycle(CombinatorialCover(X), 2, values)
    a, b, c = X.simplex_list(2)[0]
    assert theta.value(a, b, c) == (-theta.value(b, a, c)) % 2
    assert theta.value(a, b, c) == theta.value(b, c, a)
