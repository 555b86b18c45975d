import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ndmono.engine import (
    MonotonicityReconstructor,
    ReconConfig,
    beta_values,
    check_nd_matrix,
    hex_tiling,
    read_result,
    reconstruct,
    reg_alpha,
    test_cell_linear as cell_linear,
    test_cell_nonlinear as cell_nonlinear,
    write_result,
)
from ndmono.mobius import Ball
from ndmono.spectral import TruncationPlan, background_nd, frechet_ball, nd_ball

PLAN = TruncationPlan(16, 200)
R1 = background_nd(16).entries


@pytest.fixture(scope="module")
def ball_data():
    return nd_ball(Ball(0.3 + 0.1j, 0.3), 4.0, PLAN).entries


def small(**kw):
    kw.setdefault("hex_radius", 0.08)
    return MonotonicityReconstructor(**kw)


# -- tiling ------------------------------------------------------------------------

def test_tiling_contains_origin_cell():
    t = hex_tiling(0.5)
    assert len(t) >= 1 and np.any(np.abs(t.centers) < 1e-15)
    assert np.all(np.abs(t.centers) + 0.5 < 1)


@pytest.mark.parametrize("R", [0.3, 0.1, 0.05])
def test_tiling_cells_do_not_overlap(R):
    t = hex_tiling(R)
    # centre-to-centre spacing of a hexagonal lattice with circumradius R is sqrt(3) R
    d = np.abs(t.centers[:, None] - t.centers[None, :])
    np.fill_diagonal(d, np.inf)
    assert d.min() == pytest.approx(math.sqrt(3) * R, rel=1e-12)
    # no vertex of any hexagon lies strictly inside another hexagon
    verts = t.vertices().ravel()
    owner = np.repeat(np.arange(len(t)), 6)
    shrunk = t.centers[owner] + 0.999 * (verts - t.centers[owner])
    inside = t.locate(shrunk)
    assert np.array_equal(inside, owner)


def test_tiling_is_flat_topped():
    t = hex_tiling(0.2)
    v = t.vertices(int(np.argmin(np.abs(t.centers))))
    assert v[0] == pytest.approx(0.2) and abs(v[1].imag - v[2].imag) < 1e-15


def test_tiling_norms_are_exact_lattice_norms():
    t = hex_tiling(0.025)
    assert np.allclose(t.norms, np.abs(t.centers), atol=1e-15)
    # six-fold symmetric cells share the same |C| bit for bit
    assert len(np.unique(t.norms)) * 6 < len(t) + 6


def test_locate_points():
    t = hex_tiling(0.1)
    idx = t.locate(t.centers + 0.03 * cmath.exp(0.4j))
    assert np.array_equal(idx, np.arange(len(t)))
    assert t.locate(np.array([0.999 + 0j]))[0] == -1


def test_tiling_rejects_bad_radius():
    with pytest.raises(ValueError):
        hex_tiling(1.0)


# -- parameters ----------------------------------------------------------------------------

def test_beta_values():
    assert beta_values(4.0) == (4.0, 0.8)
    assert beta_values(1.0) == (1.0, 0.5)
    with pytest.raises(ValueError):
        beta_values(0.0)


@given(st.floats(1e-6, 1e6))
def test_linear_beta_below_one(b):
    assert beta_values(b)[1] < 1


def test_reg_alpha_examples():
    assert reg_alpha(R1, R1, 1.0) == 0.0
    Rd = R1.copy()
    Rd[0, 0] += 0.01
    assert reg_alpha(R1, Rd, 1.0) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        reg_alpha(R1, R1[:4, :4], 1.0)


def test_reg_alpha_is_clamped():
    Rd = R1 - 0.001 * np.eye(32)
    assert reg_alpha(R1, Rd, 1.0) == 0.0


def test_check_nd_matrix():
    with pytest.raises(ValueError):
        check_nd_matrix(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        check_nd_matrix(np.triu(np.ones((4, 4))))
    with pytest.raises(ValueError):
        check_nd_matrix(R1, order=8)


# -- single-cell tests ----------------------------------------------------------------------

def test_concentric_cells():
    data = nd_ball(Ball(0, 0.5), 4.0, PLAN).entries
    assert cell_nonlinear(Ball(0, 0.3), 4.0, data, 0.0) >= 0
    assert cell_nonlinear(Ball(0, 0.7), 4.0, data, 0.0) < 0


def test_empty_data_rejects_every_cell():
    for B in (Ball(0, 0.2), Ball(0.5j, 0.1), Ball(-0.6, 0.3)):
        assert cell_nonlinear(B, 4.0, R1, 0.0) < 0
        lam = cell_linear(B, 0.8, R1, R1, 0.0, 16)
        assert lam < 0
        assert lam == pytest.approx(0.8 * np.linalg.eigvalsh(frechet_ball(B, 16).entries)[0])


def test_linear_exact_cancellation():
    B = Ball(0.2 - 0.4j, 0.2)
    data = R1 + 0.8 * frechet_ball(B, 16).entries
    assert abs(cell_linear(B, 0.8, R1, data, 0.0, 16)) < 1e-15


def test_linear_and_nonlinear_agree_for_concentric_sweep():
    # with beta_lin <= kappa / (1 + kappa) the linear test accepts what the non-linear one accepts
    data = nd_ball(Ball(0, 0.5), 4.0, PLAN).entries
    for r in np.linspace(0.1, 0.9, 17):
        B = Ball(0, r)
        nl = cell_nonlinear(B, 4.0, data, 0.0) >= -1e-14
        li = cell_linear(B, 0.8, R1, data, 0.0, 16) >= -1e-14
        assert li or not nl


# -- estimator ----------------------------------------------------------------------------

def test_estimator_api(ball_data):
    est = small()
    assert est.get_params()["method"] == "nonlinear"
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.predict([0j])
    est.fit(ball_data)
    assert est.beta_ == 4.0 and est.alpha_ >= 0
    assert len(est.eigenvalues_) == len(est.tiling_)
    assert est.predict(np.array([0.3 + 0.1j, -0.7 + 0j])).tolist() == [True, False]
    assert est.predict(np.array([[0.3, 0.1]])).tolist() == [True]
    assert np.isnan(est.decision_function(np.array([0.999 + 0j]))[0])


def test_linear_estimator_uses_linear_beta(ball_data):
    assert small(method="linear").fit(ball_data).beta_ == pytest.approx(0.8)


def test_estimator_rejects_bad_params(ball_data):
    with pytest.raises(ValueError):
        small(method="quadratic").fit(ball_data)
    with pytest.raises(ValueError):
        small(mu=0).fit(ball_data)
    with pytest.raises(ValueError):
        small(eig_tol=-1).fit(ball_data)


def test_empty_data_gives_empty_reconstruction():
    for method in ("nonlinear", "linear"):
        assert not small(method=method).fit(R1).accepted_.any()


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0, 1e-3), min_size=2, max_size=4))
def test_acceptance_monotone_in_alpha(alphas):
    data = nd_ball(Ball(0.3 + 0.1j, 0.3), 4.0, PLAN).entries
    prev = None
    for a in sorted(alphas):
        acc = small(alpha=a, hex_radius=0.1).fit(data).accepted_
        if prev is not None:
            assert np.all(acc >= prev)
        prev = acc


def test_serial_and_threaded_agree(ball_data):
    a = small(n_jobs=None).fit(ball_data).eigenvalues_
    b = small(n_jobs=4).fit(ball_data).eigenvalues_
    assert np.array_equal(a, b)


def test_fit_is_deterministic(ball_data):
    est = small()
    a = est.fit(ball_data).eigenvalues_.copy()
    b = small().fit(ball_data).eigenvalues_
    assert np.array_equal(a, b)


def test_batched_matches_single_cell(ball_data):
    est = small(hex_radius=0.15).fit(ball_data)
    for i in range(0, len(est.tiling_), 7):
        B = Ball(est.tiling_.centers[i], 0.15)
        ref = cell_nonlinear(B, 4.0, ball_data, est.alpha_)
        assert est.eigenvalues_[i] == pytest.approx(ref, abs=1e-13)
    lin = small(hex_radius=0.15, method="linear").fit(ball_data)
    for i in range(0, len(lin.tiling_), 7):
        B = Ball(lin.tiling_.centers[i], 0.15)
        ref = cell_linear(B, 0.8, R1, ball_data, lin.alpha_, 16)
        assert lin.eigenvalues_[i] == pytest.approx(ref, abs=1e-13)


@pytest.mark.parametrize("method", ["nonlinear", "linear"])
def test_rotation_equivariance(method):
    B = Ball(0.35 + 0.15j, 0.25)
    est = small(method=method, hex_radius=0.1)
    ev = est.fit(nd_ball(B, 4.0, PLAN).entries).eigenvalues_.copy()
    t = est.tiling_
    ev_rot = est.fit(nd_ball(B.rotated(math.pi / 3), 4.0, PLAN).entries).eigenvalues_
    # cell i moves to cell perm[i] under the rotation
    perm = t.locate(t.centers * cmath.exp(1j * math.pi / 3))
    assert np.all(perm >= 0)
    assert np.max(np.abs(ev_rot[perm] - ev)) < 1e-13


def test_literal_sign_test_is_available(ball_data):
    strict = small(eig_tol=0).fit(ball_data)
    assert np.array_equal(strict.accepted_, strict.eigenvalues_ >= 0)
    auto = small().fit(ball_data)
    assert np.all(auto.accepted_ >= strict.accepted_)


def test_result_round_trip(tmp_path, ball_data):
    res = reconstruct(ReconConfig(hex_radius=0.1), ball_data)
    write_result(res, tmp_path / "r.csv")
    back = read_result(tmp_path / "r.csv")
    assert np.array_equal(back.eigenvalues, res.eigenvalues)
    assert np.array_equal(back.accepted, res.accepted)
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == "cell,x,y,smallest_eigenvalue,accepted"
    assert back.meta["method"] == "nonlinear" and "timings" in back.meta


def test_recon_config_validation():
    with pytest.raises(ValueError):
        ReconConfig(beta_lower=0)
    with pytest.raises(ValueError):
        ReconConfig(mu=-1)
