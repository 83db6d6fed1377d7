"""Geometry tests: domain families, strip chart, wall frames, dilatation."""

import numpy as np
import pytest

from cornerflow.geometry import (
    construct_domain,
    CallableWall,
    CornerDomain,
    inverse_strip_map,
    operator_norm_2x2,
    quasiconformality_ratio,
    strip_map,
    verify_decay,
)

THETA_32 = 1.5 * np.pi


def wedge32():
    return construct_domain("wedge", opening=THETA_32)


class TestConstruction:
    def test_wedge_walls(self):
        dom = wedge32()
        lo, hi = dom.wall_angles(np.array([2.0, 10.0, 1e4]))
        assert np.allclose(lo, -0.75 * np.pi)
        assert np.allclose(hi, +0.75 * np.pi)
        assert dom.opening_angle == pytest.approx(THETA_32)

    @pytest.mark.parametrize("bad", [0.0, np.pi, 2 * np.pi])
    def test_excluded_angles_rejected(self, bad):
        with pytest.raises(ValueError):
            construct_domain("wedge", opening=bad)

    def test_pi_rejection_names_the_rule(self):
        with pytest.raises(ValueError, match="0, pi or 2"):
            construct_domain("wedge", opening=np.pi)

    def test_bad_blend_scale_rejected(self):
        with pytest.raises(ValueError):
            construct_domain("smoothed_wedge", opening=THETA_32, blend_scale=0.0)

    def test_exact_corner_opening(self):
        dom = construct_domain("exact_corner")
        assert dom.opening_angle == pytest.approx(THETA_32, abs=1e-14)
        assert dom.r_min == 1.0

    def test_exact_corner_boundary_identity(self):
        # wall points satisfy r^(2/3) cos(2 theta/3) = 1
        dom = construct_domain("exact_corner")
        ell = np.linspace(np.log(1.5), 8.0, 50)
        for lam in (0.0, 1.0):
            x, _ = strip_map(dom, ell, np.full_like(ell, lam))
            r = np.hypot(x[..., 0], x[..., 1])
            th = np.arctan2(x[..., 1], x[..., 0])
            assert np.max(np.abs(r ** (2.0 / 3.0) * np.cos(2.0 * th / 3.0) - 1.0)) < 1e-10

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            construct_domain("moebius")


class TestWallDerivatives:
    """Analytic wall derivatives against finite differences of theta(r)."""

    @pytest.mark.parametrize(
        "kind,params",
        [
            ("exact_corner", {}),
            ("smoothed_wedge", {"opening": THETA_32, "blend_scale": 1.5, "bend": 0.3}),
        ],
    )
    def test_against_finite_differences(self, kind, params):
        dom = construct_domain(kind, **params)
        r = np.linspace(2.0, 40.0, 23)
        h = 1e-5 * r
        for wall in (dom.wall_lo, dom.wall_hi):
            th_p = wall.derivs(r + h)
            th_m = wall.derivs(r - h)
            _, d1, d2, d3 = wall.derivs(r)
            for order in (1, 2, 3):
                fd = (th_p[order - 1] - th_m[order - 1]) / (2 * h)
                exact = (d1, d2, d3)[order - 1]
                scale = np.maximum(np.abs(exact), 1e-12)
                assert np.max(np.abs(fd - exact) / scale) < 1e-6

    def test_exact_corner_decay_rate(self):
        # theta' ~ r^(-5/3): the eps = 2/3 ratio stays bounded while any
        # larger exponent makes it grow without bound along the samples
        dom = construct_domain("exact_corner")
        r = np.geomspace(10.0, 1e6, 40)
        _, d1, _, _ = dom.wall_hi.derivs(r)
        ratio_ok = np.abs(d1) * r ** (1.0 + 2.0 / 3.0)
        ratio_bad = np.abs(d1) * r**2.0
        assert ratio_ok.max() < 1.2
        assert ratio_bad[-1] > 50.0
        # the slowly growing eps = 0.8 ratio needs a longer lever arm
        r_far = np.geomspace(10.0, 1e15, 40)
        _, d1_far, _, _ = dom.wall_hi.derivs(r_far)
        assert (np.abs(d1_far) * r_far**1.8)[-1] > 50.0


class TestStripMap:
    def test_wedge_exact(self):
        dom = wedge32()
        ell, lam = 1.3, 0.25
        x, J = strip_map(dom, ell, lam)
        theta = -0.75 * np.pi + lam * THETA_32
        r = np.exp(ell)
        assert np.allclose(x, [r * np.cos(theta), r * np.sin(theta)], atol=1e-14)
        detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        assert detJ == pytest.approx(np.exp(2 * ell) * THETA_32, rel=1e-13)

    def test_straightening_jacobian_limit(self):
        # the (ell,lam)->(ell,theta) factor tends to [[1,0],[0,Theta]]
        dom = construct_domain("exact_corner")
        for ell, tol in ((4.0, 0.25), (8.0, 0.02)):
            x, J = strip_map(dom, ell, 0.37)
            r = np.exp(ell)
            theta = np.arctan2(x[1], x[0])
            conf = r * np.array(
                [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
            )
            A = np.linalg.solve(conf, J)
            assert abs(A[0, 0] - 1.0) < 1e-12 and abs(A[0, 1]) < 1e-12
            assert abs(A[1, 0]) < tol
            assert abs(A[1, 1] - THETA_32) < tol

    def test_exact_corner_symmetry_point(self):
        dom = construct_domain("exact_corner")
        x, _ = strip_map(dom, np.log(8.0), 0.5)
        assert x[1] == pytest.approx(0.0, abs=1e-12)
        assert x[0] == pytest.approx(8.0, rel=1e-13)

    @pytest.mark.parametrize("kind,params", [
        ("wedge", {"opening": THETA_32}),
        ("exact_corner", {}),
        ("smoothed_wedge", {"opening": 2.0, "blend_scale": 1.0}),
        ("channel", {"width": 2.5}),
    ])
    def test_inverse_round_trip(self, kind, params):
        dom = construct_domain(kind, **params)
        rng = np.random.default_rng(7)
        ell = rng.uniform(0.5, 6.0, 40)
        lam = rng.uniform(0.0, 1.0, 40)
        x, _ = strip_map(dom, ell, lam)
        ell2, lam2 = inverse_strip_map(dom, x)
        assert np.max(np.abs(ell2 - ell)) < 1e-12
        assert np.max(np.abs(lam2 - lam)) < 1e-12

    def test_below_domain_start_rejected(self):
        with pytest.raises(ValueError):
            strip_map(construct_domain("exact_corner"), -0.5, 0.5)

    def test_chart_jacobian_by_differences(self):
        dom = construct_domain("exact_corner")
        ell, lam, d = 2.0, 0.3, 1e-6
        _, J = strip_map(dom, ell, lam)
        xp, _ = strip_map(dom, ell + d, lam)
        xm, _ = strip_map(dom, ell - d, lam)
        yp, _ = strip_map(dom, ell, lam + d)
        ym, _ = strip_map(dom, ell, lam - d)
        fd = np.stack([(xp - xm) / (2 * d), (yp - ym) / (2 * d)], axis=-1)
        assert np.max(np.abs(fd - J)) < 1e-5


class TestBoundaryFrame:
    def test_wedge_detB_constant(self):
        dom = wedge32()
        ell = np.linspace(0.0, 12.0, 25)
        s0, s1, B, detB = dom.boundary_frame(ell)
        assert np.allclose(detB, -np.sin(THETA_32), atol=1e-14)  # = +1
        assert np.allclose(s0, [np.cos(-0.75 * np.pi), np.sin(-0.75 * np.pi)])
        assert np.allclose(s1, [np.cos(0.75 * np.pi), np.sin(0.75 * np.pi)])

    def test_frame_rows_annihilate_wall_gradient(self):
        # f*_i = s^i . grad(psi): B (M grad) must reproduce the dot products
        dom = wedge32()
        s0, s1, B, _ = dom.boundary_frame(2.0)
        grad = np.array([0.4, -1.7])
        M = np.diag([1.0, -1.0])
        fstar = B @ (M @ grad)
        assert fstar[0] == pytest.approx(s0 @ grad, abs=1e-15)
        assert fstar[1] == pytest.approx(s1 @ grad, abs=1e-15)

    def test_exact_corner_detB_asymptote(self):
        dom = construct_domain("exact_corner")
        ell = np.array([3.0, 6.0, 9.0])
        _, _, _, detB = dom.boundary_frame(ell)
        err = np.abs(detB - 1.0)
        # error O(e^(-2/3 ell)): each 3 units of ell shrink it by ~e^-2
        assert err[0] < 0.2
        assert err[1] < err[0] * np.exp(-1.5)
        assert err[2] < err[1] * np.exp(-1.5)

    @pytest.mark.parametrize("kind,params", [
        ("wedge", {"opening": THETA_32}),
        ("wedge", {"opening": 0.7 * np.pi}),
        ("exact_corner", {}),
        ("smoothed_wedge", {"opening": 2.0, "blend_scale": 1.0}),
    ])
    def test_detB_tends_to_minus_sin_opening(self, kind, params):
        dom = construct_domain(kind, **params)
        _, _, _, detB = dom.boundary_frame(np.array([20.0]))
        assert detB[0] + np.sin(dom.opening_angle) == pytest.approx(0.0, abs=1e-5)

    def test_channel_frame_singular(self):
        with pytest.raises(ValueError, match="singular"):
            construct_domain("channel", width=1.0).boundary_frame(2.0)


class TestVerifyDecay:
    def test_wedge_zero_margin(self):
        report = verify_decay(wedge32(), eps=5.0, c_decay=0.0, r_samples=np.geomspace(2, 1e5, 30))
        assert report.passed and report.max_ratio == 0.0

    def test_exact_corner_pass_and_fail(self):
        dom = construct_domain("exact_corner")
        r = np.geomspace(2.0, 1e15, 90)
        assert verify_decay(dom, eps=2.0 / 3.0, c_decay=10.0, r_samples=r).passed
        assert not verify_decay(dom, eps=0.8, c_decay=10.0, r_samples=r).passed
        assert not verify_decay(dom, eps=1.0, c_decay=10.0, r_samples=r).passed

    def test_oscillating_wall_fails_every_eps(self):
        # theta_hi(r) = Theta/2 + 0.1 sin(log r): derivatives ~ 1/r^k only
        theta0 = 0.75 * np.pi

        def f0(r):
            return theta0 + 0.1 * np.sin(np.log(r))

        def f1(r):
            return 0.1 * np.cos(np.log(r)) / r

        def f2(r):
            return 0.1 * (-np.sin(np.log(r)) - np.cos(np.log(r))) / r**2

        def f3(r):
            return 0.1 * (np.cos(np.log(r)) + 3 * np.sin(np.log(r))) / r**3

        dom = CornerDomain(
            wall_lo=CallableWall(
                (lambda r: np.full_like(r, -theta0),) + tuple(lambda r: np.zeros_like(r) for _ in range(3)),
                -theta0,
            ),
            wall_hi=CallableWall((f0, f1, f2, f3), theta0),
            r_min=1.0,
            eps=0.1,
            c_decay=1.0,
            kind="oscillating",
        )
        # |theta'| r = 0.1 |cos(log r)| never decays, so any positive eps is
        # eventually violated once the samples reach far enough out
        r = np.geomspace(2.0, 1e22, 400)
        for eps in (0.05, 0.2, 0.5):
            assert not verify_decay(dom, eps=eps, c_decay=1.0, r_samples=r).passed

    def test_samples_below_rmin_rejected(self):
        with pytest.raises(ValueError):
            verify_decay(wedge32(), 0.5, 1.0, np.array([0.5, 2.0]))


class TestQuasiconformality:
    def test_operator_norm(self):
        F = np.array([[3.0, 0.0], [0.0, -2.0]])
        assert operator_norm_2x2(F) == pytest.approx(3.0, rel=1e-14)
        R = np.array([[0.6, -0.8], [0.8, 0.6]])
        assert operator_norm_2x2(R) == pytest.approx(1.0, rel=1e-14)

    def test_conformal_matrix_ratio_one(self):
        F = np.array([[[2.0, -1.0], [1.0, 2.0]]])  # rotation-scaling
        rep = quasiconformality_ratio(F)
        assert rep.empirical_k == pytest.approx(1.0, rel=1e-13)

    def test_diagonal_stretch(self):
        F = np.array([[[2.0, 0.0], [0.0, 1.0]]])
        rep = quasiconformality_ratio(F)
        assert rep.empirical_k == pytest.approx(2.0, rel=1e-14)

    def test_degenerate_points_flagged_not_divided(self):
        F = np.zeros((3, 2, 2))
        F[0] = [[1.0, 0.0], [0.0, 1.0]]
        F[1] = [[1.0, 0.0], [0.0, 0.0]]  # singular
        F[2] = [[1.0, 0.0], [0.0, -1.0]]  # orientation-reversing
        rep = quasiconformality_ratio(F)
        assert rep.valid.tolist() == [True, False, False]
        assert rep.empirical_k == pytest.approx(1.0)
        assert rep.flagged_fraction == pytest.approx(2.0 / 3.0)

    def test_composition_bound(self):
        # measured K of a composition is bounded by the product of the
        # factors' constants on any sample grid
        A = np.array([[2.0, 0.3], [0.1, 1.0]])
        xs = np.linspace(-1.0, 1.0, 21)
        X, Y = np.meshgrid(xs, xs)
        Jg = np.empty(X.shape + (2, 2))
        Jg[..., 0, 0] = 1.0 + 0.2 * np.cos(Y)
        Jg[..., 0, 1] = 0.2 * X
        Jg[..., 1, 0] = 0.1 * np.sin(X)
        Jg[..., 1, 1] = 1.0 + 0.1 * X * X
        k_f = quasiconformality_ratio(A[None]).empirical_k
        k_g = quasiconformality_ratio(Jg).empirical_k
        k_fg = quasiconformality_ratio(A @ Jg).empirical_k
        assert k_fg <= k_f * k_g + 1e-12
