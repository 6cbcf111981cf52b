import numpy as np
import pytest

from mvdisp.core import (
    BaselineVec,
    DisparityField,
    ImageGrid,
    ParameterError,
    PenaltyKind,
    SolverConfig,
)
from mvdisp.solver import (
    LAPLACIAN_STENCIL,
    ELSystem,
    LinearizedView,
    assemble_weights,
    cg_solve,
    el_operator,
    energy_eval,
    energy_from_views,
    gradient_magnitude,
    irls_solve,
    laplacian_apply,
    linearize_view,
)
from mvdisp.robust import penalty_value, penalty_weight
from conftest import shifted_pair, texture_image


# --------------------------------------------------------------------------
# Brute-force dense oracles


def fold(i, n):
    if i == -1:
        return 0
    if i == n:
        return n - 1
    return i


def dense_laplacian(h, w):
    L = np.zeros((h * w, h * w))
    for i in range(h):
        for j in range(w):
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii, jj = fold(i + di, h), fold(j + dj, w)
                    L[i * w + j, ii * w + jj] += LAPLACIAN_STENCIL[di + 1, dj + 1]
    return L


def dense_el_matrix(views, wd_fields, wr, alpha_eff, reg_form):
    h, w = wr.shape
    n = h * w
    A = np.zeros((n, n))
    for v, wd in zip(views, wd_fields):
        A[np.arange(n), np.arange(n)] += (wd * v.a * v.a).ravel()
    a2 = alpha_eff * alpha_eff

    def idx(i, j):
        return i * w + j

    if reg_form == "divergence":
        for i in range(h):
            for j in range(w):
                for (i2, j2) in ((i, j + 1), (i + 1, j)):
                    if i2 < h and j2 < w:
                        W = a2 * wr[i, j]
                        A[idx(i, j), idx(i, j)] += W
                        A[idx(i2, j2), idx(i2, j2)] += W
                        A[idx(i, j), idx(i2, j2)] -= W
                        A[idx(i2, j2), idx(i, j)] -= W
    else:
        L = dense_laplacian(h, w)
        D = np.diag(wr.ravel())
        if reg_form == "symmetrized":
            A += a2 * -0.5 * (D @ L + L @ D)
        else:
            A += a2 * -(D @ L)
    return A


def random_instance(rng, shape=(8, 8), n_views=2):
    views = []
    wds = []
    for k in range(n_views):
        a = rng.normal(0, 1, shape)
        b = rng.normal(0, 0.1, shape)
        mask = rng.random(shape) > 0.1
        views.append(
            LinearizedView(a, b, mask, BaselineVec(float(k + 1), 0.0))
        )
        wds.append(rng.uniform(0.1, 2.0, shape) * mask)
    wr = rng.uniform(0.05, 3.0, shape)
    return views, wds, wr


# --------------------------------------------------------------------------
# laplacian_apply


class TestLaplacian:
    def test_constant_zero(self):
        assert np.allclose(laplacian_apply(np.full((6, 7), 3.3)), 0.0, atol=1e-14)

    def test_ramp_zero_interior(self):
        x = np.arange(10, dtype=float)[None, :].repeat(8, 0)
        out = laplacian_apply(x)
        assert np.allclose(out[1:-1, 1:-1], 0.0, atol=1e-13)

    def test_quadratic_interior(self):
        # stencil response to x^2 is 2/3 (one third of the true Laplacian 2)
        x = np.arange(12, dtype=float)[None, :].repeat(9, 0)
        out = laplacian_apply(x * x)
        assert np.allclose(out[1:-1, 1:-1], 2.0 / 3.0, atol=1e-12)

    def test_matches_dense_fold(self, rng):
        w = rng.normal(0, 1, (6, 5))
        L = dense_laplacian(6, 5)
        assert np.allclose(laplacian_apply(w).ravel(), L @ w.ravel(), atol=1e-12)


# --------------------------------------------------------------------------
# linearize_view


class TestLinearizeView:
    def test_identical_images_zero_b(self, rng):
        img = ImageGrid(rng.random((10, 12)))
        lv = linearize_view(img, img, BaselineVec(1, 0), 0.75)
        assert np.allclose(lv.b, 0.0, atol=1e-15)
        assert lv.mask.all()

    def test_zero_baseline_zero_a(self, rng):
        img = ImageGrid(rng.random((10, 12)))
        lv = linearize_view(img, ImageGrid(rng.random((10, 12))), BaselineVec(0, 0), 0.75)
        assert np.all(lv.a == 0.0)

    def test_unit_shift_ramp_solves_at_w_one(self):
        slope = 0.03
        n = 48
        base = slope * np.arange(n + 1, dtype=float)
        ref = ImageGrid(base[:-1][None, :].repeat(12, 0))
        other = ImageGrid(base[1:][None, :].repeat(12, 0))  # ref sampled at x+1
        lv = linearize_view(ref, other, BaselineVec(1, 0), 0.75)
        inner = np.s_[3:-3, 6:-6]
        assert np.allclose(lv.a[inner], slope, atol=1e-10)
        assert np.allclose(lv.b[inner], -slope, atol=1e-10)
        assert np.allclose(lv.a[inner] * 1.0 + lv.b[inner], 0.0, atol=1e-10)


# --------------------------------------------------------------------------
# assemble_weights / el_operator


class TestWeights:
    def test_l2_all_valid(self, rng):
        views, _, _ = random_instance(rng)
        views = [LinearizedView(v.a, v.b, np.ones_like(v.mask), v.baseline) for v in views]
        wd, wr = assemble_weights(views, np.zeros((8, 8)), PenaltyKind.l2(), PenaltyKind.l2())
        for f in wd:
            assert np.all(f == 1.0)
        assert np.all(wr == 1.0)

    def test_welsch_residual_at_sigma(self):
        shape = (4, 4)
        sigma = 0.3
        v = LinearizedView(np.ones(shape), np.full(shape, sigma), np.ones(shape, bool),
                           BaselineVec(1, 0))
        wd, _ = assemble_weights([v], np.zeros(shape), PenaltyKind.welsch(sigma),
                                 PenaltyKind.l2())
        assert np.allclose(wd[0], np.exp(-0.5), atol=1e-12)

    def test_constant_w_reg_weight(self):
        shape = (5, 6)
        v = LinearizedView(np.ones(shape), np.zeros(shape), np.ones(shape, bool),
                           BaselineVec(1, 0))
        kind = PenaltyKind.huber_l1(1e-4)
        _, wr = assemble_weights([v], np.full(shape, 0.7), PenaltyKind.l2(), kind)
        assert np.allclose(wr, penalty_weight(kind, 0.0))

    def test_masked_pixels_zero_weight(self, rng):
        shape = (6, 6)
        mask = rng.random(shape) > 0.5
        v = LinearizedView(rng.normal(0, 1, shape), rng.normal(0, 1, shape), mask,
                           BaselineVec(1, 0))
        wd, _ = assemble_weights([v], np.zeros(shape), PenaltyKind.l2(), PenaltyKind.l2())
        assert np.all(wd[0][~mask] == 0.0)


class TestElOperator:
    @pytest.mark.parametrize("reg_form", ["divergence", "symmetrized", "literal"])
    def test_matches_dense(self, rng, reg_form):
        views, wds, wr = random_instance(rng)
        A = dense_el_matrix(views, wds, wr, 0.7, reg_form)
        for _ in range(3):
            w = rng.normal(0, 1, (8, 8))
            got = el_operator(w, views, wds, wr, 0.7, reg_form)
            assert np.abs(got.ravel() - A @ w.ravel()).max() < 1e-10

    def test_identity_special_case(self):
        shape = (5, 5)
        v = LinearizedView(np.ones(shape), np.zeros(shape), np.ones(shape, bool),
                           BaselineVec(1, 0))
        w = np.random.default_rng(3).normal(0, 1, shape)
        got = el_operator(w, [v], [np.ones(shape)], np.ones(shape), 0.0)
        assert np.allclose(got, w, atol=1e-14)

    def test_constant_w_zero_a(self):
        shape = (5, 5)
        v = LinearizedView(np.zeros(shape), np.zeros(shape), np.ones(shape, bool),
                           BaselineVec(1, 0))
        got = el_operator(np.full(shape, 2.0), [v], [np.ones(shape)], np.ones(shape), 1.3)
        assert np.allclose(got, 0.0, atol=1e-12)

    @pytest.mark.parametrize("reg_form", ["divergence", "symmetrized"])
    def test_symmetric(self, rng, reg_form):
        views, wds, wr = random_instance(rng)
        sys_ = ELSystem(views, wds, wr, 0.9, reg_form)
        for _ in range(5):
            x = rng.normal(0, 1, (8, 8))
            y = rng.normal(0, 1, (8, 8))
            lhs = float(np.vdot(sys_.apply(x), y))
            rhs = float(np.vdot(x, sys_.apply(y)))
            assert abs(lhs - rhs) < 1e-10


# --------------------------------------------------------------------------
# Conjugate gradient


class TestCG:
    def test_identity_one_iteration(self, rng):
        rhs = rng.normal(0, 1, (4, 4))
        x, iters, res = cg_solve(lambda v: v, rhs, 1e-10, 50)
        assert iters == 1
        assert np.allclose(x, rhs, atol=1e-12)

    def test_diagonal_closed_form(self):
        d = np.arange(1.0, 17.0).reshape(4, 4)
        rhs = np.ones((4, 4))
        x, _, _ = cg_solve(lambda v: d * v, rhs, 1e-10, 200)
        assert np.abs(x - 1.0 / d).max() < 1e-8

    def test_zero_rhs(self):
        x, iters, res = cg_solve(lambda v: v, np.zeros((3, 3)), 1e-8, 10)
        assert iters == 0 and res == 0.0 and np.all(x == 0.0)

    def test_warm_start_skips_work(self, rng):
        d = rng.uniform(1, 2, (5, 5))
        rhs = rng.normal(0, 1, (5, 5))
        x1, _, _ = cg_solve(lambda v: d * v, rhs, 1e-12, 200)
        x2, iters, _ = cg_solve(lambda v: d * v, rhs, 1e-12, 200, x0=x1)
        assert iters == 0
        assert np.array_equal(x1, x2)

    def test_el_system_matches_dense_solve(self, rng):
        shape = (16, 16)
        views, wds, wr = [], [], []
        for k in range(2):
            a = rng.normal(0, 1, shape)
            b = rng.normal(0, 0.2, shape)
            views.append(LinearizedView(a, b, np.ones(shape, bool), BaselineVec(k + 1.0, 0)))
            wds.append(rng.uniform(0.2, 1.5, shape))
        wr = rng.uniform(0.1, 2.0, shape)
        system = ELSystem(views, wds, wr, 0.4, "divergence")
        rhs = system.rhs()
        A = dense_el_matrix(views, wds, wr, 0.4, "divergence")
        expect = np.linalg.solve(A, rhs.ravel()).reshape(shape)
        got, iters, res = cg_solve(system.apply, rhs, 1e-10, 2000, system.jacobi)
        rel = np.linalg.norm(got - expect) / np.linalg.norm(expect)
        assert rel < 1e-6


# --------------------------------------------------------------------------
# Energy


class TestEnergy:
    def test_matches_scalar_loop(self, rng):
        shape = (5, 6)
        views, _, _ = random_instance(rng, shape=shape)
        w = rng.normal(0, 0.5, shape)
        cfg = SolverConfig(alpha=0.3, data_penalty=PenaltyKind.welsch(0.4),
                           reg_penalty=PenaltyKind.huber_l1(1e-4))
        got = energy_from_views(w, views, cfg, n_views=3)
        e_data = 0.0
        for v in views:
            for i in range(shape[0]):
                for j in range(shape[1]):
                    if v.mask[i, j]:
                        r = v.a[i, j] * w[i, j] + v.b[i, j]
                        e_data += 0.4**2 * (1 - np.exp(-(r * r) / (2 * 0.4**2)))
        e_reg = 0.0
        eps = 1e-4
        for i in range(shape[0]):
            for j in range(shape[1]):
                gx = w[i, j + 1] - w[i, j] if j + 1 < shape[1] else 0.0
                gy = w[i + 1, j] - w[i, j] if i + 1 < shape[0] else 0.0
                g = np.hypot(gx, gy)
                e_reg += g * g / (2 * eps) if g <= eps else g - eps / 2
        alpha_eff = 0.3 * np.sqrt(3)
        assert got.e_data == pytest.approx(e_data, rel=1e-12)
        assert got.e_reg == pytest.approx(e_reg, rel=1e-12)
        assert got.e_total == pytest.approx(e_data + alpha_eff**2 * e_reg, rel=1e-12)

    def test_perfect_fit_zero_data(self, rng):
        shape = (6, 6)
        a = rng.normal(0, 1, shape)
        w = rng.normal(0, 1, shape)
        v = LinearizedView(a, -a * w, np.ones(shape, bool), BaselineVec(1, 0))
        cfg = SolverConfig(data_penalty=PenaltyKind.l2(), reg_penalty=PenaltyKind.l2())
        got = energy_from_views(w, [v], cfg, n_views=2)
        assert got.e_data == pytest.approx(0.0, abs=1e-20)

    def test_constant_w_zero_reg(self, rng):
        shape = (6, 6)
        v = LinearizedView(rng.normal(0, 1, shape), rng.normal(0, 1, shape),
                           np.ones(shape, bool), BaselineVec(1, 0))
        cfg = SolverConfig(data_penalty=PenaltyKind.l2(), reg_penalty=PenaltyKind.l2())
        got = energy_from_views(np.full(shape, 0.8), [v], cfg, n_views=2)
        assert got.e_reg == 0.0

    def test_energy_eval_wrapper(self):
        vs = shifted_pair(5, 0.2)
        cfg = SolverConfig(data_penalty=PenaltyKind.l2(), reg_penalty=PenaltyKind.l2())
        out = energy_eval(DisparityField.zeros(vs.shape), vs, cfg)
        assert out.e_total > 0
        assert out.alpha_eff == pytest.approx(cfg.alpha * np.sqrt(2))


# --------------------------------------------------------------------------
# IRLS


class TestIrls:
    def test_l2_one_step_reaches_minimum(self):
        vs = shifted_pair(2, 0.25, noise=0.01)
        cfg = SolverConfig(alpha=0.1, data_penalty=PenaltyKind.l2(),
                           reg_penalty=PenaltyKind.l2(), irls_iters=2, cg_tol=1e-10,
                           cg_max_iters=4000)
        res = irls_solve(vs, DisparityField.zeros(vs.shape), cfg)
        # second step re-solves the same constant-weight system: no movement
        assert res.steps[-1].cg_iterations == 0
        assert abs(res.energies[-1] - res.energies[-2]) <= 1e-9 * abs(res.energies[-2])

    def test_translation_recovery(self):
        vs = shifted_pair(4, 0.3, shape=(48, 64), noise=0.01)
        cfg = SolverConfig(alpha=0.05, irls_iters=8)
        res = irls_solve(vs, DisparityField.zeros(vs.shape), cfg)
        assert np.mean(np.abs(res.w.w - 0.3)) < 0.05

    def test_large_alpha_keeps_constant(self):
        vs = shifted_pair(6, 0.2, noise=0.02)
        cfg = SolverConfig(alpha=50.0, data_penalty=PenaltyKind.l2(),
                           reg_penalty=PenaltyKind.l2(), irls_iters=2)
        w0 = DisparityField(np.full(vs.shape, 0.1))
        res = irls_solve(vs, w0, cfg)
        assert res.w.w.std() < 0.01

    @pytest.mark.parametrize("data", ["welsch", "huber"])
    def test_energy_non_increasing(self, data):
        kind = PenaltyKind.welsch_auto() if data == "welsch" else PenaltyKind.huber_l1()
        for seed in (0, 1, 2):
            vs = shifted_pair(seed, 0.3, noise=0.03)
            cfg = SolverConfig(alpha=0.2, data_penalty=kind, irls_iters=6)
            res = irls_solve(vs, DisparityField.zeros(vs.shape), cfg)
            e = res.energies
            for a, b in zip(e, e[1:]):
                assert b <= a + 1e-9 * abs(a)

    def test_view_order_invariance(self):
        vs = shifted_pair(8, 0.2, noise=0.01)
        # add a second non-reference view at baseline 2
        from mvdisp.core import View, ViewSet
        from conftest import texture_image

        far = texture_image(8, (40, 56), 1.0, shift=(2 * 0.2, 0.0))
        views = vs.views + (View(ImageGrid(far), BaselineVec(2.0, 0.0)),)
        vs3 = ViewSet(views, 0)
        cfg = SolverConfig(alpha=0.1, irls_iters=3)
        w0 = DisparityField.zeros(vs3.shape)
        r1 = irls_solve(vs3, w0, cfg, active=[0, 1, 2])
        r2 = irls_solve(vs3, w0, cfg, active=[0, 2, 1])
        assert np.abs(r1.w.w - r2.w.w).max() < 1e-10

    def test_sigma_history_non_increasing(self):
        vs = shifted_pair(9, 0.25, noise=0.05)
        cfg = SolverConfig(alpha=0.1, irls_iters=6)
        res = irls_solve(vs, DisparityField.zeros(vs.shape), cfg)
        h = res.sigma_state.history
        assert len(h) == 6
        assert all(b <= a for a, b in zip(h, h[1:]))

    def test_empty_subset_rejected(self):
        vs = shifted_pair(1, 0.1)
        cfg = SolverConfig()
        with pytest.raises(ParameterError):
            irls_solve(vs, DisparityField.zeros(vs.shape), cfg, active=[0])

    def test_w_init_shape_checked(self):
        vs = shifted_pair(1, 0.1)
        with pytest.raises(ParameterError):
            irls_solve(vs, DisparityField.zeros((3, 3)), SolverConfig())
