import numpy as np
import pytest

from slowwave.errors import EmptyMask
from slowwave.flow import FlowField
from slowwave.helmholtz import (
    SolverConfig,
    _build_laplacian,
    curl,
    decompose,
    divergence,
    poisson_solve,
    sources_sinks,
)
from slowwave.synth import make_manufactured_field


def full_field(u, v):
    return FlowField(u=u, v=v, valid=np.ones(u.shape, bool))


def radial_field(shape=(16, 16)):
    rr, cc = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    cr, cn = (shape[0] - 1) / 2, (shape[1] - 1) / 2
    return full_field(rr - cr, cc - cn)


def rotation_field(shape=(16, 16)):
    rr, cc = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    cr, cn = (shape[0] - 1) / 2, (shape[1] - 1) / 2
    return full_field(-(cc - cn), rr - cr)


def l2(f):
    return np.sqrt((f.u ** 2 + f.v ** 2).sum())


class TestOperators:
    def test_constant_field_zero_div_curl(self):
        f = full_field(np.full((8, 8), 1.5), np.full((8, 8), -2.0))
        assert np.allclose(divergence(f)[1:-1, 1:-1], 0)
        assert np.allclose(curl(f)[1:-1, 1:-1], 0)

    def test_radial_divergence_two(self):
        f = radial_field()
        assert np.allclose(divergence(f)[1:-1, 1:-1], 2.0)
        assert np.allclose(curl(f)[1:-1, 1:-1], 0.0)

    def test_rotation_curl_two(self):
        f = rotation_field()
        assert np.allclose(curl(f)[1:-1, 1:-1], 2.0)
        assert np.allclose(divergence(f)[1:-1, 1:-1], 0.0)

    def test_empty_mask(self):
        f = FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4)),
                      valid=np.zeros((4, 4), bool))
        with pytest.raises(EmptyMask):
            divergence(f)


class TestPoissonSolve:
    def test_zero_rhs_dirichlet(self):
        mask = np.ones((10, 10), bool)
        x = poisson_solve(np.zeros((10, 10)), mask, bc="dirichlet")
        assert np.allclose(x, 0.0)

    def _apply_discrete_laplacian(self, phi, mask, bc):
        A = _build_laplacian(mask, bc)
        out = np.zeros(mask.shape)
        out[mask] = -(A @ phi[mask])
        return out

    def test_manufactured_dirichlet(self):
        rng = np.random.default_rng(0)
        mask = np.ones((12, 14), bool)
        phi_star = rng.standard_normal((12, 14))
        # zero near the boundary so homogeneous Dirichlet is consistent
        phi_star[0, :] = phi_star[-1, :] = 0
        phi_star[:, 0] = phi_star[:, -1] = 0
        rhs = self._apply_discrete_laplacian(phi_star, mask, "dirichlet")
        x = poisson_solve(rhs, mask, bc="dirichlet")
        assert np.allclose(x, phi_star, atol=1e-6)

    def test_manufactured_neumann(self):
        rng = np.random.default_rng(1)
        mask = np.ones((11, 13), bool)
        phi_star = rng.standard_normal((11, 13))
        rhs = self._apply_discrete_laplacian(phi_star, mask, "neumann")
        x = poisson_solve(rhs, mask, bc="neumann")
        assert np.allclose(x, phi_star - phi_star.mean(), atol=1e-6)

    def test_masked_domain_neumann(self):
        rng = np.random.default_rng(2)
        rr, cc = np.mgrid[0:16, 0:16]
        mask = (rr - 8) ** 2 + (cc - 8) ** 2 < 49
        phi_star = np.where(mask, rng.standard_normal((16, 16)), 0.0)
        rhs = self._apply_discrete_laplacian(phi_star, mask, "neumann")
        x = poisson_solve(rhs, mask, bc="neumann")
        target = phi_star - phi_star[mask].mean()
        assert np.allclose(x[mask], target[mask], atol=1e-6)

    def test_disconnected_mask_warns_and_solves(self):
        mask = np.zeros((8, 8), bool)
        mask[1:3, 1:3] = True
        mask[5:7, 5:7] = True
        with pytest.warns(UserWarning, match="connected components"):
            x = poisson_solve(np.zeros((8, 8)), mask, bc="dirichlet")
        assert np.allclose(x, 0.0)


class TestDecompose:
    def test_gradient_field_pure(self):
        mask = np.ones((48, 48), bool)
        f, _ = make_manufactured_field("gradient", mask)
        res = decompose(f)
        assert l2(res.rot_psi) / l2(f) < 0.05
        assert l2(res.harmonic) / l2(f) < 0.05

    def test_rotational_field_pure(self):
        mask = np.ones((48, 48), bool)
        f, _ = make_manufactured_field("rotational", mask)
        res = decompose(f)
        assert l2(res.grad_phi) / l2(f) < 0.05
        assert l2(res.harmonic) / l2(f) < 0.05

    def test_zero_field(self):
        f = full_field(np.zeros((12, 12)), np.zeros((12, 12)))
        res = decompose(f)
        for comp in (res.grad_phi, res.rot_psi, res.harmonic):
            assert np.allclose(comp.u, 0) and np.allclose(comp.v, 0)
        assert np.allclose(res.O, 0) and np.allclose(res.I, 0)

    def test_reconstruction_exact(self):
        rng = np.random.default_rng(3)
        f = full_field(rng.standard_normal((20, 20)), rng.standard_normal((20, 20)))
        res = decompose(f)
        assert np.allclose(res.grad_phi.u + res.rot_psi.u + res.harmonic.u, f.u)
        assert np.allclose(res.grad_phi.v + res.rot_psi.v + res.harmonic.v, f.v)

    def test_component_identities_on_rectangle(self):
        cfg = SolverConfig()
        mask = np.ones((32, 32), bool)
        f, _ = make_manufactured_field("gradient", mask, radius=10.0)
        g, _ = make_manufactured_field("rotational", mask, radius=10.0)
        combined = full_field(f.u + g.u, f.v + g.v)
        res = decompose(combined, cfg)
        fmax = max(np.abs(combined.u).max(), np.abs(combined.v).max())
        bound = 10 * cfg.cg_tol * fmax
        assert np.abs(curl(res.grad_phi)[2:-2, 2:-2]).max() <= bound
        assert np.abs(divergence(res.rot_psi)[2:-2, 2:-2]).max() <= bound

    def test_l2_orthogonality(self):
        mask = np.ones((32, 32), bool)
        f, _ = make_manufactured_field("gradient", mask, radius=10.0)
        g, _ = make_manufactured_field("rotational", mask,
                                       center=(13.0, 17.0), radius=9.0)
        res = decompose(full_field(f.u + g.u, f.v + g.v))
        ip = (res.grad_phi.u * res.rot_psi.u + res.grad_phi.v * res.rot_psi.v).sum()
        assert abs(ip) <= 1e-3 * l2(res.grad_phi) * l2(res.rot_psi)


class TestSourcesSinks:
    def test_zero_map(self):
        O, I = sources_sinks(np.zeros((6, 6)))
        assert np.allclose(O, 0) and np.allclose(I, 0)

    def test_radial_outflow_peaks_at_center(self):
        # localized outflow: radial field damped by a Gaussian envelope
        rr, cc = np.mgrid[0:17, 0:17].astype(float)
        env = np.exp(-((rr - 8) ** 2 + (cc - 8) ** 2) / (2 * 3.0 ** 2))
        res = decompose(full_field((rr - 8) * env, (cc - 8) * env))
        center = np.unravel_index(np.argmax(res.O), res.O.shape)
        assert abs(center[0] - 8) <= 1 and abs(center[1] - 8) <= 1
        assert res.I[7:10, 7:10].max() <= 0.0

    def test_odd_symmetry(self):
        rng = np.random.default_rng(4)
        div_map = rng.standard_normal((9, 9))
        O1, I1 = sources_sinks(div_map)
        O2, I2 = sources_sinks(-div_map)
        assert np.allclose(O2, -I1) and np.allclose(I2, -O1)

    def test_disjoint_and_partition(self):
        rng = np.random.default_rng(5)
        div_map = rng.standard_normal((9, 9))
        O, I = sources_sinks(div_map)
        assert np.all(O >= 0) and np.all(I <= 0)
        assert np.allclose(O * I, 0.0)
        assert np.allclose(O - np.abs(I), div_map)
