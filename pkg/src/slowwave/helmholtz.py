"""Helmholtz decomposition of 2-D flow fields on masked domains.

The curl-free component is the gradient of a potential phi solving a
Neumann Poisson problem; the divergence-free component is the rotated
gradient of a stream potential psi solving a Dirichlet Poisson problem.
Whatever the two solves do not capture stays in the harmonic residual,
so the three parts always reconstruct the input exactly.
"""

import warnings

import numpy as np
from dataclasses import dataclass

import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.ndimage import label

from .errors import EmptyMask, NoConvergence, NonFiniteInput
from .flow import FlowField


@dataclass
class SolverConfig:
    cg_tol: float = 1e-8
    max_iters_factor: int = 10  # iteration cap = factor * pixel count


def _masked_derivative(comp, mask, axis):
    """d(comp)/d(axis): central in the interior, one-sided at mask edges."""
    comp = np.where(mask, comp, 0.0)
    fwd = np.roll(mask, -1, axis=axis) & mask
    bwd = np.roll(mask, 1, axis=axis) & mask
    # roll wraps around; kill the wrapped slabs
    idx = [slice(None)] * mask.ndim
    idx[axis] = -1
    fwd[tuple(idx)] = False
    idx[axis] = 0
    bwd[tuple(idx)] = False

    nxt = np.roll(comp, -1, axis=axis)
    prv = np.roll(comp, 1, axis=axis)
    out = np.zeros_like(comp)
    both = fwd & bwd
    out[both] = ((nxt - prv) / 2.0)[both]
    only_f = fwd & ~bwd
    out[only_f] = (nxt - comp)[only_f]
    only_b = bwd & ~fwd
    out[only_b] = (comp - prv)[only_b]
    return out


def divergence(f: FlowField):
    """div f = du/drow + dv/dcol on the valid mask."""
    if not f.valid.any():
        raise EmptyMask("divergence on empty mask")
    return (_masked_derivative(f.u, f.valid, 0)
            + _masked_derivative(f.v, f.valid, 1))


def curl(f: FlowField):
    """curl f = dv/drow - du/dcol on the valid mask."""
    if not f.valid.any():
        raise EmptyMask("curl on empty mask")
    return (_masked_derivative(f.v, f.valid, 0)
            - _masked_derivative(f.u, f.valid, 1))


def gradient(scalar, mask):
    """Masked gradient, returned as a FlowField (row, col components)."""
    return FlowField(
        u=_masked_derivative(scalar, mask, 0),
        v=_masked_derivative(scalar, mask, 1),
        valid=np.asarray(mask, dtype=bool).copy(),
    )


def _build_laplacian(mask, bc):
    """5-point Laplacian (negated, SPD-ish) over the in-mask pixels.

    Dirichlet: out-of-mask neighbours are zero-valued ghosts (diagonal
    stays 4). Neumann: out-of-mask neighbours are dropped (diagonal is
    the in-mask neighbour count), giving a zero-flux operator.
    """
    idx = -np.ones(mask.shape, dtype=np.int64)
    pix = np.argwhere(mask)
    idx[mask] = np.arange(len(pix))

    rows, cols, vals = [], [], []
    H, W = mask.shape
    for n, (r, c) in enumerate(pix):
        diag = 0.0
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            inside = 0 <= rr < H and 0 <= cc < W and mask[rr, cc]
            if inside:
                rows.append(n)
                cols.append(idx[rr, cc])
                vals.append(-1.0)
                diag += 1.0
            elif bc == "dirichlet":
                diag += 1.0
        rows.append(n)
        cols.append(n)
        vals.append(diag)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(pix), len(pix)))


def _cg_solve(A, b, cfg: SolverConfig, singular):
    n = A.shape[0]
    if singular:
        b = b - b.mean()
    diag = A.diagonal()
    diag[diag == 0] = 1.0
    M = sp.diags(1.0 / diag)
    maxiter = max(cfg.max_iters_factor * n, 100)
    x, info = spla.cg(A, b, rtol=cfg.cg_tol, atol=0.0, maxiter=maxiter, M=M)
    if info > 0:
        raise NoConvergence(f"CG hit the iteration cap ({maxiter})")
    if singular:
        x = x - x.mean()
    return x


def poisson_solve(rhs, mask, bc="neumann", cfg: SolverConfig | None = None):
    """Solve lap(x) = rhs on the masked domain with CG.

    bc is "neumann" (zero-flux; solution returned with zero mean over the
    mask) or "dirichlet" (zero boundary ghosts). Disconnected masks are
    solved per connected component with a warning.
    """
    cfg = cfg or SolverConfig()
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("poisson_solve on empty mask")
    rhs = np.asarray(rhs, dtype=np.float64)
    if not np.isfinite(rhs[mask]).all():
        raise NonFiniteInput("rhs contains non-finite values inside mask")

    labels, n_comp = label(mask)
    if n_comp > 1:
        warnings.warn(f"mask has {n_comp} connected components; solving each separately")

    out = np.zeros(mask.shape)
    for comp_id in range(1, n_comp + 1):
        comp = labels == comp_id
        A = _build_laplacian(comp, bc)
        # A is the negated Laplacian, so negate the rhs as well
        b = -rhs[comp]
        x = _cg_solve(A, b, cfg, singular=(bc == "neumann"))
        out[comp] = x
    return out


@dataclass
class HelmholtzResult:
    grad_phi: FlowField   # curl-free component
    rot_psi: FlowField    # divergence-free component
    phi: np.ndarray
    psi: np.ndarray
    harmonic: FlowField   # residual f - grad_phi - rot_psi
    O: np.ndarray         # source map, >= 0
    I: np.ndarray         # sink map, <= 0


def sources_sinks(div_map):
    """Split a divergence map into sources (positive) and sinks (negative)."""
    div_map = np.asarray(div_map, dtype=np.float64)
    return np.maximum(div_map, 0.0), np.minimum(div_map, 0.0)


def _boundary_flux_rhs(f: FlowField):
    """Neumann flux correction: subtract f.n at pixels with missing neighbours."""
    mask = f.valid
    H, W = mask.shape
    correction = np.zeros(mask.shape)
    comps = {(-1, 0): -f.u, (1, 0): f.u, (0, -1): -f.v, (0, 1): f.v}
    for (dr, dc), outward in comps.items():
        nb = np.zeros_like(mask)
        rr0, rr1 = max(dr, 0), H + min(dr, 0)
        cc0, cc1 = max(dc, 0), W + min(dc, 0)
        nb[max(-dr, 0):H + min(-dr, 0), max(-dc, 0):W + min(-dc, 0)] = mask[rr0:rr1, cc0:cc1]
        missing = mask & ~nb
        correction[missing] += outward[missing]
    return correction


def decompose(f: FlowField, cfg: SolverConfig | None = None):
    """Split a flow field into curl-free, divergence-free and harmonic parts.

    phi solves lap(phi) = div(f) with flux-matching Neumann conditions;
    psi solves lap(psi) = curl(f) with homogeneous Dirichlet conditions.
    Source and sink maps come from the divergence of the curl-free part.
    """
    cfg = cfg or SolverConfig()
    mask = f.valid
    if not mask.any():
        raise EmptyMask("decompose on empty mask")
    if not (np.isfinite(f.u).all() and np.isfinite(f.v).all()):
        raise NonFiniteInput("flow field contains non-finite values")

    div_f = divergence(f)
    curl_f = curl(f)

    rhs_phi = div_f - _boundary_flux_rhs(f)
    phi = poisson_solve(rhs_phi, mask, bc="neumann", cfg=cfg)
    psi = poisson_solve(curl_f, mask, bc="dirichlet", cfg=cfg)

    grad_phi = gradient(phi, mask)
    gpsi = gradient(psi, mask)
    rot_psi = FlowField(u=-gpsi.v, v=gpsi.u, valid=mask.copy())

    harmonic = FlowField(
        u=f.u - grad_phi.u - rot_psi.u,
        v=f.v - grad_phi.v - rot_psi.v,
        valid=mask.copy(),
    )

    O, I = sources_sinks(divergence(grad_phi))
    return HelmholtzResult(
        grad_phi=grad_phi, rot_psi=rot_psi, phi=phi, psi=psi,
        harmonic=harmonic, O=O, I=I,
    )
