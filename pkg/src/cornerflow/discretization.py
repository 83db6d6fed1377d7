"""Bilinear finite elements on the truncated log-polar strip.

The strip (ell_min, L) x (0, 1) is meshed by a uniform tensor grid of
quadrilaterals; the physical geometry enters only through the chart
Jacobians cached at the tensor-Gauss quadrature points.  The assembled
weak form is

    residual_i = sum_qp  w |det J|  h~(|grad psi|^2 / 2) grad psi . grad phi_i

with physical gradients grad = J^(-T) grad_Lambda and the capped
coefficient h~ (identically 1 in incompressible mode).  Its exact
linearization uses the flux Jacobian h~ I + h~' grad psi (x) grad psi.

Node ordering is lam-major within ascending ell (node = i*(n_lam+1) + j),
matching the field-file row order.  Assembly is vectorized over cells and
reduced in a fixed order, so repeated runs are bit-identical and the
Jacobian is exactly symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "StripMesh",
    "StreamField",
    "BoundaryConditions",
    "DiscreteSystem",
    "UniformFluxProfile",
    "ModeProfile",
    "ExactTraceProfile",
    "build_mesh",
    "assemble_residual",
    "assemble_jacobian",
    "assemble_load",
    "apply_boundary_conditions",
    "discrete_energy",
    "gradient_at_quadrature",
]

# reference bilinear element on [-1,1]^2; corner order (-,-), (+,-), (+,+), (-,+)
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


def _gauss_1d(order: int):
    return np.polynomial.legendre.leggauss(order)


def _reference_basis(order: int):
    """Values and (xi, eta)-gradients of the 4 bilinear shape functions
    at the tensor Gauss points; returns (points, weights, N, dN)."""
    g, w = _gauss_1d(order)
    xi, eta = np.meshgrid(g, g, indexing="ij")
    xi, eta = xi.ravel(), eta.ravel()
    wq = np.outer(w, w).ravel()
    N = 0.25 * (1.0 + np.outer(xi, _XI)) * (1.0 + np.outer(eta, _ETA))
    dN = np.empty((xi.size, 4, 2))
    dN[:, :, 0] = 0.25 * _XI[None, :] * (1.0 + np.outer(eta, _ETA))
    dN[:, :, 1] = 0.25 * _ETA[None, :] * (1.0 + np.outer(xi, _XI))
    return np.stack([xi, eta], axis=-1), wq, N, dN


@dataclass
class StripMesh:
    """Tensor-product mesh of the truncated strip with cached chart data."""

    domain: object
    ell_min: float
    ell_max: float
    n_ell: int
    n_lam: int
    quad_order: int

    ell_nodes: np.ndarray = field(repr=False, default=None)
    lam_nodes: np.ndarray = field(repr=False, default=None)
    node_ell: np.ndarray = field(repr=False, default=None)
    node_lam: np.ndarray = field(repr=False, default=None)
    node_xy: np.ndarray = field(repr=False, default=None)
    node_jac: np.ndarray = field(repr=False, default=None)
    cells: np.ndarray = field(repr=False, default=None)
    qp_ell: np.ndarray = field(repr=False, default=None)
    qp_lam: np.ndarray = field(repr=False, default=None)
    qp_xy: np.ndarray = field(repr=False, default=None)
    qp_weight: np.ndarray = field(repr=False, default=None)  # w |det J|
    qp_shape: np.ndarray = field(repr=False, default=None)  # (nq, 4)
    qp_grad: np.ndarray = field(repr=False, default=None)  # (C, nq, 4, 2) physical

    @property
    def n_nodes(self) -> int:
        return (self.n_ell + 1) * (self.n_lam + 1)

    @property
    def n_cells(self) -> int:
        return self.n_ell * self.n_lam

    def node_id(self, i, j):
        return i * (self.n_lam + 1) + j

    def node_grid(self, values):
        """Reshape a nodal vector to (n_ell+1, n_lam+1)."""
        return np.asarray(values).reshape(self.n_ell + 1, self.n_lam + 1)

    def cell_areas(self):
        return self.qp_weight.sum(axis=1)


def build_mesh(domain, ell_min, ell_max, n_ell, n_lam, quad_order=2) -> StripMesh:
    """Mesh the strip [ell_min, ell_max] x [0, 1] uniformly."""
    if not ell_min < ell_max:
        raise ValueError("ell_min must be below ell_max")
    if n_ell < 2 or n_lam < 2:
        raise ValueError("cell counts must be at least 2 in both directions")
    if quad_order not in (2, 3, 4):
        raise ValueError("quad_order must be 2, 3 or 4")
    if ell_min < domain.ell_start - 1e-12:
        raise ValueError(
            f"domain starts at ell = {domain.ell_start:.6g}, beyond ell_min = {ell_min}"
        )

    mesh = StripMesh(domain, float(ell_min), float(ell_max), int(n_ell), int(n_lam), int(quad_order))
    mesh.ell_nodes = np.linspace(ell_min, ell_max, n_ell + 1)
    mesh.lam_nodes = np.linspace(0.0, 1.0, n_lam + 1)

    E, L = np.meshgrid(mesh.ell_nodes, mesh.lam_nodes, indexing="ij")
    mesh.node_ell = E.ravel()
    mesh.node_lam = L.ravel()
    mesh.node_xy, mesh.node_jac = domain.chart(mesh.node_ell, mesh.node_lam)

    ii, jj = np.meshgrid(np.arange(n_ell), np.arange(n_lam), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    stride = n_lam + 1
    mesh.cells = np.stack(
        [
            ii * stride + jj,
            (ii + 1) * stride + jj,
            (ii + 1) * stride + jj + 1,
            ii * stride + jj + 1,
        ],
        axis=1,
    )

    ref_pts, ref_w, N, dN = _reference_basis(quad_order)
    d_ell = (mesh.ell_max - mesh.ell_min) / n_ell
    d_lam = 1.0 / n_lam
    cell_e0 = mesh.ell_nodes[ii][:, None]
    cell_l0 = mesh.lam_nodes[jj][:, None]
    qp_ell = cell_e0 + 0.5 * d_ell * (ref_pts[None, :, 0] + 1.0)
    qp_lam = cell_l0 + 0.5 * d_lam * (ref_pts[None, :, 1] + 1.0)
    mesh.qp_ell, mesh.qp_lam = qp_ell, qp_lam
    mesh.qp_shape = N

    xy, J = domain.chart(qp_ell, qp_lam)
    mesh.qp_xy = xy
    detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(detJ <= 0):
        raise ValueError("chart Jacobian is not orientation-preserving on the mesh")
    mesh.qp_weight = ref_w[None, :] * (0.25 * d_ell * d_lam) * detJ

    # strip gradients of the shape functions, then push through J^(-T)
    grad_strip = dN[None, :, :, :] * np.array([2.0 / d_ell, 2.0 / d_lam])
    Jinv = np.linalg.inv(J)
    mesh.qp_grad = np.einsum("cqde,cqae->cqad", Jinv, grad_strip)
    return mesh


@dataclass
class StreamField:
    """Nodal stream-function values on a strip mesh."""

    mesh: StripMesh
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        if self.psi.shape != (self.mesh.n_nodes,):
            raise ValueError("psi length does not match the mesh")


def gradient_at_quadrature(mesh: StripMesh, psi):
    """Physical gradient of the bilinear field at all quadrature points."""
    psi_cell = np.asarray(psi)[mesh.cells]
    return np.einsum("ca,cqad->cqd", psi_cell, mesh.qp_grad)


def _coefficients(gas, q):
    if gas is None:
        return np.ones_like(q), np.zeros_like(q)
    return gas.capped_volume_pair(q)


def assemble_residual(mesh, gas, psi, bcs=None):
    """Weak-form residual; rows of constrained nodes become psi - value."""
    psi = np.asarray(psi, dtype=float)
    if not np.all(np.isfinite(psi)):
        raise ValueError("stream-function values must be finite")
    grad = gradient_at_quadrature(mesh, psi)
    q = 0.5 * np.sum(grad * grad, axis=-1)
    h, _ = _coefficients(gas, q)
    wh = mesh.qp_weight * h
    r_cell = np.einsum("cq,cqd,cqad->ca", wh, grad, mesh.qp_grad)
    res = np.zeros(mesh.n_nodes)
    np.add.at(res, mesh.cells, r_cell)
    if bcs is not None:
        res[bcs.mask] = psi[bcs.mask] - bcs.values[bcs.mask]
    return res


def assemble_jacobian(mesh, gas, psi) -> sp.csr_matrix:
    """Exact linearization of the residual: flux matrix h~ I + h~' g (x) g.

    Returned without boundary rows eliminated; exactly symmetric (blocks
    are symmetrized and duplicates reduced in a fixed order).
    """
    psi = np.asarray(psi, dtype=float)
    grad = gradient_at_quadrature(mesh, psi)
    q = 0.5 * np.sum(grad * grad, axis=-1)
    h, hp = _coefficients(gas, q)
    D = h[..., None, None] * np.eye(2) + hp[..., None, None] * (
        grad[..., :, None] * grad[..., None, :]
    )
    flux_grad = np.einsum("cqde,cqae->cqad", D, mesh.qp_grad)
    block = np.einsum("cq,cqad,cqbd->cab", mesh.qp_weight, mesh.qp_grad, flux_grad)
    block = 0.5 * (block + block.transpose(0, 2, 1))
    return _reduce_blocks(mesh, block)


def _reduce_blocks(mesh, block) -> sp.csr_matrix:
    """Sum 4x4 cell blocks into CSR with a canonical reduction order."""
    n = mesh.n_nodes
    rows = np.repeat(mesh.cells, 4, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 4)).ravel()
    vals = block.transpose(0, 2, 1).ravel()  # (cell, a, b) with a as row
    key = rows.astype(np.int64) * n + cols
    order = np.argsort(key, kind="stable")
    key_s, vals_s = key[order], vals[order]
    starts = np.flatnonzero(np.r_[True, np.diff(key_s) != 0])
    sums = np.add.reduceat(vals_s, starts)
    uk = key_s[starts]
    urows, ucols = (uk // n).astype(np.int32), (uk % n).astype(np.int32)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, urows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return sp.csr_matrix((sums, ucols, indptr), shape=(n, n))


def assemble_load(mesh, f_xy):
    """Load vector of a pointwise source: F_i = sum w |detJ| f(x) phi_i."""
    fvals = f_xy(mesh.qp_xy[..., 0], mesh.qp_xy[..., 1])
    f_cell = np.einsum("cq,qa->ca", mesh.qp_weight * fvals, mesh.qp_shape)
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.cells, f_cell)
    return out


def discrete_energy(mesh, gas, psi) -> float:
    """E(psi) = sum w |detJ| H~(|grad psi|^2/2); the residual is its gradient."""
    grad = gradient_at_quadrature(mesh, psi)
    q = 0.5 * np.sum(grad * grad, axis=-1)
    density = q if gas is None else gas.energy_density(q)
    return float(np.sum(mesh.qp_weight * density))


# ---------------------------------------------------------------------------
# far-field profiles and boundary conditions


class ProfileError(ValueError):
    """Far-field trace incompatible with the wall values."""


def _arc_distance(domain, ell, lam_targets):
    """Arc length along the ell = const line from lam = 0 to each target."""
    lam_targets = np.asarray(lam_targets, dtype=float)
    grid = np.unique(np.concatenate([[0.0, 1.0], lam_targets]))
    g, w = _gauss_1d(6)
    seg_a, seg_b = grid[:-1], grid[1:]
    mid = 0.5 * (seg_a[:, None] + seg_b[:, None])
    half = 0.5 * (seg_b - seg_a)[:, None]
    pts = mid + half * g[None, :]
    _, J = domain.chart(np.full_like(pts, ell), pts)
    speed = np.hypot(J[..., 0, 1], J[..., 1, 1])
    seg_len = np.sum(w[None, :] * speed, axis=1) * half[:, 0]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    idx = np.searchsorted(grid, lam_targets)
    return cum[idx], cum[-1]


class UniformFluxProfile:
    """Uniform crossing flux with total stream-function budget `amplitude`.

    The trace at the arc is amplitude * d(lam)/d(1) with d the physical
    arc distance from the lam = 0 wall: the imposed momentum crossing the
    arc is uniform per unit length and integrates to `amplitude`.  On a
    connected-boundary corner domain no nonzero net flux is compatible
    with equal wall constants, so the trace is applied at interior arc
    nodes only and the lam = 1 corner node keeps the wall value; on a
    channel the lam = 1 wall carries the constant `amplitude` instead.
    """

    kind = "uniform_flux"
    requires_endpoint_match = False

    def __init__(self, amplitude: float):
        self.amplitude = float(amplitude)

    def trace(self, mesh, ell, lam):
        dist, total = _arc_distance(mesh.domain, ell, lam)
        return self.amplitude * dist / total

    def wall_values(self, domain):
        if domain.connected_boundary:
            return 0.0, 0.0
        return 0.0, self.amplitude


class ModeProfile:
    """Trace of the k-th separated harmonic mode, amplitude at the far arc.

    For a corner domain the mode is r^(k pi / Theta) sin(k pi lam) scaled
    to the requested amplitude at ell = ell_max; the inner-arc trace uses
    the same decaying extension, so on a straight wedge the exact solution
    of the incompressible problem is the mode itself.
    """

    kind = "mode"
    requires_endpoint_match = True

    def __init__(self, k: int, amplitude: float):
        if k < 1 or int(k) != k:
            raise ValueError("mode index k must be a positive integer")
        self.k = int(k)
        self.amplitude = float(amplitude)

    def _rate(self, domain):
        if domain.connected_boundary:
            return self.k * np.pi / domain.opening_angle
        return self.k * np.pi / domain.width

    def trace(self, mesh, ell, lam):
        mu = self._rate(mesh.domain)
        decay = np.exp(mu * (ell - mesh.ell_max))
        return self.amplitude * decay * np.sin(self.k * np.pi * np.asarray(lam))

    def wall_values(self, domain):
        return 0.0, 0.0


class ExactTraceProfile:
    """Dirichlet data sampled from a reference stream function psi(x, y)."""

    kind = "exact"
    requires_endpoint_match = True

    def __init__(self, psi_xy, amplitude: float = 1.0):
        self.psi_xy = psi_xy
        self.amplitude = float(amplitude)

    def trace(self, mesh, ell, lam):
        lam = np.asarray(lam, dtype=float)
        x, _ = mesh.domain.chart(np.full_like(lam, ell), lam)
        return self.amplitude * self.psi_xy(x[..., 0], x[..., 1])

    def wall_values(self, domain):
        return 0.0, 0.0


@dataclass
class BoundaryConditions:
    """Dirichlet mask/values plus node classification masks."""

    mask: np.ndarray
    values: np.ndarray
    wall0: np.ndarray
    wall1: np.ndarray
    outer: np.ndarray
    inner: np.ndarray
    profile: object
    inner_mode: str

    @property
    def free(self):
        return ~self.mask


@dataclass
class DiscreteSystem:
    """Assembled residual and Jacobian under the given constraints."""

    residual: np.ndarray
    jacobian: sp.csr_matrix
    bcs: BoundaryConditions


def apply_boundary_conditions(mesh, profile, inner="dirichlet") -> BoundaryConditions:
    """Slip walls (psi = wall constants), Dirichlet far-field trace at
    ell_max, and either the same trace family or a natural (zero-flux)
    condition at ell_min."""
    if inner not in ("dirichlet", "natural"):
        raise ValueError("inner boundary mode must be 'dirichlet' or 'natural'")
    n = mesh.n_nodes
    mask = np.zeros(n, dtype=bool)
    values = np.zeros(n)
    grid_id = np.arange(n).reshape(mesh.n_ell + 1, mesh.n_lam + 1)

    w0, w1 = profile.wall_values(mesh.domain)
    wall0 = np.zeros(n, dtype=bool)
    wall1 = np.zeros(n, dtype=bool)
    wall0[grid_id[:, 0]] = True
    wall1[grid_id[:, -1]] = True
    mask |= wall0 | wall1
    values[wall0] = w0
    values[wall1] = w1

    lam_int = mesh.lam_nodes[1:-1]
    if profile.requires_endpoint_match:
        ends = profile.trace(mesh, mesh.ell_max, np.array([0.0, 1.0]))
        scale = max(1.0, abs(profile.amplitude))
        if abs(ends[0] - w0) > 1e-8 * scale or abs(ends[1] - w1) > 1e-8 * scale:
            raise ProfileError(
                "far-field trace does not meet the wall values at lam = 0, 1; "
                f"got ({ends[0]:.3e}, {ends[1]:.3e}) against ({w0:.3e}, {w1:.3e})"
            )

    outer = np.zeros(n, dtype=bool)
    outer[grid_id[-1, 1:-1]] = True
    mask |= outer
    values[grid_id[-1, 1:-1]] = profile.trace(mesh, mesh.ell_max, lam_int)

    inner_mask = np.zeros(n, dtype=bool)
    if inner == "dirichlet":
        inner_mask[grid_id[0, 1:-1]] = True
        mask |= inner_mask
        values[grid_id[0, 1:-1]] = profile.trace(mesh, mesh.ell_min, lam_int)

    return BoundaryConditions(
        mask=mask,
        values=values,
        wall0=wall0,
        wall1=wall1,
        outer=outer,
        inner=inner_mask,
        profile=profile,
        inner_mode=inner,
    )
