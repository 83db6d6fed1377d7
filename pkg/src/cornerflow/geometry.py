"""Corner domains, log-polar strip coordinates, and gradient-map utilities.

A corner domain is the set  r > r_min, theta_lo(r) < theta < theta_hi(r)
in polar coordinates, with wall angle functions converging at infinity at
a rate |d^k theta / dr^k| <= C r^(-k-eps).  Computations happen on the
straightened semi-infinite strip Lambda = (ell, lam), where ell = log r
and lam in [0, 1] interpolates between the walls:

    theta(ell, lam) = lam * theta_hi(e^ell) + (1 - lam) * theta_lo(e^ell)
    x(ell, lam)     = e^ell (cos theta, sin theta)

A straight channel of constant width is provided as the analogue of the
excluded opening angle pi (parallel walls); its chart is the identity in
the first coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CornerDomain",
    "ChannelDomain",
    "construct_domain",
    "strip_map",
    "inverse_strip_map",
    "verify_decay",
    "quasiconformality_ratio",
    "operator_norm_2x2",
]

_MIRROR = np.array([[1.0, 0.0], [0.0, -1.0]])


# ---------------------------------------------------------------------------
# wall angle functions with analytic derivatives to order 3


class ConstantWall:
    """theta(r) = const; all radial derivatives vanish."""

    def __init__(self, angle):
        self.angle = float(angle)
        self.limit = float(angle)

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        z = np.zeros_like(r)
        return np.full_like(r, self.angle), z, z.copy(), z.copy()


class PowerCornerWall:
    """theta(r) = sign * (3/2) arccos(r^(-2/3)) on r > 1.

    Inverts the boundary curve r^(2/3) cos(2 theta / 3) = 1 of the smooth
    protruding corner with opening 3*pi/2; theta(inf) = sign * 3*pi/4 is
    approached like r^(-2/3).
    """

    def __init__(self, sign):
        self.sign = float(sign)
        self.limit = self.sign * 0.75 * np.pi

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        u = r ** (-2.0 / 3.0)
        w = 1.0 - u * u  # vanishes at the corner tip r = 1
        theta = self.sign * 1.5 * np.arccos(u)
        d1 = r ** (-5.0 / 3.0) * w**-0.5
        d2 = -(5.0 / 3.0) * r ** (-8.0 / 3.0) * w**-0.5 - (2.0 / 3.0) * r**-4.0 * w**-1.5
        d3 = (
            (40.0 / 9.0) * r ** (-11.0 / 3.0) * w**-0.5
            + (34.0 / 9.0) * r**-5.0 * w**-1.5
            + (4.0 / 3.0) * r ** (-19.0 / 3.0) * w**-2.5
        )
        return theta, self.sign * d1, self.sign * d2, self.sign * d3


class SigmoidWall:
    """Constant limit angle plus a logistic bend decaying like e^(-ell/scale).

    theta(ell) = limit + bend / (1 + exp((ell - center)/scale)); the decay
    exponent of the induced corner domain is eps = 1/scale.
    """

    def __init__(self, limit, bend, center, scale):
        if scale <= 0:
            raise ValueError("blend scale must be positive")
        self.limit = float(limit)
        self.bend = float(bend)
        self.center = float(center)
        self.scale = float(scale)

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        ell = np.log(r)
        x = (ell - self.center) / self.scale
        s = 1.0 / (1.0 + np.exp(x))
        f1 = -s * (1.0 - s) * self.bend / self.scale
        f2 = s * (1.0 - s) * (1.0 - 2.0 * s) * self.bend / self.scale**2
        f3 = -s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s) * self.bend / self.scale**3
        theta = self.limit + self.bend * s
        # chain rule from d/d ell to d/dr for ell = log r
        d1 = f1 / r
        d2 = (f2 - f1) / r**2
        d3 = (f3 - 3.0 * f2 + 2.0 * f1) / r**3
        return theta, d1, d2, d3


class CallableWall:
    """Wall from user-supplied callables (theta, d1, d2, d3) of r."""

    def __init__(self, funcs, limit):
        self.funcs = funcs
        self.limit = float(limit)

    def derivs(self, r):
        r = np.asarray(r, dtype=float)
        return tuple(np.asarray(f(r), dtype=float) for f in self.funcs)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class CornerDomain:
    """Infinite corner r > r_min between two wall angle graphs."""

    wall_lo: object
    wall_hi: object
    r_min: float
    eps: float
    c_decay: float
    kind: str = "custom"
    params: tuple = ()

    connected_boundary = True  # both walls carry the same stream constant

    @property
    def opening_angle(self) -> float:
        return self.wall_hi.limit - self.wall_lo.limit

    @property
    def ell_start(self) -> float:
        return math.log(self.r_min)

    def wall_angles(self, r):
        """(theta_lo, theta_hi) at radius r."""
        return self.wall_lo.derivs(r)[0], self.wall_hi.derivs(r)[0]

    def chart(self, ell, lam):
        """Map strip coordinates to physical points; return (x, J).

        J = dx/d(ell, lam) is the composition of the straightening map
        with the conformal log-polar map; det J = e^(2 ell) (th_hi - th_lo).
        """
        ell = np.asarray(ell, dtype=float)
        lam = np.asarray(lam, dtype=float)
        ell, lam = np.broadcast_arrays(ell, lam)
        if np.any(ell < self.ell_start - 1e-12):
            raise ValueError(
                f"strip point below the domain start ell = {self.ell_start:.6g}"
            )
        r = np.exp(ell)
        th_lo, d1_lo, _, _ = self.wall_lo.derivs(r)
        th_hi, d1_hi, _, _ = self.wall_hi.derivs(r)
        theta = lam * th_hi + (1.0 - lam) * th_lo
        theta_ell = r * (lam * d1_hi + (1.0 - lam) * d1_lo)
        theta_lam = th_hi - th_lo
        ct, st = np.cos(theta), np.sin(theta)
        x = np.stack([r * ct, r * st], axis=-1)
        J = np.empty(ell.shape + (2, 2))
        J[..., 0, 0] = r * (ct - st * theta_ell)
        J[..., 1, 0] = r * (st + ct * theta_ell)
        J[..., 0, 1] = -r * st * theta_lam
        J[..., 1, 1] = r * ct * theta_lam
        return x, J

    def strip_coords(self, x):
        """Inverse chart: physical points to (ell, lam)."""
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        theta = np.arctan2(x[..., 1], x[..., 0])
        th_lo, th_hi = self.wall_angles(r)
        return np.log(r), (theta - th_lo) / (th_hi - th_lo)

    def wall_tangents(self, ell):
        """Unit-scale tangents s^0, s^1 to the walls as functions of ell.

        s^i = (cos th_i, sin th_i) + (d th_i/d ell) (-sin th_i, cos th_i);
        the correction vanishes at the rate of the wall decay.
        """
        ell = np.asarray(ell, dtype=float)
        r = np.exp(ell)
        out = []
        for wall in (self.wall_lo, self.wall_hi):
            th, d1, _, _ = wall.derivs(r)
            dth_ell = r * d1
            s = np.stack(
                [np.cos(th) - dth_ell * np.sin(th), np.sin(th) + dth_ell * np.cos(th)],
                axis=-1,
            )
            out.append(s)
        return out[0], out[1]

    def boundary_frame(self, ell):
        """(s0, s1, B, detB) with B rows (M s^0)^T, (M s^1)^T, M = diag(1,-1).

        Applied to the reflected gradient f = M grad(psi), the frame rows
        give f*_i = s^i . grad(psi), the quantities vanishing on the walls.
        detB tends to -sin(opening_angle) at infinity.
        """
        s0, s1 = self.wall_tangents(ell)
        B = np.stack([s0 @ _MIRROR, s1 @ _MIRROR], axis=-2)
        detB = B[..., 0, 0] * B[..., 1, 1] - B[..., 0, 1] * B[..., 1, 0]
        if np.any(np.abs(detB) < 1e-12):
            raise ValueError(
                "wall frame is numerically singular: opening angle too close "
                "to 0, pi or 2*pi"
            )
        return s0, s1, B, detB

    def describe(self) -> dict:
        return {"kind": self.kind, **dict(self.params)}


@dataclass(frozen=True)
class ChannelDomain:
    """Straight channel 0 <= y <= width: the parallel-wall (opening pi) case.

    The walls may carry distinct stream-function constants, so a uniform
    flow along the channel is admissible; the wall frame is singular by
    construction (the tangents are parallel).
    """

    width: float
    kind: str = "channel"

    connected_boundary = False

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("channel width must be positive")

    @property
    def opening_angle(self) -> float:
        return np.pi  # analogue only; there is no corner

    @property
    def ell_start(self) -> float:
        return -np.inf

    def chart(self, ell, lam):
        ell = np.asarray(ell, dtype=float)
        lam = np.asarray(lam, dtype=float)
        ell, lam = np.broadcast_arrays(ell, lam)
        x = np.stack([ell, self.width * lam], axis=-1)
        J = np.zeros(ell.shape + (2, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = self.width
        return x, J

    def strip_coords(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., 0], x[..., 1] / self.width

    def wall_tangents(self, ell):
        ell = np.asarray(ell, dtype=float)
        s = np.zeros(ell.shape + (2,))
        s[..., 0] = 1.0
        return s, s.copy()

    def boundary_frame(self, ell):
        raise ValueError(
            "wall frame is singular for parallel walls (opening angle pi); "
            "the wall-adapted gradient map is not defined here"
        )

    def describe(self) -> dict:
        return {"kind": self.kind, "width": self.width}


# ---------------------------------------------------------------------------
# constructors

_EXCLUDED_ANGLES = (0.0, np.pi, 2.0 * np.pi)


def _check_opening(theta: float):
    if not 0.0 < theta < 2.0 * np.pi:
        raise ValueError(f"opening angle must lie in (0, 2*pi), got {theta}")
    for bad in _EXCLUDED_ANGLES:
        if abs(theta - bad) < 1e-9:
            raise ValueError(
                "opening angle may not equal 0, pi or 2*pi; no corner-domain "
                "far-field statement holds at those angles"
            )


def construct_domain(kind: str, **params):
    """Build one of the built-in domain families.

    wedge(opening, r_min=1, theta_lo=None): straight walls.
    smoothed_wedge(opening, r_min=1, blend_scale, bend=0.25, blend_center=None):
        walls bent near the corner by a logistic profile; decay exponent
        eps = 1/blend_scale.
    exact_corner(): the smooth protruding corner bounded by
        r^(2/3) cos(2 theta/3) = 1, opening 3*pi/2, with a closed-form
        incompressible flow attached to it (see cornerflow.fields).
    channel(width): parallel-wall analogue of the excluded opening pi.
    """
    if kind == "wedge":
        opening = float(params["opening"])
        r_min = float(params.get("r_min", 1.0))
        _check_opening(opening)
        if r_min <= 0:
            raise ValueError("r_min must be positive")
        lo = params.get("theta_lo")
        theta_lo = -0.5 * opening if lo is None else float(lo)
        return CornerDomain(
            wall_lo=ConstantWall(theta_lo),
            wall_hi=ConstantWall(theta_lo + opening),
            r_min=r_min,
            eps=1.0,
            c_decay=0.0,
            kind="wedge",
            params=(("opening", opening), ("r_min", r_min), ("theta_lo", theta_lo)),
        )
    if kind == "smoothed_wedge":
        opening = float(params["opening"])
        r_min = float(params.get("r_min", 1.0))
        scale = float(params["blend_scale"])
        bend = float(params.get("bend", 0.25))
        _check_opening(opening)
        if scale <= 0:
            raise ValueError("blend_scale must be positive")
        center = float(params.get("blend_center", math.log(r_min) + 1.0))
        return CornerDomain(
            wall_lo=SigmoidWall(-0.5 * opening, bend, center, scale),
            wall_hi=SigmoidWall(0.5 * opening, -bend, center, scale),
            r_min=r_min,
            eps=1.0 / scale,
            c_decay=4.0 * abs(bend) * (1.0 + 1.0 / scale) ** 3,
            kind="smoothed_wedge",
            params=(
                ("opening", opening),
                ("r_min", r_min),
                ("blend_scale", scale),
                ("bend", bend),
                ("blend_center", center),
            ),
        )
    if kind == "exact_corner":
        return CornerDomain(
            wall_lo=PowerCornerWall(-1.0),
            wall_hi=PowerCornerWall(+1.0),
            r_min=1.0,
            eps=2.0 / 3.0,
            c_decay=12.0,  # valid away from the tip, r >~ 1.1
            kind="exact_corner",
            params=(),
        )
    if kind == "channel":
        return ChannelDomain(width=float(params.get("width", 1.0)))
    raise ValueError(f"unknown domain kind '{kind}'")


def strip_map(domain, ell, lam):
    """Physical point and chart Jacobian at strip coordinates (ell, lam)."""
    return domain.chart(ell, lam)


def inverse_strip_map(domain, x):
    """Strip coordinates (ell, lam) of physical points x."""
    return domain.strip_coords(x)


# ---------------------------------------------------------------------------
# decay verification


@dataclass(frozen=True)
class DecayReport:
    passed: bool
    max_ratio: float
    worst_r: float
    worst_order: int


def verify_decay(domain, eps: float, c_decay: float, r_samples) -> DecayReport:
    """Check |d^k theta_i/dr^k| <= C r^(-k-eps) for k = 1, 2, 3 on a grid.

    Report-only: returns the largest ratio |d^k theta| r^(k+eps) / C over
    both walls and all orders.  With C = 0 the check passes only when
    every sampled derivative vanishes (straight walls).
    """
    r = np.asarray(r_samples, dtype=float)
    if np.any(r <= domain.r_min):
        raise ValueError("samples must lie strictly beyond r_min")
    max_ratio = 0.0
    worst_r, worst_k = float(r[0]), 1
    for wall in (domain.wall_lo, domain.wall_hi):
        _, d1, d2, d3 = wall.derivs(r)
        for k, dk in ((1, d1), (2, d2), (3, d3)):
            bound = r ** (-k - eps)
            if c_decay > 0:
                ratio = np.abs(dk) / (c_decay * bound)
            else:
                ratio = np.where(np.abs(dk) == 0.0, 0.0, np.inf)
            i = int(np.argmax(ratio))
            if ratio[i] > max_ratio:
                max_ratio, worst_r, worst_k = float(ratio[i]), float(r[i]), k
    return DecayReport(
        passed=bool(max_ratio <= 1.0),
        max_ratio=max_ratio,
        worst_r=worst_r,
        worst_order=worst_k,
    )


# ---------------------------------------------------------------------------
# quasiconformality


def operator_norm_2x2(F):
    """Euclidean operator norm of 2x2 matrices, via closed-form singular values."""
    F = np.asarray(F, dtype=float)
    fro2 = np.sum(F * F, axis=(-2, -1))
    det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    gap = np.sqrt(np.clip(fro2 * fro2 - 4.0 * det * det, 0.0, None))
    return np.sqrt(0.5 * (fro2 + gap))


@dataclass(frozen=True)
class QuasiconformalityReport:
    ratios: np.ndarray  # |F|^2 / det F where the determinant is usable
    valid: np.ndarray  # mask of points entering the maximum
    empirical_k: float
    flagged_fraction: float


def quasiconformality_ratio(F, det_tol_factor: float = 1e-12) -> QuasiconformalityReport:
    """Per-point dilatation |F|^2 / det F and the empirical constant K.

    Points whose determinant is below det_tol_factor * |F|^2 (including
    orientation-reversing ones) are flagged and excluded from the maximum
    rather than divided by; |.| is the Euclidean operator norm.
    """
    F = np.asarray(F, dtype=float)
    op2 = operator_norm_2x2(F) ** 2
    det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    valid = det > det_tol_factor * np.maximum(op2, 1e-300)
    ratios = np.full(det.shape, np.inf)
    np.divide(op2, det, out=ratios, where=valid)
    finite = np.isfinite(ratios) & valid
    empirical_k = float(np.max(ratios[finite])) if np.any(finite) else np.nan
    flagged = 1.0 - float(np.count_nonzero(valid)) / max(det.size, 1)
    return QuasiconformalityReport(
        ratios=ratios, valid=valid, empirical_k=empirical_k, flagged_fraction=flagged
    )
