"""Polytropic gas closure in stream-function (momentum-flux) variables.

Nondimensionalization: density rho = 1, sound speed c = 1, pressure
p = 1/gamma at the rest state.  The closure laws are

    p(rho)   = rho^gamma / gamma
    c(rho)   = rho^((gamma-1)/2)
    pi(rho)  = rho^(gamma-1) / (gamma-1)      (enthalpy per mass)

With momentum m = rho*v and momentum flux q = |m|^2/2, the Bernoulli
relation  q/rho^2 + pi(rho) = pi(1)  has a unique subsonic root
rho(q) on [rho_sonic, 1]; the specific volume h(q) = 1/rho(q) is the
coefficient of the quasilinear stream-function equation
div(h(|grad psi|^2/2) grad psi) = 0.

Beyond a configurable subsonic threshold q_cap the coefficient is
continued by a power law h(q_cap)*(q/q_cap)^a with a chosen so the
continuation is C^1; this keeps the flux matrix h*I + h'*(m (x) m)
uniformly elliptic for all q >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GasModel"]

# the bisection bracket [rho_sonic, 1] shrinks below 1e-15 absolute, well
# under the 1e-13 relative target of the Bernoulli root solve
_BISECT_ITERS = 52
_NEWTON_ITERS = 2


def _maybe_scalar(arr, scalar: bool):
    return float(arr) if scalar else arr


@dataclass(frozen=True)
class GasModel:
    """Immutable polytropic closure; all methods are pure and vectorized.

    gamma: isentropic coefficient, must exceed 1.
    mach_cap: Mach number at which the ellipticity cutoff engages; the
        induced momentum-flux threshold is the derived field q_cap.
    """

    gamma: float
    mach_cap: float = 0.8

    limit_speed: float = field(init=False)
    critical_speed: float = field(init=False)
    rho_sonic: float = field(init=False)
    q_sonic: float = field(init=False)
    q_cap: float = field(init=False)
    cutoff_exponent: float = field(init=False)

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"isentropic coefficient must exceed 1, got {self.gamma}")
        if not 0.0 < self.mach_cap < 1.0:
            raise ValueError(f"mach_cap must lie in (0, 1), got {self.mach_cap}")
        g = self.gamma
        object.__setattr__(self, "limit_speed", np.sqrt(2.0 / (g - 1.0)))
        object.__setattr__(self, "critical_speed", np.sqrt(2.0 / (g + 1.0)))
        rho_s = (2.0 / (g + 1.0)) ** (1.0 / (g - 1.0))
        object.__setattr__(self, "rho_sonic", rho_s)
        # q at the sonic state: rho_s^2 * critical_speed^2 / 2
        object.__setattr__(self, "q_sonic", rho_s * rho_s / (g + 1.0))
        # cap speed solves Mach(s) = mach_cap:  s^2 = M^2 / (1 + (g-1)/2 M^2)
        m2 = self.mach_cap**2
        s2 = m2 / (1.0 + 0.5 * (g - 1.0) * m2)
        rho_cap = (1.0 - 0.5 * (g - 1.0) * s2) ** (1.0 / (g - 1.0))
        q_cap = 0.5 * (rho_cap * np.sqrt(s2)) ** 2
        object.__setattr__(self, "q_cap", float(q_cap))
        h_cap = 1.0 / self._rho_of_q(np.asarray(q_cap))
        hp_cap = self._volume_deriv_from_rho(np.asarray(q_cap), 1.0 / h_cap)
        object.__setattr__(self, "cutoff_exponent", float(q_cap * hp_cap / h_cap))
        object.__setattr__(self, "_h_at_cap", float(h_cap))

    # -- pressure-law closures ------------------------------------------

    def enthalpy(self, rho):
        """pi(rho) = rho^(gamma-1)/(gamma-1), normalized to 0 at vacuum."""
        return np.asarray(rho, dtype=float) ** (self.gamma - 1.0) / (self.gamma - 1.0)

    def state_from_density(self, rho):
        """Return (pressure, sound speed, enthalpy) at the given density."""
        r, scalar = np.asarray(rho, dtype=float), np.ndim(rho) == 0
        if np.any(r < 0):
            raise ValueError("density must be nonnegative")
        p = r**self.gamma / self.gamma
        c = r ** (0.5 * (self.gamma - 1.0))
        return (
            _maybe_scalar(p, scalar),
            _maybe_scalar(c, scalar),
            _maybe_scalar(self.enthalpy(r), scalar),
        )

    def density_from_speed(self, speed):
        """Bernoulli density rho = (1 - (gamma-1)/2 s^2)^(1/(gamma-1)).

        Undefined above the limit speed sqrt(2/(gamma-1)).
        """
        s, scalar = np.asarray(speed, dtype=float), np.ndim(speed) == 0
        if np.any(s < 0):
            raise ValueError("speed must be nonnegative")
        base = 1.0 - 0.5 * (self.gamma - 1.0) * s * s
        if np.any(base < -1e-12):
            raise ValueError(
                f"speed exceeds the limit speed {self.limit_speed:.6g}; "
                "density is undefined there"
            )
        rho = np.clip(base, 0.0, None) ** (1.0 / (self.gamma - 1.0))
        return _maybe_scalar(rho, scalar)

    def characteristic_speeds(self):
        """(limit speed, critical speed) = (sqrt(2/(g-1)), sqrt(2/(g+1)))."""
        return self.limit_speed, self.critical_speed

    def sonic_momentum_flux(self) -> float:
        """Upper end q_sonic of the subsonic branch of the Bernoulli inversion."""
        return self.q_sonic

    # -- Bernoulli inversion in momentum variables ----------------------

    def flux_from_density(self, rho):
        """Forward map q(rho) = rho^2 (pi(1) - pi(rho)) on the subsonic branch."""
        r = np.asarray(rho, dtype=float)
        return r * r * (self.enthalpy(1.0) - self.enthalpy(r))

    def _bernoulli_residual(self, rho, q):
        return q / (rho * rho) + self.enthalpy(rho) - self.enthalpy(1.0)

    def _rho_of_q(self, q):
        """Root of q/rho^2 + pi(rho) = pi(1) on [rho_sonic, 1].

        Bisection (guaranteed bracket, monotone residual on the subsonic
        branch) followed by Newton polish steps confined to the final
        bracket; the slope degenerates at the sonic endpoint, so unclipped
        Newton may escape there.
        """
        lo = np.full_like(q, self.rho_sonic)
        hi = np.ones_like(q)
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            pos = self._bernoulli_residual(mid, q) > 0.0
            hi = np.where(pos, mid, hi)
            lo = np.where(pos, lo, mid)
        rho = 0.5 * (lo + hi)
        g = self.gamma
        for _ in range(_NEWTON_ITERS):
            res = self._bernoulli_residual(rho, q)
            slope = -2.0 * q / rho**3 + rho ** (g - 2.0)
            safe = slope > 0.0
            step = np.where(safe, res, 0.0) / np.where(safe, slope, 1.0)
            rho = np.clip(rho - step, lo, hi)
        return rho

    def specific_volume(self, q):
        """h(q) = 1/rho(q); strictly increasing, h(0) = 1."""
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        self._check_flux_range(qa, include_sonic=True)
        return _maybe_scalar(1.0 / self._rho_of_q(qa), scalar)

    def _volume_deriv_from_rho(self, q, rho):
        # implicit differentiation of the Bernoulli relation:
        # h'(q) = 1 / (rho * (rho^(gamma+1) - 2 q))
        return 1.0 / (rho * (rho ** (self.gamma + 1.0) - 2.0 * q))

    def specific_volume_deriv(self, q):
        """h'(q) from implicit differentiation; positive, blows up at q_sonic."""
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        self._check_flux_range(qa, include_sonic=False)
        rho = self._rho_of_q(qa)
        return _maybe_scalar(self._volume_deriv_from_rho(qa, rho), scalar)

    def _check_flux_range(self, q, include_sonic: bool):
        if np.any(q < 0):
            raise ValueError("momentum flux q must be nonnegative")
        hi = self.q_sonic * (1.0 + 1e-12)
        if include_sonic:
            if np.any(q > hi):
                raise ValueError(f"momentum flux q exceeds q_sonic = {self.q_sonic:.9g}")
        else:
            if np.any(q >= hi) or np.any(q / self.q_sonic > 1.0 - 1e-14):
                raise ValueError(
                    f"derivative undefined at or beyond q_sonic = {self.q_sonic:.9g}"
                )

    # -- ellipticity-preserving cutoff ----------------------------------

    def capped_specific_volume(self, q):
        """C^1 continuation of h: equal to h below q_cap, power law above.

        Total function of q >= 0; below the cap it evaluates through the
        exact same root solve as specific_volume, so the two coincide
        bit-for-bit there.
        """
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        if np.any(qa < 0):
            raise ValueError("momentum flux q must be nonnegative")
        below = qa <= self.q_cap
        out = np.empty_like(qa)
        if np.any(below):
            out[below] = 1.0 / self._rho_of_q(qa[below])
        if not np.all(below):
            tail = qa[~below]
            out[~below] = self._h_at_cap * (tail / self.q_cap) ** self.cutoff_exponent
        return _maybe_scalar(out, scalar)

    def capped_volume_pair(self, q):
        """(h~, h~') evaluated together; the workhorse of residual assembly."""
        qa = np.asarray(q, dtype=float)
        if np.any(qa < 0):
            raise ValueError("momentum flux q must be nonnegative")
        below = qa <= self.q_cap
        h = np.empty_like(qa)
        hp = np.empty_like(qa)
        if np.any(below):
            rho = self._rho_of_q(qa[below])
            h[below] = 1.0 / rho
            hp[below] = self._volume_deriv_from_rho(qa[below], rho)
        if not np.all(below):
            tail = qa[~below]
            a = self.cutoff_exponent
            htail = self._h_at_cap * (tail / self.q_cap) ** a
            h[~below] = htail
            hp[~below] = a * htail / tail
        return h, hp

    def capped_specific_volume_deriv(self, q):
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        _, hp = self.capped_volume_pair(qa)
        return _maybe_scalar(hp, scalar)

    def ellipticity_eigenvalues(self, q):
        """Eigenvalues (tangential, streamwise) of h~ I + h~' m (x) m.

        Tangential eigenvalue h~(q), streamwise h~(q) + 2 q h~'(q); both
        strictly positive for every q >= 0 by the cutoff construction.
        """
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        h, hp = self.capped_volume_pair(qa)
        return _maybe_scalar(h, scalar), _maybe_scalar(h + 2.0 * qa * hp, scalar)

    # -- derived state along the subsonic branch ------------------------

    def mach_from_flux(self, q):
        """Mach number of the subsonic state with momentum flux q."""
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        self._check_flux_range(qa, include_sonic=True)
        rho = self._rho_of_q(qa)
        speed = np.sqrt(2.0 * qa) / rho
        c = rho ** (0.5 * (self.gamma - 1.0))
        return _maybe_scalar(speed / c, scalar)

    def energy_density(self, q):
        """Antiderivative H~ of the capped coefficient, H~(0) = 0.

        Below the cap the closed form follows from substituting
        rho(q) in the forward map; above it the power-law tail
        integrates exactly.
        """
        qa, scalar = np.asarray(q, dtype=float), np.ndim(q) == 0
        if np.any(qa < 0):
            raise ValueError("momentum flux q must be nonnegative")
        below = qa <= self.q_cap
        out = np.empty_like(qa)
        if np.any(below):
            out[below] = self._energy_below(qa[below])
        if not np.all(below):
            tail = qa[~below]
            a = self.cutoff_exponent
            base = self._energy_below(np.asarray([self.q_cap]))[0]
            out[~below] = base + self._h_at_cap * self.q_cap * (
                (tail / self.q_cap) ** (1.0 + a) - 1.0
            ) / (1.0 + a)
        return _maybe_scalar(out, scalar)

    def _energy_below(self, q):
        g = self.gamma
        rho = self._rho_of_q(q)
        return 2.0 * (rho - 1.0) / (g - 1.0) - (rho**g - 1.0) * (g + 1.0) / (
            g * (g - 1.0)
        )
