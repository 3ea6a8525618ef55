"""Interface-flattening change of variables and its PDE coefficients.

The moving interface z = rho(x, t) is pulled back to the fixed line z = 0 by
the map  (x, z) -> (x, z + phi(z) rho(x)),  where phi is an even C^2 cutoff
that equals 1 near z = 0 and 0 near the walls z = +-1.  Under this map the
heat operator acquires variable coefficients

    u_t - Lap' u - a u_zz + B . grad' u_z + c u_z = 0,

with (n = 2 throughout; ' marks tangential quantities)

    a = (1 + (phi rho_x)^2) / (1 + phi' rho)^2,
    B = 2 phi rho_x / (1 + phi' rho),
    c = d + e,
    d = phi rho_xx/(1+phi' rho) - (phi^2)' rho_x^2/(1+phi' rho)^2
        + phi'' rho (1 + (phi rho_x)^2)/(1+phi' rho)^3,
    e = - phi rho_t / (1 + phi' rho).

The map is invertible iff 1 + phi'(z) rho(x) > 0 everywhere; violations
raise DegenerateTransformError naming the first offending node.

The mean-curvature operator of the graph z = rho(x) is computed in
divergence form kappa = (rho_x / sqrt(1+rho_x^2))_x with spectral outer
derivative; the expanded form is kept alongside for cross-checks.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTransformError, ResolutionWarning
from .grids import d_normal, d_tangential, spectral_tail_fraction

TAIL_TOLERANCE = 1e-8  # spectral-tail energy fraction above which curvature warns


@dataclass(frozen=True)
class Cutoff:
    """Even quintic-smoothstep cutoff profile.

    phi = 1 for |z| <= alpha, phi = 0 for |z| >= 1 - alpha, and in between
    phi(z) = 1 - S((|z|-alpha)/(1-2 alpha)) with S the quintic smoothstep,
    so phi is C^2 with exactly flat plateaus.  alpha must lie in (0, 1/3):
    on the inner plateau phi' = phi'' = 0, so the jacobian is exactly 1
    and a = <rho>^2 on the interface row, while the outer plateau
    (phi = 0) makes the wall rows coefficient-free (a = 1, B = c = 0).
    """

    alpha: float = 0.25

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 / 3.0):
            raise ValueError(f"alpha must be in (0, 1/3), got {self.alpha}")

    @property
    def max_slope(self):
        # max |S'| = 15/8 over the ramp of width 1 - 2 alpha
        return 1.875 / (1.0 - 2.0 * self.alpha)

    def profiles(self, z):
        """Return (phi, phi', phi'') at the nodes z."""
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        s = np.clip((az - self.alpha) / (1.0 - 2.0 * self.alpha), 0.0, 1.0)
        phi = 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
        ds = 30.0 * s**2 * (1.0 - s) ** 2
        d2s = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s**2)
        ramp = (az > self.alpha) & (az < 1.0 - self.alpha)
        dphi = np.where(ramp, -ds * np.sign(z) / (1.0 - 2.0 * self.alpha), 0.0)
        d2phi = np.where(ramp, -d2s / (1.0 - 2.0 * self.alpha) ** 2, 0.0)
        return phi, dphi, d2phi


@dataclass(frozen=True)
class TransformCoefficients:
    """Variable coefficients of the flattened heat operator at one time level.

    All bulk arrays have shape (n_x, n_z); ``bracket`` is the interface
    area element <rho> = sqrt(1 + rho_x^2), shape (n_x,).  ``jacobian`` is
    1 + phi' rho, the volume element of the flattening map.
    """

    a: np.ndarray
    B: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    bracket: np.ndarray
    jacobian: np.ndarray


def coefficients(rho, rho_t, cutoff, grids, rho_x=None, rho_xx=None):
    """Assemble the transform coefficients for interface state (rho, rho_t).

    rho, rho_t : (n_x,) arrays.  Tangential derivatives are spectral unless
    exact ones are supplied (used by manufactured-solution tooling).
    Raises DegenerateTransformError when 1 + phi' rho <= 0 somewhere.
    """
    rho = np.asarray(rho, dtype=float)
    rho_t = np.asarray(rho_t, dtype=float)
    rx = d_tangential(rho, 1) if rho_x is None else np.asarray(rho_x, dtype=float)
    rxx = d_tangential(rho, 2) if rho_xx is None else np.asarray(rho_xx, dtype=float)
    phi, dphi, d2phi = cutoff.profiles(grids.normal.nodes)
    phi, dphi, d2phi = phi[None, :], dphi[None, :], d2phi[None, :]
    r, rt = rho[:, None], rho_t[:, None]
    rxc, rxxc = rx[:, None], rxx[:, None]

    jac = 1.0 + dphi * r
    if np.any(jac <= 0.0):
        i, j = np.argwhere(jac <= 0.0)[0]
        raise DegenerateTransformError(
            f"flattening map degenerate: 1 + phi'(z) rho(x) = {jac[i, j]:.3e} <= 0 "
            f"at node (x index {i}, z index {j})",
            node=(int(i), int(j)),
        )

    slope2 = (phi * rxc) ** 2
    a = (1.0 + slope2) / jac**2
    B = 2.0 * phi * rxc / jac
    d = (
        phi * rxxc / jac
        - 2.0 * phi * dphi * rxc**2 / jac**2
        + d2phi * r * (1.0 + slope2) / jac**3
    )
    e = -phi * rt / jac
    bracket = np.sqrt(1.0 + rx**2)
    return TransformCoefficients(a=a, B=B, c=d + e, d=d, e=e, bracket=bracket, jacobian=jac)


def curvature(rho, check_resolution=True):
    """Mean curvature of the graph z = rho(x), divergence form, spectral.

    kappa = d/dx ( rho_x / sqrt(1 + rho_x^2) ).
    """
    rho = np.asarray(rho, dtype=float)
    if check_resolution:
        tail = spectral_tail_fraction(rho)
        if tail >= TAIL_TOLERANCE:
            warnings.warn(
                f"curvature input under-resolved: top-third spectral energy "
                f"fraction {tail:.2e} >= {TAIL_TOLERANCE:.0e}",
                ResolutionWarning,
                stacklevel=2,
            )
    rx = d_tangential(rho, 1)
    return d_tangential(rx / np.sqrt(1.0 + rx**2), 1)


def curvature_expanded(rho):
    """Equivalent expanded curvature rho_xx/<rho> - rho_x^2 rho_xx/<rho>^3.

    Agrees with ``curvature`` up to aliasing; kept for the agreement test.
    """
    rho = np.asarray(rho, dtype=float)
    rx = d_tangential(rho, 1)
    rxx = d_tangential(rho, 2)
    br = np.sqrt(1.0 + rx**2)
    return rxx / br - rx**2 * rxx / br**3


def jump_normal_derivative(u_values, grids):
    """Jump bracket [u_z] across z = 0: (one-sided from below) - (from above)."""
    mid = grids.normal.i_mid
    above = d_normal(u_values, grids.normal, side="above")[..., mid]
    below = d_normal(u_values, grids.normal, side="below")[..., mid]
    return below - above
