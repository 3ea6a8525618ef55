"""Grids and discrete calculus on the periodic strip T^1 x [-1, 1].

The tangential direction is a uniform periodic grid with period fixed to
2*pi (other interface lengths are handled by rescaling the inputs, see the
README).  The normal direction is a uniform grid on [-1, 1] with an odd
number of nodes so that z = 0 (the flattened interface) is a grid line.

Tangential derivatives are pseudo-spectral: FFT, multiply by (ik)^order,
inverse FFT, with the Nyquist mode zeroed for odd orders.  Normal
derivatives are second-order finite differences; at the interface row the
stencil is one-sided ("above" uses z >= 0 data only, "below" uses z <= 0),
because bulk fields are allowed a kink across z = 0.  Quadrature is the
rectangle rule tangentially and the trapezoid rule per half-strip normally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NonFiniteFieldError

PERIOD = 2.0 * np.pi


def _require_finite(values, what):
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(np.asarray(values)))
        raise NonFiniteFieldError(f"{what}: non-finite entry at index {tuple(bad[0])}")


@dataclass(frozen=True)
class TangentialGrid:
    """Uniform periodic grid on [0, 2*pi)."""

    n_x: int

    def __post_init__(self):
        if self.n_x < 8 or self.n_x % 2 != 0:
            raise ValueError(f"n_x must be even and >= 8, got {self.n_x}")

    @property
    def spacing(self):
        return PERIOD / self.n_x

    @cached_property
    def nodes(self):
        return PERIOD * np.arange(self.n_x) / self.n_x

    @cached_property
    def wavenumbers(self):
        # rfft layout: k = 0 .. n_x/2
        return np.arange(self.n_x // 2 + 1)


@dataclass(frozen=True)
class NormalGrid:
    """Uniform grid on [-1, 1] with z = 0 as the middle node."""

    n_z: int

    def __post_init__(self):
        if self.n_z < 5 or self.n_z % 2 == 0:
            raise ValueError(f"n_z must be odd and >= 5, got {self.n_z}")

    @property
    def dz(self):
        return 2.0 / (self.n_z - 1)

    @cached_property
    def nodes(self):
        return np.linspace(-1.0, 1.0, self.n_z)

    @property
    def i_mid(self):
        """Index of the z = 0 node."""
        return (self.n_z - 1) // 2


@dataclass(frozen=True)
class Grids:
    """Bundle of the two grids; bulk arrays are indexed (x node, z node)."""

    tangential: TangentialGrid
    normal: NormalGrid

    @property
    def shape(self):
        return (self.tangential.n_x, self.normal.n_z)

    def meshes(self):
        x = self.tangential.nodes[:, None]
        z = self.normal.nodes[None, :]
        return x, z


@dataclass(frozen=True)
class InterfaceField:
    """Real scalar field on the tangential grid."""

    grid: TangentialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_x,):
            raise ValueError(f"interface field shape {v.shape} != ({self.grid.n_x},)")
        _require_finite(v, "InterfaceField")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_x))

    def mean(self):
        return float(self.values.mean())


@dataclass(frozen=True)
class BulkField:
    """Real scalar field on the strip, shape (n_x, n_z).

    The z = 0 row stores the (shared) trace; one-sidedness only enters
    through derivative operations, never through the values themselves.
    """

    grids: Grids
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grids.shape:
            raise ValueError(f"bulk field shape {v.shape} != {self.grids.shape}")
        _require_finite(v, "BulkField")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grids, fn):
        x, z = grids.meshes()
        return cls(grids, np.asarray(fn(x, z), dtype=float))

    @classmethod
    def zeros(cls, grids):
        return cls(grids, np.zeros(grids.shape))


def d_tangential(values, order=1):
    """Spectral tangential derivative along axis 0.

    Parameters
    ----------
    values : ndarray, shape (n_x,) or (n_x, n_z)
    order : int >= 1
        Derivative order; the Nyquist mode is zeroed for odd orders (it has
        no well-defined odd derivative on an even real grid).
    """
    v = np.asarray(values, dtype=float)
    _require_finite(v, "d_tangential input")
    if order < 1:
        raise ValueError("order must be a positive integer")
    n = v.shape[0]
    vh = np.fft.rfft(v, axis=0)
    mult = (1j * np.arange(n // 2 + 1)) ** order
    if order % 2 == 1:
        mult[-1] = 0.0
    shape = (-1,) + (1,) * (v.ndim - 1)
    return np.fft.irfft(vh * mult.reshape(shape), n=n, axis=0)


def _one_sided_first(values, i, h, forward):
    # second-order 3-point stencil
    if forward:
        return (-3.0 * values[..., i] + 4.0 * values[..., i + 1] - values[..., i + 2]) / (2.0 * h)
    return (3.0 * values[..., i] - 4.0 * values[..., i - 1] + values[..., i - 2]) / (2.0 * h)


def d_normal(values, grid, side="above"):
    """First normal derivative along the last axis, second order.

    ``side`` selects the stencil at the interface row z = 0: "above" uses
    z >= 0 data, "below" uses z <= 0, "centered" uses the ordinary centered
    stencil (first order across a kink, second order for smooth fields).
    Walls always use one-sided 3-point stencils.
    """
    v = np.asarray(values, dtype=float)
    _require_finite(v, "d_normal input")
    n_z, h, mid = grid.n_z, grid.dz, grid.i_mid
    if v.shape[-1] != n_z:
        raise ValueError(f"last axis {v.shape[-1]} != n_z {n_z}")
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * h)
    out[..., 0] = _one_sided_first(v, 0, h, forward=True)
    out[..., -1] = _one_sided_first(v, n_z - 1, h, forward=False)
    if side == "above":
        out[..., mid] = _one_sided_first(v, mid, h, forward=True)
    elif side == "below":
        out[..., mid] = _one_sided_first(v, mid, h, forward=False)
    elif side != "centered":
        raise ValueError(f"side must be above/below/centered, got {side!r}")
    return out


def d_normal2(values, grid, side="above"):
    """Second normal derivative along the last axis.

    Interior rows use the standard 3-point stencil.  The interface row and
    the walls use one-sided 4-point stencils (second order); this needs at
    least four nodes per half-strip, i.e. n_z >= 9.
    """
    v = np.asarray(values, dtype=float)
    _require_finite(v, "d_normal2 input")
    n_z, h, mid = grid.n_z, grid.dz, grid.i_mid
    if n_z < 9:
        raise ValueError("d_normal2 needs n_z >= 9 (4-point one-sided stencils)")
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h**2

    def fwd(i):
        return (2.0 * v[..., i] - 5.0 * v[..., i + 1] + 4.0 * v[..., i + 2] - v[..., i + 3]) / h**2

    def bwd(i):
        return (2.0 * v[..., i] - 5.0 * v[..., i - 1] + 4.0 * v[..., i - 2] - v[..., i - 3]) / h**2

    out[..., 0] = fwd(0)
    out[..., -1] = bwd(n_z - 1)
    if side == "above":
        out[..., mid] = fwd(mid)
    elif side == "below":
        out[..., mid] = bwd(mid)
    elif side != "centered":
        raise ValueError(f"side must be above/below/centered, got {side!r}")
    return out


def integrate_interface(values, grid):
    """Rectangle rule on the torus (spectrally exact for resolved fields)."""
    v = np.asarray(values, dtype=float)
    _require_finite(v, "integrate_interface input")
    return float(v.sum() * grid.spacing)


def integrate_bulk(values, grids):
    """Rectangle (x) times trapezoid (z) rule for single-valued integrands."""
    v = np.asarray(values, dtype=float)
    _require_finite(v, "integrate_bulk input")
    per_x = np.trapezoid(v, dx=grids.normal.dz, axis=-1)
    return float(per_x.sum() * grids.tangential.spacing)


def integrate_bulk_sided(above, below, grids):
    """Two-phase bulk quadrature for integrands double-valued at z = 0.

    ``above`` supplies the integrand on the upper half-strip (rows z >= 0),
    ``below`` on the lower half (rows z <= 0); both are full (n_x, n_z)
    arrays and only their z = 0 rows may differ.
    """
    a = np.asarray(above, dtype=float)
    b = np.asarray(below, dtype=float)
    _require_finite(a, "integrate_bulk_sided above")
    _require_finite(b, "integrate_bulk_sided below")
    mid = grids.normal.i_mid
    dz = grids.normal.dz
    upper = np.trapezoid(a[..., mid:], dx=dz, axis=-1)
    lower = np.trapezoid(b[..., : mid + 1], dx=dz, axis=-1)
    return float((upper + lower).sum() * grids.tangential.spacing)


def l2_interface(values, grid):
    return float(np.sqrt(integrate_interface(np.asarray(values) ** 2, grid)))


def spectral_tail_fraction(values):
    """Fraction of (mean-free) spectral energy carried by the top third of modes."""
    v = np.asarray(values, dtype=float)
    vh = np.fft.rfft(v, axis=0)
    power = np.abs(vh) ** 2
    power[0] = 0.0  # the mean carries no derivative information
    total = power.sum()
    if total == 0.0:
        return 0.0
    k_cut = v.shape[0] // 3
    return float(power[k_cut:].sum() / total)


def band_limited(rng, grid, amplitude, k_max=None, zero_mean=True):
    """Random smooth interface field with the top third of the spectrum empty.

    Coefficients fall off like 1/k^2 so the fields look like interfaces, not
    noise; the result is rescaled to the requested sup-norm amplitude.
    """
    n = grid.n_x
    top = n // 3 - 1  # highest mode that keeps the top third empty
    k_max = top if k_max is None else min(k_max, top)
    coeffs = np.zeros(n // 2 + 1, dtype=complex)
    ks = np.arange(1, k_max + 1)
    coeffs[1 : k_max + 1] = (rng.standard_normal(k_max) + 1j * rng.standard_normal(k_max)) / ks**2
    v = np.fft.irfft(coeffs, n=n)
    if not zero_mean:
        v = v + rng.standard_normal() / n
    peak = np.abs(v).max()
    if peak > 0:
        v = v * (amplitude / peak)
    return v
