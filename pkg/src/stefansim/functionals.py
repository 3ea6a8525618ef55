"""Energy and dissipation functionals, weighted norms, and run diagnostics.

Everything here evaluates *states* (bulk temperature u, interface height
rho, and their accepted-step history); nothing here advances time.  The
functionals are instantiated at psi = rho (the weights <psi>, a_psi are
built from the newest interface in the stack) and summed over the mixed
derivative family  { d_x^mu d_t^s : mu + 2s <= 2 k_diag }.

Time derivatives are backward difference quotients over the history
buffer; the s-th quotient needs s+1 uniformly spaced entries.  Terms whose
quotients are not yet available are *skipped and flagged*, never silently
zeroed.

The interface form

    I_psi(W, W) = int  |W|^2 <psi>^-1 - sum_k (W_k . grad psi)^2 <psi>^-3

(W a Hessian field; integrated reading) is strictly positive for nonzero
W: the integrand is bounded below by |W|^2 <psi>^-3 pointwise, with
equality in one tangential dimension.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grids import (
    d_normal,
    d_normal2,
    d_tangential,
    integrate_bulk,
    integrate_bulk_sided,
    integrate_interface,
)
from .transform import Cutoff, coefficients


def derivative_pairs(k_diag):
    """All (mu, s) with mu + 2s <= 2 k_diag, s-major order."""
    return [(mu, s) for s in range(k_diag + 1) for mu in range(2 * (k_diag - s) + 1)]


class DerivativeStack:
    """History window of accepted states plus cached difference quotients.

    Entries are (t, u, rho), oldest first, uniformly spaced in t.  The
    weights (a_psi, <psi>) are frozen at the newest interface.
    """

    def __init__(self, grids, cutoff, k_diag, times, us, rhos):
        if not (len(times) == len(us) == len(rhos)) or len(times) == 0:
            raise ValueError("history must be non-empty and aligned")
        steps = np.diff(times)
        if len(steps) and not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-15):
            raise ValueError("history must be uniformly spaced in time")
        self.grids = grids
        self.cutoff = cutoff
        self.k_diag = int(k_diag)
        self.times = np.asarray(times, dtype=float)
        self.us = [np.asarray(u, dtype=float) for u in us]
        self.rhos = [np.asarray(r, dtype=float) for r in rhos]
        self.dt = float(steps[0]) if len(steps) else None
        self.psi = self.rhos[-1]
        coef = coefficients(self.psi, np.zeros_like(self.psi), cutoff, grids)
        self.a_psi = coef.a
        self.bracket = coef.bracket
        self._uq = {0: self.us[-1]}
        self._rq = {0: self.rhos[-1]}

    @property
    def t(self):
        return float(self.times[-1])

    def _quotient(self, fields, s):
        if s + 1 > len(fields):
            return None
        window = np.stack(fields[-(s + 1):], axis=0)
        return np.diff(window, n=s, axis=0)[0] / self.dt**s

    def u_quotient(self, s):
        """s-th backward time quotient of u at the newest time (None if short)."""
        if s not in self._uq:
            self._uq[s] = self._quotient(self.us, s)
        return self._uq[s]

    def rho_quotient(self, s):
        if s not in self._rq:
            self._rq[s] = self._quotient(self.rhos, s)
        return self._rq[s]


@dataclass(frozen=True)
class FunctionalValue:
    """Partial sum plus the (mu, s) terms that lacked history."""

    value: float
    missing: tuple = ()

    def __float__(self):
        return self.value


def i_psi(omega, psi):
    """Weighted interface form I_psi evaluated on the Hessian of omega."""
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = omega.shape[0]
    grid_spacing = 2.0 * np.pi / n
    oxx = d_tangential(omega, 2)
    px = d_tangential(psi, 1)
    L = 1.0 / np.sqrt(1.0 + px**2)
    integrand = oxx**2 * L - (oxx * px) ** 2 * L**3
    return float(integrand.sum() * grid_spacing)


def i_psi_lower_bound(omega, psi):
    """The pointwise lower bound int |Hess omega|^2 <psi>^-3 (equality in 1-D)."""
    omega = np.asarray(omega, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = omega.shape[0]
    oxx = d_tangential(omega, 2)
    px = d_tangential(psi, 1)
    L = 1.0 / np.sqrt(1.0 + px**2)
    return float((oxx**2 * L**3).sum() * 2.0 * np.pi / n)


def _bulk_h1_weighted(stack, w):
    """int w^2 + |w_x|^2 + a_psi w_n^2 (one-sided at the interface row)."""
    g = stack.grids
    wx = d_tangential(w, 1)
    wn_up = d_normal(w, g.normal, side="above")
    wn_lo = d_normal(w, g.normal, side="below")
    val = integrate_bulk(w**2 + wx**2, g)
    val += integrate_bulk_sided(stack.a_psi * wn_up**2, stack.a_psi * wn_lo**2, g)
    return val


def energy_eps(stack, eps):
    """Regularized energy E_eps; eps = 0 gives the base energy E exactly."""
    g = stack.grids
    tg = g.tangential
    L = 1.0 / stack.bracket
    total = 0.0
    missing = []
    for mu, s in derivative_pairs(stack.k_diag):
        u_s = stack.u_quotient(s)
        r_s = stack.rho_quotient(s)
        if u_s is None or r_s is None:
            missing.append((mu, s))
            continue
        w = d_tangential(u_s, mu) if mu else u_s
        v = d_tangential(r_s, mu) if mu else r_s
        total += _bulk_h1_weighted(stack, w)
        total += integrate_interface(d_tangential(v, 1) ** 2 * L, tg)
        total += i_psi(v, stack.psi)
        if eps != 0.0:
            total += eps * integrate_interface(d_tangential(v, 3) ** 2 * L, tg)
            total += eps * i_psi(d_tangential(v, 2), stack.psi)
    return FunctionalValue(total, tuple(missing))


def energy_E(stack):
    return energy_eps(stack, 0.0)


def dissipation_eps(stack, eps):
    """Regularized dissipation D_eps; eps = 0 gives the base dissipation D.

    The eps addition is 2 eps int |d_x^mu Delta grad rho_t|^2 <psi>^-1 per
    (mu, s) (the time-differentiated form; see the energy identity, whose
    time derivative this term balances).
    """
    g = stack.grids
    tg = g.tangential
    L = 1.0 / stack.bracket
    a = stack.a_psi
    total = 0.0
    missing = []
    for mu, s in derivative_pairs(stack.k_diag):
        u_s = stack.u_quotient(s)
        u_s1 = stack.u_quotient(s + 1)
        r_s1 = stack.rho_quotient(s + 1)
        if u_s is None or u_s1 is None or r_s1 is None:
            missing.append((mu, s))
            continue
        w = d_tangential(u_s, mu) if mu else u_s
        wt = d_tangential(u_s1, mu) if mu else u_s1
        vt = d_tangential(r_s1, mu) if mu else r_s1
        wx = d_tangential(w, 1)
        wxx = d_tangential(w, 2)
        wn_up = d_normal(w, g.normal, side="above")
        wn_lo = d_normal(w, g.normal, side="below")
        wxn_up = d_tangential(wn_up, 1)
        wxn_lo = d_tangential(wn_lo, 1)
        wnn_up = d_normal2(w, g.normal, side="above")
        wnn_lo = d_normal2(w, g.normal, side="below")
        total += integrate_bulk(wt**2 + wx**2 + wxx**2, g)
        total += integrate_bulk_sided(
            a * wn_up**2 + 2.0 * a * wxn_up**2 + (a * wnn_up) ** 2,
            a * wn_lo**2 + 2.0 * a * wxn_lo**2 + (a * wnn_lo) ** 2,
            g,
        )
        total += 2.0 * integrate_interface(d_tangential(vt, 1) ** 2 * L, tg)
        if eps != 0.0:
            total += 2.0 * eps * integrate_interface(d_tangential(vt, 3) ** 2 * L, tg)
    return FunctionalValue(total, tuple(missing))


def dissipation_D(stack):
    return dissipation_eps(stack, 0.0)


def sobolev_norms(stack, eps):
    """Unweighted Sobolev counterparts (norm_E^2, norm_D^2) of E_eps, D_eps."""
    g = stack.grids
    tg = g.tangential
    e_total, d_total = 0.0, 0.0
    e_missing, d_missing = [], []
    for mu, s in derivative_pairs(stack.k_diag):
        u_s = stack.u_quotient(s)
        r_s = stack.rho_quotient(s)
        if u_s is not None and r_s is not None:
            w = d_tangential(u_s, mu) if mu else u_s
            v = d_tangential(r_s, mu) if mu else r_s
            wx = d_tangential(w, 1)
            wn_up = d_normal(w, g.normal, side="above")
            wn_lo = d_normal(w, g.normal, side="below")
            e_total += integrate_bulk(w**2 + wx**2, g)
            e_total += integrate_bulk_sided(wn_up**2, wn_lo**2, g)
            vx = d_tangential(v, 1)
            vxx = d_tangential(v, 2)
            e_total += integrate_interface(vx**2 + vxx**2, tg)
            if eps != 0.0:
                vxxx = d_tangential(v, 3)
                vxxxx = d_tangential(v, 4)
                e_total += eps * integrate_interface(vxxx**2 + vxxxx**2, tg)
        else:
            e_missing.append((mu, s))

        u_s1 = stack.u_quotient(s + 1)
        r_s1 = stack.rho_quotient(s + 1)
        if u_s is not None and u_s1 is not None and r_s1 is not None:
            w = d_tangential(u_s, mu) if mu else u_s
            wt = d_tangential(u_s1, mu) if mu else u_s1
            vt = d_tangential(r_s1, mu) if mu else r_s1
            wx = d_tangential(w, 1)
            wxx = d_tangential(w, 2)
            wn_up = d_normal(w, g.normal, side="above")
            wn_lo = d_normal(w, g.normal, side="below")
            wxn_up = d_tangential(wn_up, 1)
            wxn_lo = d_tangential(wn_lo, 1)
            wnn_up = d_normal2(w, g.normal, side="above")
            wnn_lo = d_normal2(w, g.normal, side="below")
            d_total += integrate_bulk(wt**2 + wx**2 + wxx**2, g)
            d_total += integrate_bulk_sided(
                wn_up**2 + 2.0 * wxn_up**2 + wnn_up**2,
                wn_lo**2 + 2.0 * wxn_lo**2 + wnn_lo**2,
                g,
            )
            d_total += integrate_interface(d_tangential(vt, 1) ** 2, tg)
            if eps != 0.0:
                d_total += eps * integrate_interface(d_tangential(vt, 3) ** 2, tg)
        else:
            d_missing.append((mu, s))
    return FunctionalValue(e_total, tuple(e_missing)), FunctionalValue(d_total, tuple(d_missing))


def equivalence_constant(psi, cutoff, kind="E"):
    """Norm-equivalence constant C with 1/C <= weighted/unweighted <= C.

    Built from sup-norm bounds on psi alone: every weighted integrand in
    E_eps (resp. D_eps) differs from its Sobolev counterpart by a factor
    lying between the returned bounds (a_psi in [a_min, a_max], powers of
    <psi> in [1, br_max], the factor-2 boundary weights).
    """
    psi = np.asarray(psi, dtype=float)
    px = d_tangential(psi, 1)
    sup_psi = float(np.abs(psi).max())
    sup_px = float(np.abs(px).max())
    slope = cutoff.max_slope
    if slope * sup_psi >= 1.0:
        return np.inf
    a_min = 1.0 / (1.0 + slope * sup_psi) ** 2
    a_max = (1.0 + sup_px**2) / (1.0 - slope * sup_psi) ** 2
    br_max = np.sqrt(1.0 + sup_px**2)
    if kind == "E":
        r_lo = min(1.0, a_min, br_max**-3)
        r_hi = max(1.0, a_max)
    elif kind == "D":
        r_lo = min(1.0, a_min, a_min**2, 2.0 / br_max)
        r_hi = max(1.0, a_max, a_max**2, 2.0)
    else:
        raise ValueError(f"kind must be 'E' or 'D', got {kind!r}")
    return float(max(r_hi, 1.0 / r_lo))


def state_energy_k0(u, rho, psi, eps, cutoff, grids):
    """E_eps of a bare state at diagnostic order 0 with prescribed weights psi.

    Used for fixed-point difference norms and trajectory distances; no time
    derivatives enter at order 0, so no history is needed.
    """
    stack = DerivativeStack(grids, cutoff, 0, [0.0], [np.asarray(u, dtype=float)],
                            [np.asarray(psi, dtype=float)])
    g = grids
    tg = g.tangential
    L = 1.0 / stack.bracket
    v = np.asarray(rho, dtype=float)
    total = _bulk_h1_weighted(stack, np.asarray(u, dtype=float))
    total += integrate_interface(d_tangential(v, 1) ** 2 * L, tg)
    total += i_psi(v, psi)
    if eps != 0.0:
        total += eps * integrate_interface(d_tangential(v, 3) ** 2 * L, tg)
        total += eps * i_psi(d_tangential(v, 2), psi)
    return float(total)


def conserved_quantity(u, rho, cutoff, grids):
    """int_O u (1 + phi' rho) - int_T rho, the exactly conserved combination."""
    phi, dphi, _ = cutoff.profiles(grids.normal.nodes)
    weight = 1.0 + dphi[None, :] * np.asarray(rho, dtype=float)[:, None]
    bulk = integrate_bulk(np.asarray(u, dtype=float) * weight, grids)
    return bulk - integrate_interface(rho, grids.tangential)


def conservation_residual(old, new, cutoff, grids):
    """|Delta(int u (1+phi' rho)) - Delta(int rho)| across one accepted step.

    ``old`` and ``new`` are (u, rho) pairs.
    """
    q_old = conserved_quantity(old[0], old[1], cutoff, grids)
    q_new = conserved_quantity(new[0], new[1], cutoff, grids)
    return abs(q_new - q_old)


def steady_mean(u0, rho0, cutoff, grids):
    """Mean interface height of the flat steady state selected by the data.

    The conservation law fixes  mean(rho_bar) = [int rho0 - int_O u0 (1+phi' rho0)] / (2 pi).
    """
    phi, dphi, _ = cutoff.profiles(grids.normal.nodes)
    weight = 1.0 + dphi[None, :] * np.asarray(rho0, dtype=float)[:, None]
    mass = integrate_bulk(np.asarray(u0, dtype=float) * weight, grids)
    return (integrate_interface(rho0, grids.tangential) - mass) / (2.0 * np.pi)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    degenerate: bool


def decay_fit(times, values, skip_fraction=0.2, floor=1e-280):
    """Least-squares exponential rate of values(t) ~ C exp(-rate t).

    The first ``skip_fraction`` of samples is dropped (transient).  The fit
    is flagged degenerate when values hit the floor or have no dynamic
    range (log-slope meaningless).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.size < 4:
        raise ValueError("need at least 4 aligned samples")
    start = int(np.ceil(skip_fraction * t.size))
    t, v = t[start:], v[start:]
    if np.any(v <= floor) or np.ptp(np.log(np.maximum(v, floor))) < 1e-12:
        return DecayFit(rate=0.0, r_squared=0.0, degenerate=True)
    y = np.log(v)
    A = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ coef
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(rate=float(-coef[0]), r_squared=r2, degenerate=False)


@dataclass
class EnergyReport:
    """Per-step diagnostic record (one CSV row of the time series)."""

    t: float
    E: float
    D: float
    E_eps: float
    D_eps: float
    sobolev_E: float
    sobolev_D: float
    cons_residual: float
    rho_dev_L2: float
    identity_residual: Optional[float]
    inner_iters: int
    missing_E: tuple = field(default=(), repr=False)
    missing_D: tuple = field(default=(), repr=False)
    i_psi_min_gap: float = 0.0

    CSV_COLUMNS = (
        "t", "E", "D", "E_eps", "D_eps", "sobolev_E", "sobolev_D",
        "cons_residual", "rho_dev_L2", "identity_residual", "inner_iters",
    )

    def csv_row(self):
        cells = []
        for name in self.CSV_COLUMNS:
            val = getattr(self, name)
            if val is None:
                cells.append("")
            elif name == "inner_iters":
                cells.append(str(int(val)))
            else:
                cells.append(format(float(val), ".17g"))
        return ",".join(cells)
