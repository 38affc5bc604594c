"""Energy-only inverse estimators: curvature from quotient deficits alone.

Single-scale, two-scale (modulated), and three-scale de-biased inversions of
the boundary-bubble expansion

    E(x, eps) = S* (rho H eps + R eps^2 + T eps^3) + O(eps^4),

the isotropic recovery of |II_ring|^2, the GN boundary/interior estimators,
and the 2D Gauss-Bonnet assembly. Estimators are pure arithmetic on deficit
values; the deficits may come from the jet-energy models (geometry mode) or
be injected synthetically (unit mode) through the same code path.

Truth values for jet sweeps are the exact Taylor coefficients of the jet
quotient (energy.HalfspaceEnergyModel.escobar_series), computed from the same
quadrature data as the deficits, so measured error rates are clean.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energy import HalfspaceEnergyModel, InteriorEnergyModel, empirical_slope
from .geometry import BoundaryPointData, InteriorPointData, fermi_jet, geometry_catalog
from .moments import EscobarConstants, GNCoefficients
from .profiles import RadialProfile
from .quadrature import QuadratureSpec, DEFAULT_QUAD

__all__ = [
    "EstimatorReport", "EstimatorScales", "hat_H_single", "three_scale_debias",
    "modulated_two_point", "ring_II_estimator", "gn_boundary_H", "gn_interior_scal",
    "gauss_bonnet_recovery", "SampledField", "escobar_three_scale_sweep",
    "escobar_single_scale_sweep", "gn_boundary_sweep", "gn_interior_sweep",
    "disk_fields_exact", "annulus_fields_exact", "disk_fields_estimated",
]


@dataclass
class EstimatorReport:
    target: str
    estimate: float
    eps: object                        # scalar or tuple of scales used
    truth: Optional[float] = None
    error: Optional[float] = None
    order: Optional[float] = None      # empirical convergence order, when swept
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.truth is not None and self.error is None:
            self.error = abs(self.estimate - self.truth)


@dataclass(frozen=True)
class EstimatorScales:
    """The two constants every Escobar estimator divides by."""
    S_star: float
    rho: float

    @classmethod
    def from_constants(cls, constants: EscobarConstants, truncated: bool = True):
        if truncated:
            return cls(constants.S_star_R, constants.rho_conf_R)
        return cls(constants.S_star, constants.rho_conf)

    @classmethod
    def from_model(cls, model: HalfspaceEnergyModel):
        M = model.M
        n = model.n
        g1 = M.tan[(0, 1)] + M.nor[(0, 1)]
        g1tan = M.tan[(0, 1)]
        theta = M.tr2[(0, 0)]
        J = M.tan[(0, 0)] + M.nor[(0, 0)]
        rho = ((2.0 / (n - 1)) * g1tan - g1 + (n - 2) / 2.0 * theta) / J
        return cls(model.flat_escobar(), rho)


def hat_H_single(E: float, eps: float, scales: EstimatorScales,
                 truth: Optional[float] = None) -> EstimatorReport:
    """H-hat = E / (S* rho eps), first-order inversion (error O(eps))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    est = E / (scales.S_star * scales.rho * eps)
    return EstimatorReport("H", est, eps, truth)


def three_scale_debias(E1: float, E2: float, E3: float, eps: float,
                       scales: EstimatorScales, n: Optional[int] = None,
                       truths: tuple = (None, None, None),
                       scale_triple: Optional[tuple] = None):
    """De-biased (H-hat, R-hat, T-hat) from deficits at scales (eps, 2eps, 3eps).

    A_k = E(k eps)/(k eps), D1 = A2 - A1, D2 = A3 - A2,
    T-hat = (D2 - D1)/(2 S* eps^2), R-hat = D1/(S* eps) - 3 eps T-hat,
    H-hat = (A1/S* - eps R-hat - eps^2 T-hat)/rho.
    Exact on cubic deficits; rates (3, 2, 1) under a bounded eps^4 remainder.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if scale_triple is not None:
        expect = (eps, 2 * eps, 3 * eps)
        if not np.allclose(scale_triple, expect, rtol=1e-12):
            raise ValueError(f"mismatched scale triple {scale_triple}, need {expect}")
    if n is not None and n < 7:
        warnings.warn("three-scale rates are asserted for n >= 7 with locally "
                      "constant H; computing anyway", stacklevel=2)
    S = scales.S_star
    A1, A2, A3 = E1 / eps, E2 / (2 * eps), E3 / (3 * eps)
    D1, D2 = A2 - A1, A3 - A2
    t_hat = (D2 - D1) / (2.0 * S * eps ** 2)
    r_hat = D1 / (S * eps) - 3.0 * eps * t_hat
    h_hat = (A1 / S - eps * r_hat - eps ** 2 * t_hat) / scales.rho
    tH, tR, tT = truths
    return (EstimatorReport("H", h_hat, eps, tH),
            EstimatorReport("mass", r_hat, eps, tR),
            EstimatorReport("theta", t_hat, eps, tT))


def modulated_two_point(delta1: float, delta2: float, eps: float, rho: float,
                        truths: tuple = (None, None)):
    """Two-scale inversion of S*-normalized deficits Delta at (eps, 2 eps).

    M = Delta(eps)/eps, N = (Delta(2eps) - 2 Delta(eps))/eps^2; the de-biased
    combinations M - (eps/2) N -> rho H + O(eps^2) and N/2 -> R + O(eps).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    M = delta1 / eps
    N = (delta2 - 2.0 * delta1) / eps ** 2
    rhoH = M - 0.5 * eps * N
    r_hat = 0.5 * N
    t1, t2 = truths
    rep1 = EstimatorReport("rhoH", rhoH, eps, t1, extras={"M": M, "N": N})
    rep2 = EstimatorReport("mass", r_hat, eps, t2, extras={"M": M, "N": N})
    return rep1, rep2


def ring_II_estimator(r_hat: float, data: BoundaryPointData,
                      constants: EscobarConstants,
                      truth: Optional[float] = None) -> EstimatorReport:
    """|II_ring|^2-hat = (R-hat - kappa1 Ric_nn - kappa2 Scal_bdy)/kappa3."""
    constants.require_channel_fit()
    if constants.kappa3 is None or constants.kappa3 == 0.0:
        raise ValueError("kappa3 vanishes: anisotropy channel not invertible")
    est = (r_hat - constants.kappa1 * data.ric_nn
           - constants.kappa2 * data.scal_bdy) / constants.kappa3
    if truth is None:
        truth = data.II_ring_sq
    return EstimatorReport("ring_II_sq", est, None, truth)


def gn_boundary_H(delta1: float, delta2: float, eps1: float, eps2: float,
                  coeffs: GNCoefficients, truth: Optional[float] = None) -> EstimatorReport:
    """H-hat from GN relative deficits at two scales.

    delta_i = (W_flat - W(eps_i))/W_flat = -kappa_bdy H eps_i + O(eps^2) (the
    quotient is a sup-functional: it moves by +kappa_bdy H eps relatively), so
    H-hat = -(delta1 - delta2)/(kappa_bdy (eps1 - eps2)).
    """
    if eps1 == eps2:
        raise ValueError("needs two distinct scales")
    if coeffs.kappa_bdy == 0.0:
        raise ValueError("kappa_bdy vanishes")
    est = -(delta1 - delta2) / (coeffs.kappa_bdy * (eps1 - eps2))
    return EstimatorReport("H", est, (eps1, eps2), truth)


def gn_interior_scal(delta1: float, delta2: float, eps1: float, eps2: float,
                     coeffs: GNCoefficients, truth: Optional[float] = None) -> EstimatorReport:
    """Scal-hat = (delta1 - delta2)/(kappa_int (eps1^2 - eps2^2)) from relative deficits."""
    if eps1 == eps2:
        raise ValueError("needs two distinct scales")
    if coeffs.kappa_int == 0.0:
        raise ValueError("kappa_int vanishes")
    est = (delta1 - delta2) / (coeffs.kappa_int * (eps1 ** 2 - eps2 ** 2))
    return EstimatorReport("scal", est, (eps1, eps2), truth)


# --------------------------------------------------------------------------
# sweep pipelines on jet geometries
# --------------------------------------------------------------------------

def escobar_single_scale_sweep(data: BoundaryPointData, profile: RadialProfile,
                               R: float, eps_grid, spec: QuadratureSpec = DEFAULT_QUAD,
                               chart_radius: Optional[float] = None) -> dict:
    """H-hat over an eps-grid with cutoff-consistent constants; order vs truth H."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    chart = chart_radius or max(1.0, float(eps_grid.max()) * 2.0 * R * 1.05)
    jet = fermi_jet(data, order=2, chart_radius=chart)
    model = HalfspaceEnergyModel(jet, profile, R, spec)
    scales = EstimatorScales.from_model(model)
    truth = data.H
    reports = []
    for e in eps_grid:
        E = model.escobar_quotient(e).deficit
        reports.append(hat_H_single(E, e, scales, truth=truth))
    errs = np.array([r.error for r in reports])
    order = empirical_slope(eps_grid, errs)
    return {"reports": reports, "eps": eps_grid, "errors": errs, "order": order,
            "truth": truth, "scales": scales, "series": model.escobar_series()}


def escobar_three_scale_sweep(data: BoundaryPointData, profile: RadialProfile,
                              R: float, eps_grid, spec: QuadratureSpec = DEFAULT_QUAD,
                              chart_radius: Optional[float] = None) -> dict:
    """(H, R, T)-estimates over base scales; truths from the exact jet series."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    chart = chart_radius or max(1.0, float(eps_grid.max()) * 6.0 * R * 1.05)
    jet = fermi_jet(data, order=2, chart_radius=chart)
    model = HalfspaceEnergyModel(jet, profile, R, spec)
    scales = EstimatorScales.from_model(model)
    c = model.escobar_series(order=3)
    truths = (data.H, c[1], c[2])  # H; mass = c2; theta = c3 of the jet quotient
    out = {"H": [], "mass": [], "theta": []}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for e in eps_grid:
            E1 = model.escobar_quotient(e).deficit
            E2 = model.escobar_quotient(2 * e).deficit
            E3 = model.escobar_quotient(3 * e).deficit
            rH, rR, rT = three_scale_debias(E1, E2, E3, e, scales, n=model.n,
                                            truths=truths)
            out["H"].append(rH); out["mass"].append(rR); out["theta"].append(rT)
    orders = {}
    for key in out:
        errs = np.array([r.error for r in out[key]])
        orders[key] = empirical_slope(eps_grid, errs)
        for r in out[key]:
            r.order = orders[key]
    return {"reports": out, "eps": eps_grid, "orders": orders, "truths": truths,
            "scales": scales, "series": c}


def gn_boundary_sweep(data: BoundaryPointData, Qplus: RadialProfile,
                      coeffs: GNCoefficients, R: float, eps_grid,
                      spec: QuadratureSpec = DEFAULT_QUAD,
                      chart_radius: Optional[float] = None) -> dict:
    """GN H-hat from deficit pairs (eps, 2 eps) on a boundary jet."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    chart = chart_radius or max(1.0, float(eps_grid.max()) * 4.0 * (R + Qplus.shift) * 1.05)
    jet = fermi_jet(data, order=2, chart_radius=chart)
    model = HalfspaceEnergyModel(jet, Qplus, R, spec, p_exponent=Qplus.p)
    truth = data.H
    reports = []
    for e in eps_grid:
        d1 = model.gn_quotient(e).deficit
        d2 = model.gn_quotient(2 * e).deficit
        reports.append(gn_boundary_H(d1, d2, e, 2 * e, coeffs, truth=truth))
    errs = np.array([r.error for r in reports])
    return {"reports": reports, "eps": eps_grid, "errors": errs,
            "order": empirical_slope(eps_grid, errs), "truth": truth,
            "series": model.gn_series()}


def gn_interior_sweep(data: InteriorPointData, Q: RadialProfile,
                      coeffs: GNCoefficients, R: float, eps_grid,
                      spec: QuadratureSpec = DEFAULT_QUAD) -> dict:
    """GN Scal-hat from deficit pairs (eps, 2 eps) on an interior jet."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    model = InteriorEnergyModel(data, Q, R, spec)
    truth = data.scal
    reports = []
    for e in eps_grid:
        d1 = model.gn_quotient(e).deficit
        d2 = model.gn_quotient(2 * e).deficit
        reports.append(gn_interior_scal(d1, d2, e, 2 * e, coeffs, truth=truth))
    errs = np.array([r.error for r in reports])
    return {"reports": reports, "eps": eps_grid, "errors": errs,
            "order": empirical_slope(eps_grid, errs), "truth": truth,
            "series": model.gn_series()}


# --------------------------------------------------------------------------
# Gauss-Bonnet assembly on surfaces
# --------------------------------------------------------------------------

@dataclass
class SampledField:
    """Field samples with quadrature measures (sum(weights) = total measure)."""
    values: np.ndarray
    weights: np.ndarray

    def integral(self) -> float:
        return float(np.dot(np.asarray(self.values, float), np.asarray(self.weights, float)))


def gauss_bonnet_recovery(n: int, interior_scal: SampledField,
                          boundary_H: SampledField) -> EstimatorReport:
    """chi-hat = (1/2pi)(0.5 * int Scal dV + int H ds) from sampled fields."""
    if n != 2:
        raise ValueError("Gauss-Bonnet recovery is two-dimensional only")
    chi = (0.5 * interior_scal.integral() + boundary_H.integral()) / (2.0 * math.pi)
    nearest = round(chi)
    return EstimatorReport("euler_characteristic", chi, None, extras={
        "nearest_integer": int(nearest), "distance_to_integer": abs(chi - nearest)})


def disk_fields_exact(n_interior: int = 25, n_boundary: int = 16) -> tuple:
    """Exact fields on the flat unit disk: Scal = 0, H = 1, length 2 pi."""
    rng = np.linspace(0.1, 0.9, max(1, n_interior))
    w = np.full(rng.size, math.pi / rng.size)       # weights sum to the area
    interior = SampledField(np.zeros(rng.size), w)
    wb = np.full(n_boundary, 2.0 * math.pi / n_boundary)
    boundary = SampledField(np.ones(n_boundary), wb)
    return interior, boundary


def annulus_fields_exact(r_inner: float, n_boundary: int = 16) -> tuple:
    """Exact fields on the flat annulus (r, 1): outer H = 1, inner H = -1/r."""
    if not (0 < r_inner < 1):
        raise ValueError("inner radius must lie in (0, 1)")
    area = math.pi * (1.0 - r_inner ** 2)
    interior = SampledField(np.zeros(4), np.full(4, area / 4.0))
    outer = np.ones(n_boundary)
    inner = np.full(n_boundary, -1.0 / r_inner)
    values = np.concatenate([outer, inner])
    weights = np.concatenate([
        np.full(n_boundary, 2.0 * math.pi / n_boundary),
        np.full(n_boundary, 2.0 * math.pi * r_inner / n_boundary),
    ])
    return interior, SampledField(values, weights)


def disk_fields_estimated(Q: RadialProfile, Qplus: RadialProfile,
                          coeffs: GNCoefficients, eps: float = 1e-2,
                          R: float = 20.0, spec: QuadratureSpec = DEFAULT_QUAD,
                          n_interior: int = 9, n_boundary: int = 8) -> tuple:
    """Estimator-produced fields on the unit disk via the GN pipelines.

    Every interior point of the flat disk carries the flat jet and every
    boundary point the H = 1 Fermi jet, so one model of each kind serves the
    whole grid; the estimators still run per sample point.
    """
    int_model = InteriorEnergyModel(InteriorPointData(n=2, scal=0.0), Q, R, spec)
    d1 = int_model.gn_quotient(eps).deficit
    d2 = int_model.gn_quotient(2 * eps).deficit
    scal_hat = gn_interior_scal(d1, d2, eps, 2 * eps, coeffs).estimate
    interior_vals = np.full(n_interior, scal_hat)
    interior = SampledField(interior_vals, np.full(n_interior, math.pi / n_interior))

    bdata = geometry_catalog("euclidean-ball", 2, radius=1.0).data
    jet = fermi_jet(bdata, order=2, chart_radius=max(1.0, eps * 2.2 * (R + Qplus.shift)))
    bmodel = HalfspaceEnergyModel(jet, Qplus, R, spec, p_exponent=Qplus.p)
    # two applications of the two-scale estimator, Richardson-combined to
    # cancel its leading O(eps1 + eps2) bias
    d = {e: bmodel.gn_quotient(e).deficit for e in (eps, eps / 2, eps / 4)}
    h1 = gn_boundary_H(d[eps / 2], d[eps], eps / 2, eps, coeffs).estimate
    h2 = gn_boundary_H(d[eps / 4], d[eps / 2], eps / 4, eps / 2, coeffs).estimate
    h_hat = 2.0 * h2 - h1
    boundary = SampledField(np.full(n_boundary, h_hat),
                            np.full(n_boundary, 2.0 * math.pi / n_boundary))
    return interior, boundary
