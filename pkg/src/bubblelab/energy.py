"""Energy quotients of pushed-forward bubbles over metric jets.

Every quotient here is an integral of a tangentially radial profile against
polynomial metric jets. The angular variables are integrated out exactly:
isotropic moments of the direction vector omega on the sphere close all jet
contractions (odd moments vanish; even moments are delta-pairing sums), so
each energy reduces to a 2D (half-space) or 1D (interior) quadrature of the
profile against a polynomial in (eps*r, eps*t).

That reduction makes the eps-dependence of every integral an exact
polynomial with coefficients computed once per (geometry, profile, cutoff):
a single quadrature pass yields the entire eps-sweep, and the Taylor
coefficients of the quotient in eps come from the same numbers, which is
what the estimator error-rate tests use as ground truth.

Escobar numerator (covariant graph form, rescaled coordinates):

    N(eps) = int g^ij(eps y) d_i w d_j w sqrt|g(eps y)| dy
             + c_n_scal * Scal_g * eps^2 int w^2 sqrt|g| dy
             + ((n-2)/2) * eps * H * int_{y_n=0} w^2 dsigma(eps y')

with c_n_scal = (n-2)/(4(n-1)), w = chi_R * U, and the quotient divides by
the boundary L^q mass to the power 2/q. The plain-trace functional uses the
pure Dirichlet denominator and the mean-zero gauge; the GN functional uses
the three bulk norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import FermiJetMetric, InteriorPointData, geometry_catalog, fermi_jet
from .moments import EscobarConstants
from .profiles import RadialProfile, cutoff, sphere_area
from .quadrature import QuadratureSpec, DEFAULT_QUAD, grid_1d

__all__ = [
    "BubbleParams", "QuotientResult", "DeficitSweep", "ChartOverflowError",
    "QuadratureNonConvergence", "escobar_quotient", "plain_trace_quotient",
    "gn_quotient", "deficit_series", "channel_fit_second_order",
    "ChannelFitResult", "HalfspaceEnergyModel", "InteriorEnergyModel",
    "fit_power_series", "empirical_slope",
]


class ChartOverflowError(ValueError):
    """Bubble support eps * 2R exceeds the chart radius."""


class QuadratureNonConvergence(RuntimeError):
    """Two-resolution difference far above the declared convergence level."""


# --------------------------------------------------------------------------
# isotropic sphere moments
# --------------------------------------------------------------------------

def _pairings(idx: tuple) -> list:
    if not idx:
        return [[]]
    first, rest = idx[0], idx[1:]
    out = []
    for k, j in enumerate(rest):
        sub = rest[:k] + rest[k + 1:]
        for tail in _pairings(sub):
            out.append([(first, j)] + tail)
    return out


_LETTERS = "abcdefgh"


def sphere_average(T, m: int) -> float:
    """Average of T_{i1..ik} omega_{i1}..omega_{ik} over the unit sphere S^(m-1).

    Zero for odd k; for even k the delta-pairing sum divided by
    m (m+2) ... (m+k-2). Exact for any tensor, any m >= 1.
    """
    T = np.asarray(T, dtype=float)
    k = T.ndim
    if k == 0:
        return float(T)
    if k % 2 == 1:
        return 0.0
    denom = 1.0
    for j in range(0, k, 2):
        denom *= (m + j)
    total = 0.0
    for pairing in _pairings(tuple(range(k))):
        sub = [None] * k
        for letter, (i, j) in zip(_LETTERS, pairing):
            sub[i] = sub[j] = letter
        total += float(np.einsum("".join(sub), T))
    return total / denom


def _poly_add(poly: dict, key: tuple, val: float) -> None:
    if abs(val) > 0.0:
        poly[key] = poly.get(key, 0.0) + val


# --------------------------------------------------------------------------
# reduced jet polynomials
# --------------------------------------------------------------------------

def _halfspace_jet_polys(jet: FermiJetMetric):
    """Angular-averaged jet polynomials in (X, Y) = (eps r, eps t).

    Returns (P_tan, P_sca, P_bdy): coefficients of the tangential-gradient
    weight <(w^T g^ab w) sqrt|g|>, the scalar weight <sqrt|g|> (which also
    multiplies d_n w by g^nn = 1), and the boundary density.
    Term tensors carry one omega slot per y'-contraction; the tangential
    gradient contributes two more.
    """
    m = jet.data.m
    I = np.eye(m)
    # sqrt|g| terms: (x-power, y-power, tensor with x-power omega slots)
    s_terms = [
        (0, 0, np.asarray(1.0)),
        (0, 1, np.asarray(-jet.H)),
        (1, 1, -jet.gradH),
        (0, 2, np.asarray(jet.kappa_vol)),
        (2, 0, -jet.ric_bar / 6.0),
    ]
    # g^ab terms: tensors listed with their position slots first, then (a, b)
    g_terms = [
        (0, 0, I),
        (0, 1, 2.0 * jet.II),
        (2, 0, np.transpose(jet.Rbar, (1, 3, 0, 2)) / 3.0),   # (c,d,a,b)
        (1, 1, 2.0 * jet.gradII),                              # (c,a,b)
        (0, 2, jet.A_up),
    ]
    P_sca: dict = {}
    for px, py, T in s_terms:
        _poly_add(P_sca, (px, py), sphere_average(T, m))
    P_tan: dict = {}
    for gx, gy, TG in g_terms:
        for sx, sy, TS in s_terms:
            T = np.multiply.outer(TG, TS)
            _poly_add(P_tan, (gx + sx, gy + sy), sphere_average(T, m))
    P_bdy = {(0, 0): 1.0}
    _poly_add(P_bdy, (2, 0), -float(np.trace(jet.ric_bar)) / (6.0 * m))
    return P_tan, P_sca, P_bdy


def _interior_jet_polys(data: InteriorPointData):
    """Same reduction for the normal-coordinate jet at an interior point."""
    n = data.n
    I = np.eye(n)
    k = data.scal / (n * (n - 1)) if n >= 2 else 0.0
    riem = k * (np.einsum("ij,kl->ikjl", I, I) - np.einsum("il,kj->ikjl", I, I))
    s_terms = [(0, np.asarray(1.0)), (2, -data.ric / 6.0)]
    g_terms = [(0, I), (2, np.transpose(riem, (1, 3, 0, 2)) / 3.0)]
    P_sca: dict = {}
    for px, T in s_terms:
        _poly_add(P_sca, (px, 0), sphere_average(T, n))
    P_tan: dict = {}
    for gx, TG in g_terms:
        for sx, TS in s_terms:
            _poly_add(P_tan, (gx + sx, 0), sphere_average(np.multiply.outer(TG, TS), n))
    return P_tan, P_sca


# --------------------------------------------------------------------------
# moment matrices: one quadrature pass per (profile, cutoff)
# --------------------------------------------------------------------------

_BULK_KEYS = [(i, j) for i in range(5) for j in range(5) if i + j <= 4]


@dataclass
class _HalfspaceMatrix:
    """Monomial-weighted integrals of the truncated profile.

    tan/nor/w2/w1/pp map (i, j) -> int weight * r^i t^j measure, with weight
    in {w_r^2, w_t^2, w^2, w, |w|^(p+1)}; tr2/trq/trq1 are the boundary
    analogues over {t = 0}.
    """
    n: int
    R: float
    tan: dict
    nor: dict
    w2: dict
    w1: dict
    pp: Optional[dict]
    tr2: dict
    trq: dict
    trq1: dict
    err: float


def halfspace_moment_matrix(profile: RadialProfile, R: float,
                            spec: QuadratureSpec = DEFAULT_QUAD,
                            p_exponent: Optional[float] = None,
                            t_offset: float = 0.0) -> _HalfspaceMatrix:
    n = profile.n
    om = sphere_area(n - 2)
    chi = cutoff(R)

    cut_edges = (R, 1.5 * R)  # conform panels to the cutoff transition zone

    def run(sp: QuadratureSpec):
        r, wr = grid_1d(0.0, 2.0 * R, sp.order, sp.subdiv, extra=cut_edges)
        t, wt = grid_1d(0.0, 2.0 * R + t_offset, sp.order, sp.subdiv, extra=cut_edges)
        Rg, Tg = np.meshgrid(r, t, indexing="ij")
        rho = np.sqrt(Rg ** 2 + Tg ** 2)
        u = profile.value(Rg, Tg)
        ur, ut = profile.grad(Rg, Tg)
        c = chi(rho)
        dc = chi.deriv(rho)
        safe = np.where(rho > 0, rho, 1.0)
        w = c * u
        wrad = c * ur + u * dc * (Rg / safe)
        wnor = c * ut + u * dc * (Tg / safe)
        meas = om * Rg ** (n - 2)
        weights = {"tan": wrad ** 2, "nor": wnor ** 2, "w2": w ** 2, "w1": w}
        if p_exponent is not None:
            weights["pp"] = np.abs(w) ** (p_exponent + 1.0)
        out = {}
        for name, wt2d in weights.items():
            out[name] = {}
            base = wt2d * meas
            for (i, j) in _BULK_KEYS:
                out[name][(i, j)] = float(np.einsum("i,j,ij->", wr, wt, base * Rg ** i * Tg ** j))
        # boundary traces (critical exponent defined for n >= 3; the GN
        # half-space profiles are Dirichlet and never use these)
        if n >= 3:
            q = 2.0 * (n - 1) / (n - 2)
            rb, wb = grid_1d(0.0, 2.0 * R, sp.order, sp.subdiv, extra=cut_edges)
            ub = chi(rb) * profile.value(rb, 0.0)
            mb = om * rb ** (n - 2)
            for name, dens in (("tr2", ub ** 2), ("trq", np.abs(ub) ** q),
                               ("trq1", np.abs(ub) ** (q - 1.0))):
                out[name] = {}
                for i in (0, 1, 2):
                    out[name][(i, 0)] = float(np.sum(wb * dens * mb * rb ** i))
        else:
            for name in ("tr2", "trq", "trq1"):
                out[name] = {(i, 0): 0.0 for i in (0, 1, 2)}
        return out

    coarse = run(spec)
    fine = run(spec.refined())
    err = max(abs(fine[k][key] - coarse[k][key]) / max(1.0, abs(fine[k][key]))
              for k in coarse for key in coarse[k])
    if err > max(1e-6, 100.0 * spec.rtol):
        raise QuadratureNonConvergence(
            f"moment matrix two-resolution difference {err:.2e} at R={R}")
    return _HalfspaceMatrix(n=n, R=float(R), tan=fine["tan"], nor=fine["nor"],
                            w2=fine["w2"], w1=fine["w1"], pp=fine.get("pp"),
                            tr2=fine["tr2"], trq=fine["trq"], trq1=fine["trq1"],
                            err=err)


def _poly_eval(poly: dict, matrix: dict, eps: float) -> float:
    return sum(c * matrix[key] * eps ** (key[0] + key[1]) for key, c in poly.items())


def _poly_delta(poly: dict, matrix: dict, eps: float) -> float:
    """Same sum restricted to positive total degree (the eps-dependent part).

    Deficits are assembled from these so that quotient-minus-flat never loses
    precision to cancellation of the O(1) parts.
    """
    return sum(c * matrix[key] * eps ** (key[0] + key[1])
               for key, c in poly.items() if key[0] + key[1] > 0)


def _poly_series(poly: dict, matrix: dict, order: int) -> np.ndarray:
    out = np.zeros(order + 1)
    for (i, j), c in poly.items():
        if i + j <= order:
            out[i + j] += c * matrix[(i, j)]
    return out


# truncated Taylor-series helpers ------------------------------------------

def _ser_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = len(a)
    out = np.zeros(K)
    for i in range(K):
        for j in range(K - i):
            out[i + j] += a[i] * b[j]
    return out


def _ser_pow(a: np.ndarray, alpha: float) -> np.ndarray:
    """(a0 + a1 x + ...)^alpha with a0 > 0, truncated at len(a)."""
    K = len(a)
    a0 = a[0]
    u = a / a0
    # log series
    lg = np.zeros(K)
    x = u.copy(); x[0] = 0.0
    term = x.copy()
    for k in range(1, K):
        lg += ((-1) ** (k + 1) / k) * term
        term = _ser_mul(term, x)
    lg *= alpha
    # exp series
    out = np.zeros(K); out[0] = 1.0
    term = np.zeros(K); term[0] = 1.0
    for k in range(1, K):
        term = _ser_mul(term, lg) / k
        out += term
    return out * a0 ** alpha


def _ser_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _ser_mul(a, _ser_pow(b, -1.0))


# --------------------------------------------------------------------------
# energy models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BubbleParams:
    """One concentrating bubble: profile, scale, cutoff, amplitude."""
    profile: RadialProfile
    eps: float
    R: float
    amplitude: float = 1.0
    chart_radius: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("scale eps must be positive")
        if self.eps * 2.0 * self.R > self.chart_radius + 1e-12:
            raise ChartOverflowError(
                f"bubble support eps*2R = {self.eps * 2 * self.R} exceeds "
                f"chart radius {self.chart_radius}")


@dataclass
class QuotientResult:
    functional: str
    eps: float
    R: float
    numerator: float
    denominator: float
    quotient: float
    reference: float
    deficit: float
    breakdown: dict = field(default_factory=dict)
    err_estimate: float = 0.0


class HalfspaceEnergyModel:
    """All boundary-bubble quotients of one (jet, profile, cutoff) triple.

    Evaluation at any eps and the exact eps-Taylor series share the same
    moment matrix, so sweep values and series truths are mutually consistent
    to quadrature precision.
    """

    def __init__(self, jet: FermiJetMetric, profile: RadialProfile, R: float,
                 spec: QuadratureSpec = DEFAULT_QUAD,
                 p_exponent: Optional[float] = None):
        self.jet = jet
        self.profile = profile
        self.R = float(R)
        self.n = profile.n
        self.spec = spec
        self.p_exponent = p_exponent
        self.P_tan, self.P_sca, self.P_bdy = _halfspace_jet_polys(jet)
        self.M = halfspace_moment_matrix(profile, R, spec, p_exponent,
                                         t_offset=getattr(profile, "shift", 0.0))

    # -- raw integrals -------------------------------------------------------
    def dirichlet(self, eps: float) -> float:
        return (_poly_eval(self.P_tan, self.M.tan, eps)
                + _poly_eval(self.P_sca, self.M.nor, eps))

    def bulk_mass2(self, eps: float) -> float:
        return _poly_eval(self.P_sca, self.M.w2, eps)

    def bulk_pp(self, eps: float) -> float:
        return _poly_eval(self.P_sca, self.M.pp, eps)

    def trace2(self, eps: float) -> float:
        return _poly_eval(self.P_bdy, self.M.tr2, eps)

    def traceq(self, eps: float) -> float:
        return _poly_eval(self.P_bdy, self.M.trq, eps)

    # -- Escobar -------------------------------------------------------------
    def escobar_numerator_terms(self, eps: float) -> dict:
        n = self.n
        scal = self.jet.data.scal_ambient if self.jet.order >= 2 else 0.0
        return {
            "gradient": self.dirichlet(eps),
            "scal": (n - 2) / (4.0 * (n - 1)) * scal * eps ** 2 * self.bulk_mass2(eps),
            "H_boundary": (n - 2) / 2.0 * eps * self.jet.H * self.trace2(eps),
        }

    def _check_jet_positivity(self, eps: float) -> None:
        t_deep = eps * (2.0 * self.R + getattr(self.profile, "shift", 0.0))
        zero = np.zeros(self.jet.data.m)
        vals = [self.jet.sqrt_det(zero, t) for t in np.linspace(0.0, t_deep, 9)]
        if min(vals) <= 0.0:
            import warnings
            warnings.warn(
                f"jet volume element non-positive inside the bubble support "
                f"(depth eps*2R = {t_deep:.3g}); shrink eps or the cutoff",
                stacklevel=3)

    def escobar_quotient(self, eps: float) -> QuotientResult:
        n = self.n
        q = 2.0 * (n - 1) / (n - 2)
        self._check_jet_positivity(eps)
        terms = self.escobar_numerator_terms(eps)
        N = sum(terms.values())
        Tq = self.traceq(eps)
        flat = self.flat_escobar()
        # cancellation-free deficit: J - J_flat = (dN - N0 ((Tq/T0)^(2/q)-1)) / Tq^(2/q)
        N0 = self.M.tan[(0, 0)] + self.M.nor[(0, 0)]
        T0 = self.M.trq[(0, 0)]
        dN = (_poly_delta(self.P_tan, self.M.tan, eps)
              + _poly_delta(self.P_sca, self.M.nor, eps)
              + terms["scal"] + terms["H_boundary"])
        dT_rel = _poly_delta(self.P_bdy, self.M.trq, eps) / T0
        deficit = (dN - N0 * math.expm1((2.0 / q) * math.log1p(dT_rel))) / Tq ** (2.0 / q)
        quot = flat + deficit
        return QuotientResult("escobar", eps, self.R, N, Tq ** (2.0 / q), quot,
                              flat, deficit, dict(terms, trace_mass=Tq),
                              self.M.err)

    def flat_escobar(self) -> float:
        n = self.n
        q = 2.0 * (n - 1) / (n - 2)
        J = self.M.tan[(0, 0)] + self.M.nor[(0, 0)]
        return J / self.M.trq[(0, 0)] ** (2.0 / q)

    def escobar_series(self, order: int = 4) -> np.ndarray:
        """Taylor coefficients c_1..c_order of J(eps)/J(0) - 1 (exact jet model)."""
        n = self.n
        q = 2.0 * (n - 1) / (n - 2)
        K = order + 1
        N = (_poly_series(self.P_tan, self.M.tan, order)
             + _poly_series(self.P_sca, self.M.nor, order))
        scal = self.jet.data.scal_ambient if self.jet.order >= 2 else 0.0
        w2 = _poly_series(self.P_sca, self.M.w2, order)
        N += (n - 2) / (4.0 * (n - 1)) * scal * np.concatenate([[0.0, 0.0], w2[:-2]])
        t2 = _poly_series(self.P_bdy, self.M.tr2, order)
        N += (n - 2) / 2.0 * self.jet.H * np.concatenate([[0.0], t2[:-1]])
        Tq = _poly_series(self.P_bdy, self.M.trq, order)
        rel = _ser_mul(N / N[0], _ser_pow(Tq / Tq[0], -2.0 / q))
        return rel[1:K]

    # -- plain trace ----------------------------------------------------------
    def _gauge_shift(self, eps: float) -> float:
        """Chart-volume average of the bubble (mean-zero gauge constant)."""
        n = self.n
        mass1 = _poly_eval(self.P_sca, self.M.w1, eps)
        r0 = self.jet.chart_radius
        vol = 0.0
        m = n - 1
        for (i, j), c in self.P_sca.items():
            a, b = n - 2 + i, j
            vol += (c * sphere_area(n - 2) * r0 ** (a + b + 2) / (a + b + 2)
                    * 0.5 * math.gamma((a + 1) / 2) * math.gamma((b + 1) / 2)
                    / math.gamma((a + b + 2) / 2))
        return eps ** ((n + 2) / 2.0) * mass1 / vol

    def plain_trace_quotient(self, eps: float) -> QuotientResult:
        n = self.n
        q = 2.0 * (n - 1) / (n - 2)
        alpha = q / 2.0
        D = self.dirichlet(eps)
        Tq = self.traceq(eps)
        cbar = self._gauge_shift(eps)
        # first-order effect of subtracting the constant cbar from the bubble:
        # u = eps^(-(n-2)/2) w(./eps), so q * cbar * int u^(q-1) dsigma pulls
        # back to q * cbar * eps^((n-2)/2) * int w^(q-1) dsigma'
        gauge = -q * cbar * eps ** ((n - 2) / 2.0) * _poly_eval(self.P_bdy, self.M.trq1, eps)
        Tq_gauged = Tq + gauge
        flat = self.flat_plain_trace()
        # cancellation-free: T_M - flat = (dT - T0 ((D/D0)^alpha - 1)) / D^alpha
        D0 = self.M.tan[(0, 0)] + self.M.nor[(0, 0)]
        T0 = self.M.trq[(0, 0)]
        dT = _poly_delta(self.P_bdy, self.M.trq, eps) + gauge
        dD_rel = (_poly_delta(self.P_tan, self.M.tan, eps)
                  + _poly_delta(self.P_sca, self.M.nor, eps)) / D0
        deficit = (dT - T0 * math.expm1(alpha * math.log1p(dD_rel))) / D ** alpha
        quot = flat + deficit
        return QuotientResult("plain-trace", eps, self.R, Tq_gauged, D ** alpha,
                              quot, flat, deficit,
                              {"dirichlet": D, "trace_mass": Tq, "gauge_shift": cbar,
                               "gauge_correction": gauge}, self.M.err)

    def flat_plain_trace(self) -> float:
        n = self.n
        alpha = (n - 1.0) / (n - 2.0)
        J = self.M.tan[(0, 0)] + self.M.nor[(0, 0)]
        return self.M.trq[(0, 0)] / J ** alpha

    def plain_trace_series(self, order: int = 3) -> np.ndarray:
        """Relative Taylor coefficients of T_M(eps)/T_M(0) - 1 (gauge term omitted:
        it is O(eps^((n+2)/2) * eps^((n-2)/2)), below every fitted order)."""
        n = self.n
        alpha = (n - 1.0) / (n - 2.0)
        D = (_poly_series(self.P_tan, self.M.tan, order)
             + _poly_series(self.P_sca, self.M.nor, order))
        Tq = _poly_series(self.P_bdy, self.M.trq, order)
        rel = _ser_mul(Tq / Tq[0], _ser_pow(D / D[0], -alpha))
        return rel[1:order + 1]

    # -- GN -------------------------------------------------------------------
    def gn_quotient(self, eps: float) -> QuotientResult:
        if self.p_exponent is None:
            raise ValueError("model built without the L^(p+1) weight")
        from .profiles import gn_exponents
        al, be = gn_exponents(self.n, self.p_exponent)
        Ipp = self.bulk_pp(eps)
        I2 = self.bulk_mass2(eps)
        D = self.dirichlet(eps)
        flat = self.flat_gn()
        # cancellation-free relative change of the quotient
        dpp = _poly_delta(self.P_sca, self.M.pp, eps) / self.M.pp[(0, 0)]
        d2 = _poly_delta(self.P_sca, self.M.w2, eps) / self.M.w2[(0, 0)]
        dg = (_poly_delta(self.P_tan, self.M.tan, eps)
              + _poly_delta(self.P_sca, self.M.nor, eps)) / (self.M.tan[(0, 0)] + self.M.nor[(0, 0)])
        rel = math.expm1(math.log1p(dpp) - 0.5 * al * math.log1p(d2)
                         - 0.5 * be * math.log1p(dg))
        W = flat * (1.0 + rel)
        return QuotientResult("gn-boundary", eps, self.R, Ipp,
                              I2 ** (al / 2.0) * D ** (be / 2.0), W, flat,
                              -rel,
                              {"I_pp": Ipp, "I_2": I2, "dirichlet": D,
                               "rel_change": rel}, self.M.err)

    def flat_gn(self) -> float:
        from .profiles import gn_exponents
        al, be = gn_exponents(self.n, self.p_exponent)
        Ipp = self.M.pp[(0, 0)]
        I2 = self.M.w2[(0, 0)]
        D = self.M.tan[(0, 0)] + self.M.nor[(0, 0)]
        return Ipp / (I2 ** (al / 2.0) * D ** (be / 2.0))

    def gn_series(self, order: int = 3) -> np.ndarray:
        """Relative Taylor coefficients of W(eps)/W(0) - 1."""
        from .profiles import gn_exponents
        al, be = gn_exponents(self.n, self.p_exponent)
        Ipp = _poly_series(self.P_sca, self.M.pp, order)
        I2 = _poly_series(self.P_sca, self.M.w2, order)
        D = (_poly_series(self.P_tan, self.M.tan, order)
             + _poly_series(self.P_sca, self.M.nor, order))
        rel = _ser_mul(Ipp / Ipp[0],
                       _ser_mul(_ser_pow(I2 / I2[0], -al / 2.0),
                                _ser_pow(D / D[0], -be / 2.0)))
        return rel[1:order + 1]


class InteriorEnergyModel:
    """GN quotient of an interior bubble over the normal-coordinate jet."""

    def __init__(self, data: InteriorPointData, profile: RadialProfile, R: float,
                 spec: QuadratureSpec = DEFAULT_QUAD):
        if profile.p is None:
            raise ValueError("interior GN model needs a GN ground-state profile")
        self.data = data
        self.profile = profile
        self.R = float(R)
        self.n = profile.n
        self.spec = spec
        self.P_tan, self.P_sca = _interior_jet_polys(data)
        self.M = self._matrix(spec)

    def _matrix(self, spec: QuadratureSpec):
        n, p = self.n, self.profile.p
        om = sphere_area(n - 1)
        chi = cutoff(self.R)

        def run(sp):
            x, wx = grid_1d(0.0, 2.0 * self.R, sp.order, sp.subdiv,
                            extra=(self.R, 1.5 * self.R))
            u = self.profile.value(x)
            du = self.profile.grad(x)
            c = chi(x)
            dc = chi.deriv(x)
            w = c * u
            dw = c * du + u * dc
            meas = om * x ** (n - 1)
            out = {}
            for name, dens in (("grad", dw ** 2), ("w2", w ** 2), ("pp", np.abs(w) ** (p + 1))):
                out[name] = {i: float(np.sum(wx * dens * meas * x ** i)) for i in (0, 2, 4)}
            return out

        coarse, fine = run(spec), run(spec.refined())
        self_err = max(abs(fine[k][i] - coarse[k][i]) for k in coarse for i in coarse[k])
        fine["err"] = self_err
        return fine

    def _eval(self, poly: dict, mat: dict, eps: float) -> float:
        return sum(c * mat[i] * eps ** i for (i, _), c in poly.items())

    def _series(self, poly: dict, mat: dict, order: int) -> np.ndarray:
        out = np.zeros(order + 1)
        for (i, _), c in poly.items():
            if i <= order:
                out[i] += c * mat[i]
        return out

    def gn_quotient(self, eps: float) -> QuotientResult:
        from .profiles import gn_exponents
        al, be = gn_exponents(self.n, self.profile.p)
        Ipp = self._eval(self.P_sca, self.M["pp"], eps)
        I2 = self._eval(self.P_sca, self.M["w2"], eps)
        D = self._eval(self.P_tan, self.M["grad"], eps)
        flat = self.flat_gn()
        ddel = lambda poly, mat: sum(c * mat[i] * eps ** i
                                     for (i, _), c in poly.items() if i > 0)
        dpp = ddel(self.P_sca, self.M["pp"]) / self.M["pp"][0]
        d2 = ddel(self.P_sca, self.M["w2"]) / self.M["w2"][0]
        dg = ddel(self.P_tan, self.M["grad"]) / self.M["grad"][0]
        rel = math.expm1(math.log1p(dpp) - 0.5 * al * math.log1p(d2)
                         - 0.5 * be * math.log1p(dg))
        W = flat * (1.0 + rel)
        return QuotientResult("gn-interior", eps, self.R, Ipp,
                              I2 ** (al / 2.0) * D ** (be / 2.0), W, flat,
                              -rel,
                              {"I_pp": Ipp, "I_2": I2, "dirichlet": D,
                               "rel_change": rel}, self.M["err"])

    def flat_gn(self) -> float:
        from .profiles import gn_exponents
        al, be = gn_exponents(self.n, self.profile.p)
        return self.M["pp"][0] / (self.M["w2"][0] ** (al / 2.0) * self.M["grad"][0] ** (be / 2.0))

    def gn_series(self, order: int = 3) -> np.ndarray:
        from .profiles import gn_exponents
        al, be = gn_exponents(self.n, self.profile.p)
        Ipp = self._series(self.P_sca, self.M["pp"], order)
        I2 = self._series(self.P_sca, self.M["w2"], order)
        D = self._series(self.P_tan, self.M["grad"], order)
        rel = _ser_mul(Ipp / Ipp[0],
                       _ser_mul(_ser_pow(I2 / I2[0], -al / 2.0),
                                _ser_pow(D / D[0], -be / 2.0)))
        return rel[1:order + 1]


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def _check_chart(jet, bubble: BubbleParams) -> None:
    if bubble.eps * 2.0 * bubble.R > getattr(jet, "chart_radius", bubble.chart_radius) + 1e-12:
        raise ChartOverflowError(
            f"eps*2R = {bubble.eps * 2 * bubble.R} exceeds chart radius")


def escobar_quotient(jet: FermiJetMetric, bubble: BubbleParams,
                     spec: QuadratureSpec = DEFAULT_QUAD) -> QuotientResult:
    _check_chart(jet, bubble)
    model = HalfspaceEnergyModel(jet, bubble.profile, bubble.R, spec)
    return model.escobar_quotient(bubble.eps)


def plain_trace_quotient(jet: FermiJetMetric, bubble: BubbleParams,
                         spec: QuadratureSpec = DEFAULT_QUAD) -> QuotientResult:
    _check_chart(jet, bubble)
    model = HalfspaceEnergyModel(jet, bubble.profile, bubble.R, spec)
    return model.plain_trace_quotient(bubble.eps)


def gn_quotient(metric, bubble: BubbleParams,
                spec: QuadratureSpec = DEFAULT_QUAD) -> QuotientResult:
    _check_chart(metric, bubble)
    if isinstance(metric, InteriorPointData):
        return InteriorEnergyModel(metric, bubble.profile, bubble.R, spec).gn_quotient(bubble.eps)
    model = HalfspaceEnergyModel(metric, bubble.profile, bubble.R, spec,
                                 p_exponent=bubble.profile.p)
    return model.gn_quotient(bubble.eps)


@dataclass
class DeficitSweep:
    """Deficits over an eps-grid, from quadrature or synthetic injection."""
    functional: str
    eps: np.ndarray
    deficits: np.ndarray          # E(eps): quotient - flat (escobar/plain), relative for GN
    reference: float
    results: list = field(default_factory=list)
    series: Optional[np.ndarray] = None   # exact jet-model Taylor coefficients
    source: str = "geometry"

    def deficit_at(self, eps: float) -> float:
        i = int(np.argmin(np.abs(self.eps - eps)))
        if abs(self.eps[i] - eps) > 1e-12 * max(eps, 1e-300):
            raise KeyError(f"eps {eps} not in sweep grid")
        return float(self.deficits[i])


def deficit_series(jet, profile: RadialProfile, R: float, eps_grid,
                   spec: QuadratureSpec = DEFAULT_QUAD, functional: str = "escobar",
                   synthetic: Optional[dict] = None, workers: int = 1,
                   diagonal: bool = False) -> DeficitSweep:
    """E(eps) over a grid; ``synthetic={'coeffs': [...], 'S': S}`` bypasses
    quadrature and returns E = S * sum_k c_k eps^k exactly (estimator unit mode).

    ``diagonal=True`` switches from the fixed-cutoff regime to the diagonal
    one: each level gets its own cutoff R(eps) = R * sqrt(eps_max/eps), so
    eps R(eps) -> 0 while R(eps) -> infinity and each deficit is measured
    against the flat value at its own truncation.

    Grid points are independent; ``workers > 1`` maps them over a thread pool
    and gathers deterministically by grid index.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if synthetic is not None:
        S = synthetic.get("S", 1.0)
        coeffs = np.asarray(synthetic["coeffs"], dtype=float)
        vals = S * sum(c * eps_grid ** (k + 1) for k, c in enumerate(coeffs))
        return DeficitSweep(functional, eps_grid, vals, S,
                            series=coeffs, source="synthetic")
    if diagonal:
        if functional != "escobar":
            raise ValueError("diagonal cutoff regime implemented for the "
                             "boundary-trace quotient")
        res = []
        for e in eps_grid:
            Re = R * math.sqrt(float(eps_grid.max()) / e)
            model = HalfspaceEnergyModel(jet, profile, Re, spec)
            res.append(model.escobar_quotient(e))
        vals = np.array([r.deficit for r in res])
        return DeficitSweep(functional, eps_grid, vals, res[-1].reference,
                            results=res, source="geometry-diagonal")
    if functional == "escobar":
        model = HalfspaceEnergyModel(jet, profile, R, spec)
        evaluate, ref, ser = model.escobar_quotient, model.flat_escobar(), model.escobar_series()
    elif functional == "plain-trace":
        model = HalfspaceEnergyModel(jet, profile, R, spec)
        evaluate, ref, ser = model.plain_trace_quotient, model.flat_plain_trace(), model.plain_trace_series()
    elif functional == "gn-boundary":
        model = HalfspaceEnergyModel(jet, profile, R, spec, p_exponent=profile.p)
        evaluate, ref, ser = model.gn_quotient, model.flat_gn(), model.gn_series()
    elif functional == "gn-interior":
        model = InteriorEnergyModel(jet, profile, R, spec)
        evaluate, ref, ser = model.gn_quotient, model.flat_gn(), model.gn_series()
    else:
        raise KeyError(functional)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(evaluate, eps_grid))
    else:
        res = [evaluate(e) for e in eps_grid]
    vals = np.array([r.deficit for r in res])
    return DeficitSweep(functional, eps_grid, vals, ref, results=res, series=ser)


# --------------------------------------------------------------------------
# fitting helpers
# --------------------------------------------------------------------------

def fit_power_series(eps, values, degrees) -> np.ndarray:
    """Least-squares fit of values ~ sum_d c_d eps^d (scaled for conditioning)."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    s = eps.max()
    A = np.stack([(eps / s) ** d for d in degrees], axis=1)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    return coef / s ** np.asarray(degrees, dtype=float)


def empirical_slope(eps, errors, levels: int = 3) -> float:
    """Log-log slope of |errors| vs eps over the ``levels`` finest levels."""
    eps = np.asarray(eps, dtype=float)
    err = np.abs(np.asarray(errors, dtype=float))
    order = np.argsort(eps)
    eps, err = eps[order][:levels], err[order][:levels]
    good = err > 0
    if good.sum() < 2:
        return float("nan")
    A = np.stack([np.log(eps[good]), np.ones(good.sum())], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(err[good]), rcond=None)
    return float(coef[0])


# --------------------------------------------------------------------------
# channel fit
# --------------------------------------------------------------------------

@dataclass
class ChannelFitResult:
    n: int
    kappa1: float
    kappa2: float
    kappa3_fit: float
    kappa3_moment: float
    kappa3_rel_err: float
    kappa2_positive: bool
    noise_floor: float
    fit_errors: dict
    details: dict


def channel_fit_second_order(n: int, profile: RadialProfile, constants: EscobarConstants,
                             R: float = 100.0, eps0: float = 4e-3, levels: int = 6,
                             spec: QuadratureSpec = DEFAULT_QUAD,
                             residual_tol: float = 1e-8,
                             kappa3_tol: float = 0.05) -> ChannelFitResult:
    """Fit kappa_1, kappa_2 and cross-check kappa_3 from channel-isolating jets.

    Each geometry has H = 0, so deficit/S*(R) = c2 eps^2 + c3 eps^3 + c4 eps^4
    with no linear term (c3 comes out at noise level: the probe deficits are
    even in eps); c2 is fitted over a dyadic grid and divided by the channel
    value. The anisotropic fit is compared against the moment formula
    (4-n) g2 / (2(n-1)).
    """
    if n < 5:
        raise ValueError("channel fit requires n >= 5")
    eps = eps0 * 0.5 ** np.arange(levels)
    geos = {
        "ricci": geometry_catalog("ricci-only", n, value=1.0),
        "scal": geometry_catalog("boundary-scal-only", n, value=1.0),
        "aniso": geometry_catalog("anisotropic-cylinder-like", n),
        "flat": geometry_catalog("flat-halfspace", n),
    }
    fitted, fit_errors, details = {}, {}, {}
    for key, geo in geos.items():
        jet = fermi_jet(geo.data, order=2, chart_radius=max(1.0, eps0 * 2.1 * R))
        sweep = deficit_series(jet, profile, R, eps, spec, functional="escobar")
        y = sweep.deficits / sweep.reference
        c = fit_power_series(eps, y, (2, 3, 4))
        resid = y - c[0] * eps ** 2 - c[1] * eps ** 3 - c[2] * eps ** 4
        fitted[key] = c[0]
        fit_errors[key] = float(np.max(np.abs(resid)))
        details[key] = {"c2": float(c[0]), "c3": float(c[1]), "c4": float(c[2]),
                        "series": sweep.series.tolist(),
                        "deficits": y.tolist()}
    noise = abs(fitted["flat"]) + fit_errors["flat"] / eps.min() ** 2
    if max(fit_errors.values()) > residual_tol:
        raise RuntimeError(f"channel fit residual exceeds threshold: {fit_errors}")
    k1 = fitted["ricci"] / 1.0
    k2 = fitted["scal"] / 1.0
    aniso_val = geos["aniso"].data.II_ring_sq
    k3_fit = fitted["aniso"] / aniso_val
    k3_mom = constants.kappa3
    rel = abs(k3_fit - k3_mom) / abs(k3_mom)
    if rel > kappa3_tol:
        raise RuntimeError(
            f"kappa3 mismatch: fit {k3_fit} vs moments {k3_mom} ({rel:.2%})")
    return ChannelFitResult(n=n, kappa1=k1, kappa2=k2, kappa3_fit=k3_fit,
                            kappa3_moment=k3_mom, kappa3_rel_err=rel,
                            kappa2_positive=bool(k2 > 0), noise_floor=noise,
                            fit_errors=fit_errors, details=details)
