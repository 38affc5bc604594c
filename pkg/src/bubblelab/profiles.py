"""Model optimizer profiles and cutoffs.

Four profile kinds, all exposing value and gradient in the coordinates the
energy integrals use (tangentially radial (r, t) on the half-space, radial
|y - xi| on full space):

* escobar-halfspace: U(r, t) = c (r^2 + (1+t)^2)^(-(n-2)/2), the harmonic
  half-space extremal of the critical boundary trace problem, normalized to
  unit Dirichlet energy over the half-space.
* aubin-talenti-interior: U(y) = c (lambda / (1 + lambda^2 |y-xi|^2))^((n-2)/2).
* gn-ground-state: the positive radial decreasing solution of
  -Q'' - ((n-1)/r) Q' + Q = Q^p, tabulated from a shooting solve with a
  matched Bessel-K tail.
* gn-halfspace-near-optimizer: Q shifted off the wall and multiplied by a
  smooth ramp vanishing on {t = 0}; carries its achieved quotient.

Profiles are immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import kv

from .quadrature import QuadratureSpec, DEFAULT_QUAD, integrate_halfplane_polar, integrate_ray

__all__ = [
    "RadialProfile", "Cutoff", "MomentDivergentDimension", "ShootingError",
    "escobar_halfspace_optimizer", "aubin_talenti", "gn_ground_state",
    "gn_halfspace_near_optimizer", "cutoff", "sphere_area", "gn_exponents",
    "weinstein_quotient_fullspace", "weinstein_quotient_halfspace",
    "profile_to_json", "profile_from_json",
]


class MomentDivergentDimension(ValueError):
    """Raised when a requested dimension makes the defining moments diverge."""


class ShootingError(RuntimeError):
    """Raised when the radial shooting solve cannot bracket or converge."""


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


# --------------------------------------------------------------------------
# smooth cutoff
# --------------------------------------------------------------------------

def _smoothstep(s):
    """C^infinity transition: 1 on s<=0, 0 on s>=1 (standard exp(-1/s) glue)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 0.0] = 1.0
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    a = np.exp(-1.0 / sm)
    b = np.exp(-1.0 / (1.0 - sm))
    out[mid] = b / (a + b)
    return out


_CHI_GRAD_SUP = 2.0  # sup |chi'| of the base shape, by dense sampling


@dataclass(frozen=True)
class Cutoff:
    """chi_R(y) = chi(|y|/R): 1 on B_R, 0 outside B_2R, |grad| <= C/R."""
    R: float

    def __post_init__(self):
        if self.R < 1.0:
            raise ValueError("cutoff radius must be >= 1")

    def __call__(self, rho):
        return _smoothstep(np.asarray(rho) / self.R - 1.0)

    def deriv(self, rho):
        rho = np.asarray(rho, dtype=float)
        h = 1e-6
        return (self(rho + h) - self(rho - h)) / (2.0 * h)

    @property
    def grad_sup_bound(self) -> float:
        return _CHI_GRAD_SUP / self.R


def cutoff(R: float) -> Cutoff:
    return Cutoff(float(R))


# --------------------------------------------------------------------------
# profile container
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """A tangentially radial (half-space) or radial (interior) model profile.

    value/grad take (r, t) for half-space kinds and plain radius for interior
    kinds; all are vectorized over numpy arrays.
    """
    kind: str
    n: int
    amplitude: float
    lam: float = 1.0
    xi: tuple = ()
    p: Optional[float] = None
    # tabulated radial data for GN kinds; derivs2 enables the quintic
    # Hermite interpolant (the ODE supplies exact second derivatives)
    grid: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)
    derivs: Optional[np.ndarray] = field(default=None, repr=False)
    derivs2: Optional[np.ndarray] = field(default=None, repr=False)
    tail_coeff: float = 0.0
    tail_r0: float = 0.0
    shift: float = 0.0
    achieved_quotient: Optional[float] = None
    meta: dict = field(default_factory=dict)

    # -- evaluation ---------------------------------------------------------
    def value(self, r, t=None):
        r = np.asarray(r, dtype=float)
        if self.kind == "escobar-halfspace":
            t = np.asarray(t, dtype=float)
            return self.amplitude * (r ** 2 + (1.0 + t) ** 2) ** (-(self.n - 2) / 2.0)
        if self.kind == "aubin-talenti-interior":
            return self.amplitude * (self.lam / (1.0 + self.lam ** 2 * r ** 2)) ** ((self.n - 2) / 2.0)
        if self.kind == "gn-ground-state":
            return self.amplitude * self._radial_value(r)
        if self.kind == "gn-halfspace-near-optimizer":
            t = np.asarray(t, dtype=float)
            rad = np.sqrt(r ** 2 + (t - self.shift) ** 2)
            return self.amplitude * self._radial_value(rad) * np.tanh(t)
        raise ValueError(self.kind)

    def grad(self, r, t=None):
        """Gradient components; ((d/dr, d/dt) for half-space kinds, d/dr else)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "escobar-halfspace":
            t = np.asarray(t, dtype=float)
            a = 1.0 + t
            base = (r ** 2 + a ** 2) ** (-(self.n) / 2.0)
            fac = -(self.n - 2) * self.amplitude
            return fac * r * base, fac * a * base
        if self.kind == "aubin-talenti-interior":
            lam = self.lam
            u = (lam / (1.0 + lam ** 2 * r ** 2)) ** ((self.n - 2) / 2.0)
            return self.amplitude * u * (-(self.n - 2) * lam ** 2 * r / (1.0 + lam ** 2 * r ** 2))
        if self.kind == "gn-ground-state":
            return self.amplitude * self._radial_deriv(r)
        if self.kind == "gn-halfspace-near-optimizer":
            t = np.asarray(t, dtype=float)
            dt_ = t - self.shift
            rad = np.sqrt(r ** 2 + dt_ ** 2)
            q = self._radial_value(rad)
            qp = self._radial_deriv(rad)
            safe = np.where(rad > 0, rad, 1.0)
            ramp = np.tanh(t)
            dramp = np.where(np.abs(t) < 20.0, 1.0 / np.cosh(np.minimum(np.abs(t), 20.0)) ** 2, 0.0)
            gr = self.amplitude * qp * (r / safe) * ramp
            gt = self.amplitude * (qp * (dt_ / safe) * ramp + q * dramp)
            return gr, gt
        raise ValueError(self.kind)

    def normalized(self, spec: QuadratureSpec = DEFAULT_QUAD) -> "RadialProfile":
        """Amplitude-rescaled copy with unit Dirichlet norm.

        The closed-form kinds are built normalized; for GN kinds the quotient
        is amplitude-invariant, so this is a gauge fix only. Rescaling is one
        exact Newton step on the amplitude (the norm is quadratic in it).
        """
        import dataclasses
        norm_sq = self.dirichlet_norm_sq(spec)
        return dataclasses.replace(
            self, amplitude=self.amplitude / math.sqrt(norm_sq), meta={})

    def _spline(self):
        # cached lazily on the instance despite frozen=True (pure cache)
        sp = self.meta.get("_spline")
        if sp is None:
            if self.derivs2 is not None:
                from scipy.interpolate import BPoly
                data = np.stack([self.values, self.derivs, self.derivs2], axis=1)
                sp = BPoly.from_derivatives(self.grid, data)
            else:
                sp = CubicHermiteSpline(self.grid, self.values, self.derivs)
            self.meta["_spline"] = sp
            self.meta["_dspline"] = sp.derivative()
        return sp

    def _radial_value(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        sp = self._spline()
        out = np.where(r <= self.grid[-1], sp(np.clip(r, 0.0, self.grid[-1])), self._tail(r))
        return np.maximum(out, 0.0)

    def _radial_deriv(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        self._spline()
        dsp = self.meta["_dspline"]
        return np.where(r <= self.grid[-1], dsp(np.clip(r, 0.0, self.grid[-1])), self._tail_deriv(r))

    # far field: decaying solution of Q'' + ((n-1)/r)Q' - Q = 0,
    # Q = A r^(1-n/2) K_{n/2-1}(r)
    def _tail(self, r):
        nu = self.n / 2.0 - 1.0
        r = np.maximum(np.asarray(r, dtype=float), 0.5)
        with np.errstate(over="ignore"):
            return self.tail_coeff * r ** (1.0 - self.n / 2.0) * kv(nu, r)

    def _tail_deriv(self, r):
        h = 1e-6 * np.maximum(r, 1.0)
        return (self._tail(r + h) - self._tail(r - h)) / (2.0 * h)

    # -- norms (used by normalization and tests) ----------------------------
    def dirichlet_norm_sq(self, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
        """Full-domain ||grad||_L2^2 (half-space or R^n according to kind)."""
        n = self.n
        if self.kind == "escobar-halfspace":
            om = sphere_area(n - 2)

            def f(r, t):
                gr, gt = self.grad(r, t)
                return om * (gr ** 2 + gt ** 2) * r ** (n - 2)

            return integrate_halfplane_polar(f, spec, decay=2 * (n - 1) - (n - 2))
        if self.kind == "aubin-talenti-interior":
            om = sphere_area(n - 1)

            def f(r):
                return om * self.grad(r) ** 2 * r ** (n - 1)

            return integrate_ray(f, spec, decay=2 * (n - 1) - (n - 1))
        if self.kind == "gn-ground-state":
            om = sphere_area(n - 1)

            def f(r):
                return om * self.grad(r) ** 2 * r ** (n - 1)

            return float(integrate_ray(f, spec, inner=self.grid[-1], decay=4.0))
        if self.kind == "gn-halfspace-near-optimizer":
            om = sphere_area(n - 2)

            def f(r, t):
                gr, gt = self.grad(r, t)
                return om * (gr ** 2 + gt ** 2) * r ** (n - 2)

            return integrate_halfplane_polar(f, spec, rho_inner=self.grid[-1] + self.shift, decay=6.0)
        raise ValueError(self.kind)


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def escobar_halfspace_optimizer(n: int, spec: QuadratureSpec = DEFAULT_QUAD) -> RadialProfile:
    """Normalized harmonic half-space optimizer; rejects n <= 3."""
    if int(n) != n or n <= 3:
        raise MomentDivergentDimension(
            f"moment-divergent dimension n={n}: the defining weighted moments "
            "are finite only for n >= 4")
    n = int(n)
    raw = RadialProfile(kind="escobar-halfspace", n=n, amplitude=1.0)
    norm_sq = raw.dirichlet_norm_sq(spec)
    # quotient is exactly quadratic in the amplitude: one Newton step is exact
    return RadialProfile(kind="escobar-halfspace", n=n, amplitude=1.0 / math.sqrt(norm_sq))


def aubin_talenti(n: int, lam: float = 1.0, xi: tuple = (), spec: QuadratureSpec = DEFAULT_QUAD) -> RadialProfile:
    """Normalized interior bubble; value/grad are functions of |y - xi|."""
    if int(n) != n or n < 3:
        raise ValueError("aubin_talenti requires integer n >= 3")
    if lam <= 0:
        raise ValueError("dilation parameter must be positive")
    n = int(n)
    raw = RadialProfile(kind="aubin-talenti-interior", n=n, amplitude=1.0, lam=1.0)
    norm_sq = raw.dirichlet_norm_sq(spec)
    # the Dirichlet norm is dilation invariant at the critical scaling
    return RadialProfile(kind="aubin-talenti-interior", n=n,
                         amplitude=1.0 / math.sqrt(norm_sq), lam=float(lam),
                         xi=tuple(xi))


def _admissible_gn(n: int, p: float) -> bool:
    if n >= 3:
        return 1.0 < p < (n + 2.0) / (n - 2.0)
    return 1.0 < p < math.inf


def _shoot_once(n: int, p: float, b: float, r_max: float, method: str = "RK45",
                rtol: float = 1e-12, atol: float = 1e-14):
    """Integrate outward from the regular center; classify the outcome."""

    def rhs(r, y):
        Q, P = y
        src = Q - np.sign(Q) * np.abs(Q) ** p
        return [P, src - (n - 1) / r * P]

    def crossed(r, y):
        return y[0]

    crossed.terminal = True

    def escaped(r, y):
        return y[0] - 2.5 * b

    escaped.terminal = True

    r0 = 1e-8
    # series start: Q = b + (b - b^p) r^2 / (2n) + O(r^4)
    q0 = b + (b - b ** p) * r0 ** 2 / (2 * n)
    p0 = (b - b ** p) * r0 / n
    sol = solve_ivp(rhs, (r0, r_max), [q0, p0], events=[crossed, escaped],
                    rtol=rtol, atol=atol, dense_output=True, method=method)
    if sol.t_events[0].size:
        return "crossed", sol
    if sol.t_events[1].size:
        return "escaped", sol
    # reached r_max while positive: rising tail means undershoot
    return ("escaped" if sol.y[1, -1] > 0 else "end"), sol


def gn_ground_state(n: int, p: float, spec: QuadratureSpec = DEFAULT_QUAD,
                    grid_nodes: int = 2048, r_max: float = 40.0) -> RadialProfile:
    """Ground state of -Q'' - ((n-1)/r)Q' + Q = Q^p by bisection on Q(0).

    The shooting is integrated on [0, r_match]; beyond r_match the profile is
    the matched decaying far-field branch r^(1-n/2) K_{n/2-1}(r), which keeps
    the tabulated tail below 1e-8 at r = 40 without amplifying the unstable
    shooting mode.
    """
    if int(n) != n or n < 2:
        raise ValueError("gn_ground_state requires integer n >= 2")
    if not _admissible_gn(int(n), float(p)):
        raise ValueError(
            f"subcritical-range violation: need 1 < p < (n+2)/(n-2) for n>=3, got n={n}, p={p}")
    n, p = int(n), float(p)
    r_shoot = 18.0

    lo, hi = 0.5, 4.0
    lo_ok = hi_ok = False
    for _ in range(80):
        state, _ = _shoot_once(n, p, hi, r_shoot)
        if state == "crossed":
            hi_ok = True
            break
        hi *= 1.6
    for _ in range(80):
        state, _ = _shoot_once(n, p, lo, r_shoot)
        if state != "crossed":
            lo_ok = True
            break
        lo *= 0.6
    if not (lo_ok and hi_ok):
        raise ShootingError(
            f"shooting bracket failure for (n={n}, p={p}): tried Q(0) in [{lo}, {hi}]")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        state, _ = _shoot_once(n, p, mid, r_shoot)
        if state == "crossed":
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    b = 0.5 * (lo + hi)
    # tabulation pass at a tighter tolerance: the quintic interpolant
    # amplifies nodal noise in its second derivative like noise/h^2
    state, sol = _shoot_once(n, p, b, r_shoot, method="DOP853",
                             rtol=1e-13, atol=3e-15)

    # keep the trajectory while it is positive, decreasing, and above the
    # noise floor where the unstable mode takes over
    r_dense = np.linspace(1e-8, min(r_shoot, sol.t[-1]), 20001)
    qd = sol.sol(r_dense)[0]
    pd = sol.sol(r_dense)[1]
    floor = max(1e-9, 5e-13 * b * math.exp(r_shoot))
    ok = qd > floor
    r_match = r_dense[ok][-1]
    r_match = min(r_match, r_shoot - 1e-3)

    nu = n / 2.0 - 1.0
    qm = float(sol.sol(r_match)[0])
    tail_coeff = qm / (r_match ** (1.0 - n / 2.0) * float(kv(nu, r_match)))

    # 2048-node tabulation grid: uniform head + geometric body. The head
    # spacing ~2e-3 balances the quintic interpolant's two error sources
    # (integrator noise amplified like eps/h^2 vs the h^4 truncation term).
    head = np.linspace(0.0, 1.0, grid_nodes // 4 + 1)[:-1]
    geo = np.geomspace(1.0, r_max, grid_nodes - grid_nodes // 4)
    grid = np.unique(np.concatenate([head, geo]))
    vals = np.empty_like(grid)
    ders = np.empty_like(grid)
    inside = grid <= r_match
    vals[inside] = sol.sol(np.maximum(grid[inside], 1e-8))[0]
    ders[inside] = sol.sol(np.maximum(grid[inside], 1e-8))[1]
    ders[0] = 0.0
    out = ~inside
    rr = grid[out]
    with np.errstate(over="ignore"):
        vals[out] = tail_coeff * rr ** (1.0 - n / 2.0) * kv(nu, rr)
    h = 1e-6 * np.maximum(rr, 1.0)
    vals_p = tail_coeff * (rr + h) ** (1.0 - n / 2.0) * kv(nu, rr + h)
    vals_m = tail_coeff * (rr - h) ** (1.0 - n / 2.0) * kv(nu, rr - h)
    ders[out] = (vals_p - vals_m) / (2.0 * h)

    # exact second derivatives from the ODE itself (linearized on the tail)
    ders2 = np.empty_like(grid)
    safe_r = np.maximum(grid, 1e-300)
    ders2[inside] = (vals - np.abs(vals) ** p - (n - 1) / safe_r * ders)[inside]
    ders2[0] = (b - b ** p) / n
    ders2[out] = vals[out] - (n - 1) / grid[out] * ders[out]

    prof = RadialProfile(kind="gn-ground-state", n=n, amplitude=1.0, p=p,
                         grid=grid, values=vals, derivs=ders, derivs2=ders2,
                         tail_coeff=tail_coeff, tail_r0=float(r_match),
                         meta={"Q0": b})
    return prof


def gn_halfspace_near_optimizer(n: int, p: float, delta0: float,
                                spec: QuadratureSpec = DEFAULT_QUAD,
                                shifts=(2.0, 4.0, 8.0, 16.0),
                                ground_state: Optional[RadialProfile] = None) -> RadialProfile:
    """Dirichlet near-optimizer on the half-space from a shifted, ramped Q.

    Walks the shift ladder and returns the first profile whose Weinstein
    quotient is within delta0 of the Euclidean sharp value (relative form
    W >= C* - delta0); fails if the largest shift does not reach the target.
    """
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    Q = ground_state if ground_state is not None else gn_ground_state(n, p, spec)
    cstar = weinstein_quotient_fullspace(Q, spec)

    best = None
    quotients = []
    for s in shifts:
        prof = RadialProfile(kind="gn-halfspace-near-optimizer", n=Q.n, amplitude=1.0,
                             p=Q.p, grid=Q.grid, values=Q.values, derivs=Q.derivs,
                             derivs2=Q.derivs2, tail_coeff=Q.tail_coeff,
                             tail_r0=Q.tail_r0, shift=float(s),
                             meta={"Q0": Q.meta.get("Q0")})
        w = weinstein_quotient_halfspace(prof, spec)
        quotients.append((s, w))
        best = RadialProfile(kind="gn-halfspace-near-optimizer", n=Q.n, amplitude=1.0,
                             p=Q.p, grid=Q.grid, values=Q.values, derivs=Q.derivs,
                             derivs2=Q.derivs2, tail_coeff=Q.tail_coeff,
                             tail_r0=Q.tail_r0, shift=float(s), achieved_quotient=w,
                             meta={"Q0": Q.meta.get("Q0"), "cstar": cstar,
                                   "ladder": quotients})
        if w >= cstar - delta0:
            return best
    raise ShootingError(
        f"target deficit {delta0} not reached at maximum shift {shifts[-1]}: "
        f"ladder {quotients}, C* = {cstar}")


# --------------------------------------------------------------------------
# Weinstein quotients of the bare profiles (flat space, no cutoff)
# --------------------------------------------------------------------------

def gn_exponents(n: int, p: float) -> tuple[float, float]:
    """(alpha, beta) with alpha = 2 - (n-2)(p-1)/2, beta = n(p-1)/2."""
    return 2.0 - (n - 2) * (p - 1) / 2.0, n * (p - 1) / 2.0


def gn_ode_residual(Q: RadialProfile, r) -> np.ndarray:
    """-Q'' - ((n-1)/r) Q' + Q - Q^p evaluated from the tabulated interpolant."""
    if Q.kind != "gn-ground-state":
        raise ValueError("residual check applies to the tabulated ground state")
    r = np.asarray(r, dtype=float)
    sp = Q._spline()
    d1 = Q.meta["_dspline"]
    d2 = Q.meta.get("_d2spline")
    if d2 is None:
        d2 = d1.derivative()
        Q.meta["_d2spline"] = d2
    q = np.maximum(sp(r), 0.0)
    return -d2(r) - (Q.n - 1) / r * d1(r) + q - q ** Q.p


def weinstein_quotient_fullspace(Q: RadialProfile, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    n, p = Q.n, Q.p
    om = sphere_area(n - 1)
    rmax = Q.grid[-1]

    def make(power):
        def f(r):
            return om * Q.value(r) ** power * r ** (n - 1)
        return f

    ipp = integrate_ray(make(p + 1), spec, inner=rmax, decay=4.0)
    i2 = integrate_ray(make(2), spec, inner=rmax, decay=4.0)
    jg = Q.dirichlet_norm_sq(spec)
    al, be = gn_exponents(n, p)
    return float(ipp / (i2 ** (al / 2.0) * jg ** (be / 2.0)))


def weinstein_quotient_halfspace(Qp: RadialProfile, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    n, p = Qp.n, Qp.p
    om = sphere_area(n - 2)
    rho = Qp.grid[-1] + Qp.shift

    def make(power):
        def f(r, t):
            return om * Qp.value(r, t) ** power * r ** (n - 2)
        return f

    ipp = integrate_halfplane_polar(make(p + 1), spec, rho_inner=rho, decay=6.0)
    i2 = integrate_halfplane_polar(make(2), spec, rho_inner=rho, decay=6.0)
    jg = Qp.dirichlet_norm_sq(spec)
    al, be = gn_exponents(n, p)
    return float(ipp / (i2 ** (al / 2.0) * jg ** (be / 2.0)))


# --------------------------------------------------------------------------
# JSON round trip (fixture caching)
# --------------------------------------------------------------------------

def profile_to_json(prof: RadialProfile) -> str:
    d = {
        "kind": prof.kind, "n": prof.n, "amplitude": prof.amplitude,
        "lam": prof.lam, "xi": list(prof.xi), "p": prof.p,
        "tail_coeff": prof.tail_coeff, "tail_r0": prof.tail_r0,
        "shift": prof.shift, "achieved_quotient": prof.achieved_quotient,
        "meta": {k: v for k, v in prof.meta.items()
                 if not k.startswith("_") and isinstance(v, (int, float, str))},
    }
    if prof.grid is not None:
        d["grid"] = prof.grid.tolist()
        d["values"] = prof.values.tolist()
        d["derivs"] = prof.derivs.tolist()
        if prof.derivs2 is not None:
            d["derivs2"] = prof.derivs2.tolist()
    return json.dumps(d, sort_keys=True)


def profile_from_json(s: str) -> RadialProfile:
    d = json.loads(s)
    grid = np.asarray(d["grid"]) if "grid" in d else None
    vals = np.asarray(d["values"]) if "values" in d else None
    ders = np.asarray(d["derivs"]) if "derivs" in d else None
    ders2 = np.asarray(d["derivs2"]) if "derivs2" in d else None
    return RadialProfile(kind=d["kind"], n=d["n"], amplitude=d["amplitude"],
                         lam=d["lam"], xi=tuple(d["xi"]), p=d["p"],
                         grid=grid, values=vals, derivs=ders, derivs2=ders2,
                         tail_coeff=d["tail_coeff"], tail_r0=d["tail_r0"],
                         shift=d["shift"], achieved_quotient=d["achieved_quotient"],
                         meta=dict(d.get("meta", {})))
