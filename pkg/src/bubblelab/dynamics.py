"""Fast-diffusion decay envelopes, extinction bounds, and window eigenvalues.

The PDE itself is never solved; this module implements the ODE/bound layer:

* Bernoulli entropy decay  E' <= -kappa E^(1/alpha)  integrates to
  E(t) <= (E0^(-(1-alpha)/alpha) + ((1-alpha)/alpha) kappa t)^(-alpha/(1-alpha));
  the equality ODE is integrated numerically and compared to the envelope.
* Extinction-time lower bound T >= y0^(1-m) / ((1-m) lambda_1) with the ODE
  witness y' = -lambda_1 y^m hitting zero exactly at the bound.
* Eigenfunction competitor bound W_sup >= Vol^(1-(p+1)/2) lambda_1^(-beta/2).
* Small Dirichlet window: first radial eigenvalue of the ball with a Dirichlet
  window of radius d at the center and a Neumann outer shell (the window is
  the only essential boundary, which is what drives lambda_1 -> 0 at the
  capacity rate: lambda_1 ~ 1/|log d| in n = 2, ~ d^(n-2) in n = 3). The
  d = 0 case is the separate all-Dirichlet disk, checked against the Bessel
  root.

The EEP constant's "euclidean-leading" mode identifies the form-B GN
inequality (q = 1 + 1/m, r = 1/m) with the Weinstein family at p = 1/m, so
C = C*(n, 1/m) comes from the same ground-state machinery as everything else.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .moments import fde_exponents, FDEExponents
from .profiles import gn_ground_state, weinstein_quotient_fullspace
from .quadrature import QuadratureSpec, DEFAULT_QUAD

__all__ = [
    "DecayParams", "decay_envelope", "ode_decay_check", "extinction_time_lower",
    "eig_competitor_bound", "small_window_lambda1", "window_ladder",
    "capacity_blowup_bound", "euclidean_leading_constant",
]


def euclidean_leading_constant(n: int, m: float,
                               spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """EEP constant in euclidean-leading mode: C*(n, p = 1/m)."""
    p = 1.0 / m
    if n >= 3 and p >= (n + 2.0) / (n - 2.0):
        raise ValueError(
            f"euclidean-leading mode needs m > (n-2)/(n+2); got m={m}, n={n}")
    Q = gn_ground_state(n, p, spec)
    return weinstein_quotient_fullspace(Q, spec)


@dataclass
class DecayParams:
    """Inputs of the Bernoulli decay bound for the entropy E = int u^(m+1)."""
    n: int
    m: float
    E0: float
    M0: float
    C: Optional[float] = None          # EEP constant; None -> euclidean-leading
    C_mode: str = "euclidean-leading"
    exponents: FDEExponents = None
    kappa: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.E0 <= 0 or self.M0 <= 0:
            raise ValueError("initial entropy and mass must be positive")
        if self.exponents is None:
            self.exponents = fde_exponents(self.n, self.m)
        if self.C is None:
            if self.C_mode != "euclidean-leading":
                raise ValueError("explicit C required unless mode is euclidean-leading")
            # Euclidean-leading value carries an O(eps_*) caveat on curved (M, g)
            self.C = euclidean_leading_constant(self.n, self.m)
        al, be = self.exponents.alpha, self.exponents.beta
        self.kappa = (self.m + 1.0) * self.C ** (-1.0 / al) * self.M0 ** (-be / al)

    @property
    def alpha(self) -> float:
        return self.exponents.alpha

    @property
    def beta(self) -> float:
        return self.exponents.beta

    @property
    def bernoulli_ok(self) -> bool:
        return 0.0 < self.alpha < 1.0


def decay_envelope(params: DecayParams, t) -> np.ndarray:
    """Closed-form entropy envelope; requires alpha in (0, 1)."""
    al = params.alpha
    if not params.bernoulli_ok:
        raise ValueError(f"no Bernoulli regime: alpha = {al} not in (0, 1)")
    t = np.asarray(t, dtype=float)
    a = (1.0 - al) / al
    return (params.E0 ** (-a) + a * params.kappa * t) ** (-1.0 / a)


def ode_decay_check(params: DecayParams, horizon: float,
                    rtol: float = 1e-11, atol: float = 1e-13,
                    n_samples: int = 400) -> dict:
    """Integrate the equality ODE E' = -kappa E^(1/alpha) and compare.

    At equality the solution and the envelope coincide; the report carries the
    sup gap over the horizon and flags the near-exponential regime alpha ~ 1.
    """
    al = params.alpha
    if not params.bernoulli_ok:
        raise ValueError(f"no Bernoulli regime: alpha = {al} not in (0, 1)")

    def rhs(t, y):
        return [-params.kappa * max(y[0], 0.0) ** (1.0 / al)]

    ts = np.linspace(0.0, horizon, n_samples)
    sol = solve_ivp(rhs, (0.0, horizon), [params.E0], t_eval=ts,
                    rtol=rtol, atol=atol, method="RK45")
    if not sol.success:
        raise RuntimeError(f"ODE solver failure: {sol.message}")
    env = decay_envelope(params, ts)
    gap = sol.y[0] - env
    return {
        "t": ts,
        "E": sol.y[0],
        "envelope": env,
        "sup_gap": float(np.max(np.abs(gap))),
        "majorized": bool(np.all(sol.y[0] <= env + 1e-8 * np.abs(env))),
        "near_exponential": bool(al > 0.95),
    }


def extinction_time_lower(y0: float, m: float, lam1: float) -> float:
    """T_ext >= y0^(1-m) / ((1-m) lambda_1)."""
    if not (0.0 < m < 1.0):
        raise ValueError("m must lie in (0, 1)")
    if lam1 <= 0 or y0 <= 0:
        raise ValueError("lambda_1 and the eigenfunction pairing must be positive")
    return y0 ** (1.0 - m) / ((1.0 - m) * lam1)


def eig_competitor_bound(vol: float, lam1: float, n: int, p: float) -> float:
    """Lower bound Vol^(1-(p+1)/2) lambda_1^(-beta/2) on the GN supremum."""
    if vol <= 0 or lam1 <= 0:
        raise ValueError("volume and lambda_1 must be positive")
    beta = n * (p - 1.0) / 2.0
    return vol ** (1.0 - (p + 1.0) / 2.0) * lam1 ** (-beta / 2.0)


# --------------------------------------------------------------------------
# radial eigenvalue solver
# --------------------------------------------------------------------------

def _radial_shoot(n: int, lam: float, d: float, rtol: float = 1e-11):
    """Integrate u'' + ((n-1)/r) u' + lam u = 0 from the window to r = 1."""

    def rhs(r, y):
        return [y[1], -lam * y[0] - (n - 1) / r * y[1]]

    if d > 0.0:
        y0, r0 = [0.0, 1.0], d
    else:
        r0 = 1e-8
        y0 = [1.0 - lam * r0 ** 2 / (2.0 * n), -lam * r0 / n]
    sol = solve_ivp(rhs, (r0, 1.0), y0, rtol=rtol, atol=1e-14, method="RK45",
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(f"radial shooting failed: {sol.message}")
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def small_window_lambda1(n: int, d: float, lam_tol: float = 1e-8,
                         lam_floor: float = 1e-9) -> float:
    """First radial eigenvalue of the unit ball with a window of radius d.

    d > 0: Dirichlet at r = d, Neumann at r = 1 (the capacity-window model);
    bisection on the Neumann residual u'(1; lambda). d = 0: the all-Dirichlet
    disk, bisection on u(1; lambda). Relative lambda tolerance ``lam_tol``.
    """
    if n not in (2, 3):
        raise ValueError("window solver covers n in {2, 3}")
    if not (0.0 <= d < 1.0):
        raise ValueError("window radius must lie in [0, 1)")

    def residual(lam):
        u1, du1 = _radial_shoot(n, lam, d)
        return du1 if d > 0.0 else u1

    lo = lam_floor if d > 0.0 else 1.0
    f_lo = residual(lo)
    hi = lo
    f_hi = f_lo
    for _ in range(200):
        hi *= 1.5
        f_hi = residual(hi)
        if f_lo * f_hi < 0:
            break
    else:
        raise RuntimeError(f"bisection bracket failure for n={n}, d={d}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = residual(mid)
        if f_lo * f_mid <= 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo <= lam_tol * hi:
            break
    return 0.5 * (lo + hi)


def window_ladder(n: int, ds, lam_tol: float = 1e-8) -> dict:
    """lambda_1 across a window-radius ladder with the capacity-scaled column.

    The scaled column is lambda_1 * |log d| (n = 2) or lambda_1 / d^(n-2)
    (n = 3); its stabilization across the last two rungs is the check.
    """
    ds = np.asarray(ds, dtype=float)
    lams = np.array([small_window_lambda1(n, d, lam_tol) for d in ds])
    if n == 2:
        scaled = lams * np.abs(np.log(ds))
    else:
        scaled = lams / ds ** (n - 2)
    tail_variation = abs(scaled[-1] - scaled[-2]) / abs(scaled[-1])
    return {"d": ds, "lambda1": lams, "scaled": scaled,
            "tail_variation": float(tail_variation)}


def capacity_blowup_bound(n: int, p: float, ds, lam_tol: float = 1e-8) -> dict:
    """Chain the window eigenvalue through the competitor bound over a ladder.

    Reports the fitted divergence exponent of the bound against d (n = 3) or
    against |log d| (n = 2), to compare with beta/2 scaling.
    """
    ds = np.asarray(ds, dtype=float)
    beta = n * (p - 1.0) / 2.0
    ball_vol = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)
    lams, bounds = [], []
    for d in ds:
        lam = small_window_lambda1(n, d, lam_tol)
        vol = ball_vol * (1.0 - d ** n)
        lams.append(lam)
        bounds.append(eig_competitor_bound(vol, lam, n, p))
    lams = np.array(lams); bounds = np.array(bounds)
    if n == 2:
        x = np.log(np.abs(np.log(ds)))
        expected = beta / 2.0
    else:
        x = np.log(ds)
        expected = -beta / 2.0 * (n - 2)
    slope = float(np.polyfit(x, np.log(bounds), 1)[0])
    return {"d": ds, "lambda1": lams, "bound": bounds, "fitted_exponent": slope,
            "expected_exponent": float(expected), "beta": beta}
