"""Reduced multi-bubble potential, interaction kernel, and critical-point search.

The finite-dimensional model evaluated here is the displayed truncation

    F_k(x, eps) = k + (n-1) sum_i (rho H(x_i) eps_i + eps_i^2 Rmass(x_i))
                    + (n-1) sum_{i != j} c (eps_i eps_j)^((n-2)/2) G(x_i, x_j)

of the k-bubble quotient power (J_k/S*)^(n-1); its remainder is dropped by
design, so every claim in this module is about the truncated model. The
interaction kernel carries the singular law a d^(2-n) (a d^(-1) in n = 3)
plus a user-supplied smooth part; the kernel units a and the interaction
constant c are model units (the analysis fixes neither number).

Center-only potential: W_k(x) = sum_i Rmass(x_i); its critical points are
located by a projected Newton iteration with a log-barrier on pairwise
distances (the kernel's collision barrier), with barrier continuation to
zero and a final polish on the bare potential.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

__all__ = [
    "CollisionError", "CircleDomain", "TorusDomain", "SphereDomain",
    "ExpressionField", "GridField", "InteractionKernel", "Configuration",
    "center_potential", "reduced_functional", "scale_jacobian", "ScaleJacobianReport",
    "critical_point_search", "CriticalPoint", "quantized_levels",
    "balance_law_residual",
]


class CollisionError(ValueError):
    """Two centers coincide; the interaction kernel blows up."""


# --------------------------------------------------------------------------
# parameter domains
# --------------------------------------------------------------------------

def _wrap(delta):
    return (np.asarray(delta) + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class CircleDomain:
    """Unit circle parametrized by an angle; geodesic distance on radius 1."""
    dim: int = 1

    def distance(self, a, b) -> float:
        return float(np.abs(_wrap(np.asarray(a) - np.asarray(b))).item())

    def dist_grad(self, a, b):
        w = float(_wrap(np.asarray(a) - np.asarray(b)).item())
        if w == 0.0:
            raise CollisionError("coincident centers")
        return abs(w), np.array([math.copysign(1.0, w)])


@dataclass(frozen=True)
class TorusDomain:
    """Flat torus (product of unit circles)."""
    dim: int = 2

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(_wrap(np.asarray(a) - np.asarray(b))))

    def dist_grad(self, a, b):
        w = _wrap(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        d = float(np.linalg.norm(w))
        if d == 0.0:
            raise CollisionError("coincident centers")
        return d, w / d


@dataclass(frozen=True)
class SphereDomain:
    """Round unit sphere; points are unit 3-vectors."""
    dim: int = 3

    def distance(self, a, b) -> float:
        u = np.asarray(a, dtype=float); v = np.asarray(b, dtype=float)
        u = u / np.linalg.norm(u); v = v / np.linalg.norm(v)
        return float(np.arccos(np.clip(u @ v, -1.0, 1.0)))

    def dist_grad(self, a, b):
        raise NotImplementedError("search runs on circle/torus parametrizations")


# --------------------------------------------------------------------------
# fields on parameter domains
# --------------------------------------------------------------------------

_EVAL_NS = {name: getattr(np, name) for name in
            ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh",
             "arctan", "arcsin", "arccos")}
_EVAL_NS["pi"] = math.pi


class ExpressionField:
    """Scalar field from a numpy expression in theta (or theta1..thetad).

    Derivatives by central differences (the search declares convergence on
    the same finite-difference gradient it iterates with).
    """

    def __init__(self, expr: str, dim: int = 1, h: float = 1e-5):
        self.expr = expr
        self.dim = dim
        self.h = h
        code = compile(expr, "<field>", "eval")
        for name in code.co_names:
            if name not in _EVAL_NS and not name.startswith("theta"):
                raise ValueError(f"disallowed name in field expression: {name}")
        self._code = code

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ns = dict(_EVAL_NS)
        ns["theta"] = x[0]
        for i in range(self.dim):
            ns[f"theta{i + 1}"] = x[i]
        return float(eval(self._code, {"__builtins__": {}}, ns))

    def grad(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = np.zeros(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim); e[i] = self.h
            g[i] = (self.value(x + e) - self.value(x - e)) / (2.0 * self.h)
        return g

    def hess(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        H = np.zeros((self.dim, self.dim))
        h = self.h ** 0.5 * 1e-2 + self.h
        for i in range(self.dim):
            ei = np.zeros(self.dim); ei[i] = h
            for j in range(i, self.dim):
                ej = np.zeros(self.dim); ej[j] = h
                H[i, j] = H[j, i] = (
                    self.value(x + ei + ej) - self.value(x + ei - ej)
                    - self.value(x - ei + ej) + self.value(x - ei - ej)
                ) / (4.0 * h * h)
        return H


class GridField:
    """Periodic field from samples on a uniform angle grid (cubic spline)."""

    def __init__(self, samples, dim: int = 1):
        from scipy.interpolate import CubicSpline
        if dim != 1:
            raise NotImplementedError("gridded fields are 1D (circle) for now")
        samples = np.asarray(samples, dtype=float)
        theta = np.linspace(0.0, 2.0 * math.pi, samples.size + 1)
        vals = np.append(samples, samples[0])
        self._sp = CubicSpline(theta, vals, bc_type="periodic")
        self._dsp = self._sp.derivative()
        self._d2sp = self._dsp.derivative()
        self.dim = 1

    def value(self, x) -> float:
        t = float(np.atleast_1d(x)[0]) % (2.0 * math.pi)
        return float(self._sp(t))

    def grad(self, x) -> np.ndarray:
        t = float(np.atleast_1d(x)[0]) % (2.0 * math.pi)
        return np.array([float(self._dsp(t))])

    def hess(self, x) -> np.ndarray:
        t = float(np.atleast_1d(x)[0]) % (2.0 * math.pi)
        return np.array([[float(self._d2sp(t))]])


# --------------------------------------------------------------------------
# interaction kernel
# --------------------------------------------------------------------------

@dataclass
class InteractionKernel:
    """Renormalized boundary-to-boundary kernel: positive singular part plus
    an optional symmetric smooth part (geometry-dependent, user supplied)."""
    n: int
    a: float = 1.0                       # singular coefficient, model units
    smooth: Optional[Callable] = None    # smooth(x, y) -> float, symmetric

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("kernel defined for n >= 3")
        if self.a <= 0:
            raise ValueError("singular coefficient must be positive")

    @property
    def exponent(self) -> float:
        return 1.0 if self.n == 3 else float(self.n - 2)

    def value(self, d: float, x=None, y=None) -> float:
        if d <= 0.0:
            raise CollisionError("kernel evaluated at zero separation")
        out = self.a * d ** (-self.exponent)
        if self.smooth is not None:
            out += self.smooth(x, y)
        return out

    def deriv(self, d: float) -> float:
        if d <= 0.0:
            raise CollisionError("kernel derivative at zero separation")
        return -self.exponent * self.a * d ** (-self.exponent - 1.0)


# --------------------------------------------------------------------------
# configurations
# --------------------------------------------------------------------------

@dataclass
class Configuration:
    """Ordered k-tuple of boundary centers and scales on a parameter domain."""
    domain: object
    centers: np.ndarray                  # (k, dim)
    scales: np.ndarray                   # (k,)
    mass_field: object = None            # Rmass(x) on the domain
    h_field: object = None               # H(x) on the domain

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.scales = np.atleast_1d(np.asarray(self.scales, dtype=float))
        if self.centers.shape[0] != self.scales.size:
            raise ValueError("centers/scales length mismatch")
        if np.any(self.scales <= 0):
            raise ValueError("scales must be positive")

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    def pair_distances(self) -> dict:
        return {(i, j): self.domain.distance(self.centers[i], self.centers[j])
                for i, j in combinations(range(self.k), 2)}

    def separation_diagnostics(self) -> dict:
        if self.k < 2:
            return {"min_distance": math.inf, "min_ratio": math.inf}
        dists = self.pair_distances()
        min_d = min(dists.values())
        min_ratio = min(d / (self.scales[i] + self.scales[j])
                        for (i, j), d in dists.items())
        return {"min_distance": min_d, "min_ratio": min_ratio}

    def mass_at(self, i: int) -> float:
        return self.mass_field.value(self.centers[i]) if self.mass_field else 0.0

    def h_at(self, i: int) -> float:
        return self.h_field.value(self.centers[i]) if self.h_field else 0.0


def center_potential(config: Configuration) -> float:
    """W_k = sum_i Rmass(x_i)."""
    return float(sum(config.mass_at(i) for i in range(config.k)))


def _interaction_sum(config: Configuration, kernel: InteractionKernel,
                     alpha: float) -> float:
    out = 0.0
    for (i, j), d in config.pair_distances().items():
        if d == 0.0:
            raise CollisionError(f"centers {i} and {j} collide")
        gij = kernel.value(d, config.centers[i], config.centers[j])
        out += 2.0 * (config.scales[i] * config.scales[j]) ** alpha * gij
    return out


def reduced_functional(config: Configuration, kernel: InteractionKernel,
                       constants, lambda_min: float = 2.0) -> float:
    """Truncated F_k = (J_k/S*)^(n-1); warns below the separation threshold."""
    n = constants.n
    diag = config.separation_diagnostics()
    if diag["min_ratio"] < lambda_min:
        warnings.warn(f"separation ratio {diag['min_ratio']:.3g} below "
                      f"Lambda = {lambda_min}; truncation error uncontrolled",
                      stacklevel=2)
    alpha = (n - 2) / 2.0
    rho = constants.rho_conf
    self_terms = sum(rho * config.h_at(i) * config.scales[i]
                     + config.scales[i] ** 2 * config.mass_at(i)
                     for i in range(config.k))
    inter = constants.c_conf * _interaction_sum(config, kernel, alpha)
    return float(config.k + (n - 1) * (self_terms + inter))


@dataclass
class ScaleJacobianReport:
    matrix: np.ndarray
    diagonal: np.ndarray
    gershgorin_radii: np.ndarray
    diagonally_dominant: bool
    invertible: bool
    limit_diagonal: np.ndarray          # 2 S* k^(-2/q) Rmass(x_i)


def scale_jacobian(config: Configuration, kernel: InteractionKernel,
                   constants) -> ScaleJacobianReport:
    """Analytic eps-Jacobian of the scale-stationarity system of the truncation.

    F_i = d/d eps_i of J_k = S* F_k^(1/(n-1)); returns d F_i / d eps_j with a
    Gershgorin dominance report. As eps -> 0 the diagonal tends to
    2 S* k^(-2/q) Rmass(x_i).
    """
    n = constants.n
    k = config.k
    for i in range(k):
        if abs(config.h_at(i)) > 1e-12:
            warnings.warn("scale Jacobian structure assumes H = 0 at the centers",
                          stacklevel=2)
            break
    alpha = (n - 2) / 2.0
    gamma = 1.0 / (n - 1)
    S = constants.S_star
    rho = constants.rho_conf
    c = constants.c_conf
    eps = config.scales
    G = np.zeros((k, k))
    for (i, j), d in config.pair_distances().items():
        if d == 0.0:
            raise CollisionError(f"centers {i} and {j} collide")
        G[i, j] = G[j, i] = kernel.value(d, config.centers[i], config.centers[j])

    F = config.k + (n - 1) * sum(rho * config.h_at(i) * eps[i]
                                 + eps[i] ** 2 * config.mass_at(i)
                                 for i in range(k))
    F += (n - 1) * c * _interaction_sum(config, kernel, alpha)

    dF = np.zeros(k)
    for i in range(k):
        inter = sum(eps[j] ** alpha * G[i, j] for j in range(k) if j != i)
        dF[i] = (n - 1) * (rho * config.h_at(i) + 2.0 * eps[i] * config.mass_at(i)
                           + 2.0 * c * alpha * eps[i] ** (alpha - 1.0) * inter)

    d2F = np.zeros((k, k))
    for i in range(k):
        inter = sum(eps[j] ** alpha * G[i, j] for j in range(k) if j != i)
        d2F[i, i] = (n - 1) * (2.0 * config.mass_at(i)
                               + 2.0 * c * alpha * (alpha - 1.0)
                               * eps[i] ** (alpha - 2.0) * inter)
        for j in range(k):
            if j != i:
                d2F[i, j] = (n - 1) * 2.0 * c * alpha ** 2 * (eps[i] * eps[j]) ** (alpha - 1.0) * G[i, j]

    # chain rule through J_k = S* F^gamma
    M = S * gamma * (F ** (gamma - 1.0) * d2F
                     + (gamma - 1.0) * F ** (gamma - 2.0) * np.outer(dF, dF))
    diag = np.diag(M)
    radii = np.sum(np.abs(M), axis=1) - np.abs(diag)
    dominant = bool(np.all(np.abs(diag) > radii))
    limit = np.array([2.0 * S * config.k ** (-(n - 2.0) / (n - 1.0)) * config.mass_at(i)
                      for i in range(k)])
    return ScaleJacobianReport(M, diag.copy(), radii, dominant,
                               dominant and bool(np.all(np.abs(diag) > 0)), limit)


def quantized_levels(k: int, n: int, S_star: float) -> float:
    """Energy level of a k-bubble configuration: k^(1/(n-1)) S*."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    return float(k ** (1.0 / (n - 1)) * S_star)


def balance_law_residual(config: Configuration, kernel: InteractionKernel,
                         constants) -> np.ndarray:
    """Per-center rho grad H(x_i) + 2 c sum_j eps_i^(a-1) eps_j^a grad_1 G."""
    n = constants.n
    alpha = (n - 2) / 2.0
    rho = constants.rho_conf
    c = constants.c_conf
    k = config.k
    dim = config.centers.shape[1]
    out = np.zeros((k, dim))
    for i in range(k):
        if config.h_field is not None:
            out[i] += rho * config.h_field.grad(config.centers[i])
        for j in range(k):
            if j == i:
                continue
            d, dgrad = config.domain.dist_grad(config.centers[i], config.centers[j])
            out[i] += (2.0 * c * config.scales[i] ** (alpha - 1.0)
                       * config.scales[j] ** alpha * kernel.deriv(d) * dgrad)
    return out


# --------------------------------------------------------------------------
# critical-point search for the center-only potential
# --------------------------------------------------------------------------

@dataclass
class CriticalPoint:
    centers: np.ndarray
    value: float
    grad_norm: float
    inertia: tuple                       # (n_negative, n_zero, n_positive)
    hessian: np.ndarray
    converged: bool
    degenerate: bool = False


def _potential_parts(field, domain, k: int, dim: int):
    def W(theta):
        th = theta.reshape(k, dim)
        return sum(field.value(th[i]) for i in range(k))

    def gradW(theta):
        th = theta.reshape(k, dim)
        return np.concatenate([field.grad(th[i]) for i in range(k)])

    def hessW(theta):
        th = theta.reshape(k, dim)
        H = np.zeros((k * dim, k * dim))
        for i in range(k):
            H[i * dim:(i + 1) * dim, i * dim:(i + 1) * dim] = field.hess(th[i])
        return H

    return W, gradW, hessW


def _barrier_parts(domain, k: int, dim: int, mu: float):
    def grad(theta):
        th = theta.reshape(k, dim)
        g = np.zeros((k, dim))
        for i, j in combinations(range(k), 2):
            d, dg = domain.dist_grad(th[i], th[j])
            g[i] -= mu * dg / d
            g[j] += mu * dg / d
        return g.ravel()
    return grad


def critical_point_search(field, k: int, domain=None, seeds: int = 64,
                          seed: int = 0, grad_tol: float = 1e-8,
                          max_iter: int = 200, merge_tol: float = 1e-6,
                          barrier_mu: tuple = (1e-2, 1e-4, 0.0),
                          min_separation: float = 1e-3) -> list:
    """Multi-seed projected Newton search for critical points of W_k.

    The log-barrier keeps iterates off the collision set while mu > 0; the
    final mu = 0 stage polishes on the bare potential and the convergence
    check ||grad W_k|| <= grad_tol is barrier-free. Results are merged up to
    relabeling of the centers (permutation + distance merge_tol).
    """
    domain = domain or CircleDomain()
    dim = domain.dim
    W, gradW, hessW = _potential_parts(field, domain, k, dim)

    # constant-field degeneracy: the gradient vanishes identically
    rng = np.random.default_rng(seed)
    probes = rng.uniform(0.0, 2.0 * math.pi, size=(8, k * dim))
    if max(np.linalg.norm(gradW(p)) for p in probes) < 1e-12:
        theta = probes[0]
        Hm = hessW(theta)
        return [CriticalPoint(theta.reshape(k, dim) % (2 * math.pi), W(theta), 0.0,
                              _inertia(Hm), Hm, True, degenerate=True)]

    found = []
    for _ in range(seeds):
        theta = rng.uniform(0.0, 2.0 * math.pi, size=k * dim)
        ok = True
        for mu in barrier_mu:
            bgrad = _barrier_parts(domain, k, dim, mu) if (mu > 0 and k > 1) else None
            for _ in range(max_iter):
                g = gradW(theta)
                if bgrad is not None:
                    g = g + bgrad(theta)
                if np.linalg.norm(g) <= (grad_tol if mu == 0 else 1e-6):
                    break
                Hm = hessW(theta)
                if bgrad is not None:
                    # curvature of the barrier, finite-difference (cheap, k small)
                    h = 1e-6
                    Hb = np.zeros_like(Hm)
                    for a in range(k * dim):
                        e = np.zeros(k * dim); e[a] = h
                        Hb[:, a] = (bgrad(theta + e) - bgrad(theta - e)) / (2 * h)
                    Hm = Hm + Hb
                try:
                    step = np.linalg.solve(Hm + 1e-12 * np.eye(k * dim), -g)
                except np.linalg.LinAlgError:
                    ok = False
                    break
                if np.linalg.norm(step) > 1.0:
                    step *= 1.0 / np.linalg.norm(step)
                theta = theta + step
                try:
                    if k > 1:
                        th = theta.reshape(k, dim)
                        if min(domain.distance(th[i], th[j])
                               for i, j in combinations(range(k), 2)) < min_separation:
                            ok = False
                            break
                except CollisionError:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        gn = float(np.linalg.norm(gradW(theta)))
        Hm = hessW(theta)
        cp = CriticalPoint((theta.reshape(k, dim)) % (2 * math.pi), W(theta), gn,
                           _inertia(Hm), Hm, gn <= grad_tol)
        if cp.converged:
            found.append(cp)

    return _merge(found, domain, merge_tol)


def _inertia(H: np.ndarray, tol: float = 1e-7) -> tuple:
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    return (int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol)),
            int(np.sum(ev > tol)))


def _canonical(centers: np.ndarray, tol: float) -> np.ndarray:
    c = centers % (2.0 * math.pi)
    c[np.abs(c - 2.0 * math.pi) <= 100.0 * tol] -= 2.0 * math.pi  # wrap ~2pi to ~0
    return c[np.lexsort(c.T[::-1])]


def _merge(points: list, domain, tol: float) -> list:
    out = []
    for cp in points:
        canon = _canonical(cp.centers, tol)
        dup = False
        for other in out:
            oc = _canonical(other.centers, tol)
            if canon.shape == oc.shape and all(
                    domain.distance(a, b) <= tol for a, b in zip(canon, oc)):
                dup = True
                break
        if not dup:
            out.append(cp)
    out.sort(key=lambda c: c.value)
    return out
