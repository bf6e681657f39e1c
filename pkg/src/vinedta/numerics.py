"""Numerical substrate: quadrature, special functions, derivatives, minimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes/weights on the open interval (0, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights must have equal length")


@dataclass
class OptimResult:
    argmin: np.ndarray
    objective: float
    hessian: np.ndarray
    converged: bool
    iterations: int


def gauss_legendre_01(n_q: int) -> QuadratureRule:
    """Gauss-Legendre rule mapped affinely from (-1, 1) to (0, 1).

    Nodes are zeros of the Legendre polynomial P_n, found by Newton
    iteration on the three-term recurrence; weights 2/((1-x^2) P_n'(x)^2).
    Exact for polynomials of degree <= 2*n_q - 1.
    """
    if n_q < 2:
        raise ValueError("n_q must be >= 2")
    n = n_q
    k = np.arange(n)
    # Tricomi initial guess for the roots of P_n on (-1, 1).
    x = np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        p_prev, p = np.ones_like(x), x.copy()
        for m in range(2, n + 1):
            p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p_prev, p = np.ones_like(x), x.copy()
    for m in range(2, n + 1):
        p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    nodes = 0.5 * (x[order] + 1.0)
    weights = 0.5 * w[order]
    return QuadratureRule(nodes=nodes, weights=weights)


def double_exponential_01(h: float = 0.05, t_max: float = 4.0) -> QuadratureRule:
    """Tanh-sinh (double-exponential) rule on (0, 1).

    Converges geometrically even for integrands with integrable endpoint
    singularities, where Gauss-Legendre only converges polynomially.
    Nodes are computed in sigmoid form, (1 + tanh(z))/2 = expit(2z), to
    keep full floating-point resolution near 0; far-tail nodes that
    round to exactly 0 or 1 carry negligible weight and are dropped.
    """
    if h <= 0 or t_max <= 0:
        raise ValueError("h and t_max must be positive")
    kmax = int(t_max / h)
    t = h * np.arange(-kmax, kmax + 1)
    nodes = special.expit(np.pi * np.sinh(t))
    weights = (0.5 * h * 0.5 * np.pi * np.cosh(t)
               / np.cosh(0.5 * np.pi * np.sinh(t)) ** 2)
    keep = (nodes > 0.0) & (nodes < 1.0)
    return QuadratureRule(nodes=nodes[keep], weights=weights[keep])


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / np.sqrt(2.0 * np.pi)


def std_normal_quantile(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("p must lie in the open interval (0, 1)")
    return special.ndtri(p)


def reg_inc_beta(a: float, b: float, x):
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0) or np.any(x_arr > 1.0):
        raise ValueError("x must lie in [0, 1]")
    return special.betainc(a, b, x)


def reg_inc_beta_inv(a: float, b: float, p):
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0.0) or np.any(p_arr > 1.0):
        raise ValueError("p must lie in [0, 1]")
    return special.betaincinv(a, b, p)


_DEBYE_RULE = None


def debye1(x: float) -> float:
    """First Debye function (1/x) * int_0^x t/(e^t - 1) dt.

    Evaluated by 50-point Gauss-Legendre on (0, x); for |x| < 1e-4 the
    Taylor series 1 - x/4 + x^2/36 avoids cancellation.  The x -> 0 limit
    is 1.
    """
    global _DEBYE_RULE
    if abs(x) < 1e-4:
        return 1.0 - x / 4.0 + x * x / 36.0
    if _DEBYE_RULE is None:
        _DEBYE_RULE = gauss_legendre_01(50)
    t = _DEBYE_RULE.nodes * x
    # t/(expm1(t)) is smooth through t=0 and well-behaved for t<0; for
    # very large t the overflow to inf correctly gives a 0 integrand.
    with np.errstate(over="ignore"):
        integrand = t / np.expm1(t)
    return float(np.sum(_DEBYE_RULE.weights * integrand))


def _grad_steps(x, scale):
    return scale * np.maximum(1.0, np.abs(x))


def numeric_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with per-coordinate step h*max(1,|x_i|)."""
    x = np.asarray(x, dtype=float)
    if h <= 0 or not np.isfinite(h):
        raise ValueError("step must be positive and finite")
    steps = _grad_steps(x, h)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = steps[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * steps[i])
    return g


def numeric_hessian(f, x, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian, symmetrized as (H + H^T)/2."""
    x = np.asarray(x, dtype=float)
    if h <= 0 or not np.isfinite(h):
        raise ValueError("step must be positive and finite")
    n = x.size
    steps = _grad_steps(x, h)
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        fpp = f(x + ei)
        fmm = f(x - ei)
        hess[i, i] = (fpp - 2.0 * f0 + fmm) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            fij = f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            hess[i, j] = hess[j, i] = fij / (4.0 * steps[i] * steps[j])
    return 0.5 * (hess + hess.T)


def minimize(
    f,
    x0,
    grad_tol: float = 1e-6,
    obj_tol: float = 1e-10,
    max_iters: int = 500,
    grad_step: float = 1e-6,
    hess_step: float = 1e-4,
) -> OptimResult:
    """BFGS quasi-Newton minimization with numerically estimated gradients.

    Armijo backtracking line search; non-finite objective values during the
    search are treated as unacceptable steps and backtracked over.  The
    returned Hessian is estimated by central finite differences at the
    final point.  Convergence: gradient infinity-norm < grad_tol or
    relative objective change < obj_tol.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = float(f(x))
    if not np.isfinite(fx):
        raise ValueError("objective must be finite at the starting point")

    def safe_f(z):
        val = f(z)
        return float(val) if np.isfinite(val) else np.inf

    n = x.size
    binv = np.eye(n)
    g = numeric_gradient(safe_f, x, grad_step)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        if not np.all(np.isfinite(g)):
            break
        if np.max(np.abs(g)) < grad_tol:
            converged = True
            break
        d = -binv @ g
        gtd = float(g @ d)
        if gtd >= 0.0:
            # Reset a corrupted curvature approximation to steepest descent.
            binv = np.eye(n)
            d = -g
            gtd = float(g @ d)
        alpha = 1.0
        fnew = np.inf
        for _ in range(60):
            fnew = safe_f(x + alpha * d)
            if fnew <= fx + 1e-4 * alpha * gtd:
                break
            alpha *= 0.5
        else:
            break  # line search failed; keep the best point found
        x_new = x + alpha * d
        g_new = numeric_gradient(safe_f, x_new, grad_step)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 and np.all(np.isfinite(y)):
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            binv = v @ binv @ v.T + rho * np.outer(s, s)
        rel_change = abs(fx - fnew) / max(1.0, abs(fx))
        x, fx, g = x_new, fnew, g_new
        if rel_change < obj_tol:
            converged = True
            break

    hessian = numeric_hessian(safe_f, x, hess_step)
    hessian = 0.5 * (hessian + hessian.T)
    return OptimResult(
        argmin=x,
        objective=fx,
        hessian=hessian,
        converged=converged and np.isfinite(fx),
        iterations=iterations,
    )
