"""Box-constrained L-BFGS for the white-box image attack.

The search direction comes from the usual two-loop recursion over the last
``m`` curvature pairs. Each trial point is projected back into the box, and
the step is halved until the projected point satisfies the Armijo
condition. The search stops early once no gradient component points into
the box. If no step along the quasi-Newton direction works, a projected
steepest-descent step is tried; if that fails too the search has converged.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, NamedTuple

import numpy as np

from ..vision import CnnModel, activation_norm_objective


class LbfgsResult(NamedTuple):
    x: np.ndarray
    loss: float
    initial_loss: float
    iterations: int
    fallbacks: int


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs_minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    lower: float = 0.0,
    upper: float = 1.0,
    steps: int = 200,
    m: int = 10,
    c1: float = 1e-4,
    step0: float = 1.0,
    max_halvings: int = 30,
    gtol: float = 1e-9,
) -> LbfgsResult:
    shape = np.shape(x0)
    x = np.clip(np.asarray(x0, dtype=np.float64).ravel(), lower, upper)

    def f(v):
        loss, grad = fun(v.reshape(shape))
        grad = np.asarray(grad, dtype=np.float64).ravel()
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise FloatingPointError("objective or gradient is not finite")
        return float(loss), grad

    fx, g = f(x)
    f0 = fx
    best_x, best_f = x.copy(), fx
    pairs: deque = deque(maxlen=m)
    fallbacks = 0
    it = 0
    for it in range(1, steps + 1):
        # gradient components that could still move inside the box
        free = ((g < 0) & (x < upper)) | ((g > 0) & (x > lower))
        if not np.any(np.abs(g[free]) > gtol):
            it -= 1
            break
        moved = False
        for direction in ("lbfgs", "steepest"):
            d = _two_loop(g, list(pairs)) if direction == "lbfgs" else -g
            if direction == "lbfgs" and g @ d >= 0:
                continue
            alpha = step0
            for _ in range(max_halvings):
                x_new = np.clip(x + alpha * d, lower, upper)
                step = x_new - x
                if not step.any():
                    break
                f_new, g_new = f(x_new)
                if f_new <= fx + c1 * (g @ step):
                    moved = True
                    break
                alpha *= 0.5
            if moved:
                if direction == "steepest":
                    fallbacks += 1
                break
        if not moved:
            break
        s, y = x_new - x, g_new - g
        sy = s @ y
        if sy > 1e-12:
            pairs.append((s, y, 1.0 / sy))
        x, fx, g = x_new, f_new, g_new
        if fx < best_f:
            best_x, best_f = x.copy(), fx
    return LbfgsResult(best_x.reshape(shape), best_f, f0, it, fallbacks)


def lbfgs_attack(model: CnnModel, init, steps: int = 200, m: int = 10, c1: float = 1e-4, step0: float = 1.0) -> np.ndarray:
    """Image in [0, 1] that maximizes the summed L2 norms of all layer outputs."""
    res = lbfgs_minimize(lambda v: activation_norm_objective(model, v), np.asarray(init, dtype=np.float64), 0.0, 1.0, steps, m, c1, step0)
    return res.x
