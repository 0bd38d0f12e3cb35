"""Closed-loop and open-loop time integration with running-cost accumulation.

The integrator is an explicit embedded Runge-Kutta pair of orders 5(4)
(the Dormand-Prince coefficients) with proportional-integral step-size
control and cubic Hermite sampling between accepted steps.  The running
cost is carried as an augmented state so its quadrature inherits the
integrator's error control.  Finite-time escape ("blowup") is a reported
result, not an exception: feedback laws truncated at an unlucky degree
are expected to produce it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .albrekht import FeedbackLaw, eval_feedback
from .models import BenchmarkInstance

BLOWUP_SUP_NORM = 1.0e6
MIN_STEP_FRACTION = 1.0e-14
MAX_STEPS = 4_000_000

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_ALPHA = 0.7 / 5.0
_BETA = 0.4 / 5.0
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution with per-sample control and accumulated cost.

    ``status`` is one of ``completed``, ``blowup`` or ``error``; for the
    last two ``escape_time`` records when integration stopped.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    running_cost: np.ndarray
    status: str
    escape_time: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size == 0 or t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
            raise ValueError("times must strictly increase from 0")
        if np.any(np.diff(self.running_cost) < 0.0):
            raise ValueError("running cost must be nondecreasing")


def _initial_step(rhs, t0, y0, f0, T, rtol, atol):
    """Standard two-stage starting-step heuristic."""
    scale = atol + rtol * np.abs(y0)
    d0 = np.linalg.norm(y0 / scale) / np.sqrt(y0.size)
    d1 = np.linalg.norm(f0 / scale) / np.sqrt(y0.size)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, T)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / np.sqrt(y0.size) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, T)


def _integrate_raw(rhs, y0, T, rtol, atol, t_eval=None, sup_norm=None):
    """Adaptive DP54 loop.  Returns (times, states, status, escape_time).

    With ``t_eval`` the step size is clamped so accepted steps land exactly
    on every requested sample time; samples therefore carry the full
    integration accuracy instead of interpolation accuracy.  ``sup_norm``
    maps a state to the scalar checked against the blowup limit (defaults
    to the max norm of the whole vector).
    """
    if T <= 0:
        raise ValueError("final time must be positive")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    y0 = np.asarray(y0, dtype=float).reshape(-1)
    if sup_norm is None:
        sup_norm = lambda y: float(np.max(np.abs(y)))

    want_eval = t_eval is not None
    if want_eval:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.size == 0 or t_eval[0] != 0.0 or np.any(np.diff(t_eval) <= 0):
            raise ValueError("t_eval must strictly increase from 0")
        if t_eval[-1] > T:
            raise ValueError("t_eval must not exceed the final time")

    t = 0.0
    y = y0.copy()
    f = rhs(t, y)
    if not np.all(np.isfinite(f)):
        raise ValueError("right-hand side not finite at the initial state")

    ts = [0.0]
    ys = [y.copy()]
    next_eval = 1 if want_eval else 0

    h = _initial_step(rhs, t, y, f, T, rtol, atol)
    err_prev = 1.0
    status = "completed"
    escape = None
    stages = np.empty((7, y.size))
    rejected = False

    for _ in range(MAX_STEPS):
        if t >= T:
            break
        h_cap = T - t
        if want_eval and next_eval < t_eval.size:
            h_cap = min(h_cap, t_eval[next_eval] - t)
        h_step = min(h, h_cap)
        if h_step < MIN_STEP_FRACTION * T:
            status = "blowup"
            escape = t
            break

        stages[0] = f
        failed = False
        for i in range(1, 7):
            yi = y + h_step * (_A[i] @ stages[:i])
            stages[i] = rhs(t + _C[i] * h_step, yi)
            if not np.all(np.isfinite(stages[i])):
                failed = True
                break
        if failed:
            # retry with a smaller step; persistent non-finite values at
            # vanishing step size surface as blowup/error below
            if h_step < 4 * MIN_STEP_FRACTION * T:
                status = "error"
                escape = t
                break
            h = h_step * 0.25
            rejected = True
            continue

        y_new = y + h_step * (_B5 @ stages)
        err_vec = h_step * (_E @ stages)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.linalg.norm(err_vec / scale) / np.sqrt(y.size))

        if err <= 1.0:
            t, y, f = t + h_step, y_new, stages[6]  # FSAL final stage
            if want_eval:
                on_sample = (next_eval < t_eval.size
                             and t >= t_eval[next_eval] - 1e-14 * T)
                if on_sample:
                    next_eval += 1
                    ts.append(t_eval[next_eval - 1])
                    ys.append(y.copy())
            else:
                ts.append(t)
                ys.append(y.copy())
            if sup_norm(y) > BLOWUP_SUP_NORM:
                status = "blowup"
                escape = t
                if want_eval and (not ts or ts[-1] != t):
                    ts.append(t)
                    ys.append(y.copy())
                break
            fac = _SAFETY * err ** (-_ALPHA) * err_prev**_BETA if err > 0 else _FAC_MAX
            fac = min(1.0 if rejected else _FAC_MAX, max(_FAC_MIN, fac))
            h = h_step * fac
            err_prev = max(err, 1e-4)
            rejected = False
        else:
            h = h_step * min(1.0, max(_FAC_MIN, _SAFETY * err ** (-_ALPHA)))
            rejected = True
    else:
        status = "error"
        escape = t

    return np.asarray(ts), np.asarray(ys), status, escape


def integrate(rhs, x0, T, rtol=1e-9, atol=1e-11, t_eval=None) -> Trajectory:
    """Propagate ``xdot = rhs(t, x)`` from 0 to ``T`` adaptively.

    Dense output: with ``t_eval`` the trajectory is sampled at the given
    times; otherwise every accepted step is reported.
    """
    times, states, status, escape = _integrate_raw(rhs, x0, T, rtol, atol, t_eval)
    return Trajectory(
        times=times, states=states,
        controls=np.zeros((times.size, 0)),
        running_cost=np.zeros(times.size),
        status=status, escape_time=escape,
    )


def _augmented_rhs(instance: BenchmarkInstance, law: FeedbackLaw | None, up_to):
    """RHS of [state; accumulated cost] under a (possibly absent) feedback."""
    system = instance.system
    Q, R = instance.cost.Q, instance.cost.R
    A, B = system.A, system.B
    n = system.n
    N = system.N
    p = system.p
    gains = {}
    if law is not None:
        top = law.max_degree if up_to is None else min(up_to, law.max_degree)
        gains = {j: law.coefficients[j] for j in law.coefficients if j <= top}
    deg_top = max([p] + list(gains.keys()) + [1])

    def rhs(t, z):
        x = z[:n]
        u = gains[1] @ x if 1 in gains else np.zeros(B.shape[1])
        fx = A @ x
        mono = x
        for k in range(2, deg_top + 1):
            mono = (mono[:, None] * x[None, :]).reshape(-1)
            if k in N:
                fx = fx + N[k] @ mono
            if k in gains:
                u = u + gains[k] @ mono
        fx = fx + B @ u
        ell = x @ Q @ x + u @ R @ u
        out = np.empty(n + 1)
        out[:n] = fx
        out[n] = ell
        return out

    return rhs


def _finish_trajectory(instance, law, up_to, times, states_aug, status, escape):
    n = instance.system.n
    states = states_aug[:, :n]
    # the cost integrand is nonnegative, so its integral is monotone;
    # flatten any last-digit wiggle from signed quadrature weights
    cost = np.maximum.accumulate(states_aug[:, n])
    m = instance.system.m
    controls = np.zeros((times.size, m))
    if law is not None:
        for idx in range(times.size):
            controls[idx] = eval_feedback(law, states[idx], up_to_degree=up_to)
    traj = Trajectory(times=times, states=states, controls=controls,
                      running_cost=cost, status=status, escape_time=escape)
    total = float(cost[-1]) if status == "completed" else float("nan")
    return traj, total


def closed_loop_cost(instance: BenchmarkInstance, law: FeedbackLaw,
                     up_to_degree: int | None = None, T: float | None = None,
                     rtol: float = 1e-9, atol: float = 1e-11,
                     t_eval=None):
    """Simulate ``xdot = A x + B K(x) + f(x)`` and accumulate the running cost.

    Returns ``(Trajectory, total_cost)``; a blowup run reports
    ``total_cost = nan`` with the escape time on the trajectory.
    """
    if law.n != instance.system.n or law.m != instance.system.m:
        raise ValueError("feedback dimensions do not match the instance")
    T = instance.horizon if T is None else float(T)
    n = instance.system.n
    rhs = _augmented_rhs(instance, law, up_to_degree)
    z0 = np.concatenate([instance.x0, [0.0]])
    sup = lambda z: float(np.max(np.abs(z[:n])))
    times, states, status, escape = _integrate_raw(
        rhs, z0, T, rtol, atol, t_eval=t_eval, sup_norm=sup)
    return _finish_trajectory(instance, law, up_to_degree, times, states, status, escape)


def open_loop_cost(instance: BenchmarkInstance, T: float | None = None,
                   rtol: float = 1e-9, atol: float = 1e-11, t_eval=None):
    """Uncontrolled run (u = 0) with the state part of the running cost."""
    T = instance.horizon if T is None else float(T)
    n = instance.system.n
    rhs = _augmented_rhs(instance, None, None)
    z0 = np.concatenate([instance.x0, [0.0]])
    sup = lambda z: float(np.max(np.abs(z[:n])))
    times, states, status, escape = _integrate_raw(
        rhs, z0, T, rtol, atol, t_eval=t_eval, sup_norm=sup)
    return _finish_trajectory(instance, None, None, times, states, status, escape)
