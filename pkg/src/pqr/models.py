"""Benchmark regulator instances: Lorenz, van der Pol ring, reactive Burgers.

Each constructor returns a :class:`BenchmarkInstance` bundling the
polynomial system, the quadratic weights, the nominal initial state and
the simulation horizon used for the closed-loop cost studies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .albrekht import PolynomialSystem, QuadraticCost
from .errors import ConfigError


@dataclass(frozen=True)
class BenchmarkInstance:
    system: PolynomialSystem
    cost: QuadraticCost
    x0: np.ndarray
    horizon: float
    label: str

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != self.system.n:
            raise ConfigError(
                f"x0 length {x0.size} does not match state dimension {self.system.n}"
            )
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        object.__setattr__(self, "x0", x0)


def lorenz() -> BenchmarkInstance:
    """Controlled Lorenz system, actuated through the first equation.

    The quadratic drift couples ``-x1*x3`` into the second state and
    ``+x1*x2`` into the third, each entry split evenly over the two index
    orders of the Kronecker monomial.
    """
    A = np.array([
        [-10.0, 10.0, 0.0],
        [28.0, -1.0, 0.0],
        [0.0, 0.0, -8.0 / 3.0],
    ])
    B = np.array([[1.0], [0.0], [0.0]])
    N2 = np.zeros((3, 9))
    # columns are 0-based positions of (i1, i2) in the n**2 layout
    N2[1, 2] = N2[1, 6] = -0.5   # x1*x3 and x3*x1
    N2[2, 1] = N2[2, 3] = 0.5    # x1*x2 and x2*x1
    system = PolynomialSystem(A=A, B=B, N={2: N2})
    cost = QuadraticCost(Q=np.eye(3), R=np.eye(1))
    return BenchmarkInstance(
        system=system, cost=cost, x0=np.array([10.0, 10.0, 10.0]),
        horizon=50.0, label="lorenz",
    )


def vdp_ring(g: int = 4, actuated_nodes=(1, 2), y0: float = 0.3,
             q_scale: float = 1.0, r_scale: float = 1.0,
             horizon: float = 50.0) -> BenchmarkInstance:
    """Ring of ``g`` van der Pol oscillators with forcing at chosen nodes.

    Second-order dynamics ``ydd_i = -y_i + yd_i + (y_{i-1} - 2 y_i +
    y_{i+1}) - y_i^2 yd_i + b_i u_i`` with cyclic indices, written first
    order with states ordered positions-then-velocities (n = 2g).  The
    cubic coefficient is split as -1/3 over the three index orders of
    ``y_i^2 yd_i``.  Weights default to identity.
    """
    g = int(g)
    if g < 2:
        raise ConfigError("vdp ring needs at least two oscillators")
    nodes = sorted(set(int(i) for i in actuated_nodes))
    if not nodes:
        raise ConfigError("at least one actuated node required")
    if nodes[0] < 1 or nodes[-1] > g:
        raise ConfigError(f"actuated nodes must lie in 1..{g}, got {nodes}")
    n = 2 * g
    m = len(nodes)

    A = np.zeros((n, n))
    A[:g, g:] = np.eye(g)
    for i in range(g):
        A[g + i, i] += -3.0
        A[g + i, (i - 1) % g] += 1.0
        A[g + i, (i + 1) % g] += 1.0
        A[g + i, g + i] = 1.0

    N3 = np.zeros((n, n**3))
    for i in range(g):
        iy, idy = i, g + i
        for a, b, c in ((iy, iy, idy), (iy, idy, iy), (idy, iy, iy)):
            N3[idy, (a * n + b) * n + c] += -1.0 / 3.0

    B = np.zeros((n, m))
    for col, node in enumerate(nodes):
        B[g + node - 1, col] = 1.0

    x0 = np.zeros(n)
    x0[:g] = float(y0)

    system = PolynomialSystem(A=A, B=B, N={3: N3})
    cost = QuadraticCost(Q=float(q_scale) * np.eye(n), R=float(r_scale) * np.eye(m))
    label = f"vdp-g{g}-nodes{','.join(str(i) for i in nodes)}"
    return BenchmarkInstance(system=system, cost=cost, x0=x0,
                             horizon=float(horizon), label=label)


def _hat_integral_on_patch(n_elements: int, a: float, b: float) -> np.ndarray:
    """Exact integrals of all periodic hat functions over [a, b]."""
    n = n_elements
    h = 1.0 / n
    out = np.zeros(n)
    for e in range(n):
        lo = max(a, e * h)
        hi = min(b, (e + 1) * h)
        if hi <= lo:
            continue
        t0 = (lo - e * h) / h
        t1 = (hi - e * h) / h
        up = h * (t1**2 - t0**2) / 2.0
        down = h * (t1 - t0) - up
        out[e % n] += down
        out[(e + 1) % n] += up
    return out


def burgers_fem(n_elements: int = 16, eps: float = 0.005, alpha: float = 0.3,
                m: int = 3, horizon: float = 200.0,
                r_coeff: float = 10.0) -> BenchmarkInstance:
    """Reactive Burgers equation on the periodic unit interval, piecewise
    linear elements.

    ``zdot = eps z_xx - 1/2 (z^2)_x + alpha z + sum_k chi_[(k-1)/m, k/m] u_k``
    discretized with ``n_elements`` hat functions at nodes i/n.  The
    convection matrix comes from the integrated-by-parts weak form
    ``+1/2 int z^2 phi_i' dx``; the input matrix integrates each hat over
    its patch exactly, including partial element overlaps.  The state
    weight is the mass matrix (the L2 norm of the field), the control
    weight ``r_coeff * I``.  Mass, stiffness and convection are converted
    to standard form through mass-matrix solves.
    """
    n = int(n_elements)
    if n < 3:
        raise ConfigError("burgers needs at least 3 elements")
    m = int(m)
    if m < 1 or m > n:
        raise ConfigError("control patch count must be in 1..n_elements")
    if not eps > 0:
        raise ConfigError("diffusion coefficient must be positive")
    h = 1.0 / n

    M = np.zeros((n, n))
    K = np.zeros((n, n))
    for i in range(n):
        M[i, i] = 4.0 * h / 6.0
        M[i, (i - 1) % n] += h / 6.0
        M[i, (i + 1) % n] += h / 6.0
        K[i, i] = 2.0 / h
        K[i, (i - 1) % n] += -1.0 / h
        K[i, (i + 1) % n] += -1.0 / h

    N2w = np.zeros((n, n**2))
    for i in range(n):
        im, ip = (i - 1) % n, (i + 1) % n
        N2w[i, im * n + im] += 1.0 / 6.0
        N2w[i, im * n + i] += 1.0 / 12.0
        N2w[i, i * n + im] += 1.0 / 12.0
        N2w[i, i * n + ip] += -1.0 / 12.0
        N2w[i, ip * n + i] += -1.0 / 12.0
        N2w[i, ip * n + ip] += -1.0 / 6.0

    Bw = np.zeros((n, m))
    for k in range(m):
        Bw[:, k] = _hat_integral_on_patch(n, k / m, (k + 1) / m)

    cf = scipy.linalg.cho_factor(M)
    A = scipy.linalg.cho_solve(cf, -eps * K + alpha * M)
    N2 = scipy.linalg.cho_solve(cf, N2w)
    B = scipy.linalg.cho_solve(cf, Bw)

    nodes_x = np.arange(n) * h
    x0 = np.where((nodes_x > 0.0) & (nodes_x < 0.5),
                  0.5 * np.sin(2.0 * np.pi * nodes_x) ** 2, 0.0)

    system = PolynomialSystem(A=A, B=B, N={2: N2})
    cost = QuadraticCost(Q=M, R=float(r_coeff) * np.eye(m))
    return BenchmarkInstance(system=system, cost=cost, x0=x0,
                             horizon=float(horizon),
                             label=f"burgers-n{n}-m{m}")
