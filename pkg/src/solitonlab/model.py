"""Problem instance, phase-space vector field and scalar diagnostics.

The state of the flow is a point (W, X_1..X_r, Y_1..Y_r) packed into a flat
array in that order.  W is the reciprocal of the weighted mean curvature of
the constant-radius hypersurfaces, X_i carries the logarithmic derivative of
the i-th warping function and Y_i its reciprocal size.  The augmented state
appends (t, u, log g_1..log g_r) so that arclength, soliton potential and
metric coefficients can be read off a single integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelConfig",
    "PhaseState",
    "AugmentedState",
    "Quantities",
    "validate_config",
    "vector_field",
    "augmented_field",
    "quantities",
    "quantities_table",
    "quantity_rates",
    "jacobian",
    "grad_Q",
    "grad_H",
]

# C is reported only while W^2 stays above this floor; below it the
# conserved combination would overflow before it means anything.
C_FLOOR = 1e-300


@dataclass(frozen=True)
class ModelConfig:
    """A problem instance: factor dimensions, Einstein constants, expansion rate.

    The first factor is the collapsing sphere; its Einstein constant is pinned
    to d_1 - 1 so that the collapse is smooth.  beta = 1/sqrt(d_1) and
    beta_hat = sqrt(1 - beta^2) locate the collapse critical point.
    """

    dims: tuple[int, ...]
    lambdas: tuple[float, ...]
    epsilon: float

    def __post_init__(self):
        if len(self.dims) == 0:
            raise ValueError("dims must contain at least one factor")
        if len(self.lambdas) != len(self.dims):
            raise ValueError("lambdas must match dims in length")
        if self.dims[0] < 2:
            raise ValueError("d_1 must be at least 2 (collapsing sphere factor)")
        if any(d < 1 for d in self.dims):
            raise ValueError("all factor dimensions must be positive integers")
        if any(lam <= 0 for lam in self.lambdas):
            raise ValueError("all Einstein constants must be positive")
        if abs(self.lambdas[0] - (self.dims[0] - 1)) > 1e-12:
            raise ValueError("lambda_1 must equal d_1 - 1 (normalisation)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive (expanding case)")

    @property
    def r(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return int(sum(self.dims))

    @property
    def beta(self) -> float:
        return 1.0 / math.sqrt(self.dims[0])

    @property
    def beta_hat(self) -> float:
        return math.sqrt(1.0 - 1.0 / self.dims[0])

    @property
    def sqrt_d(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.dims, dtype=float))

    @property
    def phase_dim(self) -> int:
        return 2 * self.r + 1

    @property
    def aug_dim(self) -> int:
        return 3 * self.r + 3


def validate_config(dims, epsilon, lambdas=None) -> ModelConfig:
    """Build a ModelConfig from raw inputs, filling in defaulted constants.

    lambda_1 is always forced to d_1 - 1; remaining constants default to 1
    when not supplied.  Rejects empty dims, d_1 < 2, nonpositive dimensions,
    nonpositive Einstein constants and nonpositive epsilon.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0:
        raise ValueError("dims must contain at least one factor")
    if dims[0] < 2:
        raise ValueError("d_1 must be at least 2 (collapsing sphere factor)")
    if any(d < 1 for d in dims):
        raise ValueError("all factor dimensions must be positive integers")
    if lambdas is None:
        lams = [1.0] * len(dims)
    else:
        lams = [float(l) for l in lambdas]
        if len(lams) != len(dims):
            raise ValueError("lambdas must match dims in length")
        if any(l <= 0 for l in lams):
            raise ValueError("all Einstein constants must be positive")
    lams[0] = float(dims[0] - 1)
    return ModelConfig(dims=dims, lambdas=tuple(lams), epsilon=float(epsilon))


@dataclass(frozen=True)
class PhaseState:
    """Labelled view of a phase point.  Arrays are treated as immutable."""

    W: float
    X: np.ndarray
    Y: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.W], self.X, self.Y))

    @staticmethod
    def from_array(z: np.ndarray) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        r = (z.size - 1) // 2
        return PhaseState(W=float(z[0]), X=z[1 : r + 1].copy(), Y=z[r + 1 :].copy())


@dataclass(frozen=True)
class AugmentedState:
    """Phase point extended by arclength t, potential u and log metric coefficients."""

    s: float
    phase: PhaseState
    t: float
    u: float
    log_g: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.phase.as_array(), [self.t, self.u], self.log_g))

    @staticmethod
    def from_array(s: float, y: np.ndarray) -> "AugmentedState":
        y = np.asarray(y, dtype=float)
        r = (y.size - 3) // 3
        return AugmentedState(
            s=float(s),
            phase=PhaseState.from_array(y[: 2 * r + 1]),
            t=float(y[2 * r + 1]),
            u=float(y[2 * r + 2]),
            log_g=y[2 * r + 3 :].copy(),
        )


@dataclass(frozen=True)
class Quantities:
    """Scalar diagnostics of a phase point (and potential value u for C)."""

    L: float
    H: float
    Q: float
    G: float
    J: float
    C: float


def _phase_array(state) -> np.ndarray:
    if isinstance(state, PhaseState):
        return state.as_array()
    if isinstance(state, AugmentedState):
        return state.phase.as_array()
    return np.asarray(state, dtype=float)


def _split(z: np.ndarray, r: int):
    return z[0], z[1 : r + 1], z[r + 1 : 2 * r + 1]


# L = sum X^2 + sum Y^2 - 1 cancels to ~|Q(start)| ~ 1e-12 near the collapse
# seed; a plain float64 sum would leave C = L/W^2 with only a few significant
# digits there.  The squares are therefore accumulated in double-double
# arithmetic (Dekker products, Neumaier summation), which keeps the absolute
# error of L near 1e-32 per term.
_SPLITTER = 134217729.0  # 2**27 + 1


def _two_prod(a, b):
    p = a * b
    aa = a * _SPLITTER
    a_hi = aa - (aa - a)
    a_lo = a - a_hi
    bb = b * _SPLITTER
    b_hi = bb - (bb - b)
    b_lo = b - b_hi
    err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, err


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _compensated_L(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """sum(X^2) + sum(Y^2) - 1 per row, immune to the near-seed cancellation."""
    acc = np.full(X.shape[0], -1.0)
    comp = np.zeros(X.shape[0])
    for block in (X, Y):
        for j in range(block.shape[1]):
            p, e = _two_prod(block[:, j], block[:, j])
            acc, e2 = _two_sum(acc, p)
            comp = comp + (e + e2)
    return acc + comp


def vector_field(state, config: ModelConfig) -> np.ndarray:
    """Right-hand side of the phase flow at a point, packed (W', X', Y')."""
    z = _phase_array(state)
    r = config.r
    W, X, Y = _split(z, r)
    sd = config.sqrt_d
    eps = config.epsilon
    G = float(X @ X)
    W2 = W * W
    out = np.empty(2 * r + 1)
    out[0] = W * (G - 0.5 * eps * W2)
    out[1 : r + 1] = X * (G - 1.0) + Y * Y / sd + 0.5 * eps * (sd - X) * W2
    out[r + 1 :] = Y * (G - X / sd - 0.5 * eps * W2)
    return out


def augmented_field(state, config: ModelConfig) -> np.ndarray:
    """Phase field extended by t' = W, u' = H - 1 and (log g_i)' = X_i/sqrt(d_i)."""
    if isinstance(state, AugmentedState):
        y = state.as_array()
    else:
        y = np.asarray(state, dtype=float)
    r = config.r
    z = y[: 2 * r + 1]
    W, X, _ = _split(z, r)
    out = np.empty(3 * r + 3)
    out[: 2 * r + 1] = vector_field(z, config)
    out[2 * r + 1] = W
    out[2 * r + 2] = float(config.sqrt_d @ X) - 1.0
    out[2 * r + 3 :] = X / config.sqrt_d
    return out


def quantities(state, u: float, config: ModelConfig) -> Quantities:
    """Diagnostics L, H, Q, G, J and the conserved combination C at one point.

    C = L/W^2 - epsilon*(u - (n-1)/2) requires W bounded away from zero; it is
    reported as nan once W^2 falls below the configured floor.
    """
    z = _phase_array(state)
    W, X, Y = _split(z, config.r)
    eps = config.epsilon
    n = config.n
    G = float(X @ X)
    L = float(_compensated_L(X[None, :], Y[None, :])[0])
    H = float(config.sqrt_d @ X)
    W2 = W * W
    Q = L + 0.5 * eps * (n - 1) * W2
    J = G - 0.5 * eps * W2
    C = L / W2 - eps * (u - 0.5 * (n - 1)) if W2 > C_FLOOR else math.nan
    return Quantities(L=L, H=H, Q=Q, G=G, J=J, C=C)


def quantities_table(W, X, Y, u, config: ModelConfig) -> dict[str, np.ndarray]:
    """Vectorised diagnostics over sample arrays (X, Y of shape (N, r))."""
    eps = config.epsilon
    n = config.n
    W = np.asarray(W, dtype=float)
    u = np.asarray(u, dtype=float)
    G = np.einsum("ij,ij->i", X, X)
    L = _compensated_L(X, Y)
    H = X @ config.sqrt_d
    W2 = W * W
    Q = L + 0.5 * eps * (n - 1) * W2
    J = G - 0.5 * eps * W2
    with np.errstate(divide="ignore", invalid="ignore"):
        C = np.where(W2 > C_FLOOR, L / W2 - eps * (u - 0.5 * (n - 1)), np.nan)
    return {"L": L, "H": H, "Q": Q, "G": G, "J": J, "C": C}


def quantity_rates(state, config: ModelConfig) -> tuple[float, float, float]:
    """Closed-form s-derivatives (L', (H-1)', Q') implied by the flow."""
    z = _phase_array(state)
    W, X, Y = _split(z, config.r)
    eps = config.epsilon
    G = float(X @ X)
    L = G + float(Y @ Y) - 1.0
    H = float(config.sqrt_d @ X)
    W2 = W * W
    Q = L + 0.5 * eps * (config.n - 1) * W2
    shear = G - 0.5 * eps * W2
    dL = 2.0 * L * shear + eps * W2 * (H - 1.0)
    dH = (G - 1.0 - 0.5 * eps * W2) * (H - 1.0) + Q
    dQ = eps * W2 * (H - 1.0) + 2.0 * shear * Q
    return dL, dH, dQ


def jacobian(state, config: ModelConfig) -> np.ndarray:
    """Exact Jacobian of vector_field in the packed (W, X, Y) layout."""
    z = _phase_array(state)
    r = config.r
    W, X, Y = _split(z, r)
    sd = config.sqrt_d
    eps = config.epsilon
    G = float(X @ X)
    W2 = W * W
    J = np.zeros((2 * r + 1, 2 * r + 1))
    iX = slice(1, r + 1)
    iY = slice(r + 1, 2 * r + 1)

    J[0, 0] = G - 1.5 * eps * W2
    J[0, iX] = 2.0 * W * X

    J[iX, 0] = eps * (sd - X) * W
    J[iX, iX] = 2.0 * np.outer(X, X)
    J[iX, iX] += np.diag(np.full(r, G - 1.0 - 0.5 * eps * W2))
    J[iX, iY] = np.diag(2.0 * Y / sd)

    J[iY, 0] = -eps * Y * W
    J[iY, iX] = 2.0 * np.outer(Y, X) - np.diag(Y / sd)
    J[iY, iY] = np.diag(G - X / sd - 0.5 * eps * W2)
    return J


def grad_Q(state, config: ModelConfig) -> np.ndarray:
    """Gradient of Q in the packed layout: (eps*(n-1)*W, 2X, 2Y)."""
    z = _phase_array(state)
    W, X, Y = _split(z, config.r)
    return np.concatenate(
        ([config.epsilon * (config.n - 1) * W], 2.0 * X, 2.0 * Y)
    )


def grad_H(config: ModelConfig) -> np.ndarray:
    """Gradient of H (constant): (0, sqrt(d_1)..sqrt(d_r), 0..0)."""
    g = np.zeros(config.phase_dim)
    g[1 : config.r + 1] = config.sqrt_d
    return g
