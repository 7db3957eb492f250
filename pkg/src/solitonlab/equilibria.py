"""Critical points of the flow with closed-form linearisations.

Every eigenpair here comes from explicit formulas, not a numeric
eigensolver; the verification suite cross-checks them against the exact
Jacobian and against finite differences of the vector field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, jacobian

__all__ = [
    "ORIGIN",
    "SOLITON_SEED",
    "E_PLUS",
    "E_MINUS",
    "SPHERE_FIXED",
    "Equilibrium",
    "Linearization",
    "origin",
    "soliton_seed",
    "e_plus",
    "e_minus",
    "sphere_fixed_linearization",
    "planar_reduced_field",
    "centre_manifold_coeffs",
    "catalog",
]

ORIGIN = "Origin"
SOLITON_SEED = "SolitonSeed"
E_PLUS = "EPlus"
E_MINUS = "EMinus"
SPHERE_FIXED = "SphereFixed"


@dataclass(frozen=True)
class Equilibrium:
    kind: str
    point: np.ndarray


@dataclass(frozen=True)
class Linearization:
    """Eigenstructure of the flow at a critical point.

    eigenvalues[k] pairs with eigenvectors[k]; repeated eigenvalues appear
    once per independent eigenvector.  unstable_basis lists the eigenvectors
    with positive eigenvalue, at the collapse seed in the order
    (W-direction, Y_2..Y_r directions, cone eigenvector).
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    unstable_basis: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    special_vector: np.ndarray | None = None


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _basis_vector(dim: int, k: int) -> np.ndarray:
    e = np.zeros(dim)
    e[k] = 1.0
    return e


def origin(config: ModelConfig) -> tuple[Equilibrium, Linearization]:
    """The origin: a sink whose linearisation is -1 on X and 0 on (W, Y)."""
    r = config.r
    dim = config.phase_dim
    point = np.zeros(dim)

    vals = []
    vecs = []
    for i in range(r):
        vals.append(-1.0)
        vecs.append(_basis_vector(dim, 1 + i))
    vals.append(0.0)
    vecs.append(_basis_vector(dim, 0))
    for i in range(r):
        vals.append(0.0)
        vecs.append(_basis_vector(dim, 1 + r + i))
    return (
        Equilibrium(kind=ORIGIN, point=point),
        Linearization(
            matrix=jacobian(point, config),
            eigenvalues=np.array(vals),
            eigenvectors=np.array(vecs),
            unstable_basis=np.empty((0, dim)),
        ),
    )


def soliton_seed(config: ModelConfig) -> tuple[Equilibrium, Linearization]:
    """Collapse seed (0, beta e_1, beta_hat e_1) and its eigenstructure.

    Eigenvalues: 2*beta^2 (cone direction q), beta^2 with multiplicity r
    (W and Y_i, i >= 2), beta^2 - 1 with multiplicity r (the remaining
    (X_1, Y_1)-block direction and X_i, i >= 2).
    """
    r = config.r
    dim = config.phase_dim
    b = config.beta
    bh = config.beta_hat
    point = np.zeros(dim)
    point[1] = b
    point[1 + r] = bh

    q = np.zeros(dim)
    q[1] = 2.0 * b
    q[1 + r] = bh

    stable_block = np.zeros(dim)  # (X_1, Y_1)-block eigenvector for beta^2 - 1
    stable_block[1] = bh
    stable_block[1 + r] = -b

    b2 = b * b
    vals = [2.0 * b2, b2]
    vecs = [_unit(q), _basis_vector(dim, 0)]
    for i in range(1, r):
        vals.append(b2)
        vecs.append(_basis_vector(dim, 1 + r + i))
    vals.append(b2 - 1.0)
    vecs.append(_unit(stable_block))
    for i in range(1, r):
        vals.append(b2 - 1.0)
        vecs.append(_basis_vector(dim, 1 + i))

    unstable = [_basis_vector(dim, 0)]
    unstable += [_basis_vector(dim, 1 + r + i) for i in range(1, r)]
    unstable.append(_unit(q))

    return (
        Equilibrium(kind=SOLITON_SEED, point=point),
        Linearization(
            matrix=jacobian(point, config),
            eigenvalues=np.array(vals),
            eigenvectors=np.array(vecs),
            unstable_basis=np.array(unstable),
            special_vector=q,
        ),
    )


def _e_plus_point(config: ModelConfig) -> np.ndarray:
    point = np.zeros(config.phase_dim)
    point[0] = math.sqrt(2.0 / (config.n * config.epsilon))
    point[1 : config.r + 1] = config.sqrt_d / config.n
    return point


def e_plus(config: ModelConfig) -> tuple[Equilibrium, Linearization]:
    """Cone point with all factors expanding at equal rate; a near-sink.

    One positive eigenvalue (-1 + sqrt(1 + 8/n))/2; the others are
    (-1 - sqrt(1 + 8/n))/2, -1/n (r times, the Y directions) and -1
    (r - 1 times, X directions orthogonal to (sqrt(d_1)..sqrt(d_r))).
    special_vector is the stable eigenvector transverse to the invariant
    set where the potential is constant.
    """
    r = config.r
    n = config.n
    dim = config.phase_dim
    eps = config.epsilon
    point = _e_plus_point(config)
    Wp = point[0]
    eta = config.sqrt_d

    root = math.sqrt(1.0 + 8.0 / n)
    lam_plus = 0.5 * (-1.0 + root)
    lam_minus = 0.5 * (-1.0 - root)

    v_plus = np.zeros(dim)
    v_plus[0] = 1.0
    v_plus[1 : r + 1] = (lam_plus + 2.0 / n) / (2.0 * Wp) * eta

    v_special = np.zeros(dim)
    v_special[0] = n / (n - 1.0) * (lam_plus + 2.0 / n)
    v_special[1 : r + 1] = -math.sqrt(2.0 * eps / n) * eta

    vals = [lam_plus, lam_minus]
    vecs = [_unit(v_plus), _unit(v_special)]
    for i in range(r):
        vals.append(-1.0 / n)
        vecs.append(_basis_vector(dim, 1 + r + i))
    # X directions orthogonal to eta: eigenvalue -1, multiplicity r - 1.
    for k in range(1, r):
        xi = np.zeros(dim)
        xi[1] = eta[k]
        xi[1 + k] = -eta[0]
        vals.append(-1.0)
        vecs.append(_unit(xi))

    return (
        Equilibrium(kind=E_PLUS, point=point),
        Linearization(
            matrix=jacobian(point, config),
            eigenvalues=np.array(vals),
            eigenvectors=np.array(vecs),
            unstable_basis=np.array([_unit(v_plus)]),
            special_vector=v_special,
        ),
    )


def e_minus(config: ModelConfig) -> tuple[Equilibrium, Linearization]:
    """Mirror of the cone point under W -> -W (same spectrum, reflected vectors)."""
    eq, lin = e_plus(config)
    refl = np.ones(config.phase_dim)
    refl[0] = -1.0
    point = eq.point * refl
    return (
        Equilibrium(kind=E_MINUS, point=point),
        Linearization(
            matrix=jacobian(point, config),
            eigenvalues=lin.eigenvalues.copy(),
            eigenvectors=lin.eigenvectors * refl,
            unstable_basis=lin.unstable_basis * refl,
            special_vector=lin.special_vector * refl,
        ),
    )


def sphere_fixed_linearization(p, config: ModelConfig) -> Linearization:
    """Linearisation at a fixed point (0, p, 0) on the unit sphere in X.

    Eigenvalues: 0 on the (r-1)-dimensional tangent space of the critical
    sphere, 2 along p, 1 along W, and 1 - p_i/sqrt(d_i) along each Y_i.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (config.r,):
        raise ValueError("p must have one entry per factor")
    if abs(p @ p - 1.0) > 1e-12:
        raise ValueError("p must be a unit vector")
    r = config.r
    dim = config.phase_dim

    vals = [2.0, 1.0]
    p_full = np.zeros(dim)
    p_full[1 : r + 1] = p
    vecs = [p_full, _basis_vector(dim, 0)]
    for i in range(r):
        vals.append(1.0 - p[i] / config.sqrt_d[i])
        vecs.append(_basis_vector(dim, 1 + r + i))
    # Orthonormal complement of p inside the X block: the tangent directions.
    _, _, vt = np.linalg.svd(p.reshape(1, -1))
    for row in vt[1:]:
        tangent = np.zeros(dim)
        tangent[1 : r + 1] = row
        vals.append(0.0)
        vecs.append(tangent)

    point = p_full.copy()
    vals_arr = np.array(vals)
    vecs_arr = np.array(vecs)
    return Linearization(
        matrix=jacobian(point, config),
        eigenvalues=vals_arr,
        eigenvectors=vecs_arr,
        unstable_basis=vecs_arr[vals_arr > 0],
    )


def planar_reduced_field(x1: float, w: float, config: ModelConfig) -> tuple[float, float]:
    """Flow restricted to the plane X_i proportional to sqrt(d_i), in (X_1, W)."""
    d1 = config.dims[0]
    n = config.n
    eps = config.epsilon
    g = n * x1 * x1 / d1
    dx1 = x1 * (g - 1.0) + 0.5 * eps * (math.sqrt(d1) - x1) * w * w
    dw = w * (g - 0.5 * eps * w * w)
    return dx1, dw


def centre_manifold_coeffs(config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic coefficients (a_i, c_i) of X_i = a_i Y_i^2 + c_i W^2 + h.o.t.

    near the origin: a_i = 1/sqrt(d_i) and c_i = epsilon*sqrt(d_i)/2.  Cross
    terms Y_j W carry zero coefficients.
    """
    return 1.0 / config.sqrt_d, 0.5 * config.epsilon * config.sqrt_d


def catalog(config: ModelConfig) -> list[tuple[Equilibrium, Linearization]]:
    """The isolated critical points: origin, collapse seed and both cone points."""
    return [origin(config), soliton_seed(config), e_plus(config), e_minus(config)]
