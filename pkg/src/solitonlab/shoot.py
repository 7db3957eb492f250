"""Initial conditions on the unstable manifold of the collapse seed, and the
two run modes: the soliton shot (potential strictly decreasing) and the
Einstein shot (potential frozen, trajectory held on the invariant set where
H = 1 and Q = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import equilibria
from .integrate import (
    IntegrationControls,
    Trajectory,
    integrate,
    make_phase_monitor,
)
from .model import AugmentedState, ModelConfig, PhaseState, augmented_field, grad_H, grad_Q, quantities

__all__ = [
    "ShootingParams",
    "auto_coeffs",
    "initial_state",
    "solve_soliton",
    "solve_einstein",
    "einstein_projection",
    "run_succeeded",
    "default_controls",
]

# Safety factor applied to the smallest cone coefficient that keeps the
# concavity of the potential from the very first step.
CONE_SAFETY = 1.5


@dataclass(frozen=True)
class ShootingParams:
    """Cone coordinates for the shot.

    coeffs is (c_W, c_Y2..c_Yr, c_q), normalised to unit length at use time.
    The soliton cone requires c_W > 0, c_Yi > 0 and c_q < 0; Einstein mode
    requires c_q = 0 (the perturbation stays tangent to {H=1, Q=0}).
    coeffs=None selects a default whose c_q scales with h; that keeps the
    conserved combination C of order one, so the conical regime is reached
    within the default horizon.
    """

    coeffs: tuple[float, ...] | None = None
    h: float = 1e-6
    s0: float = 0.0


def auto_coeffs(config: ModelConfig, h: float, mode: str = "soliton") -> np.ndarray:
    """Default cone coordinates: equal weights on (W, Y_i), c_q matched to h.

    The cone coefficient is set to CONE_SAFETY times the smallest magnitude
    for which Q + 1 - H (and hence the second derivative of the potential)
    is negative at the starting point; anything much larger buries the
    conical asymptotics beyond reach of a desk-scale horizon.
    """
    r = config.r
    base = np.full(r, 1.0 / math.sqrt(r))
    if mode == "einstein":
        return np.concatenate((base, [0.0]))
    c_w = base[0]
    a_quad = float(base[1:] @ base[1:]) + 0.5 * config.epsilon * (config.n - 1) * c_w * c_w
    q_norm = math.sqrt(4.0 * config.beta**2 + config.beta_hat**2)
    kappa = CONE_SAFETY * q_norm * a_quad / (2.0 * config.beta**2)
    coeffs = np.concatenate((base, [-kappa * h]))
    return coeffs / np.linalg.norm(coeffs)


def _resolve_coeffs(config: ModelConfig, params: ShootingParams, mode: str) -> np.ndarray:
    if params.h < 0:
        raise ValueError("h must be positive")
    if params.h == 0:
        raise ValueError("h = 0 does not leave the critical point")
    if params.coeffs is None:
        return auto_coeffs(config, params.h, mode)
    coeffs = np.asarray(params.coeffs, dtype=float)
    if coeffs.shape != (config.r + 1,):
        raise ValueError(f"coeffs must have length r + 1 = {config.r + 1}")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("coeffs must be finite")
    if coeffs[0] <= 0:
        raise ValueError("c_W must be positive")
    if np.any(coeffs[1:-1] <= 0):
        raise ValueError("c_Y coefficients must be positive")
    if mode == "einstein":
        if coeffs[-1] != 0.0:
            raise ValueError("Einstein mode requires c_q = 0")
    elif coeffs[-1] >= 0:
        raise ValueError("c_q must be negative (Q-decreasing cone)")
    norm = np.linalg.norm(coeffs)
    if norm == 0:
        raise ValueError("coeffs must be nonzero")
    return coeffs / norm


def einstein_projection(config: ModelConfig):
    """Post-step hook holding the phase point on {H = 1, Q = 0}.

    First a radial rescale restores Q = 0 exactly (Q is quadratic along
    rays), then a Newton step along the H-gradient projected tangent to
    {Q = 0} restores H = 1 (H is linear, so one step is exact); sweeps
    repeat until both residuals sit at roundoff.
    """
    gH = grad_H(config)
    pd = config.phase_dim

    def project(s, y):
        z = y[:pd]
        for _ in range(12):
            q = quantities(z, 0.0, config)
            if abs(q.Q) <= 1e-15 and abs(q.H - 1.0) <= 1e-15:
                break
            z = z / math.sqrt(1.0 + q.Q)
            n_q = grad_Q(z, config)
            n_q = n_q / np.linalg.norm(n_q)
            d = gH - (gH @ n_q) * n_q
            denom = gH @ d
            if denom != 0.0:
                z = z + (1.0 - float(config.sqrt_d @ z[1 : config.r + 1])) / denom * d
        y[:pd] = z
        return y

    return project


def initial_state(config: ModelConfig, params: ShootingParams, mode: str = "soliton") -> AugmentedState:
    """Starting point of a shot: seed + h * (unit cone combination).

    The phase part must land strictly inside the admissible region
    (W, Y_i > 0, and for soliton mode Q < 0, H < 1); a perturbation too
    large to certify is rejected.  The bookkeeping components are
    normalised to t = 0, u = 0 and log g_i matching the phase point.
    """
    coeffs = _resolve_coeffs(config, params, mode)
    seed, lin = equilibria.soliton_seed(config)
    z = seed.point + params.h * (coeffs @ lin.unstable_basis)

    r = config.r
    W = z[0]
    Y = z[r + 1 : 2 * r + 1]
    if W <= 0 or np.any(Y <= 0):
        raise ValueError("perturbation left the positive orthant; reduce h")
    if mode == "einstein":
        y = np.concatenate((z, np.zeros(2 + r)))
        y = einstein_projection(config)(params.s0, y)
        z = y[: config.phase_dim]
    else:
        q = quantities(z, 0.0, config)
        if q.Q >= 0 or q.H >= 1:
            raise ValueError("h too large: starting point violates Q < 0, H < 1")
    log_g = np.log(np.sqrt(np.asarray(config.dims) * np.asarray(config.lambdas)) * z[0] / z[r + 1 : 2 * r + 1])
    return AugmentedState(s=params.s0, phase=PhaseState.from_array(z), t=0.0, u=0.0, log_g=log_g)


def default_controls(config: ModelConfig, mode: str = "soliton") -> IntegrationControls:
    """Horizon scaled so W^2, decaying like 1/(epsilon*s), reaches deep decay;
    Einstein runs instead stop a hair's breadth from the cone point."""
    s_max = 2000.0 / min(1.0, config.epsilon)
    if mode == "einstein":
        return IntegrationControls(s_max=s_max, stop_radius=1e-9)
    return IntegrationControls(s_max=s_max)


def solve_soliton(
    config: ModelConfig,
    params: ShootingParams | None = None,
    controls: IntegrationControls | None = None,
) -> Trajectory:
    """Shoot from the collapse seed inside the Q-decreasing cone."""
    params = params or ShootingParams()
    controls = controls or default_controls(config, "soliton")
    init = initial_state(config, params, mode="soliton")
    coeffs = _resolve_coeffs(config, params, "soliton")
    traj = integrate(
        lambda s, y: augmented_field(y, config),
        init,
        controls,
        monitors=[make_phase_monitor(config, "soliton")],
        config=config,
        meta={"mode": "soliton", "h": params.h, "s0": params.s0, "coeffs": tuple(coeffs)},
    )
    return traj


def solve_einstein(
    config: ModelConfig,
    params: ShootingParams | None = None,
    controls: IntegrationControls | None = None,
) -> Trajectory:
    """Shoot tangent to {H = 1, Q = 0}; the run converges to the cone point."""
    params = params or ShootingParams()
    controls = controls or default_controls(config, "einstein")
    init = initial_state(config, params, mode="einstein")
    coeffs = _resolve_coeffs(config, params, "einstein")
    e_plus_point = equilibria.e_plus(config)[0].point
    traj = integrate(
        lambda s, y: augmented_field(y, config),
        init,
        controls,
        monitors=[make_phase_monitor(config, "einstein")],
        postprocess=einstein_projection(config),
        config=config,
        stop_center=e_plus_point,
        meta={"mode": "einstein", "h": params.h, "s0": params.s0, "coeffs": tuple(coeffs)},
    )
    return traj


def run_succeeded(traj: Trajectory, stop_radius: float = 0.0) -> bool:
    """Success: no bound violated, and the phase point is parked near the
    origin or still sinking over the last tenth of the run."""
    from .integrate import HORIZON_REACHED, ORIGIN_REACHED, TARGET_REACHED

    if traj.termination.kind not in (ORIGIN_REACHED, TARGET_REACHED, HORIZON_REACHED):
        return False
    norms = traj.phase_norm
    if stop_radius > 0 and norms[-1] < 10.0 * stop_radius:
        return True
    span = traj.s[-1] - traj.s[0]
    tail = traj.s >= traj.s[0] + 0.9 * span
    tail_norms = norms[tail]
    return bool(np.all(np.diff(tail_norms) <= 1e-12 * max(1.0, float(tail_norms[0]))))
