"""Adaptive embedded Runge-Kutta integration with dense output.

A classical Dormand-Prince 5(4) pair drives all trajectory computations.
The loop exposes exactly what the laboratory needs: per-accepted-step
monitor evaluation, an optional post-step projection hook (used to hold
Einstein-mode runs on their invariant submanifold), uniform dense sampling
through the step interpolant, and a stop test on distance to a target
phase point refined by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig, quantities_table

__all__ = [
    "ORIGIN_REACHED",
    "TARGET_REACHED",
    "HORIZON_REACHED",
    "INVARIANT_VIOLATED",
    "STEP_FAILURE",
    "IntegrationControls",
    "Violation",
    "Termination",
    "IntegrationStats",
    "Trajectory",
    "integrate",
    "monitor_bounds",
    "make_phase_monitor",
]

ORIGIN_REACHED = "OriginReached"
TARGET_REACHED = "TargetReached"
HORIZON_REACHED = "HorizonReached"
INVARIANT_VIOLATED = "InvariantViolated"
STEP_FAILURE = "StepFailure"

H_MIN = 1e-14

# Dormand-Prince 5(4), 7 stages, first-same-as-last.
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
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Quartic interpolant coefficients for the continuous extension.
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@dataclass(frozen=True)
class IntegrationControls:
    """Step-size, horizon and sampling controls for one integration."""

    rtol: float = 1e-9
    atol: float = 1e-12
    s_max: float = 2000.0
    max_steps: int = 1_000_000
    stop_radius: float = 0.0
    record_every: float = 0.05

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")
        if self.stop_radius < 0:
            raise ValueError("stop_radius must be nonnegative")
        if self.record_every <= 0:
            raise ValueError("record_every must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class Violation:
    """A monitored bound that failed, with the offending value."""

    name: str
    value: float
    bound: float
    s: float | None = None


@dataclass(frozen=True)
class Termination:
    kind: str
    s: float
    detail: str | None = None
    violation: Violation | None = None


@dataclass(frozen=True)
class IntegrationStats:
    accepted: int
    rejected: int
    fevals: int
    error_accum: float


@dataclass
class Trajectory:
    """Densely sampled solution with per-sample diagnostics.

    states rows follow the layout the field was integrated in; for the
    augmented system that is (W, X, Y, t, u, log g).  Quantity arrays are
    recomputed from the sampled states, never carried through the stepper.
    """

    s: np.ndarray
    states: np.ndarray
    termination: Termination
    stats: IntegrationStats
    config: ModelConfig | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._q = None

    @property
    def _r(self) -> int:
        if self.config is None:
            raise ValueError("trajectory has no model config attached")
        return self.config.r

    @property
    def W(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def X(self) -> np.ndarray:
        return self.states[:, 1 : self._r + 1]

    @property
    def Y(self) -> np.ndarray:
        return self.states[:, self._r + 1 : 2 * self._r + 1]

    @property
    def is_augmented(self) -> bool:
        return self.config is not None and self.states.shape[1] == self.config.aug_dim

    @property
    def t(self) -> np.ndarray:
        return self.states[:, 2 * self._r + 1]

    @property
    def u(self) -> np.ndarray:
        return self.states[:, 2 * self._r + 2]

    @property
    def log_g(self) -> np.ndarray:
        return self.states[:, 2 * self._r + 3 :]

    @property
    def quantities(self) -> dict[str, np.ndarray]:
        if self._q is None:
            u = self.u if self.is_augmented else np.zeros(len(self.s))
            self._q = quantities_table(self.W, self.X, self.Y, u, self.config)
        return self._q

    @property
    def phase_norm(self) -> np.ndarray:
        r = self._r
        return np.linalg.norm(self.states[:, : 2 * r + 1], axis=1)


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(f, s0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, 0.1 * span)
    y1 = y0 + h0 * f0
    f1 = f(s0 + h0, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(
    field,
    initial,
    controls: IntegrationControls | None = None,
    monitors=(),
    *,
    s0: float = 0.0,
    postprocess=None,
    config: ModelConfig | None = None,
    stop_center: np.ndarray | None = None,
    meta: dict | None = None,
) -> Trajectory:
    """Integrate y' = field(s, y) from s0 until a stop condition fires.

    monitors are callables (s, y) -> Violation | None evaluated at every
    accepted step; the first violation terminates the run.  postprocess,
    when given, maps an accepted (s, y) to a corrected y (a projection);
    the cached end-slope is recomputed afterwards so the first-same-as-last
    optimisation stays valid.  Dense samples are laid on the uniform grid
    s0 + k*record_every through the step interpolant, the terminal state is
    always appended.  stop_center (default: the origin of phase space, the
    first len(stop_center) components) with controls.stop_radius > 0
    activates a proximity stop, refined by bisection to 1e-10 in s.
    """
    controls = controls or IntegrationControls()
    from .model import AugmentedState

    if isinstance(initial, AugmentedState):
        s0 = initial.s
        y = initial.as_array()
    else:
        y = np.asarray(initial, dtype=float).copy()
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")

    f = field
    rtol, atol = controls.rtol, controls.atol
    s_end = s0 + controls.s_max
    center = None
    target_kind = ORIGIN_REACHED
    if controls.stop_radius > 0:
        if stop_center is None:
            dim_phase = y.size if config is None else config.phase_dim
            center = np.zeros(dim_phase)
        else:
            center = np.asarray(stop_center, dtype=float)
            if np.linalg.norm(center) > 0:
                target_kind = TARGET_REACHED

    def dist(state):
        return float(np.linalg.norm(state[: center.size] - center))

    s = s0
    f_now = f(s, y)
    fevals = 2
    h = _initial_step(f, s, y, f_now, rtol, atol, controls.s_max)
    fevals += 1

    samples_s = [s]
    samples_y = [y.copy()]
    next_k = 1  # next dense-grid index to emit

    accepted = rejected = 0
    error_accum = 0.0
    termination = None
    just_rejected = False
    K = np.empty((7, y.size))

    def record_through(s_left, h_step, interp_Q, y_left, s_limit):
        # Emit grid points in (s_left, s_limit] using the local interpolant.
        nonlocal next_k
        thetas = []
        while True:
            sk = s0 + next_k * controls.record_every
            if sk > s_limit + 1e-12 * max(1.0, abs(s_limit)):
                break
            thetas.append((sk - s_left) / h_step)
            next_k += 1
        if thetas:
            th = np.asarray(thetas)
            powers = np.vstack([th, th**2, th**3, th**4])
            block = y_left[None, :] + h_step * (interp_Q @ powers).T
            for i, theta in enumerate(th):
                samples_s.append(s_left + theta * h_step)
                samples_y.append(block[i])

    while termination is None:
        if accepted + rejected >= controls.max_steps:
            termination = Termination(STEP_FAILURE, s, detail="max_steps exceeded")
            break
        if h < H_MIN or s + h == s:
            termination = Termination(STEP_FAILURE, s, detail="step size underflow")
            break
        clipped = False
        if s + h >= s_end:
            h = s_end - s
            clipped = True

        K[0] = f_now
        for i in range(1, 7):
            yi = y + h * (K[:i].T @ _A[i])
            K[i] = f(s + _C[i] * h, yi)
        fevals += 6
        y_new = y + h * (K.T @ _B)
        err = h * (K.T @ _E)
        err_norm = _error_norm(err, y, y_new, rtol, atol)

        if err_norm > 1.0:
            rejected += 1
            just_rejected = True
            h *= max(0.2, 0.9 * err_norm ** (-0.2))
            continue

        accepted += 1
        error_accum += float(np.linalg.norm(err))
        s_new = s_end if clipped else s + h
        interp_Q = K.T @ _P
        projected = None
        if postprocess is not None:
            projected = postprocess(s_new, y_new.copy())

        # Stop-by-proximity, refined on the interpolant.
        if center is not None and dist(y_new if projected is None else projected) < controls.stop_radius:
            lo, hi = 0.0, 1.0
            if dist(y) >= controls.stop_radius:
                while (hi - lo) * abs(h) > 1e-10:
                    mid = 0.5 * (lo + hi)
                    ym = y + h * (interp_Q @ np.array([mid, mid**2, mid**3, mid**4]))
                    if dist(ym) < controls.stop_radius:
                        hi = mid
                    else:
                        lo = mid
            s_cross = s + hi * h
            record_through(s, h, interp_Q, y, s_cross)
            y_cross = y + h * (interp_Q @ np.array([hi, hi**2, hi**3, hi**4])) if hi < 1.0 else (
                projected if projected is not None else y_new
            )
            if samples_s[-1] < s_cross:
                samples_s.append(s_cross)
                samples_y.append(y_cross)
            termination = Termination(target_kind, s_cross)
            break

        record_through(s, h, interp_Q, y, s_new)
        y = projected if projected is not None else y_new
        s = s_new
        if projected is not None:
            f_now = f(s, y)
            fevals += 1
        else:
            f_now = K[6].copy()  # first-same-as-last; copy, K is reused in place

        violation = None
        for monitor in monitors:
            violation = monitor(s, y)
            if violation is not None:
                break
        if violation is not None:
            violation = Violation(violation.name, violation.value, violation.bound, s)
            if samples_s[-1] < s:
                samples_s.append(s)
                samples_y.append(y.copy())
            termination = Termination(INVARIANT_VIOLATED, s, detail=violation.name, violation=violation)
            break

        if s >= s_end:
            if samples_s[-1] < s:
                samples_s.append(s)
                samples_y.append(y.copy())
            termination = Termination(HORIZON_REACHED, s)
            break

        factor = 10.0 if err_norm == 0.0 else min(10.0, max(0.2, 0.9 * err_norm ** (-0.2)))
        if just_rejected:
            factor = min(factor, 1.0)  # no growth straight after a rejection
            just_rejected = False
        h *= factor

    return Trajectory(
        s=np.asarray(samples_s),
        states=np.asarray(samples_y),
        termination=termination,
        stats=IntegrationStats(accepted, rejected, fevals, error_accum),
        config=config,
        meta=meta or {},
    )


# Monitored bounds.  Proved-strict inequalities get an absolute slack so the
# run is not tripped by roundoff while a quantity sits on the correct side of
# its bound; the Einstein profile instead pins H and Q to their equalities.
def monitor_bounds(
    state,
    q,
    config: ModelConfig,
    profile: str = "soliton",
    slack: float = 1e-9,
    eq_tol: float = 1e-7,
) -> Violation | None:
    """Flag the first failed bound among the positivity and cone conditions."""
    from .model import PhaseState

    if isinstance(state, PhaseState):
        z = state.as_array()
    else:
        z = np.asarray(state, dtype=float)
    r = config.r
    W = z[0]
    X = z[1 : r + 1]
    Y = z[r + 1 : 2 * r + 1]
    w_cap = math.sqrt(2.0 / config.epsilon)

    for i in range(r):
        if X[i] <= -slack:
            return Violation(f"X_{i + 1} positivity", float(X[i]), 0.0)
    for i in range(r):
        if Y[i] <= -slack:
            return Violation(f"Y_{i + 1} positivity", float(Y[i]), 0.0)
    if W <= -slack:
        return Violation("W positivity", float(W), 0.0)
    if W >= w_cap + slack:
        return Violation("W upper bound", float(W), w_cap)
    if profile == "einstein":
        if abs(q.H - 1.0) > eq_tol:
            return Violation("H equality", float(q.H), 1.0)
        if abs(q.Q) > eq_tol:
            return Violation("Q equality", float(q.Q), 0.0)
        return None
    if q.L >= slack:
        return Violation("L negativity", float(q.L), 0.0)
    if q.H >= 1.0 + slack:
        return Violation("H upper bound", float(q.H), 1.0)
    if q.Q >= slack:
        return Violation("Q negativity", float(q.Q), 0.0)
    return None


def make_phase_monitor(config: ModelConfig, profile: str = "soliton", slack: float = 1e-9, eq_tol: float = 1e-7):
    """Monitor callable for integrate() over the augmented state layout."""
    from .model import quantities

    def monitor(s, y):
        r = config.r
        z = y[: 2 * r + 1]
        u = y[2 * r + 2] if y.size == config.aug_dim else 0.0
        q = quantities(z, float(u), config)
        return monitor_bounds(z, q, config, profile=profile, slack=slack, eq_tol=eq_tol)

    return monitor
