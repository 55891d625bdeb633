"""Amplitude-controlled phase oscillators: the rhythm-generating layer.

One oscillator per limb, limb order FR, FL, RR, RL. Dynamics:

    rddot_i    = alpha * (alpha/4 * (mu_i - r_i) - rdot_i)
    theta_dot_i = Omega_i + sum_j r_j * w[i,j] * sin(theta_j - theta_i - phi[i,j])

with Omega_i = 2*pi*omega_i when the frequency convention is cycles per
second, or omega_i directly for radians per second. The amplitude dynamics
are critically damped around the fixed point (r, rdot) = (mu, 0).

Integration is semi-implicit Euler at the configured substep (1 ms nominal);
an RK4 variant is available for validation runs.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels

LIMB_NAMES = ("FR", "FL", "RR", "RL")
N_LIMBS = 4

TROT_PHASES = np.array([0.0, np.pi, np.pi, 0.0])


class OmegaConvention(str, Enum):
    CYCLES_PER_SECOND = "cycles_per_second"
    RADIANS_PER_SECOND = "radians_per_second"

    @property
    def scale(self) -> float:
        return 2.0 * np.pi if self is OmegaConvention.CYCLES_PER_SECOND else 1.0


class Integrator(str, Enum):
    SEMI_IMPLICIT = "semi_implicit"
    RK4 = "rk4"  # validation only


@dataclass
class OscillatorState:
    """Per-limb oscillator state (amplitude, amplitude rate, phase, phase rate)."""

    r: np.ndarray
    r_dot: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray

    def copy(self) -> "OscillatorState":
        return OscillatorState(self.r.copy(), self.r_dot.copy(),
                               self.theta.copy(), self.theta_dot.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.r).all() and np.isfinite(self.r_dot).all()
                    and np.isfinite(self.theta).all()
                    and np.isfinite(self.theta_dot).all())


@dataclass
class RgParams:
    """Oscillator bank parameters.

    alpha: convergence factor (1/s). w, phi: 4x4 coupling weights and phase
    biases (training runs use w = 0; couplings are still integrated in full
    when nonzero). dt: substep. omega_convention picks the theta_dot mapping.
    """

    alpha: float = 50.0
    w: np.ndarray = field(default_factory=lambda: np.zeros((N_LIMBS, N_LIMBS)))
    phi: np.ndarray = field(default_factory=lambda: np.zeros((N_LIMBS, N_LIMBS)))
    dt: float = 1e-3
    omega_convention: OmegaConvention = OmegaConvention.CYCLES_PER_SECOND
    integrator: Integrator = Integrator.SEMI_IMPLICIT

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.omega_convention = OmegaConvention(self.omega_convention)
        self.integrator = Integrator(self.integrator)
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")


@dataclass
class SupraspinalDrive:
    """Descending drive: per-limb intrinsic amplitude and frequency."""

    mu: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)


def step_rg(state: OscillatorState, drive: SupraspinalDrive,
            params: RgParams) -> OscillatorState:
    """Advance the oscillator bank by one substep.

    Raises ValueError on non-finite input: corrupted state must not
    propagate into the control stack.
    """
    if not state.is_finite():
        raise ValueError("non-finite oscillator state")
    if not (np.isfinite(drive.mu).all() and np.isfinite(drive.omega).all()):
        raise ValueError("non-finite supraspinal drive")
    out = state.copy()
    scale = params.omega_convention.scale
    if params.integrator is Integrator.SEMI_IMPLICIT:
        _kernels.rg_substep(out.r, out.r_dot, out.theta, out.theta_dot,
                            drive.mu, drive.omega, params.w, params.phi,
                            params.alpha, scale, params.dt)
    else:
        _rk4_substep(out, drive, params, scale)
    return out


def _rk4_substep(out: OscillatorState, drive: SupraspinalDrive,
                 params: RgParams, scale: float) -> None:
    dt = params.dt
    k = np.empty((4, 3, N_LIMBS))
    y0 = np.stack([out.r, out.r_dot, out.theta])

    def rates(y, ki):
        _kernels.rg_rates(y[0], y[1], y[2], drive.mu, drive.omega,
                          params.w, params.phi, params.alpha, scale, ki)

    rates(y0, k[0])
    rates(y0 + 0.5 * dt * k[0], k[1])
    rates(y0 + 0.5 * dt * k[1], k[2])
    rates(y0 + dt * k[2], k[3])
    y = y0 + (dt / 6.0) * (k[0] + 2 * k[1] + 2 * k[2] + k[3])
    out.r = np.maximum(y[0], 0.0)
    out.r_dot = y[1]
    out.theta = np.mod(y[2], 2.0 * np.pi)
    out.theta_dot = k[0][2].copy()


def reset_rg(init_mode: str = "trot", rng: np.random.Generator | None = None,
             seed: int | None = None) -> OscillatorState:
    """Fresh oscillator state.

    "trot" puts diagonal limb pairs in phase (theta = [0, pi, pi, 0]) with
    r = 1 and zero rates; "uniform_random" draws each phase from U[0, 2*pi)
    using the given generator or seed.
    """
    if init_mode == "trot":
        theta = TROT_PHASES.copy()
    elif init_mode == "uniform_random":
        if rng is None:
            rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=N_LIMBS)
    else:
        raise ValueError(f"unknown init_mode: {init_mode!r}")
    return OscillatorState(
        r=np.ones(N_LIMBS),
        r_dot=np.zeros(N_LIMBS),
        theta=theta,
        theta_dot=np.zeros(N_LIMBS),
    )
