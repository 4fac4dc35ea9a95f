"""Norm-bounded perturbations of the model matrices.

Every matrix of the nominal model may be perturbed inside a Frobenius ball
whose radius is a fixed fraction of the matrix's own norm; diagonal matrices
only receive diagonal perturbations, and every perturbed matrix must stay
positive semidefinite.  This module derives the radii, draws admissible
samples for Monte-Carlo evaluation, and rebuilds the adversarial worst-case
perturbation from the dual blocks of a solved robust program.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .matrices import BeamformingMatrices, hermitize
from .model import NetworkConfig

__all__ = [
    "UncertaintyBounds",
    "PerturbationSet",
    "SampleMode",
    "derive_bounds",
    "sample_perturbation",
    "sample_perturbations",
    "perturbation_is_admissible",
    "WorstCaseCertificate",
    "reconstruct_worst_case",
    "qos_slack",
]

PSD_EIG_TOL = 1e-9          # absolute eigenvalue tolerance for admissibility
_MAX_PROJECTIONS = 50       # alternating projection cap in the sampler


class SampleMode(str, Enum):
    BOUNDARY_NORM = "boundary"   # samples sit on the sphere ||delta|| = eps
    UNIFORM_NORM = "uniform"     # radius drawn uniformly in [0, eps]


@dataclass(frozen=True)
class UncertaintyBounds:
    """Frobenius-ball radii for each perturbed matrix.

    Attributes:
        eps_power: radius for the transmit-power diagonal.
        eps_signal: (d,) radii for the desired-signal matrices.
        eps_interference: (d,) radii for the interference matrices.
        eps_noise: (d,) radii for the forwarded-noise diagonals.
        relative_level: the fraction rho the radii were derived from.
    """

    eps_power: float
    eps_signal: np.ndarray
    eps_interference: np.ndarray
    eps_noise: np.ndarray
    relative_level: float

    def __post_init__(self):
        object.__setattr__(self, "eps_signal", np.atleast_1d(np.asarray(self.eps_signal, float)))
        object.__setattr__(self, "eps_interference",
                           np.atleast_1d(np.asarray(self.eps_interference, float)))
        object.__setattr__(self, "eps_noise", np.atleast_1d(np.asarray(self.eps_noise, float)))
        if self.eps_power < 0 or self.relative_level < 0:
            raise ValueError("radii must be nonnegative")
        for arr in (self.eps_signal, self.eps_interference, self.eps_noise):
            if np.any(arr < 0):
                raise ValueError("radii must be nonnegative")

    @classmethod
    def zero(cls, num_users: int) -> "UncertaintyBounds":
        z = np.zeros(num_users)
        return cls(0.0, z.copy(), z.copy(), z.copy(), 0.0)


@dataclass(frozen=True)
class PerturbationSet:
    """One admissible joint perturbation of all model matrices.

    delta_power and delta_noise are the (real) diagonals of the diagonal
    perturbations; delta_signal and delta_interference are Hermitian.
    """

    delta_power: np.ndarray          # (R,)
    delta_signal: np.ndarray         # (d, R, R)
    delta_interference: np.ndarray   # (d, R, R)
    delta_noise: np.ndarray          # (d, R)


def derive_bounds(m: BeamformingMatrices, rho: float) -> UncertaintyBounds:
    """Radii as rho times the Frobenius norm of each nominal matrix."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return UncertaintyBounds(
        eps_power=rho * float(np.linalg.norm(m.power_diag)),
        eps_signal=rho * np.linalg.norm(m.signal, axis=(1, 2)),
        eps_interference=rho * np.linalg.norm(m.interference, axis=(1, 2)),
        eps_noise=rho * np.linalg.norm(m.noise_diag, axis=1),
        relative_level=rho,
    )


def _random_hermitian(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    raw = rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))
    return (raw + raw.conj().transpose(0, 2, 1)) / 2.0


def _clip_psd(nominal: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Project nominal+delta onto the PSD cone; returns the adjusted deltas."""
    perturbed = nominal[None, :, :] + deltas
    evals, vecs = np.linalg.eigh(perturbed)
    clipped = np.clip(evals, 0.0, None)
    rebuilt = (vecs * clipped[:, None, :]) @ vecs.conj().transpose(0, 2, 1)
    rebuilt = (rebuilt + rebuilt.conj().transpose(0, 2, 1)) / 2.0
    return rebuilt - nominal[None, :, :]


def _sample_hermitian_ball(rng, nominal: np.ndarray, radius: float, count: int,
                           boundary: bool) -> np.ndarray:
    """Admissible Hermitian perturbations of one nominal PSD matrix.

    Alternates between the target sphere/ball and the PSD-feasibility
    projection; the final step is always a PSD clip (nonexpansive), so the
    result is exactly feasible with norm <= radius, and on the sphere when a
    feasible boundary point was reached.
    """
    n = nominal.shape[0]
    if radius == 0.0:
        return np.zeros((count, n, n), dtype=complex)
    deltas = _random_hermitian(rng, count, n)
    targets = np.full(count, radius) if boundary else radius * rng.uniform(size=count)
    norms = np.linalg.norm(deltas, axis=(1, 2))
    norms[norms == 0] = 1.0
    deltas *= (targets / norms)[:, None, None]
    for _ in range(_MAX_PROJECTIONS):
        deltas = _clip_psd(nominal, deltas)
        norms = np.linalg.norm(deltas, axis=(1, 2))
        if boundary:
            stalled = norms <= radius * 1e-12
            if np.any(stalled):
                # clipping annihilated the direction (possible when the
                # nominal is 0): restart those rows along a PSD direction,
                # which is always boundary-feasible
                g = _random_hermitian(rng, int(stalled.sum()), n)
                g = g @ g.conj().transpose(0, 2, 1)
                deltas[stalled] = g
                norms = np.linalg.norm(deltas, axis=(1, 2))
            off_sphere = np.abs(norms - targets) > 1e-12 * max(radius, 1.0)
            if not np.any(off_sphere):
                break
            scale = np.ones(count)
            scale[off_sphere] = targets[off_sphere] / norms[off_sphere]
            deltas *= scale[:, None, None]
        else:
            over = norms > targets * (1 + 1e-12)
            if not np.any(over):
                break
            scale = np.ones(count)
            scale[over] = targets[over] / norms[over]
            deltas *= scale[:, None, None]
    return _clip_psd(nominal, deltas)


def _sample_diag_ball(rng, nominal_diag: np.ndarray, radius: float, count: int,
                      boundary: bool) -> np.ndarray:
    """Same as _sample_hermitian_ball for real diagonal perturbations."""
    n = nominal_diag.shape[0]
    if radius == 0.0:
        return np.zeros((count, n))
    deltas = rng.standard_normal((count, n))
    targets = np.full(count, radius) if boundary else radius * rng.uniform(size=count)
    norms = np.linalg.norm(deltas, axis=1)
    norms[norms == 0] = 1.0
    deltas *= (targets / norms)[:, None]
    for _ in range(_MAX_PROJECTIONS):
        deltas = np.maximum(nominal_diag[None, :] + deltas, 0.0) - nominal_diag[None, :]
        norms = np.linalg.norm(deltas, axis=1)
        if boundary:
            stalled = norms <= radius * 1e-12
            if np.any(stalled):
                deltas[stalled] = np.abs(rng.standard_normal((int(stalled.sum()), n)))
                norms = np.linalg.norm(deltas, axis=1)
            off_sphere = np.abs(norms - targets) > 1e-12 * max(radius, 1.0)
            if not np.any(off_sphere):
                break
            scale = np.ones(count)
            scale[off_sphere] = targets[off_sphere] / norms[off_sphere]
            deltas *= scale[:, None]
        else:
            over = norms > targets * (1 + 1e-12)
            if not np.any(over):
                break
            scale = np.ones(count)
            scale[over] = targets[over] / norms[over]
            deltas *= scale[:, None]
    return np.maximum(nominal_diag[None, :] + deltas, 0.0) - nominal_diag[None, :]


def sample_perturbations(bounds: UncertaintyBounds, m: BeamformingMatrices,
                         mode: SampleMode, seed: int, count: int) -> list[PerturbationSet]:
    """Draw ``count`` admissible perturbation sets (vectorized internally)."""
    mode = SampleMode(mode)
    boundary = mode is SampleMode.BOUNDARY_NORM
    rng = np.random.default_rng(seed)
    d = m.num_users

    delta_power = _sample_diag_ball(rng, m.power_diag, bounds.eps_power, count, boundary)
    delta_signal = np.stack([
        _sample_hermitian_ball(rng, m.signal[k], float(bounds.eps_signal[k]), count, boundary)
        for k in range(d)
    ], axis=1)
    delta_interference = np.stack([
        _sample_hermitian_ball(rng, m.interference[k], float(bounds.eps_interference[k]),
                               count, boundary)
        for k in range(d)
    ], axis=1)
    delta_noise = np.stack([
        _sample_diag_ball(rng, m.noise_diag[k], float(bounds.eps_noise[k]), count, boundary)
        for k in range(d)
    ], axis=1)

    return [
        PerturbationSet(
            delta_power=delta_power[s],
            delta_signal=delta_signal[s],
            delta_interference=delta_interference[s],
            delta_noise=delta_noise[s],
        )
        for s in range(count)
    ]


def sample_perturbation(bounds: UncertaintyBounds, m: BeamformingMatrices,
                        mode: SampleMode, seed: int) -> PerturbationSet:
    """Draw one admissible perturbation set (deterministic in seed)."""
    return sample_perturbations(bounds, m, mode, seed, 1)[0]


def perturbation_is_admissible(pert: PerturbationSet, bounds: UncertaintyBounds,
                               m: BeamformingMatrices, *, norm_rtol: float = 1e-9,
                               eig_tol: float = PSD_EIG_TOL) -> bool:
    """Check the norm bounds, diagonal structure and PSD side conditions."""
    def norm_ok(delta, eps):
        return np.linalg.norm(delta) <= eps * (1 + norm_rtol) + 1e-15

    if not norm_ok(pert.delta_power, bounds.eps_power):
        return False
    if np.min(m.power_diag + pert.delta_power) < -eig_tol:
        return False
    for k in range(m.num_users):
        if not (norm_ok(pert.delta_signal[k], bounds.eps_signal[k])
                and norm_ok(pert.delta_interference[k], bounds.eps_interference[k])
                and norm_ok(pert.delta_noise[k], bounds.eps_noise[k])):
            return False
        if np.min(m.noise_diag[k] + pert.delta_noise[k]) < -eig_tol:
            return False
        for delta, nominal in ((pert.delta_signal[k], m.signal[k]),
                               (pert.delta_interference[k], m.interference[k])):
            if np.linalg.norm(delta - delta.conj().T) > 1e-10 * max(1.0, np.linalg.norm(delta)):
                return False
            if np.linalg.eigvalsh(nominal + delta).min() < -eig_tol:
                return False
    return True


def qos_slack(X: np.ndarray, m: BeamformingMatrices, config: NetworkConfig, k: int,
              delta_signal=None, delta_interference=None, delta_noise=None) -> float:
    """Tr(X (margin_k + perturbation)) - dest_noise_var*gamma_k.

    X may be a full Gram matrix or ww^H for an extracted weight vector; the
    perturbation arguments default to zero (nominal slack).
    """
    gamma = config.sinr_targets[k]
    total = m.margin[k].copy()
    if delta_signal is not None:
        total = total + delta_signal
    if delta_interference is not None:
        total = total - gamma * delta_interference
    if delta_noise is not None:
        total = total - gamma * np.diag(delta_noise)
    return float(np.real(np.trace(X @ total))) - config.dest_noise_var * gamma


@dataclass(frozen=True)
class WorstCaseCertificate:
    """Reconstructed adversarial perturbation for one user plus its slack.

    slack is Tr(X (margin + delta)) - dest_noise_var*gamma at the
    reconstructed worst case; dual_value is the dual-function value of the
    supplied blocks (equal to slack at an exact KKT point); active reports
    whether the robust constraint is tight for this user.
    """

    user: int
    delta_signal: np.ndarray
    delta_interference: np.ndarray
    delta_noise: np.ndarray
    slack: float
    dual_value: float
    active: bool


def _scaled_direction(numerator: np.ndarray, eps: float):
    norm = float(np.linalg.norm(numerator))
    if eps == 0.0 or norm == 0.0:
        return np.zeros_like(numerator), norm
    return (eps / norm) * numerator, norm


def reconstruct_worst_case(dual_interference: np.ndarray, dual_noise: np.ndarray,
                           dual_signal: np.ndarray, X: np.ndarray,
                           bounds: UncertaintyBounds, k: int,
                           config: NetworkConfig, m: BeamformingMatrices,
                           *, active_tol: float = 1e-6) -> WorstCaseCertificate:
    """Rebuild the worst-case perturbation of user k from solved dual blocks.

    The stationarity directions are signal: (Z_signal - X), interference:
    (Z_interference + gamma X), noise diag: (z_noise + gamma diag X), each
    scaled onto its norm bound (multiplier ||direction||/(2 eps)); a zero
    radius or zero direction yields a zero block.  Perturbed matrices are
    clipped to the PSD cone, which is a no-op at an exact KKT point.
    """
    gamma = config.sinr_targets[k]
    X = hermitize(X)

    d_sig, n_sig = _scaled_direction(hermitize(dual_signal) - X, float(bounds.eps_signal[k]))
    d_int, n_int = _scaled_direction(hermitize(dual_interference) + gamma * X,
                                     float(bounds.eps_interference[k]))
    d_noise_vec, n_noise = _scaled_direction(
        np.asarray(dual_noise, float) + gamma * np.real(np.diag(X)),
        float(bounds.eps_noise[k]))

    # PSD safety clips at the admissibility tolerance (no-ops at a KKT point)
    if np.linalg.eigvalsh(m.signal[k] + d_sig).min() < -PSD_EIG_TOL:
        d_sig = _clip_psd(m.signal[k], d_sig[None])[0]
    if np.linalg.eigvalsh(m.interference[k] + d_int).min() < -PSD_EIG_TOL:
        d_int = _clip_psd(m.interference[k], d_int[None])[0]
    if np.min(m.noise_diag[k] + d_noise_vec) < -PSD_EIG_TOL:
        d_noise_vec = np.maximum(m.noise_diag[k] + d_noise_vec, 0.0) - m.noise_diag[k]

    slack = qos_slack(X, m, config, k, delta_signal=d_sig,
                      delta_interference=d_int, delta_noise=d_noise_vec)

    dual_value = (
        qos_slack(X, m, config, k)
        - float(np.real(np.trace(hermitize(dual_signal) @ m.signal[k])))
        - float(np.real(np.trace(hermitize(dual_interference) @ m.interference[k])))
        - float(np.asarray(dual_noise, float) @ m.noise_diag[k])
        - float(bounds.eps_signal[k]) * n_sig
        - float(bounds.eps_interference[k]) * n_int
        - float(bounds.eps_noise[k]) * n_noise
    )
    scale = max(config.dest_noise_var * gamma, 1.0)
    return WorstCaseCertificate(
        user=k,
        delta_signal=d_sig,
        delta_interference=d_int,
        delta_noise=d_noise_vec,
        slack=slack,
        dual_value=dual_value,
        active=abs(dual_value) <= active_tol * scale,
    )
