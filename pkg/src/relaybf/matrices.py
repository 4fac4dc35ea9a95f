"""Deterministic matrices of the power/SINR model and their quadratic forms.

For a weight vector w (relay r applies the conjugate of w_r), the quantities
of interest are quadratic forms in a handful of matrices built from one
channel realization:

* total relay transmit power     w^H diag(power_diag) w
* desired signal power, user k   w^H signal[k] w
* interference power, user k     w^H interference[k] w
* forwarded relay noise, user k  w^H diag(noise_diag[k]) w

The per-user SINR is signal / (interference + forwarded noise + dest noise),
and the SINR-vs-target test "sinr >= gamma_k" is equivalent to the linear
margin test "w^H margin[k] w >= dest_noise_var * gamma_k".
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelRealization, NetworkConfig

__all__ = [
    "BeamformingMatrices",
    "build_matrices",
    "transmit_power",
    "sinr",
    "qos_margin",
    "hermitize",
]

HERMITICITY_RTOL = 1e-12


def hermitize(mat: np.ndarray, rtol: float = HERMITICITY_RTOL) -> np.ndarray:
    """Return (H + H^H)/2, rejecting inputs that are not Hermitian within rtol."""
    mat = np.asarray(mat, dtype=complex)
    scale = max(np.linalg.norm(mat), 1.0)
    if np.linalg.norm(mat - mat.conj().T) > rtol * scale * mat.shape[0]:
        raise ValueError("matrix is not Hermitian within tolerance")
    return (mat + mat.conj().T) / 2.0


@dataclass(frozen=True)
class BeamformingMatrices:
    """All matrices of the nominal power/SINR model for one realization.

    Diagonal matrices are stored as their (real) diagonals.

    Attributes:
        power_diag: (R,) diagonal weighting the total relay transmit power;
            entry r is sum_p P_p |f_rp|^2 + relay_noise_var > 0.
        noise_diag: (d, R) forwarded-noise diagonals, relay_noise_var*|g_rk|^2.
        signal: (d, R, R) Hermitian PSD rank-1 desired-signal matrices.
        interference: (d, R, R) Hermitian PSD interference matrices
            (rank <= d-1; the zero matrix when d = 1).
        margin: (d, R, R) Hermitian QoS margin matrices,
            signal[k] - gamma_k * (interference[k] + diag(noise_diag[k])).
    """

    power_diag: np.ndarray
    noise_diag: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    margin: np.ndarray

    @property
    def num_relays(self) -> int:
        return self.power_diag.shape[0]

    @property
    def num_users(self) -> int:
        return self.signal.shape[0]


def build_matrices(channels: ChannelRealization, config: NetworkConfig) -> BeamformingMatrices:
    """Construct all model matrices from a channel realization."""
    f = channels.source_to_relay
    g = channels.relay_to_dest
    R, d = f.shape
    if (R, d) != (config.num_relays, config.num_users):
        raise ValueError(
            f"channel shape {(R, d)} does not match config "
            f"{(config.num_relays, config.num_users)}"
        )
    P = config.source_powers

    # diag of R_x = sum_p P_p f_p f_p^H + sigma_v^2 I, real and > 0
    power_diag = (np.abs(f) ** 2) @ P + config.relay_noise_var

    noise_diag = config.relay_noise_var * (np.abs(g) ** 2).T  # (d, R)

    signal = np.empty((d, R, R), dtype=complex)
    interference = np.empty((d, R, R), dtype=complex)
    margin = np.empty((d, R, R), dtype=complex)
    for k in range(d):
        h_k = g[:, k] * f[:, k]
        signal[k] = hermitize(P[k] * np.outer(h_k, h_k.conj()))
        q = np.zeros((R, R), dtype=complex)
        for p in range(d):
            if p == k:
                continue
            h_kp = g[:, k] * f[:, p]
            q += P[p] * np.outer(h_kp, h_kp.conj())
        interference[k] = hermitize(q)
        margin[k] = hermitize(
            signal[k]
            - config.sinr_targets[k] * (interference[k] + np.diag(noise_diag[k]))
        )
    return BeamformingMatrices(
        power_diag=power_diag,
        noise_diag=noise_diag,
        signal=signal,
        interference=interference,
        margin=margin,
    )


def _quad(w: np.ndarray, mat: np.ndarray) -> float:
    return float(np.real(w.conj() @ mat @ w))


def transmit_power(w: np.ndarray, m: BeamformingMatrices) -> float:
    """Total relay transmit power w^H diag(power_diag) w, in watts."""
    w = np.asarray(w, dtype=complex)
    if w.shape != (m.num_relays,):
        raise ValueError("weight vector length does not match the relay count")
    return float(np.sum(np.abs(w) ** 2 * m.power_diag))


def sinr(w: np.ndarray, m: BeamformingMatrices, config: NetworkConfig, k: int) -> float:
    """Nominal SINR of user k (0-based) under weights w."""
    w = np.asarray(w, dtype=complex)
    if not 0 <= k < m.num_users:
        raise ValueError(f"user index {k} out of range")
    num = _quad(w, m.signal[k])
    den = (
        _quad(w, m.interference[k])
        + float(np.sum(np.abs(w) ** 2 * m.noise_diag[k]))
        + config.dest_noise_var
    )
    return max(num, 0.0) / den


def qos_margin(w: np.ndarray, m: BeamformingMatrices, k: int) -> float:
    """w^H margin[k] w; >= dest_noise_var*gamma_k iff sinr(w) >= gamma_k."""
    return _quad(np.asarray(w, dtype=complex), m.margin[k])
