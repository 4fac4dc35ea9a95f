"""Network configuration and random channel generation for the two-hop relay system.

The network has ``d`` single-antenna sources transmitting to ``d`` destinations
through ``R`` amplify-and-forward relays, with no direct source-destination
link.  Channels are flat Rayleigh fading: every entry is zero-mean circularly
symmetric complex Gaussian, i.i.d. across relays and users.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "FadingModel",
    "NetworkConfig",
    "ChannelStatistics",
    "ChannelRealization",
    "generate_channels",
    "db_to_linear",
    "linear_to_db",
]


def db_to_linear(x_db):
    """Power quantity from dB: 10 dB -> 10.0."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


class FadingModel(str, Enum):
    RAYLEIGH_IID = "rayleigh_iid"
    # degenerate all-ones channels; makes closed-form CLI examples reproducible
    FIXED_UNIT = "fixed_unit"


@dataclass(frozen=True)
class NetworkConfig:
    """Dimensions, powers, noise variances and SINR targets (all linear units).

    Attributes:
        num_relays: R >= 1.
        num_users: d >= 1.
        source_powers: (d,) transmit powers in watts, strictly positive.
        relay_noise_var: noise variance at each relay, > 0.
        dest_noise_var: noise variance at each destination, > 0.
        sinr_targets: (d,) per-user SINR thresholds, linear scale, > 0.
    """

    num_relays: int
    num_users: int
    source_powers: np.ndarray
    relay_noise_var: float
    dest_noise_var: float
    sinr_targets: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "source_powers",
                           np.atleast_1d(np.asarray(self.source_powers, dtype=float)))
        object.__setattr__(self, "sinr_targets",
                           np.atleast_1d(np.asarray(self.sinr_targets, dtype=float)))
        if int(self.num_relays) < 1:
            raise ValueError("num_relays must be >= 1")
        if int(self.num_users) < 1:
            raise ValueError("num_users must be >= 1")
        object.__setattr__(self, "num_relays", int(self.num_relays))
        object.__setattr__(self, "num_users", int(self.num_users))
        if self.source_powers.shape != (self.num_users,):
            raise ValueError("source_powers must have length num_users")
        if self.sinr_targets.shape != (self.num_users,):
            raise ValueError("sinr_targets must have length num_users")
        if not np.all(self.source_powers > 0):
            raise ValueError("source_powers must be strictly positive")
        if not np.all(self.sinr_targets > 0):
            raise ValueError("sinr_targets must be strictly positive")
        if not (self.relay_noise_var > 0 and self.dest_noise_var > 0):
            raise ValueError("noise variances must be strictly positive")

    def with_sinr_targets(self, sinr_targets) -> "NetworkConfig":
        """Copy of this config with replaced SINR targets (linear scale)."""
        targets = np.asarray(sinr_targets, dtype=float)
        if targets.ndim == 0:
            targets = np.full(self.num_users, float(targets))
        return NetworkConfig(
            num_relays=self.num_relays,
            num_users=self.num_users,
            source_powers=self.source_powers,
            relay_noise_var=self.relay_noise_var,
            dest_noise_var=self.dest_noise_var,
            sinr_targets=targets,
        )


@dataclass(frozen=True)
class ChannelStatistics:
    """Per-entry channel variances (linear) and fading distribution."""

    var_f: float
    var_g: float
    distribution: FadingModel = FadingModel.RAYLEIGH_IID

    def __post_init__(self):
        if not (self.var_f > 0 and self.var_g > 0):
            raise ValueError("channel variances must be strictly positive")
        object.__setattr__(self, "distribution", FadingModel(self.distribution))


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of both hops.

    Attributes:
        source_to_relay: (R, d) complex; column p is the source p -> relays vector.
        relay_to_dest: (R, d) complex; column k is the relays -> destination k vector.
    """

    source_to_relay: np.ndarray
    relay_to_dest: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.source_to_relay, dtype=complex)
        g = np.asarray(self.relay_to_dest, dtype=complex)
        if f.ndim != 2 or g.shape != f.shape:
            raise ValueError("channel matrices must be 2-D with identical shapes")
        if not (np.all(np.isfinite(f.view(float))) and np.all(np.isfinite(g.view(float)))):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "source_to_relay", f)
        object.__setattr__(self, "relay_to_dest", g)

    @property
    def num_relays(self) -> int:
        return self.source_to_relay.shape[0]

    @property
    def num_users(self) -> int:
        return self.source_to_relay.shape[1]


def _circular_gaussian(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    # real and imaginary parts each carry var/2 so that E|x|^2 = var
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_channels(stats: ChannelStatistics, config: NetworkConfig,
                      seed: int) -> ChannelRealization:
    """Draw one i.i.d. Rayleigh-fading realization of both hops.

    The same (stats, config, seed) triple always returns bit-identical
    matrices; the first hop is drawn before the second.
    """
    shape = (config.num_relays, config.num_users)
    if stats.distribution is FadingModel.FIXED_UNIT:
        ones = np.ones(shape, dtype=complex)
        return ChannelRealization(source_to_relay=ones, relay_to_dest=ones.copy())
    rng = np.random.default_rng(seed)
    f = _circular_gaussian(rng, shape, stats.var_f)
    g = _circular_gaussian(rng, shape, stats.var_g)
    return ChannelRealization(source_to_relay=f, relay_to_dest=g)
