"""High-level beamformer designs: solve, extract a rank-one weight vector.

Three designs share one pipeline: assemble the matching conic program, solve
it, and turn the relaxed Gram matrix into a weight vector, either directly
(numeric rank one) or through Gaussian randomization with per-candidate
feasibility rescaling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import conic
from .conic import SolveStatus, SolverSettings
from .matrices import BeamformingMatrices, qos_margin, transmit_power
from .model import NetworkConfig
from .uncertainty import UncertaintyBounds

__all__ = [
    "DesignMethod",
    "RandomizationSettings",
    "SolverSolution",
    "ExtractionFailedError",
    "design",
    "extract_rank_one",
    "canonical_phase",
    "numeric_rank",
]

RANK_TOL = 1e-6   # eigenvalues above RANK_TOL * lambda_max count toward the rank


class DesignMethod(str, Enum):
    NONROBUST = "nonrobust"
    MOM = "mom"
    ROBUST = "robust"


class ExtractionFailedError(RuntimeError):
    """No randomization candidate could be rescaled to feasibility."""


@dataclass(frozen=True)
class RandomizationSettings:
    num_candidates: int = 100


@dataclass
class SolverSolution:
    """Result of one design: relaxed Gram matrix, weights and diagnostics.

    objective_rank1 is the method's own objective evaluated at the extracted
    rank-one weights (for the robust methods this includes the worst-case
    power margin eps_power*||w||^2); nominal transmit power is available via
    matrices.transmit_power.
    """

    method: DesignMethod
    status: SolveStatus
    gram: np.ndarray | None = None
    weights: np.ndarray | None = None
    objective_relaxed: float = float("nan")
    objective_rank1: float = float("nan")
    rank_numeric: int = 0
    nominal_sinr: np.ndarray | None = None
    dual_signal: np.ndarray | None = None          # (d, R, R), robust only
    dual_interference: np.ndarray | None = None    # (d, R, R), robust only
    dual_noise: np.ndarray | None = None           # (d, R), robust only
    iterations: int = 0
    solver_name: str = ""


def canonical_phase(w: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first non-negligible entry is real >= 0."""
    w = np.asarray(w, dtype=complex)
    mags = np.abs(w)
    top = mags.max() if w.size else 0.0
    if top == 0.0:
        return w
    idx = int(np.argmax(mags > 1e-12 * top))
    return w * np.exp(-1j * np.angle(w[idx]))


def numeric_rank(evals: np.ndarray) -> int:
    lam_max = float(evals.max()) if evals.size else 0.0
    if lam_max <= 0.0:
        return 0
    return int(np.sum(evals > RANK_TOL * lam_max))


def _method_margins(w: np.ndarray, m: BeamformingMatrices,
                    bounds: UncertaintyBounds | None, config: NetworkConfig,
                    method: DesignMethod) -> np.ndarray:
    """Per-user feasibility margins c_k with sinr-type constraint c_k*|a|^2 >= noise*gamma.

    For the robust methods this is the conservative trace-extreme worst case
    (PSD side conditions ignored), so any candidate it accepts satisfies the
    modeled perturbation ball.
    """
    d = m.num_users
    margins = np.empty(d)
    norm2 = float(np.real(w.conj() @ w))
    for k in range(d):
        if method is DesignMethod.NONROBUST:
            margins[k] = qos_margin(w, m, k)
        else:
            gamma = float(config.sinr_targets[k])
            margins[k] = (
                qos_margin(w, m, k)
                - (float(bounds.eps_signal[k])
                   + gamma * (float(bounds.eps_interference[k])
                              + float(bounds.eps_noise[k]))) * norm2
            )
    return margins


def _method_objective(w: np.ndarray, m: BeamformingMatrices,
                      bounds: UncertaintyBounds | None,
                      method: DesignMethod) -> float:
    power = transmit_power(w, m)
    if method is DesignMethod.NONROBUST:
        return power
    return power + float(bounds.eps_power) * float(np.real(w.conj() @ w))


def extract_rank_one(X: np.ndarray, m: BeamformingMatrices,
                     bounds: UncertaintyBounds | None, config: NetworkConfig,
                     method: DesignMethod, num_candidates: int = 100,
                     seed: int = 0) -> np.ndarray:
    """Weight vector from a relaxed PSD Gram matrix.

    Numeric rank one: the principal eigenpair, w = sqrt(lam_max) u_max.
    Otherwise draw ``num_candidates`` Gaussian candidates w_l = U S^(1/2) e_l,
    rescale each by the smallest alpha >= 1 satisfying every method-specific
    margin constraint (closed form, since the constraint is quadratic in
    alpha), and keep the feasible candidate of least objective.  Returned
    weights are phase-normalized so repeated seeds are bit-identical.
    """
    method = DesignMethod(method)
    X = np.asarray(X, dtype=complex)
    evals, vecs = np.linalg.eigh((X + X.conj().T) / 2.0)
    if numeric_rank(evals) == 0:
        raise ExtractionFailedError("Gram matrix is numerically zero")
    if numeric_rank(evals) == 1:
        w = np.sqrt(float(evals[-1])) * vecs[:, -1]
        return canonical_phase(w)

    rng = np.random.default_rng(seed)
    R = X.shape[0]
    sqrt_evals = np.sqrt(np.clip(evals, 0.0, None))
    root = vecs * sqrt_evals[None, :]
    noise_gamma = config.dest_noise_var * config.sinr_targets

    best_power = np.inf
    best_w = None
    for _ in range(num_candidates):
        e = (rng.standard_normal(R) + 1j * rng.standard_normal(R)) / np.sqrt(2.0)
        cand = root @ e
        margins = _method_margins(cand, m, bounds, config, method)
        if np.any(margins <= 0.0):
            continue
        alpha = max(1.0, float(np.sqrt(np.max(noise_gamma / margins))))
        scaled = alpha * cand
        power = _method_objective(scaled, m, bounds, method)
        if power < best_power:
            best_power = power
            best_w = scaled
    if best_w is None:
        raise ExtractionFailedError(
            f"all {num_candidates} randomization candidates were infeasible")
    return canonical_phase(best_w)


def design(method: DesignMethod, m: BeamformingMatrices,
           bounds: UncertaintyBounds | None, config: NetworkConfig,
           rand: RandomizationSettings | None = None, seed: int = 0,
           settings: SolverSettings | None = None) -> SolverSolution:
    """Run one beamformer design end to end.

    ``bounds`` is ignored for the non-robust method (may be None); infeasible
    programs return a solution with the matching status and no weights.
    """
    method = DesignMethod(method)
    rand = rand or RandomizationSettings()
    if method is not DesignMethod.NONROBUST and bounds is None:
        raise ValueError(f"method {method.value!r} requires uncertainty bounds")

    if method is DesignMethod.NONROBUST:
        program = conic.assemble_nonrobust_sdp(m, config)
    elif method is DesignMethod.MOM:
        program = conic.assemble_mom_sdp(m, bounds, config)
    else:
        program = conic.assemble_robust_sdp(m, bounds, config)

    sol = conic.solve(program, settings)
    if sol.status is not SolveStatus.OPTIMAL:
        return SolverSolution(method=method, status=sol.status,
                              iterations=sol.iterations, solver_name=sol.solver_name)

    X = conic.deembed_hermitian(sol.values["X"])
    evals = np.linalg.eigvalsh(X)
    rank = numeric_rank(evals)
    w = extract_rank_one(X, m, bounds, config, method,
                         num_candidates=rand.num_candidates, seed=seed)

    d = m.num_users
    from .matrices import sinr as nominal_sinr_fn
    sinrs = np.array([nominal_sinr_fn(w, m, config, k) for k in range(d)])

    solution = SolverSolution(
        method=method,
        status=sol.status,
        gram=X,
        weights=w,
        objective_relaxed=float(sol.objective),
        objective_rank1=_method_objective(w, m, bounds, method),
        rank_numeric=rank,
        nominal_sinr=sinrs,
        iterations=sol.iterations,
        solver_name=sol.solver_name,
    )
    if method is DesignMethod.ROBUST:
        R = m.num_relays
        solution.dual_signal = np.stack([
            conic.deembed_hermitian(sol.values[f"Z_signal_{k}"]) for k in range(d)])
        solution.dual_interference = np.stack([
            conic.deembed_hermitian(sol.values[f"Z_interference_{k}"]) for k in range(d)])
        solution.dual_noise = np.stack([
            np.asarray(sol.values[f"z_noise_{k}"], float) for k in range(d)])
    return solution
