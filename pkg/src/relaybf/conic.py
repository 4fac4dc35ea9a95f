"""Conic-program representation of the three beamformer designs.

All Hermitian quantities are carried through the real symmetric embedding
H -> [[Re H, -Im H], [Im H, Re H]], so the programs use only real PSD cones,
second-order cones and linear constraints and any real-cone interior-point
backend can solve them.  The embedding doubles traces, which is compensated
by halving embedded coefficient matrices: objective and constraint values
reported here are in the original complex space.

The worst-case robust design enforces, per user, existence of PSD dual
blocks certifying the inner minimization over all admissible perturbations:

    Tr(X margin_k) - Tr(Z_sig signal_k) - Tr(Z_int interference_k)
      - z_noise . noise_diag_k
      - eps_sig ||Z_sig - X||_F - eps_int ||Z_int + gamma_k X||_F
      - eps_noise ||z_noise + gamma_k diag X||_2
      >= dest_noise_var * gamma_k

with the norm terms written as second-order-cone epigraphs.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .matrices import BeamformingMatrices, hermitize
from .model import NetworkConfig
from .uncertainty import UncertaintyBounds

__all__ = [
    "VarBlock",
    "LinearConstraint",
    "SocTerm",
    "SocConstraint",
    "ConicProgram",
    "SolveStatus",
    "SolverSettings",
    "ConicSolution",
    "embed_hermitian",
    "deembed_hermitian",
    "assemble_nonrobust_sdp",
    "assemble_mom_sdp",
    "assemble_robust_sdp",
    "solve",
    "export_program",
]


# ---------------------------------------------------------------------------
# embedding

def embed_hermitian(H: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Real symmetric 2n x 2n embedding [[Re H, -Im H], [Im H, Re H]].

    Eigenvalues are preserved with doubled multiplicity, the trace doubles
    and the Frobenius norm scales by sqrt(2).  Raises for inputs that are
    not Hermitian within ``rtol`` (relative, scaled by dimension).
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    Hc = np.asarray(H, dtype=complex)
    scale = max(np.linalg.norm(Hc), 1.0)
    if np.linalg.norm(Hc - Hc.conj().T) > rtol * scale * Hc.shape[0]:
        raise ValueError("matrix is not Hermitian within tolerance")
    Hc = (Hc + Hc.conj().T) / 2.0
    A, B = Hc.real, Hc.imag
    return np.block([[A, -B], [B, A]])


def deembed_hermitian(E: np.ndarray) -> np.ndarray:
    """Inverse of embed_hermitian for (possibly unstructured) 2n x 2n blocks.

    The two diagonal blocks are averaged and the off-diagonal blocks
    antisymmetrized, which maps any feasible unstructured solution to a
    structured one without changing objective or constraint values.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1] or E.shape[0] % 2:
        raise ValueError("expected an even-sized square matrix")
    n = E.shape[0] // 2
    A = (E[:n, :n] + E[n:, n:]) / 2.0
    B = (E[n:, :n] - E[:n, n:]) / 2.0
    H = A + 1j * B
    return (H + H.conj().T) / 2.0


# ---------------------------------------------------------------------------
# program representation

class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class VarBlock:
    """One variable block: a real PSD matrix, a nonnegative vector or a free scalar.

    ``herm_dim`` marks PSD blocks that are embeddings of an n x n complex
    Hermitian matrix (size == 2n).
    """

    name: str
    cone: str               # "psd" | "nonneg" | "free"
    size: int
    herm_dim: int | None = None

    def __post_init__(self):
        if self.cone not in ("psd", "nonneg", "free"):
            raise ValueError(f"unknown cone {self.cone!r}")
        if self.size < 1:
            raise ValueError("block size must be positive")
        if self.herm_dim is not None and self.size != 2 * self.herm_dim:
            raise ValueError("embedded Hermitian block must have size 2*herm_dim")


@dataclass(frozen=True)
class LinearConstraint:
    """sum_b <coeffs[b], x_b>  (sense)  rhs, with one coefficient per block."""

    coeffs: dict
    sense: str              # ">=" | "=="
    rhs: float

    def __post_init__(self):
        if self.sense not in (">=", "=="):
            raise ValueError(f"unknown sense {self.sense!r}")


@dataclass(frozen=True)
class SocTerm:
    """coeff * op(block); all terms of one cone must map to equal-length vectors.

    ops: "hvec"  norm-preserving stack of the represented Hermitian matrix
                 [diag Re; sqrt(2) triu Re; sqrt(2) triu Im], length n^2;
         "rdiag" real diagonal of the represented Hermitian matrix, length n;
         "id"    the vector block itself.
    """

    coeff: float
    block: str
    op: str

    def __post_init__(self):
        if self.op not in ("hvec", "rdiag", "id"):
            raise ValueError(f"unknown op {self.op!r}")


@dataclass(frozen=True)
class SocConstraint:
    """||sum of terms||_2 <= sum_b bound_coeffs[b] * x_b (scalar blocks)."""

    terms: tuple
    bound_coeffs: dict


@dataclass
class ConicProgram:
    """Minimize a linear functional of the blocks subject to cone constraints."""

    blocks: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    linear_constraints: list = field(default_factory=list)
    soc_constraints: list = field(default_factory=list)

    def block(self, name: str) -> VarBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def validate(self) -> None:
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names")
        byname = {b.name: b for b in self.blocks}

        def check_coeff(name, coeff):
            b = byname.get(name)
            if b is None:
                raise ValueError(f"unknown block {name!r}")
            if b.cone == "psd":
                arr = np.asarray(coeff, float)
                if arr.shape != (b.size, b.size):
                    raise ValueError(f"coefficient shape mismatch for {name!r}")
            elif b.cone == "nonneg":
                arr = np.asarray(coeff, float)
                if arr.shape != (b.size,):
                    raise ValueError(f"coefficient shape mismatch for {name!r}")
            else:
                float(coeff)
            if not np.all(np.isfinite(np.asarray(coeff, float))):
                raise ValueError(f"non-finite coefficient for {name!r}")

        for name, coeff in self.objective.items():
            check_coeff(name, coeff)
        for con in self.linear_constraints:
            if not np.isfinite(con.rhs):
                raise ValueError("non-finite rhs")
            for name, coeff in con.coeffs.items():
                check_coeff(name, coeff)
        for soc in self.soc_constraints:
            length = None
            for term in soc.terms:
                b = byname.get(term.block)
                if b is None:
                    raise ValueError(f"unknown block {term.block!r}")
                if term.op == "id":
                    if b.cone != "nonneg":
                        raise ValueError("op 'id' requires a vector block")
                    n = b.size
                elif term.op in ("hvec", "rdiag"):
                    if b.cone != "psd" or b.herm_dim is None:
                        raise ValueError(f"op {term.op!r} requires an embedded PSD block")
                    n = b.herm_dim ** 2 if term.op == "hvec" else b.herm_dim
                if length is None:
                    length = n
                elif length != n:
                    raise ValueError("SOC terms map to different lengths")
            for name in soc.bound_coeffs:
                b = byname.get(name)
                if b is None or b.cone != "free":
                    raise ValueError("SOC bound must combine free scalar blocks")


def _half_embed(C: np.ndarray) -> np.ndarray:
    # complex-space Tr(C X) == <0.5*embed(C), embed(X)>
    return 0.5 * embed_hermitian(C)


# ---------------------------------------------------------------------------
# assemblers

def assemble_nonrobust_sdp(m: BeamformingMatrices, config: NetworkConfig) -> ConicProgram:
    """min Tr(X diag(power_diag)) s.t. Tr(X margin_k) >= noise*gamma_k, X PSD."""
    R, d = m.num_relays, m.num_users
    prog = ConicProgram()
    prog.blocks.append(VarBlock("X", "psd", 2 * R, herm_dim=R))
    prog.objective = {"X": _half_embed(np.diag(m.power_diag))}
    for k in range(d):
        prog.linear_constraints.append(LinearConstraint(
            coeffs={"X": _half_embed(m.margin[k])},
            sense=">=",
            rhs=config.dest_noise_var * float(config.sinr_targets[k]),
        ))
    prog.validate()
    return prog


def assemble_mom_sdp(m: BeamformingMatrices, bounds: UncertaintyBounds,
                     config: NetworkConfig) -> ConicProgram:
    """Min-over-max conservative design.

    Numerator and denominator of each SINR are bounded separately over the
    Frobenius balls via trace extremes (ignoring the PSD side conditions):

        Tr(X signal_k) - eps_sig Tr(X)
          >= gamma_k [Tr(X (interference_k + diag noise_k))
                      + (eps_int + eps_noise) Tr(X) + dest_noise_var]
    """
    R, d = m.num_relays, m.num_users
    prog = ConicProgram()
    prog.blocks.append(VarBlock("X", "psd", 2 * R, herm_dim=R))
    prog.objective = {"X": _half_embed(np.diag(m.power_diag)
                                       + bounds.eps_power * np.eye(R))}
    for k in range(d):
        gamma = float(config.sinr_targets[k])
        shift = float(bounds.eps_signal[k]
                      + gamma * (bounds.eps_interference[k] + bounds.eps_noise[k]))
        coeff = m.margin[k] - shift * np.eye(R)
        prog.linear_constraints.append(LinearConstraint(
            coeffs={"X": _half_embed(coeff)},
            sense=">=",
            rhs=config.dest_noise_var * gamma,
        ))
    prog.validate()
    return prog


def assemble_robust_sdp(m: BeamformingMatrices, bounds: UncertaintyBounds,
                        config: NetworkConfig) -> ConicProgram:
    """Worst-case robust design (rank-one constraint dropped).

    Per user k, PSD dual blocks Z_signal_k, Z_interference_k and the
    nonnegative diagonal z_noise_k certify the worst case; the norm terms
    enter through slack scalars t_*_k bounded by second-order cones.
    """
    R, d = m.num_relays, m.num_users
    prog = ConicProgram()
    prog.blocks.append(VarBlock("X", "psd", 2 * R, herm_dim=R))
    for k in range(d):
        prog.blocks.append(VarBlock(f"Z_signal_{k}", "psd", 2 * R, herm_dim=R))
        prog.blocks.append(VarBlock(f"Z_interference_{k}", "psd", 2 * R, herm_dim=R))
        prog.blocks.append(VarBlock(f"z_noise_{k}", "nonneg", R))
        prog.blocks.append(VarBlock(f"t_signal_{k}", "free", 1))
        prog.blocks.append(VarBlock(f"t_interference_{k}", "free", 1))
        prog.blocks.append(VarBlock(f"t_noise_{k}", "free", 1))

    prog.objective = {"X": _half_embed(np.diag(m.power_diag)
                                       + bounds.eps_power * np.eye(R))}
    for k in range(d):
        gamma = float(config.sinr_targets[k])
        # ||Z_signal - X||_F <= t_signal
        prog.soc_constraints.append(SocConstraint(
            terms=(SocTerm(1.0, f"Z_signal_{k}", "hvec"), SocTerm(-1.0, "X", "hvec")),
            bound_coeffs={f"t_signal_{k}": 1.0},
        ))
        # ||Z_interference + gamma X||_F <= t_interference
        prog.soc_constraints.append(SocConstraint(
            terms=(SocTerm(1.0, f"Z_interference_{k}", "hvec"), SocTerm(gamma, "X", "hvec")),
            bound_coeffs={f"t_interference_{k}": 1.0},
        ))
        # ||z_noise + gamma diag X||_2 <= t_noise
        prog.soc_constraints.append(SocConstraint(
            terms=(SocTerm(1.0, f"z_noise_{k}", "id"), SocTerm(gamma, "X", "rdiag")),
            bound_coeffs={f"t_noise_{k}": 1.0},
        ))
        prog.linear_constraints.append(LinearConstraint(
            coeffs={
                "X": _half_embed(m.margin[k]),
                f"Z_signal_{k}": _half_embed(-m.signal[k]),
                f"Z_interference_{k}": _half_embed(-m.interference[k]),
                f"z_noise_{k}": -m.noise_diag[k],
                f"t_signal_{k}": -float(bounds.eps_signal[k]),
                f"t_interference_{k}": -float(bounds.eps_interference[k]),
                f"t_noise_{k}": -float(bounds.eps_noise[k]),
            },
            sense=">=",
            rhs=config.dest_noise_var * gamma,
        ))
    prog.validate()
    return prog


# ---------------------------------------------------------------------------
# backend

@dataclass(frozen=True)
class SolverSettings:
    """Interior-point backend settings.

    ``feas_tol`` and the gap tolerances are passed to the backend; the
    SOLVER_TOL environment variable (read by the CLI) overrides all three.
    """

    max_iterations: int = 200
    feas_tol: float = 1e-8
    gap_rel_tol: float = 1e-8
    gap_abs_tol: float = 1e-8

    @classmethod
    def from_env(cls) -> "SolverSettings":
        tol = os.environ.get("SOLVER_TOL")
        if tol is None:
            return cls()
        tol = float(tol)
        return cls(feas_tol=tol, gap_rel_tol=tol, gap_abs_tol=tol)


@dataclass
class ConicSolution:
    """Solved block values plus status and diagnostics (complex-space objective)."""

    status: SolveStatus
    objective: float
    values: dict
    iterations: int = 0
    solver_name: str = ""
    max_linear_violation: float = float("nan")
    min_psd_eig: float = float("nan")
    max_soc_violation: float = float("nan")


def _soc_vector_numeric(term: SocTerm, value: np.ndarray, herm_dim: int | None):
    if term.op == "id":
        return term.coeff * value
    n = herm_dim
    A = (value[:n, :n] + value[n:, n:]) / 2.0
    B = (value[n:, :n] - value[:n, n:]) / 2.0
    if term.op == "rdiag":
        return term.coeff * np.diag(A)
    iu = np.triu_indices(n, 1)
    return term.coeff * np.concatenate(
        [np.diag(A), np.sqrt(2.0) * A[iu], np.sqrt(2.0) * B[iu]])


def _residuals(program: ConicProgram, values: dict):
    lin = 0.0
    for con in program.linear_constraints:
        total = 0.0
        for name, coeff in con.coeffs.items():
            v = values[name]
            if np.ndim(coeff) == 2:
                total += float(np.sum(np.asarray(coeff) * v))
            elif np.ndim(coeff) == 1:
                total += float(np.asarray(coeff) @ v)
            else:
                total += float(coeff) * float(v)
        scale = max(1.0, abs(con.rhs))
        if con.sense == ">=":
            lin = max(lin, (con.rhs - total) / scale)
        else:
            lin = max(lin, abs(total - con.rhs) / scale)
    min_eig = 0.0
    for b in program.blocks:
        v = values[b.name]
        if b.cone == "psd":
            ev = np.linalg.eigvalsh((v + v.T) / 2.0)
            min_eig = min(min_eig, float(ev.min()) / max(1.0, float(ev.max())))
        elif b.cone == "nonneg":
            min_eig = min(min_eig, float(np.min(v)) / max(1.0, float(np.max(np.abs(v)))))
    soc = 0.0
    byname = {b.name: b for b in program.blocks}
    for con in program.soc_constraints:
        u = sum(_soc_vector_numeric(t, values[t.block], byname[t.block].herm_dim)
                for t in con.terms)
        t_val = sum(c * float(values[n]) for n, c in con.bound_coeffs.items())
        soc = max(soc, (float(np.linalg.norm(u)) - t_val) / max(1.0, abs(t_val)))
    return lin, min_eig, soc


def _solve_cvxpy(program: ConicProgram, settings: SolverSettings, solver: str):
    import cvxpy as cp

    cvars = {}
    for b in program.blocks:
        if b.cone == "psd":
            cvars[b.name] = cp.Variable((b.size, b.size), PSD=True)
        elif b.cone == "nonneg":
            cvars[b.name] = cp.Variable(b.size, nonneg=True)
        else:
            cvars[b.name] = cp.Variable()

    def lin_expr(coeffs):
        expr = 0
        for name, coeff in coeffs.items():
            v = cvars[name]
            if np.ndim(coeff) == 2:
                expr = expr + cp.sum(cp.multiply(np.asarray(coeff, float), v))
            elif np.ndim(coeff) == 1:
                expr = expr + np.asarray(coeff, float) @ v
            else:
                expr = expr + float(coeff) * v
        return expr

    byname = {b.name: b for b in program.blocks}

    def soc_vector(term: SocTerm):
        v = cvars[term.block]
        b = byname[term.block]
        if term.op == "id":
            return term.coeff * v
        n = b.herm_dim
        A = (v[:n, :n] + v[n:, n:]) / 2.0
        B = (v[n:, :n] - v[:n, n:]) / 2.0
        if term.op == "rdiag":
            return term.coeff * cp.diag(A)
        pieces = [cp.diag(A)]
        if n > 1:
            iu = np.triu_indices(n, 1)
            pieces += [np.sqrt(2.0) * A[iu], np.sqrt(2.0) * B[iu]]
        stacked = pieces[0] if len(pieces) == 1 else cp.hstack(pieces)
        return term.coeff * stacked

    constraints = []
    for con in program.linear_constraints:
        expr = lin_expr(con.coeffs)
        constraints.append(expr >= con.rhs if con.sense == ">=" else expr == con.rhs)
    for con in program.soc_constraints:
        u = sum(soc_vector(t) for t in con.terms)
        t_expr = sum(c * cvars[n] for n, c in con.bound_coeffs.items())
        constraints.append(cp.norm(u, 2) <= t_expr)

    prob = cp.Problem(cp.Minimize(lin_expr(program.objective)), constraints)
    if solver == "CLARABEL":
        prob.solve(solver=cp.CLARABEL, max_iter=settings.max_iterations,
                   tol_feas=settings.feas_tol, tol_gap_rel=settings.gap_rel_tol,
                   tol_gap_abs=settings.gap_abs_tol)
    else:
        prob.solve(solver=cp.SCS, max_iters=50 * settings.max_iterations,
                   eps_abs=settings.gap_abs_tol * 10, eps_rel=settings.gap_rel_tol * 10)
    values = {}
    for b in program.blocks:
        val = cvars[b.name].value
        if val is None:
            values = None
            break
        if b.cone == "psd":
            values[b.name] = np.asarray(val, float)
        elif b.cone == "nonneg":
            values[b.name] = np.asarray(val, float).reshape(b.size)
        else:
            values[b.name] = float(val)
    iters = getattr(prob.solver_stats, "num_iters", None) or 0
    return prob.status, (float(prob.value) if prob.value is not None else float("nan")), \
        values, iters


def solve(program: ConicProgram, settings: SolverSettings | None = None) -> ConicSolution:
    """Solve with the interior-point backend (CLARABEL, SCS retry).

    Optimal status implies the recomputed primal residuals are within
    1e-7 relative; backend failures surface as NUMERICAL_FAILURE.
    """
    settings = settings or SolverSettings()
    program.validate()
    if not program.blocks:
        return ConicSolution(status=SolveStatus.OPTIMAL, objective=0.0, values={},
                             solver_name="trivial", max_linear_violation=0.0,
                             min_psd_eig=0.0, max_soc_violation=0.0)

    last_status = "error"
    for solver in ("CLARABEL", "SCS"):
        try:
            raw_status, obj, values, iters = _solve_cvxpy(program, settings, solver)
        except Exception:
            raw_status, obj, values, iters = "error", float("nan"), None, 0
        last_status = raw_status
        if raw_status in ("infeasible",):
            return ConicSolution(status=SolveStatus.INFEASIBLE, objective=float("nan"),
                                 values={}, iterations=iters, solver_name=solver)
        if raw_status in ("unbounded",):
            return ConicSolution(status=SolveStatus.UNBOUNDED, objective=float("-inf"),
                                 values={}, iterations=iters, solver_name=solver)
        if values is not None and raw_status in ("optimal", "optimal_inaccurate"):
            lin, min_eig, soc = _residuals(program, values)
            ok = lin <= 1e-7 and min_eig >= -1e-7 and soc <= 1e-7
            if ok:
                return ConicSolution(
                    status=SolveStatus.OPTIMAL, objective=obj, values=values,
                    iterations=iters, solver_name=solver,
                    max_linear_violation=lin, min_psd_eig=min_eig,
                    max_soc_violation=soc)
        # fall through to the next backend
    return ConicSolution(status=SolveStatus.NUMERICAL_FAILURE, objective=float("nan"),
                         values={}, solver_name=f"failed ({last_status})")


# ---------------------------------------------------------------------------
# export

def export_program(program: ConicProgram, path) -> None:
    """Write a self-documented sparse text form of the program.

    Header comments describe the sections; coefficients are emitted as
    (block, index..., value) triplets with %.17g floats, deterministically
    ordered, so diffing two exports is meaningful.
    """
    program.validate()
    buf = io.StringIO()
    w = buf.write
    w("# relaybf conic program export v1\n")
    w("# sections: blocks / objective / linear / soc\n")
    w("# block <name> <cone:psd|nonneg|free> <size> <herm_dim|->\n")
    w("# objective and linear coefficient lines: <block> <i> <j> <value>\n")
    w("#   (psd blocks: dense symmetric coefficient, upper triangle incl. diagonal;\n")
    w("#    nonneg blocks: j omitted; free scalars: i and j omitted)\n")
    w("# soc constraint: ||sum coeff*op(block)||_2 <= sum coeff*scalar_block\n")
    w(f"blocks {len(program.blocks)}\n")
    for b in program.blocks:
        hd = b.herm_dim if b.herm_dim is not None else "-"
        w(f"block {b.name} {b.cone} {b.size} {hd}\n")

    def emit_coeffs(coeffs):
        lines = []
        for name in sorted(coeffs):
            coeff = coeffs[name]
            if np.ndim(coeff) == 2:
                arr = np.asarray(coeff, float)
                n = arr.shape[0]
                for i in range(n):
                    for j in range(i, n):
                        if arr[i, j] != 0.0:
                            lines.append(f"{name} {i} {j} {arr[i, j]:.17g}\n")
            elif np.ndim(coeff) == 1:
                arr = np.asarray(coeff, float)
                for i, v in enumerate(arr):
                    if v != 0.0:
                        lines.append(f"{name} {i} {v:.17g}\n")
            else:
                lines.append(f"{name} {float(coeff):.17g}\n")
        return lines

    obj_lines = emit_coeffs(program.objective)
    w(f"objective {len(obj_lines)}\n")
    for line in obj_lines:
        w(line)
    w(f"linear {len(program.linear_constraints)}\n")
    for con in program.linear_constraints:
        lines = emit_coeffs(con.coeffs)
        w(f"constraint {con.sense} {con.rhs:.17g} {len(lines)}\n")
        for line in lines:
            w(line)
    w(f"soc {len(program.soc_constraints)}\n")
    for con in program.soc_constraints:
        w(f"cone {len(con.terms)} {len(con.bound_coeffs)}\n")
        for t in con.terms:
            w(f"term {t.coeff:.17g} {t.block} {t.op}\n")
        for name in sorted(con.bound_coeffs):
            w(f"bound {con.bound_coeffs[name]:.17g} {name}\n")

    text = buf.getvalue()
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
