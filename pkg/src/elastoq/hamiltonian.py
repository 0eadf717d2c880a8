"""Hamiltonian assembly, term enumeration, and error/cost accounting.

The evolution generator factorizes per axis into a 16x16 symmetric cell
matrix acting on the state register tensored with the anti-symmetric
difference operator acting on the spatial register.  Eigendecomposing the
cell matrix splits the generator into 48n rank-one-projector terms, one per
(axis, eigenindex, ladder level); those terms drive both the circuit
construction and every closed-form bound here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np
import scipy.sparse as sp

from .lattice import LadderTerm, LatticeShape, apply_d_axis, d_axis_matrix, s_axis_matrix
from .media import (
    MaterialParams,
    AxisEigenSystem,
    CellMatrices,
    build_cell_matrices,
    compliance_inverse_norm,
    eigendecompose_axis,
    wave_speed_scale,
    STATE_DIM,
)

BoundScheme = Literal["first-norm", "first-commutator", "second"]

#: Eigenvalues below this are treated as exact zeros of the padding/kernel
#: sector; the simulator may skip them, cost accounting never does.
ZERO_EIGENVALUE_TOL = 1e-13

#: Default cap on dense/sparse materialization of the full Hamiltonian.
DEFAULT_H_MATERIALIZE_MAX_N = 4


@dataclass(frozen=True)
class TermKey:
    """Identifies one product-formula term: axis, eigenindex j, ladder level k."""

    axis: int
    j: int
    k: int


@dataclass(frozen=True)
class HamiltonianModel:
    """Immutable bundle of lattice shape, material, and cell eigensystems."""

    shape: LatticeShape
    params: MaterialParams
    cell: CellMatrices
    eigensystems: tuple[AxisEigenSystem, AxisEigenSystem, AxisEigenSystem]

    @classmethod
    def build(cls, shape: LatticeShape, params: MaterialParams) -> "HamiltonianModel":
        cell = build_cell_matrices(params)
        eigs = tuple(eigendecompose_axis(cell, axis) for axis in (1, 2, 3))
        return cls(shape, params, cell, eigs)

    def with_eigensystems(self, eigensystems) -> "HamiltonianModel":
        """Same model with replacement eigensystems (basis-freedom tests)."""
        return HamiltonianModel(self.shape, self.params, self.cell, tuple(eigensystems))

    @property
    def qubits(self) -> int:
        return 3 * self.shape.n + 4

    @property
    def dim(self) -> int:
        return 1 << self.qubits

    @property
    def term_count(self) -> int:
        return 48 * self.shape.n

    def axis_matrix(self, axis: int) -> np.ndarray:
        """16x16 transformed coupling for one axis, rebuilt from the eigensystem."""
        eig = self.eigensystems[axis - 1]
        return (eig.v * eig.lambdas) @ eig.v.T

    def term_keys(self) -> Iterator[TermKey]:
        """All 48n term keys in the fixed product order of the first-order step."""
        for axis in (1, 2, 3):
            for j in range(STATE_DIM):
                for k in range(1, self.shape.n + 1):
                    yield TermKey(axis, j, k)


def build_model(n: int, h: float, params: MaterialParams) -> HamiltonianModel:
    """Convenience constructor from plain numbers."""
    return HamiltonianModel.build(LatticeShape(n=n, h=h), params)


def term_angle(model: HamiltonianModel, key: TermKey, tau: float) -> float:
    """Rotation angle lambda_j * tau / (2h) of one term for step size tau."""
    lam = model.eigensystems[key.axis - 1].lambdas[key.j]
    return float(lam * tau / (2 * model.shape.h))


def apply_H(model: HamiltonianModel, v: np.ndarray) -> np.ndarray:
    """Matrix-free application of the Hermitian generator to a state vector."""
    if v.shape[0] != model.dim:
        raise ValueError(f"state length {v.shape[0]} != 2^{model.qubits}")
    points = model.shape.points
    grid = v.reshape(STATE_DIM, points, points, points)
    out = np.zeros(grid.shape, dtype=complex)
    for axis in (1, 2, 3):
        dv = apply_d_axis(axis, model.shape, grid)
        out += 1j * np.tensordot(model.axis_matrix(axis), dv, axes=(1, 0))
    return out.reshape(-1)


def operator_norm_bound(model: HamiltonianModel) -> float:
    """Closed-form upper bound 3 * sqrt(||S^-1||/rho) / h on the generator norm."""
    return 3.0 * wave_speed_scale(model.params) / model.shape.h


def materialize_sparse_H(model: HamiltonianModel,
                         max_n: int = DEFAULT_H_MATERIALIZE_MAX_N) -> sp.csr_matrix:
    """Sparse Hermitian matrix of the generator (oracle/test path only)."""
    n = model.shape.n
    if n > max_n:
        raise ValueError(
            f"materializing the full generator for n={n} exceeds the cap n<={max_n}"
        )
    h = None
    for axis in (1, 2, 3):
        m_cell = sp.csr_matrix(model.axis_matrix(axis))
        block = sp.kron(m_cell, 1j * d_axis_matrix(axis, model.shape, max_n=max_n),
                        format="csr")
        h = block if h is None else h + block
    residual = abs(h - h.getH())
    if residual.nnz and residual.max() > 1e-14:
        raise AssertionError(f"hermiticity residual {residual.max():.3e} exceeds 1e-14")
    return ((h + h.getH()) * 0.5).tocsr()


def materialize_term(model: HamiltonianModel, key: TermKey,
                     max_n: int = DEFAULT_H_MATERIALIZE_MAX_N) -> sp.csr_matrix:
    """Sparse matrix of a single projector term (test oracle)."""
    eig = model.eigensystems[key.axis - 1]
    phi = eig.v[:, key.j]
    proj = sp.csr_matrix(np.outer(phi, phi))
    s_mat = s_axis_matrix(LadderTerm(key.axis, key.k), model.shape, max_n=max_n)
    coeff = 1j * eig.lambdas[key.j] / (2 * model.shape.h)
    return sp.kron(proj, coeff * s_mat, format="csr")


# ---------------------------------------------------------------------------
# closed-form one-step error bounds
# ---------------------------------------------------------------------------

def bound_first_order_norm(model: HamiltonianModel, tau: float) -> float:
    """One-step first-order bound from the product of term norms."""
    n, h = model.shape.n, model.shape.h
    s_inv = compliance_inverse_norm(model.params)
    return 81.0 * tau**2 / (2 * h**2) * s_inv / model.params.rho * n**2


def bound_first_order_commutator(model: HamiltonianModel, tau: float) -> float:
    """One-step first-order bound from commutator scaling; sharper in n."""
    n, h = model.shape.n, model.shape.h
    s_inv = compliance_inverse_norm(model.params)
    return 9.0 * tau**2 / (4 * h**2) * s_inv / model.params.rho * (5 * n - 1)


def bound_second_order(model: HamiltonianModel, tau: float) -> tuple[float, bool]:
    """One-step second-order bound and its applicability flag.

    The underlying inequality only holds while the cubed argument stays at or
    below one, equivalently bound/2 <= 1; outside that window the value is
    still returned but flagged inapplicable.
    """
    n, h = model.shape.n, model.shape.h
    v = wave_speed_scale(model.params)
    arg = 1440.0 * n * tau * v / h
    bound = 2.0 * arg**3
    return bound, bound <= 2.0


# ---------------------------------------------------------------------------
# gate accounting
# ---------------------------------------------------------------------------

def qubit_count(n: int) -> int:
    """Total qubits: 4 state-register qubits plus n per spatial axis."""
    return 3 * n + 4


def u1_step_cnots(n: int) -> int:
    """CNOT count of one first-order step (ladders, controlled RZ, basis changes)."""
    return 432 * n * n + 378


def u2_step_cnots(n: int) -> int:
    """CNOT count of one second-order step: two half-steps."""
    return 2 * u1_step_cnots(n)


@dataclass(frozen=True)
class ErrorBudget:
    """Step count and CNOT totals implied by one error bound at (T, epsilon)."""

    scheme: str
    constant: float
    order: int
    applicable: bool
    steps: int
    steps_formula: float
    qubits: int
    per_step_cnot: int
    total_cnot: int
    formula_total_cnot: float


def trotter_constant(model: HamiltonianModel, scheme: BoundScheme) -> tuple[float, int]:
    """Prefactor C and order p of the one-step bound C * tau^p."""
    if scheme == "first-norm":
        return bound_first_order_norm(model, 1.0), 2
    if scheme == "first-commutator":
        return bound_first_order_commutator(model, 1.0), 2
    if scheme == "second":
        return bound_second_order(model, 1.0)[0], 3
    raise ValueError(f"unknown bound scheme {scheme!r}")


def steps_and_cost(model: HamiltonianModel, T: float, epsilon: float,
                   scheme: BoundScheme) -> ErrorBudget:
    """Convert a one-step bound into global step and CNOT counts."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    c, p = trotter_constant(model, scheme)
    n = model.shape.n
    m_formula = (c * T**p / epsilon) ** (1.0 / (p - 1))
    # relative slack so float noise cannot push an exact integer over the ceiling
    m = max(1, math.ceil(m_formula * (1.0 - 1e-12)))
    per_step = u2_step_cnots(n) if scheme == "second" else u1_step_cnots(n)
    if scheme == "second":
        applicable = bound_second_order(model, T / m)[1]
    else:
        applicable = True
    budget = ErrorBudget(
        scheme=scheme,
        constant=c,
        order=p,
        applicable=applicable,
        steps=m,
        steps_formula=m_formula,
        qubits=qubit_count(n),
        per_step_cnot=per_step,
        total_cnot=m * per_step,
        formula_total_cnot=m_formula * per_step,
    )
    # Ceiling slack: the integer total can exceed the closed form by at most
    # one step's worth of gates.
    assert budget.total_cnot <= budget.formula_total_cnot + per_step
    return budget


def format_cost_report(model: HamiltonianModel, T: float, epsilon: float,
                       budget: ErrorBudget) -> str:
    """Flat key-value text record of one cost calculation."""
    p = model.params
    rows = [
        ("scheme", budget.scheme),
        ("n", model.shape.n),
        ("h", model.shape.h),
        ("T", T),
        ("epsilon", epsilon),
        ("rho", p.rho),
        ("E", p.E),
        ("nu", p.nu),
        ("C", budget.constant),
        ("p", budget.order),
        ("m", budget.steps),
        ("m_formula", budget.steps_formula),
        ("applicable", budget.applicable),
        ("qubits", budget.qubits),
        ("per_step_cnot", budget.per_step_cnot),
        ("total_cnot", budget.total_cnot),
        ("formula_total_cnot", budget.formula_total_cnot),
    ]
    return "\n".join(f"{key} {value}" for key, value in rows)


@dataclass(frozen=True)
class DefectEstimate:
    """Measured distance between one Trotter step and the exact propagator."""

    value: float
    exact: bool

    @property
    def label(self) -> str:
        return "operator-norm (exact SVD)" if self.exact else "probe lower bound"


def empirical_trotter_error(model: HamiltonianModel, tau: float, scheme: str,
                            dense_dim_cap: int = 4096, n_probes: int = 32,
                            seed: int = 0) -> DefectEstimate:
    """Measure ||U(tau) - exact one-step propagator|| for scheme 'u1' or 'u2'.

    Exact largest singular value when the dimension fits the dense cap,
    otherwise a lower bound from random unit probes.
    """
    from .circuits import apply_block_fast, exact_evolve, scheme_unitary

    dim = model.dim
    if dim <= dense_dim_cap:
        u_trotter = scheme_unitary(model, scheme, tau)
        h_dense = materialize_sparse_H(model).toarray()
        evals, evecs = np.linalg.eigh(h_dense)
        u_exact = (evecs * np.exp(-1j * evals * tau)) @ evecs.conj().T
        value = float(np.linalg.norm(u_trotter - u_exact, 2))
        return DefectEstimate(value=value, exact=True)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        diff = apply_block_fast(model, scheme, tau, v) - exact_evolve(model, tau, v).state
        worst = max(worst, float(np.linalg.norm(diff)))
    return DefectEstimate(value=worst, exact=False)
