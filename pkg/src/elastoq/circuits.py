"""Gate-level construction and dense statevector simulation of Trotter steps.

Qubit layout (1-based, qubit 1 is the most significant bit of the amplitude
index): qubits 1..4 hold the 16 field components, followed by the x, y, z
axis blocks of n qubits each.  Within an axis block the level-k ladder
operator acts on the k least significant qubits of that block, so its target
qubit is 5 + axis*n - k.

Rotation sign convention: the controlled-RZ wrapped in the ladder/phase/
Hadamard conjugation realizes, for RZ parameter x (phases exp(+-i*x) on
target |0>/|1>), the real rotation exp(x * S_k) on every coupled index pair.
A single exact term exponential of the split generator acts on its eigen-
sector as exp(+theta * S_k) with theta = lambda * tau / 2h, so the step
builders pass x = +theta while the standalone pair-rotation block below uses
x = -theta (rotation matrix [[cos, -sin], [sin, cos]] on each pair).

Program text format (see serialize_program / parse_program):

    ELASTOQ-PROGRAM v1        header, then "key value" metadata lines
    gates <count>             followed by one gate per line:
    H t | S t | SDG t         single-qubit gates on qubit t
    CNOT t c                  target t, control c
    MCRZ t [c...] x           RZ(x) on t, controls all-ones
    PCRZ t p<j> [c...] x      RZ(x) on t, state register matching pattern j
                              (qubit 1 = most significant bit of j) plus
                              all-ones ladder controls c
    V4 1 2 3 4 u<i>           16x16 unitary payload i on the state register
    V4DG 1 2 3 4 u<i>         its adjoint
    %unitary <i>              payload block: 16 lines of 32 floats (re im),
                              17 significant digits
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .hamiltonian import (
    HamiltonianModel,
    TermKey,
    ZERO_EIGENVALUE_TOL,
    apply_H,
    materialize_sparse_H,
    operator_norm_bound,
    term_angle,
    u1_step_cnots,
    u2_step_cnots,
)
from .lattice import apply_pair_rotation
from .media import STATE_DIM

_SQRT_HALF = 1.0 / math.sqrt(2.0)
STATE_QUBITS = (1, 2, 3, 4)

GATE_KINDS = ("h", "s", "sdg", "cnot", "mcrz", "pcrz", "v4", "v4dg")


@dataclass(frozen=True, eq=False)
class Gate:
    """One IR gate; multi-controlled rotations and 4-qubit unitaries are primitives."""

    kind: str
    target: int = 0
    controls: tuple[int, ...] = ()
    pattern: int | None = None
    angle: float = 0.0
    targets: tuple[int, ...] = ()
    unitary: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class GateProgram:
    """Ordered gate list plus step metadata.

    cnot_account comes from the closed counting formulas, never from counting
    IR entries (the multi-controlled rotations stay primitive here).
    """

    n: int
    scheme: str
    tau: float
    gates: tuple[Gate, ...]
    cnot_account: int

    @property
    def qubits(self) -> int:
        return 3 * self.n + 4

    @property
    def dim(self) -> int:
        return 1 << self.qubits


def ladder_qubit(n: int, axis: int, k: int) -> int:
    """Qubit carrying the level-k ladder target within one axis block."""
    return 5 + axis * n - k


def _validate_gate(gate: Gate, qubits: int) -> None:
    touched = [gate.target] if gate.kind not in ("v4", "v4dg") else list(gate.targets)
    touched += list(gate.controls)
    if len(set(touched)) != len(touched):
        raise ValueError(f"gate {gate.kind} touches a qubit twice: {touched}")
    for q in touched:
        if not 1 <= q <= qubits:
            raise ValueError(f"gate {gate.kind} addresses qubit {q} outside 1..{qubits}")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _w_gates(n: int, axis: int, k: int, rz_angle: float,
             pattern: int | None) -> list[Gate]:
    """Gate subsequence realizing exp(rz_angle * S_k) on the (conditioned) axis.

    Time order: CNOT ladder off the target qubit, S^dag, H, the controlled
    rotation, H, S, ladder again (the ladder gates are mutually commuting
    involutions).
    """
    target = ladder_qubit(n, axis, k)
    lowers = tuple(ladder_qubit(n, axis, l) for l in range(1, k))
    ladder = [Gate("cnot", target=l, controls=(target,)) for l in lowers]
    if pattern is None:
        rz = Gate("mcrz", target=target, controls=lowers, angle=rz_angle)
    else:
        rz = Gate("pcrz", target=target, controls=lowers, pattern=pattern,
                  angle=rz_angle)
    return (ladder
            + [Gate("sdg", target=target), Gate("h", target=target), rz,
               Gate("h", target=target), Gate("s", target=target)]
            + ladder[::-1])


def build_W_jk(model: HamiltonianModel, key: TermKey, tau: float) -> list[Gate]:
    """Uncontrolled pair-rotation block for one term: exp(-theta_jk * S_k)."""
    return _w_gates(model.shape.n, key.axis, key.k,
                    rz_angle=-term_angle(model, key, tau), pattern=None)


def build_script_W(model: HamiltonianModel, axis: int, j: int, tau: float,
                   skip_zero: bool = True, k_descending: bool = False) -> list[Gate]:
    """Basis change + all pattern-controlled levels of one eigenindex block.

    Equals the ordered product over k of the exact term exponentials for
    eigenindex j of this axis (identity off the j sector).
    """
    eig = model.eigensystems[axis - 1]
    n = model.shape.n
    gates = [Gate("v4dg", targets=STATE_QUBITS, unitary=eig.v)]
    lam = eig.lambdas[j]
    if not (skip_zero and abs(lam) < ZERO_EIGENVALUE_TOL):
        levels = range(n, 0, -1) if k_descending else range(1, n + 1)
        for k in levels:
            theta = term_angle(model, TermKey(axis, j, k), tau)
            gates += _w_gates(n, axis, k, rz_angle=theta, pattern=j)
    gates.append(Gate("v4", targets=STATE_QUBITS, unitary=eig.v))
    return gates


def _sweep_gates(model: HamiltonianModel, tau: float, skip_zero: bool,
                 forward: bool, elide_basis_changes: bool) -> list[Gate]:
    """One full pass over all (axis, j, k) terms in forward or reversed order."""
    gates: list[Gate] = []
    axes = (1, 2, 3) if forward else (3, 2, 1)
    for axis in axes:
        eig = model.eigensystems[axis - 1]
        j_values = range(STATE_DIM) if forward else range(STATE_DIM - 1, -1, -1)
        if elide_basis_changes:
            gates.append(Gate("v4dg", targets=STATE_QUBITS, unitary=eig.v))
            for j in j_values:
                block = build_script_W(model, axis, j, tau, skip_zero=skip_zero,
                                       k_descending=not forward)
                gates += block[1:-1]  # interior basis changes cancel
            gates.append(Gate("v4", targets=STATE_QUBITS, unitary=eig.v))
        else:
            for j in j_values:
                gates += build_script_W(model, axis, j, tau, skip_zero=skip_zero,
                                        k_descending=not forward)
    return gates


def build_U1(model: HamiltonianModel, tau: float, skip_zero: bool = True,
             elide_basis_changes: bool = False) -> GateProgram:
    """First-order step: all terms once, axes/eigenindices/levels ascending."""
    gates = _sweep_gates(model, tau, skip_zero, forward=True,
                         elide_basis_changes=elide_basis_changes)
    return GateProgram(n=model.shape.n, scheme="u1", tau=tau, gates=tuple(gates),
                       cnot_account=u1_step_cnots(model.shape.n))


def build_U2(model: HamiltonianModel, tau: float, skip_zero: bool = True,
             elide_basis_changes: bool = False) -> GateProgram:
    """Symmetric second-order step: forward half then exactly reversed half."""
    gates = _sweep_gates(model, tau / 2, skip_zero, forward=True,
                         elide_basis_changes=elide_basis_changes)
    gates += _sweep_gates(model, tau / 2, skip_zero, forward=False,
                          elide_basis_changes=elide_basis_changes)
    return GateProgram(n=model.shape.n, scheme="u2", tau=tau, gates=tuple(gates),
                       cnot_account=u2_step_cnots(model.shape.n))


# ---------------------------------------------------------------------------
# statevector simulation
# ---------------------------------------------------------------------------

def _slicer(qubits: int, fixed: dict[int, int]) -> tuple:
    """Index tuple fixing the given 1-based qubits; trailing axes pass through."""
    idx: list = [slice(None)] * qubits
    for q, bit in fixed.items():
        idx[q - 1] = bit
    return tuple(idx)


def _apply_gate(state: np.ndarray, nd: np.ndarray, gate: Gate, qubits: int) -> None:
    """Apply one gate in place; nd is the state reshaped to (2,)*qubits (+batch)."""
    kind = gate.kind
    if kind == "h":
        i0 = _slicer(qubits, {gate.target: 0})
        i1 = _slicer(qubits, {gate.target: 1})
        a = nd[i0].copy()
        b = nd[i1]
        nd[i0] = (a + b) * _SQRT_HALF
        nd[i1] = (a - b) * _SQRT_HALF
    elif kind == "s":
        nd[_slicer(qubits, {gate.target: 1})] *= 1j
    elif kind == "sdg":
        nd[_slicer(qubits, {gate.target: 1})] *= -1j
    elif kind == "cnot":
        control = gate.controls[0]
        i10 = _slicer(qubits, {control: 1, gate.target: 0})
        i11 = _slicer(qubits, {control: 1, gate.target: 1})
        tmp = nd[i10].copy()
        nd[i10] = nd[i11]
        nd[i11] = tmp
    elif kind in ("mcrz", "pcrz"):
        fixed = {c: 1 for c in gate.controls}
        if kind == "pcrz":
            for q in STATE_QUBITS:
                fixed[q] = (gate.pattern >> (4 - q)) & 1
        phase = np.exp(1j * gate.angle)
        nd[_slicer(qubits, {**fixed, gate.target: 0})] *= phase
        nd[_slicer(qubits, {**fixed, gate.target: 1})] *= np.conj(phase)
    elif kind in ("v4", "v4dg"):
        u = gate.unitary
        defect = np.linalg.norm(u.conj().T @ u - np.eye(STATE_DIM), 2)
        if defect > 1e-10:
            raise ValueError(f"four-qubit payload is not unitary (defect {defect:.3e})")
        mat = u.conj().T if kind == "v4dg" else u
        flat = state.reshape(STATE_DIM, -1)
        flat[:, :] = mat @ flat
    else:
        raise ValueError(f"unknown gate kind {kind!r}")


def simulate(program: GateProgram, psi: np.ndarray) -> np.ndarray:
    """Apply the program to a state (dim,) or a batch of columns (dim, b)."""
    if psi.shape[0] != program.dim:
        raise ValueError(f"state length {psi.shape[0]} != 2^{program.qubits}")
    state = np.array(psi, dtype=complex)
    nd = state.reshape((2,) * program.qubits + state.shape[1:])
    for gate in program.gates:
        _validate_gate(gate, program.qubits)
        _apply_gate(state, nd, gate, program.qubits)
    return state


def program_unitary(program: GateProgram) -> np.ndarray:
    """Dense matrix of the program (columns = simulated basis states)."""
    return simulate(program, np.eye(program.dim, dtype=complex))


# ---------------------------------------------------------------------------
# structural fast path
# ---------------------------------------------------------------------------

def _fast_half_pass(grid: np.ndarray, model: HamiltonianModel, tau: float,
                    forward: bool, skip_zero: bool) -> None:
    """One sweep over all terms applied structurally (no gate dispatch)."""
    n, h = model.shape.n, model.shape.h
    axes = (1, 2, 3) if forward else (3, 2, 1)
    for axis in axes:
        eig = model.eigensystems[axis - 1]
        v = eig.v
        flat = grid.reshape(STATE_DIM, -1)
        flat[:, :] = v.conj().T @ flat
        j_values = range(STATE_DIM) if forward else range(STATE_DIM - 1, -1, -1)
        levels = range(1, n + 1) if forward else range(n, 0, -1)
        for j in j_values:
            lam = eig.lambdas[j]
            if skip_zero and abs(lam) < ZERO_EIGENVALUE_TOL:
                continue
            theta = lam * tau / (2 * h)
            cos_t, sin_t = math.cos(theta), math.sin(theta)
            for k in levels:
                apply_pair_rotation(grid[j], axis - 1, k, cos_t, sin_t)
        flat[:, :] = v @ flat


def apply_block_fast(model: HamiltonianModel, scheme: str, tau: float,
                     psi: np.ndarray, skip_zero: bool = True) -> np.ndarray:
    """Apply one u1/u2 step as projector-sector pair rotations.

    Mathematically identical to simulating the gate program, but works on the
    eigenbasis-rotated amplitude slabs directly.  Accepts (dim,) states or
    (dim, b) batches.
    """
    if psi.shape[0] != model.dim:
        raise ValueError(f"state length {psi.shape[0]} != 2^{model.qubits}")
    state = np.array(psi, dtype=complex)
    points = model.shape.points
    grid = state.reshape((STATE_DIM, points, points, points) + state.shape[1:])
    if scheme == "u1":
        _fast_half_pass(grid, model, tau, forward=True, skip_zero=skip_zero)
    elif scheme == "u2":
        _fast_half_pass(grid, model, tau / 2, forward=True, skip_zero=skip_zero)
        _fast_half_pass(grid, model, tau / 2, forward=False, skip_zero=skip_zero)
    else:
        raise ValueError(f"scheme must be 'u1' or 'u2', got {scheme!r}")
    return state


def scheme_unitary(model: HamiltonianModel, scheme: str, tau: float,
                   skip_zero: bool = True) -> np.ndarray:
    """Dense matrix of one Trotter step via the fast path (test/oracle sizes)."""
    return apply_block_fast(model, scheme, tau, np.eye(model.dim, dtype=complex),
                            skip_zero=skip_zero)


# ---------------------------------------------------------------------------
# exact evolution oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvolveResult:
    """Exact-evolution output with the method actually used."""

    state: np.ndarray
    method: str
    substeps: int
    residual: float


@dataclass(frozen=True)
class KrylovOptions:
    """Lanczos propagator tuning; defaults are a safe Hermitian-expm regime."""

    krylov_dim: int = 30
    tol: float = 1e-10
    max_norm_dt: float = 10.0
    max_refinements: int = 12


def _tridiag_phases(alphas, betas, dt):
    evals, evecs = scipy.linalg.eigh_tridiagonal(alphas, betas)
    return evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())


def _lanczos_step(matvec, v: np.ndarray, dt: float, m: int,
                  step_tol: float = 0.0) -> tuple[np.ndarray, float]:
    """One step w ~= exp(-i*dt*A) v with an m-dim Krylov space; returns (w, est).

    Stops early once the residual estimate drops below step_tol (checked every
    few iterations via the small tridiagonal problem).
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy(), 0.0
    basis = np.empty((m, v.shape[0]), dtype=complex)
    basis[0] = v / beta0
    alphas: list[float] = []
    betas: list[float] = []
    m_eff, happy = m, False
    u = None
    for jj in range(m):
        w = matvec(basis[jj])
        if jj > 0:
            w = w - betas[jj - 1] * basis[jj - 1]
        a = float(np.real(np.vdot(basis[jj], w)))
        w = w - a * basis[jj]
        # full reorthogonalization; m is small so the cost is negligible
        w = w - basis[: jj + 1].conj() @ w @ basis[: jj + 1]
        alphas.append(a)
        b = float(np.linalg.norm(w))
        if b < 1e-14 * max(1.0, abs(a)):
            m_eff, happy = jj + 1, True
            break
        betas.append(b)
        if jj + 1 == m:
            break
        basis[jj + 1] = w / b
        if step_tol > 0 and (jj + 1) % 4 == 0:
            u = _tridiag_phases(alphas, betas[:jj], dt)
            if beta0 * b * abs(u[-1]) < step_tol / 4:
                m_eff = jj + 1
                break
        u = None
    if u is None:
        u = _tridiag_phases(alphas[:m_eff], betas[: m_eff - 1], dt)
    w_out = beta0 * (basis[:m_eff].T @ u)
    est = 0.0 if happy else float(beta0 * betas[m_eff - 1] * abs(u[-1]))
    return w_out, est


def lanczos_expm_multiply(matvec, v: np.ndarray, t: float, norm_bound: float,
                          options: KrylovOptions = KrylovOptions()) -> tuple[np.ndarray, int, float]:
    """Compute exp(-i*t*A) v for Hermitian A via restarted Lanczos substeps.

    Substeps keep norm_bound * dt at or below options.max_norm_dt; the run is
    restarted with doubled substep count until the accumulated residual
    estimate meets options.tol.  Returns (result, substeps, residual).
    """
    if t == 0:
        return v.copy(), 0, 0.0
    nsub = max(1, math.ceil(abs(t) * norm_bound / options.max_norm_dt))
    total = math.inf
    for _ in range(options.max_refinements):
        dt = t / nsub
        w = v
        total = 0.0
        ok = True
        for _ in range(nsub):
            w, est = _lanczos_step(matvec, w, dt, options.krylov_dim,
                                   step_tol=options.tol / nsub)
            total += est
            if total > options.tol:
                ok = False
                break
        if ok:
            return w, nsub, total
        nsub *= 2
    raise RuntimeError(
        f"Krylov propagator did not reach residual {options.tol:.1e} "
        f"within {nsub // 2} substeps (achieved estimate {total:.3e})"
    )


def exact_evolve(model: HamiltonianModel, T: float, psi: np.ndarray,
                 method: str = "auto", dense_dim_cap: int = 4096,
                 krylov: KrylovOptions = KrylovOptions()) -> EvolveResult:
    """Evolve a state by the exact propagator over time T.

    Dense eigendecomposition when the dimension fits dense_dim_cap (or when
    forced), a residual-controlled Lanczos propagator otherwise.
    """
    if psi.shape[0] != model.dim:
        raise ValueError(f"state length {psi.shape[0]} != 2^{model.qubits}")
    if method == "auto":
        method = "dense" if model.dim <= dense_dim_cap else "krylov"
    if method == "dense":
        h_dense = materialize_sparse_H(model).toarray()
        evals, evecs = np.linalg.eigh(h_dense)
        out = evecs @ (np.exp(-1j * evals * T) * (evecs.conj().T @ psi.astype(complex)))
        return EvolveResult(state=out, method="dense", substeps=1, residual=0.0)
    if method == "krylov":
        out, nsub, res = lanczos_expm_multiply(
            lambda x: apply_H(model, x), psi.astype(complex), T,
            norm_bound=operator_norm_bound(model), options=krylov)
        return EvolveResult(state=out, method="krylov", substeps=nsub, residual=res)
    raise ValueError(f"method must be auto, dense, or krylov, got {method!r}")


# ---------------------------------------------------------------------------
# program text serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def serialize_program(program: GateProgram) -> str:
    """Render a program in the line-oriented text format (module docstring)."""
    payloads: list[np.ndarray] = []
    payload_ids: dict[int, int] = {}

    def ref(u: np.ndarray) -> int:
        if id(u) not in payload_ids:
            payload_ids[id(u)] = len(payloads)
            payloads.append(u)
        return payload_ids[id(u)]

    lines = [
        "ELASTOQ-PROGRAM v1",
        f"n {program.n}",
        f"qubits {program.qubits}",
        f"scheme {program.scheme}",
        f"tau {_fmt(program.tau)}",
        f"cnot_account {program.cnot_account}",
        f"gates {len(program.gates)}",
    ]
    for g in program.gates:
        if g.kind in ("h", "s", "sdg"):
            lines.append(f"{g.kind.upper()} {g.target}")
        elif g.kind == "cnot":
            lines.append(f"CNOT {g.target} {g.controls[0]}")
        elif g.kind == "mcrz":
            ctrl = " ".join(str(c) for c in g.controls)
            lines.append(f"MCRZ {g.target}{' ' + ctrl if ctrl else ''} {_fmt(g.angle)}")
        elif g.kind == "pcrz":
            ctrl = " ".join(str(c) for c in g.controls)
            lines.append(f"PCRZ {g.target} p{g.pattern}"
                         f"{' ' + ctrl if ctrl else ''} {_fmt(g.angle)}")
        elif g.kind in ("v4", "v4dg"):
            tgt = " ".join(str(t) for t in g.targets)
            lines.append(f"{g.kind.upper()} {tgt} u{ref(g.unitary)}")
        else:
            raise ValueError(f"unknown gate kind {g.kind!r}")
    for idx, u in enumerate(payloads):
        lines.append(f"%unitary {idx}")
        mat = np.asarray(u, dtype=complex)
        for row in mat:
            lines.append(" ".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row))
    return "\n".join(lines) + "\n"


def parse_program(text: str) -> GateProgram:
    """Parse the text format back into a GateProgram."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ELASTOQ-PROGRAM v1":
        raise ValueError("missing ELASTOQ-PROGRAM v1 header")
    meta: dict[str, str] = {}
    pos = 1
    while pos < len(lines):
        key, _, value = lines[pos].partition(" ")
        pos += 1
        meta[key] = value
        if key == "gates":
            break
    n_gates = int(meta["gates"])
    gate_lines = lines[pos:pos + n_gates]
    pos += n_gates

    payloads: dict[int, np.ndarray] = {}
    while pos < len(lines):
        line = lines[pos].strip()
        pos += 1
        if not line:
            continue
        if not line.startswith("%unitary"):
            raise ValueError(f"unexpected trailer line: {line!r}")
        idx = int(line.split()[1])
        rows = []
        for _ in range(STATE_DIM):
            vals = [float(tok) for tok in lines[pos].split()]
            pos += 1
            rows.append([complex(vals[2 * i], vals[2 * i + 1]) for i in range(STATE_DIM)])
        payloads[idx] = np.array(rows)

    gates: list[Gate] = []
    for line in gate_lines:
        toks = line.split()
        kind = toks[0].lower()
        if kind in ("h", "s", "sdg"):
            gates.append(Gate(kind, target=int(toks[1])))
        elif kind == "cnot":
            gates.append(Gate("cnot", target=int(toks[1]), controls=(int(toks[2]),)))
        elif kind == "mcrz":
            gates.append(Gate("mcrz", target=int(toks[1]),
                              controls=tuple(int(t) for t in toks[2:-1]),
                              angle=float(toks[-1])))
        elif kind == "pcrz":
            gates.append(Gate("pcrz", target=int(toks[1]),
                              pattern=int(toks[2][1:]),
                              controls=tuple(int(t) for t in toks[3:-1]),
                              angle=float(toks[-1])))
        elif kind in ("v4", "v4dg"):
            gates.append(Gate(kind, targets=tuple(int(t) for t in toks[1:5]),
                              unitary=payloads[int(toks[5][1:])]))
        else:
            raise ValueError(f"unknown gate line: {line!r}")
    return GateProgram(n=int(meta["n"]), scheme=meta["scheme"],
                       tau=float(meta["tau"]), gates=tuple(gates),
                       cnot_account=int(meta["cnot_account"]))
