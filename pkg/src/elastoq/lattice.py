"""Ladder operators of the central-difference stencil on a 2^n grid.

The grid derivative (q_{j+1} - q_{j-1}) / 2h with ghost values q_{-1} = q_N = 0
splits into n anti-symmetric ladder terms S_k, k = 1..n.  S_k couples exactly
the index pairs (j-1, j) with j = 2^(k-1) mod 2^k, acting as [[0, 1], [-1, 0]]
on each pair; every pair of adjacent grid indices is covered by exactly one k.
Hot-path application is index arithmetic on the amplitude array; dense/sparse
materialization exists only for oracles and tests.

Register layout used throughout the package: the spatial index of a 3D grid
point is j = j_x * N^2 + j_y * N + j_z (axis 1 = x most significant), and
within one axis the level-k ladder acts on the k lowest bits of that axis
index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

#: Materialization guard: refuse to build 3D operators beyond this many
#: qubits per axis unless the caller raises the cap explicitly.
DEFAULT_MATERIALIZE_MAX_N = 5


@dataclass(frozen=True)
class LatticeShape:
    """Grid resolution (n qubits per axis, N = 2^n points) and spacing h."""

    n: int
    h: float

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")

    @property
    def points(self) -> int:
        return 1 << self.n


@dataclass(frozen=True)
class LadderTerm:
    """One ladder factor: level k of the difference operator along an axis."""

    axis: int
    k: int


def _pair_indices(k: int, points: int) -> np.ndarray:
    """Upper members j of the (j-1, j) pairs coupled by level k."""
    return np.arange(1 << (k - 1), points, 1 << k)


def apply_s_cell(k: int, n: int, v: np.ndarray) -> np.ndarray:
    """Apply the 1D level-k ladder operator to a length-2^n vector."""
    if not 1 <= k <= n:
        raise ValueError(f"level k must lie in 1..{n}, got {k}")
    points = 1 << n
    if v.shape[0] != points:
        raise ValueError(f"vector length {v.shape[0]} != 2^{n}")
    out = np.zeros_like(v, dtype=np.result_type(v.dtype, float))
    hi = _pair_indices(k, points)
    out[hi - 1] = v[hi]
    out[hi] = -v[hi - 1]
    return out


def apply_d_cell(shape: LatticeShape, v: np.ndarray) -> np.ndarray:
    """Apply the 1D central difference with ghost zeros: (q_{j+1}-q_{j-1})/2h."""
    if v.shape[0] != shape.points:
        raise ValueError(f"vector length {v.shape[0]} != 2^{shape.n}")
    out = np.zeros_like(v, dtype=np.result_type(v.dtype, float))
    out[:-1] = v[1:]
    out[1:] -= v[:-1]
    out /= 2 * shape.h
    return out


def apply_pair_rotation(arr: np.ndarray, axis: int, k: int, cos_t: float, sin_t: float) -> None:
    """Rotate each (j-1, j) pair of level k along one array axis, in place.

    Realizes exp(theta * S_k) on that axis for cos_t = cos(theta),
    sin_t = sin(theta): new[j-1] = c*old[j-1] + s*old[j].
    """
    view = np.moveaxis(arr, axis, -1)
    hi = _pair_indices(k, arr.shape[axis])
    lo = hi - 1
    a = view[..., lo]
    b = view[..., hi]
    view[..., lo] = cos_t * a + sin_t * b
    view[..., hi] = -sin_t * a + cos_t * b


def apply_s_axis(term: LadderTerm, shape: LatticeShape, v: np.ndarray) -> np.ndarray:
    """Apply S_k along the given axis of a length-2^{3n} spatial vector."""
    n, points = shape.n, shape.points
    if not 1 <= term.axis <= 3:
        raise ValueError(f"axis must be 1..3, got {term.axis}")
    if not 1 <= term.k <= n:
        raise ValueError(f"level k must lie in 1..{n}, got {term.k}")
    if v.shape[0] != points**3:
        raise ValueError(f"vector length {v.shape[0]} != 2^{3 * n}")
    grid = v.reshape(points, points, points)
    out = np.zeros_like(grid, dtype=np.result_type(v.dtype, float))
    view_in = np.moveaxis(grid, term.axis - 1, -1)
    view_out = np.moveaxis(out, term.axis - 1, -1)
    hi = _pair_indices(term.k, points)
    view_out[..., hi - 1] = view_in[..., hi]
    view_out[..., hi] = -view_in[..., hi - 1]
    return out.reshape(-1)


def apply_d_axis(axis: int, shape: LatticeShape, grid: np.ndarray) -> np.ndarray:
    """Central difference along one axis of an array of grid shape (..., N, N, N).

    The three trailing axes are the spatial grid; leading axes (components,
    batches) are carried through untouched.
    """
    nd_axis = grid.ndim - 3 + (axis - 1)
    out = np.zeros_like(grid, dtype=np.result_type(grid.dtype, float))
    vi = np.moveaxis(grid, nd_axis, -1)
    vo = np.moveaxis(out, nd_axis, -1)
    vo[..., :-1] = vi[..., 1:]
    vo[..., 1:] -= vi[..., :-1]
    out /= 2 * shape.h
    return out


def _check_materialize_cap(n: int, max_n: int) -> None:
    if n > max_n:
        raise ValueError(
            f"materializing 3D operators for n={n} exceeds the cap n<={max_n}; "
            "raise max_n explicitly if you really want a 2^(3n) matrix"
        )


def s_cell_matrix(k: int, n: int) -> sp.csr_matrix:
    """Sparse 2^n x 2^n matrix of the 1D level-k ladder operator."""
    if not 1 <= k <= n:
        raise ValueError(f"level k must lie in 1..{n}, got {k}")
    points = 1 << n
    hi = _pair_indices(k, points)
    rows = np.concatenate([hi - 1, hi])
    cols = np.concatenate([hi, hi - 1])
    data = np.concatenate([np.ones(len(hi)), -np.ones(len(hi))])
    return sp.csr_matrix((data, (rows, cols)), shape=(points, points))


def d_cell_matrix(shape: LatticeShape) -> sp.csr_matrix:
    """Sparse 1D central-difference matrix with ghost zeros."""
    points = shape.points
    off = np.ones(points - 1) / (2 * shape.h)
    return sp.diags([off, -off], [1, -1], format="csr")


def s_axis_matrix(term: LadderTerm, shape: LatticeShape,
                  max_n: int = DEFAULT_MATERIALIZE_MAX_N) -> sp.csr_matrix:
    """Sparse 2^{3n} x 2^{3n} lift of S_k onto the given axis."""
    _check_materialize_cap(shape.n, max_n)
    points = shape.points
    left = sp.identity(points ** (term.axis - 1), format="csr")
    right = sp.identity(points ** (3 - term.axis), format="csr")
    out = sp.kron(sp.kron(left, s_cell_matrix(term.k, shape.n)), right, format="csr")
    out.eliminate_zeros()  # kron with identities stores explicit zeros
    return out


def d_axis_matrix(axis: int, shape: LatticeShape,
                  max_n: int = DEFAULT_MATERIALIZE_MAX_N) -> sp.csr_matrix:
    """Sparse 2^{3n} x 2^{3n} central difference along the given axis."""
    _check_materialize_cap(shape.n, max_n)
    points = shape.points
    left = sp.identity(points ** (axis - 1), format="csr")
    right = sp.identity(points ** (3 - axis), format="csr")
    out = sp.kron(sp.kron(left, d_cell_matrix(shape)), right, format="csr")
    out.eliminate_zeros()
    return out


def sparse_operator_norm(m: sp.spmatrix, tol: float = 1e-10, max_iter: int = 1000,
                         seed: int = 0) -> float:
    """Largest singular value by power iteration on M^dag M."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.shape[1]) + 1j * rng.standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    mh = m.getH().tocsr()
    sigma2 = 0.0
    for _ in range(max_iter):
        w = mh @ (m @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v_next = w / nw
        if abs(nw - sigma2) <= tol * max(nw, 1e-300):
            sigma2 = nw
            break
        sigma2 = nw
        v = v_next
    return float(np.sqrt(sigma2))
