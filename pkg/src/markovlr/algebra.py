"""Operators on labelled tensor-product spaces and superoperators.

Conventions
-----------
* Sites of an :class:`Op` are kept in sorted order; the matrix acts on
  ``H_{s_0} (x) H_{s_1} (x) ...`` in that order.
* Superoperators act on column-stacked operators, ``vec(X)[i + j*D] = X[i, j]``,
  so ``vec(A X B) = (B^T (x) A) vec(X)``. Matrix units are orthonormal under
  the Hilbert-Schmidt product, hence the superoperator adjoint is the
  conjugate transpose of its matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import minimize

MAX_SUPEROP_DIM = 4096

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma^+ = |0><1| and sigma^- = |1><0| with |0> the excited (Z = +1) state
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli_string(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


@dataclass(frozen=True, eq=False)
class Op:
    region: tuple
    matrix: np.ndarray
    dims: tuple = field(default=None)

    def __post_init__(self):
        sites = tuple(self.region)
        dims = self.dims if self.dims is not None else (2,) * len(sites)
        if len(dims) != len(sites):
            raise ValueError("one local dimension per site required")
        order = sorted(range(len(sites)), key=lambda k: sites[k])
        mat = np.asarray(self.matrix, dtype=complex)
        D = int(np.prod(dims))
        if mat.shape != (D, D):
            raise ValueError(f"matrix shape {mat.shape} does not match dims {dims}")
        if order != list(range(len(sites))):
            mat = _permute_sites(mat, dims, order)
            sites = tuple(sites[k] for k in order)
            dims = tuple(dims[k] for k in order)
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate sites in region")
        object.__setattr__(self, "region", sites)
        object.__setattr__(self, "dims", tuple(dims))
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def sites(self) -> frozenset:
        return frozenset(self.region)

    def __add__(self, other: "Op") -> "Op":
        a, b = align(self, other)
        return Op(a.region, a.matrix + b.matrix, a.dims)

    def __sub__(self, other: "Op") -> "Op":
        a, b = align(self, other)
        return Op(a.region, a.matrix - b.matrix, a.dims)

    def __mul__(self, c) -> "Op":
        return Op(self.region, c * self.matrix, self.dims)

    __rmul__ = __mul__

    def __matmul__(self, other: "Op") -> "Op":
        a, b = align(self, other)
        return Op(a.region, a.matrix @ b.matrix, a.dims)

    def dag(self) -> "Op":
        return Op(self.region, self.matrix.conj().T, self.dims)


def identity(region: Iterable, dims: Sequence[int] | None = None) -> Op:
    sites = tuple(sorted(region))
    dims = tuple(dims) if dims is not None else (2,) * len(sites)
    return Op(sites, np.eye(int(np.prod(dims)), dtype=complex), dims)


def local_op(label: str, sites: Sequence) -> Op:
    """Product of single-qubit Paulis/ladder operators, one character per site."""
    if len(label) != len(sites):
        raise ValueError("label length must match number of sites")
    pairs = sorted(zip(sites, label))
    return Op(tuple(s for s, _ in pairs), pauli_string("".join(c for _, c in pairs)))


def _permute_sites(mat: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = mat.reshape(tuple(dims) * 2)
    t = t.transpose(list(order) + [n + k for k in order])
    D = mat.shape[0]
    return t.reshape(D, D)


def embed(op: Op, target: Iterable, dims: dict | None = None) -> Op:
    """Tensor ``op`` with the identity on ``target \\ op.region``."""
    target = tuple(sorted(set(target)))
    if not op.sites <= set(target):
        raise ValueError(f"region {op.region} not contained in target {target}")
    if target == op.region:
        return op
    local = dict(zip(op.region, op.dims))
    extra = [s for s in target if s not in local]
    extra_dims = tuple((dims or {}).get(s, 2) for s in extra)
    mat = np.kron(op.matrix, np.eye(int(np.prod(extra_dims)), dtype=complex))
    return Op(op.region + tuple(extra), mat, op.dims + extra_dims)


def align(a: Op, b: Op) -> tuple:
    """Embed both operators into the union of their regions."""
    if a.region == b.region:
        return a, b
    target = a.sites | b.sites
    dims = dict(zip(a.region, a.dims)) | dict(zip(b.region, b.dims))
    return embed(a, target, dims), embed(b, target, dims)


def inf_norm(op) -> float:
    m = op.matrix if isinstance(op, Op) else np.asarray(op)
    if m.size == 0:
        return 0.0
    if np.allclose(m, m.conj().T, atol=1e-14, rtol=0):
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))
    return float(np.linalg.norm(m, 2))


def trace_norm(op) -> float:
    m = op.matrix if isinstance(op, Op) else np.asarray(op)
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


# --- local contractions -------------------------------------------------------

def _slot_positions(region: Sequence, sites: Iterable) -> list:
    idx = {s: k for k, s in enumerate(region)}
    try:
        return [idx[s] for s in sorted(sites)]
    except KeyError as exc:
        raise ValueError(f"site {exc.args[0]!r} not in region {tuple(region)}") from None


def _as_tensor(op: Op) -> np.ndarray:
    return op.matrix.reshape(op.dims * 2)


def apply_left(A: np.ndarray, sites: Sequence, op: Op) -> Op:
    """``(A on sites) @ op`` without forming the embedded matrix."""
    pos = _slot_positions(op.region, sites)
    return Op(op.region, _left(A, pos, _as_tensor(op)).reshape(op.matrix.shape), op.dims)


def apply_right(op: Op, B: np.ndarray, sites: Sequence) -> Op:
    """``op @ (B on sites)``."""
    pos = _slot_positions(op.region, sites)
    n = len(op.dims)
    t = _left(B.T, [n + p for p in pos], _as_tensor(op))
    return Op(op.region, t.reshape(op.matrix.shape), op.dims)


def _left(A: np.ndarray, pos: Sequence[int], t: np.ndarray) -> np.ndarray:
    k = len(pos)
    rest = [p for p in range(t.ndim) if p not in pos]
    perm = list(pos) + rest
    tt = t.transpose(perm)
    shape = tt.shape
    blk = int(np.prod(shape[:k])) if k else 1
    out = (A @ tt.reshape(blk, -1)).reshape(shape)
    return out.transpose(np.argsort(perm))


def embed_sparse(M: np.ndarray, sites: Sequence, region: Sequence, dims: Sequence[int] | None = None):
    """``M`` on ``sites`` tensored with identity on the rest of ``region``, as CSR."""
    region = tuple(region)
    dims = tuple(dims) if dims is not None else (2,) * len(region)
    pos = _slot_positions(region, sites)
    order = pos + [p for p in range(len(region)) if p not in pos]
    d_rest = int(np.prod([dims[p] for p in order[len(pos):]]))
    coo = sparse.kron(sparse.coo_matrix(M), sparse.identity(d_rest, format="coo"), format="coo")
    D = int(np.prod(dims))
    # basis index in (sites, rest) order -> index in region order
    to_region = np.arange(D).reshape(dims).transpose(order).reshape(-1)
    return sparse.csr_matrix((coo.data, (to_region[coo.row], to_region[coo.col])), shape=(D, D))


# --- superoperators ------------------------------------------------------------

def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, D: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if D is None:
        D = int(round(np.sqrt(v.size)))
    return v.reshape(D, D, order="F")


@dataclass(frozen=True, eq=False)
class SuperOp:
    region: tuple
    matrix: np.ndarray
    dims: tuple = field(default=None)

    def __post_init__(self):
        region = tuple(sorted(self.region))
        dims = self.dims if self.dims is not None else (2,) * len(region)
        D = int(np.prod(dims))
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (D * D, D * D):
            raise ValueError(f"superoperator shape {mat.shape} inconsistent with dims {dims}")
        object.__setattr__(self, "region", region)
        object.__setattr__(self, "dims", tuple(dims))
        object.__setattr__(self, "matrix", mat)

    @property
    def D(self) -> int:
        return int(np.prod(self.dims))

    def __call__(self, X):
        if isinstance(X, Op):
            if X.region != self.region:
                raise ValueError("operator region does not match superoperator region")
            return Op(X.region, unvec(self.matrix @ vec(X.matrix), self.D), X.dims)
        return unvec(self.matrix @ vec(X), self.D)

    def __mul__(self, c) -> "SuperOp":
        return SuperOp(self.region, c * self.matrix, self.dims)

    __rmul__ = __mul__

    def __matmul__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(self.region, self.matrix @ other.matrix, self.dims)


def superop_from_map(f: Callable[[np.ndarray], np.ndarray], region: Sequence, dims=None) -> SuperOp:
    region = tuple(sorted(region))
    dims = tuple(dims) if dims is not None else (2,) * len(region)
    D = int(np.prod(dims))
    cols = []
    for j in range(D):
        for i in range(D):
            E = np.zeros((D, D), dtype=complex)
            E[i, j] = 1.0
            cols.append(vec(f(E)))
    return SuperOp(region, np.array(cols).T, dims)


def identity_superop(region: Sequence, dims=None) -> SuperOp:
    region = tuple(sorted(region))
    dims = tuple(dims) if dims is not None else (2,) * len(region)
    D = int(np.prod(dims))
    return SuperOp(region, np.eye(D * D, dtype=complex), dims)


def kraus_superop(kraus: Sequence[np.ndarray], region: Sequence, dims=None) -> SuperOp:
    """Superoperator of ``X -> sum_k K X K^dag``."""
    mat = sum(np.kron(K.conj(), K) for K in kraus)
    return SuperOp(region, mat, dims)


def adjoint(T: SuperOp) -> SuperOp:
    return SuperOp(T.region, T.matrix.conj().T, T.dims)


def apply_superop_local(S: np.ndarray, sites: Sequence, op: Op) -> Op:
    """Apply a superoperator matrix on ``sites`` (column stacking) to a larger ``op``."""
    pos = _slot_positions(op.region, sites)
    n = len(op.dims)
    t = _as_tensor(op)
    # column slots first, then row slots: matches vec(X)[i + j*D] (row index fastest)
    lead = [n + p for p in pos] + list(pos)
    rest = [p for p in range(2 * n) if p not in lead]
    perm = lead + rest
    tt = t.transpose(perm)
    shape = tt.shape
    blk = int(np.prod(shape[: 2 * len(pos)]))
    out = (S @ tt.reshape(blk, -1)).reshape(shape).transpose(np.argsort(perm))
    return Op(op.region, out.reshape(op.matrix.shape), op.dims)


# --- induced norms -------------------------------------------------------------

@dataclass
class NormEstimate:
    value: float
    restart_values: list
    iterations: list

    @property
    def spread(self) -> float:
        """Gap between best and median restart; small when restarts agree."""
        vals = np.sort(self.restart_values)
        return float(vals[-1] - np.median(vals))

    def __float__(self):
        return self.value


def _polar_unitary(M: np.ndarray) -> np.ndarray:
    U, _, Vh = np.linalg.svd(M)
    return U @ Vh


def _ascent_one_to_one(T: np.ndarray, D: int, psi, phi, tol, max_iter):
    Tdag = T.conj().T
    val = -1.0
    for it in range(max_iter):
        X = unvec(T @ vec(np.outer(psi, phi.conj())), D)
        new = float(np.sum(np.linalg.svd(X, compute_uv=False)))
        if new - val <= tol * max(1.0, new):
            return max(new, val), it + 1
        val = new
        W = _polar_unitary(X)
        U, _, Vh = np.linalg.svd(unvec(Tdag @ vec(W), D))
        # |psi^dag A phi| is maximised by the top singular pair of A = T^dag(W)
        psi, phi = U[:, 0], Vh[0].conj()
    return val, max_iter


def _random_unit(rng, D):
    v = rng.normal(size=D) + 1j * rng.normal(size=D)
    return v / np.linalg.norm(v)


def _qubit_vector(theta, ph):
    return np.array([np.cos(theta / 2), np.exp(1j * ph) * np.sin(theta / 2)])


def _two_by_two_trace_norm(X):
    # ||X||_1 = sqrt(||X||_F^2 + 2|det X|) for 2x2 matrices
    f2 = np.sum(np.abs(X) ** 2, axis=(-2, -1))
    det = X[..., 0, 0] * X[..., 1, 1] - X[..., 0, 1] * X[..., 1, 0]
    return np.sqrt(f2 + 2 * np.abs(det))


def _exact_small_one_to_one(T: np.ndarray, grid: int, polish: int) -> NormEstimate:
    th = np.linspace(0, np.pi, grid)
    ph = np.linspace(0, 2 * np.pi, 2 * grid, endpoint=False)
    A, B, C, E = np.meshgrid(th, ph, th, ph, indexing="ij")
    psi = np.stack([np.cos(A / 2), np.exp(1j * B) * np.sin(A / 2)], -1)
    phi = np.stack([np.cos(C / 2), np.exp(1j * E) * np.sin(C / 2)], -1)
    X = psi[..., :, None] * phi.conj()[..., None, :]
    v = X.reshape(-1, 2, 2).transpose(0, 2, 1).reshape(-1, 4)
    Y = (v @ T.T).reshape(-1, 2, 2).transpose(0, 2, 1)
    vals = _two_by_two_trace_norm(Y)
    flat = vals.reshape(-1)
    params = np.stack([A, B, C, E], -1).reshape(-1, 4)

    def f(p):
        x = np.outer(_qubit_vector(p[0], p[1]), _qubit_vector(p[2], p[3]).conj())
        return -_two_by_two_trace_norm(unvec(T @ vec(x), 2))

    best, restart_vals, iters = float(flat.max()), [], []
    for k in np.argsort(flat)[::-1][:polish]:
        res = minimize(f, params[k], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        restart_vals.append(-float(res.fun))
        iters.append(int(res.nit))
        best = max(best, -float(res.fun))
    return NormEstimate(best, restart_vals, iters)


def one_to_one_norm(T: SuperOp, mode: str = "estimate", restarts: int = 32, seed: int = 0,
                    tol: float = 1e-12, max_iter: int = 2000, grid: int = 13) -> NormEstimate:
    """Induced trace-norm ``sup ||T(O)||_1 / ||O||_1``.

    The supremum is attained on rank-one inputs ``|psi><phi|``. ``estimate``
    alternates between the dual unitary and the top singular pair from random
    starts; ``exact-small`` (single qubit only) scans a grid over both Bloch
    spheres and polishes the best points. Both return certified lower bounds.
    """
    D = T.D
    if mode == "exact-small":
        if D != 2:
            raise ValueError("exact-small mode needs a single site of dimension 2")
        return _exact_small_one_to_one(T.matrix, grid, polish=max(4, restarts // 4))
    if mode != "estimate":
        raise ValueError(f"unknown mode {mode!r}")
    if not np.any(T.matrix):
        return NormEstimate(0.0, [0.0], [0])
    rng = np.random.default_rng(seed)
    vals, its = [], []
    for _ in range(restarts):
        v, it = _ascent_one_to_one(T.matrix, D, _random_unit(rng, D), _random_unit(rng, D), tol, max_iter)
        vals.append(v)
        its.append(it)
    return NormEstimate(max(vals), vals, its)


def inf_inf_norm(T: SuperOp, mode: str = "estimate", restarts: int = 32, seed: int = 0,
                 **kw) -> NormEstimate:
    """Induced operator-norm ``sup ||T(O)||_inf / ||O||_inf``, via duality with the 1->1 norm."""
    return one_to_one_norm(adjoint(T), mode=mode, restarts=restarts, seed=seed, **kw)


def choi(T: SuperOp) -> np.ndarray:
    """Unnormalised Choi matrix ``sum_ij T(E_ij) (x) E_ij``."""
    D = T.D
    if D * D > MAX_SUPEROP_DIM:
        raise ValueError(f"operator-space dimension {D * D} exceeds limit {MAX_SUPEROP_DIM}")
    out = np.zeros((D * D, D * D), dtype=complex)
    for i in range(D):
        for j in range(D):
            E = np.zeros((D, D), dtype=complex)
            E[i, j] = 1.0
            out += np.kron(T(E), E)
    return out


@dataclass
class CPTReport:
    ok: bool
    min_eigenvalue: float
    trace_defect: float

    def __bool__(self):
        return self.ok


def cpt_check(T: SuperOp, tol: float = 1e-9) -> CPTReport:
    J = choi(T)
    D = T.D
    lam = float(np.min(np.linalg.eigvalsh(0.5 * (J + J.conj().T))))
    # trace over the output factor leaves sum_ij Tr T(E_ij) E_ij, which is I iff T is TP
    reduced = np.einsum("iaib->ab", J.reshape(D, D, D, D))
    defect = float(np.max(np.abs(reduced - np.eye(D))))
    return CPTReport(lam >= -tol and defect <= tol, lam, defect)
