"""Configuration charts, anholonomic frames, and quasi-velocities.

A frame is an ordered set of n vector fields on the chart, each given by n
coefficient expressions in the coordinates.  The first m fields span the
constraint distribution; the constraint submanifold C is where the trailing
quasi-velocities vanish.  Structure functions R^k_ij are defined by
[X_i, X_j] = R^k_ij X_k.

States may be scalar (q of shape (n,)) or batched (q of shape (N, n)); every
operation broadcasts over the leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import Expr, ExprFunction, parse
from .jets import TaylorValue
from .linsolve import det_pp

__all__ = [
    "SingularFrameError", "ConstraintViolationError",
    "ConstraintSplit", "TangentPoint", "QuasiState", "VectorField", "Frame",
    "bracket", "structure_functions", "quasi_velocities",
    "velocities_from_quasi", "change_of_D_basis", "jacobi_residual",
]

FRAME_DET_TOL = 1e-12
ON_C_TOL = 1e-12


class SingularFrameError(Exception):
    pass


class ConstraintViolationError(Exception):
    pass


@dataclass(frozen=True)
class ConstraintSplit:
    """Index split: fields 0..m-1 span D, fields m..n-1 complete the frame."""

    n: int
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")

    @property
    def n_constraints(self):
        return self.n - self.m


@dataclass
class TangentPoint:
    q: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.q.shape != self.u.shape:
            raise ValueError("q and u shapes differ")

    @property
    def batched(self):
        return self.q.ndim > 1


@dataclass
class QuasiState:
    """A point of TQ in the frame chart (q, v).  v always has length n; the
    C-restricted variant carries implicit zeros in the trailing slots."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.q.shape != self.v.shape:
            raise ValueError("q and v shapes differ")

    @classmethod
    def on_C(cls, q, v_alpha, split):
        q = np.asarray(q, dtype=float)
        v_alpha = np.asarray(v_alpha, dtype=float)
        v = np.zeros(q.shape)
        v[..., : split.m] = v_alpha
        return cls(q, v)

    @property
    def batched(self):
        return self.q.ndim > 1

    def v_alpha(self, split):
        return self.v[..., : split.m]

    def require_on_C(self, split, tol=ON_C_TOL):
        va = self.v[..., split.m:]
        if va.size and np.max(np.abs(va)) > tol:
            raise ConstraintViolationError(
                f"state is off C: max |v^a| = {np.max(np.abs(va)):.3e} > {tol}")


class VectorField:
    """A vector field on the chart, given by coefficient expressions."""

    def __init__(self, components, coords, params=None):
        self.coords = tuple(coords)
        self.params = dict(params or {})
        self._pnames = tuple(self.params)
        self._pvals = tuple(float(self.params[k]) for k in self._pnames)
        comps = []
        for c in components:
            if isinstance(c, str):
                c = parse(c)
            elif isinstance(c, (int, float)):
                c = parse(repr(float(c)))
            if not isinstance(c, Expr):
                raise TypeError(f"bad component {c!r}")
            comps.append(ExprFunction(c, self.coords, self._pnames))
        self.components = tuple(comps)

    @property
    def n(self):
        return len(self.components)

    def _env(self, q):
        return {name: q[..., i] for i, name in enumerate(self.coords)}

    def values(self, q):
        q = np.asarray(q, dtype=float)
        if q.ndim == 1:
            vals = tuple(q)
            return np.array([c.value(vals, self._pvals) for c in self.components])
        env = self._env(q)
        penv = {k: v for k, v in self.params.items()}
        out = np.empty(q.shape[:-1] + (self.n,))
        for j, c in enumerate(self.components):
            out[..., j] = c.taylor_env({**env, **penv})
        return out

    def dirderiv(self, q, w):
        """Directional derivative of each component along base direction w."""
        q = np.asarray(q, dtype=float)
        w = np.asarray(w, dtype=float)
        if q.ndim == 1:
            vals, d = tuple(q), (tuple(w),)
            return np.array([c.taylor(vals, self._pvals, d)[1]
                             for c in self.components])
        env = {}
        for i, name in enumerate(self.coords):
            env[name] = TaylorValue.variable(q[..., i], (w[..., i],), 1)
        for k, v in self.params.items():
            env[k] = TaylorValue.constant(v, 1)
        out = np.empty(q.shape[:-1] + (self.n,))
        for j, c in enumerate(self.components):
            tv = c.taylor_env(env)
            out[..., j] = tv.c[1] if isinstance(tv, TaylorValue) else 0.0
        return out

    def taylor_components(self, env):
        """Component TaylorValues over an arbitrary leaf environment."""
        penv = {k: v for k, v in self.params.items()}
        return [c.taylor_env({**env, **penv}) for c in self.components]


class Frame:
    """n vector fields with an invertible coefficient matrix."""

    def __init__(self, rows, coords, params=None, domain_note=""):
        self.coords = tuple(coords)
        self.n = len(self.coords)
        self.params = dict(params or {})
        self.domain_note = domain_note
        if len(rows) != self.n:
            raise ValueError(f"need {self.n} fields, got {len(rows)}")
        self.fields = []
        for row in rows:
            if isinstance(row, VectorField):
                self.fields.append(row)
            else:
                if len(row) != self.n:
                    raise ValueError("field component count != n")
                self.fields.append(VectorField(row, self.coords, self.params))

    def matrix(self, q):
        """Coefficient matrix, rows indexed by frame field: M[i, j] = X_i^j."""
        q = np.asarray(q, dtype=float)
        rows = [f.values(q) for f in self.fields]
        return np.stack(rows, axis=-2)

    def check_matrix(self, M):
        det = det_pp(M)
        if np.min(np.abs(det)) <= FRAME_DET_TOL:
            raise SingularFrameError(
                f"frame matrix is singular: min |det| = "
                f"{np.min(np.abs(det)):.3e}")
        return det

    def dfield(self, i, q, w):
        """(D X_i) w: derivative of field i's coefficients along w."""
        return self.fields[i].dirderiv(q, w)

    def exprs(self):
        return [[c.expr for c in f.components] for f in self.fields]


def bracket(X, Y, q):
    """Lie bracket [X, Y] at q, in coordinate components."""
    q = np.asarray(q, dtype=float)
    xv = X.values(q)
    yv = Y.values(q)
    return Y.dirderiv(q, xv) - X.dirderiv(q, yv)


def structure_functions(frame, q):
    """R[k, i, j] = R^k_ij with [X_i, X_j] = R^k_ij X_k; skew in (i, j).

    Brackets are computed for i < j only and reflected, so the skew symmetry
    is exact.
    """
    q = np.asarray(q, dtype=float)
    n = frame.n
    M = frame.matrix(q)
    frame.check_matrix(M)
    vals = [frame.fields[i].values(q) for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    cols = []
    for i, j in pairs:
        br = (frame.fields[j].dirderiv(q, vals[i])
              - frame.fields[i].dirderiv(q, vals[j]))
        cols.append(br)
    R = np.zeros(q.shape[:-1] + (n, n, n))
    if not pairs:
        return R
    B = np.stack(cols, axis=-1)  # (..., n, npairs)
    MT = np.swapaxes(M, -1, -2)
    coeff = np.linalg.solve(MT, B)
    for idx, (i, j) in enumerate(pairs):
        R[..., :, i, j] = coeff[..., :, idx]
        R[..., :, j, i] = -coeff[..., :, idx]
    return R


def quasi_velocities(frame, p):
    """Quasi-velocities of a tangent point: solve X(q)^T v = u."""
    M = frame.matrix(p.q)
    frame.check_matrix(M)
    MT = np.swapaxes(M, -1, -2)
    v = np.linalg.solve(MT, p.u[..., None])[..., 0]
    return QuasiState(p.q, v)


def velocities_from_quasi(frame, s):
    """Inverse of quasi_velocities: u = X(q)^T v."""
    M = frame.matrix(s.q)
    u = (np.swapaxes(M, -1, -2) @ s.v[..., None])[..., 0]
    return TangentPoint(s.q, u)


def _block_exprs(block, size_out, size_in):
    """Normalise a block of entries to Expr-or-None (None marks a zero)."""
    rows = []
    for r in range(size_out):
        row = []
        for c in range(size_in):
            e = block[r][c]
            if isinstance(e, (int, float)) and float(e) == 0.0:
                e = None
            elif isinstance(e, str):
                e = parse(e)
            elif isinstance(e, (int, float)):
                e = parse(repr(float(e)))
            row.append(e)
        rows.append(row)
    return rows


def change_of_D_basis(frame, split, A_alpha_beta, A_a_b=None, A_a_alpha=None):
    """New adapted frame Y_alpha = A_alpha^beta X_beta,
    Y_a = A_a^b X_b + A_a^alpha X_alpha.

    Block entries are expressions in the coordinates, or constants; A_a_b
    defaults to the identity and A_a_alpha to zero.  Under the induced
    quasi-velocity map the level sets v^a = 0 and w^a = 0 coincide.  Singular
    blocks are not rejected here; they surface as a SingularFrameError when
    the new frame is evaluated.
    """
    from .exprlang import Add, Const, Mul

    n, m = split.n, split.m
    k = n - m
    A1 = _block_exprs(A_alpha_beta, m, m)
    if A_a_b is None:
        A2 = [[parse("1") if r == c else None for c in range(k)]
              for r in range(k)]
    else:
        A2 = _block_exprs(A_a_b, k, k)
    if A_a_alpha is None:
        A3 = [[None] * m for _ in range(k)]
    else:
        A3 = _block_exprs(A_a_alpha, k, m)
    old = frame.exprs()

    def comb(coeff_exprs, field_indices, j):
        terms = [Mul(w, old[fi][j])
                 for w, fi in zip(coeff_exprs, field_indices) if w is not None]
        if not terms:
            return Const(0.0)
        out = terms[0]
        for t in terms[1:]:
            out = Add(out, t)
        return out

    rows = []
    for a in range(m):
        rows.append([comb(A1[a], range(m), j) for j in range(n)])
    for r in range(k):
        coeffs = list(A2[r]) + list(A3[r])
        idx = list(range(m, n)) + list(range(m))
        rows.append([comb(coeffs, idx, j) for j in range(n)])
    return Frame(rows, frame.coords, frame.params,
                 domain_note=frame.domain_note)


def jacobi_residual(frame, q):
    """Max componentwise residual of the cyclic Jacobi identity at q,
    computed from exact coefficient jets."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise ValueError("jacobi_residual takes a single point")
    n = frame.n
    vals = np.array([f.values(q) for f in frame.fields])          # X[i][l]
    qe = tuple(q)
    jac = np.zeros((n, n, n))   # jac[i][l][p] = d X_i^l / d q^p
    hess = np.zeros((n, n, n, n))  # hess[i][l][p][r]
    basis = np.eye(n)
    for i, f in enumerate(frame.fields):
        for l, c in enumerate(f.components):
            for p_ in range(n):
                for r in range(p_, n):
                    t = c.taylor(qe, f._pvals, (tuple(basis[p_]), tuple(basis[r])))
                    jac[i][l][p_] = t[1]
                    jac[i][l][r] = t[2]
                    hess[i][l][p_][r] = t[3]
                    hess[i][l][r][p_] = t[3]

    def brk(i, j):
        return vals[i] @ jac[j].T - vals[j] @ jac[i].T

    def dbrk(i, j):
        # d/dq^p of [X_i, X_j]^l
        out = np.zeros((n, n))
        for l in range(n):
            for p_ in range(n):
                out[l][p_] = (jac[i][:, p_] @ jac[j][l]
                              + vals[i] @ hess[j][l][:, p_]
                              - jac[j][:, p_] @ jac[i][l]
                              - vals[j] @ hess[i][l][:, p_])
        return out

    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                total = np.zeros(n)
                for (a, b, c) in ((i, j, k), (j, k, i), (k, i, j)):
                    B = brk(b, c)
                    dB = dbrk(b, c)
                    total += vals[a] @ dB.T - B @ jac[a].T
                worst = max(worst, float(np.max(np.abs(total))))
    return worst
