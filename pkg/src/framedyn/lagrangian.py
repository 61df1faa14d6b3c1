"""Frame-based differential calculus of a Lagrangian on TQ.

Vertical and complete lifts of frame fields act on functions of (q, u) as
directional derivatives; all of them are evaluated here through exact jets at
a point.  The vertical lift of X has tangent (0, X(q)); the complete lift has
tangent (X(q), (DX)u).  Differentiating a vertical-lift derivative along a
moving direction picks up a correction from the q-dependence of the frame
coefficients, which :func:`dvlift` accounts for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import ExprFunction, parse
from .frames import TangentPoint, quasi_velocities
from .jets import TaylorValue
from .linsolve import det_pp

__all__ = [
    "Lagrangian", "QuasiVelocityFunction", "RegularityReport",
    "vlift_deriv", "clift_deriv", "dvlift", "dvlift_field", "clift_field",
    "epsilon_form", "hessian", "energy", "regularity",
]

REGULARITY_DET_TOL = 1e-10


class Lagrangian:
    """A function on TQ given by an expression in coordinates and velocities."""

    def __init__(self, expr, coords, vel_names, params=None):
        self.coords = tuple(coords)
        self.vel_names = tuple(vel_names)
        if len(self.coords) != len(self.vel_names):
            raise ValueError("coordinate and velocity name counts differ")
        self.params = dict(params or {})
        self._pnames = tuple(self.params)
        self._pvals = tuple(float(self.params[k]) for k in self._pnames)
        if isinstance(expr, str):
            expr = parse(expr)
        self.expr = expr
        self.fn = ExprFunction(expr, self.coords + self.vel_names, self._pnames)

    @property
    def n(self):
        return len(self.coords)

    def value(self, q, u):
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        if q.ndim == 1:
            return self.fn.value(tuple(q) + tuple(u), self._pvals)
        env = self._leaf_env(q, u, ())
        out = self.fn.taylor_env(env)
        return out.c[0] if isinstance(out, TaylorValue) else np.broadcast_to(
            out, q.shape[:-1]).astype(float)

    def _leaf_env(self, q, u, dirs):
        k = len(dirs)
        env = {}
        for i, name in enumerate(self.coords):
            env[name] = TaylorValue.variable(
                q[..., i], tuple(d[0][..., i] for d in dirs), k)
        for i, name in enumerate(self.vel_names):
            env[name] = TaylorValue.variable(
                u[..., i], tuple(d[1][..., i] for d in dirs), k)
        for name, val in self.params.items():
            env[name] = TaylorValue.constant(val, k)
        return env

    def taylor(self, q, u, dirs):
        """Jet slots along directions; each direction is a (dq, du) pair."""
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        if q.ndim == 1:
            vals = tuple(q) + tuple(u)
            ds = [tuple(np.asarray(dq, dtype=float))
                  + tuple(np.asarray(du, dtype=float)) for dq, du in dirs]
            return self.fn.taylor(vals, self._pvals, ds)
        dirs = [(np.broadcast_to(np.asarray(dq, dtype=float), q.shape),
                 np.broadcast_to(np.asarray(du, dtype=float), q.shape))
                for dq, du in dirs]
        out = self.fn.taylor_env(self._leaf_env(q, u, dirs))
        if isinstance(out, TaylorValue):
            return out.c
        return (out,) + (0.0,) * ((1 << len(dirs)) - 1)

    def taylor_env(self, env):
        full = dict(env)
        for name, val in self.params.items():
            full.setdefault(name, val)
        return self.fn.taylor_env(full)


class QuasiVelocityFunction:
    """The quasi-velocity v^j of a frame as a function on TQ.

    Jets (up to two directions) come from implicit differentiation of
    X(q)^T v = u.
    """

    def __init__(self, frame, j):
        self.frame = frame
        self.j = j

    def value(self, q, u):
        return quasi_velocities(self.frame, TangentPoint(q, u)).v[..., self.j]

    def taylor(self, q, u, dirs):
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        F = self.frame
        M = F.matrix(q)
        MT = np.swapaxes(M, -1, -2)
        v = np.linalg.solve(MT, u[..., None])[..., 0]
        out = [v[..., self.j]]
        if not dirs:
            return tuple(out)
        n = F.n

        def dmt(w):
            # directional derivative of M^T along base direction w
            cols = [F.dfield(i, q, w) for i in range(n)]
            return np.stack(cols, axis=-1)

        firsts = []
        for dq, du in dirs:
            a = dmt(np.asarray(dq, dtype=float))
            rhs = np.asarray(du, dtype=float) - (a @ v[..., None])[..., 0]
            vs = np.linalg.solve(MT, rhs[..., None])[..., 0]
            firsts.append(vs)
            out.append(vs[..., self.j])
        if len(dirs) == 1:
            return tuple(out)
        if len(dirs) != 2:
            raise ValueError("QuasiVelocityFunction supports at most 2 dirs")
        (dq1, _), (dq2, _) = dirs
        dq1 = np.asarray(dq1, dtype=float)
        dq2 = np.asarray(dq2, dtype=float)
        # mixed second derivative of M^T along (dq1, dq2)
        m12 = np.zeros(MT.shape)
        zeros = np.zeros(q.shape)
        for i, f in enumerate(F.fields):
            if q.ndim == 1:
                t = [c.taylor(tuple(q), f._pvals,
                              (tuple(dq1), tuple(dq2)))[3]
                     for c in f.components]
                m12[..., :, i] = np.array(t)
            else:
                env = {}
                for ci, name in enumerate(F.coords):
                    env[name] = TaylorValue.variable(
                        q[..., ci], (dq1[..., ci], dq2[..., ci]), 2)
                for name, val in f.params.items():
                    env[name] = TaylorValue.constant(val, 2)
                for jj, c in enumerate(f.components):
                    tv = c.taylor_env(env)
                    m12[..., jj, i] = (tv.c[3] if isinstance(tv, TaylorValue)
                                       else 0.0)
        a1 = dmt(dq1)
        a2 = dmt(dq2)
        rhs = -(m12 @ v[..., None] + a1 @ firsts[1][..., None]
                + a2 @ firsts[0][..., None])[..., 0]
        v12 = np.linalg.solve(MT, rhs[..., None])[..., 0]
        out.append(v12[..., self.j])
        return (out[0], out[1], out[2], out[3])


def _zeros_like(q):
    return np.zeros(np.asarray(q).shape)


def vlift_deriv(L, frame, i, p):
    """vlift X_i applied to a TQ function: derivative along (0, X_i(q))."""
    Xi = frame.fields[i].values(p.q)
    return L.taylor(p.q, p.u, [(_zeros_like(p.q), Xi)])[1]


def clift_field(L, Z, q, u):
    """clift Z applied to a TQ function: derivative along (Z(q), (DZ)u)."""
    return L.taylor(q, u, [(Z.values(q), Z.dirderiv(q, u))])[1]


def clift_deriv(L, frame, i, p):
    return clift_field(L, frame.fields[i], p.q, p.u)


def dvlift_field(L, Z, q, u, wq, wu):
    """Derivative of the function vlift Z(L) along the tangent vector (wq, wu).

    The inner direction Z(q) moves with the base point, so the plain mixed
    jet acquires a correction through the fibre gradient of L.
    """
    zq = _zeros_like(q)
    t = L.taylor(q, u, [(zq, Z.values(q)), (wq, wu)])
    corr = L.taylor(q, u, [(zq, Z.dirderiv(q, wq))])
    return t[3] + corr[1]


def dvlift(L, frame, i, p, wq, wu):
    return dvlift_field(L, frame.fields[i], p.q, p.u, wq, wu)


def epsilon_form(L, Z, q, u, wq, wu):
    """The one-form value Gamma(vlift Z(L)) - clift Z(L) for the second-order
    tangent (wq, wu); C-infinity linear in Z."""
    return dvlift_field(L, Z, q, u, wq, wu) - clift_field(L, Z, q, u)


def hessian(L, frame, p, indices=None):
    """Hessian blocks g_ij = vlift X_i(vlift X_j(L)) in the frame; symmetric."""
    q = np.asarray(p.q, dtype=float)
    u = np.asarray(p.u, dtype=float)
    idx = list(range(frame.n)) if indices is None else list(indices)
    vals = {i: frame.fields[i].values(q) for i in idx}
    zq = _zeros_like(q)
    k = len(idx)
    g = np.zeros(q.shape[:-1] + (k, k))
    for a in range(k):
        for b in range(a, k):
            d12 = L.taylor(q, u, [(zq, vals[idx[a]]), (zq, vals[idx[b]])])[3]
            g[..., a, b] = d12
            g[..., b, a] = d12
    return g


def energy(L, frame, p):
    """E = v^i vlift X_i(L) - L; a function on TQ, independent of the frame."""
    s = quasi_velocities(frame, p)
    total = 0.0
    for i in range(frame.n):
        total = total + s.v[..., i] * vlift_deriv(L, frame, i, p)
    return total - L.value(p.q, p.u)


@dataclass
class RegularityReport:
    regular_D: bool
    det_D: float
    regular_Dperp: bool
    det_Dperp: float
    regular_g: bool
    det_g: float
    point: TangentPoint
    threshold: float = REGULARITY_DET_TOL


def regularity(L, frame, split, p, threshold=REGULARITY_DET_TOL):
    """Determinant tests for the three regularity conditions.

    regular_D tests the D-block (g_alpha_beta); regular_Dperp the Schur
    complement g_ab - g_a_alpha g^alpha_beta g_beta_b; regular_g the plain
    (g_ab) block.
    """
    m = split.m
    g = hessian(L, frame, p)
    gD = g[..., :m, :m]
    det_D = det_pp(gD)
    gab = g[..., m:, m:]
    det_g = det_pp(gab)
    if split.n_constraints == 0:
        det_perp = det_g
    elif np.min(np.abs(det_D)) > 0:
        W = np.linalg.solve(gD, g[..., :m, m:])
        schur = gab - g[..., m:, :m] @ W
        det_perp = det_pp(schur)
    else:
        det_perp = np.nan
    ok = lambda d: bool(np.min(np.abs(d)) > threshold)
    return RegularityReport(
        regular_D=ok(det_D), det_D=det_D,
        regular_Dperp=ok(det_perp), det_Dperp=det_perp,
        regular_g=ok(det_g), det_g=det_g,
        point=p, threshold=threshold)
