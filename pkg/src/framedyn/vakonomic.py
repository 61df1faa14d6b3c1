"""Vakonomic dynamics restricted to multiplier sections.

A section assigns multiplier values phi_a to each point of C.  The restricted
vakonomic equations determine a field Gamma_C on C once the multiplier rates
A_a are chosen; choosing them so that Gamma_C is tangent to C yields

    g_ab Gamma_C^b = clift X_a(L) + phi_c R^c_ab v^b - v^b clift X_b(vlift X_a(L))

over the constraint indices, with Lambda_a = Gamma_C(vlift X_a(L)) -
clift X_a(L) and A_a = Lambda_a - phi_b R^b_a_alpha v^alpha.  Consistency with
the nonholonomic field is measured by three defect vectors: the weak defect
phi_a R^a_alpha_beta v^beta, the strong defect Gamma(phi_a) +
phi_b R^b_a_alpha v^alpha - lambda_a, and the tangency defect with Gamma_C and
Lambda_a in place of Gamma and lambda_a.

The variational Lagrangian L~ = L - Phi_a v^a extends a section off C; its
Euler-Lagrange field is computed in the quasi-velocity chart, where the full
frame Hessian and the lifted derivatives are plain chart jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import ExprFunction
from .frames import QuasiState, TangentPoint, quasi_velocities, structure_functions
from .jets import TaylorValue
from .lagrangian import clift_deriv, dvlift, hessian, regularity
from .linsolve import solve_and_det
from .nonholonomic import GAMMA_DET_TOL, NonholonomicField, RegularityError
from .quasichart import QvChartPoint

__all__ = [
    "Section", "ZeroSection", "CustomSection", "MomentumSection",
    "ShiftedMomentumSection", "make_section",
    "VakonomicSolution", "ConsistencyReport", "solve_gamma_C",
    "consistency_report", "gamma_bar_tangency",
    "VariationalLagrangian", "make_variational_lagrangian",
    "el_field", "tilde_tangency_check",
]


def _chart_names(m):
    return tuple(f"v{i + 1}" for i in range(m))


class Section:
    """Multiplier section phi: C -> R^(n-m).  Subclasses provide values and
    exact chart jets of each component."""

    kind = "abstract"

    def __init__(self, frame, split):
        self.frame = frame
        self.split = split

    def values(self, q, v_alpha):
        tvs = self.taylor(q, v_alpha, ())
        out = [tv.c[0] if isinstance(tv, TaylorValue) else tv for tv in tvs]
        q = np.asarray(q, dtype=float)
        res = np.empty(q.shape[:-1] + (self.split.n_constraints,))
        for i, val in enumerate(out):
            res[..., i] = val
        return res

    def taylor(self, q, v_alpha, dirs):
        """Jets of phi_a along C-chart directions [(dq, dv_alpha)]."""
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind}


class ZeroSection(Section):
    kind = "zero"

    def taylor(self, q, v_alpha, dirs):
        k = len(dirs)
        zero = TaylorValue.constant(0.0, k)
        return [zero] * self.split.n_constraints


class CustomSection(Section):
    """phi_a given as expressions in the coordinates and v1..vm."""

    kind = "custom"

    def __init__(self, frame, split, exprs, params=None):
        super().__init__(frame, split)
        if len(exprs) != split.n_constraints:
            raise ValueError("need one expression per constraint index")
        names = frame.coords + _chart_names(split.m)
        params = dict(frame.params if params is None else params)
        self.params = params
        self.fns = [ExprFunction(e, names, tuple(params)) for e in exprs]
        self.exprs = [f.expr for f in self.fns]

    def taylor(self, q, v_alpha, dirs):
        q = np.asarray(q, dtype=float)
        v_alpha = np.asarray(v_alpha, dtype=float)
        k = len(dirs)
        env = {}
        for i, name in enumerate(self.frame.coords):
            env[name] = TaylorValue.variable(
                q[..., i], tuple(np.asarray(d[0])[..., i] for d in dirs), k)
        for i, name in enumerate(_chart_names(self.split.m)):
            env[name] = TaylorValue.variable(
                v_alpha[..., i], tuple(np.asarray(d[1])[..., i] for d in dirs), k)
        for name, val in self.params.items():
            env[name] = TaylorValue.constant(float(val), k)
        out = []
        for f in self.fns:
            tv = f.taylor_env(env)
            if not isinstance(tv, TaylorValue):
                tv = TaylorValue.constant(tv, k)
            out.append(tv)
        return out

    def describe(self):
        return {"kind": self.kind, "phi": [str(e) for e in self.exprs]}


class MomentumSection(Section):
    """phi_a = p_a = vlift X_a(L) restricted to C."""

    kind = "momentum"

    def __init__(self, L, frame, split):
        super().__init__(frame, split)
        self.L = L

    def _chart_point(self, q, v_alpha, dirs):
        q = np.asarray(q, dtype=float)
        v_alpha = np.asarray(v_alpha, dtype=float)
        v = np.zeros(q.shape)
        v[..., : self.split.m] = v_alpha
        zq = np.zeros(q.shape)
        full_dirs = []
        for dq, dv in dirs:
            dvf = np.zeros(q.shape)
            dvf[..., : self.split.m] = np.asarray(dv, dtype=float)
            full_dirs.append((np.asarray(dq, dtype=float), dvf))
        return QvChartPoint(self.frame, q, v, full_dirs, probe=True)

    def taylor(self, q, v_alpha, dirs):
        pt = self._chart_point(q, v_alpha, dirs)
        return self._momenta(pt, len(dirs))

    def _momenta(self, pt, k):
        n, m = self.split.n, self.split.m
        partials = [pt.eval_fibre_partial(self.L, i) for i in range(n)]
        bit = 1 << pt.ndirs
        out = []
        for a in range(m, n):
            acc = None
            for i in range(n):
                coeff = pt.coeff_tvs[a][i]
                if isinstance(coeff, TaylorValue):
                    coeff = coeff.drop(bit)
                term = partials[i] * coeff
                acc = term if acc is None else acc + term
            out.append(acc)
        return out


class ShiftedMomentumSection(MomentumSection):
    """phi_a = p_a + k_a with user-supplied candidate constants of motion."""

    kind = "momentum_shifted"

    def __init__(self, L, frame, split, k_exprs, params=None):
        super().__init__(L, frame, split)
        self.shift = CustomSection(frame, split, k_exprs, params)

    def taylor(self, q, v_alpha, dirs):
        base = MomentumSection.taylor(self, q, v_alpha, dirs)
        extra = self.shift.taylor(q, v_alpha, dirs)
        return [b + e for b, e in zip(base, extra)]

    def describe(self):
        return {"kind": self.kind,
                "k": [str(e) for e in self.shift.exprs]}


def make_section(spec, L, frame, split, builtin_k=None):
    """Build a section from a config mapping {'kind': ..., ...}."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "zero":
        return ZeroSection(frame, split)
    if kind == "momentum":
        return MomentumSection(L, frame, split)
    if kind == "momentum_shifted":
        k = spec.get("k", "builtin")
        if k == "builtin":
            if builtin_k is None:
                raise ValueError(
                    "this system has no built-in shift expressions")
            k = builtin_k
        return ShiftedMomentumSection(L, frame, split, k)
    if kind == "custom":
        return CustomSection(frame, split, spec["phi"])
    raise ValueError(f"unknown section kind {kind!r}")


# ---------------------------------------------------------------------------
# Restricted vakonomic solution


@dataclass
class VakonomicSolution:
    gamma_C: np.ndarray
    A: np.ndarray
    Lambda: np.ndarray
    section: Section


@dataclass
class ConsistencyReport:
    weak_defect: np.ndarray       # per alpha
    strong_defect: np.ndarray     # per a
    tangency_defect: np.ndarray   # per a
    point: QuasiState


def _phi_R_alpha(phi_vals, R, v, split):
    """phi_a R^a_alpha_beta v^beta for each alpha."""
    m, n = split.m, split.n
    Rv = np.einsum("...abk,...k->...ab", R[..., m:, :m, :], v)
    return np.einsum("...a,...ab->...b", phi_vals, Rv)


def _phi_R_a(phi_vals, R, v, split):
    """phi_b R^b_a_alpha v^alpha for each a."""
    m, n = split.m, split.n
    Rv = np.einsum("...bak,...k->...ba", R[..., m:, m:, :], v)
    return np.einsum("...b,...ba->...a", phi_vals, Rv)


def _require_vakonomic_regularity(L, frame, split, p, det_tol):
    rep = regularity(L, frame, split, p, threshold=det_tol)
    if not rep.regular_D:
        raise RegularityError("regular_D", rep.det_D)
    if not rep.regular_Dperp:
        raise RegularityError("regular_Dperp", rep.det_Dperp)
    return rep


def solve_gamma_C(L, frame, split, section, s, det_tol=GAMMA_DET_TOL):
    """The unique tangent solution of the restricted vakonomic problem.

    Returns a VakonomicSolution holding Gamma_C^alpha, the multiplier rates
    A_a, and Lambda_a at the state.
    """
    s.require_on_C(split)
    m, n = split.m, split.n
    nh = NonholonomicField(L, frame, split, det_tol=det_tol)
    u, h = nh._tangent_parts(s)
    p = TangentPoint(s.q, u)
    _require_vakonomic_regularity(L, frame, split, p, det_tol)
    g = hessian(L, frame, p, indices=range(m))
    b = np.stack(
        [clift_deriv(L, frame, a, p) - dvlift(L, frame, a, p, u, h)
         for a in range(m)], axis=-1)
    phi_vals = section.values(s.q, s.v_alpha(split))
    R = structure_functions(frame, s.q)
    b = b + _phi_R_alpha(phi_vals, R, s.v, split)
    gamma_C, det = solve_and_det(g, b)
    M = frame.matrix(s.q)
    wfib = h + np.einsum("...a,...aj->...j", gamma_C, M[..., :m, :])
    Lam = np.stack(
        [dvlift(L, frame, a, p, u, wfib) - clift_deriv(L, frame, a, p)
         for a in range(m, n)], axis=-1) if n > m else np.zeros(
        s.q.shape[:-1] + (0,))
    A = Lam - _phi_R_a(phi_vals, R, s.v, split)
    return VakonomicSolution(gamma_C, A, Lam, section)


def consistency_report(L, frame, split, section, s, det_tol=GAMMA_DET_TOL):
    """Weak, strong and tangency defects of a section at a state."""
    s.require_on_C(split)
    m = split.m
    nh = NonholonomicField(L, frame, split, det_tol=det_tol)
    gamma = nh.gamma(s)
    lam = nh.multipliers(s)
    sol = solve_gamma_C(L, frame, split, section, s, det_tol=det_tol)
    phi_vals = section.values(s.q, s.v_alpha(split))
    R = structure_functions(frame, s.q)
    weak = _phi_R_alpha(phi_vals, R, s.v, split)
    M = frame.matrix(s.q)
    u = np.einsum("...a,...aj->...j", s.v_alpha(split), M[..., :m, :])
    phi_shift = _phi_R_a(phi_vals, R, s.v, split)

    def phi_rate(gcoeff):
        tvs = section.taylor(s.q, s.v_alpha(split), [(u, gcoeff)])
        out = np.empty(phi_vals.shape)
        for i, tv in enumerate(tvs):
            out[..., i] = tv.c[1] if isinstance(tv, TaylorValue) else 0.0
        return out

    strong = phi_rate(gamma) + phi_shift - lam
    tangency = phi_rate(sol.gamma_C) + phi_shift - sol.Lambda
    return ConsistencyReport(weak, strong, tangency, s)


def gamma_bar_tangency(L, frame, split, section, s, det_tol=GAMMA_DET_TOL):
    """Gamma-bar applied to mu_a - phi_a on the section image:
    (lambda_a - phi_b R^b_a_alpha v^alpha) - Gamma(phi_a).  Zero exactly when
    the problems are strongly consistent at the state."""
    s.require_on_C(split)
    m = split.m
    nh = NonholonomicField(L, frame, split, det_tol=det_tol)
    gamma = nh.gamma(s)
    lam = nh.multipliers(s)
    phi_vals = section.values(s.q, s.v_alpha(split))
    R = structure_functions(frame, s.q)
    M = frame.matrix(s.q)
    u = np.einsum("...a,...aj->...j", s.v_alpha(split), M[..., :m, :])
    tvs = section.taylor(s.q, s.v_alpha(split), [(u, gamma)])
    rate = np.empty(phi_vals.shape)
    for i, tv in enumerate(tvs):
        rate[..., i] = tv.c[1] if isinstance(tv, TaylorValue) else 0.0
    return lam - _phi_R_a(phi_vals, R, s.v, split) - rate


# ---------------------------------------------------------------------------
# Variational Lagrangian and its Euler-Lagrange field


class VariationalLagrangian:
    """L~ = L - Phi_a v^a for a canonical extension Phi of the section.

    Momentum sections extend as the full momentum functions p_a on TQ;
    expression-backed sections are re-read on TQ unchanged, which keeps the
    extension independent of the v^a.  Any choice of extension yields the
    same restricted field, so one canonical extension is fixed for
    reproducibility.
    """

    def __init__(self, L, frame, split, section):
        self.L = L
        self.frame = frame
        self.split = split
        self.section = section

    def _phi_tvs(self, pt):
        """TaylorValues of the extensions Phi_a at a chart point (probe on)."""
        m, n = self.split.m, self.split.n
        bit = 1 << pt.ndirs
        sec = self.section
        out = [None] * (n - m)
        if isinstance(sec, MomentumSection):
            partials = [pt.eval_fibre_partial(self.L, i) for i in range(n)]
            for j, a in enumerate(range(m, n)):
                acc = None
                for i in range(n):
                    coeff = pt.coeff_tvs[a][i]
                    if isinstance(coeff, TaylorValue):
                        coeff = coeff.drop(bit)
                    term = partials[i] * coeff
                    acc = term if acc is None else acc + term
                out[j] = acc
        expr_part = None
        if isinstance(sec, ShiftedMomentumSection):
            expr_part = sec.shift
        elif isinstance(sec, CustomSection):
            expr_part = sec
        if expr_part is not None:
            env = {name: tv.drop(bit) for name, tv in pt.q_tvs.items()}
            for i in range(m):
                env[f"v{i + 1}"] = pt.v_tvs[i].drop(bit)
            for name, val in expr_part.params.items():
                env.setdefault(name, val)
            for j, f in enumerate(expr_part.fns):
                tv = f.taylor_env(env)
                if not isinstance(tv, TaylorValue):
                    tv = TaylorValue.constant(tv, pt.ndirs)
                out[j] = tv if out[j] is None else out[j] + tv
        for j in range(n - m):
            if out[j] is None:
                out[j] = TaylorValue.constant(0.0, pt.ndirs)
        return out

    def qv_taylor(self, q, v, dirs):
        """Jet of L~ in the (q, v) chart along full-chart directions."""
        m, n = self.split.m, self.split.n
        pt = QvChartPoint(self.frame, q, v, dirs, probe=True)
        out = pt.eval(self.L)
        if isinstance(self.section, ZeroSection):
            return out
        phis = self._phi_tvs(pt)
        bit = 1 << pt.ndirs
        for j, a in enumerate(range(m, n)):
            out = out - phis[j] * pt.v_tvs[a].drop(bit)
        return out

    def value(self, q, v):
        return _tv_value(self.qv_taylor(q, v, ()))

    def phi_values(self, q, v):
        """The extension Phi_a evaluated at a full chart point."""
        pt = QvChartPoint(self.frame, np.asarray(q, dtype=float),
                          np.asarray(v, dtype=float), (), probe=True)
        vals = [_tv_value(tv) for tv in self._phi_tvs(pt)]
        q = np.asarray(q, dtype=float)
        out = np.empty(q.shape[:-1] + (self.split.n_constraints,))
        for i, val in enumerate(vals):
            out[..., i] = val
        return out


def _tv_value(tv):
    return tv.c[0] if isinstance(tv, TaylorValue) else tv


def make_variational_lagrangian(L, frame, split, section):
    return VariationalLagrangian(L, frame, split, section)


def _qv_jet(Lt, frame, q, v, dirs):
    if isinstance(Lt, VariationalLagrangian):
        return Lt.qv_taylor(q, v, dirs)
    pt = QvChartPoint(frame, q, v, dirs)
    return pt.eval(Lt)


def el_field(Lt, frame, p, det_tol=GAMMA_DET_TOL):
    """Coefficients of the Euler-Lagrange field of a (possibly derived)
    Lagrangian in the frame, from the full n x n chart solve.

    Works for any chart Lagrangian exposing jets; raises RegularityError when
    the full Hessian is singular at the point.
    """
    q = np.asarray(p.q, dtype=float)
    n = frame.n
    s = quasi_velocities(frame, p)
    v = s.v
    M = frame.matrix(q)
    R = structure_functions(frame, q)
    zq = np.zeros(q.shape)
    e = []
    for i in range(n):
        ei = np.zeros(q.shape)
        ei[..., i] = 1.0
        e.append(ei)
    g = np.zeros(q.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(i, n):
            d = _qv_jet(Lt, frame, q, v, [(zq, e[i]), (zq, e[j])]).c[3]
            g[..., i, j] = d
            g[..., j, i] = d
    u = np.einsum("...i,...ij->...j", v, M)
    b = np.empty(q.shape[:-1] + (n,))
    for i in range(n):
        z = -np.einsum("...jk,...k->...j", R[..., :, i, :], v)
        cl = _qv_jet(Lt, frame, q, v, [(M[..., i, :], z)]).c[1]
        rate = _qv_jet(Lt, frame, q, v, [(zq, e[i]), (u, zq)]).c[3]
        b[..., i] = cl - rate
    gamma, det = solve_and_det(g, b)
    if gamma is None or np.min(np.abs(det)) <= det_tol:
        raise RegularityError("full_hessian", det)
    return gamma


def tilde_tangency_check(Lt, frame, split, states, tol=1e-9):
    """Verify Gamma~(v^a) = 0 on C for the Euler-Lagrange field of Lt."""
    m = split.m
    per_point = []
    worst = 0.0
    for s in states:
        s.require_on_C(split)
        p = TangentPoint(s.q, np.einsum(
            "...i,...ij->...j", s.v, frame.matrix(s.q)))
        gam = el_field(Lt, frame, p)
        resid = float(np.max(np.abs(gam[..., m:]))) if split.n_constraints \
            else 0.0
        per_point.append(resid)
        worst = max(worst, resid)
    return {"max_residual": worst, "tangent": worst <= tol,
            "per_point": per_point, "tolerance": tol}
