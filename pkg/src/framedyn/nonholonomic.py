"""Nonholonomic dynamics from the fundamental equations.

On the constraint submanifold C the dynamics is the unique second-order field
tangent to C whose coefficients solve

    g_ab Gamma^b = clift X_a(L) - v^b clift X_b(vlift X_a(L)),   a,b <= m,

with g the Hessian block of L over the constraint distribution.  Multipliers
are the values of the same one-form on the complementary frame fields.  Three
independently-assembled residual oracles are provided: the fundamental
equations evaluated from fresh jets on (q, u); the Hamel form evaluated
through the composite function L(q, X(q)v); and the constrained-Lagrangian
form, whose right-hand side couples the momenta to the structure functions.
"""

from __future__ import annotations

import numpy as np

from .frames import TangentPoint, structure_functions
from .lagrangian import clift_deriv, dvlift, hessian, vlift_deriv
from .linsolve import cond_estimate, solve_and_det

__all__ = [
    "RegularityError", "NonholonomicField", "solve_gamma", "multipliers",
    "residual_fundamental", "residual_hamel", "constrained_form_residual",
]

GAMMA_DET_TOL = 1e-10
COND_WARN = 1e8


class RegularityError(Exception):
    def __init__(self, condition, det):
        super().__init__(
            f"regularity condition {condition!r} failed: det = {det!r}")
        self.condition = condition
        self.det = det


class NonholonomicField:
    """Coefficient provider (q, v^alpha) -> Gamma^alpha with multipliers.

    Points must lie on C (|v^a| <= 1e-12); off-C states are rejected rather
    than projected so integrator drift cannot be masked.
    """

    def __init__(self, L, frame, split, det_tol=GAMMA_DET_TOL):
        self.L = L
        self.frame = frame
        self.split = split
        self.det_tol = det_tol

    # -- core assembly ------------------------------------------------------

    def _tangent_parts(self, s):
        """u and the drift fibre term h = v^b (D X_b) u at the state."""
        m = self.split.m
        M = self.frame.matrix(s.q)
        self.frame.check_matrix(M)
        va = s.v_alpha(self.split)
        u = np.einsum("...a,...aj->...j", va, M[..., :m, :])
        h = 0.0
        for b in range(m):
            h = h + va[..., b, None] * self.frame.dfield(b, s.q, u)
        return u, h

    def _solve(self, s):
        m = self.split.m
        u, h = self._tangent_parts(s)
        p = TangentPoint(s.q, u)
        g = hessian(self.L, self.frame, p, indices=range(m))
        b = np.stack(
            [clift_deriv(self.L, self.frame, a, p)
             - dvlift(self.L, self.frame, a, p, u, h) for a in range(m)],
            axis=-1)
        gamma, det = solve_and_det(g, b)
        if gamma is None or np.min(np.abs(det)) <= self.det_tol:
            raise RegularityError("regular_D", det)
        return u, h, p, g, gamma

    def gamma(self, s):
        """Gamma^alpha at a state on C."""
        s.require_on_C(self.split)
        return self._solve(s)[4]

    def rate(self, s):
        """ODE right side in the C chart: (qdot, vdot) = (u, Gamma)."""
        u, _, _, _, gamma = self._solve(s)
        return u, gamma

    def gamma_tangent(self, s):
        """The field's tangent vector at s as a (base, fibre) pair on TQ."""
        m = self.split.m
        u, h, p, _, gamma = self._solve(s)
        M = self.frame.matrix(s.q)
        wfib = h + np.einsum("...a,...aj->...j", gamma, M[..., :m, :])
        return u, wfib, p, gamma

    def multipliers(self, s):
        """lambda_a = Gamma(vlift X_a(L)) - clift X_a(L)."""
        s.require_on_C(self.split)
        u, wfib, p, _ = self.gamma_tangent(s)
        out = [dvlift(self.L, self.frame, a, p, u, wfib)
               - clift_deriv(self.L, self.frame, a, p)
               for a in range(self.split.m, self.split.n)]
        return np.stack(out, axis=-1) if out else np.zeros(s.q.shape[:-1] + (0,))

    def solve_report(self, s):
        """Solution with a condition-number diagnostic attached."""
        u, h, p, g, gamma = self._solve(s)
        cond = cond_estimate(g)
        return {
            "gamma": gamma,
            "condition": cond,
            "warning": (f"ill-conditioned Hessian block: cond = {cond:.3e}"
                        if cond > COND_WARN else None),
        }

    # -- residual oracles ---------------------------------------------------

    def residual_fundamental(self, s, gamma=None):
        """Gamma(vlift X_alpha(L)) - clift X_alpha(L), from fresh jets.

        A gamma override substitutes trial coefficients (for falsification
        checks); by default the solver's own output is re-evaluated.
        """
        s.require_on_C(self.split)
        m = self.split.m
        if gamma is None:
            u, wfib, p, _ = self.gamma_tangent(s)
        else:
            u, h = self._tangent_parts(s)
            p = TangentPoint(s.q, u)
            M = self.frame.matrix(s.q)
            wfib = h + np.einsum("...a,...aj->...j", np.asarray(gamma),
                                 M[..., :m, :])
        out = [dvlift(self.L, self.frame, a, p, u, wfib)
               - clift_deriv(self.L, self.frame, a, p)
               for a in range(m)]
        return np.stack(out, axis=-1)

    def residual_hamel(self, s, gamma=None):
        """Hamel-form residual through the composite L(q, X(q) v)."""
        from .quasichart import QvChartPoint

        s.require_on_C(self.split)
        split = self.split
        m, n = split.m, split.n
        if gamma is None:
            gamma = self.gamma(s)
        M = self.frame.matrix(s.q)
        u = np.einsum("...a,...aj->...j", s.v_alpha(split), M[..., :m, :])
        R = structure_functions(self.frame, s.q)
        gpad = np.zeros(s.q.shape)
        gpad[..., :m] = gamma
        zq = np.zeros(s.q.shape)
        out = []
        for a in range(m):
            e_va = np.zeros(s.q.shape)
            e_va[..., a] = 1.0
            pt = QvChartPoint(self.frame, s.q, s.v,
                              [(zq, e_va), (u, gpad)])
            t_gamma = pt.eval(self.L).c[3]
            base = QvChartPoint(self.frame, s.q, s.v,
                                [(M[..., a, :], zq)]).eval(self.L).c[1]
            z = np.einsum("...jk,...k->...j", R[..., :, a, :], s.v)
            corr = QvChartPoint(self.frame, s.q, s.v,
                                [(zq, z)]).eval(self.L).c[1]
            out.append(t_gamma - base + corr)
        return np.stack(out, axis=-1)

    def constrained_form_residual(self, s, gamma=None):
        """Constrained-Lagrangian form: the tangent part of clift X_alpha acts
        on the restriction L_c, and the momentum term p_a carries the rest."""
        from .quasichart import QvChartPoint

        s.require_on_C(self.split)
        split = self.split
        m, n = split.m, split.n
        if gamma is None:
            gamma = self.gamma(s)
        M = self.frame.matrix(s.q)
        u = np.einsum("...a,...aj->...j", s.v_alpha(split), M[..., :m, :])
        R = structure_functions(self.frame, s.q)
        p = TangentPoint(s.q, u)
        p_mom = [vlift_deriv(self.L, self.frame, a, p) for a in range(m, n)]
        gpad = np.zeros(s.q.shape)
        gpad[..., :m] = gamma
        zq = np.zeros(s.q.shape)
        v_c = np.zeros(s.q.shape)
        v_c[..., :m] = s.v_alpha(split)
        out = []
        for a in range(m):
            e_va = np.zeros(s.q.shape)
            e_va[..., a] = 1.0
            pt = QvChartPoint(self.frame, s.q, v_c, [(zq, e_va), (u, gpad)])
            t_gamma = pt.eval(self.L).c[3]
            base = QvChartPoint(self.frame, s.q, v_c,
                                [(M[..., a, :], zq)]).eval(self.L).c[1]
            zbeta = np.zeros(s.q.shape)
            zbeta[..., :m] = np.einsum(
                "...bk,...k->...b", R[..., :m, a, :], s.v)
            corr = QvChartPoint(self.frame, s.q, v_c,
                                [(zq, zbeta)]).eval(self.L).c[1]
            lhs = t_gamma - (base - corr)
            rhs = 0.0
            for j, b in enumerate(range(m, n)):
                rhs = rhs - np.einsum(
                    "...k,...k->...", R[..., b, a, :], s.v) * p_mom[j]
            out.append(lhs - rhs)
        return np.stack(out, axis=-1)


def solve_gamma(L, frame, split, s):
    """Gamma^alpha on C from the fundamental equations (partial-pivot solve)."""
    return NonholonomicField(L, frame, split).gamma(s)


def multipliers(field, s):
    return field.multipliers(s)


def residual_fundamental(field, s):
    return field.residual_fundamental(s)


def residual_hamel(field, s):
    return field.residual_hamel(s)


def constrained_form_residual(field, s):
    return field.constrained_form_residual(s)
