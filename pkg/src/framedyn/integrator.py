"""Integration of dynamics fields in the constraint chart.

The chart ODE is qdot^j = v^alpha X_alpha^j(q), vdot^alpha = Gamma^alpha;
working in (q, v^alpha) keeps the constraints satisfied exactly, so residual
monitoring replaces constraint-drift monitoring (see docs/integrator.md for
the derivation and the Dormand-Prince tableau).  Fixed-step RK4 and the
embedded Dormand-Prince 5(4) pair are provided.  Observables are pure
functions of the stored states, evaluated in a single batched pass over the
accepted steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
import numpy as np

from .frames import QuasiState
from .lagrangian import energy, vlift_deriv
from .frames import velocities_from_quasi

__all__ = [
    "IntegrationError", "IntegratorConfig", "Trajectory", "integrate",
    "drift_report", "export_csv", "export_json",
]


class IntegrationError(RuntimeError):
    def __init__(self, message, t):
        super().__init__(f"{message} (at t = {t})")
        self.t = t


@dataclass
class IntegratorConfig:
    method: str = "rk4"          # "rk4" | "rk45"
    step: float = 1e-3           # rk4 step size
    rtol: float = 1e-8           # rk45 tolerances
    atol: float = 1e-10
    t_span: tuple = (0.0, 10.0)
    observables: tuple = ("energy",)
    custom_observables: dict = field(default_factory=dict)
    section: object = None       # enables defect observables
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "rk4" and self.step <= 0:
            raise ValueError("step must be positive")
        if self.method == "rk45" and (self.rtol <= 0 or self.atol <= 0):
            raise ValueError("tolerances must be positive")
        if not self.t_span[1] > self.t_span[0]:
            raise ValueError("t_span must be increasing")


@dataclass
class Trajectory:
    times: np.ndarray
    q: np.ndarray          # (N, n)
    v: np.ndarray          # (N, m)
    observables: dict
    meta: dict = field(default_factory=dict)

    def state(self, i, split):
        return QuasiState.on_C(self.q[i], self.v[i], split)

    def states(self, split):
        return QuasiState.on_C(self.q, self.v, split)

    def columns(self):
        n, m = self.q.shape[1], self.v.shape[1]
        cols = [("t", self.times)]
        cols += [(f"q{i + 1}", self.q[:, i]) for i in range(n)]
        cols += [(f"v{i + 1}", self.v[:, i]) for i in range(m)]
        cols += list(self.observables.items())
        return cols


def _rate_fn(provider, frame, split):
    if hasattr(provider, "rate"):
        def rate(q, v):
            return provider.rate(QuasiState.on_C(q, v, split))
        return rate

    m = split.m

    def rate(q, v):
        M = frame.matrix(q)
        u = np.einsum("...a,...aj->...j", v, M[..., :m, :])
        return u, np.asarray(provider(q, v), dtype=float)

    return rate


# Dormand-Prince 5(4) coefficients; the fifth-order solution propagates and
# the embedded fourth-order difference provides the local error estimate.
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)


def integrate(provider, frame, split, initial, cfg):
    """Integrate the chart ODE from an initial state on C.

    provider is a NonholonomicField-like object (with .rate) or a plain
    callable (q, v_alpha) -> Gamma^alpha.  Returns a Trajectory sampled at
    every accepted step, with the requested observables attached.
    """
    initial.require_on_C(split)
    if initial.batched:
        raise ValueError("integrate takes a single initial state")
    rate = _rate_fn(provider, frame, split)
    m = split.m
    q = np.array(initial.q, dtype=float)
    v = np.array(initial.v[:m], dtype=float)
    t0, t1 = cfg.t_span
    times, qs, vs = [t0], [q.copy()], [v.copy()]

    def f(t, q, v):
        try:
            return rate(q, v)
        except Exception as exc:
            raise IntegrationError(f"field evaluation failed: {exc}", t)

    if cfg.method == "rk4":
        nsteps = max(1, int(round((t1 - t0) / cfg.step)))
        h_nominal = cfg.step
        t = t0
        i = 0
        while t < t1 - 1e-15 * max(1.0, abs(t1)):
            h = min(h_nominal, t1 - t)
            k1q, k1v = f(t, q, v)
            k2q, k2v = f(t + h / 2, q + h / 2 * k1q, v + h / 2 * k1v)
            k3q, k3v = f(t + h / 2, q + h / 2 * k2q, v + h / 2 * k2v)
            k4q, k4v = f(t + h, q + h * k3q, v + h * k3v)
            q = q + (h / 6) * (k1q + 2 * k2q + 2 * k3q + k4q)
            v = v + (h / 6) * (k1v + 2 * k2v + 2 * k3v + k4v)
            i += 1
            t = t0 + i * h_nominal if i <= nsteps else t1
            if t > t1:
                t = t1
            times.append(t)
            qs.append(q.copy())
            vs.append(v.copy())
            if i > cfg.max_steps:
                raise IntegrationError("step budget exhausted", t)
    else:
        t = t0
        h = min(cfg.step if cfg.step > 0 else (t1 - t0) / 100, t1 - t0)
        kq1, kv1 = f(t, q, v)
        nacc = 0
        while t < t1 - 1e-15 * max(1.0, abs(t1)):
            h = min(h, t1 - t)
            kqs, kvs = [kq1], [kv1]
            for stage in range(1, 7):
                aq = q.copy().astype(float)
                av = v.copy().astype(float)
                for j, aij in enumerate(_DP_A[stage]):
                    if aij:
                        aq = aq + h * aij * kqs[j]
                        av = av + h * aij * kvs[j]
                kq, kv = f(t + h * sum(_DP_A[stage]), aq, av)
                kqs.append(kq)
                kvs.append(kv)
            q5 = q + h * sum(b * k for b, k in zip(_DP_B5, kqs) if b)
            v5 = v + h * sum(b * k for b, k in zip(_DP_B5, kvs) if b)
            q4 = q + h * sum(b * k for b, k in zip(_DP_B4, kqs) if b)
            v4 = v + h * sum(b * k for b, k in zip(_DP_B4, kvs) if b)
            err_q = q5 - q4
            err_v = v5 - v4
            scale_q = cfg.atol + cfg.rtol * np.maximum(np.abs(q), np.abs(q5))
            scale_v = cfg.atol + cfg.rtol * np.maximum(np.abs(v), np.abs(v5))
            err = np.sqrt(
                (np.sum((err_q / scale_q) ** 2) + np.sum((err_v / scale_v) ** 2))
                / (q.size + v.size))
            if err <= 1.0:
                t = t + h
                q, v = q5, v5
                kq1, kv1 = kqs[6], kvs[6]  # FSAL
                times.append(t)
                qs.append(q.copy())
                vs.append(v.copy())
                nacc += 1
                if nacc > cfg.max_steps:
                    raise IntegrationError("step budget exhausted", t)
            factor = 0.9 * (err + 1e-16) ** -0.2
            h = h * min(5.0, max(0.2, factor))
            if h < 1e-13 * (t1 - t0):
                raise IntegrationError("adaptive step underflow", t)

    traj = Trajectory(
        times=np.array(times), q=np.array(qs), v=np.array(vs),
        observables={},
        meta={"method": cfg.method,
              "step": cfg.step if cfg.method == "rk4" else None,
              "rtol": cfg.rtol if cfg.method == "rk45" else None,
              "atol": cfg.atol if cfg.method == "rk45" else None,
              "t_span": list(cfg.t_span)})
    attach_observables(traj, provider, frame, split, cfg)
    return traj


def attach_observables(traj, provider, frame, split, cfg):
    """Evaluate the configured observables over the stored states (batched).

    Named observables need a NonholonomicField-like provider carrying L;
    custom observables are expressions in the coordinates and v1..vm.
    """
    states = traj.states(split)
    L = getattr(provider, "L", None)
    obs = traj.observables
    names = cfg.observables or ()
    if names and L is None and any(
            x in ("energy", "momenta", "multipliers", "defects")
            for x in names):
        raise ValueError("named observables require a field provider with L")
    if "energy" in names:
        p = velocities_from_quasi(frame, states)
        obs["energy"] = energy(L, frame, p)
    if "momenta" in names:
        p = velocities_from_quasi(frame, states)
        for a in range(split.m, split.n):
            obs[f"p{a + 1}"] = vlift_deriv(L, frame, a, p)
    if "multipliers" in names:
        lam = provider.multipliers(states)
        for j, a in enumerate(range(split.m, split.n)):
            obs[f"lambda{a + 1}"] = lam[..., j]
    if "defects" in names:
        if cfg.section is None:
            raise ValueError("defect observables require cfg.section")
        from .vakonomic import consistency_report
        rep = consistency_report(L, frame, split, cfg.section, states)
        for a in range(split.m):
            obs[f"weak_defect_{a + 1}"] = rep.weak_defect[..., a]
        for j, a in enumerate(range(split.m, split.n)):
            obs[f"strong_defect_{a + 1}"] = rep.strong_defect[..., j]
            obs[f"tangency_defect_{a + 1}"] = rep.tangency_defect[..., j]
    params = dict(frame.params)
    if L is not None:
        params.update(L.params)
    for name, expr in (cfg.custom_observables or {}).items():
        from .exprlang import parse, tree_eval
        env = {c: states.q[..., i] for i, c in enumerate(frame.coords)}
        for a in range(split.m):
            env[f"v{a + 1}"] = states.v[..., a]
        env.update(params)
        obs[name] = tree_eval(parse(expr) if isinstance(expr, str) else expr,
                              env) * np.ones(len(traj.times))
    return traj


def drift_report(traj, L, frame, split):
    """Residuals of the fundamental and Hamel forms along the trajectory,
    plus energy drift; all recomputed from the stored states."""
    from .nonholonomic import NonholonomicField

    states = traj.states(split)
    nh = NonholonomicField(L, frame, split)
    rf = nh.residual_fundamental(states)
    rh = nh.residual_hamel(states)
    p = velocities_from_quasi(frame, states)
    E = energy(L, frame, p)
    return {
        "max_residual_fundamental": float(np.max(np.abs(rf))),
        "max_residual_hamel": float(np.max(np.abs(rh))),
        "energy_drift": float(np.max(np.abs(E - E[0]))),
        "samples": int(len(traj.times)),
        "t_span": [float(traj.times[0]), float(traj.times[-1])],
    }


def _fmt(x):
    return f"{x:.17g}"


def export_csv(traj, path):
    """CSV export: header t,q1..qn,v1..vm,<observables...>, 17-significant-
    digit decimal floats."""
    cols = traj.columns()
    with open(path, "w") as fh:
        fh.write(",".join(name for name, _ in cols) + "\n")
        rows = len(traj.times)
        for i in range(rows):
            fh.write(",".join(_fmt(float(col[i])) for _, col in cols) + "\n")


def export_json(traj, path):
    """JSON export mirroring the CSV columns."""
    cols = traj.columns()
    doc = {name: [float(x) for x in col] for name, col in cols}
    doc["_meta"] = traj.meta
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
