"""Primal active-set solver for small convex programs with diagonal curvature.

The canonical form is::

    minimize    0.5 * sum(h_i x_i**2) + c @ x
    subject to  A_eq x = b_eq
                l_in <= A_in x <= u_in
                lo <= x <= hi

with ``h >= 0``. Zero curvature is allowed (linear programs), in which case the
method moves along zero-curvature descent rays until a constraint blocks, much
like a simplex pivot. Sign convention of the returned multipliers::

    h*x + c - A_eq.T @ y - A_in.T @ (mu_lo - mu_up) - (nu_lo - nu_up) = 0

with ``mu_lo, mu_up, nu_lo, nu_up >= 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .core import StorbidError


class ProgramError(StorbidError, ValueError):
    """Malformed program (dimension mismatch, inverted bounds, ...)."""


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


CERTIFY_TOL = 1e-6


@dataclass
class ConvexProgram:
    quadratic_diag: np.ndarray
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq_matrix: np.ndarray = None
    eq_rhs: np.ndarray = None
    ineq_matrix: np.ndarray = None
    ineq_lower: np.ndarray = None
    ineq_upper: np.ndarray = None

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float).reshape(-1)
        n = self.linear.size
        self.quadratic_diag = np.asarray(self.quadratic_diag, dtype=float).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        self.eq_matrix = _matrix(self.eq_matrix, n)
        self.ineq_matrix = _matrix(self.ineq_matrix, n)
        m_eq, m_in = self.eq_matrix.shape[0], self.ineq_matrix.shape[0]
        self.eq_rhs = _vector(self.eq_rhs, m_eq, 0.0)
        self.ineq_lower = _vector(self.ineq_lower, m_in, -np.inf)
        self.ineq_upper = _vector(self.ineq_upper, m_in, np.inf)
        self.validate()

    @property
    def n(self) -> int:
        return self.linear.size

    def validate(self) -> None:
        n = self.n
        for name in ("quadratic_diag", "lower", "upper"):
            if getattr(self, name).size != n:
                raise ProgramError(f"{name} has size {getattr(self, name).size}, expected {n}")
        if self.eq_matrix.shape[1] != n or self.ineq_matrix.shape[1] != n:
            raise ProgramError("constraint matrices must have one column per variable")
        if self.eq_rhs.size != self.eq_matrix.shape[0]:
            raise ProgramError("eq_rhs does not match eq_matrix rows")
        if not (self.ineq_lower.size == self.ineq_upper.size == self.ineq_matrix.shape[0]):
            raise ProgramError("inequality bounds do not match ineq_matrix rows")
        if np.any(self.quadratic_diag < 0) or not np.all(np.isfinite(self.quadratic_diag)):
            raise ProgramError("curvature must be finite and non-negative")
        if not np.all(np.isfinite(self.linear)):
            raise ProgramError("linear costs must be finite")
        if np.any(self.lower > self.upper) or np.any(self.ineq_lower > self.ineq_upper):
            raise ProgramError("lower bound exceeds upper bound")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ProgramError("bounds must not be NaN")

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * np.dot(self.quadratic_diag * x, x) + np.dot(self.linear, x))

    def with_linear(self, linear: np.ndarray) -> "ConvexProgram":
        return ConvexProgram(self.quadratic_diag, linear, self.lower, self.upper,
                             self.eq_matrix, self.eq_rhs, self.ineq_matrix,
                             self.ineq_lower, self.ineq_upper)

    def to_dict(self) -> dict:
        def arr(a):
            return [[_num(v) for v in row] for row in a] if a.ndim == 2 else [_num(v) for v in a]
        return {k: arr(getattr(self, k)) for k in (
            "quadratic_diag", "linear", "lower", "upper", "eq_matrix", "eq_rhs",
            "ineq_matrix", "ineq_lower", "ineq_upper")}


def _num(v: float):
    return float(v) if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def _matrix(a, n: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, n) if a.size else np.zeros((0, n))


def _vector(v, m: int, fill: float) -> np.ndarray:
    if v is None:
        return np.full(m, fill)
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass
class KktResiduals:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


@dataclass
class SolveReport:
    primal: np.ndarray
    eq_duals: np.ndarray
    ineq_lower_duals: np.ndarray
    ineq_upper_duals: np.ndarray
    bound_lower_duals: np.ndarray
    bound_upper_duals: np.ndarray
    status: SolveStatus
    iterations: int
    residuals: KktResiduals
    objective: float
    infeasible_row: Optional[int] = None
    lexicographic: bool = False

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "objective": self.objective,
            "infeasible_row": self.infeasible_row,
            "lexicographic": self.lexicographic,
            "primal": self.primal.tolist(),
            "eq_duals": self.eq_duals.tolist(),
            "ineq_lower_duals": self.ineq_lower_duals.tolist(),
            "ineq_upper_duals": self.ineq_upper_duals.tolist(),
            "bound_lower_duals": self.bound_lower_duals.tolist(),
            "bound_upper_duals": self.bound_upper_duals.tolist(),
            "residuals": vars(self.residuals),
        }


# ---------------------------------------------------------------------------
# row form: every constraint is a_k @ x >= r_k  or  a_k @ x == r_k

@dataclass
class _Rows:
    A: np.ndarray
    r: np.ndarray
    is_eq: np.ndarray
    # (class, index, sign) for mapping multipliers back
    origin: List[Tuple[str, int, float]] = field(default_factory=list)


def _build_rows(prog: ConvexProgram) -> _Rows:
    n = prog.n
    rows, rhs, eq, origin = [], [], [], []

    def add(a, r, is_eq, org):
        rows.append(a)
        rhs.append(r)
        eq.append(is_eq)
        origin.append(org)

    for k in range(prog.eq_matrix.shape[0]):
        add(prog.eq_matrix[k], prog.eq_rhs[k], True, ("eq", k, 1.0))
    for k in range(prog.ineq_matrix.shape[0]):
        a, lo, hi = prog.ineq_matrix[k], prog.ineq_lower[k], prog.ineq_upper[k]
        if lo == hi:
            add(a, lo, True, ("ineq", k, 1.0))
            continue
        if np.isfinite(lo):
            add(a, lo, False, ("ineq_lo", k, 1.0))
        if np.isfinite(hi):
            add(-a, -hi, False, ("ineq_up", k, -1.0))
    eye = np.eye(n)
    for i in range(n):
        lo, hi = prog.lower[i], prog.upper[i]
        if lo == hi:
            add(eye[i], lo, True, ("bound", i, 1.0))
            continue
        if np.isfinite(lo):
            add(eye[i], lo, False, ("bound_lo", i, 1.0))
        if np.isfinite(hi):
            add(-eye[i], -hi, False, ("bound_up", i, -1.0))
    A = np.array(rows, dtype=float).reshape(-1, n)
    return _Rows(A, np.array(rhs, dtype=float), np.array(eq, dtype=bool), origin)


class _Unbounded(StorbidError):
    pass


def _initial_working_set(A, r, is_eq, x, act_tol, tol: float = 1e-10) -> List[int]:
    """Equalities first, then active inequalities, keeping rows independent."""
    n = A.shape[1]
    W: List[int] = []
    basis = np.zeros((n, n))
    slack = A @ x - r
    order = [k for k in range(len(r)) if is_eq[k]] + \
            [k for k in range(len(r)) if not is_eq[k] and abs(slack[k]) <= act_tol]
    for k in order:
        if len(W) >= n:
            break
        a = A[k]
        norm = np.linalg.norm(a)
        v = a.copy()
        for _ in range(2):  # Gram-Schmidt, twice for stability
            v -= basis[:len(W)].T @ (basis[:len(W)] @ v)
        res = np.linalg.norm(v)
        if res > tol * max(1.0, norm):
            basis[len(W)] = v / res
            W.append(k)
    return W


def _active_set(h, c, A, r, is_eq, x0, max_iter, tol) -> Tuple[np.ndarray, np.ndarray, int, bool]:
    """Core loop. Returns (x, multipliers per row, iterations, converged)."""
    n = x0.size
    x = x0.copy()
    scale_x = 1.0 + np.max(np.abs(x0), initial=0.0)
    W = _initial_working_set(A, r, is_eq, x, 1e-9 * scale_x)
    row_norm = np.linalg.norm(A, axis=1)
    degenerate_run = 0
    bland = False
    mult = np.zeros(len(r))
    for it in range(1, max_iter + 1):
        g = h * x + c
        g_scale = 1.0 + np.max(np.abs(g), initial=0.0)
        Q = R = None
        if len(W) == n:
            A_W = A[W]
            Z = np.zeros((n, 0))
        elif W:
            A_W = A[W]
            Q, R = np.linalg.qr(A_W.T, mode="complete")
            Z = Q[:, len(W):]
        else:
            A_W = np.zeros((0, n))
            Z = np.eye(n)
        d = np.zeros(n)
        ray = False
        if Z.shape[1]:
            gr = Z.T @ g
            Hr = Z.T @ (h[:, None] * Z)
            w, V = np.linalg.eigh(Hr)
            pos = w > 1e-12 * max(1.0, float(np.max(h, initial=0.0)))
            gv = V.T @ gr
            flat = gv[~pos]
            if flat.size and np.max(np.abs(flat)) > 1e-13 * g_scale:
                d = -(Z @ (V[:, ~pos] @ flat))
                ray = True
            elif np.any(pos):
                d = -(Z @ (V[:, pos] @ (gv[pos] / w[pos])))
        if np.max(np.abs(d), initial=0.0) <= 1e-13 * scale_x and not ray:
            mu = np.zeros(0)
            if len(W) == n:
                mu = np.linalg.solve(A_W.T, g)
            elif W:
                k = len(W)
                mu = np.linalg.solve(R[:k, :k], Q[:, :k].T @ g)
            neg = [(mu[j], W[j]) for j in range(len(W))
                   if not is_eq[W[j]] and mu[j] < -1e-12 * g_scale]
            if not neg:
                mult = np.zeros(len(r))
                for j, k in enumerate(W):
                    mult[k] = mu[j]
                return x, mult, it, True
            if bland:
                drop = min(neg, key=lambda t: t[1])[1]
            else:
                drop = min(neg, key=lambda t: (t[0], t[1]))[1]
            W.remove(drop)
            continue
        # ratio test over inactive inequality rows
        Ad = A @ d
        slack = np.maximum(A @ x - r, 0.0)
        dnorm = np.linalg.norm(d)
        step_max = np.inf if ray else 1.0
        blocking = None
        in_W = np.zeros(len(r), dtype=bool)
        in_W[W] = True
        cand = np.nonzero(~in_W & ~is_eq & (Ad < -1e-12 * row_norm * dnorm))[0]
        if cand.size:
            steps = slack[cand] / -Ad[cand]
            best = np.min(steps)
            if best <= step_max:
                ties = cand[steps <= best + 1e-15 * (1.0 + best)]
                blocking = int(ties[0]) if bland else int(ties[np.argmin(Ad[ties] / row_norm[ties])])
                step_max = best
        if not np.isfinite(step_max):
            raise _Unbounded("objective decreases without bound along a ray")
        x = x + step_max * d
        if blocking is not None:
            W.append(blocking)
            if step_max <= 1e-14 * scale_x:
                degenerate_run += 1
                if degenerate_run > 2 * n:
                    bland = True
            else:
                degenerate_run = 0
    return x, mult, max_iter, False


def _phase_one(A, r, is_eq, x0, max_iter, feas_tol):
    """Find a feasible point by minimizing artificial infeasibility.

    Returns (x, infeasible_row or None, iterations).
    """
    m, n = A.shape
    resid = r - A @ x0
    bad = [k for k in range(m) if (is_eq[k] and abs(resid[k]) > feas_tol)
           or (not is_eq[k] and resid[k] > feas_tol)]
    if not bad:
        return x0, None, 0
    na = len(bad)
    A_aug = np.zeros((m + na, n + na))
    A_aug[:m, :n] = A
    r_aug = np.concatenate([r, np.zeros(na)])
    eq_aug = np.concatenate([is_eq, np.zeros(na, dtype=bool)])
    z0 = np.zeros(na)
    for j, k in enumerate(bad):
        sign = 1.0 if resid[k] > 0 else -1.0
        A_aug[k, n + j] = sign
        A_aug[m + j, n + j] = 1.0
        z0[j] = abs(resid[k])
    h = np.zeros(n + na)
    c = np.concatenate([np.zeros(n), np.ones(na)])
    xa, _, it, _ = _active_set(h, c, A_aug, r_aug, eq_aug,
                               np.concatenate([x0, z0]), max_iter, 0.0)
    z = xa[n:]
    if np.max(z, initial=0.0) > feas_tol:
        return xa[:n], bad[int(np.argmax(z))], it
    return xa[:n], None, it


def _start_point(prog: ConvexProgram) -> np.ndarray:
    lo = np.where(np.isfinite(prog.lower), prog.lower, -np.inf)
    hi = np.where(np.isfinite(prog.upper), prog.upper, np.inf)
    return np.clip(np.zeros(prog.n), lo, hi)


def _unpack(prog: ConvexProgram, rows: _Rows, mult: np.ndarray):
    y = np.zeros(prog.eq_matrix.shape[0])
    mu_lo = np.zeros(prog.ineq_matrix.shape[0])
    mu_up = np.zeros(prog.ineq_matrix.shape[0])
    nu_lo = np.zeros(prog.n)
    nu_up = np.zeros(prog.n)
    for k, (kind, i, _) in enumerate(rows.origin):
        v = mult[k]
        if kind == "eq":
            y[i] = v
        elif kind == "ineq":
            mu_lo[i], mu_up[i] = max(v, 0.0), max(-v, 0.0)
        elif kind == "ineq_lo":
            mu_lo[i] = v
        elif kind == "ineq_up":
            mu_up[i] = v
        elif kind == "bound":
            nu_lo[i], nu_up[i] = max(v, 0.0), max(-v, 0.0)
        elif kind == "bound_lo":
            nu_lo[i] = v
        else:
            nu_up[i] = v
    return y, mu_lo, mu_up, nu_lo, nu_up


def verify_kkt(program: ConvexProgram, report: SolveReport) -> KktResiduals:
    """Recompute KKT residuals of ``report`` against ``program`` from scratch."""
    x = report.primal
    p = program
    grad = p.quadratic_diag * x + p.linear
    stat = (grad - p.eq_matrix.T @ report.eq_duals
            - p.ineq_matrix.T @ (report.ineq_lower_duals - report.ineq_upper_duals)
            - (report.bound_lower_duals - report.bound_upper_duals))
    stationarity = float(np.max(np.abs(stat), initial=0.0))

    Ax_eq = p.eq_matrix @ x
    Ax_in = p.ineq_matrix @ x
    primal = max(
        float(np.max(np.abs(Ax_eq - p.eq_rhs), initial=0.0)),
        float(np.max(np.maximum(p.ineq_lower - Ax_in, 0.0), initial=0.0)),
        float(np.max(np.maximum(Ax_in - p.ineq_upper, 0.0), initial=0.0)),
        float(np.max(np.maximum(p.lower - x, 0.0), initial=0.0)),
        float(np.max(np.maximum(x - p.upper, 0.0), initial=0.0)),
    )
    duals = np.concatenate([report.ineq_lower_duals, report.ineq_upper_duals,
                            report.bound_lower_duals, report.bound_upper_duals])
    dual = float(np.max(np.maximum(-duals, 0.0), initial=0.0))

    def comp(mult, gap):
        gap = np.where(np.isfinite(gap), gap, 0.0)
        return float(np.max(np.abs(mult * gap), initial=0.0))

    complementarity = max(
        comp(report.ineq_lower_duals, Ax_in - p.ineq_lower),
        comp(report.ineq_upper_duals, p.ineq_upper - Ax_in),
        comp(report.bound_lower_duals, x - p.lower),
        comp(report.bound_upper_duals, p.upper - x),
    )
    # a positive multiplier on an infinite bound can never be complementary
    for mult, bound in ((report.ineq_lower_duals, p.ineq_lower),
                        (report.ineq_upper_duals, p.ineq_upper),
                        (report.bound_lower_duals, p.lower),
                        (report.bound_upper_duals, p.upper)):
        inf = ~np.isfinite(bound)
        if np.any(inf):
            complementarity = max(complementarity, float(np.max(np.abs(mult[inf]), initial=0.0)))
    return KktResiduals(stationarity, primal, dual, complementarity)


def _optimal_face(prog: ConvexProgram, rows: _Rows, x: np.ndarray, mult: np.ndarray) -> ConvexProgram:
    """The set of optimal points of ``prog``, given one KKT pair ``(x, mult)``.

    For a convex program every optimal point shares ``h*x`` and is
    complementary to every optimal multiplier, so rows with a positive
    multiplier become equalities and curved variables are pinned.
    """
    lower, upper = prog.lower.copy(), prog.upper.copy()
    in_lo, in_up = prog.ineq_lower.copy(), prog.ineq_upper.copy()
    g_scale = 1.0 + np.max(np.abs(prog.quadratic_diag * x + prog.linear), initial=0.0)
    strict = 1e-9 * g_scale
    for k, (kind, i, _) in enumerate(rows.origin):
        if mult[k] <= strict:
            continue
        if kind == "bound_lo":
            upper[i] = lower[i]
        elif kind == "bound_up":
            lower[i] = upper[i]
        elif kind == "ineq_lo":
            in_up[i] = in_lo[i]
        elif kind == "ineq_up":
            in_lo[i] = in_up[i]
    curved = prog.quadratic_diag > 0
    lower[curved] = upper[curved] = x[curved]
    return ConvexProgram(np.zeros(prog.n), prog.linear, lower, upper, prog.eq_matrix,
                         prog.eq_rhs, prog.ineq_matrix, in_lo, in_up)


def _unique_optimum(prog: ConvexProgram, rows: _Rows, x: np.ndarray, mult: np.ndarray) -> bool:
    """True when the rows with positive multipliers and curved variables pin ``x``."""
    g_scale = 1.0 + np.max(np.abs(prog.quadratic_diag * x + prog.linear), initial=0.0)
    pinned = [rows.A[k] for k in range(len(rows.r))
              if rows.is_eq[k] or mult[k] > 1e-9 * g_scale]
    pinned += [np.eye(prog.n)[i] for i in np.nonzero(prog.quadratic_diag > 0)[0]]
    if len(pinned) < prog.n:
        return False
    return int(np.linalg.matrix_rank(np.array(pinned))) == prog.n


def _run(prog: ConvexProgram, rows: _Rows, x0: np.ndarray, max_iter: int, tol: float,
         linear: Optional[np.ndarray] = None):
    """Phase one then phase two; returns (x, mult, iterations, status, bad_row)."""
    feas_tol = tol * (1.0 + np.max(np.abs(rows.r), initial=0.0))
    x, bad, it1 = _phase_one(rows.A, rows.r, rows.is_eq, x0, max_iter, feas_tol)
    if bad is not None:
        return x, np.zeros(len(rows.r)), it1, SolveStatus.INFEASIBLE, bad
    c = prog.linear if linear is None else linear
    try:
        x, mult, it2, ok = _active_set(prog.quadratic_diag, c, rows.A, rows.r,
                                       rows.is_eq, x, max(max_iter - it1, 1), 0.0)
    except _Unbounded as exc:
        raise ProgramError(str(exc)) from None
    status = SolveStatus.OPTIMAL if ok else SolveStatus.ITERATION_LIMIT
    return x, mult, it1 + it2, status, None


def solve(program: ConvexProgram, max_iter: int = 10_000, tol: float = 1e-8,
          tie_break: Optional[np.ndarray] = None,
          dump_path: Union[str, Path, None] = None) -> SolveReport:
    """Solve ``program`` and return primal, multipliers and KKT residuals.

    ``tie_break`` is an optional secondary linear objective minimized over the
    optimal set (lexicographic, so the primary optimum is not perturbed).
    ``tol`` is the feasibility tolerance of the first phase. The returned
    status is ``OPTIMAL`` only if the recomputed residuals are within
    ``CERTIFY_TOL``.
    """
    if not tol > 0:
        raise ProgramError("tol must be positive")
    program.validate()
    rows = _build_rows(program)
    x, mult, iters, status, bad = _run(program, rows, _start_point(program), max_iter, tol)
    if status is SolveStatus.INFEASIBLE:
        report = SolveReport(x, *_unpack(program, rows, mult), status=status,
                             iterations=iters,
                             residuals=KktResiduals(np.inf, np.inf, np.inf, np.inf),
                             objective=program.objective(x), infeasible_row=bad)
        _dump(dump_path, program, report)
        return report
    lexicographic = False
    if tie_break is not None and status is SolveStatus.OPTIMAL and \
            not _unique_optimum(program, rows, x, mult):
        face = _optimal_face(program, rows, x, mult)
        face_rows = _build_rows(face)
        x2, _, it2, st2, _ = _run(face, face_rows, x, max_iter, tol,
                                  linear=np.asarray(tie_break, dtype=float))
        iters += it2
        if st2 is SolveStatus.OPTIMAL:
            x, lexicographic = x2, True
    report = SolveReport(x, *_unpack(program, rows, mult), status=status,
                         iterations=iters,
                         residuals=KktResiduals(0.0, 0.0, 0.0, 0.0),
                         objective=program.objective(x), lexicographic=lexicographic)
    report.residuals = verify_kkt(program, report)
    if report.status is SolveStatus.OPTIMAL and report.residuals.max > CERTIFY_TOL:
        report.status = SolveStatus.ITERATION_LIMIT
    _dump(dump_path, program, report)
    return report


def _dump(path, program: ConvexProgram, report: SolveReport) -> None:
    if path is None:
        return
    payload = {"schema_version": 1, "program": program.to_dict(), "report": report.to_dict()}
    Path(path).write_text(json.dumps(payload, indent=1, default=str))
