"""Dense two-phase simplex solver.

Deliberately plain: a dense tableau, Bland's anti-cycling rule for both
the entering and leaving choices, no presolve or scaling. The design
problems solved here have at most a few hundred variables, and what
matters is that repeated runs pivot identically (bit-identical output
files) and that failures are explicit, not that the solve is fast.

Convention: maximize c'x subject to A_ub x <= b_ub, A_eq x = b_eq and
lower <= x <= upper. Lower bounds must be finite (variables are shifted
onto z = x - lower >= 0 internally); upper bounds may be +inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ValidationError

_PIVOT_TOL = 1e-10   # entries smaller than this never pivot
_FEAS_TOL = 1e-9     # phase-1 objective above this means infeasible
_CHECK_TOL = 1e-8    # re-substitution violations above this are reported


def _matrix(a, n, name):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.shape[1] != n:
        raise ValidationError(f"{name} must be 2-D with {n} columns")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None  # default 0
    upper: np.ndarray | None = None  # default +inf

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ValidationError("c must be a finite 1-D array")
        n = c.size
        A_ub = _matrix(self.A_ub, n, "A_ub")
        A_eq = _matrix(self.A_eq, n, "A_eq")
        b_ub = np.zeros(0) if self.b_ub is None else np.atleast_1d(
            np.asarray(self.b_ub, dtype=float))
        b_eq = np.zeros(0) if self.b_eq is None else np.atleast_1d(
            np.asarray(self.b_eq, dtype=float))
        if b_ub.shape != (A_ub.shape[0],) or not np.all(np.isfinite(b_ub)):
            raise ValidationError("b_ub must be finite with one entry per A_ub row")
        if b_eq.shape != (A_eq.shape[0],) or not np.all(np.isfinite(b_eq)):
            raise ValidationError("b_eq must be finite with one entry per A_eq row")
        lower = np.zeros(n) if self.lower is None else np.atleast_1d(
            np.asarray(self.lower, dtype=float))
        upper = np.full(n, np.inf) if self.upper is None else np.atleast_1d(
            np.asarray(self.upper, dtype=float))
        if lower.shape != (n,) or not np.all(np.isfinite(lower)):
            raise ValidationError("lower bounds must be finite (shift unbounded variables)")
        if upper.shape != (n,) or np.any(np.isnan(upper)):
            raise ValidationError("upper bounds must have one entry per variable")
        if np.any(upper < lower):
            raise ValidationError("upper bound below lower bound")
        for name, val in (("c", c), ("A_ub", A_ub), ("b_ub", b_ub),
                          ("A_eq", A_eq), ("b_eq", b_eq),
                          ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class LpSolution:
    status: str              # optimal | infeasible | unbounded | numerical
    x: np.ndarray | None
    objective: float | None
    iterations: int
    perturbed: bool          # True if the degeneracy fallback kicked in
    max_violation: float     # row-scaled; see _violation

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(T, basis, row, col):
    T[row] = T[row] / T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def _bland(T, basis, n_cols, cap):
    """Minimize the objective in the last tableau row. Returns (status, pivots)."""
    pivots = 0
    while pivots < cap:
        enter = -1
        obj = T[-1]
        for j in range(n_cols):
            if obj[j] < -_PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal", pivots
        col = T[:-1, enter]
        rows = np.where(col > _PIVOT_TOL)[0]
        if rows.size == 0:
            return "unbounded", pivots
        leave = -1
        best = np.inf
        for i in rows:
            r = T[i, -1] / col[i]
            if leave < 0 or r < best:
                best = r
                leave = int(i)
            elif r == best and basis[i] < basis[leave]:
                leave = int(i)
        _pivot(T, basis, leave, enter)
        pivots += 1
    return "iteration_limit", pivots


def _assemble(lp: LinearProgram, perturb: bool):
    """Rows of the shifted problem in z = x - lower >= 0, rhs, equality mask.

    Variables pinned by upper == lower are eliminated up front (they sit
    at the bound exactly and only feed the tableau degenerate rows);
    ``free`` maps the reduced columns back to original indices.
    """
    span = lp.upper - lp.lower
    free = np.where(span > 0)[0]
    n = free.size
    blocks = []
    rhs = []
    eq = []
    if lp.A_ub.shape[0]:
        blocks.append(lp.A_ub[:, free])
        rhs.append(lp.b_ub - lp.A_ub @ lp.lower)
        eq.extend([False] * lp.A_ub.shape[0])
    capped = np.where(np.isfinite(span[free]))[0]
    if capped.size:
        E = np.zeros((capped.size, n))
        E[np.arange(capped.size), capped] = 1.0
        blocks.append(E)
        rhs.append(span[free][capped])
        eq.extend([False] * capped.size)
    if lp.A_eq.shape[0]:
        blocks.append(lp.A_eq[:, free])
        rhs.append(lp.b_eq - lp.A_eq @ lp.lower)
        eq.extend([True] * lp.A_eq.shape[0])
    if blocks:
        A = np.vstack(blocks)
        b = np.concatenate(rhs)
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
    if perturb and b.size:
        # tiny deterministic shift that breaks rhs degeneracy while staying
        # far inside _CHECK_TOL
        b = b + 1e-11 * (np.arange(b.size) + 1.0)
    return A, b, np.asarray(eq, dtype=bool), free


def _two_phase(A, b, is_eq, c_max, cap):
    """Solve max c_max'z s.t. rows, z >= 0. Returns (status, z, pivots)."""
    m, n = A.shape
    # row equilibration: rows of very different magnitude (rate caps ~1
    # next to information rows ~1/mu) otherwise force pivots on entries
    # barely above the pivot tolerance
    scale = np.max(np.abs(A), axis=1, initial=0.0)
    scale = np.where(scale > 0, scale, 1.0)
    A = A / scale[:, None]
    b = b / scale
    flip = b < 0
    Aw = np.where(flip[:, None], -A, A)
    bw = np.where(flip, -b, b)
    ineq_rows = np.where(~is_eq)[0]
    n_slack = ineq_rows.size
    S = np.zeros((m, n_slack))
    for k, i in enumerate(ineq_rows):
        S[i, k] = -1.0 if flip[i] else 1.0
    art_rows = np.where(is_eq | flip)[0]
    n_art = art_rows.size
    art_lo = n + n_slack
    N = art_lo + n_art

    T = np.zeros((m + 1, N + 1))
    T[:m, :n] = Aw
    T[:m, n:art_lo] = S
    for a, i in enumerate(art_rows):
        T[i, art_lo + a] = 1.0
    T[:m, -1] = bw

    basis = np.full(m, -1, dtype=int)
    for k, i in enumerate(ineq_rows):
        if not flip[i]:
            basis[i] = n + k
    for a, i in enumerate(art_rows):
        basis[i] = art_lo + a

    total = 0
    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, art_lo:N] = 1.0
        for i in range(m):
            if basis[i] >= art_lo:
                T[-1] -= T[i]
        status, piv = _bland(T, basis, N, cap)
        total += piv
        if status == "iteration_limit":
            return status, None, total
        if -T[-1, -1] > _FEAS_TOL:
            return "infeasible", None, total
        # drive leftover artificials out of the basis; rows that offer no
        # pivot column are redundant originals and get dropped
        drop = []
        for i in range(m):
            if basis[i] >= art_lo:
                j = -1
                for cand in range(art_lo):
                    if abs(T[i, cand]) > _PIVOT_TOL:
                        j = cand
                        break
                if j < 0:
                    drop.append(i)
                else:
                    _pivot(T, basis, i, j)
                    total += 1
        if drop:
            T = np.delete(T, drop, axis=0)
            basis = np.delete(basis, drop)
            m = basis.size
        T = np.delete(T, np.s_[art_lo:N], axis=1)
        N = art_lo

    cost = np.zeros(N)
    cost[:n] = -c_max  # maximize via minimizing the negation
    T[-1, :-1] = cost
    T[-1, -1] = 0.0
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            T[-1] -= cb * T[i]
    status, piv = _bland(T, basis, N, cap)
    total += piv
    if status != "optimal":
        return status, None, total
    z = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            z[basis[i]] = T[i, -1]
    return "optimal", z, total


def _violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Worst constraint violation, each row scaled by its largest
    coefficient (never below 1). The scaling matches the equilibrated
    metric the tableau works in, so the feasibility the two phases
    certify and the violation reported here agree on what "tight" means;
    bounds have unit coefficients and are left raw."""
    v = 0.0
    if lp.A_ub.shape[0]:
        s = np.maximum(np.max(np.abs(lp.A_ub), axis=1), 1.0)
        v = max(v, float(np.max((lp.A_ub @ x - lp.b_ub) / s, initial=0.0)))
    if lp.A_eq.shape[0]:
        s = np.maximum(np.max(np.abs(lp.A_eq), axis=1), 1.0)
        v = max(v, float(np.max(np.abs(lp.A_eq @ x - lp.b_eq) / s, initial=0.0)))
    v = max(v, float(np.max(lp.lower - x, initial=0.0)))
    finite = np.isfinite(lp.upper)
    if np.any(finite):
        v = max(v, float(np.max(x[finite] - lp.upper[finite], initial=0.0)))
    return v


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Solve the program. Never raises for well-posed inputs; inspect status.

    If the pivot cap is hit (degenerate cycling despite Bland's rule can
    only happen through roundoff), the solve is retried once with a tiny
    deterministic perturbation of the right-hand sides and the result is
    flagged ``perturbed``.
    """
    m_guess = lp.A_ub.shape[0] + lp.A_eq.shape[0] + lp.n
    cap = max_iter if max_iter is not None else 2000 + 200 * (m_guess + lp.n)
    A, b, is_eq, free = _assemble(lp, perturb=False)
    status, z_free, iters = _two_phase(A, b, is_eq, lp.c[free], cap)
    perturbed = False
    if status == "iteration_limit":
        perturbed = True
        A, b, is_eq, free = _assemble(lp, perturb=True)
        status, z_free, it2 = _two_phase(A, b, is_eq, lp.c[free], cap)
        iters += it2
        if status == "iteration_limit":
            return LpSolution("numerical", None, None, iters, True, np.inf)
    if status in ("infeasible", "unbounded"):
        return LpSolution(status, None, None, iters, perturbed, 0.0)
    z = np.zeros(lp.n)
    z[free] = z_free
    # basic variables drift by roundoff; snap sub-tolerance excursions
    # back to the box so epsilon-negative rates never leave this module
    clipped = np.clip(z, 0.0, lp.upper - lp.lower)
    z = np.where(np.abs(clipped - z) <= _FEAS_TOL, clipped, z)
    x = z + lp.lower
    viol = _violation(lp, x)
    out_status = "optimal" if viol <= _CHECK_TOL else "numerical"
    return LpSolution(out_status, x, float(lp.c @ x), iters, perturbed, viol)


def check_feasible(n: int, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                   lower=None, upper=None) -> LpSolution:
    """Feasibility probe for a constraint system over ``n`` variables.

    Phase 1 only in effect: solves with a zero objective, so ``status``
    is 'optimal' with a witness ``x`` when the system is feasible and
    'infeasible' otherwise.
    """
    lp = LinearProgram(c=np.zeros(n), A_ub=A_ub, b_ub=b_ub,
                       A_eq=A_eq, b_eq=b_eq, lower=lower, upper=upper)
    return solve_lp(lp)
