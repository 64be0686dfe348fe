"""Per-column linear program of the CLIME estimator.

For a symmetric ``sigma`` (p x p), a target index ``i`` and a bound ``lam``
the column problem is::

    minimize    sum(u)
    subject to  -u <= beta <= u
                |sigma @ beta - e_i|_inf <= lam

It is solved by a primal-dual interior-point method for inequality-form LPs
(barrier parameter raised by a factor ``mu`` per step, backtracking line
search on the residual norm, surrogate duality gap stopping). The Newton
system on ``(beta, u)`` is reduced to a p x p positive definite system by
eliminating ``u``; the 4p x 2p constraint matrix is never formed.

Columns sharing ``sigma`` and ``lam`` are advanced together as a batch, so
``solve_columns`` over all p targets costs a handful of batched p x p solves
per iteration.

A dense two-phase simplex (Bland's rule) is included as an exact oracle for
small instances.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CyclingDetected, DimensionMismatch, NotPositiveDefinite
from .linalg import check_symmetric, solve_spd


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    """Interior-point settings.

    gap_tol : stop once the surrogate duality gap ``s.z`` is below this.
    feas_tol : required 2-norm of the dual residual at termination.
    mu : factor by which the barrier parameter grows per iteration.
    alpha, beta : backtracking sufficient-decrease and shrink factors.
    max_iter : Newton step budget per column.
    lambda_floor : ``lam`` used internally when ``lam == 0`` so the feasible
        set has an interior.
    """

    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    mu: float = 10.0
    alpha: float = 0.01
    beta: float = 0.5
    max_iter: int = 200
    lambda_floor: float = 1e-12

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.mu <= 1:
            raise ValueError("mu must exceed 1")
        if not (0 < self.alpha < 0.5 and 0 < self.beta < 1):
            raise ValueError("line search needs 0 < alpha < 0.5 and 0 < beta < 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class ColumnLp:
    """One column problem; ``target_index`` is 0-based."""

    sigma: np.ndarray
    target_index: int
    lam: float

    def __post_init__(self):
        sigma = check_symmetric(self.sigma, "sigma")
        object.__setattr__(self, "sigma", sigma)
        if not 0 <= self.target_index < sigma.shape[0]:
            raise IndexError(f"target_index {self.target_index} out of range for p={sigma.shape[0]}")
        if not self.lam >= 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")

    @property
    def p(self):
        return self.sigma.shape[0]

    def violation(self, beta):
        """Amount by which ``beta`` exceeds the constraint bound (0 if feasible)."""
        r = self.sigma @ beta
        r[self.target_index] -= 1.0
        return max(0.0, float(np.max(np.abs(r))) - self.lam)


@dataclass
class LpSolution:
    beta: np.ndarray
    objective: float
    iterations: int
    duality_gap: float
    status: LpStatus
    dual_residual: float = np.nan
    primal_violation: float = np.nan
    message: str = field(default="", repr=False)

    @property
    def ok(self):
        return self.status is LpStatus.OPTIMAL

    def summary(self):
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "duality_gap": self.duality_gap,
            "objective": self.objective,
        }


# ---------------------------------------------------------------------------
# strictly feasible starting points


def _slack_margin(sigma, beta, targets, lam):
    r = beta @ sigma
    r[np.arange(len(targets)), targets] -= 1.0
    return lam - np.max(np.abs(r), axis=1)


def _dense_ineq_ipm(c, a, b, x, opts, stop=None):
    """Plain primal-dual IPM for ``min c.x  s.t.  a @ x <= b`` from a strictly
    feasible ``x``. Used only for phase I, so it favors brevity over speed."""
    m = a.shape[0]
    s = b - a @ x
    z = 1.0 / s
    for _ in range(opts.max_iter):
        if stop is not None and stop(x):
            break
        eta = s @ z
        if eta <= opts.gap_tol:
            break
        t = opts.mu * m / eta
        w = z / s
        h = a.T @ (w[:, None] * a)
        g = -c - a.T @ (1.0 / s) / t
        dx = np.linalg.lstsq(h, g, rcond=None)[0]
        ax = a @ dx
        dz = w * ax - z + 1.0 / (t * s)
        neg = dz < 0
        step = min(1.0, float(np.min(-z[neg] / dz[neg]))) if neg.any() else 1.0
        step *= 0.99
        while np.any(s - step * ax <= 0):
            step *= opts.beta
            if step < 1e-16:
                return x
        x = x + step * dx
        s = b - a @ x
        z = z + step * dz
    return x


def _phase_one(sigma, target, lam, opts):
    """Find beta with |sigma beta - e|_inf < lam by minimizing the worst
    violation; returns None if no strictly feasible point exists."""
    p = sigma.shape[0]
    e = np.zeros(p)
    e[target] = 1.0
    beta = np.linalg.lstsq(sigma, e, rcond=None)[0]
    worst = float(np.max(np.abs(sigma @ beta - e)))
    if worst < lam:
        return beta
    # variables (beta, t):  +-(sigma beta - e) - t <= lam
    a = np.block([[sigma, -np.ones((p, 1))], [-sigma, -np.ones((p, 1))]])
    b = np.concatenate([lam + e, lam - e])
    c = np.zeros(p + 1)
    c[-1] = 1.0
    x0 = np.append(beta, worst - lam + 1.0)
    x = _dense_ineq_ipm(c, a, b, x0, opts, stop=lambda x: x[-1] < -0.5 * lam)
    beta = x[:p]
    if np.max(np.abs(sigma @ beta - e)) < lam:
        return beta
    return None


def _initial_points(sigma, targets, lam, opts):
    """Rows of ``(sigma)^-1 e_i`` when strictly feasible, else phase I."""
    k = len(targets)
    p = sigma.shape[0]
    rhs = np.zeros((p, k))
    rhs[targets, np.arange(k)] = 1.0
    try:
        beta = solve_spd(sigma, rhs).T.copy()
    except NotPositiveDefinite:
        beta = np.full((k, p), np.nan)
    margin = _slack_margin(sigma, np.nan_to_num(beta), targets, lam)
    bad = ~(np.isfinite(beta).all(axis=1) & (margin > 0))
    feasible = ~bad
    for r in np.flatnonzero(bad):
        found = _phase_one(sigma, targets[r], lam, opts)
        if found is not None:
            beta[r] = found
            feasible[r] = True
    return beta, feasible


# ---------------------------------------------------------------------------
# batched interior point


def _ipm_batch(sigma, targets, lam, beta, opts):
    """Advance all rows of ``beta`` to optimality. Returns per-row arrays
    (beta, iterations, gap, dual residual, status codes)."""
    k, p = beta.shape
    m = 4 * p
    rows = np.arange(k)
    e = np.zeros((k, p))
    e[rows, targets] = 1.0

    u = np.abs(beta) + 1.0
    # z1 = z2 = 1/2 and z3 = z4 make the starting dual residual exactly zero
    z = np.empty((4, k, p))
    z[0:2] = 0.5
    z[2:4] = 0.5

    iters = np.zeros(k, dtype=int)
    gap = np.full(k, np.inf)
    dres = np.full(k, np.inf)
    status = np.full(k, -1)  # -1 running, 0 optimal, 1 max iter, 2 failure

    def slacks(beta, u, e):
        sb = beta @ sigma
        return np.stack([u - beta, u + beta, lam + e - sb, lam - e + sb])

    def dual_res(z):
        rb = z[0] - z[1] + (z[2] - z[3]) @ sigma
        ru = 1.0 - z[0] - z[1]
        return rb, ru

    def res_norm(s, z, t):
        rb, ru = dual_res(z)
        rc = z * s - (1.0 / t)[None, :, None]
        return np.sqrt(np.sum(rb**2, axis=1) + np.sum(ru**2, axis=1) + np.sum(rc**2, axis=(0, 2)))

    active = rows.copy()
    for it in range(opts.max_iter + 1):
        if active.size == 0:
            break
        b, uu, zz, ee = beta[active], u[active], z[:, active], e[active]
        s = slacks(b, uu, ee)
        eta = np.sum(s * zz, axis=(0, 2))
        rb, ru = dual_res(zz)
        rd = np.sqrt(np.sum(rb**2, axis=1) + np.sum(ru**2, axis=1))
        gap[active] = eta
        dres[active] = rd
        done = (eta <= opts.gap_tol) & (rd <= opts.feas_tol)
        broken = ~np.isfinite(eta) | ~np.isfinite(rd)
        status[active[done]] = 0
        status[active[broken & ~done]] = 2
        keep = ~(done | broken)
        if it == opts.max_iter:
            status[active[keep]] = 1
            break
        if not keep.all():
            active = active[keep]
            b, uu, zz, ee, s, eta = b[keep], uu[keep], zz[:, keep], ee[keep], s[:, keep], eta[keep]
        if active.size == 0:
            break
        iters[active] += 1

        t = opts.mu * m / eta
        inv_t = (1.0 / t)[:, None]
        w = zz / s
        inv_s = 1.0 / s
        d = w[0] + w[1]
        ediff = w[1] - w[0]
        g_b = -inv_t * (inv_s[0] - inv_s[1] + (inv_s[2] - inv_s[3]) @ sigma)
        g_u = -1.0 + inv_t * (inv_s[0] + inv_s[1])
        mat = (sigma[None, :, :] * (w[2] + w[3])[:, None, :]) @ sigma
        diag_idx = np.arange(p)
        mat[:, diag_idx, diag_idx] += 4.0 * w[0] * w[1] / d
        rhs = g_b - ediff / d * g_u
        try:
            db = np.linalg.solve(mat, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            status[active] = 2
            break
        du = (g_u - ediff * db) / d
        sdb = db @ sigma
        adx = np.stack([db - du, -db - du, sdb, -sdb])
        dz = w * adx - zz + inv_t[None] * inv_s

        # largest step keeping z > 0, then back off until slacks stay positive
        # and the residual norm decreases sufficiently
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dz < 0, -zz / dz, np.inf)
        step = 0.99 * np.minimum(1.0, ratio.min(axis=(0, 2)))
        r0 = res_norm(s, zz, t)
        need = np.ones(active.size, dtype=bool)
        for _ in range(100):
            s_new = s - step[None, :, None] * adx
            ok = np.all(s_new > 0, axis=(0, 2))
            z_new = zz + step[None, :, None] * dz
            r_new = res_norm(s_new, z_new, t)
            ok &= r_new <= (1.0 - opts.alpha * step) * r0
            need = ~ok
            if not need.any():
                break
            step = np.where(need, step * opts.beta, step)
        if need.any():
            stalled = active[need]
            status[stalled] = 2
            step = np.where(need, 0.0, step)
        beta[active] = b + step[:, None] * db
        u[active] = uu + step[:, None] * du
        z[:, active] = zz + step[None, :, None] * dz
        active = active[~need]
    return beta, iters, gap, dres, status


_STATUS = {0: LpStatus.OPTIMAL, 1: LpStatus.MAX_ITERATIONS, 2: LpStatus.NUMERICAL_FAILURE}


def solve_columns(sigma, targets, lam, opts=None, init=None):
    """Solve the column LP for each index in ``targets`` (0-based).

    Parameters
    ----------
    sigma : (p, p) array
        Symmetric constraint matrix.
    targets : sequence of int
        Target indices ``i``; one LP per entry.
    lam : float
        Constraint bound, ``lam >= 0``.
    opts : SolverOptions, optional
    init : (len(targets), p) array, optional
        Strictly feasible starting betas. Computed when omitted.

    Returns
    -------
    list of LpSolution, in the order of ``targets``.
    """
    opts = opts or SolverOptions()
    sigma = check_symmetric(sigma, "sigma")
    p = sigma.shape[0]
    targets = np.asarray(targets, dtype=int).reshape(-1)
    if np.any((targets < 0) | (targets >= p)):
        raise IndexError("target index out of range")
    if not lam >= 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    lam_eff = max(float(lam), opts.lambda_floor)

    if init is None:
        beta, feasible = _initial_points(sigma, targets, lam_eff, opts)
    else:
        beta = np.array(init, dtype=np.float64).reshape(len(targets), p)
        margin = _slack_margin(sigma, beta, targets, lam_eff)
        if np.any(margin <= 0):
            raise ValueError("init is not strictly feasible")
        feasible = np.ones(len(targets), dtype=bool)

    out = [None] * len(targets)
    idx = np.flatnonzero(feasible)
    if idx.size:
        b, iters, gap, dres, status = _ipm_batch(sigma, targets[idx], lam_eff, beta[idx].copy(), opts)
        for j, r in enumerate(idx):
            viol = max(0.0, -float(_slack_margin(sigma, b[j : j + 1], targets[r : r + 1], float(lam))[0]))
            out[r] = LpSolution(
                beta=b[j],
                objective=float(np.sum(np.abs(b[j]))),
                iterations=int(iters[j]),
                duality_gap=float(gap[j]),
                status=_STATUS[int(status[j])],
                dual_residual=float(dres[j]),
                primal_violation=viol,
            )
    for r in np.flatnonzero(~feasible):
        out[r] = LpSolution(
            beta=np.full(p, np.nan),
            objective=np.nan,
            iterations=0,
            duality_gap=np.inf,
            status=LpStatus.NUMERICAL_FAILURE,
            message="no strictly feasible point: constraint set has empty interior",
        )
    return out


def solve_column(lp, init=None, opts=None):
    """Solve a single :class:`ColumnLp` by the interior-point method."""
    init = None if init is None else np.asarray(init, dtype=np.float64)[None, :]
    return solve_columns(lp.sigma, [lp.target_index], lp.lam, opts=opts, init=init)[0]


# ---------------------------------------------------------------------------
# simplex oracle


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    others = np.arange(tab.shape[0]) != row
    tab[others] -= np.outer(tab[others, col], tab[row])


def _run_simplex(tab, basis, ncols, tol, max_pivots):
    """Bland's-rule pivoting on a tableau whose last row holds reduced costs."""
    m = tab.shape[0] - 1
    for count in range(max_pivots):
        costs = tab[m, :ncols]
        entering = np.flatnonzero(costs < -tol)
        if entering.size == 0:
            return count
        col = int(entering[0])
        column = tab[:m, col]
        cand = np.flatnonzero(column > tol)
        if cand.size == 0:
            raise ValueError("linear program is unbounded")
        ratios = tab[cand, -1] / column[cand]
        best = ratios.min()
        ties = cand[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
    raise CyclingDetected(f"no optimum after {max_pivots} pivots")


def simplex_standard(c, a, b, tol=1e-11, max_pivots=10000):
    """Minimize ``c.x`` subject to ``a x = b, x >= 0`` by two-phase simplex.

    Returns ``(x, objective, pivots)``.
    """
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = a.shape
    flip = b < 0
    a[flip] *= -1
    b[flip] *= -1

    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -a.sum(axis=0)
    tab[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    pivots = _run_simplex(tab, basis, n + m, tol, max_pivots)
    if -tab[m, -1] > 1e-9 * max(1.0, b.sum()):
        raise ValueError("linear program is infeasible")

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(tab[r, :n]) > tol)
            if nz.size == 0:
                continue
            _pivot(tab, r, int(nz[0]))
            basis[r] = int(nz[0])
            pivots += 1
        keep.append(r)
    tab = np.vstack([tab[keep][:, list(range(n)) + [-1]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]
    mm = len(keep)
    cb = c[basis]
    tab[mm, :n] = c - cb @ tab[:mm, :n]
    tab[mm, -1] = -cb @ tab[:mm, -1]
    pivots += _run_simplex(tab, basis, n, tol, max_pivots)

    x = np.zeros(n)
    x[basis] = tab[:mm, -1]
    return x, float(c @ x), pivots


def simplex_oracle(lp):
    """Exact vertex solution of a :class:`ColumnLp` (test scale, p <= 20).

    Standard form: ``beta = bp - bm`` with slacks for both sides of the
    box constraint.
    """
    p = lp.p
    if p > 20:
        raise DimensionMismatch("simplex oracle is limited to p <= 20")
    sig = lp.sigma
    eye = np.eye(p)
    zero = np.zeros((p, p))
    a = np.block([[sig, -sig, eye, zero], [-sig, sig, zero, eye]])
    e = eye[lp.target_index]
    b = np.concatenate([lp.lam + e, lp.lam - e])
    c = np.concatenate([np.ones(2 * p), np.zeros(2 * p)])
    x, _, pivots = simplex_standard(c, a, b)
    beta = x[:p] - x[p : 2 * p]
    return LpSolution(
        beta=beta,
        objective=float(np.sum(np.abs(beta))),
        iterations=pivots,
        duality_gap=0.0,
        status=LpStatus.OPTIMAL,
        dual_residual=0.0,
        primal_violation=lp.violation(beta),
    )
