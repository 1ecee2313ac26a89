"""Variable-metric proximal ADMM with per-iteration certification.

The solver alternates an x-subproblem under the metric R_k, a y-subproblem
under S_k, and an over-relaxed multiplier update with stepsize theta and
penalty metric H_k.  Every iteration is embedded into the relative-error
proximal-point driver (:mod:`vmpadmm.hpe`): the embedding constants
(sigma, tau, eta_k) are computed here, and the pointwise / ergodic KKT
residual certificates with their theoretical rate bounds are exposed per k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hpe import BoundCheck, HpeIterate, HpeState, RateBounds
from .linalg import PsdOperator
from .problems import ProblemSpec, ReferenceSolution, reference_solve
from .schedule import THETA_MAX, MetricSchedule, assemble_Mk

__all__ = [
    "ThetaParams",
    "AdmmIterate",
    "KktResidualCertificate",
    "SubproblemError",
    "compute_sigma_theta",
    "sigma_feasible",
    "tau_theta",
    "compute_d0_admm",
    "VmPadmmRun",
]

_SQRT2 = np.sqrt(2.0)
_MEMBERSHIP_TOL = 1e-8
_THETA_EXCLUSION = 1e-12


class SubproblemError(RuntimeError):
    """A subproblem is singular or cannot be reduced to a supported form."""


# -- theta-dependent constants -----------------------------------------------

def sigma_feasible(theta: float, sigma: float) -> bool:
    """All four admissibility conditions for the error parameter sigma:
    the 2x2 comparison matrix is positive definite, and both strict scalar
    inequalities hold."""
    a = sigma * (1.0 + theta) - 1.0
    d = sigma - (1.0 - theta) ** 2
    off = (sigma + theta - 1.0) * (1.0 - theta)
    det = a * d - off * off
    if not (a > 0.0 and det > 0.0):
        return False
    if sigma <= max((1.0 - theta) ** 2, 1.0 - theta, 1.0 / (1.0 + theta)):
        return False
    return (sigma + theta - 1.0) * (4.0 - 2.0 * _SQRT2) / (_SQRT2 * theta) < sigma


def tau_theta(theta: float, sigma: float) -> float:
    return 8.0 * (sigma + theta - 1.0) * max(1.0, theta / (2.0 - theta)) / theta**1.5


@dataclass(frozen=True)
class ThetaParams:
    """Stepsize theta with its admissible error parameter and slack inflation.

    sigma is the minimal feasible value plus a safety margin; tau feeds the
    initial slack eta_0 = tau * d0^2.
    """

    theta: float
    sigma: float
    tau: float
    margin: float = 1e-3

    def __post_init__(self):
        if not (_THETA_EXCLUSION < self.theta < THETA_MAX - _THETA_EXCLUSION):
            raise ValueError(f"theta must lie strictly inside (0, {THETA_MAX}), got {self.theta}")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not sigma_feasible(self.theta, self.sigma):
            raise ValueError(f"sigma={self.sigma} violates the admissibility conditions")
        expected = tau_theta(self.theta, self.sigma)
        if abs(self.tau - expected) > 1e-10 * (1.0 + expected):
            raise ValueError("tau does not match its defining formula")


def compute_sigma_theta(theta: float, margin: float = 1e-3, grid: int = 10_000) -> ThetaParams:
    """Minimal admissible sigma for a given theta, plus a safety margin.

    Scans a uniform grid over (0, 1) for the smallest feasible point, then
    bisects the feasibility boundary below it to 1e-10 before shifting up
    by ``margin``.
    """
    if not (_THETA_EXCLUSION < theta < THETA_MAX - _THETA_EXCLUSION):
        raise ValueError(f"theta must lie strictly inside (0, {THETA_MAX}), got {theta}")
    sigmas = np.arange(1, grid + 1) / (grid + 1.0)
    feasible_idx = next((i for i, s in enumerate(sigmas) if sigma_feasible(theta, s)), None)
    if feasible_idx is None:
        raise RuntimeError(f"no admissible sigma found for theta={theta}")
    hi = float(sigmas[feasible_idx])
    lo = float(sigmas[feasible_idx - 1]) if feasible_idx > 0 else 0.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if sigma_feasible(theta, mid):
            hi = mid
        else:
            lo = mid
    sigma = hi + margin
    if sigma >= 1.0:
        raise RuntimeError(f"minimal sigma {hi} plus margin {margin} leaves (0, 1)")
    if not sigma_feasible(theta, sigma):
        raise RuntimeError(f"internal error: sigma={sigma} infeasible after refinement")
    return ThetaParams(theta=theta, sigma=sigma, tau=tau_theta(theta, sigma), margin=margin)


# -- subproblem machinery ------------------------------------------------------

def _solve_structured(desc, G: np.ndarray, q_lin: np.ndarray) -> np.ndarray:
    """argmin f(x) + 0.5 x^T G x + q_lin^T x for a structured f.

    Nonsmooth kinds (l1, box) require G diagonal with positive entries.
    """
    scale = max(1.0, float(np.abs(G).max(initial=0.0)))
    if desc.kind in ("zero", "quadratic"):
        total = G if desc.kind == "zero" else G + desc.Q
        rhs = -q_lin if desc.kind == "zero" else -(q_lin + desc.q)
        sol = np.linalg.lstsq(total, rhs, rcond=None)[0]
        if np.linalg.norm(total @ sol - rhs) > 1e-8 * (1.0 + np.linalg.norm(rhs)):
            raise SubproblemError("subproblem quadratic part is singular")
        return sol
    offdiag = np.abs(G - np.diag(np.diag(G))).max(initial=0.0)
    if offdiag > 1e-10 * scale:
        raise SubproblemError(
            f"{desc.kind} subproblem needs a diagonal quadratic part; "
            f"off-diagonal magnitude {offdiag} (choose a linearizing metric)"
        )
    d = np.diag(G).copy()
    if np.any(d <= 0):
        raise SubproblemError(f"{desc.kind} subproblem needs positive diagonal curvature")
    if desc.kind == "l1":
        t = -q_lin
        return np.sign(t) * np.maximum(np.abs(t) - desc.lam, 0.0) / d
    return np.clip(-q_lin / d, desc.lower, desc.upper)


def solve_x_subproblem(problem, x_prev, y_prev, gamma_prev, H_k, R_k, tol=_MEMBERSHIP_TOL):
    """Exact x-update; verifies first-order optimality via the f-oracle."""
    A, B, b = problem.A, problem.B, problem.b
    Hm = H_k.matrix
    G = A.T @ Hm @ A + R_k.matrix
    G = 0.5 * (G + G.T)
    q_lin = -A.T @ gamma_prev + A.T @ (Hm @ (B @ y_prev - b)) - R_k.matrix @ x_prev
    x = _solve_structured(problem.f, G, q_lin)
    v = -(G @ x + q_lin)
    scale = 1.0 + np.linalg.norm(v)
    dist = problem.f.membership_distance(v, x)
    if dist > tol * scale:
        raise SubproblemError(f"x-subproblem optimality violated: distance {dist}")
    return x


def solve_y_subproblem(problem, x_k, y_prev, gamma_prev, H_k, S_k, tol=_MEMBERSHIP_TOL):
    """Exact y-update; mirror of the x-update with (g, B, S_k)."""
    A, B, b = problem.A, problem.B, problem.b
    Hm = H_k.matrix
    G = B.T @ Hm @ B + S_k.matrix
    G = 0.5 * (G + G.T)
    q_lin = -B.T @ gamma_prev + B.T @ (Hm @ (A @ x_k - b)) - S_k.matrix @ y_prev
    y = _solve_structured(problem.g, G, q_lin)
    v = -(G @ y + q_lin)
    scale = 1.0 + np.linalg.norm(v)
    dist = problem.g.membership_distance(v, y)
    if dist > tol * scale:
        raise SubproblemError(f"y-subproblem optimality violated: distance {dist}")
    return y


def update_multiplier(problem, gamma_prev, H_k, theta, x_k, y_k, y_prev):
    """Over-relaxed multiplier update and the extragradient multiplier:

        gamma_k = gamma_{k-1} - theta H_k (A x_k + B y_k - b)
        gamma~_k = gamma_{k-1} - H_k (A x_k + B y_{k-1} - b)
    """
    A, B, b = problem.A, problem.B, problem.b
    Hm = H_k.matrix
    gamma_k = gamma_prev - theta * (Hm @ (A @ x_k + B @ y_k - b))
    gamma_t = gamma_prev - Hm @ (A @ x_k + B @ y_prev - b)
    return gamma_k, gamma_t


@dataclass
class AdmmIterate:
    """One iteration with its residual triple and seminorm bookkeeping."""

    k: int
    x: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    dx: np.ndarray  # x_{k-1} - x_k, preimage of r_x under R_k
    dy: np.ndarray
    dgamma: np.ndarray
    r_x: np.ndarray
    r_y: np.ndarray
    r_gamma: np.ndarray
    dual_x: float
    dual_y: float
    dual_gamma: float
    eta: float
    hpe_check: object
    membership_x: float
    membership_y: float
    H: PsdOperator
    R: PsdOperator
    S: PsdOperator
    M: object

    @property
    def dual_max(self) -> float:
        return max(self.dual_x, self.dual_y, self.dual_gamma)

    @property
    def memberships_ok(self) -> bool:
        return (
            self.membership_x <= _MEMBERSHIP_TOL * (1.0 + np.linalg.norm(self.r_x))
            and self.membership_y <= _MEMBERSHIP_TOL * (1.0 + np.linalg.norm(self.r_y))
        )


@dataclass
class KktResidualCertificate:
    """A pointwise or ergodic KKT residual certificate at iteration k."""

    mode: str
    k: int
    index: int  # certified iterate index (pointwise) or k (ergodic)
    x: np.ndarray
    y: np.ndarray
    gamma_tilde: np.ndarray
    r_x: np.ndarray
    r_y: np.ndarray
    r_gamma: np.ndarray
    dual_x: float
    dual_y: float
    dual_gamma: float
    bound_residual: float
    eps_x: float = 0.0
    eps_y: float = 0.0
    bound_eps: float = 0.0
    checks: dict = field(default_factory=dict)
    membership_ok: bool = True
    membership_detail: str = ""

    @property
    def dual_max(self) -> float:
        return max(self.dual_x, self.dual_y, self.dual_gamma)

    @property
    def ok(self) -> bool:
        return self.membership_ok and all(c.ok for c in self.checks.values())


def compute_d0_admm(
    problem: ProblemSpec,
    z_star: tuple[np.ndarray, np.ndarray, np.ndarray],
    H_0: PsdOperator,
    R_0: PsdOperator,
    S_0: PsdOperator,
    theta: float,
    x0=None,
    y0=None,
    gamma0=None,
) -> float:
    """Metric-weighted distance from the initial point to one solution.

    Upper-bounds the infimum over the whole solution set; every rate bound
    is increasing in this quantity, so the bounds stay valid.
    """
    n_x, n_y, m = problem.dims
    x0 = np.zeros(n_x) if x0 is None else np.asarray(x0, float)
    y0 = np.zeros(n_y) if y0 is None else np.asarray(y0, float)
    gamma0 = np.zeros(m) if gamma0 is None else np.asarray(gamma0, float)
    xs, ys, gs = z_star
    M0 = assemble_Mk(H_0, R_0, S_0, problem.B, theta)
    r0, mid0, gam0 = M0.blocks
    return float(
        np.sqrt(
            r0.seminorm(x0 - xs) ** 2
            + mid0.seminorm(y0 - ys) ** 2
            + gam0.seminorm(gamma0 - gs) ** 2
        )
    )


class VmPadmmRun:
    """One solve: sequential state, embedding driver, running certificates."""

    def __init__(
        self,
        problem: ProblemSpec,
        schedule: MetricSchedule,
        theta_params: ThetaParams,
        x0=None,
        y0=None,
        gamma0=None,
        reference: ReferenceSolution | None = None,
        hpe_tol: float = 1e-8,
    ):
        self.problem = problem
        self.schedule = schedule
        self.params = theta_params
        n_x, n_y, m = problem.dims
        self.x = np.zeros(n_x) if x0 is None else np.asarray(x0, float).copy()
        self.y = np.zeros(n_y) if y0 is None else np.asarray(y0, float).copy()
        self.gamma = np.zeros(m) if gamma0 is None else np.asarray(gamma0, float).copy()
        self.hpe_tol = hpe_tol

        self.reference = reference if reference is not None else reference_solve(problem)
        self.d0_warning = self.reference.kkt_residual > 1e-9
        H0, R0, S0 = schedule.realize(0)
        self.d0 = compute_d0_admm(
            problem,
            (self.reference.x, self.reference.y, self.reference.gamma),
            H0,
            R0,
            S0,
            theta_params.theta,
            x0=self.x,
            y0=self.y,
            gamma0=self.gamma,
        )
        self.eta0 = theta_params.tau * self.d0**2
        M0 = assemble_Mk(H0, R0, S0, problem.B, theta_params.theta)
        z0 = np.concatenate([self.x, self.y, self.gamma])
        self.hpe = HpeState(z0, theta_params.sigma, self.eta0, M0=M0)
        self.hpe.set_bounds(
            RateBounds(self.d0, theta_params.sigma, schedule.C_S, schedule.C_P, eta0=self.eta0)
        )
        self.iterates: list[AdmmIterate] = []
        # running pointwise best: smallest index achieving the min max-residual
        self._best_index = 0
        self._best_dual_max = np.inf
        # per-block ergodic accumulators
        self._sum_x = np.zeros(n_x)
        self._sum_y = np.zeros(n_y)
        self._sum_gt = np.zeros(m)
        self._sum_rx = np.zeros(n_x)
        self._sum_ry = np.zeros(n_y)
        self._sum_rg = np.zeros(m)
        self._dot_sx = 0.0  # sum_i <r_{i,x} + A^T gamma~_i, x_i>
        self._dot_sy = 0.0

    @property
    def k(self) -> int:
        return len(self.iterates)

    @property
    def bounds(self) -> RateBounds:
        return self.hpe.bounds

    def pointwise_bound_coef(self) -> float:
        p, cp = self.params, self.schedule.C_P
        num = 2.0 * (1.0 + p.sigma) * cp * (1.0 + p.tau) + 2.0 * (1.0 - p.sigma) * p.tau
        return float(np.sqrt(num / (1.0 - p.sigma)))

    # -- one iteration -----------------------------------------------------

    def step(self) -> AdmmIterate:
        k = self.k + 1
        if k > self.schedule.k_max:
            raise ValueError(f"schedule horizon k_max={self.schedule.k_max} exhausted")
        problem, p = self.problem, self.params
        H_k, R_k, S_k = self.schedule.realize(k)
        x_prev, y_prev, gamma_prev = self.x, self.y, self.gamma

        x_k = solve_x_subproblem(problem, x_prev, y_prev, gamma_prev, H_k, R_k)
        y_k = solve_y_subproblem(problem, x_k, y_prev, gamma_prev, H_k, S_k)
        gamma_k, gamma_t = update_multiplier(
            problem, gamma_prev, H_k, p.theta, x_k, y_k, y_prev
        )

        M_k = assemble_Mk(H_k, R_k, S_k, problem.B, p.theta)
        _, mid_k, gam_k = M_k.blocks
        dx, dy, dg = x_prev - x_k, y_prev - y_k, gamma_prev - gamma_k
        r_x = R_k.apply(dx)
        r_y = mid_k.apply(dy)
        r_g = gam_k.apply(dg)
        primal = problem.A @ x_k + problem.B @ y_k - problem.b
        if np.linalg.norm(r_g - primal) > 1e-12 * (1.0 + np.linalg.norm(primal)) + 1e-13:
            raise RuntimeError("gamma residual identity violated beyond roundoff")

        eta = (
            (p.sigma - (p.theta - 1.0) ** 2) / p.theta**2 * gam_k.seminorm(dg) ** 2
            + _SQRT2 * (p.sigma + p.theta - 1.0) / p.theta * S_k.seminorm(dy) ** 2
        )

        z_k = np.concatenate([x_k, y_k, gamma_k])
        zt_k = np.concatenate([x_k, y_k, gamma_t])
        preimage = np.concatenate([dx, dy, dg])
        hpe_it = HpeIterate(
            k=k, z=z_k, z_tilde=zt_k, r=np.concatenate([r_x, r_y, r_g]),
            preimage=preimage, eta=eta, M=M_k,
        )
        check = self.hpe.add_iterate(hpe_it, tol=self.hpe_tol)

        memb_x = problem.f.membership_distance(r_x + problem.A.T @ gamma_t, x_k)
        memb_y = problem.g.membership_distance(r_y + problem.B.T @ gamma_t, y_k)

        it = AdmmIterate(
            k=k, x=x_k, y=y_k, gamma=gamma_k, gamma_tilde=gamma_t,
            dx=dx, dy=dy, dgamma=dg, r_x=r_x, r_y=r_y, r_gamma=r_g,
            dual_x=R_k.seminorm(dx), dual_y=mid_k.seminorm(dy), dual_gamma=gam_k.seminorm(dg),
            eta=eta, hpe_check=check, membership_x=memb_x, membership_y=memb_y,
            H=H_k, R=R_k, S=S_k, M=M_k,
        )
        self.iterates.append(it)
        if it.dual_max < self._best_dual_max:
            self._best_dual_max, self._best_index = it.dual_max, k
        self._sum_x += x_k
        self._sum_y += y_k
        self._sum_gt += gamma_t
        self._sum_rx += r_x
        self._sum_ry += r_y
        self._sum_rg += r_g
        self._dot_sx += float((r_x + problem.A.T @ gamma_t) @ x_k)
        self._dot_sy += float((r_y + problem.B.T @ gamma_t) @ y_k)
        self.x, self.y, self.gamma = x_k, y_k, gamma_k
        return it

    # -- certificates -------------------------------------------------------

    def pointwise_kkt_certificate(self, k: int | None = None) -> KktResidualCertificate:
        """Best single iterate up to k against the O(1/sqrt(k)) bound."""
        k = self.k if k is None else k
        if k < 1 or k > self.k:
            raise ValueError(f"no iterate at k={k}")
        if k == self.k:
            idx = self._best_index
        else:
            duals = [it.dual_max for it in self.iterates[:k]]
            idx = int(np.argmin(duals)) + 1
        it = self.iterates[idx - 1]
        bound = self.d0 / np.sqrt(k) * self.pointwise_bound_coef()
        checks = {
            "pointwise_res": BoundCheck("pointwise_res", k, it.dual_max, bound),
        }
        detail = ""
        if not it.memberships_ok:
            detail = f"membership distances x={it.membership_x}, y={it.membership_y}"
        return KktResidualCertificate(
            mode="pointwise", k=k, index=idx, x=it.x, y=it.y, gamma_tilde=it.gamma_tilde,
            r_x=it.r_x, r_y=it.r_y, r_gamma=it.r_gamma,
            dual_x=it.dual_x, dual_y=it.dual_y, dual_gamma=it.dual_gamma,
            bound_residual=bound, checks=checks,
            membership_ok=it.memberships_ok, membership_detail=detail,
        )

    def ergodic_averages(self, k: int | None = None):
        """((x^a, y^a, gamma~^a), (r^a_x, r^a_y, r^a_g), (eps_x, eps_y)) at k."""
        k = self.k if k is None else k
        if k < 1:
            raise ValueError("ergodic averages require k >= 1")
        if k == self.k:
            sums = (
                self._sum_x, self._sum_y, self._sum_gt,
                self._sum_rx, self._sum_ry, self._sum_rg,
                self._dot_sx, self._dot_sy,
            )
        else:
            its = self.iterates[:k]
            A, B = self.problem.A, self.problem.B
            sums = (
                sum(i.x for i in its), sum(i.y for i in its), sum(i.gamma_tilde for i in its),
                sum(i.r_x for i in its), sum(i.r_y for i in its), sum(i.r_gamma for i in its),
                sum(float((i.r_x + A.T @ i.gamma_tilde) @ i.x) for i in its),
                sum(float((i.r_y + B.T @ i.gamma_tilde) @ i.y) for i in its),
            )
        sx, sy, sgt, srx, sry, srg, dsx, dsy = sums
        x_a, y_a, gt_a = sx / k, sy / k, sgt / k
        rx_a, ry_a, rg_a = srx / k, sry / k, srg / k
        # eps = (1/k) sum <s_i, x_i> - <mean s, mean x>, s_i = r_{i,x} + A^T gamma~_i
        s_mean_x = rx_a + self.problem.A.T @ gt_a
        s_mean_y = ry_a + self.problem.B.T @ gt_a
        eps_x = dsx / k - float(s_mean_x @ x_a)
        eps_y = dsy / k - float(s_mean_y @ y_a)
        return (x_a, y_a, gt_a), (rx_a, ry_a, rg_a), (eps_x, eps_y)

    def ergodic_kkt_certificate(
        self,
        k: int | None = None,
        sample_count: int = 200,
        rng: np.random.Generator | None = None,
        check_memberships: bool = True,
    ) -> KktResidualCertificate:
        """Ergodic triple at k with ergodic bounds, eps decomposition against
        the full-space accumulator, and sampled eps-subdifferential checks."""
        k = self.k if k is None else k
        if k < 1 or k > self.k:
            raise ValueError(f"no iterate at k={k}")
        (x_a, y_a, gt_a), (rx_a, ry_a, rg_a), (eps_x, eps_y) = self.ergodic_averages(k)
        it_k = self.iterates[k - 1]
        R_k, mid_k, gam_k = it_k.M.blocks
        dual_x = R_k.dual_seminorm_general(rx_a)
        dual_y = mid_k.dual_seminorm_general(ry_a)
        dual_g = gam_k.dual_seminorm_general(rg_a)
        bounds = self.bounds
        tau = self.params.tau
        bound_res = float(np.sqrt(1.0 + tau) * bounds.E * self.d0 / k)
        bound_eps = float((1.0 + tau) * bounds.E_hat * self.d0**2 / k)
        scale_x = 1.0 + abs(eps_x)
        scale_y = 1.0 + abs(eps_y)
        _, _, eps_full = self.hpe.ergodic_point(k)
        checks = {
            "ergodic_res": BoundCheck("ergodic_res", k, max(dual_x, dual_y, dual_g), bound_res),
            "ergodic_eps": BoundCheck("ergodic_eps", k, eps_x + eps_y, bound_eps),
            "eps_x_nonneg": BoundCheck("eps_x_nonneg", k, -eps_x, 0.0, tol_abs=1e-10 * scale_x, tol_rel=0.0),
            "eps_y_nonneg": BoundCheck("eps_y_nonneg", k, -eps_y, 0.0, tol_abs=1e-10 * scale_y, tol_rel=0.0),
            "eps_decomposition": BoundCheck(
                "eps_decomposition", k, abs(eps_full - (eps_x + eps_y)),
                1e-9 * (1.0 + abs(eps_full)), tol_rel=0.0,
            ),
            "primal_avg_identity": BoundCheck(
                "primal_avg_identity", k,
                float(np.linalg.norm(self.problem.A @ x_a + self.problem.B @ y_a - self.problem.b - rg_a)),
                1e-10 * (1.0 + float(np.linalg.norm(rg_a))), tol_rel=0.0,
            ),
        }
        membership_ok, detail = True, ""
        if check_memberships:
            rng = np.random.default_rng(k) if rng is None else rng
            membership_ok, detail = self._eps_membership_check(
                x_a, y_a, gt_a, rx_a, ry_a, eps_x, eps_y, sample_count, rng
            )
        return KktResidualCertificate(
            mode="ergodic", k=k, index=k, x=x_a, y=y_a, gamma_tilde=gt_a,
            r_x=rx_a, r_y=ry_a, r_gamma=rg_a,
            dual_x=dual_x, dual_y=dual_y, dual_gamma=dual_g,
            bound_residual=bound_res, eps_x=eps_x, eps_y=eps_y, bound_eps=bound_eps,
            checks=checks, membership_ok=membership_ok, membership_detail=detail,
        )

    def _eps_membership_check(self, x_a, y_a, gt_a, rx_a, ry_a, eps_x, eps_y, count, rng):
        """Sampled eps-subdifferential inequality for both blocks:
        f(x') >= f(x^a) + <v, x' - x^a> - eps_x at sampled x' (mirror for g)."""
        problem = self.problem
        tol = _MEMBERSHIP_TOL
        for desc, point, v, eps, name in (
            (problem.f, x_a, rx_a + problem.A.T @ gt_a, eps_x, "f"),
            (problem.g, y_a, ry_a + problem.B.T @ gt_a, eps_y, "g"),
        ):
            X = desc.sample_domain(count, point, rng)
            fvals = desc.values(X)
            base = desc.value(point)
            if not np.isfinite(base):
                return False, f"{name}: ergodic point outside the domain"
            lhs = fvals - base - (X - point) @ v + eps
            scale = 1.0 + np.abs(fvals[np.isfinite(fvals)]).max(initial=0.0) + abs(eps)
            worst = float(lhs[np.isfinite(lhs)].min(initial=np.inf))
            if worst < -tol * scale:
                return False, f"{name}: eps-subdifferential violated by {worst}"
        return True, ""

    # -- driver -------------------------------------------------------------

    def run(self, max_iters: int, rho: float | None = None, eps: float | None = None):
        """Iterate until the pointwise stop (max dual residual <= rho) and,
        when eps is given, additionally the ergodic eps-sum stop; returns
        (first_k_pointwise, first_k_ergodic), either may be None."""
        first_pw, first_erg = None, None
        for _ in range(max_iters):
            self.step()
            k = self.k
            if rho is not None and first_pw is None and self._best_dual_max <= rho:
                first_pw = k
            if rho is not None and eps is not None and first_erg is None:
                cert = self.ergodic_kkt_certificate(k, check_memberships=False)
                if cert.dual_max <= rho and cert.eps_x + cert.eps_y <= eps:
                    first_erg = k
            if first_pw is not None and (eps is None or first_erg is not None):
                break
        return first_pw, first_erg
