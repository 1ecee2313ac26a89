"""Structured problem instances for `min f(x) + g(y)  s.t.  Ax + By = b`.

Function descriptors carry closed-form subdifferential machinery (membership
distance, subgradient sampling, function values) so that solver-side
certificates can be verified independently of how the iterates were produced.
The reference solver is a standalone textbook ADMM (or a direct KKT solve
when both blocks are quadratic) and shares no code with the main solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FunctionDescriptor",
    "ProblemSpec",
    "ReferenceSolution",
    "generate",
    "kkt_residual",
    "reference_solve",
    "subgradient_sample",
    "plain_admm",
    "load_problem",
    "problem_from_dict",
]

_KINDS = ("zero", "quadratic", "l1", "box")


@dataclass(frozen=True)
class FunctionDescriptor:
    """A proper closed convex function of one of four structured kinds.

    quadratic: f(x) = 0.5 x^T Q x + q^T x  (Q PSD)
    l1:        f(x) = lam * ||x||_1
    box:       indicator of [l, u]
    """

    kind: str
    dim: int
    Q: np.ndarray | None = None
    q: np.ndarray | None = None
    lam: float | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "quadratic":
            Q = np.asarray(self.Q, dtype=float)
            q = np.asarray(self.q, dtype=float)
            if Q.shape != (self.dim, self.dim) or q.shape != (self.dim,):
                raise ValueError("quadratic descriptor has inconsistent shapes")
            if np.abs(Q - Q.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(Q).max()):
                raise ValueError("quadratic Q must be symmetric")
            if np.linalg.eigvalsh(Q).min() < -1e-10 * max(1.0, np.abs(Q).max()):
                raise ValueError("quadratic Q must be PSD")
            object.__setattr__(self, "Q", Q)
            object.__setattr__(self, "q", q)
        elif self.kind == "l1":
            if self.lam is None or self.lam <= 0:
                raise ValueError("l1 descriptor requires lam > 0")
        elif self.kind == "box":
            lo = np.asarray(self.lower, dtype=float)
            hi = np.asarray(self.upper, dtype=float)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise ValueError("box bounds have inconsistent shapes")
            if np.any(lo > hi):
                raise ValueError("box requires l <= u componentwise")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    # -- function values and subdifferential machinery -------------------

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return 0.0
        if self.kind == "quadratic":
            return float(0.5 * x @ (self.Q @ x) + self.q @ x)
        if self.kind == "l1":
            return float(self.lam * np.abs(x).sum())
        if np.any(x < self.lower - 1e-12) or np.any(x > self.upper + 1e-12):
            return np.inf
        return 0.0

    def values(self, X: np.ndarray) -> np.ndarray:
        """Vectorized values over rows of X (used by sampled eps-checks)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "zero":
            return np.zeros(X.shape[0])
        if self.kind == "quadratic":
            return 0.5 * np.einsum("ij,ij->i", X @ self.Q, X) + X @ self.q
        if self.kind == "l1":
            return self.lam * np.abs(X).sum(axis=1)
        out = np.zeros(X.shape[0])
        bad = np.any(X < self.lower - 1e-12, axis=1) | np.any(X > self.upper + 1e-12, axis=1)
        out[bad] = np.inf
        return out

    def membership_distance(self, v: np.ndarray, x: np.ndarray) -> float:
        """Euclidean distance from v to the subdifferential at x.

        +inf when x is outside the effective domain (box only).
        """
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return float(np.linalg.norm(v))
        if self.kind == "quadratic":
            return float(np.linalg.norm(v - (self.Q @ x + self.q)))
        if self.kind == "l1":
            tol = 1e-12 * (1.0 + np.abs(x).max(initial=0.0))
            d = np.where(
                x > tol,
                np.abs(v - self.lam),
                np.where(x < -tol, np.abs(v + self.lam), np.maximum(np.abs(v) - self.lam, 0.0)),
            )
            return float(np.linalg.norm(d))
        # box: normal cone of [l, u]
        span = 1.0 + np.abs(self.upper - self.lower).max(initial=0.0)
        tol = 1e-10 * span
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return np.inf
        at_lo = x <= self.lower + tol
        at_hi = x >= self.upper - tol
        d = np.where(
            at_lo & at_hi,
            0.0,  # pinned coordinate: normal cone is the whole line
            np.where(at_lo, np.maximum(v, 0.0), np.where(at_hi, np.maximum(-v, 0.0), np.abs(v))),
        )
        return float(np.linalg.norm(d))

    def subgradient(self, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """One valid subgradient at x (errors if x is outside the domain)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros(self.dim)
        if self.kind == "quadratic":
            return self.Q @ x + self.q
        if self.kind == "l1":
            return self.lam * np.sign(x)
        span = 1.0 + np.abs(self.upper - self.lower).max(initial=0.0)
        tol = 1e-10 * span
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            raise ValueError("point outside the box domain has empty subdifferential")
        g = np.zeros(self.dim)
        if rng is not None:
            t = rng.uniform(0.0, 1.0, size=self.dim)
            g = np.where(x <= self.lower + tol, -t, np.where(x >= self.upper - tol, t, 0.0))
            g = np.where((x <= self.lower + tol) & (x >= self.upper - tol), rng.normal(size=self.dim), g)
        return g

    def sample_domain(self, count: int, around: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sample points in dom f near ``around`` (rows of the result)."""
        around = np.asarray(around, dtype=float)
        scale = 1.0 + np.abs(around).max(initial=0.0)
        X = around + scale * rng.normal(size=(count, self.dim))
        if self.kind == "box":
            X = np.clip(X, self.lower, self.upper)
        return X

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"type": "zero"}
        if self.kind == "quadratic":
            return {"type": "quadratic", "Q": self.Q.tolist(), "q": self.q.tolist()}
        if self.kind == "l1":
            return {"type": "l1", "lambda": self.lam}
        return {"type": "box", "l": self.lower.tolist(), "u": self.upper.tolist()}


def descriptor_from_dict(desc: dict, dim: int) -> FunctionDescriptor:
    kind = desc.get("type")
    if kind == "zero":
        return FunctionDescriptor("zero", dim)
    if kind == "quadratic":
        return FunctionDescriptor(
            "quadratic", dim, Q=np.asarray(desc["Q"], float), q=np.asarray(desc["q"], float)
        )
    if kind == "l1":
        return FunctionDescriptor("l1", dim, lam=float(desc["lambda"]))
    if kind == "box":
        return FunctionDescriptor(
            "box", dim, lower=np.asarray(desc["l"], float), upper=np.asarray(desc["u"], float)
        )
    raise ValueError(f"unknown function descriptor type {kind!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the linearly constrained two-block problem."""

    f: FunctionDescriptor
    g: FunctionDescriptor
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    name: str = ""
    seed: int | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        b = np.asarray(self.b, dtype=float)
        m = b.shape[0]
        if A.shape != (m, self.f.dim) or B.shape != (m, self.g.dim):
            raise ValueError("A/B/b dimensions are inconsistent with f and g")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.f.dim, self.g.dim, self.b.shape[0]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "b": self.b.tolist(),
            "f": self.f.to_dict(),
            "g": self.g.to_dict(),
        }


def problem_from_dict(data: dict) -> ProblemSpec:
    A = np.asarray(data["A"], dtype=float)
    B = np.asarray(data["B"], dtype=float)
    return ProblemSpec(
        f=descriptor_from_dict(data["f"], A.shape[1]),
        g=descriptor_from_dict(data["g"], B.shape[1]),
        A=A,
        B=B,
        b=np.asarray(data["b"], dtype=float),
        name=data.get("name", ""),
    )


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))


@dataclass(frozen=True)
class ReferenceSolution:
    x: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    kkt_residual: float


# -- generators --------------------------------------------------------------

def generate(kind: str, dims, seed: int) -> ProblemSpec:
    """Seeded instance generators; b is always built from a feasible point."""
    rng = np.random.default_rng(seed)
    if kind == "lasso":
        n, m = dims
        _check_dims(n, m)
        A = rng.normal(size=(m, n)) / np.sqrt(m)
        c = rng.normal(size=n)
        f = FunctionDescriptor("quadratic", n, Q=np.eye(n), q=-c)
        g = FunctionDescriptor("l1", m, lam=0.1)
        return ProblemSpec(f, g, A, -np.eye(m), np.zeros(m), name=f"lasso-{n}x{m}-s{seed}", seed=seed)
    if kind == "box_qp":
        (n,) = dims if isinstance(dims, (tuple, list)) else (dims,)
        m = max(1, n // 2)
        _check_dims(n, m)
        L = rng.normal(size=(n, n)) / np.sqrt(n)
        Q = L @ L.T + 0.5 * np.eye(n)
        q = rng.normal(size=n)
        lo = -np.ones(m)
        hi = np.ones(m)
        f = FunctionDescriptor("quadratic", n, Q=Q, q=q)
        g = FunctionDescriptor("box", m, lower=lo, upper=hi)
        A = rng.normal(size=(m, n)) / np.sqrt(n)
        y_hat = np.clip(rng.normal(size=m), lo, hi)
        b = A @ rng.normal(size=n) + y_hat
        return ProblemSpec(f, g, A, np.eye(m), b, name=f"box_qp-{n}-s{seed}", seed=seed)
    if kind == "consensus_ls":
        n_x, n_y, m = dims
        _check_dims(n_x, m)
        _check_dims(n_y, m)
        L1 = rng.normal(size=(n_x, n_x)) / np.sqrt(n_x)
        L2 = rng.normal(size=(n_y, n_y)) / np.sqrt(n_y)
        f = FunctionDescriptor("quadratic", n_x, Q=L1 @ L1.T + np.eye(n_x), q=rng.normal(size=n_x))
        g = FunctionDescriptor("quadratic", n_y, Q=L2 @ L2.T + np.eye(n_y), q=rng.normal(size=n_y))
        A = rng.normal(size=(m, n_x)) / np.sqrt(n_x)
        B = rng.normal(size=(m, n_y)) / np.sqrt(n_y)
        b = A @ rng.normal(size=n_x) + B @ rng.normal(size=n_y)
        return ProblemSpec(f, g, A, B, b, name=f"consensus_ls-{n_x}x{n_y}x{m}-s{seed}", seed=seed)
    raise ValueError(f"unknown generator kind {kind!r}")


def _check_dims(n: int, m: int):
    if not (1 <= n <= 200 and 1 <= m <= 200):
        raise ValueError(f"dims out of supported range: n={n}, m={m}")


# -- KKT residuals and reference solver --------------------------------------

def kkt_residual(problem: ProblemSpec, x, y, gamma) -> tuple[float, float, float]:
    """(res_x, res_y, res_gamma) of the first-order optimality system.

    res_x is the distance from A^T gamma to the subdifferential of f at x,
    res_y mirrors it for g, and res_gamma is the primal residual norm.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    gamma = np.asarray(gamma, float)
    res_x = problem.f.membership_distance(problem.A.T @ gamma, x)
    res_y = problem.g.membership_distance(problem.B.T @ gamma, y)
    res_g = float(np.linalg.norm(problem.A @ x + problem.B @ y - problem.b))
    return res_x, res_y, res_g


def subgradient_sample(descriptor: FunctionDescriptor, x, rng=None) -> np.ndarray:
    return descriptor.subgradient(x, rng=rng)


def _prox_step(desc: FunctionDescriptor, G_diag: np.ndarray, q_lin: np.ndarray) -> np.ndarray:
    """argmin f(y) + 0.5 y^T diag(G) y + q^T y for a separable quadratic part."""
    if np.any(G_diag <= 0):
        raise ValueError("separable prox step requires a positive diagonal")
    if desc.kind == "l1":
        t = -q_lin
        return np.sign(t) * np.maximum(np.abs(t) - desc.lam, 0.0) / G_diag
    if desc.kind == "box":
        return np.clip(-q_lin / G_diag, desc.lower, desc.upper)
    raise ValueError(f"no separable prox for kind {desc.kind!r}")


def plain_admm(
    problem: ProblemSpec,
    beta: float = 1.0,
    max_iters: int = 1_000_000,
    accuracy: float = 1e-10,
    x0=None,
    y0=None,
    gamma0=None,
    collect: int = 0,
):
    """Textbook ADMM with penalty beta and unit dual stepsize.

    Independent of the variable-metric solver: inline linear solves and
    soft-threshold / clip prox steps only.  Returns (x, y, gamma, residual)
    or, when ``collect`` > 0, additionally the first ``collect`` iterate
    triples for trajectory comparisons.
    """
    A, B, b = problem.A, problem.B, problem.b
    f, g = problem.f, problem.g
    n_x, n_y, m = problem.dims
    x = np.zeros(n_x) if x0 is None else np.asarray(x0, float).copy()
    y = np.zeros(n_y) if y0 is None else np.asarray(y0, float).copy()
    gamma = np.zeros(m) if gamma0 is None else np.asarray(gamma0, float).copy()

    AtA = A.T @ A
    BtB = B.T @ B
    if f.kind == "quadratic":
        x_mat = f.Q + beta * AtA
    elif f.kind == "zero":
        x_mat = beta * AtA
    else:
        raise ValueError("plain ADMM reference supports quadratic/zero f only")
    if g.kind in ("l1", "box"):
        G_diag = beta * np.diag(BtB)
        if np.abs(BtB - np.diag(np.diag(BtB))).max(initial=0.0) > 1e-12:
            raise ValueError("plain ADMM needs B^T B diagonal for l1/box g")
    trajectory = []
    best = np.inf
    for it in range(1, max_iters + 1):
        rhs = A.T @ gamma - beta * A.T @ (B @ y - b)
        if f.kind == "quadratic":
            rhs = rhs - f.q
        x = np.linalg.solve(x_mat, rhs)
        q_lin = -B.T @ gamma + beta * B.T @ (A @ x - b)
        if g.kind == "quadratic":
            y = np.linalg.solve(g.Q + beta * BtB, -q_lin - g.q)
        elif g.kind == "zero":
            y = np.linalg.solve(beta * BtB, -q_lin)
        else:
            y = _prox_step(g, G_diag, q_lin)
        gamma = gamma - beta * (A @ x + B @ y - b)
        if collect and it <= collect:
            trajectory.append((x.copy(), y.copy(), gamma.copy()))
        res = max(kkt_residual(problem, x, y, gamma))
        best = min(best, res)
        if res <= accuracy:
            break
    if collect:
        return x, y, gamma, best, trajectory
    return x, y, gamma, best


def reference_solve(problem: ProblemSpec, accuracy: float = 1e-10) -> ReferenceSolution:
    """High-accuracy KKT point: direct solve for quadratic/quadratic,
    long plain ADMM otherwise.  Deterministic per problem."""
    if accuracy < 1e-12:
        raise ValueError("requested accuracy below 1e-12 is not supported")
    f, g = problem.f, problem.g
    A, B, b = problem.A, problem.B, problem.b
    n_x, n_y, m = problem.dims
    if f.kind in ("quadratic", "zero") and g.kind in ("quadratic", "zero"):
        Qf = f.Q if f.kind == "quadratic" else np.zeros((n_x, n_x))
        qf = f.q if f.kind == "quadratic" else np.zeros(n_x)
        Qg = g.Q if g.kind == "quadratic" else np.zeros((n_y, n_y))
        qg = g.q if g.kind == "quadratic" else np.zeros(n_y)
        K = np.block(
            [
                [Qf, np.zeros((n_x, n_y)), -A.T],
                [np.zeros((n_y, n_x)), Qg, -B.T],
                [A, B, np.zeros((m, m))],
            ]
        )
        rhs = np.concatenate([-qf, -qg, b])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        x, y, gamma = sol[:n_x], sol[n_x : n_x + n_y], sol[n_x + n_y :]
        res = max(kkt_residual(problem, x, y, gamma))
        if res <= max(accuracy, 1e-10):
            return ReferenceSolution(x, y, gamma, res)
        # singular KKT system; fall through to the iterative path
    x, y, gamma, res = plain_admm(problem, beta=1.0, accuracy=accuracy)
    if res > accuracy:
        raise RuntimeError(
            f"reference solver hit the iteration cap with residual {res} > {accuracy}"
        )
    return ReferenceSolution(x, y, gamma, res)
