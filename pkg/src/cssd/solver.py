"""Solvers for the compressed smooth-sparse decomposition.

Both the 1-D problem

    min_{θ, θ_a} ||y' - A(B θ + B_a θ_a)||² + λ ||θ_a||₁

and its 2-D Kronecker form (A = A₂ ⊗ A₁ applied as ``A₁ Y A₂ᵀ``) are solved
the same way: θ is eliminated in closed form through a QR factorization of
the smooth design ``C = A B``, which leaves an ℓ₁-regularized least-squares
problem in θ_a on the orthogonal complement of ``range(C)``. That problem is
solved by proximal gradient with step ``1/L``, ``L = 2 σ_max(A B_a)²``,
optionally accelerated (FISTA momentum, restarted whenever a step would
increase the objective).

The quadratic carries no ½ factor, so the gradient is ``-2 (A B_a)ᵀ r``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import ConditioningError, DivergenceError, FeasibilityError, InputError
from .rng import Stream
from .sensing import Measurement, SensingOperator
from .tensor import as_matrix, spectral_norm

__all__ = [
    "SolverConfig",
    "DecompositionResult",
    "Problem1D",
    "Problem2D",
    "soft_threshold",
    "solve_cssd_1d",
    "solve_kron_cssd_2d",
    "solve_constrained",
    "cross_validate_lambda",
    "lambda_max",
    "universal_lambda",
    "SIGMA_MIN_TOL",
]

SIGMA_MIN_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    max_iters: int = 5000
    rel_tol: float = 1e-8
    accel: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise InputError(f"lambda must be a positive finite number, got {self.lam}")
        if not self.rel_tol > 0:
            raise InputError("rel_tol must be > 0")
        if int(self.max_iters) < 1:
            raise InputError("max_iters must be >= 1")

    def with_lam(self, lam: float) -> "SolverConfig":
        return SolverConfig(lam=float(lam), max_iters=self.max_iters, rel_tol=self.rel_tol, accel=self.accel)


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    """Coefficient estimates; ``smooth`` and ``sparse`` are recomputed from them.

    ``bases`` is ``(B, B_a)`` for 1-D results and ``(B1, B2, B_a1, B_a2)``
    for 2-D results.
    """

    theta: np.ndarray
    theta_a: np.ndarray
    bases: tuple = field(repr=False)
    objective_trace: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    lam: float
    residual_norm: float

    @property
    def smooth(self) -> np.ndarray:
        if len(self.bases) == 2:
            return self.bases[0] @ self.theta
        B1, B2 = self.bases[:2]
        return B1 @ self.theta @ B2.T

    @property
    def sparse(self) -> np.ndarray:
        if len(self.bases) == 2:
            return self.bases[1] @ self.theta_a
        Ba1, Ba2 = self.bases[2:]
        return Ba1 @ self.theta_a @ Ba2.T

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def soft_threshold(x, t):
    """``sign(x) * max(|x| - t, 0)``, elementwise; ``t`` must be >= 0."""
    if t < 0:
        raise InputError("threshold must be >= 0")
    if np.isscalar(x):
        return float(kernels.soft_threshold(np.array([x], dtype=float), t)[0])
    return kernels.soft_threshold(x, t)


def _mat(B):
    return np.asarray(getattr(B, "matrix", B), dtype=float)


def _data(y):
    return np.asarray(y.data if isinstance(y, Measurement) else y, dtype=float)


def _qr_checked(C, label):
    if C.shape[0] < C.shape[1]:
        raise ConditioningError(
            f"{label} has more columns ({C.shape[1]}) than rows ({C.shape[0]}): sigma_min = 0", 0.0
        )
    Q, R = np.linalg.qr(C)
    s = np.linalg.svd(R, compute_uv=False)
    smin = float(s[-1]) if s.size else 0.0
    if not smin > SIGMA_MIN_TOL:
        raise ConditioningError(
            f"{label} is rank deficient: sigma_min = {smin:.3e} <= {SIGMA_MIN_TOL:g}", smin
        )
    return Q, R


def _prox_gradient(prob, lam, cfg):
    """Accelerated proximal gradient on the reduced θ_a problem.

    ``prob`` supplies ``y_perp`` (projected data), ``forward(x)`` = P⊥ A B_a x,
    ``adjoint(r)`` = (A B_a)ᵀ r, ``coef_shape`` and ``lipschitz``.
    """
    y_perp = prob.y_perp
    x = np.zeros(prob.coef_shape)
    xn = np.empty_like(x)
    z = x.copy()
    Fx = np.zeros_like(y_perp)
    Fz = Fx.copy()
    f_old = float(np.vdot(y_perp, y_perp))
    trace = [f_old]
    L = prob.lipschitz
    # zero is optimal (exactly) once λ reaches 2 ||Dᵀ y_perp||_∞
    converged = f_old == 0.0 or L == 0.0 or lam >= 2.0 * np.abs(prob.adjoint(y_perp)).max()
    t = 1.0
    it = 0
    if not converged:
        step = 1.0 / L
        thresh = lam / L
        while it < cfg.max_iters:
            it += 1
            G = prob.adjoint(y_perp - Fz)
            # z - step * (-2 G)
            l1 = kernels.prox_l1_step(z, G, -2.0 * step, thresh, xn)
            Fxn = prob.forward(xn)
            R = y_perp - Fxn
            f = float(np.vdot(R, R)) + lam * l1
            if not math.isfinite(f):
                raise DivergenceError(f"objective became non-finite at iteration {it}")
            if cfg.accel and f > f_old and t > 1.0:
                t = 1.0
                np.copyto(z, x)
                np.copyto(Fz, Fx)
                continue
            if cfg.accel:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                beta = (t - 1.0) / t_next
                kernels.extrapolate(xn, x, beta, z)
                Fz = Fxn + beta * (Fxn - Fx)
                t = t_next
            else:
                np.copyto(z, xn)
                Fz = Fxn
            x, xn = xn, x
            Fx = Fxn
            trace.append(f)
            if abs(f_old - f) < cfg.rel_tol * f_old or f == 0.0:
                converged = True
                break
            f_old = f
    return x, np.asarray(trace), it, converged


class Problem1D:
    """Factored 1-D instance; reusable across λ values.

    Parameters
    ----------
    yprime : array or Measurement
        Compressed data, length p.
    A : SensingOperator or array
        p×n sensing matrix.
    B, Ba : BasisMatrix or array
        n×r smooth basis and n×q sparse basis.
    """

    def __init__(self, yprime, A, B, Ba):
        self.B = _mat(B)
        self.Ba = _mat(Ba)
        n = self.B.shape[0]
        if self.Ba.shape[0] != n:
            raise InputError(f"B has {n} rows but B_a has {self.Ba.shape[0]}")
        if isinstance(A, SensingOperator):
            if A.form != "single":
                raise InputError("1-D solver needs a single-matrix operator")
            self.A = None if A.identity else A.A
        else:
            self.A = as_matrix(A, "A")
        self.y = _data(yprime)
        if self.y.ndim != 1:
            raise InputError("1-D solver needs a measurement vector")
        if self.A is None:
            if self.y.size != n:
                raise InputError(f"measurement has length {self.y.size}, expected {n}")
            self.C, self.D = self.B, self.Ba
        else:
            if self.A.shape[1] != n:
                raise InputError(f"A has {self.A.shape[1]} columns, bases have {n} rows")
            if self.y.size != self.A.shape[0]:
                raise InputError(f"measurement has length {self.y.size}, A has {self.A.shape[0]} rows")
            self.C, self.D = self.A @ self.B, self.A @ self.Ba
        self.Q, self.R = _qr_checked(self.C, "A·B")
        self.y_perp = self.y - self.Q @ (self.Q.T @ self.y)
        self.Dp = self.D - self.Q @ (self.Q.T @ self.D)
        self.lipschitz = 2.0 * spectral_norm(self.D) ** 2
        self.coef_shape = (self.Ba.shape[1],)

    def forward(self, x):
        return self.Dp @ x

    def adjoint(self, r):
        return self.Dp.T @ r

    def lambda_max(self) -> float:
        """Smallest λ for which θ_a = 0 is optimal."""
        return float(2.0 * np.abs(self.adjoint(self.y_perp)).max())

    def universal_lambda(self, sigma: float) -> float:
        """Noise-level threshold ``2 σ max_j ||Aᵀ P⊥ d_j|| sqrt(2 ln q)``."""
        cols = self.Dp if self.A is None else self.A.T @ self.Dp
        q = max(self.coef_shape[0], 2)
        return float(2.0 * sigma * np.sqrt((cols * cols).sum(axis=0).max()) * math.sqrt(2.0 * math.log(q)))

    def smooth_coef(self, x):
        return solve_triangular(self.R, self.Q.T @ (self.y - self.D @ x))

    def solve(self, cfg: SolverConfig) -> DecompositionResult:
        x, trace, it, conv = _prox_gradient(self, cfg.lam, cfg)
        theta = self.smooth_coef(x)
        resid = self.y - self.C @ theta - self.D @ x
        return DecompositionResult(
            theta=theta,
            theta_a=x,
            bases=(self.B, self.Ba),
            objective_trace=trace,
            iterations=it,
            converged=conv,
            lam=cfg.lam,
            residual_norm=float(np.linalg.norm(resid)),
        )


class Problem2D:
    """Factored 2-D Kronecker instance; products are applied mode by mode.

    ``op`` may be a ``kron2`` :class:`SensingOperator` or a pair of arrays
    ``(A1, A2)``; the data model is ``Y' = A1 (B1 Θ B2ᵀ + B_a1 Θ_a B_a2ᵀ) A2ᵀ``.
    """

    def __init__(self, Yprime, op, B1, B2, Ba1, Ba2):
        self.B1, self.B2, self.Ba1, self.Ba2 = (_mat(b) for b in (B1, B2, Ba1, Ba2))
        n1, n2 = self.B1.shape[0], self.B2.shape[0]
        if self.Ba1.shape[0] != n1 or self.Ba2.shape[0] != n2:
            raise InputError("smooth and sparse bases disagree on the image size")
        if isinstance(op, SensingOperator):
            if op.form != "kron2":
                raise InputError("2-D solver needs a kron2 operator")
            mats = (None, None) if op.identity else op.matrices
        else:
            mats = tuple(as_matrix(a, "A_i") for a in op)
        self.A1, self.A2 = mats
        self.Y = _data(Yprime)
        if self.Y.ndim != 2:
            raise InputError("2-D solver needs a measurement matrix")

        def compressed(A, Bm, n, label):
            if A is None:
                return Bm
            if A.shape[1] != n:
                raise InputError(f"{label} has {A.shape[1]} columns, image extent is {n}")
            return A @ Bm

        self.C1 = compressed(self.A1, self.B1, n1, "A1")
        self.C2 = compressed(self.A2, self.B2, n2, "A2")
        self.D1 = compressed(self.A1, self.Ba1, n1, "A1")
        self.D2 = compressed(self.A2, self.Ba2, n2, "A2")
        if self.Y.shape != (self.C1.shape[0], self.C2.shape[0]):
            raise InputError(
                f"measurement has shape {self.Y.shape}, operator produces {(self.C1.shape[0], self.C2.shape[0])}"
            )
        self.Q1, self.R1 = _qr_checked(self.C1, "A1·B1")
        self.Q2, self.R2 = _qr_checked(self.C2, "A2·B2")
        self.y_perp = self._project(self.Y)
        self.lipschitz = 2.0 * (spectral_norm(self.D1) * spectral_norm(self.D2)) ** 2
        self.coef_shape = (self.Ba1.shape[1], self.Ba2.shape[1])
        p1, q1 = self.D1.shape
        p2, q2 = self.D2.shape
        # (D1 X) D2ᵀ vs D1 (X D2ᵀ)
        self._left_first = p1 * q1 * q2 + p1 * q2 * p2 <= q1 * q2 * p2 + p1 * q1 * p2
        self._adj_left_first = q1 * p1 * p2 + q1 * p2 * q2 <= p1 * p2 * q2 + q1 * p1 * q2

    def _project(self, X):
        return X - self.Q1 @ ((self.Q1.T @ X) @ self.Q2) @ self.Q2.T

    def _synth(self, X):
        if self._left_first:
            return (self.D1 @ X) @ self.D2.T
        return self.D1 @ (X @ self.D2.T)

    def forward(self, X):
        return self._project(self._synth(X))

    def adjoint(self, R):
        if self._adj_left_first:
            return (self.D1.T @ R) @ self.D2
        return self.D1.T @ (R @ self.D2)

    def lambda_max(self) -> float:
        return float(2.0 * np.abs(self.adjoint(self.y_perp)).max())

    def universal_lambda(self, sigma: float) -> float:
        """Noise-level threshold using the exact per-coefficient noise gain.

        For coefficient (j1, j2), ``||Aᵀ P⊥ d|| ²`` factors over modes as
        ``|a1|²|a2|² - 2<a1,b1><a2,b2> + |b1|²|b2|²`` with ``a_i = A_iᵀ d_i``
        and ``b_i = A_iᵀ P_i d_i``.
        """

        def gains(A, Q, D):
            PD = Q @ (Q.T @ D)
            a = D if A is None else A.T @ D
            b = PD if A is None else A.T @ PD
            return (a * a).sum(0), (b * b).sum(0), (a * b).sum(0)

        aa1, bb1, ab1 = gains(self.A1, self.Q1, self.D1)
        aa2, bb2, ab2 = gains(self.A2, self.Q2, self.D2)
        g2 = np.outer(aa1, aa2) - 2.0 * np.outer(ab1, ab2) + np.outer(bb1, bb2)
        q = max(self.coef_shape[0] * self.coef_shape[1], 2)
        return float(2.0 * sigma * math.sqrt(max(g2.max(), 0.0)) * math.sqrt(2.0 * math.log(q)))

    def smooth_coef(self, X):
        W = self.Q1.T @ (self.Y - self._synth(X)) @ self.Q2
        T = solve_triangular(self.R1, W)
        return solve_triangular(self.R2, T.T).T

    def solve(self, cfg: SolverConfig) -> DecompositionResult:
        X, trace, it, conv = _prox_gradient(self, cfg.lam, cfg)
        theta = self.smooth_coef(X)
        resid = self.Y - self.C1 @ theta @ self.C2.T - self._synth(X)
        return DecompositionResult(
            theta=theta,
            theta_a=X,
            bases=(self.B1, self.B2, self.Ba1, self.Ba2),
            objective_trace=trace,
            iterations=it,
            converged=conv,
            lam=cfg.lam,
            residual_norm=float(np.linalg.norm(resid)),
        )


def _is_kron(A) -> bool:
    if isinstance(A, SensingOperator):
        return A.form == "kron2"
    return isinstance(A, (tuple, list))


def _problem(yprime, A, B, Ba):
    if _is_kron(A):
        B1, B2 = B
        Ba1, Ba2 = Ba
        return Problem2D(yprime, A, B1, B2, Ba1, Ba2)
    return Problem1D(yprime, A, B, Ba)


def solve_cssd_1d(yprime, A, B, Ba, cfg: SolverConfig) -> DecompositionResult:
    """Lagrangian CSSD for a 1-D measurement ``y' = A y``."""
    return Problem1D(yprime, A, B, Ba).solve(cfg)


def solve_kron_cssd_2d(Yprime, op, B1, B2, Ba1, Ba2, cfg: SolverConfig) -> DecompositionResult:
    """Lagrangian KronCSSD for an image measurement ``Y' = A1 Y A2ᵀ``."""
    return Problem2D(Yprime, op, B1, B2, Ba1, Ba2).solve(cfg)


def lambda_max(yprime, A, B, Ba) -> float:
    """``2 ||(A B_a)ᵀ r₀||_∞`` with r₀ the smooth-only residual.

    For 2-D problems pass ``A`` as a kron2 operator and ``B``, ``Ba`` as pairs.
    """
    return _problem(yprime, A, B, Ba).lambda_max()


def universal_lambda(sigma: float, yprime, A, B, Ba) -> float:
    """Universal-threshold λ for measurement noise of standard deviation ``sigma``."""
    if not sigma >= 0:
        raise InputError("sigma must be >= 0")
    return _problem(yprime, A, B, Ba).universal_lambda(sigma)


def solve_constrained(
    yprime, A, B, Ba, eps1: float, cfg: SolverConfig, *, lam_floor: float = 1e-10, max_bisect: int = 60, xtol: float = 1e-6
) -> DecompositionResult:
    """Residual-constrained form: the sparsest (largest-λ) Lagrangian solution
    with ``||A(B θ + B_a θ_a) - y'|| <= eps1``.

    λ is bisected on a log scale between ``lam_floor`` (must be feasible)
    and λ_max. The bisection assumes the residual shrinks as λ decreases;
    a violation is reported with a warning and the best feasible iterate is
    kept. ``cfg.lam`` is ignored.
    """
    if not eps1 > 0:
        raise InputError("eps1 must be > 0")
    prob = _problem(yprime, A, B, Ba)
    lam_hi = prob.lambda_max()
    zero_resid = float(np.linalg.norm(prob.y_perp))
    if lam_hi == 0.0 or zero_resid <= eps1:
        return prob.solve(cfg.with_lam(max(lam_hi, lam_floor)))
    best = prob.solve(cfg.with_lam(lam_floor))
    if best.residual_norm > eps1:
        raise FeasibilityError(
            f"eps1={eps1:g} is infeasible: smallest achievable residual is {best.residual_norm:.6g}",
            best.residual_norm,
        )
    lo, hi = math.log(lam_floor), math.log(lam_hi)
    history = [(lam_floor, best.residual_norm)]
    for _ in range(max_bisect):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        sol = prob.solve(cfg.with_lam(math.exp(mid)))
        history.append((sol.lam, sol.residual_norm))
        if sol.residual_norm <= eps1:
            lo, best = mid, sol
        else:
            hi = mid
    history.sort()
    resid = np.array([r for _, r in history])
    # iterates are only accurate to the solver tolerance; the residual norm
    # inherits roughly its square root
    slack = math.sqrt(cfg.rel_tol) * resid.max()
    if np.any(np.diff(resid) < -slack):
        warnings.warn("residual was not monotone in lambda during bisection; keeping best feasible solution")
    return best


def _cv_folds(count, folds, seed):
    if int(folds) < 2:
        raise InputError("folds must be >= 2")
    if count // int(folds) < 1:
        raise InputError(f"cannot split {count} measurements into {folds} non-empty folds")
    order = Stream(seed).choice(count, count)
    return np.array_split(order, int(folds))


def cross_validate_lambda(yprime, A, B, Ba, grid, folds: int = 5, *, seed: int = 0, cfg: SolverConfig | None = None) -> float:
    """Pick λ from ``grid`` by k-fold held-out residual.

    1-D: folds are random groups of measurement rows (rows of A).
    2-D (kron2 operator, ``B``/``Ba`` given as pairs): folds are groups of
    rows of ``Y'``, i.e. rows of ``A1``, which keeps the Kronecker structure.
    Fold fits use ``λ (k-1)/k`` so the penalty matches the shorter data term.
    Ties go to the larger λ.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise InputError("lambda grid is empty")
    if any(not (g > 0 and math.isfinite(g)) for g in grid) or grid != sorted(grid):
        raise InputError("lambda grid must be positive and sorted ascending")
    if len(grid) == 1:
        return grid[0]
    base = cfg or SolverConfig(lam=grid[0])
    data = _data(yprime)
    kron = _is_kron(A)
    if kron:
        mats = A.matrices if isinstance(A, SensingOperator) else tuple(A)
        A1, A2 = (np.asarray(m, dtype=float) for m in mats)
        B1, B2 = (_mat(b) for b in B)
        Ba1, Ba2 = (_mat(b) for b in Ba)
    else:
        Amat = np.asarray(A.A if isinstance(A, SensingOperator) else A, dtype=float)
        Bm, Bam = _mat(B), _mat(Ba)
    groups = _cv_folds(data.shape[0], folds, seed)
    k = len(groups)
    scores = np.zeros(len(grid))
    for test in groups:
        train = np.setdiff1d(np.arange(data.shape[0]), test)
        if kron:
            prob = Problem2D(data[train], (A1[train], A2), B1, B2, Ba1, Ba2)
        else:
            prob = Problem1D(data[train], Amat[train], Bm, Bam)
        for i, lam in enumerate(grid):
            sol = prob.solve(base.with_lam(lam * (k - 1) / k))
            if kron:
                pred = A1[test] @ (sol.smooth + sol.sparse) @ A2.T
            else:
                pred = Amat[test] @ (sol.smooth + sol.sparse)
            scores[i] += float(np.sum((data[test] - pred) ** 2)) / k
    best = 0
    for i in range(1, len(grid)):
        if scores[i] <= scores[best]:
            best = i
    return grid[best]
