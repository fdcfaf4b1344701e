"""Synthetic smooth-plus-sparse data, detection metrics and ratio sweeps.

A sweep evaluates every (ratio, replication) cell independently: the ground
truth depends only on ``(seed, replication)`` and the sensing operator on
``(seed, ratio index, replication)``, so cells can run in any order or in
parallel with identical results.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import ndimage

from .bases import BasisSpec, build_basis
from .errors import CSSDError, InputError, UndefinedMetricError
from .rng import Stream, cell_seed
from .sensing import compress, gaussian_operator, identity_operator, kron_operator
from .solver import DecompositionResult, Problem1D, Problem2D, SolverConfig, cross_validate_lambda

__all__ = [
    "SimulationScenario",
    "GroundTruth",
    "MetricsReport",
    "Knee",
    "generate_1d",
    "generate_2d",
    "generate",
    "relative_error",
    "fpr",
    "fnr",
    "detect",
    "clusters_missed",
    "run_sweep",
    "run_grid",
    "aggregate",
    "knee_ratio",
    "sweep_csv",
    "DETECT_THRESHOLD",
]

DETECT_THRESHOLD = 1e-10
LAMBDA_POLICIES = ("cv", "fixed", "scale", "universal")
DEFAULT_CV_GRID = tuple(float(v) for v in np.geomspace(1e-4, 1.0, 9))


def _spec_pair(x, dims):
    """Accept one spec (applied to every mode) or one per mode."""
    if isinstance(x, BasisSpec):
        x = [x] * len(dims)
    elif isinstance(x, dict):
        x = [x] * len(dims)
    x = list(x)
    if len(x) != len(dims):
        raise InputError(f"need {len(dims)} basis specs, got {len(x)}")
    out = []
    for spec, n in zip(x, dims):
        if isinstance(spec, dict):
            spec = BasisSpec.from_dict({**spec, "n": spec.get("n", n)})
        if spec.n != n:
            raise InputError(f"basis length {spec.n} does not match dimension {n}")
        out.append(spec)
    return tuple(out)


@dataclass(frozen=True)
class SimulationScenario:
    """Everything needed to generate, compress and score a sweep.

    ``smooth_basis``/``sparse_basis`` hold one :class:`BasisSpec` per mode.
    ``anomaly_layout`` is ``"scattered"`` (``s`` isolated coefficients) or
    ``"blobs"`` (``s`` square blocks of side 1..``blob_max`` sharing a sign).
    Nonzero magnitudes are ``anomaly_floor + sigma_s |z|`` when the floor is
    positive, else ``sigma_s z``. If ``snr`` is set it overrides
    ``sigma_noise`` per replication as ``mean|m + a| / snr``.

    λ selection: ``"cv"`` picks λ once by cross-validation at the largest
    ratio (grid = ``cv_grid`` × λ_max of that instance) and reuses it;
    ``"fixed"`` uses the solver config's λ; ``"scale"`` uses
    ``lambda_factor × λ_max`` per cell; ``"universal"`` uses
    ``lambda_factor ×`` the universal threshold for the true noise level.
    """

    kind: str
    dims: tuple
    smooth_basis: tuple
    sparse_basis: tuple
    s: int
    sigma_noise: float = 0.0
    sigma_s: float = 1.0
    seed: int = 0
    ratios: tuple = (1.0,)
    replications: int = 1
    anomaly_layout: str = "scattered"
    blob_max: int = 4
    anomaly_floor: float = 0.0
    snr: float | None = None
    baseline_ssd: bool = True
    lambda_policy: str = "cv"
    lambda_factor: float = 1.0
    cv_grid: tuple = DEFAULT_CV_GRID
    cv_folds: int = 5

    def __post_init__(self):
        if self.kind not in ("oned", "twod"):
            raise InputError(f"kind must be 'oned' or 'twod', got {self.kind!r}")
        dims = tuple(int(d) for d in (self.dims if isinstance(self.dims, (tuple, list)) else (self.dims,)))
        if len(dims) != (1 if self.kind == "oned" else 2):
            raise InputError(f"{self.kind} scenario needs {1 if self.kind == 'oned' else 2} dimensions")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "smooth_basis", _spec_pair(self.smooth_basis, dims))
        object.__setattr__(self, "sparse_basis", _spec_pair(self.sparse_basis, dims))
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios or any(not 0 < r <= 1 for r in ratios):
            raise InputError("ratios must be a nonempty list of values in (0, 1]")
        if list(ratios) != sorted(ratios):
            raise InputError("ratios must be sorted ascending")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "cv_grid", tuple(float(g) for g in self.cv_grid))
        q = math.prod(b.columns for b in self.sparse_basis)
        if self.anomaly_layout not in ("scattered", "blobs"):
            raise InputError(f"unknown anomaly_layout {self.anomaly_layout!r}")
        if int(self.s) < 0 or (self.anomaly_layout == "scattered" and self.s > q):
            raise InputError(f"s = {self.s} exceeds the {q} sparse-basis columns")
        if self.sigma_noise < 0 or self.sigma_s < 0 or self.anomaly_floor < 0:
            raise InputError("sigma_noise, sigma_s and anomaly_floor must be >= 0")
        if self.snr is not None and not self.snr > 0:
            raise InputError("snr must be > 0")
        if int(self.replications) < 1:
            raise InputError("replications must be >= 1")
        if int(self.blob_max) < 1:
            raise InputError("blob_max must be >= 1")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise InputError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
        if not self.lambda_factor > 0:
            raise InputError("lambda_factor must be > 0")
        if self.lambda_policy == "universal" and self.sigma_noise == 0 and self.snr is None:
            raise InputError("universal lambda needs a nonzero noise level")
        if int(self.seed) < 0:
            raise InputError("seed must be non-negative")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["dims"] = list(self.dims)
        d["smooth_basis"] = [b.to_dict() for b in self.smooth_basis]
        d["sparse_basis"] = [b.to_dict() for b in self.sparse_basis]
        d["ratios"] = list(self.ratios)
        d["cv_grid"] = list(self.cv_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationScenario":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise InputError(f"unknown scenario keys: {', '.join(sorted(extra))}")
        missing = {"kind", "dims", "smooth_basis", "sparse_basis", "s", "seed"} - set(d)
        if missing:
            raise InputError(f"missing scenario keys: {', '.join(sorted(missing))}")
        return cls(**d)

    def bases(self):
        """``(smooth, sparse)`` lists of built basis matrices, one per mode."""
        return [build_basis(b) for b in self.smooth_basis], [build_basis(b) for b in self.sparse_basis]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    m: np.ndarray
    a: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    theta: np.ndarray
    theta_a: np.ndarray
    sigma_noise: float
    mean_abs: float

    @property
    def anomaly_mask(self) -> np.ndarray:
        return self.a != 0


def _magnitudes(st: Stream, count, sigma_s, floor):
    z = st.normal(count)
    if floor > 0:
        return np.sign(z) * (floor + sigma_s * np.abs(z))
    return sigma_s * z


def _noise_level(sc, mean_abs):
    return mean_abs / sc.snr if sc.snr is not None else sc.sigma_noise


def generate_1d(sc: SimulationScenario, replication: int) -> GroundTruth:
    """``y = B θ + B_a θ_a + e`` with θ ~ N(0, 1) and a random s-sparse θ_a."""
    if sc.kind != "oned":
        raise InputError("generate_1d needs a oned scenario")
    (B,), (Ba,) = sc.bases()
    st = Stream(cell_seed(sc.seed, replication))
    theta = st.normal(B.shape[1])
    q = Ba.shape[1]
    theta_a = np.zeros(q)
    if sc.anomaly_layout == "blobs":
        for _ in range(int(sc.s)):
            k = min(st.integers(1, sc.blob_max + 1), q)
            start = st.integers(0, q - k + 1)
            sign = 1.0 if st.uniform(1)[0] < 0.5 else -1.0
            theta_a[start : start + k] = sign * np.abs(_magnitudes(st, k, sc.sigma_s, sc.anomaly_floor))
    else:
        support = st.choice(q, int(sc.s))
        theta_a[support] = _magnitudes(st, len(support), sc.sigma_s, sc.anomaly_floor)
    m = B.matrix @ theta
    a = Ba.matrix @ theta_a
    mean_abs = float(np.mean(np.abs(m + a)))
    sigma = _noise_level(sc, mean_abs)
    e = st.normal(m.shape, sigma)
    return GroundTruth(m, a, m + a + e, e, theta, theta_a, sigma, mean_abs)


def generate_2d(sc: SimulationScenario, replication: int) -> GroundTruth:
    """``Y = B1 Θ B2ᵀ + B_a1 Θ_a B_a2ᵀ + E`` with i.i.d. N(0, 1) Θ."""
    if sc.kind != "twod":
        raise InputError("generate_2d needs a twod scenario")
    (B1, B2), (Ba1, Ba2) = sc.bases()
    st = Stream(cell_seed(sc.seed, replication))
    theta = st.normal((B1.shape[1], B2.shape[1]))
    q1, q2 = Ba1.shape[1], Ba2.shape[1]
    theta_a = np.zeros((q1, q2))
    if sc.anomaly_layout == "blobs":
        for _ in range(int(sc.s)):
            k = min(st.integers(1, sc.blob_max + 1), q1, q2)
            i = st.integers(0, q1 - k + 1)
            j = st.integers(0, q2 - k + 1)
            sign = 1.0 if st.uniform(1)[0] < 0.5 else -1.0
            mags = np.abs(_magnitudes(st, k * k, sc.sigma_s, sc.anomaly_floor))
            theta_a[i : i + k, j : j + k] = sign * mags.reshape(k, k)
    else:
        flat = st.choice(q1 * q2, int(sc.s))
        theta_a.reshape(-1)[flat] = _magnitudes(st, len(flat), sc.sigma_s, sc.anomaly_floor)
    M = B1.matrix @ theta @ B2.matrix.T
    A = Ba1.matrix @ theta_a @ Ba2.matrix.T
    mean_abs = float(np.mean(np.abs(M + A)))
    sigma = _noise_level(sc, mean_abs)
    E = st.normal(M.shape, sigma)
    return GroundTruth(M, A, M + A + E, E, theta, theta_a, sigma, mean_abs)


def generate(sc: SimulationScenario, replication: int) -> GroundTruth:
    return generate_1d(sc, replication) if sc.kind == "oned" else generate_2d(sc, replication)


def relative_error(truth, estimate) -> float:
    """``||truth - estimate|| / ||truth||`` (ℓ₂ for vectors, Frobenius for matrices)."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise InputError(f"shape mismatch: {truth.shape} vs {estimate.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise UndefinedMetricError("relative error is undefined for an all-zero truth")
    return float(np.linalg.norm(truth - estimate) / denom)


def _masks(truth_mask, pred_mask):
    t = np.asarray(truth_mask, dtype=bool)
    p = np.asarray(pred_mask, dtype=bool)
    if t.shape != p.shape:
        raise InputError(f"mask shape mismatch: {t.shape} vs {p.shape}")
    return t, p


def fpr(truth_mask, pred_mask) -> float:
    """Fraction of normal pixels flagged as anomalous."""
    t, p = _masks(truth_mask, pred_mask)
    normal = ~t
    if not normal.any():
        raise UndefinedMetricError("FPR is undefined without normal pixels")
    return float(np.count_nonzero(p & normal) / np.count_nonzero(normal))


def fnr(truth_mask, pred_mask) -> float:
    """Fraction of anomalous pixels not flagged."""
    t, p = _masks(truth_mask, pred_mask)
    if not t.any():
        raise UndefinedMetricError("FNR is undefined without anomalous pixels")
    return float(np.count_nonzero(t & ~p) / np.count_nonzero(t))


def detect(result, threshold: float = DETECT_THRESHOLD) -> np.ndarray:
    """``|â| > threshold`` elementwise; accepts a result or the array â."""
    if threshold < 0:
        raise InputError("threshold must be >= 0")
    a = result.sparse if isinstance(result, DecompositionResult) else np.asarray(result, dtype=float)
    return np.abs(a) > threshold


def clusters_missed(truth_mask, pred_mask) -> int:
    """Number of 8-connected anomaly clusters with no flagged pixel."""
    t, p = _masks(truth_mask, pred_mask)
    structure = np.ones((3,) * t.ndim, dtype=bool)
    labels, count = ndimage.label(t, structure=structure)
    if count == 0:
        return 0
    hit = np.zeros(count + 1, dtype=bool)
    hit[labels[p & t]] = True
    return int(count - np.count_nonzero(hit[1:]))


@dataclass
class MetricsReport:
    ratio: float
    replication: int
    method: str = "cssd"
    actual_ratio: float | None = None
    rel_err_smooth: float | None = None
    rel_err_sparse: float | None = None
    fpr: float | None = None
    fnr: float | None = None
    missed_clusters: int | None = None
    wall_time: float | None = None
    converged: bool | None = None
    iterations: int | None = None
    lam: float | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _operator(sc, ratio, ratio_idx, replication):
    seed = cell_seed(sc.seed, ratio_idx, replication)
    if sc.kind == "oned":
        n = sc.dims[0]
        p = max(1, min(n, int(round(ratio * n))))
        return gaussian_operator(p, n, seed)
    n1, n2 = sc.dims
    f = math.sqrt(ratio)
    p1 = max(1, min(n1, int(round(n1 * f))))
    p2 = max(1, min(n2, int(round(n2 * f))))
    return kron_operator(p1, n1, p2, n2, seed)


def _build_problem(sc, op, data):
    (B, *Bs), (Ba, *Bas) = sc.bases()
    if sc.kind == "oned":
        return Problem1D(data, op, B, Ba)
    return Problem2D(data, op, B, Bs[0], Ba, Bas[0])


def _pick_lambda(sc, cfg, prob, truth, fixed_lam):
    if sc.lambda_policy == "scale":
        return sc.lambda_factor * prob.lambda_max()
    if sc.lambda_policy == "universal":
        return sc.lambda_factor * prob.universal_lambda(truth.sigma_noise)
    return fixed_lam


def _score(rep, truth, sol, threshold):
    for name, t, e in (("rel_err_smooth", truth.m, sol.smooth), ("rel_err_sparse", truth.a, sol.sparse)):
        try:
            setattr(rep, name, relative_error(t, e))
        except UndefinedMetricError:
            pass
    pred = detect(sol, threshold)
    tm = truth.anomaly_mask
    try:
        rep.fpr = fpr(tm, pred)
    except UndefinedMetricError:
        pass
    try:
        rep.fnr = fnr(tm, pred)
    except UndefinedMetricError:
        pass
    if truth.m.ndim == 2:
        rep.missed_clusters = clusters_missed(tm, pred)


def _run_cell(sc, cfg, ratio_idx, replication, fixed_lam, threshold, baseline=False, keep=False):
    ratio = 1.0 if baseline else sc.ratios[ratio_idx]
    rep = MetricsReport(ratio=ratio, replication=replication, method="ssd" if baseline else "cssd")
    try:
        truth = generate(sc, replication)
        if baseline:
            op = identity_operator(*sc.dims)
        else:
            op = _operator(sc, ratio, ratio_idx, replication)
        rep.actual_ratio = op.ratio
        meas = compress(op, truth.y)
        t0 = time.perf_counter()
        prob = _build_problem(sc, op, meas.data)
        setup = time.perf_counter() - t0
        lam = _pick_lambda(sc, cfg, prob, truth, fixed_lam)
        t0 = time.perf_counter()
        sol = prob.solve(cfg.with_lam(lam))
        rep.wall_time = setup + time.perf_counter() - t0
        rep.converged, rep.iterations, rep.lam = sol.converged, sol.iterations, lam
        _score(rep, truth, sol, threshold)
        if keep:
            # not a dataclass field, so it stays out of CSV/JSON records
            rep.fields = {"smooth": sol.smooth, "sparse": sol.sparse}
    except (CSSDError, np.linalg.LinAlgError) as exc:
        rep.status = f"failed: {type(exc).__name__}: {exc}"
    return rep


def _cv_lambda(sc, cfg):
    """λ chosen by cross-validation on replication 0 at the largest ratio."""
    idx = len(sc.ratios) - 1
    truth = generate(sc, 0)
    op = _operator(sc, sc.ratios[idx], idx, 0)
    meas = compress(op, truth.y)
    lmax = _build_problem(sc, op, meas.data).lambda_max()
    grid = [g * lmax for g in sorted(sc.cv_grid)]
    (B, *Bs), (Ba, *Bas) = sc.bases()
    if sc.kind == "oned":
        return cross_validate_lambda(meas.data, op, B, Ba, grid, sc.cv_folds, seed=sc.seed, cfg=cfg)
    return cross_validate_lambda(meas.data, op, (B, Bs[0]), (Ba, Bas[0]), grid, sc.cv_folds, seed=sc.seed, cfg=cfg)


def _threads():
    env = os.environ.get("CSSD_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InputError(f"CSSD_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise InputError("CSSD_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_sweep(
    sc: SimulationScenario,
    cfg: SolverConfig,
    *,
    threshold: float = DETECT_THRESHOLD,
    threads: int | None = None,
    keep_fields: bool = False,
):
    """Evaluate every (ratio, replication) cell, plus the identity-operator
    baseline per replication when ``sc.baseline_ssd`` is set.

    Returns ``(reports, lam)`` where ``lam`` is the shared λ for the
    ``cv``/``fixed`` policies (``None`` when λ is chosen per cell). Cells that
    raise a solver error are returned with ``status`` starting ``"failed"``.
    """
    fixed_lam = None
    if sc.lambda_policy == "cv":
        fixed_lam = _cv_lambda(sc, cfg)
    elif sc.lambda_policy == "fixed":
        fixed_lam = cfg.lam
    jobs = [(i, rep, False) for i in range(len(sc.ratios)) for rep in range(sc.replications)]
    if sc.baseline_ssd:
        jobs += [(0, rep, True) for rep in range(sc.replications)]
    workers = max(1, min(threads or _threads(), len(jobs)))

    def work(job):
        i, rep, base = job
        return _run_cell(sc, cfg, i, rep, fixed_lam, threshold, baseline=base, keep=keep_fields)

    if workers == 1:
        reports = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(work, jobs))
    return reports, fixed_lam


def run_grid(sc: SimulationScenario, cfg: SolverConfig, name: str, values, **kw):
    """Run one sweep per value of scenario field ``name``; returns ``[(value, reports)]``."""
    if name not in {f.name for f in fields(SimulationScenario)}:
        raise InputError(f"unknown scenario field {name!r}")
    return [(v, run_sweep(replace(sc, **{name: v}), cfg, **kw)[0]) for v in values]


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def _mean_log(vals):
    vals = [v for v in vals if v is not None and v > 0]
    return float(np.mean(np.log(vals))) if vals else None


def aggregate(reports) -> dict:
    """Per (method, ratio) means; ``mean_log_*`` use the natural log.

    Timing means are kept in a separate ``timing`` section since they are
    not reproducible run to run.
    """
    groups = {}
    for r in reports:
        groups.setdefault((r.method, r.ratio), []).append(r)
    summary, timing = [], []
    for (method, ratio), rs in sorted(groups.items()):
        ok = [r for r in rs if r.ok]
        missed = [r.missed_clusters for r in ok if r.missed_clusters is not None]
        summary.append(
            {
                "method": method,
                "ratio": ratio,
                "cells": len(rs),
                "failed": len(rs) - len(ok),
                "converged": sum(bool(r.converged) for r in ok),
                "mean_rel_err_smooth": _mean([r.rel_err_smooth for r in ok]),
                "mean_rel_err_sparse": _mean([r.rel_err_sparse for r in ok]),
                "mean_log_rel_err_smooth": _mean_log([r.rel_err_smooth for r in ok]),
                "mean_log_rel_err_sparse": _mean_log([r.rel_err_sparse for r in ok]),
                "mean_fpr": _mean([r.fpr for r in ok]),
                "mean_fnr": _mean([r.fnr for r in ok]),
                "total_missed_clusters": sum(missed) if missed else None,
                "mean_iterations": _mean([r.iterations for r in ok]),
            }
        )
        timing.append({"method": method, "ratio": ratio, "mean_wall_time": _mean([r.wall_time for r in ok])})
    base = [t["mean_wall_time"] for t in timing if t["method"] == "ssd" and t["mean_wall_time"]]
    if base:
        for t in timing:
            if t["method"] == "cssd" and t["mean_wall_time"]:
                t["speedup_vs_ssd"] = base[0] / t["mean_wall_time"]
    return {"summary": summary, "timing": timing}


@dataclass(frozen=True)
class Knee:
    ratio: float
    pronounced: bool
    second_difference: float


def knee_ratio(curve) -> Knee:
    """Ratio where the second difference of log error peaks.

    ``curve`` is a sequence of ``(ratio, error)`` with strictly increasing
    ratios and positive errors. Ties go to the smaller ratio. The knee is
    flagged as not pronounced when the peak second difference is below 10%
    of the log-error range.
    """
    pts = [(float(r), float(e)) for r, e in curve]
    if len(pts) < 3:
        raise InputError("knee detection needs at least 3 points")
    ratios = np.array([p[0] for p in pts])
    errs = np.array([p[1] for p in pts])
    if np.any(np.diff(ratios) <= 0):
        raise InputError("ratios must be strictly increasing")
    if np.any(~np.isfinite(errs)) or np.any(errs <= 0):
        raise InputError("errors must be positive and finite")
    le = np.log(errs)
    d2 = le[:-2] - 2.0 * le[1:-1] + le[2:]
    i = int(np.argmax(d2))
    span = float(le.max() - le.min())
    pronounced = span > 0 and d2[i] >= 0.1 * span
    return Knee(ratio=float(ratios[i + 1]), pronounced=bool(pronounced), second_difference=float(d2[i]))


CSV_COLUMNS = (
    "method",
    "ratio",
    "actual_ratio",
    "replication",
    "rel_err_smooth",
    "rel_err_sparse",
    "fpr",
    "fnr",
    "missed_clusters",
    "wall_time",
    "converged",
    "iterations",
    "lambda",
    "status",
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def sweep_csv(reports, extra: dict | None = None) -> str:
    """One CSV row per cell. ``extra`` adds constant leading columns."""
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(extra) + list(CSV_COLUMNS))
    for r in reports:
        d = asdict(r)
        d["lambda"] = d.pop("lam")
        w.writerow([_fmt(v) for v in extra.values()] + [_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
