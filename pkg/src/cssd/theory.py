"""Calculators for the uniqueness, measurement-count and recovery-error bounds.

All functions are pure. Inputs outside a formula's domain raise
:class:`~cssd.errors.DomainError` naming the violated inequality; no
function returns NaN.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import DomainError

__all__ = [
    "SignalClassParams",
    "TheoryReport",
    "eta",
    "uniqueness_bound",
    "check_uniqueness",
    "tau_constants",
    "measurement_bound",
    "recovery_constants",
    "RecoveryConstants",
    "log_covering_count",
    "theory_report",
]


def _finite(name, x):
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {x!r}") from None
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x}")
    return x


def _unit_interval(name, x, *, closed_low=True):
    x = _finite(name, x)
    if closed_low:
        if not 0.0 <= x < 1.0:
            raise DomainError(f"0 <= {name} < 1 violated ({name} = {x})")
    elif not 0.0 < x < 1.0:
        raise DomainError(f"0 < {name} < 1 violated ({name} = {x})")
    return x


@dataclass(frozen=True)
class SignalClassParams:
    """Parameters of the smooth-plus-sparse signal class.

    n : signal length; r : smooth rank; s : sparsity; l : local support
    length of the sparse basis; mu : incoherence of the smooth basis;
    delta_ba_s, delta_ba_2s : RIC bounds of the sparse basis at sparsity
    s and 2s (optional, needed by the tau and recovery calculators).
    """

    n: float
    r: float
    s: float
    l: float
    mu: float
    delta_ba_s: float | None = None
    delta_ba_2s: float | None = None

    def __post_init__(self):
        n = _finite("n", self.n)
        if n <= 0:
            raise DomainError(f"n > 0 violated (n = {n})")
        for name in ("r", "s", "l", "mu"):
            v = _finite(name, getattr(self, name))
            if v < 0:
                raise DomainError(f"{name} >= 0 violated ({name} = {v})")
        for name in ("r", "s", "l"):
            if getattr(self, name) > n:
                raise DomainError(f"{name} <= n violated ({name} = {getattr(self, name)}, n = {n})")
        for name in ("delta_ba_s", "delta_ba_2s"):
            v = getattr(self, name)
            if v is not None:
                _unit_interval(name, v)

    @classmethod
    def from_dict(cls, d: dict) -> "SignalClassParams":
        allowed = {"n", "r", "s", "l", "mu", "delta_ba_s", "delta_ba_2s"}
        extra = set(d) - allowed
        if extra:
            raise DomainError(f"unknown signal-class keys: {sorted(extra)}")
        missing = {"n", "r", "s", "l", "mu"} - set(d)
        if missing:
            raise DomainError(f"missing signal-class keys: {sorted(missing)}")
        return cls(**d)


def eta(params: SignalClassParams) -> float:
    """``sqrt(mu r s l / n)``."""
    return math.sqrt(params.mu * params.r * params.s * params.l / params.n)


def uniqueness_bound(params: SignalClassParams) -> float:
    """``n / (2 r s l)``; infinite when any of r, s, l is zero."""
    prod = params.r * params.s * params.l
    return math.inf if prod == 0 else params.n / (2.0 * prod)


def check_uniqueness(params: SignalClassParams) -> bool:
    """True iff ``mu < n / (2 r s l)`` (strict)."""
    return params.mu < uniqueness_bound(params)


def tau_constants(params: SignalClassParams, sigma_min_B: float, delta_s: float | None = None) -> tuple[float, float]:
    """Return ``(tau0, tau1)``.

    ``tau0 = 1/sqrt((1 - delta_s)(1 - eta²))`` and
    ``tau1 = (1/sigma_min(B)) (1 + 1/sqrt(1 - eta²))``; ``delta_s``
    defaults to ``params.delta_ba_s``.
    """
    if delta_s is None:
        delta_s = params.delta_ba_s
    if delta_s is None:
        raise DomainError("delta_ba_s is required for tau0")
    d = _unit_interval("delta_ba_s", delta_s)
    smin = _finite("sigma_min_B", sigma_min_B)
    if smin <= 0:
        raise DomainError(f"sigma_min(B) > 0 violated (sigma_min = {smin})")
    e2 = eta(params) ** 2
    if e2 >= 1:
        raise DomainError(f"eta < 1 violated (eta = {math.sqrt(e2):.6g})")
    tau0 = 1.0 / math.sqrt((1.0 - d) * (1.0 - e2))
    tau1 = (1.0 / smin) * (1.0 + 1.0 / math.sqrt(1.0 - e2))
    return tau0, tau1


def _check_taus(tau0, tau1):
    t0 = _finite("tau0", tau0)
    t1 = _finite("tau1", tau1)
    if t0 <= 0 or t1 <= 0:
        raise DomainError(f"tau0 > 0 and tau1 > 0 violated (tau0 = {t0}, tau1 = {t1})")
    return t0, t1


def log_covering_count(params: SignalClassParams, delta: float, tau0: float, tau1: float) -> float:
    """``r ln(24 tau1 / delta) + s ln(24 tau0 / delta)`` (log of the net size)."""
    d = _unit_interval("delta", delta, closed_low=False)
    t0, t1 = _check_taus(tau0, tau1)
    return params.r * math.log(24.0 * t1 / d) + params.s * math.log(24.0 * t0 / d)


def measurement_bound(params: SignalClassParams, delta: float, tau0: float, tau1: float, c2: float) -> float:
    """Sufficient measurement count, up to the unknown constant ``c2``.

    ``c2 (ln 2 + r ln(24 tau1/delta) + s (1 + ln(24 tau0/delta) + ln(n/s)))``.
    Only ratios of values are meaningful since ``c2`` is not known.
    """
    d = _unit_interval("delta", delta, closed_low=False)
    c2 = _finite("c2", c2)
    if c2 <= 0:
        raise DomainError(f"c2 > 0 violated (c2 = {c2})")
    t0, t1 = _check_taus(tau0, tau1)
    s = params.s
    sparse_term = 0.0 if s == 0 else s * (1.0 + math.log(24.0 * t0 / d) + math.log(params.n / s))
    return c2 * (math.log(2.0) + params.r * math.log(24.0 * t1 / d) + sparse_term)


@dataclass(frozen=True)
class RecoveryConstants:
    alpha1: float
    alpha2: float
    gamma: float
    a: float
    c: float
    delta_max: float | None
    Ca: float | None
    Cm: float | None
    reason: str | None = None

    def as_tuple(self):
        return self.alpha1, self.alpha2, self.gamma, self.a, self.c, self.Ca, self.Cm


def recovery_constants(params: SignalClassParams, delta_r3s: float, delta_2s: float | None = None) -> RecoveryConstants:
    """Error-bound constants of the constrained decomposition.

    ``Ca`` and ``Cm`` bound the sparse and smooth errors as multiples of the
    measurement-error bound; they exist only when ``c > 0`` and
    ``delta_r3s < c/a``. Otherwise they are ``None`` and ``reason`` says why.
    ``delta_2s`` defaults to ``params.delta_ba_2s``.
    """
    if delta_2s is None:
        delta_2s = params.delta_ba_2s
    if delta_2s is None:
        raise DomainError("delta_ba_2s is required for gamma")
    d2 = _unit_interval("delta_ba_2s", delta_2s)
    d = _unit_interval("delta_r3s", delta_r3s)
    e = eta(params)
    if 2.0 * e * e >= 1.0:
        raise DomainError(f"eta^2 < 1/2 violated (eta = {e:.6g})")
    alpha1 = e / (1.0 - e * e)
    alpha2 = math.sqrt(2.0) * e / (1.0 - 2.0 * e * e)
    g2 = (1.0 + d2) / (1.0 - d2)
    gamma = math.sqrt(g2)
    a = (1.0 + alpha1 + alpha2) * g2 + 2.0 * alpha2 + 2.0
    c = 1.0 - g2 * alpha1 * alpha2 - alpha2 * alpha2
    if c <= 0:
        return RecoveryConstants(alpha1, alpha2, gamma, a, c, None, None, None, "c <= 0")
    delta_max = c / a
    if d >= delta_max:
        return RecoveryConstants(alpha1, alpha2, gamma, a, c, delta_max, None, None, "delta_r3s >= c/a")
    Ca = (1.0 + g2) * (1.0 + alpha2) * math.sqrt(1.0 + d) / (c - a * d)
    Cm = (math.sqrt(1.0 + d) + (d + g2 / (1.0 + g2) * alpha1 + alpha2 / (1.0 + g2)) * Ca) / (1.0 - d)
    return RecoveryConstants(alpha1, alpha2, gamma, a, c, delta_max, Ca, Cm)


@dataclass
class TheoryReport:
    eta: float
    unique: bool
    uniqueness_bound: float
    tau0: float | None = None
    tau1: float | None = None
    p_min: float | None = None
    log_covering: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None
    gamma: float | None = None
    a_const: float | None = None
    c_const: float | None = None
    delta_max: float | None = None
    Ca: float | None = None
    Cm: float | None = None
    undefined: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity
        if math.isinf(d["uniqueness_bound"]):
            d["uniqueness_bound"] = None
        return d


def theory_report(
    params: SignalClassParams,
    *,
    sigma_min_B: float | None = None,
    delta: float | None = None,
    c2: float = 1.0,
    delta_r3s: float | None = None,
) -> TheoryReport:
    """Evaluate every calculator whose inputs are available.

    Sections that cannot be evaluated are left as ``None`` with the reason
    recorded in ``undefined`` (keyed by section: ``tau``, ``p_min``,
    ``recovery``, ``Ca``).
    """
    rep = TheoryReport(eta=eta(params), unique=check_uniqueness(params), uniqueness_bound=uniqueness_bound(params))
    if sigma_min_B is None or params.delta_ba_s is None:
        rep.undefined["tau"] = "needs sigma_min_B and delta_ba_s"
    else:
        try:
            rep.tau0, rep.tau1 = tau_constants(params, sigma_min_B)
        except DomainError as exc:
            rep.undefined["tau"] = str(exc)
    if rep.tau0 is not None:
        if delta is None:
            rep.undefined["p_min"] = "needs delta"
        else:
            try:
                rep.p_min = measurement_bound(params, delta, rep.tau0, rep.tau1, c2)
                rep.log_covering = log_covering_count(params, delta, rep.tau0, rep.tau1)
            except DomainError as exc:
                rep.undefined["p_min"] = str(exc)
    if params.delta_ba_2s is None:
        rep.undefined["recovery"] = "needs delta_ba_2s"
    else:
        try:
            rc = recovery_constants(params, 0.0 if delta_r3s is None else delta_r3s)
        except DomainError as exc:
            rep.undefined["recovery"] = str(exc)
        else:
            rep.alpha1, rep.alpha2, rep.gamma = rc.alpha1, rc.alpha2, rc.gamma
            rep.a_const, rep.c_const, rep.delta_max = rc.a, rc.c, rc.delta_max
            if delta_r3s is None and rc.reason is None:
                rep.undefined["Ca"] = "needs delta_r3s"
            elif rc.reason is not None:
                rep.undefined["Ca"] = rc.reason
            else:
                rep.Ca, rep.Cm = rc.Ca, rc.Cm
    return rep
