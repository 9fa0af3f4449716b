"""
Moments <kappa^xi>, the exponent nu with <kappa^nu> = 1, and rho_k with
<(k kappa^2)^rho> = 1.

All evaluators work with log-moments so that large exponents do not
overflow. The natural orientation for dimer models is kappa = t_od / t_ev;
`MomentFunction.oriented` flips to the orientation with <log kappa> < 0.
"""
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from app.config import settings
from app.errors import DomainError, NoRootError, UnsupportedCaseError
from app.models.analytics import HypothesisReport, MomentKind, NuSolution
from app.models.polymer import DimerHoppingModel, XDistributionKind
from app.models.transfer import CriticalData

logger = logging.getLogger(__name__)

XI_LIMIT = 1e6


def _log_sinhc(h: float) -> float:
    """log(sinh(h) / h)."""
    h = abs(h)
    if h < 1e-4:
        return h * h / 6.0
    return h + math.log(-math.expm1(-2.0 * h)) - math.log(2.0 * h)


def log_uniform_power_mean(c: float, lam: float, s: float) -> float:
    """log <t^s> for t uniform on [c - lam, c + lam]; exact at s = -1."""
    if lam == 0:
        return s * math.log(c)
    upper, lower = math.log(c + lam), math.log(c - lam)
    width = upper - lower
    middle = (s + 1.0) * (upper + lower) / 2.0
    return middle + math.log(width / (2.0 * lam)) + _log_sinhc((s + 1.0) * width / 2.0)


def mean_log_uniform(c: float, lam: float) -> float:
    if lam == 0:
        return math.log(c)
    hi, lo = c + lam, c - lam
    return (hi * math.log(hi) - lo * math.log(lo)) / (2.0 * lam) - 1.0


def log_two_point_power_mean(c: float, lam: float, p: float, s: float) -> float:
    """log <t^s> for t = c + lam with probability p, c - lam otherwise."""
    values = np.array([math.log(c + lam), math.log(c - lam)])
    weights = np.array([p, 1.0 - p])
    keep = weights > 0
    return float(logsumexp(s * values[keep], b=weights[keep]))


class MomentFunction:
    """
    xi -> <kappa^xi> with provenance.

    `log_moment` is the primary evaluator; `support` is the range of kappa
    and `gamma0` the derivative of the log-moment at 0, both in the current
    orientation.
    """

    def __init__(
        self,
        kind: MomentKind,
        log_moment: Callable[[float], float],
        gamma0: float,
        support: Tuple[float, float],
        validity: Tuple[float, float] = (-XI_LIMIT, XI_LIMIT),
        deterministic: bool = False,
        swapped: bool = False,
        log_kappas: Optional[np.ndarray] = None,
    ):
        self.kind = kind
        self._log_moment = log_moment
        self.gamma0 = gamma0
        self.support = support
        self.validity = validity
        self.deterministic = deterministic
        self.swapped = swapped
        self.log_kappas = log_kappas

    def log_moment(self, xi: float) -> float:
        if not self.validity[0] <= xi <= self.validity[1]:
            raise DomainError(f"xi={xi} outside validity interval {self.validity}")
        return self._log_moment(xi)

    def __call__(self, xi: float) -> float:
        return math.exp(self.log_moment(xi))

    def standard_error(self, xi: float) -> float:
        """Monte Carlo standard error of the estimate; 0 for exact kinds."""
        if self.log_kappas is None or self.kind != MomentKind.MONTE_CARLO:
            return 0.0
        values = np.exp(xi * self.log_kappas)
        return float(values.std(ddof=1) / math.sqrt(values.size))

    def inverted(self) -> "MomentFunction":
        """The same ensemble with kappa -> 1/kappa."""
        return MomentFunction(
            kind=self.kind,
            log_moment=lambda xi, f=self._log_moment: f(-xi),
            gamma0=-self.gamma0,
            support=(1.0 / self.support[1], 1.0 / self.support[0]),
            validity=(-self.validity[1], -self.validity[0]),
            deterministic=self.deterministic,
            swapped=not self.swapped,
            log_kappas=None if self.log_kappas is None else -self.log_kappas,
        )

    def oriented(self) -> "MomentFunction":
        return self.inverted() if self.gamma0 > 0 else self

    @classmethod
    def from_kappas(cls, kappas: Sequence[float], weights: Sequence[float]) -> "MomentFunction":
        """Exact weighted sum over the atoms of a discrete ensemble."""
        log_kappas = np.log(np.asarray(kappas, dtype=float))
        weights = np.asarray(weights, dtype=float)
        keep = weights > 0
        log_kappas, weights = log_kappas[keep], weights[keep]
        return cls(
            kind=MomentKind.DISCRETE_EXACT,
            log_moment=lambda xi: float(logsumexp(xi * log_kappas, b=weights)),
            gamma0=float(np.dot(weights, log_kappas)),
            support=(float(np.exp(log_kappas.min())), float(np.exp(log_kappas.max()))),
            deterministic=bool(np.ptp(log_kappas) == 0.0),
            log_kappas=log_kappas,
        )

    @classmethod
    def from_critical(cls, critical: CriticalData) -> "MomentFunction":
        mf = cls.from_kappas(critical.kappas, critical.weights)
        mf.swapped = critical.orientation_swapped
        return mf

    @classmethod
    def monte_carlo(cls, kappa_samples: Sequence[float]) -> "MomentFunction":
        log_kappas = np.log(np.asarray(kappa_samples, dtype=float))
        n = log_kappas.size
        return cls(
            kind=MomentKind.MONTE_CARLO,
            log_moment=lambda xi: float(logsumexp(xi * log_kappas) - math.log(n)),
            gamma0=float(log_kappas.mean()),
            support=(float(np.exp(log_kappas.min())), float(np.exp(log_kappas.max()))),
            deterministic=bool(np.ptp(log_kappas) == 0.0),
            log_kappas=log_kappas,
        )

    @classmethod
    def from_model(cls, model: DimerHoppingModel) -> "MomentFunction":
        """Closed form for kappa = t_od / t_ev with independent hoppings."""
        if model.x_dist.kind == XDistributionKind.UNIFORM:
            kind = MomentKind.CLOSED_FORM_UNIFORM

            def log_moment(xi: float) -> float:
                return (log_uniform_power_mean(model.c_od, model.lambda_od, xi)
                        + log_uniform_power_mean(model.c_ev, model.lambda_ev, -xi))

            gamma0 = mean_log_uniform(model.c_od, model.lambda_od) - mean_log_uniform(model.c_ev, model.lambda_ev)
        else:
            kind = MomentKind.CLOSED_FORM_BERNOULLI
            p = model.x_dist.p

            def log_moment(xi: float) -> float:
                return (log_two_point_power_mean(model.c_od, model.lambda_od, p, xi)
                        + log_two_point_power_mean(model.c_ev, model.lambda_ev, p, -xi))

            gamma0 = (gamma0_two_point(model.c_od, model.lambda_od, p)
                      - gamma0_two_point(model.c_ev, model.lambda_ev, p))

        support = (
            (model.c_od - model.lambda_od) / (model.c_ev + model.lambda_ev),
            (model.c_od + model.lambda_od) / (model.c_ev - model.lambda_ev),
        )
        if kind == MomentKind.CLOSED_FORM_BERNOULLI and p in (0.0, 1.0):
            sign = 1.0 if p == 1.0 else -1.0
            value = (model.c_od + sign * model.lambda_od) / (model.c_ev + sign * model.lambda_ev)
            support = (value, value)
        return cls(kind=kind, log_moment=log_moment, gamma0=gamma0, support=support,
                   deterministic=model.is_deterministic)


def gamma0_two_point(c: float, lam: float, p: float) -> float:
    total = 0.0
    if p > 0:
        total += p * math.log(c + lam)
    if p < 1:
        total += (1.0 - p) * math.log(c - lam)
    return total


def moment(mf: MomentFunction, xi: float) -> float:
    return mf(xi)


def gamma0(source) -> float:
    """<log kappa> of a MomentFunction, or of a dimer model in its natural orientation."""
    if isinstance(source, DimerHoppingModel):
        return MomentFunction.from_model(source).gamma0
    return source.gamma0


def hypothesis_report(mf: MomentFunction) -> HypothesisReport:
    lo, hi = mf.support
    return HypothesisReport(
        kappa_nontrivial=not (mf.deterministic and lo == 1.0),
        two_sided_support=lo < 1.0 < hi,
        nonzero_root=(not mf.deterministic) and lo < 1.0 < hi and abs(mf.gamma0) > settings.GAMMA0_TOL,
        gamma0=mf.gamma0,
        support=(lo, hi),
    )


def solve_nu(mf: MomentFunction) -> NuSolution:
    """
    The nonzero root of <kappa^xi> = 1, reported positive.

    The search runs in the orientation with <log kappa> < 0: the bracket
    starts at 1e-3 and doubles until the moment exceeds 1, then brentq
    refines it.
    """
    if mf.deterministic:
        raise NoRootError("kappa is deterministic; <kappa^xi> = 1 only at xi = 0")
    if abs(mf.gamma0) <= settings.GAMMA0_TOL:
        raise UnsupportedCaseError("<log kappa> vanishes; the zero-drift case is not supported")
    lo_k, hi_k = mf.support
    if not lo_k < 1.0 < hi_k:
        raise NoRootError(f"support of kappa [{lo_k:.4g}, {hi_k:.4g}] does not meet both sides of 1")

    g = mf.oriented()
    lower = 1e-3
    while g.log_moment(lower) >= 0.0:
        lower /= 2.0
        if lower < 1e-12:
            raise NoRootError("root too close to zero to bracket")
    upper = 2.0 * lower
    while g.log_moment(upper) <= 0.0:
        lower, upper = upper, 2.0 * upper
        if upper > XI_LIMIT:
            raise NoRootError("moment never exceeds 1 on the search range")

    nu = brentq(g.log_moment, lower, upper, xtol=settings.ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    residual = abs(g(nu) - 1.0)
    if residual > 1e-12:
        logger.warning("nu residual %.3g exceeds 1e-12", residual)
    logger.info("nu=%.10g (bracket [%g, %g], swapped=%s)", nu, lower, upper, g.swapped)
    return NuSolution(
        nu=nu,
        bracket=(lower, upper),
        residual=residual,
        orientation_swapped=g.swapped,
        gamma0=g.gamma0,
        kind=mf.kind,
    )


def log_ld_moment(mf: MomentFunction, k: float, s: float) -> float:
    """log <(k kappa^2)^s>."""
    return s * math.log(k) + mf.log_moment(2.0 * s)


def rho_k_window(mf: MomentFunction) -> Tuple[float, float]:
    """Range of k for which rho_k exists: 1 < k < exp(-2 gamma0)."""
    return 1.0, math.exp(-2.0 * mf.oriented().gamma0)


def solve_rho_k(mf: MomentFunction, k: float, nu: Optional[float] = None) -> float:
    """Root of <(k kappa^2)^rho> = 1 in (0, nu/2)."""
    if k <= 1.0:
        raise DomainError(f"k must exceed 1, got {k}")
    g = mf.oriented()
    _, k_max = rho_k_window(mf)
    if k >= k_max:
        raise DomainError(f"rho_k exists only for 1 < k < {k_max:.6g}, got k={k}")
    if nu is None:
        nu = solve_nu(mf).nu
    half = nu / 2.0

    def h(rho: float) -> float:
        return log_ld_moment(g, k, rho)

    lower = half * 1e-9
    rho = brentq(h, lower, half, xtol=settings.ROOT_XTOL, rtol=4 * np.finfo(float).eps)
    residual = abs(math.exp(h(rho)) - 1.0)
    if residual > 1e-12:
        logger.warning("rho_k residual %.3g exceeds 1e-12", residual)
    return rho
