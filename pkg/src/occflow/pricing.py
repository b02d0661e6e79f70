"""Occupation payoffs, Monte Carlo estimators, Black-Scholes tools and static replication."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import ConfigurationError, DimensionError, DomainError, ExtrapolationError, NoSolutionError
from .occupation import interval_mass

__all__ = [
    "AsianFloatingCall",
    "LookbackFloatingCall",
    "RangeAccrual",
    "ParisianUpOutAssetOrNothing",
    "CorridorVarFloatingLeg",
    "TimerCall",
    "VanillaCall",
    "VanillaPut",
    "PriceEstimate",
    "TimerEstimate",
    "evaluate_payoff",
    "mc_price",
    "mean_and_stderr",
    "corridor_var_strike_mc",
    "timer_price_mc",
    "bs_price",
    "bs_vega",
    "implied_vol",
    "QuoteRow",
    "read_quotes_csv",
    "write_quotes_csv",
    "synthetic_quotes",
    "CalibrationLoss",
    "calibration_loss",
    "OptionSurface",
    "bl_occupation_strike",
    "range_accrual_static",
]


# payoff specifications


@dataclass(frozen=True)
class AsianFloatingCall:
    """``(X_T - average)^+`` with the calendar-time average of the path."""

    clock = "calendar"


@dataclass(frozen=True)
class LookbackFloatingCall:
    """``X_T - min_t X_t``."""

    clock = "calendar"


def _check_corridor(lower, upper):
    if not lower <= upper:
        raise ConfigurationError(f"corridor bounds must be ordered, got [{lower}, {upper}]")


@dataclass(frozen=True)
class RangeAccrual:
    """Pays ``coupon`` times the fraction of calendar time spent in ``[lower, upper)``."""

    lower: float = -math.inf
    upper: float = math.inf
    coupon: float = 1.0
    clock = "calendar"

    def __post_init__(self):
        _check_corridor(self.lower, self.upper)


@dataclass(frozen=True)
class ParisianUpOutAssetOrNothing:
    """``X_T`` if the cumulative calendar time above ``barrier`` stays below ``window``, else 0."""

    barrier: float
    window: float
    clock = "calendar"

    def __post_init__(self):
        if not self.window > 0:
            raise ConfigurationError("Parisian window must be positive")


@dataclass(frozen=True)
class CorridorVarFloatingLeg:
    """Realized variance accrued while the level is in ``[lower, upper)``, per unit time."""

    lower: float = -math.inf
    upper: float = math.inf
    clock = "quadratic"

    def __post_init__(self):
        _check_corridor(self.lower, self.upper)


@dataclass(frozen=True)
class TimerCall:
    """Call struck at ``strike`` that expires when realized variance reaches ``budget``."""

    budget: float
    strike: float
    clock = "quadratic"

    def __post_init__(self):
        if not self.budget > 0:
            raise ConfigurationError("variance budget must be positive")
        if not self.strike >= 0:
            raise ConfigurationError("strike must be nonnegative")


@dataclass(frozen=True)
class VanillaCall:
    strike: float
    clock = None

    def __post_init__(self):
        if not self.strike >= 0:
            raise ConfigurationError("strike must be nonnegative")


@dataclass(frozen=True)
class VanillaPut:
    strike: float
    clock = None

    def __post_init__(self):
        if not self.strike >= 0:
            raise ConfigurationError("strike must be nonnegative")


def _occupation(path, clock):
    try:
        return path.occupations[clock]
    except KeyError:
        raise ConfigurationError(
            f"payoff needs the {clock} clock; recorded clocks: {sorted(path.occupations)}"
        ) from None


def evaluate_payoff(spec, path) -> np.ndarray:
    """Undiscounted payoff of ``spec`` on a path or an ensemble (one value per path)."""
    if isinstance(spec, TimerCall):
        return _timer(spec, path)[0]
    xT = np.asarray(path.levels)[..., -1]
    T = path.horizon
    if isinstance(spec, VanillaCall):
        return np.maximum(xT - spec.strike, 0.0)
    if isinstance(spec, VanillaPut):
        return np.maximum(spec.strike - xT, 0.0)
    occ = _occupation(path, spec.clock)
    if isinstance(spec, AsianFloatingCall):
        return np.maximum(xT - occ.first_moment / T, 0.0)
    if isinstance(spec, LookbackFloatingCall):
        return xT - np.minimum(occ.lo, xT)
    if isinstance(spec, RangeAccrual):
        return spec.coupon * interval_mass(occ, spec.lower, spec.upper) / T
    if isinstance(spec, ParisianUpOutAssetOrNothing):
        above = interval_mass(occ, spec.barrier, math.inf)
        return np.where(above < spec.window, xT, 0.0)
    if isinstance(spec, CorridorVarFloatingLeg):
        return interval_mass(occ, spec.lower, spec.upper) / T
    raise ConfigurationError(f"unknown payoff {spec!r}")


@dataclass(frozen=True)
class PriceEstimate:
    value: float
    stderr: float
    n_paths: int
    discount: float = 1.0

    def __str__(self):
        return f"{self.value:.6g} +/- {self.stderr:.2g} ({self.n_paths} paths)"


@dataclass(frozen=True)
class TimerEstimate(PriceEstimate):
    n_unreached: int = 0


def mean_and_stderr(samples, antithetic=False):
    """Sample mean and its standard error; antithetic pairs ``(j, j + J/2)`` are averaged first."""
    y = np.asarray(samples, dtype=float)
    if y.size == 0:
        raise DimensionError("no samples")
    if antithetic:
        if y.size % 2:
            raise DimensionError("antithetic samples come in pairs")
        half = y.size // 2
        y = 0.5 * (y[:half] + y[half:])
    if y.size < 2:
        return float(y.mean()), math.inf
    return float(y.mean()), float(y.std(ddof=1) / math.sqrt(y.size))


def mc_price(spec, ensemble, r=None, T=None) -> PriceEstimate:
    """Discounted Monte Carlo price ``exp(-rT) E[payoff]``.

    ``r`` and ``T`` default to the ensemble's rate and horizon.
    """
    if ensemble.n_paths == 0:
        raise DimensionError("empty ensemble")
    r = ensemble.rate if r is None else r
    T = ensemble.horizon if T is None else T
    if not math.isclose(T, ensemble.horizon, rel_tol=1e-12):
        raise ConfigurationError(f"pricing horizon {T} differs from the ensemble horizon {ensemble.horizon}")
    if isinstance(spec, TimerCall):
        return timer_price_mc(spec, ensemble)
    disc = math.exp(-r * T)
    m, se = mean_and_stderr(evaluate_payoff(spec, ensemble), ensemble.antithetic)
    return PriceEstimate(disc * m, disc * se, ensemble.n_paths, disc)


def corridor_var_strike_mc(lower, upper, ensemble) -> PriceEstimate:
    """Fair corridor variance ``K^2 = E[O_T([lower, upper))] / T`` from the quadratic clock."""
    _check_corridor(lower, upper)
    occ = _occupation(ensemble, "quadratic")
    leg = interval_mass(occ, lower, upper) / ensemble.horizon
    m, se = mean_and_stderr(leg, ensemble.antithetic)
    return PriceEstimate(m, se, ensemble.n_paths)


def _timer(spec: TimerCall, path, rtol=1e-12):
    vols = np.asarray(path.vols, dtype=float)
    levels = np.asarray(path.levels, dtype=float)
    dts = np.diff(path.times)
    qv = np.cumsum(np.square(vols) * dts, axis=-1)
    crossed = qv >= spec.budget * (1 - rtol)
    reached = crossed.any(axis=-1)
    step = np.where(reached, np.argmax(crossed, axis=-1) + 1, levels.shape[-1] - 1)
    s_tau = np.take_along_axis(levels, step[..., None], axis=-1)[..., 0]
    tau = np.asarray(path.times)[step]
    payoff = np.maximum(s_tau - spec.strike, 0.0) * np.exp(-path.rate * tau)
    return payoff, reached


def timer_price_mc(spec: TimerCall, ensemble) -> TimerEstimate:
    """Timer call: exercise at the first step where realized variance reaches the budget.

    Payoffs are discounted from the random expiry.  Paths that never reach the
    budget pay their horizon-end value and are counted in ``n_unreached``.
    """
    payoff, reached = _timer(spec, ensemble)
    m, se = mean_and_stderr(payoff, ensemble.antithetic)
    return TimerEstimate(m, se, ensemble.n_paths, 1.0, int((~reached).sum()))


# Black-Scholes


def _eta(eta):
    if isinstance(eta, str):
        if eta not in ("call", "put"):
            raise ConfigurationError(f"option type must be call or put, got {eta!r}")
        return 1.0 if eta == "call" else -1.0
    return np.asarray(eta, dtype=float)


def bs_price(S0, K, T, r=0.0, q=0.0, sigma=0.2, eta="call"):
    """Black-Scholes price; ``eta`` is ``"call"``/``"put"`` or +1/-1.  Vectorized."""
    eta = _eta(eta)
    S0, K, T, sigma = (np.asarray(a, dtype=float) for a in (S0, K, T, sigma))
    df = np.exp(-r * T)
    fwd = S0 * np.exp((r - q) * T)
    w = sigma * np.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(fwd / K) + 0.5 * w * w) / w
        d2 = d1 - w
        price = df * eta * (fwd * ndtr(eta * d1) - K * ndtr(eta * d2))
    intrinsic = df * np.maximum(eta * (fwd - K), 0.0)
    out = np.where((w > 0) & (K > 0), price, intrinsic)
    return out[()] if out.ndim == 0 else out


def bs_vega(S0, K, T, r=0.0, q=0.0, sigma=0.2):
    """Derivative of the Black-Scholes price in ``sigma`` (same for calls and puts)."""
    S0, K, T, sigma = (np.asarray(a, dtype=float) for a in (S0, K, T, sigma))
    fwd = S0 * np.exp((r - q) * T)
    w = sigma * np.sqrt(T)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(fwd / K) + 0.5 * w * w) / w
        vega = S0 * np.exp(-q * T) * np.sqrt(T) * np.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)
    out = np.where(w > 0, vega, 0.0)
    return out[()] if out.ndim == 0 else out


def implied_vol(price, S0, K, T, r=0.0, q=0.0, eta="call", vol_max=20.0):
    """Black-Scholes implied volatility by bracketed root finding.

    Raises
    ------
    NoSolutionError
        If the price is outside the open no-arbitrage interval.
    """
    e = float(_eta(eta))
    df = math.exp(-r * T)
    fwd = S0 * math.exp((r - q) * T)
    lower = df * max(e * (fwd - K), 0.0)
    upper = S0 * math.exp(-q * T) if e > 0 else K * df
    if not (T > 0 and lower < price < upper):
        raise NoSolutionError(f"price {price} outside the no-arbitrage bounds ({lower}, {upper})")

    def f(s):
        return float(bs_price(S0, K, T, r, q, s, e)) - price

    hi = vol_max
    if f(hi) < 0:
        raise NoSolutionError(f"implied volatility above {vol_max}")
    sigma = brentq(f, 1e-12, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(sigma)) > 1e-10 * S0:
        raise NoSolutionError(f"root finder did not reach tolerance for price {price}")
    return sigma


# quotes and calibration


@dataclass(frozen=True)
class QuoteRow:
    strike: float
    maturity: float
    kind: str
    bid: float
    ask: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ConfigurationError(f"quote type must be call or put, got {self.kind!r}")
        if not 0 <= self.bid <= self.ask:
            raise ConfigurationError(f"quote needs 0 <= bid <= ask, got {self.bid}, {self.ask}")
        if not (self.strike > 0 and self.maturity > 0):
            raise ConfigurationError("strike and maturity must be positive")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)


def read_quotes_csv(source) -> list:
    """Read ``strike,maturity,type,bid,ask`` rows (``#`` comment lines allowed)."""
    text = Path(source).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    expected = ["strike", "maturity", "type", "bid", "ask"]
    if reader.fieldnames != expected:
        raise ConfigurationError(f"{source}: expected header {','.join(expected)}, got {reader.fieldnames}")
    rows = []
    for k, rec in enumerate(reader, start=2):
        try:
            rows.append(
                QuoteRow(float(rec["strike"]), float(rec["maturity"]), rec["type"].strip(), float(rec["bid"]), float(rec["ask"]))
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{source}: bad quote on line {k}: {exc}") from None
    return rows


def write_quotes_csv(quotes, target=None) -> str:
    buf = io.StringIO()
    buf.write("strike,maturity,type,bid,ask\n")
    for q in quotes:
        buf.write(f"{float(q.strike)!r},{float(q.maturity)!r},{q.kind},{float(q.bid)!r},{float(q.ask)!r}\n")
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def synthetic_quotes(S0, strikes, maturities, sigma=0.2, r=0.0, q=0.0, spread=0.01):
    """Black-Scholes quotes with bid/ask vols ``sigma -/+ spread/2``; OTM type per strike."""
    rows = []
    for T in maturities:
        fwd = S0 * math.exp((r - q) * T)
        for K in strikes:
            kind = "put" if K < fwd else "call"
            bid = float(bs_price(S0, K, T, r, q, sigma - spread / 2, kind))
            ask = float(bs_price(S0, K, T, r, q, sigma + spread / 2, kind))
            rows.append(QuoteRow(float(K), float(T), kind, bid, ask))
    return rows


@dataclass(frozen=True)
class CalibrationLoss:
    loss: float
    threshold: float
    weights: np.ndarray


def _iv_or_zero(price, q, S0, r, d):
    try:
        return implied_vol(price, S0, q.strike, q.maturity, r, d, q.kind)
    except NoSolutionError:
        if price <= float(bs_price(S0, q.strike, q.maturity, r, d, 0.0, q.kind)):
            return 0.0
        raise


def calibration_loss(model_prices, quotes: Sequence[QuoteRow], spot, rate=0.0, dividend=0.0, vega_floor=1e-2):
    """Weighted RMSE between model and mid prices.

    Weights are ``(sigma_bid / sigma_ask) / max(vega_mid, vega_floor)``, so
    wide or illiquid quotes count less.  ``threshold`` is the weighted
    half-spread RMS: a loss below it means the model sits inside the bid/ask on
    average.
    """
    prices = np.asarray(model_prices, dtype=float)
    if prices.shape != (len(quotes),):
        raise DimensionError(f"{prices.size} model prices for {len(quotes)} quotes")
    if not vega_floor > 0:
        raise ConfigurationError("vega floor must be positive")
    w = np.empty(len(quotes))
    mids = np.empty(len(quotes))
    spreads = np.empty(len(quotes))
    for i, q in enumerate(quotes):
        s_ask = _iv_or_zero(q.ask, q, spot, rate, dividend)
        if s_ask <= 0:
            raise DomainError(f"zero ask volatility for quote {i} (K={q.strike}, T={q.maturity})")
        s_bid = _iv_or_zero(q.bid, q, spot, rate, dividend)
        s_mid = _iv_or_zero(q.mid, q, spot, rate, dividend)
        vega = float(bs_vega(spot, q.strike, q.maturity, rate, dividend, s_mid))
        w[i] = (s_bid / s_ask) / max(vega, vega_floor)
        mids[i] = q.mid
        spreads[i] = q.ask - q.bid
    loss = math.sqrt(np.mean(np.square(w * (prices - mids))))
    alpha = 0.5 * math.sqrt(np.mean(np.square(w * spreads)))
    return CalibrationLoss(loss, alpha, w)


# static replication


@dataclass(frozen=True, eq=False)
class OptionSurface:
    """Undiscounted call/put prices on a strike x maturity grid.

    ``calls[i, k]`` is the forward price of the call with maturity
    ``maturities[i]`` and strike ``strikes[k]``.  A maturity of 0 holds the
    intrinsic values.
    """

    strikes: np.ndarray
    maturities: np.ndarray
    calls: np.ndarray
    puts: np.ndarray
    forwards: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.strikes, dtype=float)
        T = np.asarray(self.maturities, dtype=float)
        shape = (T.size, K.size)
        for name in ("calls", "puts"):
            if np.shape(getattr(self, name)) != shape:
                raise DimensionError(f"{name} must have shape {shape}")
        if np.shape(self.forwards) != (T.size,):
            raise DimensionError("one forward per maturity expected")
        if not (np.all(np.diff(K) > 0) and np.all(np.diff(T) > 0)):
            raise ConfigurationError("strikes and maturities must be strictly increasing")

    @classmethod
    def black_scholes(cls, spot, sigma, strikes, maturities, r=0.0, q=0.0):
        K = np.asarray(strikes, dtype=float)
        T = np.asarray(maturities, dtype=float)[:, None]
        disc = np.exp(r * T)
        calls = bs_price(spot, K, T, r, q, sigma, "call") * disc
        puts = bs_price(spot, K, T, r, q, sigma, "put") * disc
        fwd = spot * np.exp((r - q) * T[:, 0])
        return cls(K, T[:, 0], calls, puts, fwd)

    @classmethod
    def from_quotes(cls, quotes, spot, r=0.0, q=0.0):
        """Mid prices on the full strike x maturity grid; missing sides come from put-call parity."""
        K = np.unique([x.strike for x in quotes])
        T = np.unique([x.maturity for x in quotes])
        calls = np.full((T.size, K.size), np.nan)
        puts = np.full((T.size, K.size), np.nan)
        for x in quotes:
            i, k = np.searchsorted(T, x.maturity), np.searchsorted(K, x.strike)
            target = calls if x.kind == "call" else puts
            target[i, k] = x.mid * math.exp(r * x.maturity)
        fwd = spot * np.exp((r - q) * T)
        calls = np.where(np.isnan(calls), puts + fwd[:, None] - K, calls)
        puts = np.where(np.isnan(puts), calls - fwd[:, None] + K, puts)
        if np.isnan(calls).any():
            raise ConfigurationError("quotes do not cover a full strike x maturity grid")
        return cls(K, T, calls, puts, fwd)

    def _row(self, T):
        i = np.searchsorted(self.maturities, T)
        if i < self.maturities.size and math.isclose(self.maturities[i], T, rel_tol=1e-12, abs_tol=1e-14):
            return self.calls[i], self.puts[i], self.forwards[i]
        raise ExtrapolationError(f"maturity {T} is not on the surface")

    def otm(self, T):
        """Out-of-the-money prices at maturity ``T``: puts below the forward, calls above."""
        c, p, f = self._row(T)
        return np.where(self.strikes < f, p, c)


def bl_occupation_strike(surface: OptionSurface, lower, upper, maturity):
    """Expected quadratic occupation of ``[lower, upper]`` up to ``maturity`` from vanillas.

    Trapezoid rule on the strike grid for ``2 * OTM(K) / K^2``, with linear
    interpolation of prices at the corridor ends.  Divide by the maturity to
    get the fair corridor variance.
    """
    _check_corridor(lower, upper)
    K = surface.strikes
    if lower < K[0] or upper > K[-1]:
        raise ExtrapolationError(f"corridor [{lower}, {upper}] exceeds quoted strikes [{K[0]}, {K[-1]}]")
    if lower == upper:
        return 0.0
    otm = surface.otm(maturity)
    inner = (K > lower) & (K < upper)
    ks = np.concatenate([[lower], K[inner], [upper]])
    # interpolate puts and calls separately so the forward kink is kept
    c, p, f = surface._row(maturity)
    vals = np.interp(ks, K, otm)
    for j, k in enumerate((lower, upper)):
        if not np.any(K == k):
            vals[0 if j == 0 else -1] = np.interp(k, K, p) if k < f else np.interp(k, K, c)
    return float(np.trapezoid(2.0 * vals / ks**2, ks))


def _dput_dk(surface, i, x):
    K = surface.strikes
    if np.isneginf(x):
        return 0.0
    if np.isposinf(x):
        return 1.0
    if x < K[1] or x > K[-2]:
        raise ExtrapolationError(f"level {x} needs at least one strike on each side")
    grad = np.gradient(surface.puts[i], K)
    return float(np.interp(x, K, grad))


def range_accrual_static(surface: OptionSurface, lower, upper, horizon):
    """Expected calendar time in ``[lower, upper]`` up to ``horizon`` from put prices.

    ``lower``/``upper`` may be constants (``+/-inf`` allowed) or callables of
    ``t`` for moving corridors.  Uses ``dP/dK`` by central differences and the
    trapezoid rule over the surface maturities in ``[0, horizon]``.
    """
    mats = surface.maturities
    if mats[0] > 0 or mats[-1] < horizon:
        raise ExtrapolationError("surface maturities must span [0, horizon]")
    if len(surface.strikes) < 3:
        raise ExtrapolationError("need at least three strikes for finite differences")
    sel = np.flatnonzero(mats <= horizon * (1 + 1e-12))
    lo = lower if callable(lower) else (lambda t: lower)
    hi = upper if callable(upper) else (lambda t: upper)
    cdf = np.array([_dput_dk(surface, i, hi(mats[i])) - _dput_dk(surface, i, lo(mats[i])) for i in sel])
    return float(np.trapezoid(cdf, mats[sel]))
