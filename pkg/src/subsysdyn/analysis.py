"""Fits and diagnostics on ensemble entropy curves.

Series are given as a time array plus either a mean curve (1D) or a
trajectory matrix of shape ``(n_trajectories, n_times)``; matrices enable
the trajectory bootstrap used for every reported error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

__all__ = [
    "FitError",
    "FitResult",
    "ScalingResult",
    "Plateau",
    "select_fit_window",
    "fit_exponential",
    "fit_double_exponential",
    "fit_scaling",
    "fit_dynamical_exponent",
    "collapse_curves",
    "detect_plateaus",
    "sweep_order_parameter",
    "crossing_points",
    "first_passage_times",
]


class FitError(ValueError):
    """Raised when a fit is refused (too few usable points, bad input)."""


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict[str, float]
    errors: dict[str, float]
    fit_window: tuple[float, float]
    goodness: float
    n_points: int

    @property
    def tau(self) -> float:
        return self.params["tau"]

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "errors": dict(self.errors),
            "fit_window": list(self.fit_window),
            "goodness": self.goodness,
            "n_points": self.n_points,
        }


@dataclass(frozen=True)
class ScalingResult:
    model: str
    value: float
    stderr: float
    intercept: float
    delta: float | None
    points: tuple[tuple[float, float], ...]

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "value": self.value,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "delta": self.delta,
            "points": [list(p) for p in self.points],
        }


@dataclass(frozen=True)
class Plateau:
    level: float
    t_start: float
    t_end: float

    def decades(self) -> float:
        return math.log10(self.t_end / self.t_start)


def _as_matrix(series) -> np.ndarray:
    a = np.asarray(series, dtype=float)
    return a[None, :] if a.ndim == 1 else a


def select_fit_window(
    t: np.ndarray, mean: np.ndarray, floor: float, plateau_level: float | None = None, end_gap: float = 0.1
) -> tuple[int, int]:
    """Index range ``[lo, hi)`` of the late-time exponential regime.

    Starts after the last time the mean exceeds ``plateau_level + 2`` and ends
    before the mean comes within ``end_gap`` of the floor.
    """
    t = np.asarray(t, dtype=float)
    mean = np.asarray(mean, dtype=float)
    level = floor if plateau_level is None else plateau_level
    above = np.flatnonzero(mean > level + 2.0)
    lo = int(above[-1]) + 1 if above.size else 0
    lo = max(lo, int(np.searchsorted(t, 0.0, side="right")))
    close = np.flatnonzero((mean - floor < end_gap) & (np.arange(mean.size) >= lo))
    hi = int(close[0]) if close.size else mean.size
    return lo, hi


def _loglin(t, y):
    A = np.vstack([np.ones_like(t), t]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    pred = A @ coef
    return coef, float(np.linalg.norm(np.log(y) - pred))


def fit_exponential(
    t: Sequence[float],
    series,
    floor: float,
    *,
    plateau_level: float | None = None,
    window: tuple[float, float] | None = None,
    min_points: int = 10,
    n_boot: int = 1000,
    seed: int = 0,
) -> FitResult:
    """Fit ``S - floor = A exp(-t / tau)`` by least squares on ``log(S - floor)``.

    With a trajectory matrix the errors come from ``n_boot`` resamples of the
    trajectories (window held fixed); with a 1D series they are the
    regression standard errors.
    """
    t = np.asarray(t, dtype=float)
    M = _as_matrix(series)
    mean = M.mean(axis=0)
    if window is None:
        lo, hi = select_fit_window(t, mean, floor, plateau_level)
    else:
        lo = int(np.searchsorted(t, window[0], side="left"))
        hi = int(np.searchsorted(t, window[1], side="right"))
    sel = np.arange(lo, hi)
    sel = sel[mean[sel] - floor > 0]
    if sel.size < min_points:
        raise FitError(f"only {sel.size} usable points in the fit window (need {min_points})")
    tt = t[sel]
    coef, resid = _loglin(tt, mean[sel] - floor)
    slope = coef[1]
    if slope >= 0:
        raise FitError("series is not decaying toward the floor in the fit window")
    tau = -1.0 / slope
    amp = math.exp(coef[0])
    if M.shape[0] > 1 and n_boot > 0:
        rng = np.random.default_rng(seed)
        taus, amps = [], []
        n = M.shape[0]
        for _ in range(n_boot):
            m = M[rng.integers(n, size=n)].mean(axis=0)[sel] - floor
            ok = m > 0
            if ok.sum() < 3:
                continue
            c, _ = _loglin(tt[ok], m[ok])
            if c[1] < 0:
                taus.append(-1.0 / c[1])
                amps.append(math.exp(c[0]))
        tau_err = float(np.std(taus, ddof=1)) if len(taus) > 1 else float("nan")
        amp_err = float(np.std(amps, ddof=1)) if len(amps) > 1 else float("nan")
    else:
        A = np.vstack([np.ones_like(tt), tt]).T
        dof = max(1, tt.size - 2)
        s2 = resid**2 / dof
        cov = s2 * np.linalg.inv(A.T @ A)
        tau_err = float(math.sqrt(cov[1, 1]) * tau**2)
        amp_err = float(math.sqrt(cov[0, 0]) * amp)
    return FitResult(
        "exponential_decay",
        {"A": amp, "tau": tau},
        {"A": amp_err, "tau": tau_err},
        (float(tt[0]), float(tt[-1])),
        resid,
        int(sel.size),
    )


def _double(t, A, B, tz, tx, floor):
    return floor + A * np.exp(-t / tz) + B * np.exp(-t / tx)


def fit_double_exponential(
    t: Sequence[float],
    series,
    floor: float,
    *,
    window: tuple[float, float] | None = None,
    p0: Sequence[float] | None = None,
    n_boot: int = 200,
    seed: int = 0,
) -> FitResult:
    """Fit ``S = floor + A exp(-t/tau_Z) + B exp(-t/tau_X)`` with ``tau_Z < tau_X``."""
    t = np.asarray(t, dtype=float)
    M = _as_matrix(series)
    mean = M.mean(axis=0)
    lo, hi = (0, t.size) if window is None else (
        int(np.searchsorted(t, window[0], side="left")),
        int(np.searchsorted(t, window[1], side="right")),
    )
    near = np.nonzero(mean[lo:hi] - floor < 0.1)[0]
    if near.size:
        hi = lo + int(near[0])  # same end rule as the single fit: stop at the floor
    tt, yy = t[lo:hi], mean[lo:hi]
    if tt.size < 6:
        raise FitError("need at least 6 points for a double exponential")
    if p0 is None:
        excess = np.maximum(yy - floor, 1e-12)
        half = tt.size // 2
        c_late, _ = _loglin(tt[half:], np.maximum(excess[half:], 1e-12))
        tx = -1.0 / c_late[1] if c_late[1] < 0 else tt[-1]
        B = math.exp(c_late[0])
        A = max(excess[0] - B, 1e-3)
        p0 = (A, B, max(tx / 20.0, 1e-3), tx)
    f = lambda x, A, B, tz, tx: _double(x, A, B, tz, tx, floor)  # noqa: E731
    lower = (0.0, 0.0, 1e-9, 1e-9)
    try:
        popt, pcov = curve_fit(f, tt, yy, p0=p0, bounds=(lower, np.inf), maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"double exponential did not converge: {exc}") from exc
    A, B, tz, tx = popt
    if tz > tx:
        A, B, tz, tx = B, A, tx, tz
    errs = np.sqrt(np.clip(np.diag(pcov), 0, None))
    err = {"A": errs[0], "B": errs[1], "tau_Z": errs[2], "tau_X": errs[3]}
    if M.shape[0] > 1 and n_boot > 0:
        rng = np.random.default_rng(seed)
        samples = []
        for _ in range(n_boot):
            m = M[rng.integers(M.shape[0], size=M.shape[0])].mean(axis=0)[lo:hi]
            try:
                p, _ = curve_fit(f, tt, m, p0=(A, B, tz, tx), bounds=(lower, np.inf), maxfev=5000)
            except RuntimeError:
                continue
            if p[2] > p[3]:
                p = p[[1, 0, 3, 2]]
            samples.append(p)
        if len(samples) > 1:
            sd = np.std(np.array(samples), axis=0, ddof=1)
            err = {"A": sd[0], "B": sd[1], "tau_Z": sd[2], "tau_X": sd[3]}
    resid = float(np.linalg.norm(yy - f(tt, A, B, tz, tx)))
    return FitResult(
        "double_exponential",
        {"A": float(A), "B": float(B), "tau_Z": float(tz), "tau_X": float(tx)},
        {k: float(v) for k, v in err.items()},
        (float(tt[0]), float(tt[-1])),
        resid,
        int(tt.size),
    )


def _points(points) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    arr = [tuple(p) for p in points]
    L = np.array([p[0] for p in arr], dtype=float)
    tau = np.array([p[1] for p in arr], dtype=float)
    sig = np.array([p[2] for p in arr], dtype=float) if all(len(p) > 2 for p in arr) else None
    return L, tau, sig


def fit_scaling(points, model: str = "exp_in_L_to_Delta", delta: float = 1.0) -> ScalingResult:
    """Regress ``log tau`` on ``L**delta`` (rate) or on ``log L`` (exponent).

    ``points`` holds ``(L, tau)`` or ``(L, tau, tau_err)``; with errors the
    regression is weighted by ``tau / tau_err``.
    """
    L, tau, sig = _points(points)
    if L.size < 3:
        raise FitError("need at least 3 system sizes")
    if (tau <= 0).any() or not np.isfinite(tau).all():
        raise FitError("timescales must be positive and finite")
    if model == "exp_in_L_to_Delta":
        x = L**delta
    elif model == "power_law_in_L":
        x = np.log(L)
        delta = None
    else:
        raise FitError(f"unknown scaling model {model!r}")
    y = np.log(tau)
    w = np.ones_like(y) if sig is None or not np.all(sig > 0) else tau / sig
    A = np.vstack([np.ones_like(x), x]).T * w[:, None]
    coef, *_ = np.linalg.lstsq(A, y * w, rcond=None)
    resid = y * w - A @ coef
    dof = L.size - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof if sig is None else max(1.0, float(resid @ resid) / dof)
        cov = s2 * np.linalg.inv(A.T @ A)
        err = float(math.sqrt(max(cov[1, 1], 0.0)))
    else:
        err = float("nan")
    return ScalingResult(model, float(coef[1]), err, float(coef[0]), delta, tuple(zip(L.tolist(), tau.tolist())))


def fit_dynamical_exponent(taus: Mapping[int, float] | Iterable) -> ScalingResult:
    """``z`` from ``tau(L) ~ L**z``; accepts ``{L: tau}``, ``{L: FitResult}`` or point tuples."""
    if isinstance(taus, Mapping):
        pts = []
        for L, v in sorted(taus.items()):
            if isinstance(v, FitResult):
                pts.append((L, v.tau, v.errors.get("tau", float("nan"))))
            else:
                pts.append((L, float(v)))
        if any(len(p) == 3 and not np.isfinite(p[2]) for p in pts):
            pts = [p[:2] for p in pts]
    else:
        pts = list(taus)
    return fit_scaling(pts, model="power_law_in_L")


def collapse_curves(curves: Mapping[int, tuple[np.ndarray, np.ndarray]], z: float, density: bool = True, dim: int = 2):
    """Rescale ``{L: (t, S)}`` to ``(t / L**z, S / L**dim)`` for overlay."""
    out = {}
    for L, (t, S) in curves.items():
        out[L] = (np.asarray(t) / L**z, np.asarray(S) / (L**dim if density else 1))
    return out


def _window_slopes(logt: np.ndarray, S: np.ndarray, half: float) -> np.ndarray:
    """Least-squares slope of S against log10 t over a centered window."""
    out = np.full(S.size, np.inf)
    for i in range(S.size):
        sel = np.abs(logt - logt[i]) <= half + 1e-12
        if sel.sum() < 2:
            continue
        x = logt[sel]
        y = S[sel]
        xm = x - x.mean()
        den = float(xm @ xm)
        if den > 0:
            out[i] = float(xm @ (y - y.mean())) / den
    return out


def detect_plateaus(
    t: Sequence[float], S: Sequence[float], *, threshold: float = 0.05, min_dwell: float = 0.5
) -> list[Plateau]:
    """Plateaus as ``(level, t_start, t_end)`` in time order.

    A point is flat when the slope of ``S`` against ``log10 t``, estimated
    over a centered window of ``min_dwell`` decades, has magnitude below
    ``threshold`` bits per decade.  Runs of flat points spanning at least
    ``min_dwell`` decades are plateaus; the level is their mean.  Only
    ``t > 0`` is used, so a uniform rescaling of time leaves the levels
    unchanged.
    """
    t = np.asarray(t, dtype=float)
    S = np.asarray(S, dtype=float)
    pos = t > 0
    t, S = t[pos], S[pos]
    if t.size < 3:
        return []
    logt = np.log10(t)
    slopes = _window_slopes(logt, S, min_dwell / 2.0)
    flat = np.abs(slopes) < threshold
    out: list[Plateau] = []
    i = 0
    while i < t.size:
        if not flat[i]:
            i += 1
            continue
        j = i
        while j + 1 < t.size and flat[j + 1]:
            j += 1
        if logt[j] - logt[i] >= min_dwell - 1e-12:
            out.append(Plateau(float(S[i : j + 1].mean()), float(t[i]), float(t[j])))
        i = j + 1
    return out


@dataclass
class SweepRow:
    L: int
    rates: dict[str, float]
    t_eval: float
    mean: float
    stderr: float
    n: int
    control: float = field(default=float("nan"))


def sweep_order_parameter(
    build: Callable[[int], object],
    sizes: Sequence[int],
    rate_grid: Sequence[Mapping[str, float]],
    t_eval: Callable[[int], float] | float,
    n_trajectories: int,
    *,
    seed: int = 0,
    control: Callable[[Mapping[str, float]], float] | None = None,
    workers: int | None = None,
    **config_kwargs,
) -> list[SweepRow]:
    """Mean and stderr of ``S_N(t_eval)`` for every (size, rate) grid point.

    ``t_eval`` may be a function of ``L`` such as ``lambda L: L**3``.  Each
    grid point gets its own seed derived from ``(seed, size index, rate index)``.
    """
    from .dynamics import DynamicsConfig, run_ensemble

    rows = []
    for si, L in enumerate(sizes):
        code = build(L)
        te = float(t_eval(L) if callable(t_eval) else t_eval)
        for ri, rates in enumerate(rate_grid):
            sub = int(np.random.SeedSequence([seed, si, ri]).generate_state(1, np.uint64)[0])
            cfg = DynamicsConfig(
                code,
                dict(rates),
                t_max=te,
                record_times=[0.0, te],
                seed=sub,
                n_trajectories=n_trajectories,
                track_stabilizers=False,
                **config_kwargs,
            )
            ens = run_ensemble(cfg, workers=workers)
            rows.append(
                SweepRow(
                    L,
                    dict(rates),
                    te,
                    float(ens.mean()[-1]),
                    float(ens.stderr()[-1]),
                    ens.n,
                    float(control(rates)) if control else float("nan"),
                )
            )
    return rows


def crossing_points(rows: Sequence[SweepRow], scale: Callable[[int], float] = lambda L: L**2) -> list[dict]:
    """Crossings of ``S / scale(L)`` versus the control parameter between consecutive sizes.

    Curves are linearly interpolated; every sign change of the difference
    yields one crossing ``{"L1", "L2", "p"}``.
    """
    by_L: dict[int, list[SweepRow]] = {}
    for r in rows:
        by_L.setdefault(r.L, []).append(r)
    sizes = sorted(by_L)
    out = []
    for a, b in zip(sizes, sizes[1:]):
        ra = sorted(by_L[a], key=lambda r: r.control)
        rb = sorted(by_L[b], key=lambda r: r.control)
        xa = np.array([r.control for r in ra])
        xb = np.array([r.control for r in rb])
        if not np.allclose(xa, xb):
            raise FitError("sizes were swept on different grids")
        d = np.array([r.mean / scale(a) for r in ra]) - np.array([r.mean / scale(b) for r in rb])
        for i in range(d.size - 1):
            if d[i] == 0:
                out.append({"L1": a, "L2": b, "p": float(xa[i])})
            elif d[i] * d[i + 1] < 0:
                p = xa[i] + (xa[i + 1] - xa[i]) * d[i] / (d[i] - d[i + 1])
                out.append({"L1": a, "L2": b, "p": float(p)})
    return out


def first_passage_times(t: np.ndarray, M: np.ndarray, level: float) -> np.ndarray:
    """Per-trajectory first recorded time with ``S <= level`` (``inf`` if never)."""
    t = np.asarray(t, dtype=float)
    M = _as_matrix(M)
    hit = M <= level
    out = np.full(M.shape[0], np.inf)
    any_hit = hit.any(axis=1)
    out[any_hit] = t[np.argmax(hit[any_hit], axis=1)]
    return out
