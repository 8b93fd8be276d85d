"""Deterministic time schedules: cumulative injection/removal curves and quantile curves.

``CumulativeSchedule`` covers I, J (and J_t = t ^ 1); ``QuantileSchedule``
covers the removal-quantile data q(t) = (1 - t) Q(t) of the quantile model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

KINDS = ("linear", "piecewise_linear", "power", "capped")


@dataclass(frozen=True)
class CumulativeSchedule:
    """Continuous nondecreasing curve with value 0 at t = 0.

    kinds:
      linear            rate * t
      piecewise_linear  interpolation through (times, values); the last slope
                        is continued past the final breakpoint
      power             scale * t**exponent
      capped            scale * min(t, cap)
    """

    kind: str
    rate: float = 0.0
    times: tuple = ()
    values: tuple = ()
    scale: float = 1.0
    exponent: float = 1.0
    cap: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "linear" and self.rate < 0:
            raise ValueError("linear rate must be nonnegative")
        if self.kind == "piecewise_linear":
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.size < 2 or t.shape != v.shape:
                raise ValueError("piecewise_linear needs >= 2 matching breakpoints")
            if t[0] != 0.0 or v[0] != 0.0:
                raise ValueError("piecewise_linear must start at (0, 0)")
            if np.any(np.diff(t) <= 0) or np.any(np.diff(v) < 0):
                raise ValueError("breakpoint times must increase and values must not decrease")
        if self.kind == "power" and (self.exponent <= 0 or self.scale < 0):
            raise ValueError("power schedule needs exponent > 0 and scale >= 0")
        if self.kind == "capped" and (self.cap < 0 or self.scale < 0):
            raise ValueError("capped schedule needs cap >= 0 and scale >= 0")

    # constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "CumulativeSchedule":
        return cls("linear", rate=0.0)

    @classmethod
    def linear(cls, rate: float) -> "CumulativeSchedule":
        return cls("linear", rate=float(rate))

    @classmethod
    def piecewise(cls, times, values) -> "CumulativeSchedule":
        return cls("piecewise_linear", times=tuple(map(float, times)), values=tuple(map(float, values)))

    @classmethod
    def power(cls, scale: float, exponent: float) -> "CumulativeSchedule":
        return cls("power", scale=float(scale), exponent=float(exponent))

    @classmethod
    def capped(cls, cap: float = 1.0, scale: float = 1.0) -> "CumulativeSchedule":
        return cls("capped", cap=float(cap), scale=float(scale))

    @classmethod
    def from_config(cls, cfg: dict) -> "CumulativeSchedule":
        cfg = dict(cfg)
        kind = cfg.pop("kind")
        if kind == "zero":
            return cls.zero()
        if kind == "piecewise_linear":
            return cls.piecewise(cfg["times"], cfg["values"])
        return cls(kind, **cfg)

    def to_config(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "rate": self.rate}
        if self.kind == "piecewise_linear":
            return {"kind": "piecewise_linear", "times": list(self.times), "values": list(self.values)}
        if self.kind == "power":
            return {"kind": "power", "scale": self.scale, "exponent": self.exponent}
        return {"kind": "capped", "cap": self.cap, "scale": self.scale}

    # evaluation -------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("schedules are defined for t >= 0")
        if self.kind == "linear":
            out = self.rate * t
        elif self.kind == "power":
            out = self.scale * np.power(t, self.exponent)
        elif self.kind == "capped":
            out = self.scale * np.minimum(t, self.cap)
        else:
            tt = np.asarray(self.times)
            vv = np.asarray(self.values)
            slope = (vv[-1] - vv[-2]) / (tt[-1] - tt[-2])
            out = np.where(t <= tt[-1], np.interp(t, tt, vv), vv[-1] + slope * (t - tt[-1]))
        return float(out) if out.ndim == 0 else out

    @property
    def is_zero(self) -> bool:
        if self.kind == "linear":
            return self.rate == 0.0
        if self.kind == "piecewise_linear":
            return all(v == 0.0 for v in self.values)
        return self.scale == 0.0 or (self.kind == "capped" and self.cap == 0.0)

    def breakpoints(self, horizon: float) -> np.ndarray:
        """Kinks of the curve inside [0, horizon]."""
        if self.kind == "piecewise_linear":
            t = np.asarray(self.times)
            return t[t <= horizon]
        if self.kind == "capped" and self.cap <= horizon:
            return np.array([0.0, self.cap])
        return np.array([0.0])

    def inverse(self, y):
        """Generalized inverse inf{t >= 0 : S(t) >= y} (inf of empty set is +inf)."""
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, np.inf)
        pos = y > 0
        out[~pos] = 0.0
        if self.kind == "linear":
            if self.rate > 0:
                out[pos] = y[pos] / self.rate
        elif self.kind == "power":
            if self.scale > 0:
                out[pos] = np.power(y[pos] / self.scale, 1.0 / self.exponent)
        elif self.kind == "capped":
            ok = pos & (y <= self.scale * self.cap)
            if self.scale > 0:
                out[ok] = y[ok] / self.scale
        else:
            tt = np.asarray(self.times)
            vv = np.asarray(self.values)
            slope = (vv[-1] - vv[-2]) / (tt[-1] - tt[-2])
            for idx in np.nonzero(pos)[0]:
                target = y[idx]
                if target <= vv[-1]:
                    k = int(np.searchsorted(vv, target, side="left"))
                    # vv[k-1] < target <= vv[k]; segment k-1 has positive slope
                    t0, t1, v0, v1 = tt[k - 1], tt[k], vv[k - 1], vv[k]
                    out[idx] = t0 + (t1 - t0) * (target - v0) / (v1 - v0)
                elif slope > 0:
                    out[idx] = tt[-1] + (target - vv[-1]) / slope
        return float(out) if out.ndim == 0 else out

    def counting_times(self, n_scale: int, count: int) -> np.ndarray:
        """Jump times of t -> floor(n_scale * S(t)) for jumps 1..count.

        The returned times satisfy floor(n_scale * S(t_k)) >= k exactly in
        floating point, and the previous representable time does not.
        """
        k = np.arange(1, count + 1, dtype=float)
        t = np.atleast_1d(self.inverse(k / n_scale)).astype(float)
        finite = np.isfinite(t)
        for _ in range(64):
            low = finite & (np.floor(n_scale * np.atleast_1d(self(np.where(finite, t, 0.0)))) < k)
            if not low.any():
                break
            t[low] = np.nextafter(t[low], np.inf)
        for _ in range(64):
            prev = np.nextafter(t, -np.inf)
            prev = np.where(prev < 0, 0.0, prev)
            early = finite & (t > 0) & (np.floor(n_scale * np.atleast_1d(self(np.where(finite, prev, 0.0)))) >= k)
            if not early.any():
                break
            t[early] = prev[early]
        return t


def time_mesh(horizon: float, *schedules: CumulativeSchedule, n: int = 4001) -> np.ndarray:
    """Fine mesh on [0, horizon] that includes every schedule breakpoint."""
    pts = [np.linspace(0.0, horizon, n)]
    for s in schedules:
        pts.append(s.breakpoints(horizon))
    return np.unique(np.concatenate(pts))


def epsilon0(I: CumulativeSchedule, J: CumulativeSchedule, horizon: float) -> float:
    """inf over [0, horizon] of 1 + I_t - J_t, evaluated on a mesh plus breakpoints."""
    t = time_mesh(horizon, I, J)
    return float(np.min(1.0 + I(t) - J(t)))


Q_KINDS = ("Q_piecewise_linear", "q_piecewise_linear", "callable")


@dataclass(frozen=True)
class QuantileSchedule:
    """Removal-quantile data for the quantile model, stored as q(t) = (1 - t) Q(t).

    ``Q_piecewise_linear`` interpolates Q through (times, values) on [0, 1];
    ``q_piecewise_linear`` interpolates q directly; ``callable`` wraps an
    arbitrary continuous q and falls back to dense sampling for bounds.
    """

    kind: str
    times: tuple = (0.0, 1.0)
    values: tuple = (0.0, 0.0)
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in Q_KINDS:
            raise ValueError(f"unknown quantile kind {self.kind!r}")
        if self.kind != "callable":
            t = np.asarray(self.times, float)
            if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
                raise ValueError("quantile breakpoints must increase from 0 to 1")
            if len(self.times) != len(self.values):
                raise ValueError("times and values must have equal length")
        elif self.func is None:
            raise ValueError("callable quantile schedule needs func")

    @classmethod
    def constant_Q(cls, value: float) -> "QuantileSchedule":
        return cls("Q_piecewise_linear", (0.0, 1.0), (float(value), float(value)))

    @classmethod
    def from_config(cls, cfg: dict) -> "QuantileSchedule":
        kind = cfg["kind"]
        if kind == "Q_constant":
            return cls.constant_Q(cfg["value"])
        return cls(kind, tuple(map(float, cfg["times"])), tuple(map(float, cfg["values"])))

    def to_config(self) -> dict:
        if self.kind == "callable":
            raise ValueError("callable schedules cannot be serialized")
        return {"kind": self.kind, "times": list(self.times), "values": list(self.values)}

    def q(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, 0.0, 1.0)
        if self.kind == "Q_piecewise_linear":
            out = (1.0 - tc) * np.interp(tc, self.times, self.values)
        elif self.kind == "q_piecewise_linear":
            out = np.interp(tc, self.times, self.values)
        else:
            out = np.asarray(np.vectorize(self.func, otypes=[float])(tc))
        out = np.where(t >= 1.0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    __call__ = q

    def Q(self, t):
        """Quantile level Q(t) = q(t) / (1 - t) for t < 1."""
        t = np.asarray(t, dtype=float)
        if self.kind == "Q_piecewise_linear":
            out = np.interp(np.clip(t, 0.0, 1.0), self.times, self.values)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(t < 1.0, np.asarray(self.q(t)) / (1.0 - t), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def reflected(self) -> "QuantileSchedule":
        """The data 1 - t - q(t) obtained by reflecting space."""
        if self.kind == "Q_piecewise_linear":
            return QuantileSchedule(self.kind, self.times, tuple(1.0 - v for v in self.values))
        if self.kind == "q_piecewise_linear":
            return QuantileSchedule(self.kind, self.times, tuple(1.0 - t - v for t, v in zip(self.times, self.values)))
        f = self.func
        return QuantileSchedule("callable", func=lambda s: 1.0 - s - f(s))

    def validate(self, n: int = 10001) -> None:
        t = np.linspace(0.0, 1.0, n)[:-1]
        qv = np.asarray(self.q(t))
        if np.any(qv < -1e-12) or np.any(qv > 1.0 - t + 1e-12):
            raise ValueError("need 0 <= q(t) <= 1 - t on [0, 1)")

    def bounds(self, a: float, b: float) -> tuple[float, float]:
        """(min, max) of q over [a, b]."""
        if b < a:
            raise ValueError("empty interval")
        if self.kind == "callable":
            return _sampled_bounds(self.q, a, b)
        cand = [a, b]
        tt = np.asarray(self.times)
        cand.extend(tt[(tt > a) & (tt < b)].tolist())
        if self.kind == "Q_piecewise_linear":
            # q is quadratic on each linear piece of Q; include interior vertices
            vv = np.asarray(self.values)
            for k in range(len(tt) - 1):
                beta = (vv[k + 1] - vv[k]) / (tt[k + 1] - tt[k])
                alpha = vv[k] - beta * tt[k]
                if beta != 0.0:
                    ts = (beta - alpha) / (2.0 * beta)
                    if max(a, tt[k]) < ts < min(b, tt[k + 1]):
                        cand.append(ts)
        vals = np.asarray(self.q(np.asarray(cand)))
        return float(vals.min()), float(vals.max())


def _sampled_bounds(f, a, b, n=1025, rounds=4):
    t = np.linspace(a, b, n)
    v = np.asarray(f(t), dtype=float)
    lo, hi = float(v.min()), float(v.max())
    for target in ("min", "max"):
        k = int(np.argmin(v) if target == "min" else np.argmax(v))
        left, right = t[max(k - 1, 0)], t[min(k + 1, n - 1)]
        for _ in range(rounds):
            tt = np.linspace(left, right, 257)
            vv = np.asarray(f(tt), dtype=float)
            j = int(np.argmin(vv) if target == "min" else np.argmax(vv))
            lo, hi = min(lo, float(vv.min())), max(hi, float(vv.max()))
            left, right = tt[max(j - 1, 0)], tt[min(j + 1, 256)]
    return lo, hi


def floor_count(n_scale: int, value) -> np.ndarray:
    return np.floor(n_scale * np.asarray(value, dtype=float)).astype(np.int64)


def ceil_conv(x: float) -> int:
    """Ceiling with the convention ceil(0) = 1."""
    c = math.ceil(x)
    return max(c, 1)
