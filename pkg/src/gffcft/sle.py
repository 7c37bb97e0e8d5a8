"""Chordal SLE(kappa) Loewner simulator and Monte Carlo harness.

The driving path is xi_t = sqrt(kappa) B_t, sampled on a uniform grid from
a counter-based Philox stream per path (key = [seed, 0]) with a fixed
Box-Muller convention, so runs are reproducible bit-for-bit for a given
seed regardless of how paths are partitioned across workers.

Discretization: over each step the driver is frozen at its left endpoint
and the hull grows by an exact vertical slit,

    w  <-  sqrt(w^2 + 4 dt)   (branch with Im >= 0),   then   w -= d xi,

which has exact half-plane capacity per step.  The derivative flow
composes w' <- w' * w / sqrt(w^2 + 4 dt) and the Schwarzian accumulates
through the cocycle rule.  A point is swallowed when |w| drops below
eps_swallow; steps with |w|^2 < 8 dt are refined locally (dt/16).
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import HorizonExhaustedError, InputError

EPS_SWALLOW = 1e-3
R_ESCAPE = 50.0
REFINE = 16


# ---------------------------------------------------------------------------
# reproducible normals


def path_normals(seed: int, count: int) -> np.ndarray:
    """Standard normals from the path's Philox substream via Box-Muller.

    normals[2i]   = sqrt(-2 log(1 - u1_i)) cos(2 pi u2_i)
    normals[2i+1] = sqrt(-2 log(1 - u1_i)) sin(2 pi u2_i)
    """
    gen = np.random.Generator(np.random.Philox(key=np.array([seed % 2**64, 0],
                                                            dtype=np.uint64)))
    m = (count + 1) // 2
    u1 = gen.random(m)
    u2 = gen.random(m)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    th = (2.0 * np.pi) * u2
    out = np.empty(2 * m)
    out[0::2] = r * np.cos(th)
    out[1::2] = r * np.sin(th)
    return out[:count]


@dataclass
class DrivingPath:
    """xi_k = sqrt(kappa) B_{k dt} on a uniform grid, xi_0 = 0."""

    kappa: float
    dt: float
    steps: int
    values: np.ndarray
    seed: int

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def sample_driving(kappa: float, T: float, dt: float, seed: int) -> DrivingPath:
    if T <= 0 or not 0 < dt <= T:
        raise InputError("need T > 0 and dt in (0, T]")
    if kappa < 0:
        raise InputError("kappa must be nonnegative")
    steps = math.ceil(T / dt)
    vals = np.empty(steps + 1)
    vals[0] = 0.0
    scale = math.sqrt(kappa * dt)
    if scale == 0.0:
        vals[1:] = 0.0
    else:
        np.cumsum(scale * path_normals(seed, steps), out=vals[1:])
    return DrivingPath(kappa, dt, steps, vals, seed)


# ---------------------------------------------------------------------------
# single-point flow


@dataclass
class FlowTracker:
    z0: complex
    w: complex
    swallowed: bool = False
    tau: Optional[float] = None
    wprime: complex = 1.0 + 0j
    schwarzian: complex = 0j
    history: Optional[list] = None


def _slit_schwarzian(w, s):
    # Schwarzian of h(w) = sqrt(w^2 + s) (works on scalars and arrays)
    return -3.0 * s * (2.0 * w * w + s) / (2.0 * w * w * (w * w + s) ** 2)


def _step_interior(w, wp, sw, dt, dxi, track_aux: bool):
    """One frozen-driver slit step on complex state (vectorized)."""
    s = np.sqrt(w * w + 4.0 * dt)
    s = np.where(s.imag < 0, -s, s)
    if track_aux:
        sw = _slit_schwarzian(w, 4.0 * dt) * wp * wp + sw
        wp = wp * (w / s)
    return s - dxi, wp, sw


def flow_point(path: DrivingPath, z: complex, eps_swallow: float = EPS_SWALLOW,
               record: bool = False, track_aux: bool = False) -> FlowTracker:
    """Advance one point through the whole driving path (or until swallowed)."""
    z = complex(z)
    if z == 0:
        raise InputError("cannot flow the SLE seed point z = 0")
    tr = FlowTracker(z0=z, w=z, history=[(0.0, z)] if record else None)
    dt = path.dt
    inc = path.increments
    w, wp, sw = z, 1.0 + 0j, 0j
    for k in range(path.steps):
        nsub, h = (REFINE, dt / REFINE) if abs(w) ** 2 < 8.0 * dt else (1, dt)
        swallowed = False
        for i in range(nsub):
            s = cmath.sqrt(w * w + 4.0 * h)
            if s.imag < 0:
                s = -s
            if track_aux:
                sw = _slit_schwarzian(w, 4.0 * h) * wp * wp + sw
                wp = wp * (w / s)
            w = s
            if abs(w) < eps_swallow:
                tr.swallowed = True
                tr.tau = k * dt + (i + 1) * h
                swallowed = True
                break
        w = w - inc[k]
        if not swallowed and abs(w) < eps_swallow:
            tr.swallowed = True
            tr.tau = (k + 1) * dt
            swallowed = True
        if record:
            tr.history.append(((k + 1) * dt, w))
        if swallowed:
            break
    tr.w, tr.wprime, tr.schwarzian = w, wp, sw
    return tr


# ---------------------------------------------------------------------------
# batched flows


class _NormalStream:
    """Streaming view of one path's Philox Box-Muller normals.

    Drawing blocks of even size reproduces path_normals(seed, total) exactly.
    """

    def __init__(self, seed: int):
        self._gen = np.random.Generator(np.random.Philox(
            key=np.array([seed % 2**64, 0], dtype=np.uint64)))

    def take(self, count: int) -> np.ndarray:
        m = (count + 1) // 2
        u1 = self._gen.random(m)
        u2 = self._gen.random(m)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        th = (2.0 * np.pi) * u2
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(th)
        out[1::2] = r * np.sin(th)
        return out[:count]


def _chunk_increments(kappa, dt, steps, seed_base, lo, hi):
    scale = math.sqrt(kappa * dt)
    out = np.empty((hi - lo, steps))
    for i in range(lo, hi):
        out[i - lo] = scale * path_normals(seed_base + i, steps)
    return out


def _classify_args(args: np.ndarray) -> np.ndarray:
    """1 = left (arg in (pi/2, pi)), 2 = right (arg in (0, pi/2))."""
    return np.where(args > math.pi / 2.0, 1, 2).astype(np.int8)


def _left_passage_chunk(kappa, z, dt, stage_steps, eps, band, seed_base, lo, hi):
    """Staged flow of one chunk of paths; returns per-path status.

    Status codes: 1 left, 2 right, 0 undecided after the final stage.  For
    kappa > 4 a swallowed path is classified by its pre-step argument (the
    side is settled at the swallow time); for kappa <= 4 interior points are
    never swallowed, so small |w| episodes are near-tip excursions and the
    flow simply continues through them.  Surviving paths are classified at
    stage boundaries once arg w leaves the ambiguity band, and unresolved
    ones continue into the next, longer stage.
    """
    n = hi - lo
    streams = [_NormalStream(seed_base + i) for i in range(lo, hi)]
    w = np.full(n, complex(z))
    w_prev = w.copy()
    status = np.zeros(n, dtype=np.int8)
    scale = math.sqrt(kappa * dt)
    eps2 = eps * eps
    swallowing = kappa > 4.0
    lo_band, hi_band = band
    for steps in stage_steps:
        if not (status == 0).any():
            break
        block = 4096
        done_steps = 0
        while done_steps < steps:
            nsteps = min(block, steps - done_steps)
            inc = np.empty((n, nsteps))
            for i, st in enumerate(streams):
                inc[i] = st.take(nsteps)
            if scale != 0.0:
                inc *= scale
            for k in range(nsteps):
                alive = status == 0
                if swallowing:
                    np.copyto(w_prev, w, where=alive)
                absw2 = w.real * w.real + w.imag * w.imag
                need = alive & (absw2 < 8.0 * dt)
                s = np.sqrt(w * w + 4.0 * dt)
                s = np.where(s.imag < 0, -s, s)
                if need.any():
                    wr = w[need]
                    for _ in range(REFINE):
                        sr = np.sqrt(wr * wr + 4.0 * dt / REFINE)
                        wr = np.where(sr.imag < 0, -sr, sr)
                    s[need] = wr
                w = np.where(alive, s - inc[:, k], w)
                if swallowing:
                    absw2 = w.real * w.real + w.imag * w.imag
                    swallowed = alive & (absw2 < eps2)
                    if swallowed.any():
                        status[swallowed] = _classify_args(np.angle(w_prev[swallowed]))
            done_steps += nsteps
        # stage boundary: classify paths whose argument left the band
        alive = status == 0
        if alive.any():
            args = np.angle(w[alive])
            decided = (args <= lo_band) | (args >= hi_band)
            idx = np.flatnonzero(alive)[decided]
            status[idx] = _classify_args(np.angle(w[idx]))
    status[~np.isfinite(w.real)] = 0
    return status


def left_passage(path: DrivingPath, z: complex, eps_swallow: float = EPS_SWALLOW,
                 r_escape: float = R_ESCAPE) -> str:
    """Classify one path: is z to the left of the trace?

    The flow runs until escape (|w| >= r_escape |z|), swallowing, or the end
    of the path; the side is read off the last well-resolved argument of w.
    """
    if path.kappa > 8.0:
        raise InputError("left passage needs kappa <= 8")
    z = complex(z)
    dt = path.dt
    inc = path.increments
    w = complex(z)
    last_arg = cmath.phase(z)
    rlim = r_escape * abs(z)
    for k in range(path.steps):
        nsub, h = (REFINE, dt / REFINE) if abs(w) ** 2 < 8.0 * dt else (1, dt)
        for _ in range(nsub):
            s = cmath.sqrt(w * w + 4.0 * h)
            w = -s if s.imag < 0 else s
        w -= inc[k]
        if abs(w) < eps_swallow:
            break
        last_arg = cmath.phase(w)
        if abs(w) >= rlim:
            break
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        return "undecided"
    return "left" if last_arg > math.pi / 2.0 else "right"


# ---------------------------------------------------------------------------
# Welford accumulation


@dataclass
class WelfordState:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: float):
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def merge(self, other: "WelfordState"):
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return
        n = self.n + other.n
        d = other.mean - self.mean
        self.mean += d * other.n / n
        self.m2 += other.m2 + d * d * self.n * other.n / n
        self.n = n

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return math.inf
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


@dataclass
class EstimateReport:
    mean: float
    stderr: float
    n_paths: int
    seed_base: int
    n_undecided: int = 0
    n_errors: int = 0

    @property
    def variance(self) -> float:
        return (self.stderr ** 2) * self.n_paths


def _reduce_values(values: np.ndarray, seed_base: int, n_undecided=0, n_errors=0) -> EstimateReport:
    """Single sequential Welford pass in path order (partition independent)."""
    acc = WelfordState()
    for x in values:
        acc.add(float(x))
    return EstimateReport(acc.mean, acc.stderr, acc.n, seed_base,
                          n_undecided=n_undecided, n_errors=n_errors)


def estimate(fn: Callable[[int], float], n_paths: int, seed_base: int,
             workers: int = 1, chunk: int = 256) -> EstimateReport:
    """Mean/stderr of fn(seed) over seeds seed_base..seed_base+n_paths-1.

    fn may return NaN to flag a per-path error; NaN paths are excluded and
    counted.  The reduction is a single pass in path order, so the report is
    bit-identical for any worker count.
    """
    if n_paths < 1:
        raise InputError("need n_paths >= 1")
    values = np.empty(n_paths)

    def run(lo, hi):
        for i in range(lo, hi):
            values[i] = fn(seed_base + i)

    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda se: run(*se), bounds))
    else:
        for lo, hi in bounds:
            run(lo, hi)
    ok = np.isfinite(values)
    n_err = int((~ok).sum())
    return _reduce_values(values[ok], seed_base, n_errors=n_err)


# ---------------------------------------------------------------------------
# estimators


def _ambiguity_band(kappa: float, delta: float) -> tuple:
    """Arguments where the conditional left-probability is within delta of 0/1."""
    from .observables import schramm_left_passage

    lo, hi = 1e-9, math.pi / 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if schramm_left_passage(kappa, mid) < delta:
            lo = mid
        else:
            hi = mid
    return lo, math.pi - lo


def left_passage_estimate(kappa: float, z: complex, n_paths: int, seed_base: int,
                          dt: float = 1e-3, horizon: float | None = None,
                          eps_swallow: float = EPS_SWALLOW, stages: int = 4,
                          grow: float = 4.0, band_delta: float = 5e-4,
                          workers: int = 1, chunk: int = 4096) -> EstimateReport:
    """Monte Carlo P(z left of the trace), vectorized over paths.

    A path is classified once its conditional left-probability (a function
    of arg w_t through the left-passage integral) is within ``band_delta``
    of 0 or 1, or when the point is swallowed; unresolved paths extend their
    horizon by ``grow`` per stage and count as undecided after the last.
    """
    if kappa > 8.0:
        raise InputError("left passage needs kappa <= 8")
    z = complex(z)
    horizon = horizon if horizon is not None else 25.0 * abs(z) ** 2
    base = math.ceil(horizon / dt)
    stage_steps = []
    total = 0
    for s in range(stages):
        target = int(base * grow ** s)
        add = 2 * ((target - total + 1) // 2)  # even blocks keep streams aligned
        stage_steps.append(add)
        total += add
    band = _ambiguity_band(kappa, band_delta)
    status = np.empty(n_paths, dtype=np.int8)

    def run(lo, hi):
        status[lo:hi] = _left_passage_chunk(kappa, z, dt, stage_steps, eps_swallow,
                                            band, seed_base, lo, hi)

    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda se: run(*se), bounds))
    else:
        for lo, hi in bounds:
            run(lo, hi)
    decided = status != 0
    vals = (status[decided] == 1).astype(np.float64)
    return _reduce_values(vals, seed_base, n_undecided=int((~decided).sum()))


def _refined_slit_real(wa: np.ndarray, dt: float) -> np.ndarray:
    """Slit map on real tracks, with dt/16 substeps where under-resolved."""
    need = wa * wa < 8.0 * dt
    out = np.sqrt(wa * wa + 4.0 * dt)
    if need.any():
        wr = wa[need]
        for _ in range(REFINE):
            wr = np.sqrt(wr * wr + 4.0 * dt / REFINE)
        out[need] = wr
    return out


def _boundary_hit_chunk(kappa, x1, x2, dt, steps, eps, seed_base, lo, hi):
    """Swallow-step indices (in units of dt) for two points on the real axis.

    The slit map alone cannot swallow a positive boundary point; absorption
    happens through the driver recentering at the end of a step, so both
    points are swallowed at step resolution with a shared driver.
    """
    n = hi - lo
    inc = _chunk_increments(kappa, dt, steps, seed_base, lo, hi)
    tau = np.full((2, n), np.inf)
    w = np.vstack([np.full(n, float(x1)), np.full(n, float(x2))])
    alive = np.ones((2, n), dtype=bool)
    for k in range(steps):
        if not alive.any():
            break
        for pi in range(2):
            m = alive[pi]
            if not m.any():
                continue
            wa = _refined_slit_real(w[pi, m], dt) - inc[m, k]
            idx = np.flatnonzero(m)
            gone = wa <= eps
            if gone.any():
                tau[pi, idx[gone]] = k + 1.0
                alive[pi, idx[gone]] = False
            w[pi, idx] = wa
    return tau


def boundary_hit_estimate(kappa: float, x: float, eps_frac: float, n_paths: int,
                          seed_base: int, dt: float = 1e-3, horizon: float | None = None,
                          eps_swallow: float = EPS_SWALLOW, workers: int = 1,
                          chunk: int = 1024) -> EstimateReport:
    """Monte Carlo P(trace hits [x - eps, x]) with eps = eps_frac * x.

    The event is a strict swallow-time separation: tau(x - eps) < tau(x).
    Paths on which either point outlives the horizon are counted as errors.
    """
    if not 4.0 < kappa < 8.0:
        raise InputError("boundary hitting needs kappa in (4, 8)")
    if not 0.0 < eps_frac < 1.0:
        raise InputError("need eps/x in (0, 1)")
    x1 = x * (1.0 - eps_frac)
    horizon = horizon if horizon is not None else 100.0 * x * x
    steps = math.ceil(horizon / dt)
    hit = np.empty(n_paths)

    def run(lo, hi):
        tau = _boundary_hit_chunk(kappa, x1, x, dt, steps, eps_swallow, seed_base, lo, hi)
        vals = np.where(np.isfinite(tau[0]) & np.isfinite(tau[1]),
                        (tau[0] < tau[1]).astype(np.float64), np.nan)
        hit[lo:hi] = vals

    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda se: run(*se), bounds))
    else:
        for lo, hi in bounds:
            run(lo, hi)
    ok = np.isfinite(hit)
    return _reduce_values(hit[ok], seed_base, n_errors=int((~ok).sum()))


def boundary_hit(path: DrivingPath, x: float, eps: float,
                 eps_swallow: float = EPS_SWALLOW) -> bool:
    """True iff the trace hits [x - eps, x] along this driving path."""
    if not 0 < eps < x:
        raise InputError("need 0 < eps < x")
    t1 = flow_point(path, x - eps, eps_swallow)
    t2 = flow_point(path, x, eps_swallow)
    if not (t1.swallowed and t2.swallowed):
        raise HorizonExhaustedError("both boundary points must be swallowed; extend T")
    return t1.tau < t2.tau


# ---------------------------------------------------------------------------
# martingale drift harness


def _drift_states(kappa, points, dt, steps, seed_base, lo, hi,
                  eps_swallow=EPS_SWALLOW):
    """Evolve (w, w', S_w) for each tracked point over a chunk of paths."""
    n = hi - lo
    inc = _chunk_increments(kappa, dt, steps, seed_base, lo, hi)
    m = len(points)
    w = np.empty((m, n), dtype=complex)
    for i, z in enumerate(points):
        w[i] = complex(z)
    wp = np.ones((m, n), dtype=complex)
    sw = np.zeros((m, n), dtype=complex)
    alive = np.ones((m, n), dtype=bool)
    for k in range(steps):
        s = np.sqrt(w * w + 4.0 * dt)
        s = np.where(s.imag < 0, -s, s)
        sw = np.where(alive, _slit_schwarzian(w, 4.0 * dt) * wp * wp + sw, sw)
        wp = np.where(alive, wp * (w / s), wp)
        w = np.where(alive, s - inc[:, k][None, :], w)
        alive &= np.abs(w) >= eps_swallow
    return w, wp, sw, alive.all(axis=0)


def martingale_drift(observable, points: Sequence, horizon: float, n_paths: int,
                     seed_base: int, dt: float = 1e-3, workers: int = 1,
                     chunk: int = 2048) -> list:
    """Normalized drift (mean(M_t) - M_0)/stderr per probe point.

    ``observable`` follows the ObservableSpec protocol of gffcft.observables:
    it maps flow states (w, w', S_w) at its probe point(s) to values in the
    fixed identity chart of H.  Points where a path loses the probe before
    the horizon are dropped from that point's statistics and counted.
    """
    steps = math.ceil(horizon / dt)
    kappa = observable.kappa
    flat_points = []
    groups = []
    for p in points:
        group = tuple(complex(q) for q in (p if isinstance(p, (tuple, list)) else (p,)))
        groups.append(group)
        flat_points.extend(group)
    nflat = len(flat_points)
    vals = np.empty((len(groups), n_paths), dtype=complex)
    okmat = np.empty((len(groups), n_paths), dtype=bool)

    def run(lo, hi):
        w, wp, sw, _ = _drift_states(kappa, flat_points, dt, steps, seed_base, lo, hi)
        ok_flat = np.abs(w) >= EPS_SWALLOW
        col = 0
        for gi, group in enumerate(groups):
            k = len(group)
            states = [(w[col + i], wp[col + i], sw[col + i]) for i in range(k)]
            vals[gi, lo:hi] = observable.evaluate_states(states)
            okmat[gi, lo:hi] = np.all(ok_flat[col:col + k], axis=0)
            col += k

    bounds = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda se: run(*se), bounds))
    else:
        for lo, hi in bounds:
            run(lo, hi)

    out = []
    for gi, group in enumerate(groups):
        m0 = complex(observable.initial_value(group))
        good = okmat[gi]
        v = vals[gi][good]
        n = v.size
        mean = v.mean() if n else complex("nan")
        var = v.var(ddof=1) if n > 1 else math.inf
        # stderr of the complex mean: combined real+imag spread
        se = math.sqrt((np.abs(v - mean) ** 2).sum() / (n - 1) / n) if n > 1 else math.inf
        zscore = abs(mean - m0) / se if se > 0 else math.inf
        out.append({
            "point": group if len(group) > 1 else group[0],
            "m0": m0,
            "mean": complex(mean),
            "stderr": se,
            "zscore": zscore,
            "n_used": int(n),
            "n_dropped": int(n_paths - n),
        })
    return out
