"""Reconstruction of cost Taylor coefficients from linearized measurement traces.

Three engines share one coefficient store and one report format:

* ``recon_full``: all populations observed, general costs; coefficient fields
  are recovered Fourier mode by Fourier mode from 2x2 pairing systems.
* ``recon_shared``: costs shared by every population, one population observed.
* ``recon_stateless``: state-independent costs with ``G = 0``, one population
  observed; constant probes fit that population's series, cyclic shifts of mode
  probes recover every other population's coefficients.

Pairing identity: for a backward solution ``u`` with source ``f`` and terminal
``u_T`` and a forward heat solution ``w``, ``int_Q f w = int u_0 w_0 - int u_T w_T``.
With ``f = F * (phi_{xi2} psi) + ...``, ``u_T = G * (...)`` and ``w = psi phi_{xi1}``
this reads ``c(sigma) a + E(sigma) b = int u_0 w_0`` where ``a, b`` are the
amplitudes of ``F, G`` at ``-(xi1 + xi2)``.
"""
from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostSeries, all_multi_indices, expand, factorial, multi_indices, order, unit
from .errors import ConditioningError, DecouplingError, GridMismatchError, StageOrderError
from .forward import SolverParams, solve_arrays
from .grid import SpaceField
from ._kernels import forward_sweep as forward_solve_scalar
from .heatlib import discrete_kernels, terminal_weight, time_weight
from .linearized import cascade_trace
from .probes import DEFAULT_LADDER, PROBE_PARAMS, ProbePlan, linearized_trace

COND_LIMIT = 1e8
OFFSETS = (1.0, 2.0)


# -- frequency bookkeeping ---------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    xi: tuple
    xi1: tuple
    xi2: tuple
    xi1p: tuple
    xi2p: tuple

    @property
    def s(self):
        return _nsq(self.xi1) + _nsq(self.xi2)

    @property
    def sp(self):
        return _nsq(self.xi1p) + _nsq(self.xi2p)

    def pairs(self):
        return ((self.xi1, self.xi2, self.s), (self.xi1p, self.xi2p, self.sp))


def _nsq(v):
    return int(sum(x * x for x in v))


RULES = ("positive-axis", "mirrored")


def pick_decomposition(xi, rule="positive-axis"):
    """Split ``xi = xi1 + xi2 = xi1' + xi2'`` with nonzero parts and ``s < s'``.

    ``K = |xi|_inf + 1``, ``xi2 = K e1``, ``xi2' = (K + 1) e1``.  The ``mirrored``
    rule flips the sign of ``e1`` when the first nonzero entry of ``xi`` is
    negative, so ``xi`` and ``-xi`` get splittings of equal weight.
    """
    if rule not in RULES:
        raise ValueError(f"unknown decomposition rule {rule!r}")
    xi = tuple(int(v) for v in np.atleast_1d(xi))
    K = max(abs(v) for v in xi) + 1
    sign = 1
    if rule == "mirrored":
        lead = next((v for v in xi if v != 0), 0)
        sign = -1 if lead < 0 else 1
    e1 = (sign,) + (0,) * (len(xi) - 1)
    xi2 = tuple(K * e for e in e1)
    xi2p = tuple((K + 1) * e for e in e1)
    xi1 = tuple(a - b for a, b in zip(xi, xi2))
    xi1p = tuple(a - b for a, b in zip(xi, xi2p))
    return Decomposition(xi, xi1, xi2, xi1p, xi2p)


def neg(xi):
    return tuple(-v for v in xi)


def band_frequencies(d, K):
    return [tuple(v) for v in itertools.product(range(-K, K + 1), repeat=d)]


def _decay_series(grid, xi):
    """``exp(-4 pi^2 |xi|^2 h)^n`` accumulated exactly as the solver's sweeps do."""
    q = np.array([np.exp(-grid.rate[grid.index(xi)] * grid.h)])
    init = np.ones((1, 1), dtype=np.complex128)
    src = np.zeros((1, grid.Nt + 1, 1), dtype=np.complex128)
    return forward_solve_scalar(src, init, q, grid.h).real.reshape(-1)


def pairing_matrix(dec, grid=None, T=None):
    """Rows ``(c(sigma), E(sigma))`` for both splittings of ``dec``.

    With a grid the weights are the discrete ones (trapezoid of the solver's own
    decay sequences); with only ``T`` they are the closed forms.
    """
    rows = []
    for xi1, xi2, sigma in dec.pairs():
        if grid is None:
            rows.append((time_weight(sigma, T), terminal_weight(sigma, T)))
            continue
        e = _decay_series(grid, xi1) * _decay_series(grid, xi2)
        rows.append((float(np.trapezoid(e, dx=grid.h)), float(e[-1])))
    return np.array(rows)


def offset_elimination(rows):
    """Fit ``value(M) = sum_a c_a prod_l M_l^{a_l}``, ``a in {0,1}^s``, from offset rows.

    ``rows`` maps offset tuples to (array) values.  Returns ``{a: c_a}``; the
    offset-free part is ``c_{(0,..,0)}``.
    """
    keys = sorted(rows)
    if not keys:
        raise ValueError("no offset rows")
    s = len(keys[0])
    monos = list(itertools.product((0, 1), repeat=s))
    if len(keys) != len(monos):
        raise ValueError(f"need {len(monos)} offset rows for s={s}, got {len(keys)}")
    V = np.array([[np.prod([M[l] ** a[l] for l in range(s)]) for a in monos] for M in keys], dtype=float)
    det = np.linalg.det(V)
    if abs(det) < 1e-12:
        raise ValueError("singular offset design (repeated offsets)")
    vals = np.array([np.asarray(rows[k], dtype=np.complex128) for k in keys])
    coef = np.linalg.solve(V, vals.reshape(len(keys), -1)).reshape(vals.shape)
    return {a: coef[j] for j, a in enumerate(monos)}


def offset_design_determinant(s, offsets=OFFSETS):
    keys = list(itertools.product(offsets, repeat=s))
    monos = list(itertools.product((0, 1), repeat=s))
    V = np.array([[np.prod([M[l] ** a[l] for l in range(s)]) for a in monos] for M in keys], dtype=float)
    return float(np.linalg.det(V))


# -- data access -------------------------------------------------------------------------

class CascadeData:
    """Exact linearized traces from the cascade solver on the planted costs."""

    def __init__(self, F, G, grid, dealias=False, params=SolverParams(tol=1e-14)):
        self.F, self.G, self.grid, self.dealias, self.params = F, G, grid, dealias, params
        self.calls = 0
        self.kind = "cascade"

    def trace(self, f):
        self.calls += 1
        return cascade_trace(self.grid, self.F, self.G, f, self.dealias, strict=False)

    def measure(self, m0):
        self.calls += 1
        return solve_arrays(self.grid, self.F, self.G, m0, self.params)[0][:, 0]


class ProbeData:
    """Linearized traces from divided differences of the nonlinear solver."""

    def __init__(self, F, G, grid, params=PROBE_PARAMS, epsilons=DEFAULT_LADDER, scheme="central",
                 check_slope=True):
        self.F, self.G, self.grid, self.params = F, G, grid, params
        self.epsilons, self.scheme, self.check_slope = tuple(epsilons), scheme, check_slope
        self.calls = 0
        self.slopes = []
        self.kind = "probe"

    def _measure(self, m0):
        self.calls += 1
        return solve_arrays(self.grid, self.F, self.G, m0, self.params)[0][:, 0]

    measure = _measure

    def trace(self, f):
        dirs = tuple(tuple(SpaceField(self.grid, comp) for comp in row) for row in f)
        plan = ProbePlan(dirs, self.epsilons, self.scheme)
        res = linearized_trace(plan, self.F, self.G, self.params, measure=self._measure,
                               check_slope=self.check_slope)
        self.slopes.append(res.slope)
        return res.trace


# -- coefficient store ---------------------------------------------------------------------

class CoefficientStore:
    """Recovered coefficients; reading one that is not recovered yet is an error."""

    def __init__(self, n, S, kind, grid=None):
        self.n, self.S, self.kind, self.grid = n, S, kind, grid
        self.F = {}
        self.G = {}

    def put(self, which, i, beta, value):
        table = self.F if which == "F" else self.G
        table[(i, tuple(beta))] = value

    def get(self, which, i, beta):
        table = self.F if which == "F" else self.G
        key = (i, tuple(beta))
        if key not in table:
            raise StageOrderError(f"{which}_{i}^{tuple(beta)} read before it was recovered")
        return table[key]

    def has(self, which, i, beta):
        return (i, tuple(beta)) in (self.F if which == "F" else self.G)

    def series(self, which="F"):
        table = self.F if which == "F" else self.G
        if self.kind == "shared":
            coeffs = {beta: v for (i, beta), v in table.items() if i == 0}
            return CostSeries(self.n, self.S, coeffs, "shared", self.grid)
        coeffs = [dict() for _ in range(self.n)]
        for (i, beta), v in table.items():
            coeffs[i][beta] = v
        return CostSeries(self.n, self.S, coeffs, self.kind, self.grid)


# -- report ---------------------------------------------------------------------------------

@dataclass(eq=False)
class ReconstructionReport:
    engine: str
    F: CostSeries
    G: CostSeries | None
    rows: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    probe_count: int = 0
    wall_time: float = 0.0
    diagnostics: list = field(default_factory=list)
    complete: bool = True

    @property
    def has_errors(self):
        return any(r.get("true") is not None for r in self.rows)

    def max_rel_err(self, which=None):
        vals = [r["rel_err"] for r in self.rows
                if r.get("rel_err") is not None and (which is None or r["cost"] == which)]
        return max(vals) if vals else None

    def max_condition(self):
        return max((c["cond"] for c in self.conditions), default=None)

    def to_dict(self):
        def enc(z):
            if z is None:
                return None
            z = complex(z)
            return [z.real, z.imag]

        rows = []
        for r in self.rows:
            rr = dict(r)
            for k in ("true", "recovered"):
                rr[k] = enc(rr.get(k))
            rows.append(rr)
        return {
            "engine": self.engine,
            "complete": self.complete,
            "probe_count": self.probe_count,
            "wall_time": self.wall_time,
            "max_rel_err": self.max_rel_err(),
            "max_condition": self.max_condition(),
            "diagnostics": self.diagnostics,
            "conditions": self.conditions,
            "rows": rows,
        }

    def write_csv(self, path):
        cols = ["population", "cost", "multi_index", "frequency", "true", "recovered",
                "abs_err", "rel_err", "cond"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([
                    r["population"], r["cost"], " ".join(map(str, r["multi_index"])),
                    "" if r["frequency"] is None else " ".join(map(str, r["frequency"])),
                    _fmt(r.get("true")), _fmt(r["recovered"]),
                    _fmt(r.get("abs_err")), _fmt(r.get("rel_err")), _fmt(r.get("cond")),
                ])
        return path


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    return f"{x:.17g}"


def relative_errors(true_vals, rec_vals):
    """Absolute and relative errors with a per-coefficient scale.

    A value is compared relative to itself when ``|true| > 1e-14 * scale``, and
    relative to ``scale = max |true|`` otherwise.
    """
    true_vals = np.asarray(true_vals, dtype=np.complex128)
    rec_vals = np.asarray(rec_vals, dtype=np.complex128)
    abs_err = np.abs(true_vals - rec_vals)
    scale = float(np.max(np.abs(true_vals))) if true_vals.size else 0.0
    if scale == 0.0:
        return abs_err, abs_err
    denom = np.where(np.abs(true_vals) > 1e-14 * scale, np.abs(true_vals), scale)
    return abs_err, abs_err / denom


# -- Taylor-Fourier engine (full and shared data) ---------------------------------------------

def _mode_probe(grid, xi2, offset, scale):
    return scale * (grid.mode(xi2) + offset)


def _directions(grid, n, slots, first, scale):
    """Probe array: slot 0 carries ``first`` on population ``slots[0]``, others constant."""
    f = np.zeros((len(slots), n) + grid.shape, dtype=np.complex128)
    f[0, slots[0]] = first
    for l, r in enumerate(slots[1:], start=1):
        f[l, r] = scale
    return f


def _precheck(grid, freqs, strict, populations, slot, rule):
    conds = {}
    for xi in freqs:
        dec = pick_decomposition(xi, rule)
        c = float(np.linalg.cond(pairing_matrix(dec, grid)))
        conds[xi] = c
        if strict and c > COND_LIMIT:
            raise ConditioningError(
                f"pairing system for population {populations[0]}, slot {slot}, frequency {xi} "
                f"has condition {c:.3e} > {COND_LIMIT:.0e}",
                population=populations[0], slot=slot, frequency=xi, condition=c,
            )
    return conds


def _taylor_fourier(engine, data, n, d, S, grid, band, rows_read, shared, strict, plant, scale,
                    real_probes, threads, rule):
    t0 = time.perf_counter()
    kind = "shared" if shared else "general"
    store = CoefficientStore(n, S, kind, grid)
    freqs = band_frequencies(d, band)
    # the second splitting of |xi|_inf = band probes at frequency 2 band + 2
    if 2 * band + 2 >= grid.N // 2:
        raise GridMismatchError(f"band {band} needs N > {4 * band + 4}, grid has N={grid.N}")
    conds = _precheck(grid, freqs, strict, rows_read, 0, rule)
    targets = [0] if shared else list(rows_read)
    report_conds = []
    diagnostics = []
    unresolved = set()
    calls0 = data.calls

    for s in range(1, S + 1):
        known_F = store.series("F")
        known_G = store.series("G")
        betas = multi_indices(n, s)
        jobs = []
        for beta in betas:
            slots = expand(beta)
            for xi in freqs:
                dec = pick_decomposition(xi, rule)
                for xi1, xi2, _ in dec.pairs():
                    for M in OFFSETS:
                        for part in (("cos", "sin") if real_probes else ("exp",)):
                            jobs.append((beta, slots, xi, xi1, xi2, M, part))

        def run(job, known_F=known_F, known_G=known_G, s=s):
            beta, slots, xi, xi1, xi2, M, part = job
            if part == "exp":
                first = _mode_probe(grid, xi2, M, scale)
            else:
                x = sum(k * xx for k, xx in zip(xi2, grid.nodes))
                trig = np.cos if part == "cos" else np.sin
                first = scale * (trig(2 * np.pi * x) + M)
            f = _directions(grid, n, slots, first, scale)
            tr = data.trace(f)
            if s > 1:
                tr = tr - cascade_trace(grid, known_F, known_G, f, strict=False)
            idx = grid.index(tuple(-v for v in xi1))
            amps = grid.fft(tr)
            return np.array([amps[i][idx] for i in range(n)]) / scale**s

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        rho = {}
        for job, val in zip(jobs, results):
            beta, slots, xi, xi1, xi2, M, part = job
            key = (beta, xi, xi1, M)
            if part == "sin":
                rho[key] = rho[key] + 1j * val
            else:
                rho[key] = val

        for beta in betas:
            amp_F = {i: np.zeros(grid.shape, complex) for i in targets}
            amp_G = {i: np.zeros(grid.shape, complex) for i in targets}
            for xi in freqs:
                dec = pick_decomposition(xi, rule)
                A = []
                for xi1, _, _ in dec.pairs():
                    elim = offset_elimination({(M,): rho[(beta, xi, xi1, M)] for M in OFFSETS})
                    A.append(elim[(0,)])
                A = np.array(A)
                Mx = pairing_matrix(dec, grid)
                cond = conds[xi]
                resolved = cond <= COND_LIMIT
                if resolved:
                    sol = np.linalg.solve(Mx, A)
                else:
                    # the terminal weight of the second splitting is below the floating
                    # point floor, so that row fixes the running amplitude on its own;
                    # the terminal amplitude is reported as unresolved
                    sol = np.array([A[1] / Mx[1, 0], np.zeros_like(A[1])])
                    unresolved.add((neg(xi), beta))
                for i in targets:
                    # the pairing for xi reads the amplitude at -xi
                    amp_F[i][grid.index(neg(xi))] = sol[0][i]
                    amp_G[i][grid.index(neg(xi))] = sol[1][i]
                    report_conds.append({"population": i, "slot": int(expand(beta)[0]),
                                         "multi_index": list(beta), "frequency": list(xi), "cond": cond})
                    if cond > COND_LIMIT:
                        diagnostics.append(
                            f"condition {cond:.2e} above {COND_LIMIT:.0e} at population {i}, "
                            f"multi-index {beta}, frequency {xi}")
            for i in targets:
                store.put("F", i, beta, grid.ifft(amp_F[i]))
                store.put("G", i, beta, grid.ifft(amp_G[i]))

    F_rec, G_rec = store.series("F"), store.series("G")
    rows = _field_rows(F_rec, G_rec, targets, S, grid, freqs, plant, conds, unresolved)
    return ReconstructionReport(
        engine, F_rec, G_rec, rows, report_conds, data.calls - calls0,
        time.perf_counter() - t0, diagnostics, True,
    )


def _field_rows(F_rec, G_rec, targets, S, grid, freqs, plant, conds, unresolved=()):
    rows = []
    n = F_rec.n
    for which, rec in (("F", F_rec), ("G", G_rec)):
        true_series = None if plant is None else (plant[0] if which == "F" else plant[1])
        for i in targets:
            for beta in all_multi_indices(n, S):
                rec_amp = grid.fft(np.broadcast_to(rec.coefficient(i, beta), grid.shape))
                rec_vals = np.array([rec_amp[grid.index(xi)] for xi in freqs])
                if true_series is not None:
                    tv = true_series.coefficient(i, beta)
                    t_amp = grid.fft(np.broadcast_to(tv, grid.shape))
                    true_vals = np.array([t_amp[grid.index(xi)] for xi in freqs])
                    ae, re = relative_errors(true_vals, rec_vals)
                else:
                    true_vals = ae = re = [None] * len(freqs)
                for j, xi in enumerate(freqs):
                    rows.append({
                        "population": i, "cost": which, "multi_index": list(beta), "frequency": list(xi),
                        "true": None if true_vals[j] is None else complex(true_vals[j]),
                        "recovered": complex(rec_vals[j]),
                        "abs_err": None if ae[j] is None else float(ae[j]),
                        "rel_err": None if re[j] is None else float(re[j]),
                        "cond": conds.get(neg(xi)),
                        "resolved": not (which == "G" and (xi, tuple(beta)) in unresolved),
                    })
    return rows


def recon_full(data, n, d, S, grid, band, strict=True, plant=None, scale=1.0, real_probes=False, threads=1,
               rule="positive-axis"):
    """Recover every ``F_i^{(beta)}``, ``G_i^{(beta)}`` (``|beta| <= S``) on the band ``|xi|_inf <= band``."""
    return _taylor_fourier("full", data, n, d, S, grid, band, list(range(n)), False, strict, plant,
                           scale, real_probes, threads, rule)


def recon_shared(data, n, d, S, grid, band, population=0, strict=True, plant=None, scale=1.0,
                 real_probes=False, threads=1, rule="positive-axis"):
    """Recover a shared series reading only population ``population``'s trace."""
    view = _RowView(data, population)
    return _taylor_fourier("shared", view, n, d, S, grid, band, [population], True, strict, plant,
                           scale, real_probes, threads, rule)


class _RowView:
    """Expose only one population's trace; other rows are hidden behind NaN."""

    def __init__(self, data, i):
        self.data, self.i = data, i

    @property
    def calls(self):
        return self.data.calls

    def trace(self, f):
        tr = self.data.trace(f)
        out = np.full_like(tr, np.nan)
        out[self.i] = tr[self.i]
        # the shared engine stores unknowns under population 0
        out[0] = tr[self.i]
        return out

    def measure(self, m0):
        u = self.data.measure(m0)
        out = np.full_like(u, np.nan)
        out[0] = u[self.i]
        return out


# -- state-independent engine -----------------------------------------------------------------

def cyclic_solve(y):
    """Solve ``sum_{l != k} X_l = y_k`` for all ``k``: ``X_k = sum(y)/(s-1) - y_k``."""
    y = np.asarray(y)
    s = len(y)
    if s < 2:
        raise ValueError("cyclic solve needs at least two shifts")
    total = y.sum() / (s - 1)
    return total - y


def stage_one_fit(values, points, S, T, step):
    """Least-squares fit of ``u = T sum_beta F^{(beta)} c^beta / beta!`` on constant probes.

    Variables are scaled by ``S * step`` for conditioning.  Returns ``({beta: F^(beta)}, cond)``.
    """
    n = points.shape[1]
    betas = all_multi_indices(n, S)
    L = S * step
    z = points / L
    V = np.array([[np.prod(zz ** np.array(b)) for b in betas] for zz in z])
    coef, *_ = np.linalg.lstsq(V, np.asarray(values, dtype=np.complex128), rcond=None)
    cond = float(np.linalg.cond(V))
    out = {b: complex(c * factorial(b) / (T * L ** order(b))) for b, c in zip(betas, coef)}
    return out, cond


def recon_stateless(data, n, S, grid, delta=0.1, coupling_threshold=1e-8, plant=None, scale=1.0,
                    xi=None, observed=0, strict=False, threads=1):
    """Recover state-independent costs (``G = 0``) from population ``observed``'s trace.

    Stage 1 fits the observed population's series from constant probes.  Stage
    ``s = 2..S+1`` recovers every order ``s-1`` coefficient of the other
    populations from cyclic shifts of a single-mode probe across ``s`` slots.
    """
    t0 = time.perf_counter()
    p0 = observed
    store = CoefficientStore(n, S, "state-independent")
    calls0 = data.calls
    diagnostics = []
    conds = []

    step = delta / (S * n)
    pts = np.array(list(itertools.product(range(S + 1), repeat=n)), dtype=float) * step
    vals = []
    for c in pts:
        m0 = np.broadcast_to(c.reshape((n,) + (1,) * grid.d), (n,) + grid.shape).astype(np.complex128)
        vals.append(np.mean(data.measure(m0)[p0]))
    fit, vcond = stage_one_fit(vals, pts, S, grid.T, step)
    conds.append({"stage": 1, "kind": "vandermonde", "cond": vcond})
    for b, v in fit.items():
        store.put("F", p0, b, v)

    weak = [k for k in range(n) if k != p0 and abs(store.get("F", p0, unit(n, k))) < coupling_threshold]
    complete = not weak
    if weak:
        msg = (f"population {p0}'s running cost is decoupled from population(s) {weak}: "
               f"|F_{p0}^(e_k)| < {coupling_threshold:g}; cross-population stages skipped")
        diagnostics.append(msg)
        if strict:
            raise DecouplingError(msg, population=weak[0])
    else:
        xi = tuple(np.atleast_1d(xi if xi is not None else (1,) + (0,) * (grid.d - 1)))
        ker = discrete_kernels(grid, float(np.sum(np.square(xi))))
        if ker.I2 == 0 or not np.isfinite(ker.I2):
            raise ConditioningError("response integral vanished", frequency=xi)
        mode = grid.mode(xi)
        idx = grid.index(xi)
        zero_G = CostSeries(n, S, None, "state-independent")
        for s in range(2, S + 2):
            known = store.series("F")
            betas = multi_indices(n, s)
            jobs = []
            for beta in betas:
                r = expand(beta)
                for k in range(s):
                    slots = (r[k],) + r[:k] + r[k + 1:]
                    # shifts landing on the same population give the same probe
                    if (beta, slots) not in {(j[0], j[2]) for j in jobs}:
                        jobs.append((beta, k, slots))

            def run(job, known=known, s=s):
                beta, k, slots = job
                f = _directions(grid, n, slots, scale * mode, scale)
                tr = data.trace(f)[p0] - cascade_trace(grid, known, zero_G, f, strict=False)[p0]
                return grid.fft(tr)[idx] / scale**s / ker.I2

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    ys = list(pool.map(run, jobs))
            else:
                ys = [run(j) for j in jobs]
            y_slots = {(j[0], j[2]): y for j, y in zip(jobs, ys)}
            y_of = {}
            for beta in betas:
                r = expand(beta)
                for k in range(s):
                    y_of[(beta, k)] = y_slots[(beta, (r[k],) + r[:k] + r[k + 1:])]
            conds.append({"stage": s, "kind": "cyclic", "cond": float(s - 1)})
            for beta in betas:
                r = expand(beta)
                X = cyclic_solve([y_of[(beta, k)] for k in range(s)])
                for k in range(s):
                    p = r[k]
                    if p == p0:
                        continue
                    gamma = tuple(b - int(j == p) for j, b in enumerate(beta))
                    val = complex(X[k] / store.get("F", p0, unit(n, p)))
                    if not store.has("F", p, gamma):
                        store.put("F", p, gamma, val)

    F_rec = store.series("F")
    rows = []
    for i in range(n):
        for beta in all_multi_indices(n, S):
            if not store.has("F", i, beta):
                continue
            rec = complex(store.get("F", i, beta))
            row = {"population": i, "cost": "F", "multi_index": list(beta), "frequency": None,
                   "true": None, "recovered": rec, "abs_err": None, "rel_err": None, "cond": None}
            if plant is not None:
                tv = complex(plant[0].coefficient(i, beta))
                row["true"] = tv
                row["abs_err"] = abs(tv - rec)
                row["rel_err"] = abs(tv - rec) / abs(tv) if tv != 0 else abs(tv - rec)
            rows.append(row)
    return ReconstructionReport("stateless", F_rec, None, rows, conds, data.calls - calls0,
                                time.perf_counter() - t0, diagnostics, complete)


def write_report(report, out_dir, config=None):
    out = Path(out_dir)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    data = report.to_dict()
    if config is not None:
        data["config"] = config
    (out / "reconstruction.json").write_text(json.dumps(data, indent=1))
    report.write_csv(out / "tables" / f"{report.engine}_coefficients.csv")
    return out
