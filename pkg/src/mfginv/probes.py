"""Numerical multilinearization: mixed divided differences of the measurement map.

For probe directions ``f_1..f_s`` the level-s trace ``d_{eps_1}..d_{eps_s} u(., 0)``
at ``eps = 0`` is estimated on a ladder of step sizes and Richardson-extrapolated.

central (complex steps allowed by holomorphy):
    D(eps) = (2 eps)^{-s} sum_{sigma in {+-1}^s} (prod sigma) u(sum sigma_l eps f_l),  error O(eps^2)
one-sided (nonnegative steps):
    D(eps) = eps^{-s} sum_{sigma in {0,1}^s} (-1)^{s - |sigma|} u(sum sigma_l eps f_l),   error O(eps)
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, MfgInvError, SlopeCheckError, SolverError
from .forward import SolverParams, solve_arrays
from .grid import SpaceField, TorusGrid

SCHEMES = ("central", "one-sided")
DEFAULT_LADDER = (1e-2, 5e-3, 2.5e-3)
PROBE_PARAMS = SolverParams(tol=1e-14, max_iters=400)
SLOPE_WINDOW = 0.2


def theoretical_order(scheme):
    return 2 if scheme == "central" else 1


@dataclass(frozen=True, eq=False)
class ProbePlan:
    """Directions (one per eps-slot), step ladder, scheme and data mode.

    Each direction is a ``(population, SpaceField)`` pair or an n-tuple of
    SpaceFields with ``None`` for zero components.  ``data_mode`` is ``"full"``
    or a population index for single-population data.
    """

    directions: tuple
    epsilons: tuple = DEFAULT_LADDER
    scheme: str = "central"
    data_mode: object = "full"
    plan_id: object = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon ladder must be positive and strictly decreasing")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "directions", tuple(self.directions))
        if not self.directions:
            raise ValueError("a plan needs at least one direction")

    @property
    def order(self):
        return len(self.directions)

    def direction_array(self, n):
        rows = []
        grid = None
        for d in self.directions:
            if isinstance(d, tuple) and len(d) == 2 and isinstance(d[1], SpaceField) and not isinstance(d[0], SpaceField):
                r, f = d
                if not 0 <= r < n:
                    raise IndexError(f"population {r} out of range for n={n}")
                comps = [None] * n
                comps[r] = f
            else:
                comps = list(d)
                if len(comps) != n:
                    raise GridMismatchError(f"direction has {len(comps)} components, expected {n}")
            g = next(c.grid for c in comps if c is not None)
            grid = grid or g
            if any(c is not None and c.grid != grid for c in comps):
                raise GridMismatchError("probe fields live on different grids")
            rows.append([c.values if c is not None else np.zeros(grid.shape, complex) for c in comps])
        return grid, np.array(rows, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class ProbeResult:
    plan_id: object
    trace: object
    slope: float
    ladder: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


# -- measurement access ------------------------------------------------------------------

class SolverMeasurement:
    """Measurement map realized by the nonlinear solver on fixed costs."""

    def __init__(self, F, G, grid, params=PROBE_PARAMS):
        self.F, self.G, self.grid, self.params = F, G, grid, params
        self.calls = 0

    def __call__(self, m0):
        self.calls += 1
        u = solve_arrays(self.grid, self.F, self.G, m0, self.params)[0]
        out = u[:, 0]
        if not np.all(np.isfinite(out)):
            raise SolverError("measurement returned non-finite values")
        return out


# -- difference stencils -----------------------------------------------------------------

def stencil(scheme, s):
    """List of ``(sign vector, weight)`` with weights for unit step."""
    if scheme == "central":
        return [(np.array(sig, float), math.prod(sig) / 2.0**s)
                for sig in itertools.product((1, -1), repeat=s)]
    return [(np.array(sig, float), (-1.0) ** (s - sum(sig)))
            for sig in itertools.product((0, 1), repeat=s)]


def mixed_difference(measure, f, eps, scheme, sizes=None):
    """Divided difference ``D(eps)`` of ``measure`` along directions ``f`` (shape ``(s, n, ...)``).

    When ``sizes`` is a list, the sup-norm of every measurement is appended to it.
    """
    s = f.shape[0]
    acc = 0
    for sig, w in stencil(scheme, s):
        if not sig.any():
            # the zero datum: evaluate anyway, the map is a black box
            m0 = np.zeros(f.shape[1:], dtype=np.complex128)
        else:
            m0 = np.tensordot(sig * eps, f, axes=1)
        val = measure(m0)
        if sizes is not None:
            sizes.append(float(np.max(np.abs(val))))
        acc = acc + w * val
    return acc / eps**s


def naive_second_quotient(u_pair, u_first, e1, e2):
    """``[u(e1,e2) - e1 u^(1) - e2 u^(2)] / (e1 e2 / 2)``.

    Its limit is ``(e1/e2) u_11 + 2 u_12 + (e2/e1) u_22`` rather than the mixed
    derivative ``u_12``; kept to document that behaviour in tests.
    """
    return (u_pair - e1 * u_first[0] - e2 * u_first[1]) / (0.5 * e1 * e2)


def richardson(estimates, epsilons, scheme):
    """Extrapolate ``D(eps) = D + c_1 eps^p + c_2 eps^{2p'} ...`` to ``eps = 0``.

    Exponents are ``2, 4, ..`` for the central scheme and ``1, 2, ..`` one-sided;
    one term per rung beyond the first.
    """
    p = theoretical_order(scheme)
    k = len(estimates)
    exps = [0] + [p * j for j in range(1, k)]
    V = np.array([[e**q for q in exps] for e in epsilons])
    w = np.linalg.solve(V.T, np.eye(k)[:, 0])
    return sum(wi * est for wi, est in zip(w, estimates))


def observed_slope(estimates, epsilons, noise):
    """Convergence order from three consecutive rungs; NaN at the noise floor."""
    if len(estimates) < 3:
        return float("nan"), []
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(estimates, estimates[1:])]
    slopes = []
    for j in range(len(diffs) - 1):
        if diffs[j + 1] <= noise or diffs[j] <= noise:
            slopes.append(float("nan"))
            continue
        r = math.log(epsilons[j] / epsilons[j + 1])
        slopes.append(math.log(diffs[j] / diffs[j + 1]) / r)
    finite = [x for x in slopes if np.isfinite(x)]
    return (finite[-1] if finite else float("nan")), diffs


def linearized_trace(plan, F=None, G=None, params=PROBE_PARAMS, measure=None, check_slope=True):
    """Estimate the level-s trace for ``plan`` from the measurement map.

    ``measure`` overrides the solver-backed map with any callable
    ``m0 (n, ...) -> u(., 0) (n, ...)``.
    """
    n = F.n if F is not None else None
    if measure is None:
        if F is None or G is None:
            raise ValueError("either costs or a measurement callable are required")
    grid, f = plan.direction_array(n if n is not None else _infer_n(plan))
    if measure is None:
        measure = SolverMeasurement(F, G, grid, params)
    s = f.shape[0]
    if plan.scheme == "one-sided":
        radius = float(np.sum(np.max(np.abs(f.reshape(s, f.shape[1], -1)), axis=2))) * plan.epsilons[0]
        if radius > params.ball_radius:
            warnings.warn(f"one-sided probe data size {radius:.3g} exceeds the small-data radius", RuntimeWarning)
    sizes = []
    estimates = [mixed_difference(measure, f, e, plan.scheme, sizes) for e in plan.epsilons]
    evals = len(stencil(plan.scheme, s))
    unit = 2.0 if plan.scheme == "central" else 1.0
    # up to 32 ulps of rounding per measurement, amplified by the stencil
    noise = 32.0 * evals * np.finfo(float).eps * max(sizes) / (unit * plan.epsilons[-1]) ** s
    slope, diffs = observed_slope(estimates, plan.epsilons, noise)
    trace = richardson(estimates, plan.epsilons, plan.scheme)
    ladder = [
        {"eps": e, "estimate_sup": float(np.max(np.abs(est))), "diff_to_next": (diffs[j] if j < len(diffs) else None)}
        for j, (e, est) in enumerate(zip(plan.epsilons, estimates))
    ]
    theory = theoretical_order(plan.scheme)
    if check_slope and np.isfinite(slope) and abs(slope - theory) > SLOPE_WINDOW:
        raise SlopeCheckError(
            f"observed slope {slope:.3f} differs from theoretical order {theory} by more than {SLOPE_WINDOW}",
            ladder,
        )
    if plan.data_mode != "full":
        trace = trace[int(plan.data_mode)]
        estimates = [e[int(plan.data_mode)] for e in estimates]
    return ProbeResult(plan.plan_id, trace, slope, ladder, estimates)


def _infer_n(plan):
    for d in plan.directions:
        if not (isinstance(d, tuple) and len(d) == 2 and isinstance(d[1], SpaceField)):
            return len(d)
    raise ValueError("cannot infer population count; pass the costs")


def run_probe_battery(plans, F, G, params=PROBE_PARAMS, threads=1, measure=None):
    """Run independent plans; results sorted by plan id, failures recorded per plan."""
    plans = list(plans)
    ids = [p.plan_id if p.plan_id is not None else j for j, p in enumerate(plans)]

    def one(args):
        pid, plan = args
        try:
            res = linearized_trace(plan, F, G, params, measure)
            return ProbeResult(pid, res.trace, res.slope, res.ladder, res.estimates)
        except (MfgInvError, ValueError, IndexError, FloatingPointError) as exc:
            ladder = getattr(exc, "ladder", None) or []
            return ProbeResult(pid, None, float("nan"), ladder, [], f"{type(exc).__name__}: {exc}")

    jobs = list(zip(ids, plans))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    return sorted(results, key=lambda r: _sort_key(r.plan_id))


def _sort_key(pid):
    return (0, pid, "") if isinstance(pid, (int, float)) else (1, 0, str(pid))


# -- manifests ----------------------------------------------------------------------------

def _field_json(values):
    v = np.asarray(values).ravel()
    return {"re": v.real.tolist(), "im": v.imag.tolist()}


def _field_from_json(grid, obj):
    v = np.asarray(obj["re"], float) + 1j * np.asarray(obj["im"], float)
    return SpaceField(grid, v.reshape(grid.shape))


def battery_to_manifest(plans, grid, path=None):
    """JSON manifest that reproduces a battery bit-identically."""
    items = []
    for j, p in enumerate(plans):
        dirs = []
        for d in p.directions:
            if isinstance(d, tuple) and len(d) == 2 and isinstance(d[1], SpaceField):
                dirs.append({"population": int(d[0]), "field": _field_json(d[1].values)})
            else:
                dirs.append({"components": [None if c is None else _field_json(c.values) for c in d]})
        items.append({
            "plan_id": p.plan_id if p.plan_id is not None else j,
            "epsilons": list(p.epsilons),
            "scheme": p.scheme,
            "data_mode": p.data_mode,
            "directions": dirs,
        })
    data = {"grid": grid.to_json(), "plans": items}
    if path is not None:
        Path(path).write_text(json.dumps(data))
    return data


def battery_from_manifest(source):
    data = json.loads(Path(source).read_text()) if isinstance(source, (str, Path)) else source
    g = data["grid"]
    grid = TorusGrid(g["d"], g["N"], g["T"], g["Nt"])
    plans = []
    for item in data["plans"]:
        dirs = []
        for d in item["directions"]:
            if "population" in d:
                dirs.append((d["population"], _field_from_json(grid, d["field"])))
            else:
                dirs.append(tuple(None if c is None else _field_from_json(grid, c) for c in d["components"]))
        plans.append(ProbePlan(tuple(dirs), tuple(item["epsilons"]), item["scheme"], item["data_mode"], item["plan_id"]))
    return grid, plans
