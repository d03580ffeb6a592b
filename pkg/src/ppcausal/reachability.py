"""Causal diamonds by per-slice propagation of reachable xi-intervals.

Along a future causal curve of the reduced metric, eta never decreases, xi
may fall freely (the null generator -d_xi), and the cone condition caps the
rate of xi-growth:  dxi <= f(tau) deta - dtau^2 / (2 deta).  The reachable
set from a point is therefore, per (eta, tau), a half-line in xi described
by a single upper bound U; dually the backward reachable set of the target
point is a half-line above a lower bound L.  One eta-step of size deta
propagates the bounds with a max-plus (resp. min-plus) kernel

    U'(t') = max_t [ U(t) + f(t) deta - (t' - t)^2 / (2 deta) ],

which is evaluated both by an O(m^2) brute-force reference and by an O(m)
lower-envelope-of-parabolas transform; the two must agree to rounding.
The diamond is the per-slice intersection [L, U], with an explicit
"clipped" verdict whenever it touches the tau boundary of the grid (the
grid is a probe window, never a dynamics bound).

The module also hosts the curve-image harnesses: mapping sampled causal
curves through the norm projection or the conformal rescaling sigma and
classifying the images in a target model, plus the side-by-side comparison
of a diamond computed directly and through sigma.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ._util import axis_nodes
from .geodesics import sample_causal_curve, sample_causal_curve_cw
from .spacetimes import (CWModel, FUTURE, NULL, Point3, ReducedModel, TIMELIKE,
                         Tangent3, causal_class, conformal_scale, choose_scale_C,
                         metric_inner, scaled_constants)
from .timefunctions import Lemma2Certificate

UPPER = "upper_from_p1"
LOWER = "lower_from_p2"

VERDICT_BOUNDED = "bounded"
VERDICT_CLIPPED = "clipped"
VERDICT_EMPTY = "empty"


@dataclass(frozen=True)
class GridSpec:
    """Probe window: eta-slices and tau-nodes; xi is not gridded.

    xi_clip only truncates serialized output; it never enters the dynamics.
    """

    eta_min: float
    eta_max: float
    n_eta: int            # number of eta steps (slices = n_eta + 1)
    tau_min: float
    tau_max: float
    n_tau: int            # number of tau nodes
    xi_clip: float = 1e6

    def __post_init__(self):
        if not self.eta_min < self.eta_max:
            raise ValueError("eta_min must be below eta_max")
        if not self.tau_min < self.tau_max:
            raise ValueError("tau_min must be below tau_max")
        if self.n_eta < 1 or self.n_tau < 2:
            raise ValueError("need n_eta >= 1 and n_tau >= 2")
        if not self.xi_clip > 0.0:
            raise ValueError("xi_clip must be positive")

    @property
    def deta(self) -> float:
        return (self.eta_max - self.eta_min) / self.n_eta

    @property
    def dtau(self) -> float:
        return (self.tau_max - self.tau_min) / (self.n_tau - 1)

    def eta_nodes(self) -> np.ndarray:
        return axis_nodes(self.eta_min, self.eta_max, self.n_eta + 1)

    def tau_nodes(self) -> np.ndarray:
        return axis_nodes(self.tau_min, self.tau_max, self.n_tau)

    def doubled(self) -> "GridSpec":
        """Same spacings, doubled tau span, eta widened by half a span per side."""
        extra_tau = (self.n_tau - 1) // 2
        dtau = self.dtau
        extra_eta = max(1, self.n_eta // 2)
        deta = self.deta
        return GridSpec(self.eta_min - extra_eta * deta,
                        self.eta_max + extra_eta * deta,
                        self.n_eta + 2 * extra_eta,
                        self.tau_min - extra_tau * dtau,
                        self.tau_max + extra_tau * dtau,
                        self.n_tau + 2 * extra_tau,
                        self.xi_clip)

    def to_json_dict(self) -> dict:
        return {"eta_min": self.eta_min, "eta_max": self.eta_max, "n_eta": self.n_eta,
                "tau_min": self.tau_min, "tau_max": self.tau_max, "n_tau": self.n_tau,
                "xi_clip": self.xi_clip}


@dataclass
class ValueFunction:
    """Per-slice xi-bounds over tau nodes; -inf/+inf mark unreachable nodes."""

    direction: str
    grid: GridSpec
    values: np.ndarray  # (n_eta + 1, n_tau)

    def slice(self, k: int) -> np.ndarray:
        return self.values[k]


# ---------------------------------------------------------------------------
# one propagation step: brute-force reference and parabola-envelope fast path


def _min_parabola_envelope(t_list, cost_list, a: float, out: np.ndarray) -> None:
    """out[j] = min over finite-cost i of cost[i] + a (t[j] - t[i])^2.

    Lower envelope of equal-curvature parabolas in one left-to-right sweep;
    nodes with non-finite cost do not contribute.
    """
    n = len(t_list)
    v = [0] * n           # indices of envelope parabolas
    z = [0.0] * (n + 1)   # breakpoints between consecutive envelope parabolas
    nv = 0
    for i in range(n):
        ci = cost_list[i]
        if not (ci == ci and -math.inf < ci < math.inf):
            continue
        ti = t_list[i]
        while nv > 0:
            k = v[nv - 1]
            tk = t_list[k]
            s = ((ci - cost_list[k]) / a + (ti * ti - tk * tk)) / (2.0 * (ti - tk))
            if s <= z[nv - 1]:
                nv -= 1
            else:
                break
        if nv == 0:
            z[0] = -math.inf
        else:
            z[nv] = s
        v[nv] = i
        nv += 1
        z[nv] = math.inf
    if nv == 0:
        out[:] = math.inf
        return
    kk = 0
    for j in range(n):
        tj = t_list[j]
        while z[kk + 1] < tj:
            kk += 1
        i = v[kk]
        dt = tj - t_list[i]
        out[j] = cost_list[i] + a * (dt * dt)


_SQ_CACHE: dict = {}


def _sq_matrix(tau_nodes: np.ndarray):
    """Cached (t_j - t_i)^2 matrix plus a work buffer for the brute path.

    The shared buffer makes the brute reference an order of magnitude
    faster (no 32 MB allocation per step) at the price of not being
    reentrant; the fast path does not use it.
    """
    key = (tau_nodes.shape[0], tau_nodes.tobytes())
    hit = _SQ_CACHE.get(key)
    if hit is None:
        if len(_SQ_CACHE) >= 2:
            _SQ_CACHE.clear()
        sq = np.square(tau_nodes[:, None] - tau_nodes[None, :])
        hit = (sq, np.empty_like(sq))
        _SQ_CACHE[key] = hit
    return hit


def propagate_step(values: np.ndarray, deta: float, f_nodes: np.ndarray,
                   tau_nodes: np.ndarray, direction: str,
                   method: str = "fast") -> np.ndarray:
    """Advance one eta-slice of xi-bounds by one step of size deta.

    direction UPPER propagates the forward bound U' = max_t [U + f deta -
    (t'-t)^2/(2 deta)]; LOWER the backward bound with max replaced by min
    and the signs of the gain/penalty flipped.  Sentinels (-inf for UPPER,
    +inf for LOWER) absorb.  method is "fast" (envelope) or "brute"
    (reference); both evaluate the same float expressions.
    """
    if not deta > 0.0:
        raise ValueError("deta must be positive")
    values = np.asarray(values, dtype=float)
    f_nodes = np.asarray(f_nodes, dtype=float)
    tau_nodes = np.asarray(tau_nodes, dtype=float)
    if not (values.shape == f_nodes.shape == tau_nodes.shape) or values.ndim != 1:
        raise ValueError("values, f_nodes and tau_nodes must be matching 1-d arrays")
    if direction not in (UPPER, LOWER):
        raise ValueError("unknown direction %r" % (direction,))
    finite = np.isfinite(values)
    if not finite.any():
        raise ValueError("slice has no finite node to propagate from")
    a = 1.0 / (2.0 * deta)
    if direction == UPPER:
        cost = np.negative(values + f_nodes * deta)
    else:
        cost = values - f_nodes * deta
    if method == "fast":
        out = np.empty_like(values)
        _min_parabola_envelope(tau_nodes.tolist(), cost.tolist(), a, out)
    elif method == "brute":
        sq, work = _sq_matrix(tau_nodes)
        np.multiply(sq, a, out=work)
        work += cost[None, :]
        out = work.min(axis=1)
    else:
        raise ValueError("method must be 'fast' or 'brute'")
    if direction == UPPER:
        out = np.negative(out)
    return out


# ---------------------------------------------------------------------------
# diamonds


@dataclass
class DiamondResult:
    """Per-slice intervals [L, U] of the diamond plus summary metrics."""

    model: ReducedModel
    p1: Point3
    p2: Point3
    grid: GridSpec
    upper: Optional[ValueFunction]
    lower: Optional[ValueFunction]
    occupied: np.ndarray          # (n_eta + 1, n_tau) bool
    verdict: str
    n_cells: int
    max_abs_x: float
    bbox: Optional[dict]          # {"xi": [lo, hi], "eta": [...], "tau": [...]}
    k_range: tuple = (0, 0)

    @property
    def L(self) -> np.ndarray:
        return self.lower.values

    @property
    def U(self) -> np.ndarray:
        return self.upper.values

    def slice_triples(self, k: int, clip: bool = True) -> list:
        """Occupied [tau, L, U] triples of slice k (xi clipped for reporting)."""
        tau = self.grid.tau_nodes()
        cap = self.grid.xi_clip
        triples = []
        for j in np.flatnonzero(self.occupied[k]):
            lo, hi = self.L[k, j], self.U[k, j]
            if clip:
                lo, hi = max(lo, -cap), min(hi, cap)
            triples.append([float(tau[j]), float(lo), float(hi)])
        return triples

    def to_json_dict(self, include_slices: bool = True) -> dict:
        out = {
            "grid": self.grid.to_json_dict(),
            "p1": list(self.p1), "p2": list(self.p2),
            "verdict": self.verdict,
            "n_cells": self.n_cells,
            "max_abs_x": self.max_abs_x,
            "bbox": self.bbox,
        }
        if include_slices:
            eta = self.grid.eta_nodes()
            k1, k2 = self.k_range
            out["slices"] = [{"eta": float(eta[k]), "cells": self.slice_triples(k)}
                             for k in range(k1, k2 + 1)]
        return out


def _nearest_index(nodes: np.ndarray, value: float) -> int:
    return int(np.argmin(np.abs(nodes - value)))


def _inside(lo: float, hi: float, value: float) -> bool:
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    return lo - tol <= value <= hi + tol


def compute_diamond(model: ReducedModel, p1, p2, grid: GridSpec,
                    method: str = "fast") -> DiamondResult:
    """Intersection of the forward reach of p1 with the backward reach of p2.

    Endpoints are snapped to the nearest eta-slice and tau-node.  The
    verdict is "empty" when eta2 < eta1 or no cell survives the
    intersection, "clipped" when an occupied cell touches the tau boundary
    (enlarge the grid before trusting any bound), and "bounded" otherwise.
    """
    p1 = Point3(*p1)
    p2 = Point3(*p2)
    for p in (p1, p2):
        if not _inside(grid.eta_min, grid.eta_max, p.eta):
            raise ValueError("endpoint eta outside the grid window")
        if not _inside(grid.tau_min, grid.tau_max, p.tau):
            raise ValueError("endpoint tau outside the grid window")
    n_slices = grid.n_eta + 1
    tau = grid.tau_nodes()
    shape = (n_slices, grid.n_tau)
    Uv = np.full(shape, -np.inf)
    Lv = np.full(shape, np.inf)
    occupied = np.zeros(shape, dtype=bool)
    upper = ValueFunction(UPPER, grid, Uv)
    lower = ValueFunction(LOWER, grid, Lv)

    if p2.eta < p1.eta:
        return DiamondResult(model, p1, p2, grid, upper, lower, occupied,
                             VERDICT_EMPTY, 0, 0.0, None)

    eta_nodes = grid.eta_nodes()
    k1 = _nearest_index(eta_nodes, p1.eta)
    k2 = _nearest_index(eta_nodes, p2.eta)
    j1 = _nearest_index(tau, p1.tau)
    j2 = _nearest_index(tau, p2.tau)
    f_nodes = np.asarray(model.f(tau), dtype=float)
    deta = grid.deta

    Uv[k1, j1] = p1.xi
    for k in range(k1, k2):
        Uv[k + 1] = propagate_step(Uv[k], deta, f_nodes, tau, UPPER, method)
    Lv[k2, j2] = p2.xi
    for k in range(k2, k1, -1):
        Lv[k - 1] = propagate_step(Lv[k], deta, f_nodes, tau, LOWER, method)

    band = slice(k1, k2 + 1)
    occupied[band] = (np.isfinite(Uv[band]) & np.isfinite(Lv[band])
                      & (Lv[band] <= Uv[band]))
    n_cells = int(occupied.sum())
    if n_cells == 0:
        return DiamondResult(model, p1, p2, grid, upper, lower, occupied,
                             VERDICT_EMPTY, 0, 0.0, None, (k1, k2))

    ks, js = np.nonzero(occupied)
    f0_occ = model.f0(tau[js])
    absxi = np.maximum(np.abs(Lv[ks, js]), np.abs(Uv[ks, js]))
    max_abs_x = float(np.max(absxi / f0_occ))
    bbox = {
        "xi": [float(np.min(Lv[ks, js])), float(np.max(Uv[ks, js]))],
        "eta": [float(eta_nodes[ks.min()]), float(eta_nodes[ks.max()])],
        "tau": [float(tau[js.min()]), float(tau[js.max()])],
    }
    clipped = bool(js.min() == 0 or js.max() == grid.n_tau - 1)
    verdict = VERDICT_CLIPPED if clipped else VERDICT_BOUNDED
    return DiamondResult(model, p1, p2, grid, upper, lower, occupied,
                         verdict, n_cells, max_abs_x, bbox, (k1, k2))


@dataclass(frozen=True)
class CompactnessReport:
    status: str                  # pass | fail | inconclusive
    checks: dict
    metrics: dict

    def to_json_dict(self) -> dict:
        return {"status": self.status, "checks": dict(self.checks),
                "metrics": dict(self.metrics)}


def verify_compactness(result: DiamondResult, cert: Lemma2Certificate,
                       stability_rel_tol: float = 0.01) -> CompactnessReport:
    """Check the empirical diamond against the certificate bounds.

    A clipped input (or a clipped doubled-grid probe) yields the
    inconclusive status: the grid, not the spacetime, set the extent.
    """
    if result.verdict == VERDICT_CLIPPED:
        return CompactnessReport("inconclusive", {}, {"reason": "input diamond clipped"})
    if result.verdict == VERDICT_EMPTY:
        return CompactnessReport("pass", {"vacuous_empty": True}, {"n_cells": 0})

    doubled = compute_diamond(result.model, result.p1, result.p2,
                              result.grid.doubled())
    if doubled.verdict == VERDICT_CLIPPED:
        return CompactnessReport("inconclusive", {},
                                 {"reason": "doubled-grid probe clipped"})
    rel_change = abs(doubled.n_cells - result.n_cells) / max(result.n_cells, 1)
    tau_extent = max(abs(result.bbox["tau"][0]), abs(result.bbox["tau"][1]))
    xi_extent = max(abs(result.bbox["xi"][0]), abs(result.bbox["xi"][1]))
    checks = {
        "max_abs_x_within_d": bool(result.max_abs_x <= cert.d),
        "tau_extent_within_tau_max": bool(tau_extent <= cert.tau_max),
        "xi_extent_within_xi_max": bool(xi_extent <= cert.xi_max),
        "grid_stable": bool(rel_change < stability_rel_tol),
    }
    metrics = {
        "max_abs_x": result.max_abs_x, "d": cert.d,
        "tau_extent": tau_extent, "tau_max": cert.tau_max,
        "xi_extent": xi_extent, "xi_max": cert.xi_max,
        "n_cells": result.n_cells, "n_cells_doubled": doubled.n_cells,
        "cell_count_rel_change": rel_change,
    }
    status = "pass" if all(checks.values()) else "fail"
    return CompactnessReport(status, checks, metrics)


# ---------------------------------------------------------------------------
# curve-image harnesses


@dataclass(frozen=True)
class CausalImageReport:
    """Classification of mapped causal curves in a target model."""

    map_label: str
    n_curves: int
    n_segments: int
    fraction_causal: float
    worst_g_residual: float          # max over segments of g_target(v, v)
    min_projection_slack: Optional[float]  # min of |dx| - |d rho|; projection only

    def to_json_dict(self) -> dict:
        return {"map": self.map_label, "n_curves": self.n_curves,
                "n_segments": self.n_segments,
                "fraction_causal": self.fraction_causal,
                "worst_g_residual": self.worst_g_residual,
                "min_projection_slack": self.min_projection_slack}


MapSpec = Union[str, tuple, Callable[[Point3], Point3]]


def check_causal_image(mapping: MapSpec, source_model, target_model: ReducedModel,
                       n_curves: int, seed: int, n_steps: int = 40,
                       step: float = 0.1, start_band: float = 3.0) -> CausalImageReport:
    """Sample causal curves, map them, classify every image segment.

    mapping is "projection_pi" (full model source), ("sigma", C) (reduced
    source) or an arbitrary point map.  Image tangents are the finite
    differences of the mapped sample points, classified at the image
    segment midpoint.  For the projection the report additionally carries
    the slack min(|dx| - |d rho|), non-negative in exact arithmetic, which
    is the mechanism making images causal.
    """
    if mapping == "projection_pi":
        if not isinstance(source_model, CWModel):
            raise ValueError("projection_pi expects a full-model source")
        label = "projection_pi"
    elif isinstance(mapping, tuple) and len(mapping) == 2 and mapping[0] == "sigma":
        C = float(mapping[1])
        if not C >= 1.0:
            raise ValueError("sigma requires C >= 1")
        label = "sigma(C=%g)" % C
    elif callable(mapping):
        label = getattr(mapping, "__name__", "custom")
    else:
        raise ValueError("mapping must be 'projection_pi', ('sigma', C) or callable")

    n_segments = 0
    n_causal = 0
    worst_g = -math.inf
    min_slack = math.inf if mapping == "projection_pi" else None
    for idx in range(n_curves):
        start_rng = np.random.default_rng((seed, idx, 1))
        if isinstance(source_model, CWModel):
            x0 = start_rng.uniform(-start_band, start_band, size=source_model.n)
            curve = sample_causal_curve_cw(source_model, (0.0, 0.0, x0), n_steps,
                                           (seed, idx, 2), step)
            src_pts = curve.points
            src_x = src_pts[:, 2:]
        else:
            tau0 = start_rng.uniform(-start_band, start_band)
            curve = sample_causal_curve(source_model, Point3(0.0, 0.0, tau0),
                                        n_steps, (seed, idx, 2), step)
            src_pts = curve.points
            src_x = None

        if mapping == "projection_pi":
            rho = np.linalg.norm(src_x, axis=1)
            mapped = np.column_stack([src_pts[:, 0], src_pts[:, 1], rho])
            slack = (np.linalg.norm(np.diff(src_x, axis=0), axis=1)
                     - np.abs(np.diff(rho)))
            min_slack = min(min_slack, float(np.min(slack)))
        elif isinstance(mapping, tuple):
            C = float(mapping[1])
            mapped = np.column_stack([src_pts[:, 0] / (C * C), src_pts[:, 1],
                                      src_pts[:, 2] / C])
        else:
            mapped = np.array([list(mapping(Point3(*row[:3]))) for row in src_pts])

        deltas = np.diff(mapped, axis=0)
        mids = 0.5 * (mapped[:-1] + mapped[1:])
        for m, dlt in zip(mids, deltas):
            cc = causal_class(target_model, Point3(*m), Tangent3(*dlt))
            g = metric_inner(target_model, Point3(*m), Tangent3(*dlt), Tangent3(*dlt))
            worst_g = max(worst_g, float(g))
            if cc.kind in (TIMELIKE, NULL) and cc.orientation == FUTURE:
                n_causal += 1
            n_segments += 1
    return CausalImageReport(label, n_curves, n_segments,
                             n_causal / n_segments if n_segments else 0.0,
                             worst_g, min_slack)


@dataclass
class ScalingComparison:
    """Diamond computed directly vs through the conformal rescaling."""

    C: float
    direct: DiamondResult
    scaled: DiamondResult
    per_slice_symmdiff: list
    total_symmdiff: int
    bbox_commutes: bool

    def to_json_dict(self) -> dict:
        return {
            "C": self.C,
            "direct": self.direct.to_json_dict(include_slices=False),
            "scaled": self.scaled.to_json_dict(include_slices=False),
            "per_slice_symmdiff": list(self.per_slice_symmdiff),
            "total_symmdiff": self.total_symmdiff,
            "bbox_commutes": self.bbox_commutes,
        }


def diamond_via_scaling(model: ReducedModel, p1, p2, grid: GridSpec,
                        margin: float = 0.5, method: str = "fast") -> ScalingComparison:
    """Compare the direct diamond with the diamond of the sigma-image instance.

    The rescaled instance uses C from :func:`choose_scale_C` (C = 1 when
    eta2 is already subcritical), the scaled constants (c1/C, c2/C), the
    sigma-image endpoints and the sigma-image grid window.  Agreement is
    measured per slice as the symmetric difference of occupied cells (cells
    correspond by index under sigma); it is reported, not asserted.
    """
    p1 = Point3(*p1)
    p2 = Point3(*p2)
    if p2.eta < p1.eta:
        raise ValueError("need eta2 >= eta1")
    direct = compute_diamond(model, p1, p2, grid, method)
    span = p2.eta - p1.eta
    C = choose_scale_C(span, model.c1, margin) if span > 0.0 else 1.0
    c1s, c2s = scaled_constants(model.c1, model.c2, C)
    scaled_model = ReducedModel.quadratic(c1s, c2s)
    sgrid = GridSpec(grid.eta_min, grid.eta_max, grid.n_eta,
                     grid.tau_min / C, grid.tau_max / C, grid.n_tau,
                     grid.xi_clip / (C * C))
    scaled = compute_diamond(scaled_model, conformal_scale(p1, C),
                             conformal_scale(p2, C), sgrid, method)
    xor = direct.occupied ^ scaled.occupied
    per_slice = [int(c) for c in xor.sum(axis=1)]
    bbox_commutes = _bbox_commutes(direct, C)
    return ScalingComparison(C, direct, scaled, per_slice, int(xor.sum()),
                             bbox_commutes)


def _bbox_commutes(direct: DiamondResult, C: float) -> bool:
    """sigma(bbox(K)) == bbox(sigma(K)) as exact float comparisons."""
    if direct.bbox is None:
        return True
    ks, js = np.nonzero(direct.occupied)
    tau = direct.grid.tau_nodes()
    mapped_tau = tau[js] / C
    mapped_L = direct.L[ks, js] / (C * C)
    mapped_U = direct.U[ks, js] / (C * C)
    bbox_of_image = (float(np.min(mapped_L)), float(np.max(mapped_U)),
                     float(np.min(mapped_tau)), float(np.max(mapped_tau)))
    b = direct.bbox
    image_of_bbox = (b["xi"][0] / (C * C), b["xi"][1] / (C * C),
                     b["tau"][0] / C, b["tau"][1] / C)
    return bbox_of_image == image_of_bbox
