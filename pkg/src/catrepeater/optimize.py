"""Search over amplitude and tapped fraction for the fastest chain above a fidelity floor."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from . import analytic
from .analytic import LinkParams, RateReport

SURFACE_COLUMNS = ("alpha_sq", "tap", "T_seconds", "fidelity", "feasible")


@dataclass(frozen=True)
class SearchSpec:
    """Search box, grid and constraint.

    ``link`` supplies every link parameter except ``alpha_sq`` and ``tap``;
    its ``L0`` is the per-link length.
    """

    link: LinkParams
    n_links: int = 4
    alpha_sq_range: tuple[float, float] = (0.01, 0.5)
    tap_range: tuple[float, float] = (0.01, 0.45)
    grid_resolution: tuple[int, int] = (50, 45)
    fidelity_floor: float = 0.9
    rel_tol: float = 1e-4
    workers: int = 1

    def __post_init__(self):
        lo, hi = self.alpha_sq_range
        if not 0 < lo < hi <= 4.0:
            raise ValueError(f"alpha_sq_range must satisfy 0 < lo < hi <= 4, got {self.alpha_sq_range}")
        lo, hi = self.tap_range
        if not 0 < lo < hi < 0.5:
            raise ValueError(f"tap_range must satisfy 0 < lo < hi < 0.5, got {self.tap_range}")
        if min(self.grid_resolution) < 2:
            raise ValueError("grid_resolution needs at least 2 points per axis")
        if not 0.0 <= self.fidelity_floor <= 1.0:
            raise ValueError("fidelity_floor must lie in [0, 1]")


@dataclass(frozen=True)
class Point:
    alpha_sq: float
    tap: float
    time: float
    fidelity: float
    feasible: bool

    def key(self) -> tuple[float, float, float]:
        return (self.time, self.alpha_sq, self.tap)


@dataclass(frozen=True)
class OptimizationResult:
    feasible: bool
    alpha_sq: float
    tap: float
    report: RateReport
    surface: tuple[Point, ...] = field(repr=False)
    evaluations: int = 0

    @property
    def time(self) -> float:
        return self.report.total_time

    @property
    def fidelity(self) -> float:
        return self.report.postselected_fidelity


def evaluate(spec: SearchSpec, alpha_sq: float, tap: float) -> Point:
    report = analytic.chain_time(spec.link.with_(alpha_sq=alpha_sq, tap=tap), spec.n_links)
    fid = report.postselected_fidelity
    return Point(alpha_sq, tap, report.total_time, fid, fid >= spec.fidelity_floor)


def grid(spec: SearchSpec) -> tuple[np.ndarray, np.ndarray]:
    na, nt = spec.grid_resolution
    return np.linspace(*spec.alpha_sq_range, na), np.linspace(*spec.tap_range, nt)


def scan(spec: SearchSpec) -> list[Point]:
    alphas, taps = grid(spec)
    pairs = [(float(a), float(t)) for a in alphas for t in taps]
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(lambda p: evaluate(spec, *p), pairs))
    return [evaluate(spec, a, t) for a, t in pairs]


def _refine(spec: SearchSpec, start: Point) -> tuple[Point, int]:
    """Coordinate descent with shrinking steps, staying feasible and inside the box."""
    alphas, taps = grid(spec)
    steps = [alphas[1] - alphas[0], taps[1] - taps[0]]
    bounds = [spec.alpha_sq_range, spec.tap_range]
    best, evals = start, 0
    min_steps = [s * 1e-4 for s in steps]
    while steps[0] > min_steps[0] or steps[1] > min_steps[1]:
        moved = False
        for axis in (0, 1):
            for sign in (-1.0, 1.0):
                coords = [best.alpha_sq, best.tap]
                coords[axis] = min(max(coords[axis] + sign * steps[axis], bounds[axis][0]), bounds[axis][1])
                if coords == [best.alpha_sq, best.tap]:
                    continue
                cand = evaluate(spec, *coords)
                evals += 1
                if cand.feasible and cand.key() < best.key():
                    gain = (best.time - cand.time) / best.time
                    best = cand
                    if gain >= spec.rel_tol:
                        moved = True
        if not moved:
            steps = [s / 2.0 for s in steps]
    return best, evals


def optimize(spec: SearchSpec) -> OptimizationResult:
    """Grid scan then local refinement.

    Ties are broken toward smaller ``alpha_sq`` then smaller ``tap``.  If no
    grid point meets the floor, the result is flagged infeasible and carries
    the highest-fidelity point.
    """
    surface = scan(spec)
    feasible = [p for p in surface if p.feasible]
    if not feasible:
        best = min(surface, key=lambda p: (-p.fidelity, p.alpha_sq, p.tap))
        report = analytic.chain_time(spec.link.with_(alpha_sq=best.alpha_sq, tap=best.tap), spec.n_links)
        return OptimizationResult(False, best.alpha_sq, best.tap, report, tuple(surface), len(surface))
    start = min(feasible, key=Point.key)
    best, evals = _refine(spec, start)
    report = analytic.chain_time(spec.link.with_(alpha_sq=best.alpha_sq, tap=best.tap), spec.n_links)
    return OptimizationResult(True, best.alpha_sq, best.tap, report, tuple(surface), len(surface) + evals)


def small_amplitude_endpoint(spec: SearchSpec, alpha_sq: float = 1e-4, points: int = 400) -> Point:
    """Fastest feasible tap for a vanishing amplitude (the single-photon limit)."""
    taps = np.linspace(*spec.tap_range, points)
    cands = [evaluate(spec, alpha_sq, float(t)) for t in taps]
    ok = [p for p in cands if p.feasible]
    if not ok:
        return max(cands, key=lambda p: p.fidelity)
    best = min(ok, key=Point.key)
    # bisect the feasibility edge next to the best grid tap
    lo, hi = best.tap, min(best.tap + (taps[1] - taps[0]), spec.tap_range[1])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if evaluate(spec, alpha_sq, mid).feasible:
            lo = mid
        else:
            hi = mid
    edge = evaluate(spec, alpha_sq, lo)
    return edge if edge.time < best.time else best


def write_surface(points, stream: IO[str]) -> None:
    """Comma-separated surface with a header naming columns and units."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["alpha_sq", "tap", "T_seconds", "fidelity", "feasible"])
    for p in points:
        writer.writerow([f"{p.alpha_sq:.6g}", f"{p.tap:.6g}", _fmt(p.time), f"{p.fidelity:.6f}", int(p.feasible)])


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6g}"
