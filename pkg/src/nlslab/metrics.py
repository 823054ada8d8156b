"""Space-time norms of trajectories, envelope ratio tables and drift scaling studies."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .conservation import CorrectionEngine, quadratic_densities
from .envelope import Envelope
from .lattice import DomainError, Field, GridSpec, Localizer, UnitPartition, spatial_partition, unit_bump
from .solver import SolverConfig, Trajectory, simulate
from .symbolic.symbols import TrilinearSymbol

MAX_CADENCE = 0.1
DEGENERACY_FLOOR = 1e-12
GROWTH_POWER = 0.25  # half the power the bilinear normalization removes


def time_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoid weights; the snapshot cadence must not exceed MAX_CADENCE."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise DomainError("time quadrature needs at least two snapshots")
    dt = np.diff(times)
    if dt.max() > MAX_CADENCE + 1e-12:
        raise DomainError(f"snapshot cadence {dt.max():.3g} exceeds {MAX_CADENCE}")
    w = np.zeros(times.size)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _dx_spectral(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    return np.fft.ifft(1j * grid.xi * np.fft.fft(f))


def _shift(grid: GridSpec, f: np.ndarray, x0: float) -> np.ndarray:
    """f(. + x0) spectrally."""
    if x0 == 0:
        return f
    return np.fft.ifft(np.fft.fft(f) * np.exp(1j * grid.xi * x0))


def bilinear_density(u1: np.ndarray, u2: np.ndarray, grid: GridSpec, x0: float) -> np.ndarray:
    """d_x(u1 conj(u2(. + x0))) on the grid."""
    return _dx_spectral(grid, u1 * np.conj(_shift(grid, u2, x0)))


def _bin_samples(traj: Trajectory, partition: UnitPartition, bins) -> np.ndarray:
    """(n_snapshots, n_bins, N) physical samples of the projections u_k."""
    grid = traj.grid
    mults = np.array([partition(k, grid.xi) for k in bins])
    out = np.empty((len(traj.times), len(bins), grid.num_points), dtype=complex)
    for i, u in enumerate(traj.fields()):
        out[i] = np.fft.ifft(u.coefficients[None, :] * mults, axis=1) * grid.num_points
    return out


# wave packet norm ----------------------------------------------------------------------------

def _upsample(grid: GridSpec, dens: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Trigonometric interpolation of a periodic density onto a grid ``factor`` times finer."""
    if factor == 1:
        return grid.x, dens
    n = grid.num_points
    m = n * factor
    spec = np.fft.fft(dens)
    fine = np.zeros(m, dtype=complex)
    half = n // 2
    fine[:half] = spec[:half]
    fine[-half:] = spec[-half:]
    x = grid.x[0] + grid.dx / factor * np.arange(m)
    return x, np.real(np.fft.ifft(fine)) * factor


def _tube_masses(grid: GridSpec, dens: np.ndarray, shift: float, scale: float,
                 samples_per_tube: int = 64) -> np.ndarray:
    """int chi_j(x - shift)^2 dens dx for every tube j of the spatial partition.

    The density is interpolated so that each tube carries ``samples_per_tube``
    quadrature nodes; the bump is not band-limited and a coarse grid under-resolves it.
    """
    centres, h = spatial_partition(grid, scale)
    count = centres.size
    factor = 1 << max(0, int(np.ceil(np.log2(samples_per_tube * grid.dx / h))))
    x, dens = _upsample(grid, dens, factor)
    dx = grid.dx / factor
    p = (x - shift - centres[0]) / h
    j0 = np.floor(p)
    frac = p - j0
    j0 = j0.astype(int) % count
    w0 = unit_bump(frac) ** 2 * dens * dx
    w1 = unit_bump(frac - 1.0) ** 2 * dens * dx
    return (np.bincount(j0, weights=w0, minlength=count)
            + np.bincount((j0 + 1) % count, weights=w1, minlength=count))


def x_norm(traj: Trajectory, partition: UnitPartition, bins=None, scale: float = 1.0,
           window: tuple[float, float] | None = None) -> tuple[float, dict]:
    """Wave-packet norm over one unit time window; returns (||u||_X, {k: ||u_k||_X_k}).

    Tubes chi_j(x - 2 t k) follow the group line of bin k; t is measured from
    the start of the window.
    """
    times = traj.times
    if window is None:
        window = (float(times[0]), float(times[0]) + 1.0)
    t0, t1 = window
    sel = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    if times[sel].size < 2 or times[sel][-1] - times[sel][0] < (t1 - t0) - 1e-9:
        raise DomainError("the trajectory does not cover the time window")
    bins = list(partition.bins) if bins is None else list(bins)
    per_bin = {}
    grid = traj.grid
    idx = np.nonzero(sel)[0]
    mults = {k: partition(k, grid.xi) for k in bins}
    tube_max = {k: None for k in bins}
    for i in idx:
        coef = traj.field(i).coefficients
        t = times[i] - t0
        for k in bins:
            uk = np.fft.ifft(coef * mults[k]) * grid.num_points
            m = _tube_masses(grid, np.abs(uk) ** 2, 2 * t * k, scale)
            tube_max[k] = m if tube_max[k] is None else np.maximum(tube_max[k], m)
    for k in bins:
        per_bin[int(k)] = float(np.sqrt(np.sum(tube_max[k])))
    total = float(np.sqrt(sum(v * v for v in per_bin.values())))
    return total, per_bin


def x_norm_windows(traj: Trajectory, partition: UnitPartition, bins=None, scale: float = 1.0
                   ) -> tuple[float, dict]:
    """Max of the X norm over the unit windows tiling the trajectory's time span."""
    t0, t1 = float(traj.times[0]), float(traj.times[-1])
    n = max(1, int(np.floor(t1 - t0 + 1e-9)))
    best, best_bins = -1.0, {}
    for w in range(n):
        total, per = x_norm(traj, partition, bins, scale, (t0 + w, t0 + w + 1))
        if total > best:
            best, best_bins = total, per
    return best, best_bins


# norm report ---------------------------------------------------------------------------------

@dataclass
class NormReport:
    bins: list[int]
    eps: float
    linf_l2: dict
    l6: dict
    bilinear: dict  # (k1, k2, x0) -> ||d_x(u_k1 conj u_k2(. + x0))||_{L2_tx}
    x_total: float | None
    x_bins: dict
    envelope: Envelope | None
    ratios: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)

    def per_bin_rows(self) -> list[dict]:
        rows = []
        for k in self.bins:
            rows.append({"k": k, "c_k": self.envelope[k] if self.envelope else float("nan"),
                         "linf_l2": self.linf_l2[k], "l6": self.l6[k],
                         "x_k": self.x_bins.get(k, float("nan")),
                         "ratio_uk_ee": self.ratios.get("uk-ee", {}).get(k, float("nan")),
                         "ratio_uk_se": self.ratios.get("uk-se", {}).get(k, float("nan"))})
        return rows

    def pair_rows(self) -> list[dict]:
        rows = []
        for (k1, k2, x0), v in sorted(self.bilinear.items()):
            rows.append({"k1": k1, "k2": k2, "x0": x0, "bilinear": v,
                         "ratio": self.ratios.get("uab-bi", {}).get((k1, k2, x0), float("nan"))})
        return rows

    def summary(self) -> dict:
        def finite_max(d):
            vals = [v for v in d.values() if np.isfinite(v)]
            return max(vals) if vals else float("nan")

        out = {"eps": self.eps, "bins": self.bins, "excluded_bins": self.excluded,
               "x_norm": self.x_total}
        for key in ("uk-ee", "uk-se", "uk-bi", "uab-bi"):
            table = self.ratios.get(key, {})
            out[key] = {"max_ratio": finite_max(table) if table else float("nan"),
                        "entries": len(table),
                        "finite": bool(all(np.isfinite(v) for v in table.values()))}
        return out

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [_write_rows(directory / "norms_bins.csv", self.per_bin_rows()),
                 _write_rows(directory / "norms_pairs.csv", self.pair_rows())]
        js = directory / "norms_summary.json"
        js.write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        paths.append(js)
        return paths


def _write_rows(path: Path, rows: list[dict]) -> Path:
    with path.open("w", newline="") as fh:
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: (f"{v:.12e}" if isinstance(v, float) else v) for k, v in r.items()})
    return path


def norms(traj: Trajectory, partition: UnitPartition, envelope: Envelope | None = None,
          eps: float | None = None, x0_list: Sequence[float] | None = None, bins=None,
          pairs: Sequence[tuple[int, int]] | None = None, with_x: bool = True) -> NormReport:
    """Per-bin and pairwise norms with ratio tables against the envelope bounds."""
    grid = traj.grid
    eps = traj.eps if eps is None else eps
    if x0_list is None:
        x0_list = (0.0, grid.circumference / 16, grid.circumference / 8)
    bins = [int(k) for k in (partition.bins if bins is None else bins)]
    w = time_weights(traj.times)
    samples = _bin_samples(traj, partition, bins)
    dx = grid.dx
    linf = {k: float(np.sqrt(np.max(np.sum(np.abs(samples[:, i]) ** 2, axis=1) * dx)))
            for i, k in enumerate(bins)}
    l6 = {k: float(np.sum(w * np.sum(np.abs(samples[:, i]) ** 6, axis=1) * dx) ** (1 / 6))
          for i, k in enumerate(bins)}
    if pairs is None:
        pairs = [(k1, k2) for k1 in bins for k2 in bins]
    pos = {k: i for i, k in enumerate(bins)}
    bilinear = {}
    for k1, k2 in pairs:
        for x0 in x0_list:
            acc = 0.0
            for ti in range(len(traj.times)):
                d = bilinear_density(samples[ti, pos[k1]], samples[ti, pos[k2]], grid, x0)
                acc += w[ti] * np.sum(np.abs(d) ** 2) * dx
            bilinear[(k1, k2, float(x0))] = float(np.sqrt(acc))
    x_total, x_bins = (x_norm_windows(traj, partition, bins) if with_x else (None, {}))

    ratios, excluded = {}, []
    if envelope is not None:
        ck = {k: envelope[k] for k in bins}
        good = [k for k in bins if ck[k] > DEGENERACY_FLOOR]
        excluded = [k for k in bins if ck[k] <= DEGENERACY_FLOOR]
        ratios["uk-ee"] = {k: linf[k] / (eps * ck[k]) for k in good}
        ratios["uk-se"] = {k: l6[k] / (eps * ck[k]) ** (2 / 3) for k in good}
        ratios["uk-bi"] = {k: bilinear[(k, k, 0.0)] / (eps ** 2 * ck[k] ** 2)
                           for k in good if (k, k, 0.0) in bilinear}
        ratios["uab-bi"] = {key: v / (eps ** 2 * ck[key[0]] * ck[key[1]]
                                      * (1 + (key[0] - key[1]) ** 2) ** 0.25)
                            for key, v in bilinear.items() if key[0] in good and key[1] in good}
    return NormReport(bins, float(eps), linf, l6, bilinear, x_total, x_bins, envelope, ratios,
                      excluded)


# global bounds ----------------------------------------------------------------------------------

def sobolev_weight(grid: GridSpec, s: float = -0.5) -> np.ndarray:
    """(1 + xi^2)^(s/2) on the grid frequencies."""
    return (1 + grid.xi ** 2) ** (s / 2)


@dataclass
class GlobalBounds:
    eps: float
    linf_l2: float
    l6: float
    bilinear: dict  # x0 -> ||d_x(u conj u(. + x0))||_{L2_t H^{-1/2}}

    def ratios(self) -> dict:
        return {"main-L2": self.linf_l2 / self.eps,
                "main-Str": self.l6 / self.eps ** (2 / 3),
                "main-bi": {x0: v / self.eps ** 2 for x0, v in self.bilinear.items()}}

    def summary(self) -> dict:
        r = self.ratios()
        return {"eps": self.eps,
                "main-L2": {"value": self.linf_l2, "ratio": r["main-L2"]},
                "main-Str": {"value": self.l6, "ratio": r["main-Str"]},
                "main-bi": {str(x0): {"value": v, "ratio": r["main-bi"][x0]}
                            for x0, v in self.bilinear.items()}}


def global_bounds(traj: Trajectory, eps: float | None = None,
                  x0_list: Sequence[float] | None = None) -> GlobalBounds:
    grid = traj.grid
    eps = traj.eps if eps is None else eps
    if x0_list is None:
        x0_list = (0.0, grid.circumference / 16, grid.circumference / 8)
    w = time_weights(traj.times)
    weight = sobolev_weight(grid)
    n = grid.num_points
    linf = 0.0
    l6 = 0.0
    bi = {float(x0): 0.0 for x0 in x0_list}
    for i, u in enumerate(traj.fields()):
        s = u.samples
        linf = max(linf, u.norm())
        l6 += w[i] * np.sum(np.abs(s) ** 6) * grid.dx
        for x0 in bi:
            prod = s * np.conj(_shift(grid, s, x0))
            coef = np.fft.fft(prod) / n * 1j * grid.xi * weight
            # ||f||_{L2}^2 = L sum |fh|^2 for our coefficient convention
            bi[x0] += w[i] * grid.circumference * np.sum(np.abs(coef) ** 2)
    return GlobalBounds(float(eps), float(linf), float(l6 ** (1 / 6)),
                        {x0: float(np.sqrt(v)) for x0, v in bi.items()})


def separation_profile(reports: Sequence[NormReport], separations: Sequence[int], x0: float = 0.0
                       ) -> dict:
    """Max normalized bilinear ratio at each bin separation |k1 - k2|, over all reports."""
    prof = {}
    for s in separations:
        vals = [v for r in reports for (k1, k2, xx), v in r.ratios.get("uab-bi", {}).items()
                if abs(k1 - k2) == s and xx == x0 and np.isfinite(v)]
        prof[int(s)] = max(vals) if vals else float("nan")
    finite = [v for v in prof.values() if np.isfinite(v) and v > 0]
    spread = max(finite) / min(finite) if len(finite) == len(prof) and finite else float("nan")
    seps = sorted(int(s) for s in separations)
    ordered = [prof[s] for s in seps]
    power = float("nan")
    if len(finite) == len(prof) and len(seps) > 1:
        power = float(np.polyfit(np.log(seps), np.log(ordered), 1)[0])
    # growth counts when it is monotone and behaves like a power of the separation
    increasing = bool(len(ordered) > 1 and all(b > a for a, b in zip(ordered, ordered[1:]))
                      and power > GROWTH_POWER)
    return {"ratios": prof, "spread": spread, "power": power, "monotone_growth": increasing}


# drift scaling ----------------------------------------------------------------------------------

@dataclass
class ScalingReport:
    eps: list[float]
    raw_drift: list[float]
    modified_drift: list[float]
    remainder_integral: list[float]
    raw_slope: float
    raw_ci: tuple[float, float]
    raw_r2: float
    modified_slope: float
    modified_ci: tuple[float, float]
    modified_r2: float
    degenerate: bool
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [{"quantity": "raw_mass_drift", "slope": self.raw_slope, "ci_low": self.raw_ci[0],
                 "ci_high": self.raw_ci[1], "r2": self.raw_r2, "degenerate": self.degenerate},
                {"quantity": "modified_mass_drift", "slope": self.modified_slope,
                 "ci_low": self.modified_ci[0], "ci_high": self.modified_ci[1],
                 "r2": self.modified_r2, "degenerate": self.degenerate}]

    def to_csv(self, path) -> Path:
        return _write_rows(Path(path), self.rows())

    def as_dict(self) -> dict:
        return {"eps": self.eps, "raw_drift": self.raw_drift, "modified_drift": self.modified_drift,
                "remainder_integral": self.remainder_integral, "rows": self.rows(),
                "degenerate": self.degenerate, "notes": self.notes}


def _fit(eps, y):
    x = np.log(np.asarray(eps))
    ly = np.log(np.asarray(y))
    res = stats.linregress(x, ly)
    n = len(x)
    if n > 2:
        tq = stats.t.ppf(0.975, n - 2)
        ci = (res.slope - tq * res.stderr, res.slope + tq * res.stderr)
    else:
        ci = (float("nan"), float("nan"))
    return float(res.slope), (float(ci[0]), float(ci[1])), float(res.rvalue ** 2)


def raw_mass_drift(u: Field, engine: CorrectionEngine) -> float:
    """d/dt int |A0 u|^2 = 2 Re <A0(-i P_S C(u)), A0 u>; the linear flow does not contribute."""
    grid = u.grid
    modes = engine.modes
    v = u.coefficients[np.mod(modes, grid.num_points)]
    w = -1j * engine.nonlinearity(v)
    a0 = engine.a.a0(grid.spacing * modes) if not engine.a.is_identity else 1.0
    return float(2 * grid.circumference * np.real(np.sum(a0 * w * np.conj(a0 * v))))


def scaling_study(c: TrilinearSymbol, data_family: Callable[[float], Field], eps_ladder: Sequence[float],
                  cfg: SolverConfig, a: Localizer | None = None, floor: float = 1e-11) -> ScalingReport:
    """Log-log slopes of the raw and corrected localized mass drifts against eps.

    The corrected drift is measured by five-point differencing of int M_a + B4_m
    over a short run, independently of the sextic remainder it should equal.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if len(eps_ladder) < 3:
        raise ValueError("the ladder needs at least three eps values")
    a = a or Localizer.identity()
    run_cfg = cfg.replace(horizon=4 * cfg.dt, dense=True, snapshot_every=4 * cfg.dt)
    engine = None
    raw, mod, rem, masses = [], [], [], []
    for e in eps_ladder:
        u0 = data_family(e)
        traj = simulate(u0, c, run_cfg)
        if engine is None:
            engine = CorrectionEngine.for_trajectory(traj, c, a)
        vals = []
        for j in range(5):
            u = traj.dense_field(j)
            m = quadratic_densities(u, a, 0.0)[0].integral().real
            vals.append(m + engine.correction("mass", u).integral().real)
            if j == 2:
                rem.append(abs(engine.remainder("mass", u).integral().real))
                masses.append(m)
        d = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * cfg.dt)
        mod.append(abs(d))
        raw.append(abs(raw_mass_drift(traj.dense_field(2), engine)))
    scale = max(masses) if masses else 1.0
    degenerate = max(raw) <= floor * scale and max(mod) <= floor * scale
    notes = []
    if degenerate:
        notes.append("both drifts sit at the numerical floor; the regression is not meaningful")
        nan = float("nan")
        return ScalingReport(eps_ladder, raw, mod, rem, nan, (nan, nan), nan, nan, (nan, nan), nan,
                             True, notes)
    rs, rci, rr2 = _fit(eps_ladder, np.maximum(raw, 1e-300))
    ms, mci, mr2 = _fit(eps_ladder, np.maximum(mod, 1e-300))
    return ScalingReport(eps_ladder, raw, mod, rem, rs, rci, rr2, ms, mci, mr2, False, notes)


__all__ = ["NormReport", "GlobalBounds", "ScalingReport", "norms", "x_norm", "x_norm_windows",
           "global_bounds", "scaling_study", "time_weights", "sobolev_weight", "bilinear_density",
           "raw_mass_drift", "separation_profile"]
