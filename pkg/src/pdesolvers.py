"""
Conservative finite-volume solvers for the traffic (LWR, 1-D) and
pedestrian (Hughes, 2-D) datasets

Schemes are of the type
    rho^{n+1}_j = rho^n_j - dt/dx (F_{j+1/2} - F_{j-1/2})
so total mass only changes by round-off.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
from numba import njit

from src.config import RANDSMAP_EIKONAL_MAX_SWEEPS, RANDSMAP_EIKONAL_TOL, RANDSMAP_SPEED_FLOOR
from src.containers import DataSet, save_dataset
from src.errors import InvalidArgumentError, InvalidStateError, StabilityError
from src.rng import gaussian, make_rng, uniform

logger = logging.getLogger(__name__)

_ADMISSIBLE_TOL = 1e-12
_BIG = 1e30


@dataclass
class TrajectorySample:
    """Selected snapshots of one trajectory"""
    snapshots: np.ndarray          # M x K
    times: np.ndarray              # K
    mass_drift: float = 0.0        # max relative drift over every step
    params: dict = field(default_factory=dict)


###############################################################################
# 1. LWR traffic model
###############################################################################

@dataclass
class Lwr1dConfig:
    """Periodic LWR road with flux f(rho) = v_max rho (1 - rho/rho_max)"""
    m_cells: int = 400
    x_lo: float = -5.0
    x_hi: float = 5.0
    v_max: float = 2.0
    rho_max: float = 1.0
    dt: float = 0.005
    t_end: float = 20.0
    amplitude_range: Tuple[float, float] = (0.5, 1.5)
    width_range: Tuple[float, float] = (0.2, 0.8)
    center_range: Tuple[float, float] = (-3.0, 3.0)
    noise_sigma: float = 0.02
    flux: str = "godunov"
    cfl_limit: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.m_cells < 2:
            raise InvalidArgumentError(f"m_cells must be at least 2, got {self.m_cells}")
        if not self.x_hi > self.x_lo:
            raise InvalidArgumentError("domain must satisfy x_lo < x_hi")
        if self.rho_max <= 0 or self.v_max <= 0:
            raise InvalidArgumentError("rho_max and v_max must be positive")
        if self.dt <= 0 or self.t_end < 0:
            raise InvalidArgumentError("dt must be positive and t_end non-negative")
        if self.flux not in ("godunov", "roe"):
            raise InvalidArgumentError(f"unknown flux '{self.flux}', expected 'godunov' or 'roe'")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.m_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.m_cells) + 0.5) * self.dx

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def _concave_flux(rho, v_max, rho_max):
    return v_max * rho * (1.0 - rho / rho_max)


def _godunov(rho_l, rho_r, v_max, rho_max):
    """Demand/supply form of the exact Godunov flux for a concave flux"""
    rho_star = 0.5 * rho_max
    demand = _concave_flux(np.minimum(rho_l, rho_star), v_max, rho_max)
    supply = _concave_flux(np.maximum(rho_r, rho_star), v_max, rho_max)
    return np.minimum(demand, supply)


def _roe(rho_l, rho_r, v_max, rho_max):
    """Roe flux with the Harten-Hyman entropy fix"""
    f_l = _concave_flux(rho_l, v_max, rho_max)
    f_r = _concave_flux(rho_r, v_max, rho_max)
    a_roe = v_max * (1.0 - (rho_l + rho_r) / rho_max)
    delta = np.maximum(0.0, v_max * (rho_l - rho_r) / rho_max)
    abs_a = np.abs(a_roe)
    fix = abs_a < delta
    abs_a = np.where(fix, (a_roe ** 2 + delta ** 2) / (2.0 * np.where(fix, delta, 1.0)), abs_a)
    return 0.5 * (f_l + f_r) - 0.5 * abs_a * (rho_r - rho_l)


def _check_range(values, rho_max, what):
    lo, hi = np.min(values), np.max(values)
    tol = _ADMISSIBLE_TOL * max(1.0, rho_max)
    if lo < -tol or hi > rho_max + tol:
        raise InvalidStateError(f"{what} out of range [0, {rho_max}]: min={lo:.3e}, max={hi:.3e}")


def lwr_godunov_flux(rho_l: float, rho_r: float, v_max: float = 2.0, rho_max: float = 1.0) -> float:
    """
    Exact Godunov interface flux

    min of f on [rho_l, rho_r] when rho_l <= rho_r, max of f on
    [rho_r, rho_l] otherwise.
    """
    _check_range(np.array([rho_l, rho_r]), rho_max, "density")
    return float(_godunov(float(rho_l), float(rho_r), v_max, rho_max))


def lwr_roe_flux(rho_l: float, rho_r: float, v_max: float = 2.0, rho_max: float = 1.0) -> float:
    _check_range(np.array([rho_l, rho_r]), rho_max, "density")
    return float(_roe(float(rho_l), float(rho_r), v_max, rho_max))


def van_leer_slopes(rho: np.ndarray) -> np.ndarray:
    """Periodic van Leer limited slopes; zero at extrema"""
    dm = rho - np.roll(rho, 1)
    dp = np.roll(rho, -1) - rho
    prod = dm * dp
    slopes = np.zeros_like(rho)
    mask = prod > 0
    slopes[mask] = 2.0 * prod[mask] / (dm[mask] + dp[mask])
    return slopes


def lwr_step(state: np.ndarray, cfg: Lwr1dConfig) -> np.ndarray:
    """One MUSCL/van Leer step with Godunov (or Roe) interface fluxes"""
    rho = np.asarray(state, dtype=np.float64)
    _check_range(rho, cfg.rho_max, "LWR state")

    ratio = cfg.dt / cfg.dx
    wave_speed = np.max(np.abs(cfg.v_max * (1.0 - 2.0 * rho / cfg.rho_max)))
    if wave_speed * ratio > cfg.cfl_limit:
        raise StabilityError(
            f"CFL violated: max|f'|*dt/dx = {wave_speed * ratio:.3f} > {cfg.cfl_limit}"
        )

    slopes = van_leer_slopes(rho)
    rho_l = rho + 0.5 * slopes                      # left state at i+1/2
    rho_r = np.roll(rho - 0.5 * slopes, -1)         # right state at i+1/2
    numerical_flux = _roe if cfg.flux == "roe" else _godunov
    F = numerical_flux(rho_l, rho_r, cfg.v_max, cfg.rho_max)

    return rho - ratio * (F - np.roll(F, 1))


def lwr_initial_condition(cfg: Lwr1dConfig, amplitude: float, width: float, center: float,
                          noise: Optional[np.ndarray] = None) -> np.ndarray:
    """Gaussian bump plus noise, clipped at zero and normalized to unit sum"""
    x = cfg.centers
    rho = amplitude * np.exp(-((x - center) ** 2) / (2.0 * width ** 2))
    if noise is not None:
        rho = rho + noise
    rho = np.clip(rho, 0.0, None)
    return rho / rho.sum()


def _integrate(rho0: np.ndarray, step: Callable[[np.ndarray], np.ndarray], n_steps: int,
               snap_steps: np.ndarray) -> Tuple[np.ndarray, float]:
    """Run n_steps, keep states at the (sorted) snap_steps, track mass drift"""
    mass0 = rho0.sum()
    snaps = np.empty((rho0.size, snap_steps.size))
    rho = rho0
    drift = 0.0
    k = 0
    for n in range(n_steps + 1):
        while k < snap_steps.size and snap_steps[k] == n:
            snaps[:, k] = rho.ravel()
            k += 1
        if n == n_steps or k == snap_steps.size:
            break
        rho = step(rho)
        drift = max(drift, abs(rho.sum() - mass0) / mass0)
    return snaps, drift


def _snapshot_steps(rng, n_steps: int, snaps_per_traj: int) -> np.ndarray:
    if snaps_per_traj < 1:
        raise InvalidArgumentError(f"snaps_per_traj must be at least 1, got {snaps_per_traj}")
    if snaps_per_traj > n_steps + 1:
        raise InvalidArgumentError(
            f"cannot select {snaps_per_traj} snapshots from {n_steps + 1} time levels"
        )
    return np.sort(rng.choice(n_steps + 1, size=snaps_per_traj, replace=False))


def lwr_summary_statistics(snapshots: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Mass-weighted mean position, variance and skewness per column"""
    mass = snapshots.sum(axis=0)
    mu = (x @ snapshots) / mass
    dev = x[:, None] - mu[None, :]
    var = np.sum(snapshots * dev ** 2, axis=0) / mass
    third = np.sum(snapshots * dev ** 3, axis=0) / mass
    skew = np.where(var > 0, third / np.power(np.where(var > 0, var, 1.0), 1.5), 0.0)
    return np.vstack([mu, var, skew])


def lwr_trajectory(cfg: Lwr1dConfig, traj_index: int, snaps_per_traj: int) -> TrajectorySample:
    """One seeded trajectory with uniformly random snapshot selection"""
    rng = make_rng(cfg.seed, [traj_index])
    a = uniform(rng, *cfg.amplitude_range, 1)[0]
    w = uniform(rng, *cfg.width_range, 1)[0]
    xc = uniform(rng, *cfg.center_range, 1)[0]
    noise = gaussian(rng, cfg.m_cells, cfg.noise_sigma)
    snap_steps = _snapshot_steps(rng, cfg.n_steps, snaps_per_traj)

    rho0 = lwr_initial_condition(cfg, a, w, xc, noise)
    snaps, drift = _integrate(rho0, lambda r: lwr_step(r, cfg), cfg.n_steps, snap_steps)
    return TrajectorySample(snaps, snap_steps * cfg.dt, drift,
                            {"amplitude": a, "width": w, "center": xc})


###############################################################################
# 2. Hughes pedestrian model
###############################################################################

@dataclass
class Hughes2dConfig:
    """Corridor with an optional rectangular obstacle; exit is the right edge"""
    nx: int = 200
    ny: int = 50
    x_lo: float = 0.0
    x_hi: float = 20.0
    y_lo: float = 0.0
    y_hi: float = 5.0
    obstacle: Optional[Tuple[float, float, float, float]] = (10.0, 11.0, 2.0, 3.0)
    v_max: float = 1.0
    rho_max: float = 5.0
    dt: float = 0.025
    t_end: float = 70.0
    amplitude_range: Tuple[float, float] = (1.2, 2.1)
    width_range: Tuple[float, float] = (1.6, 2.0)
    center_range: Tuple[float, float] = (1.5, 3.5)
    eikonal_tol: float = RANDSMAP_EIKONAL_TOL
    eikonal_max_sweeps: int = RANDSMAP_EIKONAL_MAX_SWEEPS
    speed_floor: float = RANDSMAP_SPEED_FLOOR
    eikonal_every: int = 1
    cfl_limit: float = 0.45
    seed: int = 0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InvalidArgumentError("grid needs at least 2 cells per direction")
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise InvalidArgumentError("domain bounds must be increasing")
        if self.rho_max <= 0 or self.v_max <= 0 or self.dt <= 0:
            raise InvalidArgumentError("rho_max, v_max and dt must be positive")
        if self.eikonal_every < 1:
            raise InvalidArgumentError("eikonal_every must be at least 1")
        if self.obstacle is not None:
            ox0, ox1, oy0, oy1 = self.obstacle
            inside = self.x_lo < ox0 < ox1 < self.x_hi and self.y_lo < oy0 < oy1 < self.y_hi
            if not inside:
                raise InvalidArgumentError(f"obstacle {self.obstacle} not strictly inside the domain")
            if not self.obstacle_mask().any():
                raise InvalidArgumentError("obstacle covers no cell centre")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates, each shaped (ny, nx)"""
        xc = self.x_lo + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.y_lo + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(xc, yc)

    def obstacle_mask(self) -> np.ndarray:
        X, Y = self.mesh()
        if self.obstacle is None:
            return np.zeros_like(X, dtype=bool)
        ox0, ox1, oy0, oy1 = self.obstacle
        return (X >= ox0) & (X <= ox1) & (Y >= oy0) & (Y <= oy1)


def _walking_speed(rho, cfg: Hughes2dConfig):
    return np.maximum(cfg.v_max * (1.0 - rho / cfg.rho_max), cfg.speed_floor)


@njit(cache=True, nogil=True)
def _fast_sweep(phi, slowness, blocked, dx, dy, tol, max_rounds):
    """
    Gauss-Seidel fast sweeping for |grad phi| = slowness

    phi is updated in place. The exit is a ghost column right of the grid
    with phi = 0; walls and blocked cells act as +inf. Returns the number of
    rounds (4 sweeps each) and the last sup-norm update.
    """
    ny, nx = phi.shape
    big = 1e30
    idx2 = 1.0 / (dx * dx)
    idy2 = 1.0 / (dy * dy)
    change = big
    rounds = 0
    while rounds < max_rounds:
        change = 0.0
        for sweep in range(4):
            for jj in range(ny):
                j = jj if sweep < 2 else ny - 1 - jj
                for ii in range(nx):
                    i = ii if (sweep == 0 or sweep == 3) else nx - 1 - ii
                    if blocked[j, i]:
                        continue
                    left = phi[j, i - 1] if i > 0 else big
                    right = phi[j, i + 1] if i < nx - 1 else 0.0
                    down = phi[j - 1, i] if j > 0 else big
                    up = phi[j + 1, i] if j < ny - 1 else big
                    a = min(left, right)
                    b = min(down, up)
                    if a >= big and b >= big:
                        continue
                    s = slowness[j, i]
                    u = min(a + s * dx, b + s * dy)
                    if u > max(a, b):
                        qa = idx2 + idy2
                        qb = -2.0 * (a * idx2 + b * idy2)
                        qc = a * a * idx2 + b * b * idy2 - s * s
                        disc = qb * qb - 4.0 * qa * qc
                        if disc >= 0.0:
                            u = (-qb + np.sqrt(disc)) / (2.0 * qa)
                    if u < phi[j, i]:
                        diff = phi[j, i] - u
                        if diff > change:
                            change = diff
                        phi[j, i] = u
        rounds += 1
        if change < tol:
            break
    return rounds, change


def hughes_eikonal(rho: np.ndarray, cfg: Hughes2dConfig, phi0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Walking-cost potential with |grad phi| = 1 / f(rho)

    The right boundary is the target (phi = 0 beyond the last column);
    this only concerns the potential, density transport stays periodic.
    Obstacle cells are +inf. ``phi0`` may seed the iteration with an upper
    bound of the solution (e.g. a converged field).
    """
    rho = np.asarray(rho, dtype=np.float64).reshape(cfg.ny, cfg.nx)
    blocked = cfg.obstacle_mask()
    slowness = 1.0 / _walking_speed(rho, cfg)

    if phi0 is None:
        phi = np.full((cfg.ny, cfg.nx), _BIG)
    else:
        phi = np.where(np.isfinite(phi0), phi0, _BIG).astype(np.float64).reshape(cfg.ny, cfg.nx)

    rounds, change = _fast_sweep(phi, slowness, blocked, cfg.dx, cfg.dy,
                                 cfg.eikonal_tol, cfg.eikonal_max_sweeps)
    if change >= cfg.eikonal_tol:
        logger.warning(f"⚠️ Fast sweeping stopped after {rounds} rounds with update {change:.3e}")
    phi[blocked] = np.inf
    return phi


def _neighbour_values(phi: np.ndarray, blocked: np.ndarray):
    """Left/right/down/up neighbour potentials with exit and wall conventions"""
    p = np.where(blocked, np.inf, phi)
    ny, nx = p.shape
    left = np.full_like(p, np.inf)
    left[:, 1:] = p[:, :-1]
    right = np.zeros_like(p)
    right[:, :-1] = p[:, 1:]
    down = np.full_like(p, np.inf)
    down[1:, :] = p[:-1, :]
    up = np.full_like(p, np.inf)
    up[:-1, :] = p[1:, :]
    return p, left, right, down, up


def _upwind_gradient(phi: np.ndarray, cfg: Hughes2dConfig):
    """Signed one-sided derivatives taken from the smaller neighbour"""
    blocked = cfg.obstacle_mask()
    p, left, right, down, up = _neighbour_values(phi, blocked)
    with np.errstate(invalid="ignore"):
        gx = np.where(left <= right,
                      np.maximum(p - left, 0.0) / cfg.dx,
                      -np.maximum(p - right, 0.0) / cfg.dx)
        gy = np.where(down <= up,
                      np.maximum(p - down, 0.0) / cfg.dy,
                      -np.maximum(p - up, 0.0) / cfg.dy)
    gx = np.where(np.isfinite(gx) & ~blocked, gx, 0.0)
    gy = np.where(np.isfinite(gy) & ~blocked, gy, 0.0)
    return gx, gy


def eikonal_residual(phi: np.ndarray, rho: np.ndarray, cfg: Hughes2dConfig) -> np.ndarray:
    """| |grad_h phi| f(rho) - 1 | on free cells (Godunov discrete gradient)"""
    rho = np.asarray(rho, dtype=np.float64).reshape(cfg.ny, cfg.nx)
    gx, gy = _upwind_gradient(phi, cfg)
    free = ~cfg.obstacle_mask()
    return np.abs(np.hypot(gx, gy) * _walking_speed(rho, cfg) - 1.0)[free]


def hughes_step(rho: np.ndarray, phi: np.ndarray, cfg: Hughes2dConfig) -> np.ndarray:
    """
    First-order upwind Godunov update of
        rho_t = div(rho f(rho) grad phi / |grad phi|)
    periodic in x, zero flux through walls and obstacle faces
    """
    shape = np.shape(rho)
    rho = np.asarray(rho, dtype=np.float64).reshape(cfg.ny, cfg.nx)
    blocked = cfg.obstacle_mask()

    gx, gy = _upwind_gradient(phi, cfg)
    norm = np.hypot(gx, gy)
    safe = np.where(norm > 0, norm, 1.0)
    ex = np.where(norm > 0, -gx / safe, 0.0)
    ey = np.where(norm > 0, -gy / safe, 0.0)

    speed = np.abs(cfg.v_max * (1.0 - 2.0 * rho / cfg.rho_max))
    cfl_x = np.max(speed * np.abs(ex)) * cfg.dt / cfg.dx
    cfl_y = np.max(speed * np.abs(ey)) * cfg.dt / cfg.dy
    if max(cfl_x, cfl_y) > cfg.cfl_limit:
        raise StabilityError(
            f"CFL violated: x {cfl_x:.3f}, y {cfl_y:.3f} > {cfg.cfl_limit}"
        )

    # x faces: face i sits between column i and i+1 (periodic)
    rho_e = np.roll(rho, -1, axis=1)
    ax = 0.5 * (ex + np.roll(ex, -1, axis=1))
    Fx = np.where(ax >= 0,
                  ax * _godunov(rho, rho_e, cfg.v_max, cfg.rho_max),
                  ax * _godunov(rho_e, rho, cfg.v_max, cfg.rho_max))
    Fx[blocked | np.roll(blocked, -1, axis=1)] = 0.0

    # y faces: interior only, walls carry no flux
    Fy = np.zeros((cfg.ny + 1, cfg.nx))
    lo, hi = rho[:-1, :], rho[1:, :]
    ay = 0.5 * (ey[:-1, :] + ey[1:, :])
    inner = np.where(ay >= 0,
                     ay * _godunov(lo, hi, cfg.v_max, cfg.rho_max),
                     ay * _godunov(hi, lo, cfg.v_max, cfg.rho_max))
    inner[blocked[:-1, :] | blocked[1:, :]] = 0.0
    Fy[1:-1, :] = inner

    new = rho - cfg.dt / cfg.dx * (Fx - np.roll(Fx, 1, axis=1)) \
              - cfg.dt / cfg.dy * (Fy[1:, :] - Fy[:-1, :])
    return new.reshape(shape)


def hughes_initial_condition(cfg: Hughes2dConfig, amplitude: float, wx: float, wy: float,
                             xc: float, yc: float) -> np.ndarray:
    """2-D Gaussian bump, zero inside the obstacle, unit total mass"""
    X, Y = cfg.mesh()
    rho = amplitude * np.exp(-((X - xc) ** 2) / (2 * wx ** 2) - ((Y - yc) ** 2) / (2 * wy ** 2))
    rho[cfg.obstacle_mask()] = 0.0
    return rho / rho.sum()


def hughes_summary_statistics(snapshots: np.ndarray, cfg: Hughes2dConfig) -> np.ndarray:
    """Mean x, mean y and x-variance of every flattened density column"""
    X, Y = cfg.mesh()
    x, y = X.ravel(), Y.ravel()
    mass = snapshots.sum(axis=0)
    mu_x = (x @ snapshots) / mass
    mu_y = (y @ snapshots) / mass
    var_x = np.sum(snapshots * (x[:, None] - mu_x[None, :]) ** 2, axis=0) / mass
    return np.vstack([mu_x, mu_y, var_x])


def hughes_trajectory(cfg: Hughes2dConfig, traj_index: int, snaps_per_traj: int) -> TrajectorySample:
    rng = make_rng(cfg.seed, [traj_index])
    a = uniform(rng, *cfg.amplitude_range, 1)[0]
    wx, wy = uniform(rng, *cfg.width_range, 2)
    xc, yc = uniform(rng, *cfg.center_range, 2)
    snap_steps = _snapshot_steps(rng, cfg.n_steps, snaps_per_traj)

    state = {"phi": None, "n": 0}

    def step(rho):
        if state["phi"] is None or state["n"] % cfg.eikonal_every == 0:
            state["phi"] = hughes_eikonal(rho, cfg)
        state["n"] += 1
        return hughes_step(rho, state["phi"], cfg)

    rho0 = hughes_initial_condition(cfg, a, wx, wy, xc, yc)
    snaps, drift = _integrate(rho0, step, cfg.n_steps, snap_steps)
    params = {"amplitude": a, "width_x": wx, "width_y": wy, "center_x": xc, "center_y": yc}
    return TrajectorySample(snaps, snap_steps * cfg.dt, drift, params)


###############################################################################
# 3. Dataset assembly
###############################################################################

def _collect(run: Callable[[int], TrajectorySample], n_traj: int, jobs: int) -> List[TrajectorySample]:
    if n_traj < 1:
        raise InvalidArgumentError(f"n_traj must be at least 1, got {n_traj}")
    if jobs <= 1:
        return [run(t) for t in range(n_traj)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, range(n_traj)))


def _assemble(trajs: List[TrajectorySample], stats: Callable[[np.ndarray], np.ndarray],
              meta: dict, dump_dir: Optional[Path]) -> DataSet:
    X = np.hstack([t.snapshots for t in trajs])
    times = np.concatenate([t.times for t in trajs])
    traj_ids = np.concatenate([np.full(t.times.size, k, dtype=np.float64) for k, t in enumerate(trajs)])
    intrinsic = np.vstack([stats(X), times, traj_ids])
    meta = dict(meta)
    meta["mass_drift"] = max(t.mass_drift for t in trajs)
    meta["trajectories"] = [t.params for t in trajs]

    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        for k, t in enumerate(trajs):
            save_dataset(dump_dir / f"{meta['generator']}_traj{k:04d}.mdec",
                         DataSet(t.snapshots, True, t.times.reshape(1, -1),
                                 {"generator": meta["generator"], "trajectory": k, **t.params}))

    logger.info(f"✅ {meta['generator']}: {X.shape[1]} snapshots, max mass drift {meta['mass_drift']:.3e}")
    return DataSet(X, True, intrinsic, meta)


def lwr_generate(cfg: Lwr1dConfig, n_traj: int, snaps_per_traj: int, jobs: int = 1,
                 dump_dir: Optional[Path] = None) -> DataSet:
    """LWR snapshot dataset; columns are unit-mass densities on m_cells cells"""
    logger.info(f"🔄 LWR: {n_traj} trajectories x {snaps_per_traj} snapshots")
    trajs = _collect(lambda t: lwr_trajectory(cfg, t, snaps_per_traj), n_traj, jobs)
    meta = {
        "generator": "lwr",
        "seed": cfg.seed,
        "m_cells": cfg.m_cells,
        "domain": [cfg.x_lo, cfg.x_hi],
        "v_max": cfg.v_max,
        "rho_max": cfg.rho_max,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "flux": cfg.flux,
        "noise_sigma": cfg.noise_sigma,
        "intrinsic_names": ["mean_x", "var_x", "skew_x", "time", "trajectory"],
    }
    return _assemble(trajs, lambda X: lwr_summary_statistics(X, cfg.centers), meta, dump_dir)


def hughes_generate(cfg: Hughes2dConfig, n_traj: int, snaps_per_traj: int, jobs: int = 1,
                    dump_dir: Optional[Path] = None) -> DataSet:
    """Hughes snapshot dataset; columns are (ny, nx) fields flattened row-major"""
    logger.info(f"🔄 Hughes: {n_traj} trajectories x {snaps_per_traj} snapshots")
    trajs = _collect(lambda t: hughes_trajectory(cfg, t, snaps_per_traj), n_traj, jobs)
    meta = {
        "generator": "hughes",
        "seed": cfg.seed,
        "grid": [cfg.ny, cfg.nx],
        "domain": [cfg.x_lo, cfg.x_hi, cfg.y_lo, cfg.y_hi],
        "obstacle": None if cfg.obstacle is None else list(cfg.obstacle),
        "v_max": cfg.v_max,
        "rho_max": cfg.rho_max,
        "dt": cfg.dt,
        "t_end": cfg.t_end,
        "eikonal_every": cfg.eikonal_every,
        "intrinsic_names": ["mean_x", "mean_y", "var_x", "time", "trajectory"],
    }
    return _assemble(trajs, lambda X: hughes_summary_statistics(X, cfg), meta, dump_dir)
