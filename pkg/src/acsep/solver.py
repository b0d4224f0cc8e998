"""Semi-implicit Euler-Maruyama time stepping for the regularized equation.

One step advances

    u+ - dt * Lap_p(u+) + dt * beta_lam(u+) = u + dt * C_F * u + sqrt(eps) * H_lam(u) dW,

so the monotone pieces (p-Laplacian and Yosida drift) are implicit and
unconditionally solvable, while the semiconvex correction -C_F u and
the noise are explicit (Ito evaluation at the pre-step field).  The
nonlinear system is solved by damped Newton with a tridiagonal
Jacobian.

Trajectories advance in batches: the state is a (paths, nodes) array
and every operation is vectorized over the batch with per-path
masking, so a path's numbers are bit-identical whether it runs alone
or inside any batch.  All randomness is drawn from the counter-based
generator keyed by (seed, path_id, step).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from . import noise as noise_mod
from .grid import Field, Mesh1D, as_values, face_gradients, g_functional, p_flux
from .potential import Barrier, PotentialKind, PotentialSpec, yosida_pair
from .noise import NoiseKind, NoiseSpec

SEPARATION_GUARD = 1.0 - 1e-15


class NumericalError(RuntimeError):
    """Raised when the time stepper cannot be trusted to continue."""


class NewtonError(NumericalError):
    def __init__(self, residual, step_index):
        self.residual = float(residual)
        self.step_index = int(step_index)
        super().__init__(
            f"Newton failed at step {step_index}: residual {residual!r}; "
            "dt or lambda is likely misconfigured"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Time discretization and regularization parameters."""

    t_final: float = 0.25
    dt: float = 1e-4
    lam: float = 1e-4
    p: float = 2.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    record_stride: int = 1

    def __post_init__(self):
        if not 0.0 < self.dt < self.t_final:
            raise ValueError("need 0 < dt < t_final")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")
        if self.p < 2.0:
            raise ValueError("p must be >= 2")
        if self.record_stride < 1 or self.newton_max_iter < 1:
            raise ValueError("record_stride and newton_max_iter must be >= 1")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_final / self.dt))
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ValueError("t_final must be an integer number of steps")
        return n


@dataclass
class PathRecord:
    """Per-trajectory monitors of one simulated path.

    lambda_layer is 1 minus the sup over all computed steps and nodes
    of |u|.  Histories (present when requested) snapshot the monitors
    at the record stride.  g_gap_max and vp_stat_max are the streamed
    statistics behind the pathwise-inequality checks:

        max_n [ G_func(u_n) - max_{m<=n} M1_m ]           vs  slack * K1
        max_n [ (Vp_n + diss_n) / (1 + max_{m<=n} M2_m) ] vs  slack * K2
    """

    path_id: int
    seed: int
    epsilon: float
    lambda_layer: float
    sup_trajectory: float
    separation_flag: bool
    newton_failed: bool
    newton_residual: float
    final_g: float
    final_vp: float
    max_m1: float
    max_m2: float
    qv1: float
    qv2: float
    dissipation: float
    g_gap_max: float
    vp_stat_max: float
    times: Optional[np.ndarray] = field(default=None, repr=False)
    g_history: Optional[np.ndarray] = field(default=None, repr=False)
    vp_history: Optional[np.ndarray] = field(default=None, repr=False)
    m1_history: Optional[np.ndarray] = field(default=None, repr=False)
    m2_history: Optional[np.ndarray] = field(default=None, repr=False)
    sup_history: Optional[np.ndarray] = field(default=None, repr=False)


def _thomas(lower, diag, upper, rhs):
    """Batched tridiagonal solve, sequential along the node axis.

    The Jacobians here are strictly diagonally dominant with positive
    diagonal, so no pivoting is needed.
    """
    n = diag.shape[-1]
    cp = np.empty_like(diag)
    dp = np.empty_like(diag)
    cp[..., 0] = upper[..., 0] / diag[..., 0]
    dp[..., 0] = rhs[..., 0] / diag[..., 0]
    for i in range(1, n):
        m = diag[..., i] - lower[..., i] * cp[..., i - 1]
        cp[..., i] = upper[..., i] / m
        dp[..., i] = (rhs[..., i] - lower[..., i] * dp[..., i - 1]) / m
    x = np.empty_like(diag)
    x[..., -1] = dp[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = dp[..., i] - cp[..., i] * x[..., i + 1]
    return x


def _vp_of_faces(g, p, h):
    if p == 2.0:
        return np.sum(g * g, axis=-1) * h
    return np.sum(np.abs(g) ** p, axis=-1) * h


def _residual(v, b, dt, mesh, p, potential, lam, j_warm):
    """R(v) = v - dt*Lap_p(v) + dt*beta_lam(v) - b plus the data at v."""
    j, bl, blp = yosida_pair(potential, lam, v, x0=j_warm)
    g = face_gradients(mesh, v)
    lap = np.diff(p_flux(p, g), axis=-1) / mesh.spacing
    return v - dt * lap + dt * bl - b, j, blp, g


def _lam_rows(lam, n_rows):
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape[0] == 1:
        lam = np.full(n_rows, lam[0])
    return lam


def _implicit_solve(u, b, dt, mesh, p, potential, lam, tol, max_iter, j_warm):
    """Damped Newton for the monotone implicit system.

    Dispatches to the compiled per-row kernel for the logarithmic kind;
    custom potentials use the vectorized masked-update path below.
    Returns (v, residual_norms, J_lam(v))."""
    if potential.kind is PotentialKind.LOGARITHMIC:
        shape = u.shape
        u2 = np.ascontiguousarray(u.reshape(-1, shape[-1]))
        b2 = np.ascontiguousarray(np.broadcast_to(b, shape).reshape(-1, shape[-1]))
        warm = u2 if j_warm is None else \
            np.ascontiguousarray(np.asarray(j_warm).reshape(-1, shape[-1]))
        lam_r = _lam_rows(lam, u2.shape[0])
        v_out = np.empty_like(u2)
        j_out = np.empty_like(u2)
        rnorm = np.empty(u2.shape[0])
        _kernels.implicit_solve_log(
            u2, b2, lam_r, dt, mesh.spacing, p, potential.theta,
            tol, max_iter, warm, v_out, j_out, rnorm,
        )
        return (v_out.reshape(shape), rnorm.reshape(shape[:-1]),
                j_out.reshape(shape))
    return _implicit_solve_numpy(u, b, dt, mesh, p, potential, lam, tol,
                                 max_iter, j_warm)


def _implicit_solve_numpy(u, b, dt, mesh, p, potential, lam, tol, max_iter, j_warm):
    h = mesh.spacing
    inv_h2 = dt / (h * h)
    v = u.copy()
    r_vec, j, blp, g = _residual(v, b, dt, mesh, p, potential, lam, j_warm)
    rnorm = np.max(np.abs(r_vec), axis=-1)
    for _ in range(max_iter):
        active = rnorm > tol
        if not active.any():
            break
        w = np.ones_like(g) if p == 2.0 else (p - 1.0) * np.abs(g) ** (p - 2.0)
        lower = np.empty_like(v)
        upper = np.empty_like(v)
        lower[..., 0] = 0.0
        lower[..., 1:] = -inv_h2 * w[..., 1:-1]
        upper[..., -1] = 0.0
        upper[..., :-1] = -inv_h2 * w[..., 1:-1]
        diag = 1.0 + inv_h2 * (w[..., :-1] + w[..., 1:]) + dt * blp
        delta = _thomas(lower, diag, upper, r_vec)

        alpha = np.ones(v.shape[:-1])
        for _ in range(40):
            v_try = v - alpha[..., None] * delta
            r_try, j_try, blp_try, g_try = _residual(
                v_try, b, dt, mesh, p, potential, lam, j
            )
            rn_try = np.max(np.abs(r_try), axis=-1)
            improved = rn_try < rnorm
            need_bt = active & ~improved & (alpha > 2.0**-30)
            if not need_bt.any():
                break
            alpha = np.where(need_bt, 0.5 * alpha, alpha)
        take = active & improved
        tk = take[..., None]
        v = np.where(tk, v_try, v)
        r_vec = np.where(tk, r_try, r_vec)
        j = np.where(tk, j_try, j)
        blp = np.where(tk, blp_try, blp)
        g = np.where(tk, g_try, g)
        rnorm = np.where(take, rn_try, rnorm)
    return v, rnorm, j


def step(state, config: SolverConfig, potential: PotentialSpec,
         noise: NoiseSpec, mesh: Mesh1D, dW):
    """One semi-implicit step from ``state`` using the increment ``dW``.

    Accepts a Field or a plain node array (batched over leading axes)
    and returns the same kind.
    """
    u = as_values(state)
    incr = noise_mod.apply_H_lambda(noise, potential, config.lam, u, dW)
    b = u + config.dt * potential.c_f * u + incr
    v, rnorm, _ = _implicit_solve(
        u, b, config.dt, mesh, config.p, potential, config.lam,
        config.newton_tol, config.newton_max_iter, j_warm=None,
    )
    if np.any(rnorm > config.newton_tol):
        raise NewtonError(np.max(rnorm), 0)
    if isinstance(state, Field):
        return Field(values=v, mesh=mesh)
    return v


def _barrier_g1(sigma, u):
    """G'_s(u) = 2 s u / (1 - u^2)^(s+1); callers guarantee |u| < 1."""
    w = 1.0 - u * u
    return (2.0 * sigma) * u * w ** (-(sigma + 1))


class _Monitors:
    """Streaming per-path monitors; histories only when requested."""

    def __init__(self, n_paths, keep_history, n_records):
        self.sup = np.zeros(n_paths)
        self.m1 = np.zeros(n_paths)
        self.m2 = np.zeros(n_paths)
        self.qv1 = np.zeros(n_paths)
        self.qv2 = np.zeros(n_paths)
        self.runmax_m1 = np.zeros(n_paths)
        self.runmax_m2 = np.zeros(n_paths)
        self.diss = np.zeros(n_paths)
        self.g_gap_max = np.full(n_paths, -np.inf)
        self.vp_stat_max = np.zeros(n_paths)
        self.g_last = np.zeros(n_paths)
        self.vp_last = np.zeros(n_paths)
        self.keep = keep_history
        if keep_history:
            self.t_hist = np.zeros(n_records)
            self.g_hist = np.zeros((n_paths, n_records))
            self.vp_hist = np.zeros((n_paths, n_records))
            self.m1_hist = np.zeros((n_paths, n_records))
            self.m2_hist = np.zeros((n_paths, n_records))
            self.sup_hist = np.zeros((n_paths, n_records))
        self._rec = 0

    def observe(self, live, t, sup_now, g_now, vp_now, record):
        self.sup = np.where(live, np.maximum(self.sup, sup_now), self.sup)
        self.runmax_m1 = np.maximum(self.runmax_m1, self.m1)
        self.runmax_m2 = np.maximum(self.runmax_m2, self.m2)
        gap = g_now - self.runmax_m1
        stat = (vp_now + self.diss) / (1.0 + self.runmax_m2)
        self.g_gap_max = np.where(live, np.maximum(self.g_gap_max, gap), self.g_gap_max)
        self.vp_stat_max = np.where(live, np.maximum(self.vp_stat_max, stat), self.vp_stat_max)
        self.g_last = np.where(live, g_now, self.g_last)
        self.vp_last = np.where(live, vp_now, self.vp_last)
        if self.keep and record:
            i = self._rec
            for hist, cur in ((self.g_hist, g_now), (self.vp_hist, vp_now)):
                frozen = hist[:, i - 1] if i else cur
                hist[:, i] = np.where(live, cur, frozen)
            self.t_hist[i] = t
            self.m1_hist[:, i] = self.m1
            self.m2_hist[:, i] = self.m2
            self.sup_hist[:, i] = self.sup
            self._rec += 1


def simulate_paths(u0, config: SolverConfig, potential: PotentialSpec,
                   noise: NoiseSpec, barrier: Barrier, mesh: Mesh1D,
                   seed: int, path_ids, keep_history: bool = False,
                   increments=None, lam_per_path=None):
    """Advance a batch of independent trajectories and collect monitors.

    ``increments(path_ids, step_index, dt, n_modes) -> (B, K)`` may be
    injected (tests, matched-noise studies); the default draws from the
    keyed counter-based generator.  ``lam_per_path`` overrides the
    scalar regularization per path (used by the convergence study).

    A path that reaches the barriers is flagged and frozen, never
    clamped; a path whose Newton solve stalls is flagged as failed.
    Returns a list of PathRecord in path_ids order.
    """
    path_ids = np.asarray(path_ids, dtype=np.int64)
    n_paths = path_ids.shape[0]
    u0 = as_values(u0)
    if u0.ndim == 1:
        u = np.broadcast_to(u0, (n_paths, u0.shape[0])).copy()
    elif u0.shape[0] == n_paths:
        u = u0.astype(float).copy()
    else:
        raise ValueError("batched u0 must have one row per path id")
    sup0 = np.max(np.abs(u), axis=-1)
    if np.any(sup0 >= 1.0):
        raise ValueError("initial data must satisfy ||u0||_inf < 1")
    g0 = np.atleast_1d(np.asarray(g_functional(mesh, barrier, u), dtype=float))
    if not np.all(np.isfinite(g0)):
        raise ValueError("initial concentration functional is not finite")

    dt = config.dt
    p = config.p
    n_steps = config.n_steps
    stride = config.record_stride
    lam = np.asarray(config.lam if lam_per_path is None else lam_per_path, dtype=float)
    if lam.ndim == 1:
        lam = lam[:, None]
    eps = noise.epsilon
    root_eps = np.sqrt(eps)
    h = mesh.spacing
    sigma = int(barrier.sigma)
    separable = noise.kind is NoiseKind.POWER
    coeffs = noise_mod.mode_coeffs(noise)
    coeff_sq_sum = float(np.sum(coeffs**2))
    if increments is None:
        def increments(pids, step_index, dt_, k_):
            return noise_mod.draw_increment_matrix(seed, pids, step_index, dt_, k_)

    n_records = sum(1 for n in range(n_steps + 1) if n % stride == 0 or n == n_steps)
    mon = _Monitors(n_paths, keep_history, n_records)
    live = np.ones(n_paths, dtype=bool)
    sep_flag = np.zeros(n_paths, dtype=bool)
    newton_fail = np.zeros(n_paths, dtype=bool)
    fail_res = np.zeros(n_paths)

    g_faces = face_gradients(mesh, u)
    lap = np.diff(p_flux(p, g_faces), axis=-1) / h
    mon.observe(live, 0.0, sup0, g0, _vp_of_faces(g_faces, p, h), record=True)

    # after the first accepted step, j_state is carried forward from the
    # Newton solve: the resolvent at the accepted state comes for free
    j_state = None
    if eps > 0.0:
        j_state, _, _ = yosida_pair(potential, lam, u)
    for n in range(1, n_steps + 1):
        if not live.any():
            break
        if eps > 0.0:
            dw = increments(path_ids, n - 1, dt, noise.n_modes)
            if separable:
                psi = noise_mod.power_profile(noise, j_state)
                s = np.sum(dw * coeffs, axis=-1)
                incr = root_eps * psi * s[:, None]
                a1 = h * np.sum(_barrier_g1(sigma, u) * psi, axis=-1)
                a2 = h * np.sum(-lap * psi, axis=-1)
                dm1 = root_eps * a1 * s
                dm2 = root_eps * a2 * s
                dq1 = eps * dt * a1 * a1 * coeff_sq_sum
                dq2 = eps * dt * a2 * a2 * coeff_sq_sum
            else:
                gprime = _barrier_g1(sigma, u)
                incr = np.zeros_like(u)
                dm1 = np.zeros(n_paths)
                dm2 = np.zeros(n_paths)
                dq1 = np.zeros(n_paths)
                dq2 = np.zeros(n_paths)
                for k in range(noise.n_modes):
                    hk = noise_mod.eval_h(noise, k, np.clip(j_state, -1.0, 1.0))
                    incr += root_eps * hk * dw[:, k : k + 1]
                    a1k = h * np.sum(gprime * hk, axis=-1)
                    a2k = h * np.sum(-lap * hk, axis=-1)
                    dm1 += root_eps * a1k * dw[:, k]
                    dm2 += root_eps * a2k * dw[:, k]
                    dq1 += eps * dt * a1k * a1k
                    dq2 += eps * dt * a2k * a2k
            mon.m1 = np.where(live, mon.m1 + dm1, mon.m1)
            mon.m2 = np.where(live, mon.m2 + dm2, mon.m2)
            mon.qv1 = np.where(live, mon.qv1 + dq1, mon.qv1)
            mon.qv2 = np.where(live, mon.qv2 + dq2, mon.qv2)
        else:
            incr = 0.0

        b = u + dt * potential.c_f * u + incr
        v, rnorm, j_new = _implicit_solve(
            u, b, dt, mesh, p, potential, lam,
            config.newton_tol, config.newton_max_iter, j_warm=j_state,
        )
        newly_failed = live & (rnorm > config.newton_tol)
        if newly_failed.any():
            newton_fail |= newly_failed
            fail_res = np.where(newly_failed, rnorm, fail_res)
            live = live & ~newly_failed
        upd = live[:, None]
        u = np.where(upd, v, u)
        j_state = np.where(upd, j_new, j_state) if j_state is not None else j_new

        sup_now = np.max(np.abs(u), axis=-1)
        hit = live & (sup_now >= SEPARATION_GUARD)
        if hit.any():
            # flag and freeze: the barrier monitors are meaningless past
            # this point, and clamping would mask the violation
            sep_flag |= hit
            mon.sup = np.where(hit, np.maximum(mon.sup, sup_now), mon.sup)
            live = live & ~hit
            u = np.where(hit[:, None], 0.0, u)

        g_faces = face_gradients(mesh, u)
        lap = np.diff(p_flux(p, g_faces), axis=-1) / h
        mon.diss = np.where(live, mon.diss + dt * h * np.sum(lap * lap, axis=-1), mon.diss)
        g_now = np.atleast_1d(np.asarray(g_functional(mesh, barrier, u), dtype=float))
        vp_now = _vp_of_faces(g_faces, p, h)
        record = (n % stride == 0) or (n == n_steps)
        mon.observe(live, n * dt, np.max(np.abs(u), axis=-1), g_now, vp_now, record)

    records = []
    for i, pid in enumerate(path_ids):
        records.append(PathRecord(
            path_id=int(pid),
            seed=int(seed),
            epsilon=float(eps),
            lambda_layer=float(1.0 - mon.sup[i]),
            sup_trajectory=float(mon.sup[i]),
            separation_flag=bool(sep_flag[i]),
            newton_failed=bool(newton_fail[i]),
            newton_residual=float(fail_res[i]),
            final_g=float(mon.g_last[i]),
            final_vp=float(mon.vp_last[i]),
            max_m1=float(mon.runmax_m1[i]),
            max_m2=float(mon.runmax_m2[i]),
            qv1=float(mon.qv1[i]),
            qv2=float(mon.qv2[i]),
            dissipation=float(mon.diss[i]),
            g_gap_max=float(mon.g_gap_max[i]),
            vp_stat_max=float(mon.vp_stat_max[i]),
            times=mon.t_hist.copy() if keep_history else None,
            g_history=mon.g_hist[i].copy() if keep_history else None,
            vp_history=mon.vp_hist[i].copy() if keep_history else None,
            m1_history=mon.m1_hist[i].copy() if keep_history else None,
            m2_history=mon.m2_hist[i].copy() if keep_history else None,
            sup_history=mon.sup_hist[i].copy() if keep_history else None,
        ))
    return records


def run_path(u0, config: SolverConfig, potential: PotentialSpec,
             noise: NoiseSpec, barrier: Barrier, mesh: Mesh1D,
             seed: int, path_id: int, keep_history: bool = True,
             increments=None) -> PathRecord:
    """One trajectory with full monitor histories.

    Raises NewtonError on solver failure; a separation violation is
    reported through the record's flag, never clamped away.
    """
    rec = simulate_paths(
        u0, config, potential, noise, barrier, mesh, seed, [path_id],
        keep_history=keep_history, increments=increments,
    )[0]
    if rec.newton_failed:
        raise NewtonError(rec.newton_residual, -1)
    return rec


def solve_trajectory(u0, config: SolverConfig, potential: PotentialSpec,
                     noise: NoiseSpec, mesh: Mesh1D, seed: int, path_id: int,
                     snapshot_stride: int = 250, increments=None):
    """Advance one path keeping field snapshots (for export/plotting).

    Returns (times, snapshots) with snapshots[i] the field at times[i].
    """
    u = np.array(as_values(u0), dtype=float).reshape(1, -1)
    times = [0.0]
    snaps = [u[0].copy()]
    j_warm = None
    if increments is None:
        def increments(pids, step_index, dt_, k_):
            return noise_mod.draw_increment_matrix(seed, pids, step_index, dt_, k_)
    for n in range(1, config.n_steps + 1):
        if noise.epsilon > 0.0:
            dw = increments(np.array([path_id]), n - 1, config.dt, noise.n_modes)
            incr = noise_mod.apply_H_lambda(noise, potential, config.lam, u, dw)
        else:
            incr = 0.0
        b = u + config.dt * potential.c_f * u + incr
        u, rnorm, j_warm = _implicit_solve(
            u, b, config.dt, mesh, config.p, potential, config.lam,
            config.newton_tol, config.newton_max_iter, j_warm=j_warm,
        )
        if np.any(rnorm > config.newton_tol):
            raise NewtonError(np.max(rnorm), n)
        if n % snapshot_stride == 0 or n == config.n_steps:
            times.append(n * config.dt)
            snaps.append(u[0].copy())
    return np.array(times), np.array(snaps)


@dataclass
class LambdaStudy:
    """Matched-noise Cauchy experiment across a ladder of lambdas."""

    lambdas: np.ndarray            # ladder, lambdas[j+1] = lambdas[j]/2
    errors: np.ndarray             # (levels, paths): max_t ||u_lam - u_lam/2||_H
    log2_ratios: np.ndarray        # (levels-1, paths)
    mean_log2_ratio: float


def lambda_convergence_study(u0, config: SolverConfig, potential: PotentialSpec,
                             noise: NoiseSpec, mesh: Mesh1D, base_lambda: float,
                             levels: int, n_paths: int, seed: int) -> LambdaStudy:
    """Pairwise distances between runs at lambda and lambda/2, matched noise.

    All (level, path) combinations advance together as one batch; rows
    of the same path share increments, so the differences isolate the
    regularization error.  First-order decay in lambda shows up as
    log2 ratios near 1.
    """
    if levels < 1:
        raise ValueError("need at least one halving level")
    lams = base_lambda * 0.5 ** np.arange(levels + 1)
    n_rows = (levels + 1) * n_paths
    u0 = as_values(u0)
    u = np.broadcast_to(u0, (n_rows, u0.shape[0])).copy()
    lam_col = np.repeat(lams, n_paths)[:, None]
    h = mesh.spacing
    coeffs = noise_mod.mode_coeffs(noise)
    root_eps = np.sqrt(noise.epsilon)
    max_err = np.zeros((levels, n_paths))
    j_warm = None
    if noise.epsilon > 0.0:
        j_warm, _, _ = yosida_pair(potential, lam_col, u)
    for n in range(1, config.n_steps + 1):
        if noise.epsilon > 0.0:
            dw = noise_mod.draw_increment_matrix(seed, np.arange(n_paths), n - 1,
                                                 config.dt, noise.n_modes)
            if noise.kind is NoiseKind.POWER:
                s = np.tile(np.sum(dw * coeffs, axis=-1), levels + 1)
                incr = root_eps * noise_mod.power_profile(noise, j_warm) * s[:, None]
            else:
                incr = np.zeros_like(u)
                for k in range(noise.n_modes):
                    hk = noise_mod.eval_h(noise, k, np.clip(j_warm, -1.0, 1.0))
                    incr += root_eps * hk * np.tile(dw[:, k], levels + 1)[:, None]
        else:
            incr = 0.0
        b = u + config.dt * potential.c_f * u + incr
        u, rnorm, j_warm = _implicit_solve(
            u, b, config.dt, mesh, config.p, potential, lam_col,
            config.newton_tol, config.newton_max_iter, j_warm=j_warm,
        )
        if np.any(rnorm > config.newton_tol):
            raise NewtonError(np.max(rnorm), n)
        stack = u.reshape(levels + 1, n_paths, -1)
        diff = stack[:-1] - stack[1:]
        err = np.sqrt(h * np.sum(diff * diff, axis=-1))
        max_err = np.maximum(max_err, err)
    if levels >= 2:
        ratios = np.log2(max_err[:-1] / max_err[1:])
        mean_ratio = float(np.mean(ratios))
    else:
        ratios = np.empty((0, n_paths))
        mean_ratio = float("nan")
    return LambdaStudy(lambdas=lams, errors=max_err, log2_ratios=ratios,
                       mean_log2_ratio=mean_ratio)
