"""Blow-up profile construction on [0, L].

Three stages:

1. A local solution near theta = 0 from the Taylor-seeded singular fixed
   point for the fourth/fifth-order remainders (m, g) of the density and
   stream coefficients.
2. Continuation by the augmented ODE in the state (theta, M, I1, I2), run in
   a flow-rescaled parameter tau with d theta / d tau = 2 G, which removes
   the M' singularity at both ends and turns the first root of G into an
   exponential approach that is cheap to resolve.
3. Root capture, boundary power-law fit, and resampling onto a clustered
   grid.

A simplified closed form of the remainder forcing drops several O(theta^2)
terms and does not reproduce the constant-density solution, so the forcing
used here is derived exactly from the profile system (iteration matrix with
eigenvalues 4, 2, 5; the solution-dependent remainder terms coincide in both
forms).  The simplified constants are kept on the seed as metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp as _scipy_ivp
from scipy.optimize import brentq

from .errors import (
    DomainError,
    MonotonicityError,
    NoRootError,
    ResolutionError,
)
from .fixed_point import SingularFixedPointSolution, solve_singular_fixed_point
from .grid import AngularGrid, GridFunction, differentiate

# ---------------------------------------------------------------------------
# Series-safe scalar kernels (vectorized)
# ---------------------------------------------------------------------------


def _tan_remainder(t):
    """(tan t - t - t^3/3) / t^5, finite at 0 (value 2/15)."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 0.2
    ts = t[small] ** 2
    out[small] = (
        2.0 / 15.0
        + ts * (17.0 / 315.0 + ts * (62.0 / 2835.0 + ts * (1382.0 / 155925.0 + ts * 21844.0 / 6081075.0)))
    )
    big = ~small
    tb = t[big]
    out[big] = (np.tan(tb) - tb - tb**3 / 3.0) / tb**5
    return out


def _tan_over(t):
    """tan t / t, finite at 0."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    nz = t != 0.0
    out[nz] = np.tan(t[nz]) / t[nz]
    return out


def _sinc(t):
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    nz = t != 0.0
    out[nz] = np.sin(t[nz]) / t[nz]
    return out


def _sinc2(t):
    return _sinc(t) ** 2


def _q_kernel(t):
    """(sin^2 t / t^2 - 1) / t^2, finite at 0 (value -1/3)."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 0.25
    ts = t[small] ** 2
    out[small] = (
        -1.0 / 3.0
        + ts * (2.0 / 45.0 + ts * (-1.0 / 315.0 + ts * (2.0 / 14175.0 - ts / 233887.5)))
    )
    big = ~small
    tb = t[big]
    out[big] = (_sinc2(tb) - 1.0) / tb**2
    return out


# ---------------------------------------------------------------------------
# Local seed
# ---------------------------------------------------------------------------

#: first-order system matrix for (m, g, h = theta g'); eigenvalues 4, 2, 5
_SYSTEM_Q = np.array([[1.0, 3.0, 0.0], [0.0, 1.0, 1.0], [0.0, -2.0, -5.0]])
_SYSTEM_LAMBDA = np.array([4.0, 2.0, 5.0])


def nominal_forcing_constants(A: float) -> tuple[float, float]:
    """Simplified closed-form forcing constants (seed metadata only).

    The fixed point itself uses :func:`exact_forcing_constants`, which also
    reproduce the constant-density solution."""
    c1 = -((A + 2.0) / 3.0) * (A + 8.0) + 8.0 / 3.0 - 2.0 * A
    c2 = 2.0 * A
    return c1, c2


def exact_forcing_constants(A: float) -> tuple[float, float]:
    """Forcing constants consistent with the constant-density solution."""
    beta = (A + 2.0) / 3.0
    c1 = 4.0 / 3.0 - A * beta / 2.0 - A - 4.0 * beta
    c2 = 2.0 * A + 4.0 * beta
    return c1, c2


def _local_fixed_point_maps(A: float):
    """Diagonalized maps (lambda, v, F, G) for the (m, g, h) remainder system."""
    beta = (A + 2.0) / 3.0
    c1, c2 = exact_forcing_constants(A)
    qinv = np.linalg.inv(_SYSTEM_Q)
    lam = _SYSTEM_LAMBDA
    v = qinv @ np.array([c1, 0.0, c1 + c2])
    p = qinv @ np.array([1.0, 0.0, 1.0])
    r = qinv @ np.array([0.0, 0.0, 1.0])

    def source(y, t):
        m_, g_, h_ = y
        tt = _tan_remainder(t)
        t_over = _tan_over(t)
        tan_t = t * t_over
        s2c = _sinc2(t)
        g1f = (
            4.0 * tt
            + A * beta
            - (A + 4.0 * beta) / 3.0
            + t**2 * (A * beta / 3.0 - (A + 4.0 * beta) * tt)
            + t**4 * A * beta * tt
        )
        am = 2.5 * beta + t_over - beta * t * tan_t
        ag = -0.5 * A + 4.0 * t_over - A * t * tan_t
        s1 = (
            g1f
            + m_ * am
            + g_ * ag
            - 0.5 * A * h_
            + g_ * m_ * (-1.5 * t**2 + t**3 * tan_t)
            + 0.5 * t**2 * h_ * m_
        )
        s2v = 2.0 * A * _q_kernel(t) - 4.0 * m_ * s2c - 4.0 * g_
        return s1, s2v

    def F_map(z, t):
        y = _SYSTEM_Q @ z
        m_, g_, h_ = y
        s1, s2v = source(y, t)
        svec = np.stack([s1, np.zeros_like(s1), s1 + s2v])
        out = qinv @ svec
        s2c = _sinc2(t)
        sin2_over = 2.0 * np.cos(t) * _sinc(t)
        for j in range(3):
            # by-parts replacements for the two m'-carrying remainder terms
            out[j] += -p[j] * (beta * (lam[j] + 2.0) - t**2 * ((lam[j] + 4.0) * g_ + h_)) * m_
            out[j] += r[j] * (lam[j] * s2c + sin2_over) * m_
        return out

    def G_map(z, t):
        y = _SYSTEM_Q @ z
        m_, g_, h_ = y
        core = (beta - t**2 * g_) * m_
        s2c = _sinc2(t)
        return np.stack([p[j] * core - r[j] * s2c * m_ for j in range(3)])

    return lam, v, F_map, G_map


@dataclass
class LocalSeed:
    """Local profile data on [0, a].

    M and G are reconstructed from the remainders as
    M = 4 - A theta^2 + theta^4 m and G = theta - (A+2)/3 theta^3 + theta^5 g.
    C1A/C2A carry the simplified closed-form forcing constants.
    """

    A: float
    a: float
    m: GridFunction
    g: GridFunction
    C1A: float
    C2A: float
    _fp: SingularFixedPointSolution = field(repr=False)

    @property
    def beta(self) -> float:
        return (self.A + 2.0) / 3.0

    def _mgh(self, theta):
        z = self._fp(np.asarray(theta, dtype=float))
        return _SYSTEM_Q @ z

    def M_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        m_, _, _ = self._mgh(theta)
        return 4.0 - self.A * theta**2 + theta**4 * m_

    def G_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        _, g_, _ = self._mgh(theta)
        return theta - self.beta * theta**3 + theta**5 * g_

    def Gp_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        _, g_, h_ = self._mgh(theta)
        return 1.0 - 3.0 * self.beta * theta**2 + theta**4 * (5.0 * g_ + h_)

    def M_jet(self) -> np.ndarray:
        m0 = float(self._mgh(np.array([0.0]))[0][0])
        return np.array([4.0, 0.0, -2.0 * self.A, 0.0, 24.0 * m0])

    def G_third_derivative(self) -> float:
        return -2.0 * self.A - 4.0


def local_profile(A: float, *, d_hint: float = 0.2, n_seed: int = 64) -> LocalSeed:
    """Solve the Taylor-seeded singular fixed point near theta = 0."""
    if A < 0:
        raise DomainError(f"stretching parameter must be >= 0, got {A}")
    lam, v, F_map, G_map = _local_fixed_point_maps(A)
    fp = solve_singular_fixed_point(3, lam, v, F_map, G_map, d_hint, n=n_seed)
    # keep only the radius where the seed stream is safely positive,
    # G(theta)/theta >= 1/2, so the continuation divides by 2G comfortably
    thetas = np.linspace(1e-6, fp.d, 512)
    g_vals = (_SYSTEM_Q @ fp(thetas))[1]
    ratio = 1.0 - (A + 2.0) / 3.0 * thetas**2 + thetas**4 * g_vals
    bad = np.nonzero(ratio < 0.5)[0]
    a = min(fp.d, 0.2) if bad.size == 0 else min(thetas[bad[0]] * 0.95, 0.2)
    grid = AngularGrid(L=a, n=48)
    y = _SYSTEM_Q @ fp(grid.nodes)
    c1, c2 = nominal_forcing_constants(A)
    return LocalSeed(
        A=A,
        a=a,
        m=GridFunction(grid, y[0], "even"),
        g=GridFunction(grid, y[1], "even"),
        C1A=c1,
        C2A=c2,
        _fp=fp,
    )


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------


def _stream_from_integrals(theta, i1, i2):
    s2, c2 = np.sin(2.0 * theta), np.cos(2.0 * theta)
    g = 0.5 * s2 * (1.0 + i1) - 0.5 * c2 * i2
    gp = c2 * (1.0 + i1) + s2 * i2
    return g, gp


@dataclass
class ProfileTrace:
    """Dense continuation output (validation aid; exists with or without a root)."""

    seed: LocalSeed
    sol: object  # scipy OdeSolution over tau
    tau_end: float
    theta_end: float
    rooted: bool

    def theta_of_tau(self, tau):
        return self.sol(np.asarray(tau, dtype=float))[0]

    def at_theta(self, theta):
        """(M, G, Gp, I1, I2) sampled at given angles (seed zone included)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        M = np.empty_like(theta)
        G = np.empty_like(theta)
        Gp = np.empty_like(theta)
        I1 = np.empty_like(theta)
        I2 = np.empty_like(theta)
        a = self.seed.a
        inner = theta <= a
        if np.any(inner):
            ti = theta[inner]
            M[inner] = self.seed.M_at(ti)
            G[inner] = self.seed.G_at(ti)
            Gp[inner] = self.seed.Gp_at(ti)
            s2, c2 = np.sin(2 * ti), np.cos(2 * ti)
            I1[inner] = 2 * s2 * G[inner] + c2 * Gp[inner] - 1.0
            I2[inner] = -2 * c2 * G[inner] + s2 * Gp[inner]
        outer = ~inner
        for idx in np.nonzero(outer)[0]:
            tgt = min(theta[idx], self.theta_end)
            tau = brentq(
                lambda s: self.sol(s)[0] - tgt, 0.0, self.tau_end, xtol=1e-14, rtol=8.9e-16
            )
            _, M[idx], I1[idx], I2[idx] = self.sol(tau)
            G[idx], Gp[idx] = _stream_from_integrals(theta[idx], I1[idx], I2[idx])
        return M, G, Gp, I1, I2


@dataclass
class ProfilePair:
    """Converged profile on [0, L] with boundary diagnostics."""

    A: float
    L: float
    M: GridFunction
    G: GridFunction
    Gp: GridFunction
    GpL: float
    holder_alpha: float
    seed: LocalSeed
    I1: GridFunction = field(repr=False)
    I2: GridFunction = field(repr=False)
    GpL_series: float = 0.0  # from the running-integral form of G'
    alpha_fit: float = 0.0
    fit_amplitude: float = 0.0
    boundary_samples: tuple = field(default=(), repr=False)
    trace: ProfileTrace | None = field(default=None, repr=False)

    @property
    def grid(self) -> AngularGrid:
        return self.M.grid

    def Mp_identity(self) -> GridFunction:
        """M' from the profile equation M' = M (G' - 1 + 2 G tan)/2G.

        Endpoints: M'(0) = 0 by parity; at theta = L the derivative is
        singular when alpha < 1, so the last interior value is reused there.
        """
        t = self.grid.nodes
        vals = np.zeros_like(t)
        inner = slice(1, -1)
        vals[inner] = (
            self.M.values[inner]
            * (self.Gp.values[inner] - 1.0 + 2.0 * self.G.values[inner] * np.tan(t[inner]))
            / (2.0 * self.G.values[inner])
        )
        vals[-1] = vals[-2]
        return GridFunction(self.grid, vals, "odd")

    def interior_fields(self, interior_frac: float = 0.9, n: int | None = None):
        """(M, G, Gp, I1, I2) resampled on a clustered grid over [0, frac L].

        M is analytic away from theta = L, so this restriction can be
        differentiated spectrally without pollution from the boundary
        power-law; samples come from the dense continuation output.
        """
        if self.trace is None:
            raise ResolutionError("interior diagnostics need the continuation trace")
        sub = AngularGrid(L=interior_frac * self.L, n=n or self.grid.n)
        M, G, Gp, I1, I2 = self.trace.at_theta(sub.nodes)
        return (
            GridFunction(sub, M, "even"),
            GridFunction(sub, G, "odd"),
            GridFunction(sub, Gp, "even"),
            GridFunction(sub, I1, "odd"),
            GridFunction(sub, I2, "odd"),
        )

    def equation_residual(self, interior_frac: float = 0.9, n: int | None = None) -> float:
        """max |M + 2GM' - G'M - 2MG tan| over [0, interior_frac L], with M'
        by numerical differentiation (independent of the defining identity)."""
        M, G, Gp, _, _ = self.interior_fields(interior_frac, n)
        t = M.grid.nodes
        mp = differentiate(M, 1).values
        res = (
            M.values
            + 2.0 * G.values * mp
            - Gp.values * M.values
            - 2.0 * M.values * G.values * np.tan(t)
        )
        return float(np.max(np.abs(res)))


def _continuation_rhs(tau, u):
    theta, M, i1, i2 = u
    g, gp = _stream_from_integrals(theta, i1, i2)
    dM = M * (gp - 1.0 + 2.0 * g * np.tan(theta))
    c2 = np.cos(theta) ** 2
    return [2.0 * g, dM, dM * c2 * np.cos(2 * theta), dM * c2 * np.sin(2 * theta)]


def _integrate_seed(
    seed: LocalSeed,
    g_floor: float,
    trivial_margin: float,
    stop_theta: float | None,
    rtol: float,
    atol: float,
) -> ProfileTrace:
    a = seed.a
    g_a = float(seed.G_at(np.array([a]))[0])
    gp_a = float(seed.Gp_at(np.array([a]))[0])
    m_a = float(seed.M_at(np.array([a]))[0])
    s2, c2 = np.sin(2 * a), np.cos(2 * a)
    i1_a = 2 * s2 * g_a + c2 * gp_a - 1.0
    i2_a = -2 * c2 * g_a + s2 * gp_a

    def ev_root(tau, u):
        g, _ = _stream_from_integrals(u[0], u[2], u[3])
        return g - g_floor

    ev_root.terminal = True
    ev_root.direction = -1.0

    theta_stop = np.pi / 2 - trivial_margin if stop_theta is None else stop_theta

    def ev_stop(tau, u):
        return u[0] - theta_stop

    ev_stop.terminal = True
    ev_stop.direction = 1.0

    def ev_negative(tau, u):
        return u[1] + 1e-9

    ev_negative.terminal = True
    ev_negative.direction = -1.0

    sol = _scipy_ivp(
        _continuation_rhs,
        (0.0, 400.0),
        [a, m_a, i1_a, i2_a],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=(ev_root, ev_stop, ev_negative),
    )
    if sol.t_events[2].size:
        raise MonotonicityError("density drifted negative during continuation")
    rooted = sol.t_events[0].size > 0
    hit_stop = sol.t_events[1].size > 0
    if not rooted and not hit_stop:
        raise NoRootError("continuation exhausted its parameter span without a root")
    tau_end = float(sol.t_events[0][0] if rooted else sol.t_events[1][0])
    theta_end = float(sol.sol(tau_end)[0])
    return ProfileTrace(seed=seed, sol=sol.sol, tau_end=tau_end, theta_end=theta_end, rooted=rooted)


def trace_profile(
    seed: LocalSeed,
    theta_max: float,
    rtol: float = 2.5e-14,
    atol: float = 1e-15,
) -> ProfileTrace:
    """Continuation up to theta_max (or the root, whichever comes first)."""
    return _integrate_seed(seed, 1e-10, 1e-7, theta_max, rtol, atol)


def continue_profile(
    seed: LocalSeed,
    n: int = 256,
    *,
    g_floor: float = 1e-10,
    rtol: float = 2.5e-14,
    atol: float = 1e-15,
    fit_window: tuple = (1e-8, 1e-3),
    keep_trace: bool = True,
) -> ProfilePair:
    """Continue the seed to the first root of G and build the ProfilePair."""
    trace = _integrate_seed(seed, g_floor, 1e-7, None, rtol, atol)
    if not trace.rooted:
        raise NoRootError(
            "stream function stayed positive up to pi/2 (expected only near A = 0)"
        )
    theta_e, m_e, i1_e, i2_e = trace.sol(trace.tau_end)
    g_e, gp_e = _stream_from_integrals(theta_e, i1_e, i2_e)
    if gp_e >= 0:
        raise NoRootError("stream slope at the detected crossing is not negative")
    L = float(theta_e - g_e / gp_e)  # one Newton step from G = g_floor

    s2L, c2L = np.sin(2 * L), np.cos(2 * L)
    gpl_root = (c2L**2 / s2L + s2L) * i2_e  # valid exactly at the root
    gpl_series = c2L * (1.0 + i1_e) + s2L * i2_e
    alpha = 0.5 - 1.0 / (2.0 * gpl_root)

    # power-law fit of M near the boundary from accepted integrator steps
    taus = np.linspace(0.0, trace.tau_end, 4096)
    th, mm = trace.sol(taus)[0], trace.sol(taus)[1]
    dist = L - th
    sel = (dist >= fit_window[0]) & (dist <= fit_window[1]) & (mm > 0)
    if np.count_nonzero(sel) >= 5:
        slope, intercept = np.polyfit(np.log(dist[sel]), np.log(mm[sel]), 1)
        alpha_fit, amplitude = float(slope), float(np.exp(intercept))
        samples = (dist[sel].copy(), mm[sel].copy())
    else:
        alpha_fit, amplitude, samples = np.nan, np.nan, ()

    grid = AngularGrid(L=L, n=n)
    nodes = grid.nodes
    M, G, Gp, I1, I2 = trace.at_theta(np.minimum(nodes, trace.theta_end))
    M[-1] = 0.0
    G[-1] = 0.0
    Gp[-1] = gpl_root
    I1[-1], I2[-1] = i1_e, i2_e
    pair = ProfilePair(
        A=seed.A,
        L=L,
        M=GridFunction(grid, M, "even"),
        G=GridFunction(grid, G, "odd"),
        Gp=GridFunction(grid, Gp, "even"),
        GpL=float(gpl_root),
        holder_alpha=float(alpha),
        seed=seed,
        I1=GridFunction(grid, I1, "odd"),
        I2=GridFunction(grid, I2, "odd"),
        GpL_series=float(gpl_series),
        alpha_fit=alpha_fit,
        fit_amplitude=amplitude,
        boundary_samples=samples,
        trace=trace if keep_trace else None,
    )
    return pair


def build_profile(A: float, n: int = 256, **kwargs) -> ProfilePair:
    """local_profile + continue_profile in one call."""
    return continue_profile(local_profile(A), n=n, **kwargs)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def fit_power_exponent(dist: np.ndarray, vals: np.ndarray) -> float:
    """Least-squares slope of log vals against log dist."""
    dist = np.asarray(dist, dtype=float)
    vals = np.asarray(vals, dtype=float)
    ok = (dist > 0) & (vals > 0)
    if np.count_nonzero(ok) < 5:
        raise ResolutionError("need at least 5 resolved points for the boundary fit")
    slope, _ = np.polyfit(np.log(dist[ok]), np.log(vals[ok]), 1)
    return float(slope)


def fit_boundary_exponent(p: ProfilePair) -> float:
    """Fitted boundary exponent of M; contract |fit - holder_alpha| <= 0.05."""
    if p.GpL >= 0:
        raise DomainError("boundary fit requires G'(L) < 0")
    if not p.boundary_samples:
        raise ResolutionError("no resolved boundary samples were recorded")
    return fit_power_exponent(*p.boundary_samples)


def monotonicity_identity_residual(
    p: ProfilePair, interior_frac: float = 0.9, n: int | None = None
) -> float:
    """max | G'' + (2 G tan)' - M' cos^2 - sec^2 I2 | on interior nodes.

    The left side is formed by numerical differentiation; the identity holds
    for any exact solution, so the residual measures grid consistency.
    """
    M, G, _, _, I2 = p.interior_fields(interior_frac, n)
    return _identity_residual(M, G, I2)


def _identity_residual(M: GridFunction, G: GridFunction, I2: GridFunction) -> float:
    grid = M.grid
    t = grid.nodes
    lhs = (
        differentiate(G, 2).values
        + differentiate(G * GridFunction(grid, 2.0 * np.tan(t), "odd"), 1).values
    )
    rhs = differentiate(M, 1).values * np.cos(t) ** 2 + I2.values / np.cos(t) ** 2
    return float(np.max(np.abs(lhs - rhs)))
