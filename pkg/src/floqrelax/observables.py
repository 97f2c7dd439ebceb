"""Reduced density matrices, entanglement spectra, purities, random-state
reference laws, OTOC series and the two-phase relaxation fit.

The bipartition is always half-half: subsystem A is qubits 1..n/2, so
the reshaped amplitude matrix has A as its row index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg.blas import zherk

from .circuits import CircuitConfig, build_step
from .statevec import Seed, StateVector, apply_pauli, inner_product, random_product_state


@dataclass
class ReducedSpectrum:
    """Descending eigenvalues of rho_A at one time step."""

    t: int
    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.min(initial=0.0) < -1e-10:
            raise ValueError("spectrum has a significantly negative eigenvalue")
        self.eigenvalues = np.sort(np.clip(lam, 0.0, None))[::-1]


@dataclass
class PuritySeries:
    """Ensemble-averaged Renyi purities I^(p)(t) for p in orders."""

    times: np.ndarray
    values: dict  # p -> array over times
    ensemble_std: Optional[dict] = None
    stationary: Optional[dict] = None  # p -> I^(p)(infinity)
    num_states: int = 1


@dataclass
class TwoPhaseFit:
    """Two-segment log-linear fit of an exponential relaxation curve."""

    t_c: float
    r_one: float  # decay rate for t <= t_c, natural-log units per step
    r_two: float  # decay rate for t > t_c
    t_min: int
    t_max: int
    rss: float
    degenerate: bool = False


@dataclass
class OTOCSeries:
    j: int
    alpha: str
    times: np.ndarray
    values: np.ndarray
    num_states: int = 1
    perturb_site: int = 1


def _split_matrix(state: StateVector) -> np.ndarray:
    n = state.num_qubits
    return state.amplitudes.reshape(1 << (n // 2), 1 << (n - n // 2))


def reduced_density(state: StateVector) -> np.ndarray:
    """rho_A = tr_B |psi><psi| for the first-half subsystem."""
    m = _split_matrix(state)
    return m @ m.conj().T


def reduced_spectrum(state: StateVector, t: int = 0) -> ReducedSpectrum:
    lam = np.linalg.eigvalsh(reduced_density(state))
    return ReducedSpectrum(t, lam)


def purity(state: StateVector) -> float:
    """I = tr rho_A^2 without an eigensolve: squared Frobenius norm of
    the half-filled Gram matrix of the reshaped amplitudes."""
    m = _split_matrix(state)
    g = zherk(1.0, m)  # upper triangle of m m^H, lower left zero
    diag_sq = float(np.sum(np.abs(np.diagonal(g)) ** 2))
    return float(2.0 * np.vdot(g, g).real - diag_sq)


def purity_p(spec: ReducedSpectrum, p: int) -> float:
    """I^(p) = sum of eigenvalues^p."""
    if p < 2:
        raise ValueError("purity order must be >= 2")
    return float(np.sum(spec.eigenvalues**p))


def stationary_purities(n_a: int) -> tuple[float, float, float]:
    """Random-state values of I^(2), I^(3), I^(4) for subsystem
    dimension n_a, evaluated exactly from the rational formulas."""
    if n_a < 2:
        raise ValueError("subsystem dimension must be >= 2")
    d = n_a * n_a
    i2 = 2 * n_a / (1 + d)
    i3 = (5 * d + 1) / ((d + 1) * (d + 2))
    i4 = (14 * n_a**3 + 10 * n_a) / ((d + 1) * (d + 2) * (d + 3))
    return (i2, i3, i4)


def mp_density(x) -> np.ndarray:
    """Marchenko-Pastur density (1/2pi) sqrt((4-x)/x) of the rescaled
    eigenvalue x = N_A * lambda; zero outside (0, 4)."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(arr)
    inside = (arr > 0) & (arr < 4)
    out[inside] = np.sqrt((4 - arr[inside]) / arr[inside]) / (2 * np.pi)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out[0])
    return out


def mp_bin_masses(edges: np.ndarray) -> np.ndarray:
    """Integrals of the MP density over histogram bins; handles the
    inverse-square-root edge at x = 0."""
    masses = np.empty(len(edges) - 1)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        lo, hi = max(a, 0.0), min(b, 4.0)
        if hi <= lo:
            masses[i] = 0.0
            continue
        masses[i], _ = quad(lambda x: np.sqrt((4 - x) / x) / (2 * np.pi), lo, hi)
    return masses


def mp_tv_distance(eigenvalues: np.ndarray, n_a: int, bins: int = 50) -> float:
    """Total-variation distance between the rescaled eigenvalue histogram
    and the MP reference, on uniform bins over [0, 4]."""
    edges = np.linspace(0.0, 4.0, bins + 1)
    x = n_a * np.asarray(eigenvalues, dtype=float).ravel()
    counts, _ = np.histogram(np.clip(x, 0.0, 4.0 - 1e-15), bins=edges)
    emp = counts / counts.sum()
    return float(0.5 * np.abs(emp - mp_bin_masses(edges)).sum())


def lambda_k_infty(k: int, n_a: int) -> float:
    """Average k-th largest eigenvalue of a random-state rho_A: solves
    (k - 1/2) pi / (2 N_A) = phi - sin(2 phi)/2 by bisection on
    [0, pi/2] (the left side is monotone) and returns 4/N_A cos^2 phi."""
    if not 1 <= k <= n_a:
        raise ValueError(f"k must be in 1..{n_a}, got {k}")
    target = (k - 0.5) * np.pi / (2 * n_a)
    lo, hi = 0.0, np.pi / 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - 0.5 * np.sin(2 * mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    phi = 0.5 * (lo + hi)
    return float(4.0 / n_a * np.cos(phi) ** 2)


def numerical_rank(spec: ReducedSpectrum, tol: Optional[float] = None) -> int:
    """Count of eigenvalues above N_A * eps * lambda_max (default)."""
    lam = spec.eigenvalues
    if tol is None:
        tol = lam.size * np.finfo(float).eps * (lam[0] if lam.size else 0.0)
    return int(np.count_nonzero(lam > tol))


def effective_rate(
    times: np.ndarray,
    values: np.ndarray,
    y_inf: float,
    noise_floor: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Step-to-step decay factor (y(t+1) - y_inf)/(y(t) - y_inf), skipping
    times where the denominator sits below the noise floor."""
    times = np.asarray(times)
    excess = np.asarray(values, dtype=float) - y_inf
    ts, rates = [], []
    for i in range(len(times) - 1):
        if times[i + 1] == times[i] + 1 and excess[i] > noise_floor:
            ts.append(times[i])
            rates.append(excess[i + 1] / excess[i])
    if not ts:
        raise ValueError("no usable window above the noise floor")
    return np.asarray(ts), np.asarray(rates)


def _line_rss(t: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and residual sum of squares."""
    coef, res, *_ = np.polyfit(t, z, 1, full=True)
    rss = float(res[0]) if len(res) else 0.0
    return float(coef[0]), rss


def two_phase_fit(
    times: Sequence[int],
    values: Sequence[float],
    y_inf: float,
    t_min: int = 2,
    t_max: Optional[int] = None,
    noise_floor: float = 1e-12,
) -> TwoPhaseFit:
    """Fit ln(y - y_inf) with two independent line segments split at the
    breakpoint minimizing total squared residual.

    Segment one covers t <= t_c, segment two t > t_c; ties between
    breakpoints go to the latest one. Data below the noise floor (or
    outside [t_min, t_max]) is excluded. A breakpoint that does not
    improve on a single line marks the fit degenerate, with the
    breakpoint parked at the window edge.
    """
    times = np.asarray(times)
    excess = np.asarray(values, dtype=float) - y_inf
    keep = (times >= t_min) & (excess > noise_floor)
    if t_max is not None:
        keep &= times <= t_max
    t = times[keep].astype(float)
    z = np.log(excess[keep])
    if t.size < 6:
        raise ValueError(f"need at least 6 usable points, got {t.size}")

    slope_single, rss_single = _line_rss(t, z)
    # ties between breakpoints (exactly collinear segments) go to the
    # latest candidate; the slack absorbs last-bit polyfit noise only
    tie_eps = 1e-15 * float(np.sum(z * z)) + 1e-300
    best = None
    for i in range(1, t.size - 2):  # >= 2 points per segment
        tc = t[i]
        s1, r1 = _line_rss(t[: i + 1], z[: i + 1])
        s2, r2 = _line_rss(t[i + 1 :], z[i + 1 :])
        rss = r1 + r2
        if best is None or rss <= best[0] + tie_eps:
            best = (rss, tc, s1, s2)
    rss, tc, s1, s2 = best

    degenerate = (rss_single - rss) <= 1e-9 * max(rss_single, 1e-30) or abs(
        s1 - s2
    ) < 1e-8
    if degenerate:
        tc = float(t[-1])
        s1 = s2 = slope_single
        rss = rss_single
    return TwoPhaseFit(
        t_c=float(tc),
        r_one=-s1,
        r_two=-s2,
        t_min=int(t[0]),
        t_max=int(t[-1]),
        rss=rss,
        degenerate=degenerate,
    )


def otoc(
    config: CircuitConfig,
    j: int,
    alpha: str,
    t_max: int,
    num_states: int,
    seed: Seed,
    perturb_site: int = 1,
) -> OTOCSeries:
    """Out-of-time-ordered correlator of sigma_j^z(t) with a Pauli at the
    perturbation site, averaged over random product initial states.

    Evaluated per state via forward evolution, a sigma_j^z insertion and
    backward evolution with the inverted step; gate lists are stored per
    step so RandomKicked trajectories replay identical kicks.
    """
    n = config.n
    if not 1 <= j <= n or not 1 <= perturb_site <= n:
        raise ValueError("site out of range")
    times = np.arange(t_max + 1)
    total = np.zeros(t_max + 1)
    for s in range(num_states):
        traj = seed.stream(seed.stream_id + s)
        psi = random_product_state(n, traj)
        rng = traj.rng(1)  # kick sub-stream, independent of the state draw
        steps = []
        fresh = config.gate_spec.family == "RandomKicked"
        fixed_step = None if fresh else build_step(config)
        # |w> = U^dag(t) Z_j U(t) |psi>, |v> = same applied to A|psi>
        w = psi.copy()
        v = apply_pauli(psi.copy(), perturb_site, alpha)
        for t in range(t_max + 1):
            if t > 0:
                step = build_step(config, rng) if fresh else fixed_step
                steps.append(step)
            vt = v.copy()
            wt = w.copy()
            for st in steps:
                st.apply(vt)
                st.apply(wt)
            apply_pauli(vt, j, "z")
            apply_pauli(wt, j, "z")
            for st in reversed(steps):
                inv = st.inverted()
                inv.apply(vt)
                inv.apply(wt)
            apply_pauli(vt, perturb_site, alpha)
            total[t] += inner_product(wt, vt).real
    return OTOCSeries(
        j=j,
        alpha=alpha,
        times=times,
        values=total / num_states,
        num_states=num_states,
        perturb_site=perturb_site,
    )
