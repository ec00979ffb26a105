"""Two-qubit polarization tomography from coincidence counts.

Reconstruction maximises the multinomial log-likelihood
``sum_j f_j log p_j(rho)`` over physical density matrices.  The default
solver is an accelerated projected gradient: each step is projected onto
the set of unit-trace PSD matrices by projecting the eigenvalues onto the
probability simplex.  Unlike the multiplicative RrhoR iteration (kept as
``method="rrr"``), the projection lands exactly on rank-deficient states,
so pure states converge linearly instead of as ``1/k``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import polarization as pol
from .errors import ConvergenceError, DomainError, InformationalCompletenessError, NumericalError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_TOL = 1e-9
LL_TOL = 1e-10
GRADIENT_MAP_TOL = 1e-6
MAX_ITERATIONS = 10_000
_EPS = np.finfo(float).eps
_SY_SY = np.kron(pol.PAULI_Y, pol.PAULI_Y)


def validate_density_matrix(rho) -> np.ndarray:
    """Return ``rho`` as a complex array after checking the physical invariants."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DomainError("a two-qubit density matrix is 4x4")
    if not np.all(np.isfinite(rho)):
        raise DomainError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise DomainError("density matrix trace differs from one")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -EIGEN_TOL:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def pure_density(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def werner_state(p: float) -> np.ndarray:
    return p * pure_density(pol.PSI_MINUS) + (1.0 - p) * np.eye(4) / 4.0


@dataclass(frozen=True, eq=False)
class MeasurementSetting:
    """Product analyzer ``|a><a| (x) |b><b|`` with optional letter labels."""

    signal: np.ndarray
    idler: np.ndarray
    label: str = ""

    def __post_init__(self):
        s = pol.ket(self.signal).astype(complex)
        i = pol.ket(self.idler).astype(complex)
        for v in (s, i):
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise DomainError("analyzer kets must be normalised")
        object.__setattr__(self, "signal", s)
        object.__setattr__(self, "idler", i)

    @classmethod
    def from_labels(cls, signal: str, idler: str) -> "MeasurementSetting":
        return cls(pol.ket(signal), pol.ket(idler), signal.upper() + idler.upper())

    @property
    def projector(self) -> np.ndarray:
        v = np.kron(self.signal, self.idler)
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class CountRecord:
    setting: MeasurementSetting
    counts: int
    integration_time: float = 1.0

    def __post_init__(self):
        if self.counts < 0 or int(self.counts) != self.counts:
            raise DomainError("counts must be non-negative integers")
        if not self.integration_time > 0:
            raise DomainError("integration time must be positive")
        object.__setattr__(self, "counts", int(self.counts))


def projector_set_overcomplete() -> List[MeasurementSetting]:
    """All 36 pairs from H, V, D, A, R, L; signal letter varies slowest."""
    return [MeasurementSetting.from_labels(a, b) for a, b in itertools.product("HVDARL", repeat=2)]


def _projectors(settings: Sequence[MeasurementSetting]) -> np.ndarray:
    return np.array([s.projector for s in settings])


def _probabilities(projectors: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ji->k", projectors, rho).real


def predicted_probability(rho, setting: MeasurementSetting) -> float:
    rho = validate_density_matrix(rho)
    p = float(np.trace(rho @ setting.projector).real)
    return min(max(p, 0.0), 1.0)


def simulate_counts(rho, settings: Sequence[MeasurementSetting], mean_total_per_setting: float,
                    seed: int, accidentals_per_setting: float = 0.0,
                    integration_time: float = 1.0) -> List[CountRecord]:
    """Poisson counts ``Poisson(N p_j + floor)`` per setting."""
    if not mean_total_per_setting > 0:
        raise DomainError("mean_total_per_setting must be positive")
    if accidentals_per_setting < 0:
        raise DomainError("accidental floor must be >= 0")
    rho = validate_density_matrix(rho)
    p = np.clip(_probabilities(_projectors(settings), rho), 0.0, 1.0)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_total_per_setting * p + accidentals_per_setting)
    return [CountRecord(s, int(c), integration_time) for s, c in zip(settings, counts)]


def _check_complete(projectors: np.ndarray):
    design = np.concatenate([projectors.reshape(len(projectors), -1).real,
                             projectors.reshape(len(projectors), -1).imag], axis=1)
    rank = np.linalg.matrix_rank(design, tol=1e-9)
    if rank < 16:
        raise InformationalCompletenessError(
            f"measurement settings span {rank} of 16 density-matrix dimensions")


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    r = idx[u - css / idx > 0][-1]
    return np.maximum(v - css[r - 1] / r, 0.0)


def project_to_density(m: np.ndarray) -> np.ndarray:
    """Closest (Frobenius) unit-trace PSD matrix."""
    m = 0.5 * (m + m.conj().T)
    w, vecs = np.linalg.eigh(m)
    return (vecs * _project_simplex(w)) @ vecs.conj().T


class _Likelihood:
    def __init__(self, projectors, counts):
        self.projectors = projectors
        self.freq = counts / counts.sum()
        self.mask = self.freq > 0

    def cost(self, rho) -> float:
        p = _probabilities(self.projectors, rho)[self.mask]
        if np.any(p <= 0):
            return math.inf
        return -float(self.freq[self.mask] @ np.log(p))

    def gradient(self, rho) -> np.ndarray:
        p = _probabilities(self.projectors, rho)
        w = np.zeros_like(p)
        w[self.mask] = self.freq[self.mask] / np.where(p[self.mask] > 0, p[self.mask], np.inf)
        return -np.einsum("k,kij->ij", w, self.projectors)


def _solve_projected_gradient(lik: _Likelihood, rho0, tol, max_iter):
    x = y = rho0
    fx = lik.cost(x)
    t, step = 1.0, 1.0
    stall = 0
    for k in range(1, max_iter + 1):
        g = lik.gradient(y)
        fy = lik.cost(y)
        while True:
            z = project_to_density(y - step * g)
            fz = lik.cost(z)
            d = z - y
            if fz <= fy + np.real(np.vdot(g, d)) + np.vdot(d, d).real / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-300:
                raise NumericalError("line search collapsed", {"iteration": k})
        if fz > fx:
            # momentum overshoot: restart from the last accepted iterate
            y, t = x, 1.0
            stall += 1
            if stall > 20:
                return x, k
            continue
        gain = fx - fz
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = z + ((t - 1.0) / t_next) * (z - x)
        x, fx, t = z, fz, t_next
        step *= 1.5
        stall = stall + 1 if gain <= 8 * _EPS * max(1.0, abs(fx)) else 0
        if stall > 20:
            return x, k
        if gain < tol:
            gmap = np.linalg.norm(x - project_to_density(x - lik.gradient(x)))
            if gmap < GRADIENT_MAP_TOL:
                return x, k
    raise ConvergenceError(f"no convergence in {max_iter} iterations", last_iterate=x,
                           diagnostics={"cost": fx})


def _solve_rrr(lik: _Likelihood, rho0, tol, max_iter, dilution=1.0):
    # R = sum_j f_j / p_j Pi_j scaled by the overcomplete frame constant
    frame = np.trace(lik.projectors.sum(axis=0)).real / 4.0
    x, fx = rho0, lik.cost(rho0)
    eps = dilution
    for k in range(1, max_iter + 1):
        R = -lik.gradient(x) / frame
        op = (np.eye(4) + eps * R) / (1.0 + eps)
        z = op @ x @ op
        z = 0.5 * (z + z.conj().T) / np.trace(z).real
        fz = lik.cost(z)
        if fz > fx:
            eps *= 0.5
            if eps < 1e-12:
                return x, k
            continue
        gain = fx - fz
        x, fx = z, fz
        if gain < tol:
            return x, k
    raise ConvergenceError(f"no convergence in {max_iter} iterations", last_iterate=x,
                           diagnostics={"cost": fx})


@dataclass(frozen=True, eq=False)
class Reconstruction:
    rho: np.ndarray
    iterations: int
    log_likelihood: float  # normalised: sum_j f_j log p_j


def mle_reconstruct(records: Sequence[CountRecord], initial=None, method: str = "projected-gradient",
                    tol: float = LL_TOL, max_iter: int = MAX_ITERATIONS, full_output: bool = False):
    """Maximum-likelihood density matrix from coincidence counts.

    ``tol`` is on the per-step improvement of the frequency-normalised
    log-likelihood; the projected-gradient solver additionally requires a
    small gradient mapping so slow creeping does not pass as convergence.
    All-zero data carries no information and returns ``I/4``.
    """
    if not records:
        raise InformationalCompletenessError("no measurement records")
    projectors = _projectors([r.setting for r in records])
    _check_complete(projectors)
    counts = np.array([r.counts / r.integration_time for r in records], dtype=float)
    if counts.sum() == 0:
        rho = np.eye(4, dtype=complex) / 4.0
        return Reconstruction(rho, 0, float("nan")) if full_output else rho
    lik = _Likelihood(projectors, counts)
    rho0 = np.eye(4, dtype=complex) / 4.0 if initial is None else validate_density_matrix(initial)
    if not math.isfinite(lik.cost(rho0)):
        rho0 = 0.5 * rho0 + np.eye(4) / 8.0
    if method == "projected-gradient":
        rho, k = _solve_projected_gradient(lik, rho0, tol, max_iter)
    elif method == "rrr":
        rho, k = _solve_rrr(lik, rho0, tol, max_iter)
    else:
        raise DomainError(f"unknown method {method!r}")
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    if full_output:
        return Reconstruction(rho, k, -lik.cost(rho))
    return rho


def linear_inversion(records: Sequence[CountRecord]) -> np.ndarray:
    """Least-squares inversion of the Born rule; may be unphysical (debug only)."""
    projectors = _projectors([r.setting for r in records])
    _check_complete(projectors)
    counts = np.array([r.counts / r.integration_time for r in records], dtype=float)
    frame = np.trace(projectors.sum(axis=0)).real / 4.0
    total = counts.sum() / frame
    if total == 0:
        return np.eye(4, dtype=complex) / 4.0
    a = projectors.conj().reshape(len(projectors), -1)
    vec, *_ = np.linalg.lstsq(a, counts / total, rcond=None)
    rho = vec.reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def is_physical(rho) -> bool:
    try:
        validate_density_matrix(rho)
    except DomainError:
        return False
    return True


def fidelity(rho, target=pol.PSI_MINUS) -> float:
    """``<t|rho|t>`` for a pure target ket (default the singlet)."""
    rho = validate_density_matrix(rho)
    t = np.asarray(target, dtype=complex).reshape(-1)
    t = t / np.linalg.norm(t)
    return float(min(max((t.conj() @ rho @ t).real, 0.0), 1.0))


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    rho = validate_density_matrix(rho)
    sigma = validate_density_matrix(sigma)
    w, v = np.linalg.eigh(rho)
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = np.linalg.eigvalsh(0.5 * (s @ sigma @ s + (s @ sigma @ s).conj().T))
    return float(min(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2, 1.0))


def trace_distance(rho, sigma) -> float:
    d = np.asarray(rho, complex) - np.asarray(sigma, complex)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def concurrence(rho) -> float:
    rho = validate_density_matrix(rho)
    tilde = _SY_SY @ rho.conj() @ _SY_SY
    try:
        ev = np.linalg.eigvals(rho @ tilde)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigen-solver failed in concurrence") from exc
    lam = np.sort(np.sqrt(np.clip(ev.real, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def tangle(rho) -> float:
    return concurrence(rho) ** 2


@dataclass(frozen=True, eq=False)
class VisibilityCurve:
    angles: np.ndarray  # analyzer angle, radians
    probabilities: np.ndarray
    offset: float
    amplitude: float
    phase: float

    @property
    def visibility(self) -> float:
        return self.amplitude / self.offset


_FIXED_ARM = {"rectilinear": "H", "diagonal": "D"}


def fit_sinusoid(angles, values):
    """Least-squares ``a + b cos(2 theta + c)``; returns ``(a, |b|, c)``."""
    angles = np.asarray(angles, dtype=float)
    values = np.asarray(values, dtype=float)
    design = np.column_stack([np.ones_like(angles), np.cos(2 * angles), np.sin(2 * angles)])
    if angles.size < 4 or np.linalg.matrix_rank(design) < 3:
        raise NumericalError("need at least four distinct analyzer angles")
    (a, u, v), *_ = np.linalg.lstsq(design, values, rcond=None)
    resid = values - design @ np.array([a, u, v])
    scale = max(np.max(np.abs(values)), 1e-300)
    if not a > 0 or np.sqrt(np.mean(resid**2)) > 1e-2 * scale:
        raise NumericalError("data are not a sinusoid in twice the analyzer angle",
                             {"offset": float(a), "rms_residual": float(np.sqrt(np.mean(resid**2)))})
    return float(a), float(math.hypot(u, v)), float(math.atan2(-v, u))


def visibility_curve(rho, basis: str = "rectilinear", fixed_arm_angle: Optional[float] = None,
                     points: int = 73) -> VisibilityCurve:
    """Coincidence probability as the idler polarizer sweeps ``0..2 pi``.

    The signal analyzer is fixed at H (rectilinear) or D (diagonal) unless
    ``fixed_arm_angle`` overrides it.
    """
    rho = validate_density_matrix(rho)
    key = basis.lower()
    if key not in _FIXED_ARM:
        raise DomainError(f"basis must be one of {sorted(_FIXED_ARM)}")
    fixed = pol.KETS[_FIXED_ARM[key]] if fixed_arm_angle is None else pol.linear(fixed_arm_angle)
    angles = np.linspace(0.0, 2.0 * math.pi, points)
    probs = np.array([
        predicted_probability(rho, MeasurementSetting(fixed, pol.linear(a))) for a in angles
    ])
    a, b, c = fit_sinusoid(angles, probs)
    return VisibilityCurve(angles, probs, a, b, c)


def fidelity_from_visibility(V: float) -> float:
    if not 0.0 <= V <= 1.0:
        raise DomainError("visibility must lie in [0, 1]")
    return 1.0 - (1.0 - V) / 2.0


@dataclass(frozen=True)
class ErrorBarSummary:
    fidelity: float
    fidelity_sigma: float
    tangle: float
    tangle_sigma: float
    n_resamples: int
    failures: int


def _resample_once(records, seed_seq, target):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    counts = rng.poisson([r.counts for r in records])
    resampled = [CountRecord(r.setting, int(c), r.integration_time) for r, c in zip(records, counts)]
    try:
        rho = mle_reconstruct(resampled)
    except (NumericalError, DomainError):
        return None
    return fidelity(rho, target), tangle(rho)


def error_bars_monte_carlo(records: Sequence[CountRecord], n_resamples: int, seed: int,
                           target=pol.PSI_MINUS, workers: int = 1) -> ErrorBarSummary:
    """Poisson-resampled mean and standard deviation of fidelity and tangle.

    Resample ``k`` draws from ``SeedSequence(seed).spawn(n)[k]``, so the
    summary does not depend on ``workers``.
    """
    if n_resamples < 100:
        raise DomainError("use at least 100 resamples")
    seeds = np.random.SeedSequence(seed).spawn(n_resamples)
    if workers <= 1:
        results = [_resample_once(records, s, target) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _resample_once(records, s, target), seeds))
    good = np.array([r for r in results if r is not None], dtype=float)
    failures = n_resamples - len(good)
    if len(good) < 2:
        raise NumericalError("too many failed resample reconstructions", {"failures": failures})
    return ErrorBarSummary(float(good[:, 0].mean()), float(good[:, 0].std(ddof=1)),
                           float(good[:, 1].mean()), float(good[:, 1].std(ddof=1)),
                           n_resamples, failures)
