"""Polarization-entangled two-path state of the Sagnac source.

The clockwise path contributes ``f_c`` to the ``|VH>`` term and the
counter-clockwise path ``f_cc`` to ``|HV>``:

    |psi> = (|HV> f_cc + exp(i phi) |VH> f_c) / sqrt(2)

so ``phi = pi`` gives the singlet when both amplitudes agree.  Relative
delays and chirps between the two paths make them distinguishable in
time-frequency, which shows up as fringes in diagonal-basis joint spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from . import polarization as pol
from .errors import DomainError, GridMismatchError, NoFringeError, UndefinedAngleError
from .jsa import JointSpectralAmplitude, inner_product, l2_norm


@dataclass(frozen=True)
class DelayChirpParams:
    tau_p: float = 0.0
    tau_s: float = 0.0
    tau_i: float = 0.0
    chirp_p: float = 0.0
    chirp_s: float = 0.0
    chirp_i: float = 0.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")

    def __neg__(self) -> "DelayChirpParams":
        return DelayChirpParams(*(-v for v in self.__dict__.values()))

    @property
    def has_chirp(self) -> bool:
        return any((self.chirp_p, self.chirp_s, self.chirp_i))


def apply_delay_chirp(
    f: JointSpectralAmplitude,
    p: DelayChirpParams,
    reference: Optional[Tuple[float, float]] = None,
) -> JointSpectralAmplitude:
    """Multiply ``f`` by the relative spectral phase of the other Sagnac path.

    The phase is ``tau_s ds + tau_i di + tau_p (ds + di)`` plus the quadratic
    terms ``A_s ds**2 + A_i di**2 + A_p (ds + di)**2``, whose group delay is
    ``2 A dw``.  Detunings ``ds, di`` are taken about ``reference`` (absolute
    signal and idler frequencies), the grid centres by default.
    """
    if not isinstance(f, JointSpectralAmplitude):
        raise TypeError("apply_delay_chirp expects a JointSpectralAmplitude")
    grid = f.grid
    if reference is None:
        ds, di = grid.detuning_mesh()
    else:
        if len(reference) != 2 or not all(math.isfinite(r) for r in reference):
            raise GridMismatchError("reference must be a finite (omega_s, omega_i) pair")
        ds, di = np.meshgrid(grid.signal_axis - reference[0], grid.idler_axis - reference[1], indexing="ij")
    dp = ds + di
    phase = (
        p.tau_s * ds + p.tau_i * di + p.tau_p * dp
        + p.chirp_s * ds**2 + p.chirp_i * di**2 + p.chirp_p * dp**2
    )
    return f.with_values(f.values * np.exp(1j * phase))


@dataclass(frozen=True, eq=False)
class HybridState:
    f_c: JointSpectralAmplitude
    f_cc: JointSpectralAmplitude
    phase: float = math.pi

    def __post_init__(self):
        if self.f_c.grid != self.f_cc.grid:
            raise GridMismatchError("f_c and f_cc must share a frequency grid")
        for name in ("f_c", "f_cc"):
            norm = l2_norm(getattr(self, name).values, self.f_c.grid)
            if abs(norm - 1.0) > 1e-9:
                raise DomainError(f"{name} is not normalised (norm {norm:.12g})")

    @classmethod
    def from_jsa(cls, jsa: JointSpectralAmplitude, params: Optional[DelayChirpParams] = None,
                 phase: float = math.pi, reference=None) -> "HybridState":
        """Clockwise amplitude ``jsa``; counter-clockwise gets the relative delays/chirps."""
        f_cc = jsa if params is None else apply_delay_chirp(jsa, params, reference)
        return cls(jsa, f_cc, phase)

    @property
    def grid(self):
        return self.f_c.grid

    @property
    def overlap(self) -> complex:
        """``<f_c|f_cc>``."""
        return inner_product(self.f_c, self.f_cc)


def _bra_coefficients(vec):
    vec = pol.ket(vec)
    norm = float(np.vdot(vec, vec).real)
    if abs(norm - 1.0) > 1e-9:
        raise DomainError(f"analyzer state is not normalised (|v|^2 = {norm:.12g})")
    return np.conj(vec)


def project_polarization(state: HybridState, bra_signal, bra_idler):
    """Project both photons on polarization analyzers.

    ``bra_signal`` and ``bra_idler`` are the analyzer kets (letter codes or
    2-vectors); their conjugates form the bras.  Returns the projected
    spectral amplitude and the total projection probability.
    """
    s = _bra_coefficients(bra_signal)
    i = _bra_coefficients(bra_idler)
    a = s[0] * i[1]  # <s|H><i|V>
    b = s[1] * i[0]  # <s|V><i|H>
    amplitude = (a * state.f_cc.values + b * np.exp(1j * state.phase) * state.f_c.values) / math.sqrt(2.0)
    probability = float(np.sum(np.abs(amplitude) ** 2) * state.grid.cell)
    return amplitude, probability


def polarization_resolved_jsi(state: HybridState, bra_signal, bra_idler) -> np.ndarray:
    amplitude, _ = project_polarization(state, bra_signal, bra_idler)
    return np.abs(amplitude) ** 2


def fringe_angle_analytic(p: DelayChirpParams) -> float:
    """Orientation of the diagonal-basis fringe wavevector, in (-pi/2, pi/2].

    The fringe phase is ``(tau_p + tau_s) ds + (tau_p + tau_i) di``; the angle
    is measured from the signal axis towards the idler axis.
    """
    num = p.tau_p + p.tau_i
    den = p.tau_p + p.tau_s
    if num == 0.0 and den == 0.0:
        raise UndefinedAngleError("tau_p + tau_s and tau_p + tau_i both vanish: no fringes")
    if den == 0.0:
        return math.pi / 2.0
    return math.atan(num / den)


EMPTY_PATTERN_LEVEL = 1e-12


def _fold_angle(theta: float) -> float:
    while theta <= -math.pi / 2.0:
        theta += math.pi
    while theta > math.pi / 2.0:
        theta -= math.pi
    return theta


def estimate_fringe_angle(jsi_grid, spacing=(1.0, 1.0), reference=None, mask_level: float = 1e-3,
                          pad: int = 4) -> float:
    """Dominant fringe orientation of a sampled joint spectrum.

    The pattern is (optionally) divided by a ``reference`` intensity, such as
    the rectilinear JSI, to remove the spectral envelope; samples where the
    reference falls below ``mask_level`` of its maximum are discarded.  The
    peak of the zero-padded 2-D DFT magnitude (DC excluded; ties broken by
    magnitude, then by lowest frequency) seeds a least-squares sinusoid fit
    that locates the wavevector off the DFT bins.  Returns the wavevector
    angle from the signal axis, folded into (-pi/2, pi/2].
    """
    g = np.asarray(jsi_grid, dtype=float)
    if g.ndim != 2:
        raise DomainError("expected a 2-D intensity grid")
    d_s, d_i = (float(x) for x in spacing)
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        if ref.shape != g.shape:
            raise GridMismatchError("reference grid has a different shape")
        top = ref.max()
        if not top > 0:
            raise NoFringeError("reference intensity vanishes")
        mask = ref > mask_level * top
        weights = np.where(mask, ref / top, 0.0)
        pattern = np.where(mask, g / np.where(mask, ref, 1.0), 0.0)
        if np.max(np.abs(pattern)) < EMPTY_PATTERN_LEVEL:
            # round-off residue of a vanishing projection, not fringes
            raise NoFringeError("projected intensity is negligible relative to the reference")
    else:
        if not np.max(np.abs(g)) > 0:
            raise NoFringeError("intensity grid is identically zero")
        mask = np.ones(g.shape, dtype=bool)
        weights = np.ones(g.shape)
        pattern = g
    mean = np.sum(weights * pattern) / np.sum(weights)
    centered = np.where(mask, pattern - mean, 0.0) * weights

    n_s, n_i = g.shape
    spectrum = np.abs(np.fft.fft2(centered, s=(pad * n_s, pad * n_i)))
    spectrum[0, 0] = 0.0
    peak = spectrum.max()
    if not peak > 3.0 * np.median(spectrum):
        raise NoFringeError("no off-DC spectral peak above 3x the median")
    k_s_axis = 2.0 * math.pi * np.fft.fftfreq(pad * n_s, d=d_s)
    k_i_axis = 2.0 * math.pi * np.fft.fftfreq(pad * n_i, d=d_i)
    rows, cols = np.nonzero(spectrum >= peak * (1.0 - 1e-12))
    radii = np.hypot(k_s_axis[rows], k_i_axis[cols])
    best = int(np.argmin(radii))
    k0 = np.array([k_s_axis[rows[best]], k_i_axis[cols[best]]])

    x_s = (np.arange(n_s) - (n_s - 1) / 2.0) * d_s
    x_i = (np.arange(n_i) - (n_i - 1) / 2.0) * d_i
    xs, xi = np.meshgrid(x_s, x_i, indexing="ij")
    xs, xi = xs[mask], xi[mask]
    target = pattern[mask]
    sw = np.sqrt(weights[mask])

    def residual(k):
        arg = k[0] * xs + k[1] * xi
        design = np.column_stack([np.ones_like(arg), np.cos(arg), np.sin(arg)]) * sw[:, None]
        coef, *_ = np.linalg.lstsq(design, target * sw, rcond=None)
        return float(np.sum((design @ coef - target * sw) ** 2))

    step = np.array([2.0 * math.pi / (pad * n_s * d_s), 2.0 * math.pi / (pad * n_i * d_i)])
    simplex = np.array([k0, k0 + [step[0], 0.0], k0 + [0.0, step[1]]])
    scale = float(np.sum(target**2 * sw**2)) or 1.0
    result = optimize.minimize(
        lambda k: residual(k) / scale, k0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-9 * np.linalg.norm(step),
                 "fatol": 1e-16, "maxiter": 4000},
    )
    k = result.x if result.fun <= residual(k0) / scale else k0
    return _fold_angle(math.atan2(k[1], k[0]))


@dataclass(frozen=True)
class FacetReflection:
    """Per-pass end-facet reflectivity into a temporally orthogonal mode."""

    reflectivity: float = 0.0
    reflectivity_idler: Optional[float] = None
    model: str = "orthogonal_temporal_mode"

    def __post_init__(self):
        for r in (self.reflectivity, self.reflectivity_idler):
            if r is not None and not (0.0 <= r < 1.0):
                raise DomainError(f"reflectivity must lie in [0, 1), got {r}")
        if self.model != "orthogonal_temporal_mode":
            raise DomainError(f"unknown reflection model {self.model!r}")

    @property
    def signal(self) -> float:
        return self.reflectivity

    @property
    def idler(self) -> float:
        return self.reflectivity if self.reflectivity_idler is None else self.reflectivity_idler


_FLIP_SIGNAL = np.kron(pol.PAULI_X, np.eye(2))
_FLIP_IDLER = np.kron(np.eye(2), pol.PAULI_X)


def polarization_density_matrix(state: HybridState, refl: Optional[FacetReflection] = None) -> np.ndarray:
    """Two-qubit polarization state after tracing out frequency.

    A reflected photon leaves in the orthogonal polarization and in a
    temporally orthogonal mode, so each reflection branch enters as an
    incoherent mixture component: weights ``(1-Rs)(1-Ri)``, ``Rs(1-Ri)``,
    ``(1-Rs)Ri`` and ``Rs Ri`` for no flip, signal flip, idler flip and both.
    """
    coherence = 0.5 * np.exp(-1j * state.phase) * state.overlap
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = 0.5
    rho[2, 2] = 0.5
    rho[1, 2] = coherence
    rho[2, 1] = np.conj(coherence)
    if refl is None or (refl.signal == 0.0 and refl.idler == 0.0):
        return rho
    rs, ri = refl.signal, refl.idler
    both = _FLIP_SIGNAL @ _FLIP_IDLER
    mixed = (
        (1 - rs) * (1 - ri) * rho
        + rs * (1 - ri) * _FLIP_SIGNAL @ rho @ _FLIP_SIGNAL
        + (1 - rs) * ri * _FLIP_IDLER @ rho @ _FLIP_IDLER
        + rs * ri * both @ rho @ both
    )
    return mixed / np.trace(mixed).real


def fidelity_bound_vs_reflectivity(R):
    """Singlet fidelity ceiling for indistinguishable paths and reflectivity ``R``.

    Only the unflipped and doubly flipped branches overlap the singlet, so
    ``F = (1 - R)**2 + R**2``.
    """
    r = np.asarray(R, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r < 0.0) or np.any(r >= 1.0):
        raise DomainError("reflectivity must lie in [0, 1)")
    f = (1.0 - r) ** 2 + r**2
    return float(f) if f.ndim == 0 else f


def singlet_fidelity(rho) -> float:
    return float(np.real(np.vdot(pol.PSI_MINUS, np.asarray(rho) @ pol.PSI_MINUS)))
