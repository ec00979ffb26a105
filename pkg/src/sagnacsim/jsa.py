"""Joint spectral amplitudes of a type-II waveguide down-converter.

All frequencies are angular frequencies in rad/fs, times in fs, lengths in mm
and wavelengths in nm.  A joint spectral amplitude (JSA) is sampled on a
rectangular grid whose first axis is the signal and second axis the idler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, GridMismatchError, NumericalError, ResolutionError

SPEED_OF_LIGHT = 299.792458  # nm/fs

# sinc(x)**2 == 1/2 at x = SINC_HALF_INTENSITY
SINC_HALF_INTENSITY = 1.3915573782515103
# exp(-GAUSS_SINC_GAMMA x**2) and sinc(x) share their amplitude half width
GAUSS_SINC_GAMMA = 0.193

MIN_SAMPLES_PER_FWHM = 8
MIN_SPAN_PER_FWHM = 2.5


def wavelength_to_omega(wavelength):
    """Exact conversion ``omega = 2 pi c / lambda`` (nm -> rad/fs)."""
    return 2.0 * math.pi * SPEED_OF_LIGHT / np.asarray(wavelength, dtype=float)


def omega_to_wavelength(omega):
    return 2.0 * math.pi * SPEED_OF_LIGHT / np.asarray(omega, dtype=float)


def bandwidth_to_omega(center_wavelength: float, fwhm: float) -> float:
    """Angular-frequency width spanned by ``center +- fwhm/2`` in wavelength.

    No small-bandwidth approximation is made: the result is the distance
    between the exact images of both band edges.
    """
    if fwhm <= 0 or center_wavelength <= fwhm / 2:
        raise DomainError(f"invalid band {center_wavelength} nm +- {fwhm / 2} nm")
    lo = center_wavelength - fwhm / 2.0
    hi = center_wavelength + fwhm / 2.0
    return float(wavelength_to_omega(lo) - wavelength_to_omega(hi))


@dataclass(frozen=True)
class FrequencyGrid:
    center_signal: float
    center_idler: float
    half_span_signal: float
    half_span_idler: float
    n_signal: int
    n_idler: int

    def __post_init__(self):
        if self.n_signal < 2 or self.n_idler < 2:
            raise DomainError("a frequency grid needs at least two samples per axis")
        if not (self.half_span_signal > 0 and self.half_span_idler > 0):
            raise DomainError("grid spans must be strictly positive")
        for name in ("center_signal", "center_idler", "half_span_signal", "half_span_idler"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @classmethod
    def degenerate(cls, pump_wavelength: float, half_span: float, n: int) -> "FrequencyGrid":
        """Square grid centred on frequency-degenerate emission for a pump."""
        center = float(wavelength_to_omega(pump_wavelength)) / 2.0
        return cls(center, center, half_span, half_span, n, n)

    @property
    def signal_detuning(self) -> np.ndarray:
        return np.linspace(-self.half_span_signal, self.half_span_signal, self.n_signal)

    @property
    def idler_detuning(self) -> np.ndarray:
        return np.linspace(-self.half_span_idler, self.half_span_idler, self.n_idler)

    @property
    def signal_axis(self) -> np.ndarray:
        return self.center_signal + self.signal_detuning

    @property
    def idler_axis(self) -> np.ndarray:
        return self.center_idler + self.idler_detuning

    @property
    def d_signal(self) -> float:
        return 2.0 * self.half_span_signal / (self.n_signal - 1)

    @property
    def d_idler(self) -> float:
        return 2.0 * self.half_span_idler / (self.n_idler - 1)

    @property
    def cell(self) -> float:
        """Area element ``d_signal * d_idler``."""
        return self.d_signal * self.d_idler

    @property
    def shape(self) -> tuple:
        return (self.n_signal, self.n_idler)

    def detuning_mesh(self):
        """``(nu_s, nu_i)`` meshes with ``indexing='ij'``."""
        return np.meshgrid(self.signal_detuning, self.idler_detuning, indexing="ij")


@dataclass(frozen=True)
class PumpEnvelope:
    center_wavelength: float = 770.0
    fwhm_bandwidth: float = 1.8
    chirp: float = 0.0  # fs^2, quadratic spectral phase

    def __post_init__(self):
        if not (self.fwhm_bandwidth > 0 and self.center_wavelength > 0):
            raise DomainError("pump wavelength and bandwidth must be positive")
        if not math.isfinite(self.chirp):
            raise DomainError("pump chirp must be finite")

    @property
    def center_frequency(self) -> float:
        return float(wavelength_to_omega(self.center_wavelength))

    @property
    def fwhm_frequency(self) -> float:
        """Intensity FWHM in rad/fs."""
        return bandwidth_to_omega(self.center_wavelength, self.fwhm_bandwidth)

    @property
    def sigma(self) -> float:
        """Width of the amplitude ``exp(-nu**2 / (2 sigma**2))``."""
        return self.fwhm_frequency / (2.0 * math.sqrt(math.log(2.0)))


def pump_amplitude(env: PumpEnvelope, nu):
    """Chirped Gaussian pump amplitude at detuning ``nu`` from the pump centre.

    ``|amplitude|**2`` integrates to one over the real line.
    """
    nu = np.asarray(nu, dtype=float)
    if not np.all(np.isfinite(nu)):
        raise DomainError("pump detuning must be finite")
    sigma = env.sigma
    peak = (1.0 / (sigma * math.sqrt(math.pi))) ** 0.5
    amp = peak * np.exp(-(nu**2) / (2.0 * sigma**2))
    if env.chirp != 0.0:
        amp = amp * np.exp(1j * env.chirp * nu**2)
    return amp


@dataclass(frozen=True)
class PhasematchModel:
    crystal_length: float = 9.0
    inv_gv_pump: float = 0.0
    inv_gv_signal: float = 0.0
    inv_gv_idler: float = 0.0
    shape: str = "sinc"  # "sinc" | "gaussian"

    def __post_init__(self):
        if not self.crystal_length > 0:
            raise DomainError("crystal_length must be positive")
        if self.shape not in ("sinc", "gaussian"):
            raise DomainError(f"unknown phasematching shape {self.shape!r}")

    @classmethod
    def symmetric(cls, crystal_length: float, gv_mismatch: float, shape: str = "sinc") -> "PhasematchModel":
        """Pump inverse group velocity exactly midway between signal and idler.

        ``gv_mismatch`` is ``inv_gv_idler - inv_gv_signal`` in fs/mm.
        """
        half = gv_mismatch / 2.0
        return cls(crystal_length, 0.0, -half, half, shape)

    @classmethod
    def matched_to_pump(cls, env: PumpEnvelope, crystal_length: float = 9.0, shape: str = "sinc") -> "PhasematchModel":
        """Symmetric model whose sinc^2 FWHM in ``nu_s - nu_i`` equals the pump FWHM.

        With a symmetric group-velocity mismatch ``D`` the phase mismatch is
        ``D (nu_s - nu_i) / 2``, so the sinc^2 ridge has width
        ``8 x_half / (D L)`` across the diagonal; equating with the pump
        bandwidth (measured along ``nu_s + nu_i``) makes the main lobe round.
        """
        mismatch = 8.0 * SINC_HALF_INTENSITY / (env.fwhm_frequency * crystal_length)
        return cls.symmetric(crystal_length, mismatch, shape)

    @property
    def coefficient_signal(self) -> float:
        return self.inv_gv_pump - self.inv_gv_signal

    @property
    def coefficient_idler(self) -> float:
        return self.inv_gv_pump - self.inv_gv_idler

    def delta_k(self, nu_s, nu_i):
        """Linearised phase mismatch in rad/mm."""
        return self.coefficient_signal * np.asarray(nu_s) + self.coefficient_idler * np.asarray(nu_i)

    def fwhm_along(self, axis: str) -> float:
        """Intensity FWHM of the phasematching function along one detuning axis."""
        coeff = self.coefficient_signal if axis == "signal" else self.coefficient_idler
        if coeff == 0.0:
            return math.inf
        if self.shape == "sinc":
            x_half = SINC_HALF_INTENSITY
        else:
            x_half = math.sqrt(math.log(2.0) / (2.0 * GAUSS_SINC_GAMMA))
        return 2.0 * x_half / (abs(coeff) * self.crystal_length / 2.0)


def phasematch_amplitude(pm: PhasematchModel, nu_s, nu_i):
    x = pm.delta_k(nu_s, nu_i) * pm.crystal_length / 2.0
    if pm.shape == "sinc":
        # np.sinc is the normalised sinc
        return np.sinc(x / math.pi)
    return np.exp(-GAUSS_SINC_GAMMA * x**2)


@dataclass(frozen=True)
class SpectralFilter:
    center_wavelength: float = 1540.0
    fwhm: float = 8.0
    order: int = 1
    applies_to: str = "signal"  # "signal" | "idler"

    def __post_init__(self):
        if self.order < 1 or int(self.order) != self.order:
            raise DomainError("filter order must be a positive integer")
        if self.applies_to not in ("signal", "idler"):
            raise DomainError(f"filter applies_to must be 'signal' or 'idler', got {self.applies_to!r}")
        if not (self.fwhm > 0 and self.center_wavelength > self.fwhm / 2):
            raise DomainError("invalid filter band")

    @property
    def center_frequency(self) -> float:
        return float(wavelength_to_omega(self.center_wavelength))

    @property
    def fwhm_frequency(self) -> float:
        return bandwidth_to_omega(self.center_wavelength, self.fwhm)

    def transmission(self, omega):
        """Amplitude transmission; the intensity has FWHM ``fwhm``."""
        u = 2.0 * (np.asarray(omega, dtype=float) - self.center_frequency) / self.fwhm_frequency
        return np.exp(-0.5 * math.log(2.0) * u ** (2 * self.order))


@dataclass(frozen=True, eq=False)
class JointSpectralAmplitude:
    grid: FrequencyGrid
    values: np.ndarray
    norm: float = 1.0
    prefilter_norm: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, grid: FrequencyGrid, values) -> "JointSpectralAmplitude":
        """Wrap raw samples and normalise them to unit L2 norm on the grid."""
        values = np.asarray(values, dtype=complex)
        norm = l2_norm(values, grid)
        if norm == 0.0:
            raise DomainError("cannot normalise an all-zero amplitude")
        return cls(grid, values / norm, norm, norm)

    @property
    def filter_transmission(self) -> float:
        """Fraction of pair flux surviving the filters (post/pre norm squared)."""
        return (self.norm / self.prefilter_norm) ** 2

    def with_values(self, values) -> "JointSpectralAmplitude":
        return JointSpectralAmplitude(self.grid, values, self.norm, self.prefilter_norm)


def l2_norm(values, grid: FrequencyGrid) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell))


def inner_product(f: JointSpectralAmplitude, g: JointSpectralAmplitude) -> complex:
    """Grid inner product ``<f|g>`` (conjugate-linear in ``f``)."""
    if f.grid != g.grid:
        raise GridMismatchError("amplitudes live on different grids")
    return complex(np.sum(np.conj(f.values) * g.values) * f.grid.cell)


def _check_resolution(grid: FrequencyGrid, env: PumpEnvelope, pm: PhasematchModel, filters):
    pump_fwhm = env.fwhm_frequency
    for axis, step, half_span in (
        ("signal", grid.d_signal, grid.half_span_signal),
        ("idler", grid.d_idler, grid.half_span_idler),
    ):
        widths = [pump_fwhm, pm.fwhm_along(axis)]
        widths += [f.fwhm_frequency for f in filters if f.applies_to == axis]
        narrowest = min(widths)
        if narrowest / step < MIN_SAMPLES_PER_FWHM:
            raise ResolutionError(
                f"{axis} axis has {narrowest / step:.2f} samples per narrowest FWHM "
                f"({narrowest:.3g} rad/fs); need {MIN_SAMPLES_PER_FWHM}"
            )
        required = MIN_SPAN_PER_FWHM * min(pump_fwhm, pm.fwhm_along(axis))
        if half_span < required * (1 - 1e-12):
            raise ResolutionError(
                f"{axis} half span {half_span:.3g} rad/fs is below {MIN_SPAN_PER_FWHM} x FWHM ({required:.3g})"
            )


def default_grid(env: PumpEnvelope, pm: PhasematchModel, n: int = 256) -> FrequencyGrid:
    """Square degenerate grid covering 2.5 FWHM (and 4 amplitude sigmas) each side."""
    widths = [env.fwhm_frequency, pm.fwhm_along("signal"), pm.fwhm_along("idler")]
    widest = max(w for w in widths if math.isfinite(w))
    half_span = max(MIN_SPAN_PER_FWHM * widest, 4.0 * widest / (2.0 * math.sqrt(math.log(2.0))))
    return FrequencyGrid.degenerate(env.center_wavelength, half_span, n)


def build_jsa(
    env: PumpEnvelope,
    pm: PhasematchModel,
    grid: FrequencyGrid,
    filters: Sequence[SpectralFilter] = (),
) -> JointSpectralAmplitude:
    """Pump envelope x phasematching x filters, normalised on ``grid``.

    The pump is evaluated at ``omega_s + omega_i - omega_p``; phasematching at
    the detunings from the grid centres.  ``norm`` and ``prefilter_norm`` keep
    the L2 norms before normalisation so the filter transmission survives.
    """
    filters = list(filters)
    _check_resolution(grid, env, pm, filters)
    nu_s, nu_i = grid.detuning_mesh()
    offset = grid.center_signal + grid.center_idler - env.center_frequency
    raw = pump_amplitude(env, nu_s + nu_i + offset) * phasematch_amplitude(pm, nu_s, nu_i)
    prefilter = l2_norm(raw, grid)
    ws = grid.signal_axis[:, None]
    wi = grid.idler_axis[None, :]
    for flt in filters:
        raw = raw * (flt.transmission(ws) if flt.applies_to == "signal" else flt.transmission(wi))
    norm = l2_norm(raw, grid)
    if norm == 0.0 or not math.isfinite(norm):
        raise NumericalError("JSA vanishes on the grid", {"grid": grid})
    return JointSpectralAmplitude(grid, raw / norm, norm, prefilter)


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    coefficients: np.ndarray
    probabilities: np.ndarray
    signal_modes: Optional[np.ndarray] = field(default=None, repr=False)
    idler_modes: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def purity(self) -> float:
        return purity(self)

    @property
    def schmidt_number(self) -> float:
        return 1.0 / purity(self)


def schmidt_decompose(jsa: JointSpectralAmplitude, keep_modes: bool = False) -> SchmidtSpectrum:
    """Singular value decomposition of the sampled amplitude.

    With ``keep_modes`` the signal modes are returned as columns and the idler
    modes as rows, each normalised on its own frequency axis.
    """
    grid = jsa.grid
    matrix = jsa.values * math.sqrt(grid.cell)
    try:
        if keep_modes:
            u, s, vh = np.linalg.svd(matrix, full_matrices=False)
        else:
            s = np.linalg.svd(matrix, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge: {exc}",
            {"shape": grid.shape, "d_signal": grid.d_signal, "d_idler": grid.d_idler},
        ) from exc
    weights = s**2
    probabilities = weights / weights.sum()
    if keep_modes:
        return SchmidtSpectrum(
            s, probabilities, u / math.sqrt(grid.d_signal), vh / math.sqrt(grid.d_idler)
        )
    return SchmidtSpectrum(s, probabilities)


def purity(spectrum) -> float:
    """Spectral purity ``sum p_k**2``; accepts a spectrum or a JSA."""
    if isinstance(spectrum, JointSpectralAmplitude):
        spectrum = schmidt_decompose(spectrum)
    p = np.asarray(spectrum.probabilities, dtype=float)
    return float(np.sum(p**2))


def jsi(jsa: JointSpectralAmplitude) -> np.ndarray:
    return np.abs(jsa.values) ** 2


def chip_filters(pump_wavelength: float = 770.0) -> list:
    """8 nm (order-2) signal and 12 nm (Gaussian) idler filters at degeneracy."""
    center = 2.0 * pump_wavelength
    return [
        SpectralFilter(center, 8.0, 2, "signal"),
        SpectralFilter(center, 12.0, 1, "idler"),
    ]


def chip_jsa(n: int = 256, filtered: bool = True, pump_wavelength: float = 770.0,
              pump_fwhm: float = 1.8, crystal_length: float = 9.0) -> JointSpectralAmplitude:
    """The chip-1 operating point: 9 mm waveguide, 1.8 nm pump, 8/12 nm filters."""
    env = PumpEnvelope(pump_wavelength, pump_fwhm)
    pm = PhasematchModel.matched_to_pump(env, crystal_length)
    grid = default_grid(env, pm, n)
    return build_jsa(env, pm, grid, chip_filters(pump_wavelength) if filtered else ())
