"""Polarization Hong-Ou-Mandel interference of two heralded idlers.

Two idler photons travel in one spatial mode, one horizontal and one
vertical.  A half-wave plate followed by a PBS acts as a beam splitter of
tunable ratio: at 0 deg the photons always separate, at 22.5 deg the plate
is a balanced splitter and indistinguishable photons bunch.

Facet reflections are bookkept per heralded idler: a heralded idler is
spoiled when either photon of its pair is reflected at either end facet,
i.e. with probability ``1 - (1 - R)**4``.  A spoiled idler has the wrong
polarization and sits in a temporally orthogonal mode.  With both idlers
flipped the two delayed photons interfere again as orthogonally polarized
partners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, GridMismatchError
from .hybridstate import FacetReflection
from .jsa import JointSpectralAmplitude, schmidt_decompose

FACET_PASSES_PER_HERALDED_IDLER = 4


@dataclass(frozen=True, eq=False)
class SingleModePhotonState:
    """Ensemble ``rho = sum_k w_k |phi_k><phi_k|`` over one frequency axis."""

    axis: np.ndarray
    amplitudes: np.ndarray  # shape (n_components, n_axis)
    weights: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if amps.shape != (w.size, axis.size):
            raise DomainError("one amplitude row per weight, sampled on the axis")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be non-negative and sum to one")
        norms = np.sum(np.abs(amps) ** 2, axis=1) * self.spacing_of(axis)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise DomainError("each spectral component must be L2-normalised")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def spacing_of(axis) -> float:
        return float(axis[1] - axis[0])

    @property
    def spacing(self) -> float:
        return self.spacing_of(self.axis)

    @classmethod
    def pure(cls, axis, amplitude) -> "SingleModePhotonState":
        axis = np.asarray(axis, dtype=float)
        amplitude = np.asarray(amplitude, dtype=complex)
        amplitude = amplitude / math.sqrt(np.sum(np.abs(amplitude) ** 2) * cls.spacing_of(axis))
        return cls(axis, amplitude[None, :], np.array([1.0]))

    def purity(self) -> float:
        return trace_product(self, self)


def heralded_idler_state(jsa: JointSpectralAmplitude, cutoff: float = 1e-14) -> SingleModePhotonState:
    """Idler reduced state after a spectrally blind herald on the signal."""
    spectrum = schmidt_decompose(jsa, keep_modes=True)
    keep = spectrum.probabilities > cutoff
    weights = spectrum.probabilities[keep]
    return SingleModePhotonState(jsa.grid.idler_axis, spectrum.idler_modes[keep], weights / weights.sum())


def _check_pair(rho1: SingleModePhotonState, rho2: SingleModePhotonState):
    if rho1.axis.shape != rho2.axis.shape or not np.array_equal(rho1.axis, rho2.axis):
        raise GridMismatchError("photon states live on different frequency axes")


def trace_product(rho1: SingleModePhotonState, rho2: SingleModePhotonState) -> float:
    """``Tr[rho1 rho2]`` from ensemble pairwise overlaps."""
    _check_pair(rho1, rho2)
    overlaps = (rho1.amplitudes.conj() @ rho2.amplitudes.T) * rho1.spacing
    value = float(rho1.weights @ (np.abs(overlaps) ** 2) @ rho2.weights)
    return min(max(value, 0.0), 1.0)  # round-off can step past the bounds


@dataclass(frozen=True)
class HwpSetting:
    angle: float  # radians, fast axis

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise DomainError("HWP angle must be finite")
        object.__setattr__(self, "angle", math.fmod(self.angle, math.pi) % math.pi)

    @classmethod
    def degrees(cls, angle_deg: float) -> "HwpSetting":
        return cls(math.radians(angle_deg))


def hwp_matrix(angle: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at ``angle``."""
    c, s = math.cos(2.0 * angle), math.sin(2.0 * angle)
    return np.array([[c, s], [s, -c]])


def _split_weights(angle: float):
    m = hwp_matrix(angle)
    return m[0, 0] ** 2, m[0, 1] ** 2  # cos^2 2t, sin^2 2t


def _orthogonal_coincidence(angle: float, overlap_sq: float) -> float:
    # photon 1 in H, photon 2 in V: amplitudes -c^2 |H1 V2> + s^2 |V1 H2>
    c2, s2 = _split_weights(angle)
    return c2 * c2 + s2 * s2 - 2.0 * c2 * s2 * overlap_sq


def _parallel_coincidence(angle: float) -> float:
    # both photons in one polarization: c s (|H1 V2> + |V1 H2>) / sqrt(1 + |o|^2)
    c2, s2 = _split_weights(angle)
    return 2.0 * c2 * s2


def hom_coincidence_probability(rho1: SingleModePhotonState, rho2: SingleModePhotonState,
                                hwp: HwpSetting) -> float:
    """Probability of one photon in each PBS port (``rho1`` in H, ``rho2`` in V)."""
    return _orthogonal_coincidence(hwp.angle, trace_product(rho1, rho2))


def visibility_pol(n_max: float, n_min: float) -> float:
    if not n_max > 0:
        raise DomainError("n_max must be positive")
    if n_min < 0 or n_min > n_max:
        raise DomainError("need 0 <= n_min <= n_max")
    return (n_max / 2.0 - n_min) / (n_max / 2.0)


def hom_visibility_from_states(rho1: SingleModePhotonState, rho2: SingleModePhotonState) -> float:
    return trace_product(rho1, rho2)


def _flip_probability(R: float, passes: int) -> float:
    return 1.0 - (1.0 - R) ** passes


def reflected_coincidence_probability(rho1: SingleModePhotonState, rho2: SingleModePhotonState,
                                      angle: float, flip: Tuple[float, float] = (0.0, 0.0)) -> float:
    """Coincidence probability when idler ``k`` is flipped with probability ``flip[k]``.

    A single flip leaves both photons in the same polarization and in
    distinguishable time bins; a double flip restores orthogonal
    polarizations with both photons delayed together.
    """
    q1, q2 = flip
    ov = trace_product(rho1, rho2)
    orth = _orthogonal_coincidence(angle, ov)
    par = _parallel_coincidence(angle)
    return ((1 - q1) * (1 - q2) + q1 * q2) * orth + ((1 - q1) * q2 + q1 * (1 - q2)) * par


def hom_scan(rho1, rho2, angles, refl: FacetReflection = None,
             passes: int = FACET_PASSES_PER_HERALDED_IDLER) -> np.ndarray:
    refl = refl or FacetReflection(0.0)
    flip = (_flip_probability(refl.idler, passes), _flip_probability(refl.idler, passes))
    return np.array([reflected_coincidence_probability(rho1, rho2, a, flip) for a in np.asarray(angles, float)])


def simulate_hom_with_reflections(jsa: JointSpectralAmplitude, refl: FacetReflection,
                                  passes: int = FACET_PASSES_PER_HERALDED_IDLER) -> float:
    """Polarization-HOM visibility of two heralded idlers with facet reflections.

    Both idlers share the JSA's heralded marginal.  The fringe extremes at
    0 and 22.5 deg are mapped through :func:`visibility_pol`; without
    reflections this equals ``Tr[rho1 rho2]``.
    """
    idler = heralded_idler_state(jsa)
    p_max, p_min = hom_scan(idler, idler, [0.0, math.pi / 8.0], refl, passes)
    return visibility_pol(p_max, p_min)
