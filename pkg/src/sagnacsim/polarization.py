"""Single-photon polarization kets and two-qubit conventions.

Kets are written in the {H, V} basis, two-qubit objects in the ordered basis
HH, HV, VH, VV with the signal photon first.  Circular states follow
``|R> = (|H> + i|V>)/sqrt(2)``.
"""

import numpy as np

_S = 1.0 / np.sqrt(2.0)

KETS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}

BASIS_LABELS = ("HH", "HV", "VH", "VV")

PSI_MINUS = np.array([0.0, _S, -_S, 0.0], dtype=complex)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


def ket(label_or_vector):
    """Return a normalised-or-not 2-vector from a letter code or array."""
    if isinstance(label_or_vector, str):
        try:
            return KETS[label_or_vector.upper()]
        except KeyError:
            raise ValueError(f"unknown polarization label {label_or_vector!r}") from None
    vec = np.asarray(label_or_vector, dtype=complex).reshape(-1)
    if vec.shape != (2,):
        raise ValueError("a polarization ket has two components")
    return vec


def linear(angle: float) -> np.ndarray:
    """Linear polarization at ``angle`` (radians) from horizontal."""
    return np.array([np.cos(angle), np.sin(angle)], dtype=complex)


def projector(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())
