"""Pure bipartite states and LOCC conversion through an entanglement storage.

LOCC convertibility of pure states is decided by the squared Schmidt
coefficients, so every quantity here reduces to the classical majorization
engine applied to those spectra.  A storage of ``N`` qubit pairs has
Schmidt rank ``2**N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .asymptotics import profile, second_order_fidelity_inverse
from .errors import ConvergenceError, DomainError, NormError, UniformError
from .majorization import (Distribution, Mode, iid_power, max_convertible_number,
                           max_fidelity_majorization_with_storage)

NORM_TOL = 1e-8
JACOBI_TOL = 1e-12
ZERO_EIG = 1e-15


def _hermitian_jacobi(g: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations."""
    a = np.array(g, dtype=complex)
    n = a.shape[0]
    scale = max(1.0, float(np.abs(a).max()))
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.abs(a[off_mask]) ** 2)))
        if off <= tol * scale:
            return np.real(np.diag(a)).copy()
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                # phase rotation makes a[p, q] real, then a real Jacobi rotation zeroes it
                phase = apq / abs(apq)
                app, aqq = a[p, p].real, a[q, q].real
                theta = 0.5 * math.atan2(2.0 * abs(apq), aqq - app)
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(n, dtype=complex)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s * phase
                rot[q, p] = -s * np.conj(phase)
                a = rot.conj().T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    raise ConvergenceError("Jacobi sweeps did not converge")


def schmidt_squared(amplitudes) -> Distribution:
    """Squared Schmidt coefficients of a pure state given by its amplitude matrix."""
    m = np.atleast_2d(np.asarray(amplitudes, dtype=complex))
    norm = float(np.sum(np.abs(m) ** 2))
    if abs(norm - 1.0) > NORM_TOL:
        raise NormError(f"amplitudes have squared norm {norm}, expected 1")
    eig = _hermitian_jacobi(m @ m.conj().T)
    eig = np.sort(eig[eig > ZERO_EIG])[::-1]
    return Distribution.from_probs(eig / eig.sum())


@dataclass(frozen=True)
class PureState:
    """Bipartite pure state as an amplitude matrix, a Schmidt spectrum, or both."""

    amplitudes: Optional[np.ndarray] = None
    schmidt_sq: Optional[Distribution] = None

    def __post_init__(self):
        if self.amplitudes is None and self.schmidt_sq is None:
            raise DomainError("a pure state needs amplitudes or a Schmidt spectrum")
        if self.amplitudes is not None:
            amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
            object.__setattr__(self, "amplitudes", amps)
            spectrum = schmidt_squared(amps)
            if self.schmidt_sq is None:
                object.__setattr__(self, "schmidt_sq", spectrum)
            else:
                given, derived = self.schmidt_sq.dense(), spectrum.dense()
                size = max(len(given), len(derived))
                given = np.pad(given, (0, size - len(given)))
                derived = np.pad(derived, (0, size - len(derived)))
                if np.max(np.abs(given - derived)) > 1e-8:
                    raise DomainError("amplitudes and Schmidt spectrum disagree")

    @classmethod
    def from_json(cls, obj: dict) -> "PureState":
        """Parse ``{"amplitudes": [[[re, im], ...], ...]}`` or ``{"schmidt_sq": [...]}``."""
        if "amplitudes" in obj:
            amps = np.array([[complex(re, im) for re, im in row] for row in obj["amplitudes"]])
            return cls(amplitudes=amps)
        if "schmidt_sq" in obj:
            return cls(schmidt_sq=Distribution.from_probs(obj["schmidt_sq"]))
        raise DomainError("state JSON needs an 'amplitudes' or 'schmidt_sq' key")

    @property
    def spectrum(self) -> Distribution:
        return self.schmidt_sq


def locc_fidelity_via_storage(psi: PureState, phi: PureState,
                              n_qubit_pairs: Optional[float]) -> float:
    """Best LOCC fidelity for ``psi -> phi`` through ``n_qubit_pairs`` of storage."""
    return max_fidelity_majorization_with_storage(psi.spectrum, phi.spectrum, n_qubit_pairs).fidelity


def locc_max_recovery(psi: PureState, phi: PureState, nu: float, n: int,
                      n_qubit_pairs: Optional[float]) -> int:
    """Most copies of ``phi`` obtainable from ``psi**n`` with fidelity ``nu``."""
    return max_convertible_number(iid_power(psi.spectrum, n), phi.spectrum, nu,
                                  n_bits=n_qubit_pairs, mode=Mode.MAJORIZATION)


def compression_loss(psi: PureState, nu: float, s2: float, n: int) -> float:
    """Predicted ``n - L_n(psi, psi)`` for storage ``S(psi) n + s2 sqrt(n)`` qubit pairs.

    Positive values are copies necessarily lost; negative values mean more
    copies come out than went in.
    """
    p = psi.spectrum
    if p.is_uniform:
        raise UniformError("compression loss undefined for a maximally entangled state")
    prof = profile(p, p)
    return -second_order_fidelity_inverse(prof, prof.H_p, s2, nu) * math.sqrt(n)
