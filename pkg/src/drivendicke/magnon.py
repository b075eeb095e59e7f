"""Large-N limit: the collective spin as a Holstein-Primakoff boson ("magnon").

To zeroth order in b^dag b / 2j,

    H_b = omega_r a^dag a + [Delta + 2 Omega_d cos(omega_d t) + 8 g^2 j/omega_r] b^dag b
          - (4 g^2/omega_r)(b^dag b)^2 + eps_j [D(alpha) b^dag + D(-alpha) b],

with eps_j = (eps/2) sqrt(2j) and a constant energy dropped. The magnon ladder
has the same gaps as the Dicke ladder with k -> m, N/2 -> j.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import MAGNON_FOCK, DriveSegment, StateVector, SystemParams, flat_index
from .hamiltonian import displacement_matrix, sideband_factor
from .sidebands import ResonanceError, bessel_j

HP_BOUND = 0.05


class HPValidityWarning(UserWarning):
    """The magnon occupation is no longer small compared with 2j."""


@dataclass(frozen=True)
class MagnonParams:
    base: SystemParams
    magnon_cutoff: int = 12

    basis = MAGNON_FOCK

    def __post_init__(self):
        if int(self.magnon_cutoff) != self.magnon_cutoff or self.magnon_cutoff < 1:
            raise ValueError(f"magnon_cutoff must be an integer >= 1, got {self.magnon_cutoff}")

    @property
    def j(self) -> float:
        return self.base.n_qubits / 2

    @property
    def epsilon_j(self) -> float:
        return 0.5 * self.base.epsilon * np.sqrt(2 * self.j)

    @property
    def n_levels(self) -> int:
        return self.magnon_cutoff + 1

    @property
    def n_fock(self) -> int:
        return self.base.n_fock

    @property
    def dim(self) -> int:
        return self.n_levels * self.n_fock

    @property
    def alpha(self) -> float:
        return self.base.alpha

    @property
    def kerr(self) -> float:
        return self.base.kerr

    @property
    def omega_r(self) -> float:
        return self.base.omega_r

    def replace(self, **changes) -> "MagnonParams":
        base_keys = {k: changes.pop(k) for k in list(changes) if k != "magnon_cutoff"}
        base = self.base.replace(**base_keys) if base_keys else self.base
        return MagnonParams(base, changes.get("magnon_cutoff", self.magnon_cutoff))


def _check_m(mp, m, top):
    if int(m) != m or not 0 <= m <= top:
        raise ValueError(f"magnon number {m} out of range 0..{top}")


def magnon_spectrum(mp: MagnonParams, n: int, m: int) -> float:
    """Delta (m - j) - (4g^2/omega_r)(m - j)^2 + n omega_r."""
    _check_m(mp, m, mp.magnon_cutoff)
    if int(n) != n or not 0 <= n <= mp.base.fock_cutoff:
        raise ValueError(f"Fock number {n} out of range 0..{mp.base.fock_cutoff}")
    x = m - mp.j
    return mp.base.delta * x - mp.kerr * x**2 + n * mp.omega_r


def magnon_gap(mp: MagnonParams, m: int) -> float:
    """Delta_m = Delta + (4g^2/omega_r)(2j - 2m - 1)."""
    _check_m(mp, m, mp.magnon_cutoff - 1)
    return mp.base.delta + mp.kerr * (2 * mp.j - 2 * m - 1)


def magnon_diagonals(mp: MagnonParams) -> tuple[np.ndarray, np.ndarray]:
    """(static diagonal, drive diagonal) of H_b on the flat magnon x Fock basis."""
    m = np.arange(mp.n_levels, dtype=float)
    n = np.arange(mp.n_fock) * mp.omega_r
    linear = mp.base.delta + 2 * mp.kerr * mp.j  # 8 g^2 j / omega_r
    e_m = linear * m - mp.kerr * m**2
    static = (e_m[:, None] + n[None, :]).reshape(-1)
    return static, np.repeat(m, mp.n_fock)


def magnon_coupling(mp: MagnonParams) -> np.ndarray:
    """eps_j [D(alpha) b^dag + D(-alpha) b]."""
    bdag = np.diag(np.sqrt(np.arange(1, mp.n_levels, dtype=float)), -1)
    d = displacement_matrix(mp.alpha, 0.0, mp.base).matrix
    up = mp.epsilon_j * np.kron(bdag, d)
    return up + up.conj().T


def build_magnon_hamiltonian(mp: MagnonParams, drive: DriveSegment | None, t: float) -> np.ndarray:
    static, num = magnon_diagonals(mp)
    diag = static + (drive.amplitude(t) * num if drive is not None else 0.0)
    return np.diag(diag).astype(complex) + magnon_coupling(mp)


def magnon_rabi(mp: MagnonParams, eta_d: float, m: int, n: int, l: int, s: int) -> float:
    """eps_j J_l(eta_d) sqrt(m+1) <n+s|D(alpha)|n>."""
    _check_m(mp, m, mp.magnon_cutoff - 1)
    if int(n) != n or n < 0 or int(s) != s or s < 0:
        raise ValueError("n and s must be non-negative integers")
    return mp.epsilon_j * bessel_j(l, eta_d) * np.sqrt(m + 1.0) * sideband_factor(mp.alpha, n, s)


def magnon_resonance(mp: MagnonParams, m0: int, l0: int = -1) -> float:
    """Carrier drive frequency -Delta_m0 / l0."""
    if l0 == 0:
        raise ResonanceError("l0 = 0 gives no drive-selected resonance")
    w = -magnon_gap(mp, m0) / l0
    if not w > 0:
        raise ResonanceError(f"carrier resonance for m0={m0}, l0={l0} needs omega_d = {w:.6g} <= 0")
    return w


def build_magnon_effective(mp: MagnonParams, m0: int, n0: int, l0: int, eta_d: float,
                           phase: float = 0.0) -> np.ndarray:
    """Resonant carrier |m0+1, n0><m0, n0| + h.c. weighted by the magnon Rabi frequency."""
    magnon_resonance(mp, m0, l0)
    if not 0 <= n0 < mp.n_fock:
        raise ValueError(f"n0 = {n0} outside the Fock basis")
    om = magnon_rabi(mp, eta_d, m0, n0, l0, 0) * np.exp(1j * phase)
    h = np.zeros((mp.dim, mp.dim), dtype=complex)
    i, f = flat_index(m0, n0, mp.n_fock), flat_index(m0 + 1, n0, mp.n_fock)
    h[f, i] = om
    h[i, f] = np.conj(om)
    return h


def hp_validity(state: StateVector, mp: MagnonParams, bound: float = HP_BOUND) -> float:
    """<b^dag b> / 2j, warning when it exceeds ``bound``."""
    if state.basis != MAGNON_FOCK:
        raise ValueError(f"expected a magnon-basis state, got {state.basis!r}")
    occ = float(np.dot(np.arange(state.n_levels), state.level_populations())) / (2 * mp.j)
    if occ > bound:
        warnings.warn(f"<b^dag b>/2j = {occ:.3g} exceeds {bound}", HPValidityWarning, stacklevel=2)
    return occ
