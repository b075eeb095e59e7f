"""Parameters, drive schedules, the truncated Dicke x Fock basis and state vectors.

All frequencies are stored in units of the resonator frequency (``omega_r = 1``)
and times in units of ``1/omega_r``. SI values only appear at I/O boundaries via
:meth:`SystemParams.to_seconds` and friends.

Basis ordering is Dicke (or magnon) level slowest, Fock level fastest::

    flat = k * (n_max + 1) + n
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_OMEGA_R_SI = 2 * math.pi * 2.2e9  # rad/s
DEFAULT_DELTA_SI = 2 * math.pi * 5.4e9  # rad/s

DICKE_FOCK = "dicke-fock"
MAGNON_FOCK = "magnon-fock"
TRANSFORMED = "transformed"
INTERACTION = "interaction"


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the driven biased Dicke model.

    ``epsilon``, ``delta`` and ``g`` are angular frequencies expressed in the
    same unit as ``omega_r``. With the default ``omega_r = 1`` that unit is the
    resonator frequency itself; ``omega_r_si`` converts back to rad/s.
    """

    epsilon: float
    delta: float
    g: float
    n_qubits: int
    fock_cutoff: int = 15
    omega_r: float = 1.0
    omega_r_si: float = DEFAULT_OMEGA_R_SI
    unit_mode: str = "natural"

    def __post_init__(self):
        if not self.omega_r > 0:
            raise ValueError(f"omega_r must be positive, got {self.omega_r}")
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError(f"n_qubits must be a positive integer, got {self.n_qubits}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be an integer >= 1, got {self.fock_cutoff}")
        for name in ("epsilon", "delta", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.unit_mode not in ("natural", "si"):
            raise ValueError(f"unknown unit_mode {self.unit_mode!r}")
        if not self.omega_r_si > 0:
            raise ValueError("omega_r_si must be positive")

    @property
    def alpha(self) -> float:
        return 2 * self.g / self.omega_r

    @property
    def kerr(self) -> float:
        """Coefficient ``4 g^2 / omega_r`` of the ``-Jz^2`` nonlinearity."""
        return 4 * self.g**2 / self.omega_r

    @property
    def n_levels(self) -> int:
        return self.n_qubits + 1

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.n_levels * self.n_fock

    @classmethod
    def standard(cls, n_qubits: int, g: float = 0.24, fock_cutoff: int = 15, **kw) -> "SystemParams":
        """Parameter set used throughout the numerics: eps = 0.01, Delta = 2pi 5.4 GHz,
        omega_r = 2pi 2.2 GHz, with ``g`` in units of omega_r."""
        return cls(
            epsilon=0.01,
            delta=DEFAULT_DELTA_SI / DEFAULT_OMEGA_R_SI,
            g=g,
            n_qubits=n_qubits,
            fock_cutoff=fock_cutoff,
            **kw,
        )

    @classmethod
    def from_si(cls, omega_r, epsilon, delta, g, n_qubits, fock_cutoff=15, unit_mode="si"):
        """Build from angular frequencies in rad/s, rescaling to omega_r = 1."""
        if not omega_r > 0:
            raise ValueError("omega_r must be positive")
        return cls(
            epsilon=epsilon / omega_r,
            delta=delta / omega_r,
            g=g / omega_r,
            n_qubits=n_qubits,
            fock_cutoff=fock_cutoff,
            omega_r=1.0,
            omega_r_si=omega_r,
            unit_mode=unit_mode,
        )

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace

        return replace(self, **changes)

    # unit conversion, natural -> SI
    def to_seconds(self, t):
        return np.asarray(t) * self.omega_r / self.omega_r_si

    def to_rad_per_s(self, w):
        return np.asarray(w) / self.omega_r * self.omega_r_si

    def from_seconds(self, t_si):
        return np.asarray(t_si) * self.omega_r_si / self.omega_r

    def from_rad_per_s(self, w_si):
        return np.asarray(w_si) * self.omega_r / self.omega_r_si


@dataclass(frozen=True)
class DriveSegment:
    """Constant drive ``2 Omega_d cos(omega_d t)`` held for ``duration``."""

    omega_d: float
    Omega_d: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        if self.omega_d < 0 or self.Omega_d < 0:
            raise ValueError("drive frequency and amplitude must be non-negative")

    @property
    def eta_d(self) -> float:
        if self.omega_d == 0:
            if self.Omega_d == 0:
                return 0.0
            raise ValueError("eta_d undefined for a static (omega_d = 0) drive")
        return 2 * self.Omega_d / self.omega_d

    @classmethod
    def from_eta(cls, omega_d: float, eta_d: float, duration: float) -> "DriveSegment":
        return cls(omega_d=omega_d, Omega_d=eta_d * omega_d / 2, duration=duration)

    def amplitude(self, t):
        """Instantaneous drive ``2 Omega_d cos(omega_d t)`` at absolute time ``t``."""
        return 2 * self.Omega_d * np.cos(self.omega_d * t)


class DriveSchedule:
    """Ordered piecewise-constant drive segments starting at t = 0.

    Within each segment the drive uses absolute time, ``2 Omega_d cos(omega_d t)``.
    :meth:`drive_phase` is the exact integral of the drive over the history, which
    is what the rotating frame needs.
    """

    def __init__(self, segments: Iterable[DriveSegment]):
        segs = tuple(segments)
        if not segs:
            raise ValueError("a drive schedule needs at least one segment")
        bounds = np.concatenate([[0.0], np.cumsum([s.duration for s in segs])])
        if np.any(np.diff(bounds) <= 0):
            raise ValueError("segment boundaries must be strictly increasing")
        bounds.setflags(write=False)
        self.segments: tuple[DriveSegment, ...] = segs
        self.boundaries = bounds
        # phase(t) = offset_i + segment_phase(i, t) on segment i, continuous at boundaries
        offsets = np.zeros(len(segs))
        acc = 0.0
        for i, seg in enumerate(segs):
            t0, t1 = bounds[i], bounds[i + 1]
            offsets[i] = acc - self._raw_phase(seg, t0)
            acc = offsets[i] + self._raw_phase(seg, t1)
        self._offsets = offsets

    def __repr__(self):
        return f"DriveSchedule({list(self.segments)!r})"

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    @property
    def total_time(self) -> float:
        return float(self.boundaries[-1])

    def segment_index(self, t: float) -> int:
        """Index of the segment containing ``t`` (boundaries belong to the earlier segment)."""
        if t < 0 or t > self.boundaries[-1] * (1 + 1e-14):
            raise ValueError(f"time {t} outside schedule [0, {self.total_time}]")
        i = int(np.searchsorted(self.boundaries, t, side="left")) - 1
        return min(max(i, 0), len(self.segments) - 1)

    @staticmethod
    def _raw_phase(seg: DriveSegment, t: float) -> float:
        if seg.omega_d == 0:
            return 2 * seg.Omega_d * t
        return seg.eta_d * math.sin(seg.omega_d * t)

    def phase_offset(self, i: int) -> float:
        """Constant by which the accumulated phase differs from ``eta_d sin(omega_d t)`` on segment i."""
        return float(self._offsets[i])

    def drive_phase(self, t: float, index: int | None = None) -> float:
        """Accumulated drive phase ``int_0^t 2 Omega_d(t') cos(omega_d(t') t') dt'``."""
        i = self.segment_index(t) if index is None else index
        return float(self._offsets[i] + self._raw_phase(self.segments[i], t))


def flat_index(k: int, n: int, n_fock: int) -> int:
    return k * n_fock + n


def unflatten(index: int, n_fock: int) -> tuple[int, int]:
    return divmod(index, n_fock)


def collective_operators(N: int):
    """Jz, J+ and J- on the symmetric (j = N/2) Dicke sector, indexed by excitation k."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    k = np.arange(N + 1)
    jz = np.diag(k - N / 2).astype(float)
    h = np.sqrt((k[:-1] + 1.0) * (N - k[:-1]))
    jplus = np.diag(h, -1)
    jminus = jplus.conj().T.copy()
    return jz, jplus, jminus


def raising_amplitude(N: int, k):
    """h(k) = sqrt((k+1)(N-k)), the <k+1|J+|k> matrix element."""
    k = np.asarray(k)
    return np.sqrt((k + 1.0) * (N - k))


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitudes over a (levels x Fock) product basis."""

    amplitudes: np.ndarray
    n_levels: int
    n_fock: int
    basis: str = DICKE_FOCK
    frame: str = TRANSFORMED

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.n_levels * self.n_fock:
            raise ValueError(
                f"expected {self.n_levels * self.n_fock} amplitudes, got {amps.size}"
            )
        if self.basis not in (DICKE_FOCK, MAGNON_FOCK):
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.frame not in (TRANSFORMED, INTERACTION):
            raise ValueError(f"unknown frame {self.frame!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def index(self, k: int, n: int) -> int:
        if not (0 <= k < self.n_levels and 0 <= n < self.n_fock):
            raise IndexError(f"label ({k}, {n}) outside basis")
        return flat_index(k, n, self.n_fock)

    def amplitude(self, k: int, n: int) -> complex:
        return complex(self.amplitudes[self.index(k, n)])

    def population(self, k: int, n: int) -> float:
        return abs(self.amplitude(k, n)) ** 2

    def level_populations(self) -> np.ndarray:
        """Populations summed over the Fock index, one per Dicke/magnon level."""
        return (np.abs(self.amplitudes.reshape(self.n_levels, self.n_fock)) ** 2).sum(axis=1)

    def with_amplitudes(self, amplitudes, frame: str | None = None) -> "StateVector":
        return StateVector(amplitudes, self.n_levels, self.n_fock, self.basis, frame or self.frame)


def _check_label(k, n, n_levels, n_fock):
    if int(k) != k or not 0 <= k < n_levels:
        raise ValueError(f"level index {k} out of range 0..{n_levels - 1}")
    if int(n) != n or not 0 <= n < n_fock:
        raise ValueError(f"Fock index {n} out of range 0..{n_fock - 1}")


def _dims(params) -> tuple[int, int, str]:
    # MagnonParams exposes the same trio
    return params.n_levels, params.n_fock, getattr(params, "basis", DICKE_FOCK)


def basis_state(k: int, n: int, params, frame: str = TRANSFORMED) -> StateVector:
    """|W_N^k> (x) |n>, or |m>_2 (x) |n>_1 for magnon parameters."""
    n_levels, n_fock, basis = _dims(params)
    _check_label(k, n, n_levels, n_fock)
    amps = np.zeros(n_levels * n_fock, dtype=complex)
    amps[flat_index(k, n, n_fock)] = 1.0
    return StateVector(amps, n_levels, n_fock, basis, frame)


def superposition_state(
    terms: Sequence[tuple[int, int, complex]], params, frame: str = TRANSFORMED
) -> StateVector:
    """Normalized sum of weighted basis states; relative phases are kept as given."""
    n_levels, n_fock, basis = _dims(params)
    amps = np.zeros(n_levels * n_fock, dtype=complex)
    for k, n, w in terms:
        _check_label(k, n, n_levels, n_fock)
        amps[flat_index(k, n, n_fock)] += w
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ValueError("superposition weights are all zero")
    return StateVector(amps / norm, n_levels, n_fock, basis, frame)
