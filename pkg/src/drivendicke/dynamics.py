"""Time evolution under piecewise drive schedules, and the observables built on it.

Generators of the form

    H(t) = diag(E) + 2 Omega_d cos(omega_d t) diag(z) + V_i      (segment i)

are integrated in the rotating frame of their diagonal part, which is exact:
with theta(t) = E t + Phi(t) z and Phi the accumulated drive phase,
y = e^{i theta} psi obeys dy/dt = -i e^{i theta} V_i e^{-i theta} y. The
slowly varying y lets the adaptive stepper take far longer steps than it could
on psi. Generic callables H(t) are integrated directly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit

from .core import (
    INTERACTION,
    TRANSFORMED,
    DriveSchedule,
    DriveSegment,
    StateVector,
    SystemParams,
)
from .hamiltonian import drive_diagonal, hermiticity_residual, static_diagonal, transformed_coupling
from .sidebands import EffectiveChoice, build_effective_hamiltonian, resonance_frequency

HERMITIAN_TOL = 1e-12


class IntegrationError(RuntimeError):
    """The ODE solver failed or produced non-finite amplitudes."""


@dataclass(frozen=True)
class Generator:
    """Diagonal-plus-coupling Hamiltonian.

    ``couplings`` is either one matrix used on every segment or a sequence with
    one matrix per schedule segment.
    """

    static_diag: np.ndarray
    drive_diag: np.ndarray
    couplings: np.ndarray | tuple
    frame: str = TRANSFORMED

    def coupling(self, index: int) -> np.ndarray:
        if isinstance(self.couplings, np.ndarray):
            return self.couplings
        return self.couplings[index]

    @property
    def dim(self) -> int:
        return self.static_diag.size

    def matrix(self, t: float, segment: DriveSegment, index: int = 0) -> np.ndarray:
        diag = self.static_diag + segment.amplitude(t) * self.drive_diag
        return np.diag(diag).astype(complex) + self.coupling(index)

    def phase(self, t: float, schedule: DriveSchedule, index: int | None = None) -> np.ndarray:
        """theta(t) = int_0^t diag H(t') dt'."""
        return self.static_diag * t + schedule.drive_phase(t, index) * self.drive_diag


def transformed_generator(params: SystemParams) -> Generator:
    """The full displaced-frame Hamiltonian H'(t)."""
    return Generator(static_diagonal(params), drive_diagonal(params), transformed_coupling(params))


def effective_generator(params: SystemParams, schedule: DriveSchedule,
                        choices: Sequence[EffectiveChoice]) -> Generator:
    """Piecewise resonant two-level Hamiltonians, one per segment, in the interaction picture.

    Each segment's coupling carries the drive-phase offset accumulated before it,
    so the effective and full evolutions share one rotating frame.
    """
    if len(choices) != len(schedule):
        raise ValueError("need one EffectiveChoice per schedule segment")
    couplings = tuple(
        build_effective_hamiltonian(params, seg, ch, phase=schedule.phase_offset(i))
        for i, (seg, ch) in enumerate(zip(schedule, choices))
    )
    zero = np.zeros(params.dim)
    return Generator(zero, zero, couplings, frame=INTERACTION)


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray  # (len(times), dim)
    populations: dict
    norms: np.ndarray
    norm_drift: float
    final_state: StateVector
    frame: str
    nfev: int = 0
    rel_tol: float = 1e-9
    meta: dict = field(default_factory=dict)

    def state_at(self, i: int) -> StateVector:
        return self.final_state.with_amplitudes(self.states[i])

    def population(self, k: int, n: int) -> np.ndarray:
        if (k, n) not in self.populations:
            raise KeyError(f"label ({k}, {n}) was not tracked")
        return self.populations[(k, n)]

    def to_csv(self, path, digits: int = 12):
        labels = list(self.populations)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"P_{k}_{n}" for k, n in labels] + ["norm"])
            for i, t in enumerate(self.times):
                row = [t] + [self.populations[lab][i] for lab in labels] + [self.norms[i]]
                w.writerow([f"{v:.{digits}g}" for v in row])

    def summary(self) -> dict:
        return {
            "frame": self.frame,
            "t_final": float(self.times[-1]),
            "norm_drift": float(self.norm_drift),
            "nfev": int(self.nfev),
            "rel_tol": self.rel_tol,
            "final_populations": {
                f"{k},{n}": float(p[-1]) for (k, n), p in self.populations.items()
            },
        }


def _sample_grid(t0, t1, count):
    return np.linspace(t0, t1, count + 1)[1:]


def _check_psi0(psi0: StateVector, dim: int):
    if psi0.dim != dim:
        raise ValueError(f"initial state has dimension {psi0.dim}, generator {dim}")
    if abs(psi0.norm - 1) > 1e-9:
        raise ValueError(f"initial state is not normalized (norm = {psi0.norm!r})")


def evolve(generator, schedule: DriveSchedule, psi0: StateVector, sample_count: int = 100,
           rel_tol: float = 1e-9, track: Sequence[tuple[int, int]] | None = None,
           method: str = "DOP853") -> EvolutionResult:
    """Solve i dpsi/dt = H(t) psi over the whole schedule.

    ``generator`` is a :class:`Generator` or any callable ``H(t, index, segment)``
    returning a dense Hermitian matrix. Each segment is integrated separately
    so no step straddles a parameter switch; ``sample_count`` uniform samples
    are returned per segment. The state is never renormalized.
    """
    if not 1e-14 < rel_tol < 1e-3:
        raise ValueError(f"rel_tol must lie in (1e-14, 1e-3), got {rel_tol}")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    split = isinstance(generator, Generator)
    dim = generator.dim if split else psi0.dim
    _check_psi0(psi0, dim)
    atol = rel_tol * 1e-3

    for i, seg in enumerate(schedule):
        h = generator.coupling(i) if split else generator(schedule.boundaries[i], i, seg)
        if h.shape != (dim, dim):
            raise ValueError(f"generator has shape {h.shape}, state dimension {dim}")
        if hermiticity_residual(h) > HERMITIAN_TOL:
            raise ValueError(f"generator is not Hermitian on segment {i}")

    times = [0.0]
    states = [np.array(psi0.amplitudes)]
    psi = np.array(psi0.amplitudes)
    nfev = 0
    for i, seg in enumerate(schedule):
        t0, t1 = schedule.boundaries[i], schedule.boundaries[i + 1]
        grid = _sample_grid(t0, t1, sample_count)
        if split:
            v = generator.coupling(i)
            ed, zd = generator.static_diag, generator.drive_diag
            off = schedule.phase_offset(i)
            w, eta = seg.omega_d, (seg.eta_d if seg.omega_d else 0.0)
            static_drive = 2 * seg.Omega_d if seg.omega_d == 0 else 0.0

            def theta(t, ed=ed, zd=zd, off=off, w=w, eta=eta, sd=static_drive):
                ph = off + (eta * math.sin(w * t) if w else sd * t)
                return ed * t + ph * zd

            def rhs(t, y, v=v, theta=theta):
                p = np.exp(1j * theta(t))
                return -1j * p * (v @ (y / p))

            y0 = np.exp(1j * theta(t0)) * psi
        else:
            def rhs(t, y, i=i, seg=seg):
                return -1j * (generator(t, i, seg) @ y)

            y0 = psi
        sol = solve_ivp(rhs, (t0, t1), y0, method=method, t_eval=grid, rtol=rel_tol, atol=atol)
        if not sol.success or not np.all(np.isfinite(sol.y)):
            raise IntegrationError(f"integration failed on segment {i}: {sol.message}")
        nfev += sol.nfev
        ys = sol.y.T
        if split:
            ys = np.array([np.exp(-1j * theta(t)) * y for t, y in zip(sol.t, ys)])
        times.extend(sol.t)
        states.extend(ys)
        psi = ys[-1]

    times = np.asarray(times)
    states = np.asarray(states)
    norms = np.linalg.norm(states, axis=1)
    final = psi0.with_amplitudes(psi, frame=getattr(generator, "frame", TRANSFORMED))
    if track is None:
        track = [(k, n) for k in range(psi0.n_levels) for n in range(min(psi0.n_fock, 1))]
    pops = {}
    for k, n in track:
        pops[(k, n)] = np.abs(states[:, psi0.index(k, n)]) ** 2
    return EvolutionResult(
        times=times,
        states=states,
        populations=pops,
        norms=norms,
        norm_drift=float(np.max(np.abs(norms - 1))),
        final_state=final,
        frame=final.frame,
        nfev=nfev,
        rel_tol=rel_tol,
    )


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    if a.dim != b.dim or a.basis != b.basis:
        raise ValueError("states live in different bases")
    return float(min(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2, 1.0))


def diagonal_terms(params):
    """(static diagonal, drive diagonal) of the unperturbed Hamiltonian for either model."""
    if hasattr(params, "magnon_cutoff"):
        from .magnon import magnon_diagonals

        return magnon_diagonals(params)
    return static_diagonal(params), drive_diagonal(params)


def interaction_phases(params, schedule: DriveSchedule, t: float) -> np.ndarray:
    ed, zd = diagonal_terms(params)
    return ed * t + schedule.drive_phase(t) * zd


def to_interaction_picture(state: StateVector, params, drive_history: DriveSchedule, t: float) -> StateVector:
    """Apply U_0(t)^dag, the inverse of the free evolution under the diagonal part."""
    if state.frame != TRANSFORMED:
        raise ValueError(f"expected a transformed-frame state, got frame {state.frame!r}")
    ph = interaction_phases(params, drive_history, t)
    return state.with_amplitudes(np.exp(1j * ph) * state.amplitudes, frame=INTERACTION)


def interaction_states(result: EvolutionResult, params, schedule: DriveSchedule) -> np.ndarray:
    """Every sampled state of a transformed-frame run, mapped to the interaction picture."""
    if result.frame == INTERACTION:
        return result.states
    ph = np.array([interaction_phases(params, schedule, t) for t in result.times])
    return np.exp(1j * ph) * result.states


def inversion(result: EvolutionResult, k_a: int, k_b: int, n: int = 0) -> np.ndarray:
    """Q(t) = P(k_a, n) - P(k_b, n)."""
    return result.population(k_a, n) - result.population(k_b, n)


def fit_rabi_frequency(times, q, guess: float) -> float:
    """Least-squares fit of Q(t) = cos(Omega_R t); returns Omega_R."""
    (om,), _ = curve_fit(lambda t, w: np.cos(w * t), times, q, p0=[guess])
    return float(abs(om))


def run_full_and_effective(params: SystemParams, schedule: DriveSchedule,
                           choices: Sequence[EffectiveChoice], psi0: StateVector,
                           sample_count: int = 50, rel_tol: float = 1e-9, track=None, full=None):
    """Evolve the full displaced-frame Hamiltonian and the effective model on one schedule.

    Returns (full result, effective result, fidelity series) where the full states
    are mapped to the interaction picture before every overlap.
    """
    gen = full if full is not None else transformed_generator(params)
    res_full = evolve(gen, schedule, psi0, sample_count, rel_tol, track)
    psi0_int = psi0.with_amplitudes(psi0.amplitudes, frame=INTERACTION)
    res_eff = evolve(effective_generator(params, schedule, choices), schedule, psi0_int,
                     sample_count, rel_tol, track)
    full_int = interaction_states(res_full, params, schedule)
    fid = np.abs(np.einsum("ij,ij->i", res_eff.states.conj(), full_int)) ** 2
    return res_full, res_eff, np.minimum(fid, 1.0)


def compare_full_vs_effective(params: SystemParams, drive: DriveSegment | float,
                              choice: EffectiveChoice, psi0: StateVector, t_final: float,
                              sample_count: int = 50, rel_tol: float = 1e-9):
    """Fidelity series |<psi_eff(t)|psi_full(t)>|^2 for a single resonant drive.

    ``drive`` is a segment (its duration is replaced by ``t_final``) or an
    eta_d value, in which case the drive sits exactly on the choice's resonance.
    """
    if isinstance(drive, DriveSegment):
        seg = DriveSegment(drive.omega_d, drive.Omega_d, t_final)
    else:
        seg = DriveSegment.from_eta(resonance_frequency(params, choice), float(drive), t_final)
    schedule = DriveSchedule([seg])
    res_full, _, fid = run_full_and_effective(params, schedule, [choice], psi0, sample_count, rel_tol)
    return res_full.times, fid


def summary_json(result: EvolutionResult, extra: dict | None = None) -> str:
    doc = result.summary()
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True, default=float)
