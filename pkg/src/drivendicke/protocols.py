"""State-preparation recipes compiled into drive schedules, and their simulation.

Every duration is analytic, ``pulse_fraction * pi / (2 |Omega|)`` with Omega
taken from the sideband catalog, so schedules never depend on a previous run.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import jn_zeros

from .core import INTERACTION, DriveSchedule, DriveSegment, StateVector, SystemParams, basis_state, superposition_state
from .dynamics import EvolutionResult, Generator, evolve, fidelity, to_interaction_picture, transformed_generator
from .hamiltonian import gap
from .magnon import (
    HP_BOUND,
    HPValidityWarning,
    MagnonParams,
    build_magnon_effective,
    magnon_coupling,
    magnon_diagonals,
    magnon_rabi,
    magnon_resonance,
)
from .sidebands import (
    CARRIER,
    CollisionError,
    CollisionWarning,
    EffectiveChoice,
    build_effective_hamiltonian,
    describe_collision,
    resonance_frequency,
    rwa_report,
    selected_rabi,
)

ETA_ON = 1.84
FREQUENCY_OFF = 2.90
AMPLITUDE, FREQUENCY = "amplitude", "frequency"


@dataclass(frozen=True)
class ProtocolStep:
    choice: EffectiveChoice
    omega_d: float
    Omega_d: float
    duration: float
    intended_transition: tuple
    pulse_fraction: float = 1.0

    @property
    def segment(self) -> DriveSegment:
        return DriveSegment(self.omega_d, self.Omega_d, self.duration)

    def to_dict(self) -> dict:
        c = self.choice
        return {
            "choice": {"kind": c.kind, "k0": c.k0, "n0": c.n0, "l0": c.l0, "s0": c.s0},
            "omega_d": self.omega_d,
            "Omega_d": self.Omega_d,
            "duration": self.duration,
            "intended_transition": [list(x) for x in self.intended_transition],
            "pulse_fraction": self.pulse_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolStep":
        return cls(
            choice=EffectiveChoice(**d["choice"]),
            omega_d=float(d["omega_d"]),
            Omega_d=float(d["Omega_d"]),
            duration=float(d["duration"]),
            intended_transition=tuple(tuple(x) for x in d["intended_transition"]),
            pulse_fraction=float(d.get("pulse_fraction", 1.0)),
        )


def _step(choice: EffectiveChoice, omega_d: float, rabi: float, eta_d: float, fraction: float) -> ProtocolStep:
    if rabi == 0:
        raise ValueError(f"transition {choice.transition} has zero coupling at eta_d = {eta_d}")
    return ProtocolStep(
        choice=choice,
        omega_d=omega_d,
        Omega_d=eta_d * omega_d / 2,
        duration=fraction * math.pi / (2 * abs(rabi)),
        intended_transition=choice.transition,
        pulse_fraction=fraction,
    )


def carrier_step(params: SystemParams, k0: int, eta_d: float = ETA_ON, fraction: float = 1.0) -> ProtocolStep:
    """Resonant carrier pulse |k0, 0> -> |k0+1, 0> through l0 = -1."""
    choice = EffectiveChoice(CARRIER, k0)
    return _step(choice, resonance_frequency(params, choice), selected_rabi(params, eta_d, choice), eta_d, fraction)


def _populated_ladder(step: ProtocolStep):
    return set(step.intended_transition)


def _populated_ghz(step: ProtocolStep):
    return set(step.intended_transition) | {(0, 0)}


def check_collisions(params: SystemParams, steps: Sequence[ProtocolStep], populated=_populated_ladder,
                     strict: bool = False, **report_kw) -> list[str]:
    """Run the RWA report on every step and warn (or raise when ``strict``) on collisions."""
    found = []
    for i, st in enumerate(steps):
        rep = rwa_report(params, st.segment, st.choice, populated=populated(st), **report_kw)
        for term in rep:
            if term.flag == "collision":
                found.append(f"step {i + 1}: {describe_collision(params, st.segment, term)}")
    if found:
        msg = "competing resonance within the collision window: " + "; ".join(found)
        if strict:
            raise CollisionError(msg)
        warnings.warn(msg, CollisionWarning, stacklevel=3)
    return found


def dicke_ladder(params: SystemParams, k_target: int, eta_d: float = ETA_ON,
                 strict: bool = False) -> list[ProtocolStep]:
    """Carrier pi pulses |W^0> -> |W^1> -> ... -> |W^k_target>, resonator held in |0>."""
    if int(k_target) != k_target or not 1 <= k_target <= params.n_qubits:
        raise ValueError(f"k_target must lie in 1..{params.n_qubits}")
    steps = [carrier_step(params, k, eta_d) for k in range(k_target)]
    check_collisions(params, steps, _populated_ladder, strict)
    return steps


def ghz_sequence(params: SystemParams, eta_d: float = ETA_ON, strict: bool = False) -> list[ProtocolStep]:
    """pi/2 pulse on |W^0> -> |W^1>, then pi pulses carrying the excited branch up to |W^N>."""
    if params.n_qubits < 2:
        raise ValueError("a GHZ sequence needs N >= 2")
    steps = [carrier_step(params, 0, eta_d, fraction=0.5)]
    steps += [carrier_step(params, k, eta_d) for k in range(1, params.n_qubits)]
    check_collisions(params, steps, _populated_ghz, strict)
    return steps


def to_schedule(steps: Sequence[ProtocolStep]) -> DriveSchedule:
    return DriveSchedule(st.segment for st in steps)


def cumulative_times(steps: Sequence[ProtocolStep]) -> np.ndarray:
    return np.cumsum([st.duration for st in steps])


def trapping_schedule(params: SystemParams, variant: str, segment_times: Sequence[float],
                      k0: int = 1, eta_on: float = ETA_ON, off_frequency: float = FREQUENCY_OFF) -> DriveSchedule:
    """Alternating on/off drive, starting on, with segments ending at ``segment_times``.

    "On" drives the k0 carrier at omega_d = Delta_k0 with eta_on. "Off" sets eta_d
    to the first zero of J_1 (amplitude variant) or moves omega_d to
    ``off_frequency`` with Omega_d unchanged (frequency variant).
    """
    times = np.asarray(segment_times, dtype=float)
    if times.size == 0 or times[0] <= 0 or np.any(np.diff(times) <= 0):
        raise ValueError("segment_times must be positive and strictly increasing")
    w_on = gap(params, k0)
    amp_on = eta_on * w_on / 2
    if variant == AMPLITUDE:
        off = (w_on, bessel_zero(1, 1) * w_on / 2)
    elif variant == FREQUENCY:
        off = (off_frequency, amp_on)
    else:
        raise ValueError(f"unknown trapping variant {variant!r}")
    durations = np.diff(np.concatenate([[0.0], times]))
    segs = [DriveSegment(*((w_on, amp_on) if i % 2 == 0 else off), d) for i, d in enumerate(durations)]
    return DriveSchedule(segs)


def magnon_fock_protocol(mp: MagnonParams, m_target: int, eta_d: float = ETA_ON,
                         hp_bound: float = HP_BOUND) -> list[ProtocolStep]:
    """Carrier pi pulses |0>_2 -> |1>_2 -> ... -> |m_target>_2 on the magnon ladder."""
    if int(m_target) != m_target or not 1 <= m_target <= mp.magnon_cutoff:
        raise ValueError(f"m_target must lie in 1..{mp.magnon_cutoff}")
    if m_target / (2 * mp.j) > hp_bound:
        warnings.warn(f"m_target/2j = {m_target / (2 * mp.j):.3g} exceeds {hp_bound}",
                      HPValidityWarning, stacklevel=2)
    steps = []
    for m in range(m_target):
        choice = EffectiveChoice(CARRIER, m)
        steps.append(_step(choice, magnon_resonance(mp, m), magnon_rabi(mp, eta_d, m, 0, -1, 0), eta_d, 1.0))
    return steps


def bessel_zero(l: int, index: int) -> float:
    """index-th positive root of J_l (J_{-l} shares the roots of J_l)."""
    if int(index) != index or index < 1:
        raise ValueError("index must be a positive integer")
    return float(jn_zeros(abs(int(l)), int(index))[-1])


def schedule_to_json(steps: Sequence[ProtocolStep] | DriveSchedule, **dump_kw) -> str:
    if isinstance(steps, DriveSchedule):
        doc = {"segments": [{"omega_d": s.omega_d, "Omega_d": s.Omega_d, "duration": s.duration} for s in steps]}
    else:
        doc = {"steps": [st.to_dict() for st in steps]}
    dump_kw.setdefault("sort_keys", True)
    return json.dumps(doc, **dump_kw)


def schedule_from_json(text: str):
    """Inverse of :func:`schedule_to_json`: a list of ProtocolStep or a bare DriveSchedule."""
    doc = json.loads(text)
    if "steps" in doc:
        return [ProtocolStep.from_dict(d) for d in doc["steps"]]
    if "segments" in doc:
        return DriveSchedule(DriveSegment(float(d["omega_d"]), float(d["Omega_d"]), float(d["duration"]))
                             for d in doc["segments"])
    raise ValueError("schedule document needs a 'steps' or 'segments' array")


# simulation

def full_generator(params) -> Generator:
    if isinstance(params, MagnonParams):
        static, num = magnon_diagonals(params)
        return Generator(static, num, magnon_coupling(params))
    return transformed_generator(params)


def effective_coupling(params, step: ProtocolStep, phase: float = 0.0) -> np.ndarray:
    if isinstance(params, MagnonParams):
        c = step.choice
        return build_magnon_effective(params, c.k0, c.n0, c.l0, step.segment.eta_d, phase)
    return build_effective_hamiltonian(params, step.segment, step.choice, phase)


def effective_targets(params, steps: Sequence[ProtocolStep], psi0: StateVector) -> list[StateVector]:
    """Interaction-picture states of the ideal effective evolution at the end of every step.

    Each step's coupling carries the drive-phase offset of its segment so the
    target lives in the same rotating frame as the mapped full evolution.
    """
    schedule = to_schedule(steps)
    psi = np.array(psi0.amplitudes)
    out = []
    for i, st in enumerate(steps):
        h = effective_coupling(params, st, schedule.phase_offset(i))
        psi = expm(-1j * h * st.duration) @ psi
        out.append(psi0.with_amplitudes(psi, frame=INTERACTION))
    return out


@dataclass
class ProtocolRun:
    steps: list
    schedule: DriveSchedule
    result: EvolutionResult
    targets: list
    fidelities: list

    @property
    def final_fidelity(self) -> float:
        return self.fidelities[-1]


def simulate_protocol(params, steps: Sequence[ProtocolStep], psi0: StateVector | None = None,
                      sample_count: int = 40, rel_tol: float = 1e-9, track=None) -> ProtocolRun:
    """Evolve the full Hamiltonian through ``steps`` and score every step end.

    Fidelity is |<target|psi>|^2 with psi mapped to the interaction picture
    and the target from :func:`effective_targets`.
    """
    steps = list(steps)
    if psi0 is None:
        psi0 = basis_state(0, 0, params)
    schedule = to_schedule(steps)
    if track is None:
        track = [(k, 0) for k in range(params.n_levels)]
    res = evolve(full_generator(params), schedule, psi0, sample_count, rel_tol, track)
    targets = effective_targets(params, steps, psi0)
    fids = []
    for i, tgt in enumerate(targets):
        idx = (i + 1) * sample_count
        st = res.state_at(idx)
        mapped = to_interaction_picture(st, params, schedule, res.times[idx])
        fids.append(fidelity(tgt, mapped))
    return ProtocolRun(steps, schedule, res, targets, fids)


def ideal_ghz(params: SystemParams, phase: complex = 1.0) -> StateVector:
    """(|W^0> + phase |W^N>)/sqrt 2 with the resonator in vacuum."""
    return superposition_state([(0, 0, 1.0), (params.n_qubits, 0, phase)], params, frame=INTERACTION)
