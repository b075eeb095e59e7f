"""Sideband catalog of the frequency-modulated interaction picture.

Expanding exp(i eta_d sin(omega_d t)) in Bessel harmonics turns the displaced
coupling into a comb of terms |k+1, n'><k, n| with

    Omega_knl^(s) = (eps/2) h(k) J_l(eta_d) <n+s|D(alpha)|n>
    delta_kl^(+-s) = l omega_d + Delta_k +- s omega_r

Tuning omega_d so one detuning vanishes selects a carrier, red (TC) or blue
(anti-TC) transition; :func:`rwa_report` checks how well every other term is
suppressed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.special import jv

from .core import DriveSegment, SystemParams, flat_index, raising_amplitude
from .hamiltonian import gap, sideband_factor

CARRIER, RED, BLUE = "carrier", "red", "blue"
TC, ANTI_TC = "TC", "antiTC"

_KIND_SIGN = {CARRIER: 0, RED: -1, BLUE: +1}
_CHOICE_KIND = {CARRIER: CARRIER, TC: RED, ANTI_TC: BLUE}


class ResonanceError(ValueError):
    """A requested transition cannot be driven resonantly, or the drive is off resonance."""


class CollisionWarning(UserWarning):
    """A competing sideband sits inside the collision window of the selected transition."""


class CollisionError(RuntimeError):
    """Raised instead of :class:`CollisionWarning` in strict mode."""


def bessel_j(l: int, x: float) -> float:
    """Bessel function of the first kind J_l(x) for integer order."""
    return float(jv(int(l), x))


@dataclass(frozen=True)
class EffectiveChoice:
    """Target transition (k0, n0) -> (k0+1, n0 +- s0) driven through Bessel order l0."""

    kind: str
    k0: int
    n0: int = 0
    l0: int = -1
    s0: int = 0

    def __post_init__(self):
        if self.kind not in _CHOICE_KIND:
            raise ValueError(f"unknown transition kind {self.kind!r}")
        if self.l0 == 0:
            raise ValueError("l0 = 0 gives no drive-selected resonance")
        if self.kind == CARRIER and self.s0 != 0:
            raise ValueError("a carrier transition has s0 = 0")
        if self.kind != CARRIER and self.s0 < 1:
            raise ValueError("sideband transitions need s0 >= 1")
        if self.k0 < 0 or self.n0 < 0:
            raise ValueError("k0 and n0 must be non-negative")

    @property
    def sideband_kind(self) -> str:
        return _CHOICE_KIND[self.kind]

    @property
    def transition(self) -> tuple[tuple[int, int], tuple[int, int]]:
        """(initial label, final label) of the driven transition."""
        k, n, s = self.k0, self.n0, self.s0
        if self.kind == CARRIER:
            return (k, n), (k + 1, n)
        if self.kind == TC:
            return (k, n + s), (k + 1, n)
        return (k, n), (k + 1, n + s)


@dataclass(frozen=True)
class SidebandTerm:
    k: int
    n: int
    l: int
    s: int
    kind: str
    rabi: float
    detuning: float
    ratio: float = 0.0
    flag: str = "ok"

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["ratio"]):
            d["ratio"] = None
        return d


def _check_range(params, k, n, s):
    if int(k) != k or not 0 <= k <= params.n_qubits - 1:
        raise ValueError(f"k = {k} out of range 0..{params.n_qubits - 1}")
    if int(n) != n or n < 0 or int(s) != s or s < 0:
        raise ValueError("n and s must be non-negative integers")


def rabi_frequency(params: SystemParams, eta_d: float, k: int, n: int, l: int, s: int) -> float:
    """Omega_knl^(s), without the (-1)^s sign carried by red sidebands."""
    _check_range(params, k, n, s)
    h = float(raising_amplitude(params.n_qubits, k))
    return 0.5 * params.epsilon * h * bessel_j(l, eta_d) * sideband_factor(params.alpha, n, s)


def detuning(params: SystemParams, drive, k: int, l: int, s: int, sign: int) -> float:
    """delta_kl^(sign*s) = l omega_d + Delta_k + sign s omega_r.

    ``drive`` may be a :class:`DriveSegment` or a bare drive frequency.
    """
    if sign not in (-1, 0, 1):
        raise ValueError(f"sign must be -1, 0 or +1, got {sign}")
    if (sign == 0) != (s == 0):
        raise ValueError("carrier terms use sign 0 and s = 0; sidebands need both nonzero")
    omega_d = drive.omega_d if isinstance(drive, DriveSegment) else float(drive)
    return l * omega_d + gap(params, k) + sign * s * params.omega_r


def _resonance(gap_k0: float, choice: EffectiveChoice, omega_r: float) -> float:
    shift = {CARRIER: 0.0, TC: -choice.s0 * omega_r, ANTI_TC: choice.s0 * omega_r}[choice.kind]
    w = -(gap_k0 + shift) / choice.l0
    if not w > 0:
        raise ResonanceError(
            f"{choice.kind} resonance for k0={choice.k0}, l0={choice.l0}, s0={choice.s0} "
            f"needs omega_d = {w:.6g} <= 0"
        )
    return w


def resonance_frequency(params: SystemParams, choice: EffectiveChoice) -> float:
    """Drive frequency that zeroes the detuning of the chosen term."""
    if choice.k0 > params.n_qubits - 1:
        raise ResonanceError(f"k0 = {choice.k0} has no level above it for N = {params.n_qubits}")
    return _resonance(gap(params, choice.k0), choice, params.omega_r)


def selected_rabi(params: SystemParams, eta_d: float, choice: EffectiveChoice) -> float:
    """Signed effective coupling of the chosen transition, including (-1)^s0 for TC."""
    om = rabi_frequency(params, eta_d, choice.k0, choice.n0, choice.l0, choice.s0)
    if choice.kind == TC:
        om *= (-1) ** choice.s0
    return om


def two_level_coupling(n_levels, n_fock, choice: EffectiveChoice, strength: complex) -> np.ndarray:
    """strength |f><i| + h.c. on the flat basis for the choice's transition."""
    (ki, ni), (kf, nf) = choice.transition
    if kf >= n_levels or max(ni, nf) >= n_fock:
        raise ValueError(f"transition {choice.transition} leaves the truncated basis")
    h = np.zeros((n_levels * n_fock,) * 2, dtype=complex)
    i, f = flat_index(ki, ni, n_fock), flat_index(kf, nf, n_fock)
    h[f, i] = strength
    h[i, f] = np.conj(strength)
    return h


def build_effective_hamiltonian(params: SystemParams, drive: DriveSegment, choice: EffectiveChoice,
                                phase: float = 0.0, tol: float = 1e-9) -> np.ndarray:
    """Resonant two-level Hamiltonian of the chosen transition in the interaction picture.

    ``phase`` is the constant drive-phase offset of the segment
    (:meth:`DriveSchedule.phase_offset`); it multiplies the raising term.
    """
    w_res = resonance_frequency(params, choice)
    if abs(drive.omega_d - w_res) > tol * params.omega_r:
        raise ResonanceError(
            f"drive at {drive.omega_d:.10g} is off the {choice.kind} resonance {w_res:.10g}"
        )
    om = selected_rabi(params, drive.eta_d, choice)
    return two_level_coupling(params.n_levels, params.n_fock, choice, om * np.exp(1j * phase))


def _selected_family(choice):
    # the resonance condition does not depend on n, so the same transition at
    # other photon numbers is equally resonant; it is not a competitor
    return (choice.k0, choice.l0, choice.s0, choice.sideband_kind)


def term_labels(term: SidebandTerm) -> tuple[tuple[int, int], tuple[int, int]]:
    """The two basis labels a catalog term couples."""
    k, n, s = term.k, term.n, term.s
    if term.kind == CARRIER:
        return (k, n), (k + 1, n)
    if term.kind == RED:
        return (k, n + s), (k + 1, n)
    return (k, n), (k + 1, n + s)


def sideband_catalog(params: SystemParams, drive: DriveSegment, k_max=None, n_max=6, l_max=5, s_max=4):
    """Every (k, n, l, s, kind) term within range with its Rabi frequency and detuning."""
    k_top = params.n_qubits - 1 if k_max is None else min(k_max, params.n_qubits - 1)
    eta = drive.eta_d
    terms = []
    for k in range(k_top + 1):
        for l in range(-l_max, l_max + 1):
            for n in range(n_max + 1):
                for s in range(s_max + 1):
                    om = rabi_frequency(params, eta, k, n, l, s)
                    kinds = (CARRIER,) if s == 0 else (RED, BLUE)
                    for kind in kinds:
                        sign = _KIND_SIGN[kind]
                        terms.append(SidebandTerm(k, n, l, s, kind, om,
                                                  detuning(params, drive, k, l, s, sign)))
    return terms


def rwa_report(params: SystemParams, drive: DriveSegment, choice: EffectiveChoice,
               ranges: dict | None = None, threshold: float = 0.1,
               collision_factor: float = 10.0, populated=None) -> list[SidebandTerm]:
    """Competing terms ranked by |Omega/delta|, flagged as RWA violations or collisions.

    The selected transition is excluded at every Fock number n, since its
    detuning is n-independent. A term with |Omega/delta| > threshold is a
    ``violation``; if it is also near-degenerate, |delta| < collision_factor *
    |Omega_selected|, it is a ``collision``. ``populated`` is an optional set
    of (k, n) labels; when given, only terms coupling out of one of them are kept.
    """
    ranges = dict(ranges or {})
    cat = sideband_catalog(params, drive, ranges.get("k_max"), ranges.get("n_max", 6),
                           ranges.get("l_max", 5), ranges.get("s_max", 4))
    sel = _selected_family(choice)
    om_sel = abs(rabi_frequency(params, drive.eta_d, choice.k0, choice.n0, choice.l0, choice.s0))
    occupied = None if populated is None else {tuple(x) for x in populated}
    out = []
    for t in cat:
        if (t.k, t.l, t.s, t.kind) == sel:
            continue
        if occupied is not None and occupied.isdisjoint(term_labels(t)):
            continue
        if t.detuning != 0:
            ratio = abs(t.rabi) / abs(t.detuning)
        else:
            ratio = math.inf if t.rabi else 0.0
        flag = "ok"
        if ratio > threshold:
            flag = "collision" if abs(t.detuning) < collision_factor * om_sel else "violation"
        out.append(SidebandTerm(t.k, t.n, t.l, t.s, t.kind, t.rabi, t.detuning, ratio, flag))
    out.sort(key=lambda t: -t.ratio)
    return out


def flagged(report: Sequence[SidebandTerm]) -> list[SidebandTerm]:
    return [t for t in report if t.flag != "ok"]


def report_to_json(report: Sequence[SidebandTerm], **dump_kw) -> str:
    return json.dumps([t.to_dict() for t in report], **dump_kw)


def describe_collision(params: SystemParams, drive: DriveSegment, term: SidebandTerm) -> str:
    """Human-readable resonance condition hit by a colliding term, e.g. '2 omega_d ~ Delta_0'."""
    m = abs(term.l)
    lhs = {0: "0", 1: "omega_d"}.get(m, f"{m} omega_d")
    rhs = f"Delta_{term.k}"
    if term.s:
        rhs += f" {'+' if term.kind == BLUE else '-'} {term.s} omega_r"
    elif m > 1:
        rhs += f", i.e. omega_d ~ Delta_{term.k}/{m}"
    return (f"{lhs} ~ {rhs} (k={term.k}, n={term.n}, l={term.l}, s={term.s}, {term.kind}; "
            f"delta = {term.detuning:.4g}, Omega = {term.rabi:.4g})")
