import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import jv

from drivendicke.core import INTERACTION, DriveSchedule, SystemParams, basis_state
from drivendicke.dynamics import evolve, interaction_states
from drivendicke.hamiltonian import gap
from drivendicke.magnon import HPValidityWarning, MagnonParams
from drivendicke.protocols import (
    AMPLITUDE,
    FREQUENCY,
    bessel_zero,
    cumulative_times,
    dicke_ladder,
    effective_coupling,
    effective_targets,
    full_generator,
    ghz_sequence,
    ideal_ghz,
    magnon_fock_protocol,
    schedule_from_json,
    schedule_to_json,
    simulate_protocol,
    trapping_schedule,
)
from drivendicke.sidebands import CollisionError, CollisionWarning, selected_rabi

P4 = SystemParams.standard(4, g=0.24)


def test_ladder_frequencies():
    steps = dicke_ladder(P4, 4)
    assert [s.omega_d for s in steps] == pytest.approx([3.1457, 2.6849, 2.2241, 1.7633], abs=5e-4)
    assert len(dicke_ladder(P4, 1)) == 1
    for s in steps:
        assert s.duration == pytest.approx(s.pulse_fraction * math.pi / (2 * abs(selected_rabi(P4, 1.84, s.choice))))
        assert s.Omega_d / s.omega_d == pytest.approx(0.92)
    with pytest.raises(ValueError):
        dicke_ladder(P4, 5)
    with pytest.raises(ValueError):
        dicke_ladder(P4, 0)


def test_ghz_cumulative_times():
    steps = ghz_sequence(P4)
    assert steps[0].pulse_fraction == 0.5 and all(s.pulse_fraction == 1.0 for s in steps[1:])
    t = P4.to_seconds(cumulative_times(steps))
    assert t == pytest.approx([1.0957e-8, 2.8850e-8, 4.6743e-8, 6.8657e-8], rel=1e-3)
    with pytest.raises(ValueError):
        ghz_sequence(SystemParams.standard(1))


def test_pi_pulses_under_effective_model():
    p = SystemParams.standard(5, g=0.2895)
    for st in dicke_ladder(p, 5):
        (ki, _), (kf, _) = st.intended_transition
        u = expm(-1j * effective_coupling(p, st) * st.duration)
        psi = u @ basis_state(ki, 0, p).amplitudes
        assert 1 - abs(psi[kf * p.n_fock]) ** 2 < 1e-6


def test_ghz_phase_chain_without_offsets():
    # with no drive-phase offsets the steps reproduce +i, -1, -i, +1
    steps = ghz_sequence(P4)
    psi = basis_state(0, 0, P4).amplitudes
    chain = []
    for k, st in enumerate(steps):
        psi = expm(-1j * effective_coupling(P4, st) * st.duration) @ psi
        chain.append(psi[(k + 1) * P4.n_fock] / psi[0])
    assert chain == pytest.approx([1j, -1, -1j, 1], abs=1e-9)
    final = basis_state(0, 0, P4).with_amplitudes(psi, INTERACTION)
    assert abs(np.vdot(ideal_ghz(P4).amplitudes, final.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_effective_targets_track_offsets():
    steps = ghz_sequence(P4)
    targets = effective_targets(P4, steps, basis_state(0, 0, P4))
    last = targets[-1]
    assert last.population(0, 0) == pytest.approx(0.5, abs=1e-12)
    assert last.population(4, 0) == pytest.approx(0.5, abs=1e-12)


def test_collision_warning_and_strict_error():
    p = SystemParams.standard(5, g=0.2263)
    with pytest.warns(CollisionWarning, match="Delta_0/2"):
        ghz_sequence(p)
    with pytest.raises(CollisionError, match="Delta_0/2"):
        ghz_sequence(p, strict=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ghz_sequence(P4)
        dicke_ladder(p, 5)


def test_bessel_zeros():
    assert bessel_zero(1, 1) == pytest.approx(3.8317, abs=1e-4)
    assert bessel_zero(0, 1) == pytest.approx(2.4048, abs=1e-4)
    assert bessel_zero(-1, 1) == bessel_zero(1, 1)
    for l in range(4):
        for i in range(1, 4):
            assert abs(jv(l, bessel_zero(l, i))) < 1e-9
    assert bessel_zero(1, 1) * gap(P4, 1) / 2 == pytest.approx(5.1439, abs=1e-3)
    with pytest.raises(ValueError):
        bessel_zero(1, 0)


def _period(p):
    return math.pi / (2 * abs(selected_rabi(p, 1.84, dicke_ladder(p, 2)[1].choice)))


def test_trapping_schedule_structure():
    T = _period(P4)
    amp = trapping_schedule(P4, AMPLITUDE, [0.8 * T, 3 * T, 7 * T, 9 * T])
    assert len(amp) == 4 and amp.total_time == pytest.approx(9 * T)
    assert amp[0].eta_d == pytest.approx(1.84) and amp[1].Omega_d == pytest.approx(5.1439, abs=1e-3)
    assert amp[1].omega_d == amp[0].omega_d == pytest.approx(2.6849, abs=1e-4)
    freq = trapping_schedule(P4, FREQUENCY, [0.8 * T, 3 * T, 7 * T])
    assert freq[1].omega_d == 2.90 and freq[1].Omega_d == freq[0].Omega_d
    lo, hi = sorted((gap(P4, 0), gap(P4, 1)))
    assert lo < freq[1].omega_d < hi
    with pytest.raises(ValueError):
        trapping_schedule(P4, "phase", [1.0])
    with pytest.raises(ValueError):
        trapping_schedule(P4, AMPLITUDE, [2.0, 1.0])


def test_trapping_stores_state():
    T = _period(P4)
    sched = trapping_schedule(P4, AMPLITUDE, [0.8 * T, 2.8 * T])
    res = evolve(full_generator(P4), sched, basis_state(1, 0, P4), 40, track=[(1, 0), (2, 0)])
    assert res.population(1, 0)[40] == pytest.approx(math.cos(2 * math.pi / 5) ** 2, abs=5e-3)
    states = interaction_states(res, P4, sched)
    loss = 1 - np.abs(states[40:].conj() @ states[40]) ** 2
    assert loss.max() < 0.01


def test_json_roundtrip():
    steps = ghz_sequence(P4)
    back = schedule_from_json(schedule_to_json(steps))
    assert back == steps
    sched = trapping_schedule(P4, AMPLITUDE, [1.0, 2.0])
    again = schedule_from_json(schedule_to_json(sched))
    assert isinstance(again, DriveSchedule) and again.segments == sched.segments
    assert schedule_to_json(steps) == schedule_to_json(back)
    with pytest.raises(ValueError):
        schedule_from_json("{}")


def test_magnon_protocol():
    mp = MagnonParams(SystemParams.standard(200, g=0.24, fock_cutoff=12), 12)
    steps = magnon_fock_protocol(mp, 3)
    assert steps[0].omega_d == pytest.approx(48.3042, abs=1e-3)
    d = [s.duration for s in steps]
    assert d[0] / d[1] == pytest.approx(math.sqrt(2)) and d[0] / d[2] == pytest.approx(math.sqrt(3))
    with pytest.warns(HPValidityWarning):
        magnon_fock_protocol(MagnonParams(SystemParams.standard(20), 12), 3)
    with pytest.raises(ValueError):
        magnon_fock_protocol(mp, 13)


@pytest.mark.slow
def test_magnon_fidelity_increases_with_g():
    fids = []
    for g in (0.16, 0.2, 0.24):
        mp = MagnonParams(SystemParams.standard(200, g=g, fock_cutoff=12), 12)
        fids.append(simulate_protocol(mp, magnon_fock_protocol(mp, 1), sample_count=5).final_fidelity)
    assert fids[0] < fids[1] < fids[2]


def test_ladder_fidelity_monotone_in_g():
    out = []
    for g in (0.1, 0.2, 0.3):
        p = SystemParams.standard(3, g=g)
        out.append(simulate_protocol(p, dicke_ladder(p, 3), sample_count=5).final_fidelity)
    assert out[0] <= out[1] <= out[2]


def test_fock_cutoff_convergence():
    fids = []
    for cutoff in (15, 30):
        p = SystemParams.standard(3, g=0.2895, fock_cutoff=cutoff)
        fids.append(simulate_protocol(p, dicke_ladder(p, 3), sample_count=5).fidelities)
    assert np.abs(np.subtract(*fids)).max() < 1e-4
