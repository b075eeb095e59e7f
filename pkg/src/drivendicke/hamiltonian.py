"""Lab-frame and displaced-frame Hamiltonians, the analytic spectrum and the frame unitary.

The displaced (polaron) frame is reached with

    R = exp[-alpha (a^dag - a) Jx] * prod_m (sigma_x + sigma_z)/sqrt(2),   alpha = 2g/omega_r,

which turns the coupling into a Jz^2 nonlinearity plus displaced qubit flips::

    H' = omega_r a^dag a + [Delta + 2 Omega_d cos(omega_d t)] Jz - (4 g^2/omega_r) Jz^2
         + (eps/2) [D(alpha) J+ + D(-alpha) J-]

H' is the frame every simulation runs in; the lab Hamiltonian and R are kept
for cross-checks at small N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .core import DriveSegment, SystemParams, collective_operators


def laguerre(n: int, s: int, x: float) -> float:
    """Associated Laguerre polynomial L_n^(s)(x) by upward three-term recurrence."""
    if int(n) != n or int(s) != s or n < 0 or s < 0:
        raise ValueError(f"laguerre needs non-negative integer n, s; got n={n}, s={s}")
    prev, cur = 0.0, 1.0
    for i in range(int(n)):
        prev, cur = cur, ((2 * i + 1 + s - x) * cur - (i + s) * prev) / (i + 1)
    return cur


def sideband_factor(alpha: float, n: int, s: int) -> float:
    """<n+s| D(alpha) |n> at t = 0 for real alpha.

    e^{-alpha^2/2} alpha^s sqrt(n!/(n+s)!) L_n^(s)(alpha^2). Shared by the
    displacement matrix and every Rabi-frequency formula.
    """
    if n < 0 or s < 0:
        raise ValueError("n and s must be non-negative")
    x = alpha * alpha
    log_ratio = 0.5 * (math.lgamma(n + 1) - math.lgamma(n + s + 1))
    return math.exp(-x / 2 + log_ratio) * alpha**s * laguerre(n, s, x)


@dataclass(frozen=True)
class DisplacementBlock:
    alpha: float
    t: float
    cutoff: int
    matrix: np.ndarray


def displacement_matrix(alpha: float, t: float = 0.0, params: SystemParams | None = None,
                        cutoff: int | None = None, omega_r: float | None = None) -> DisplacementBlock:
    """Truncated Fock-basis matrix of D(alpha e^{i omega_r t}).

    Elements come from the closed Laguerre form, not from exponentiating a
    truncated generator, so the block is exact element by element and only
    fails to be unitary near the cutoff.
    """
    if cutoff is None:
        if params is None:
            raise ValueError("need params or an explicit cutoff")
        cutoff = params.fock_cutoff
    if omega_r is None:
        omega_r = params.omega_r if params is not None else 1.0
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    dim = cutoff + 1
    mat = np.zeros((dim, dim), dtype=complex)
    for n in range(dim):
        for s in range(dim - n):
            v = sideband_factor(alpha, n, s)
            if s == 0:
                mat[n, n] = v
            else:
                ph = np.exp(1j * s * omega_r * t)
                mat[n + s, n] = v * ph
                # (-alpha)^s = (-1)^s alpha^s
                mat[n, n + s] = (-1) ** s * v * np.conj(ph)
    return DisplacementBlock(alpha=alpha, t=t, cutoff=cutoff, matrix=mat)


def _fock_ops(n_fock):
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1)
    return a, np.diag(np.arange(n_fock, dtype=float))


def build_lab_hamiltonian(params: SystemParams, drive: DriveSegment | None, t: float) -> np.ndarray:
    """omega_r a^dag a + eps Jz + [Delta + 2 Omega_d cos(omega_d t)] Jx + 2g (a^dag + a) Jx."""
    jz, jp, jm = collective_operators(params.n_qubits)
    jx = (jp + jm) / 2
    a, num = _fock_ops(params.n_fock)
    iq, if_ = np.eye(params.n_levels), np.eye(params.n_fock)
    bias = params.delta + (drive.amplitude(t) if drive is not None else 0.0)
    h = (
        params.omega_r * np.kron(iq, num)
        + params.epsilon * np.kron(jz, if_)
        + bias * np.kron(jx, if_)
        + 2 * params.g * np.kron(jx, a + a.T)
    )
    return h.astype(complex)


def qubit_energies(params: SystemParams) -> np.ndarray:
    """Diagonal of Delta Jz - (4g^2/omega_r) Jz^2, one entry per Dicke level."""
    x = np.arange(params.n_levels) - params.n_qubits / 2
    return params.delta * x - params.kerr * x**2


def static_diagonal(params: SystemParams) -> np.ndarray:
    """E_{n,k} on the flat basis."""
    n = np.arange(params.n_fock) * params.omega_r
    return (qubit_energies(params)[:, None] + n[None, :]).reshape(-1)


def drive_diagonal(params: SystemParams) -> np.ndarray:
    """Diagonal of Jz (x) 1, the operator the drive multiplies in the displaced frame."""
    x = np.arange(params.n_levels) - params.n_qubits / 2
    return np.repeat(x, params.n_fock).astype(float)


def transformed_coupling(params: SystemParams) -> np.ndarray:
    """(eps/2)[D(alpha) J+ + D(-alpha) J-] on the flat basis (t = 0 convention)."""
    _, jp, _ = collective_operators(params.n_qubits)
    d = displacement_matrix(params.alpha, 0.0, params).matrix
    up = 0.5 * params.epsilon * np.kron(jp, d)
    return up + up.conj().T


def build_transformed_hamiltonian(params: SystemParams, drive: DriveSegment | None, t: float) -> np.ndarray:
    """H'(t) in the displaced frame.

    All resonator time dependence lives in omega_r a^dag a, so the displacement
    enters with its t = 0 phase.
    """
    diag = static_diagonal(params)
    if drive is not None:
        diag = diag + drive.amplitude(t) * drive_diagonal(params)
    return np.diag(diag).astype(complex) + transformed_coupling(params)


def _check_k(params, k, top):
    if int(k) != k or not 0 <= k <= top:
        raise ValueError(f"excitation number {k} out of range 0..{top}")


def bare_spectrum(params: SystemParams, n: int, k: int) -> float:
    """E_{n,k} = Delta (k - N/2) - (4g^2/omega_r)(k - N/2)^2 + n omega_r."""
    _check_k(params, k, params.n_qubits)
    if int(n) != n or n < 0:
        raise ValueError(f"Fock number {n} must be a non-negative integer")
    x = k - params.n_qubits / 2
    return params.delta * x - params.kerr * x**2 + n * params.omega_r


def gap(params: SystemParams, k: int) -> float:
    """Delta_k = E_{n,k+1} - E_{n,k} = Delta + (4g^2/omega_r)(N - 2k - 1)."""
    _check_k(params, k, params.n_qubits - 1)
    return params.delta + params.kerr * (params.n_qubits - 2 * k - 1)


def collective_hadamard(N: int) -> np.ndarray:
    """prod_m (sigma_x + sigma_z)/sqrt(2) restricted to the symmetric sector.

    On that sector it equals i^N exp[-i pi (Jx + Jz)/sqrt(2)], a pi rotation
    about the (x + z) axis swapping Jx and Jz.
    """
    jz, jp, jm = collective_operators(N)
    jx = (jp + jm) / 2
    return (1j) ** N * expm(-1j * np.pi * (jx + jz) / np.sqrt(2))


def build_frame_unitary(params: SystemParams) -> np.ndarray:
    """R on the truncated flat basis.

    exp[-alpha (a^dag - a) Jx] is assembled eigenspace by eigenspace of Jx as
    sum_x |x><x| (x) D(-alpha x). Only approximately unitary near the Fock cutoff.
    """
    jz, jp, jm = collective_operators(params.n_qubits)
    jx = (jp + jm) / 2
    mx, vecs = np.linalg.eigh(jx)
    dim = params.dim
    disp = np.zeros((dim, dim), dtype=complex)
    for x, v in zip(mx, vecs.T):
        proj = np.outer(v, v.conj())
        d = displacement_matrix(-params.alpha * x, 0.0, params).matrix
        disp += np.kron(proj, d)
    had = np.kron(collective_hadamard(params.n_qubits), np.eye(params.n_fock))
    return disp @ had


def hermiticity_residual(h: np.ndarray) -> float:
    """max |H - H^dag| relative to max |H| (absolute when H = 0)."""
    scale = np.abs(h).max() or 1.0
    return float(np.abs(h - h.conj().T).max() / scale)
