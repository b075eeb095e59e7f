"""Command-line front end: ``drivendicke --config run.toml [--out DIR] <verb>``.

Verbs are spectrum, sidebands, evolve and sweep. Exit codes: 0 success,
2 configuration error, 3 collision under --strict, 4 numerical failure.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from .core import DEFAULT_DELTA_SI, DEFAULT_OMEGA_R_SI, DriveSchedule, DriveSegment, SystemParams, basis_state
from .dynamics import (
    IntegrationError,
    evolve,
    fit_rabi_frequency,
    interaction_states,
    inversion,
    run_full_and_effective,
)
from .hamiltonian import bare_spectrum, gap
from .magnon import MagnonParams, magnon_gap, magnon_spectrum
from .protocols import (
    ETA_ON,
    carrier_step,
    dicke_ladder,
    full_generator,
    ghz_sequence,
    magnon_fock_protocol,
    schedule_from_json,
    simulate_protocol,
    trapping_schedule,
)
from .sidebands import (
    CollisionError,
    EffectiveChoice,
    ResonanceError,
    describe_collision,
    resonance_frequency,
    rwa_report,
    selected_rabi,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_CONFIG, EXIT_COLLISION, EXIT_NUMERICAL = 2, 3, 4
FINITE, MAGNON = "finite", "magnon"
SWEEP_AXES = ("g", "omega_d", "eta_d")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: SystemParams
    mode: str = FINITE
    magnon_cutoff: int = 12
    blocks: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def model(self):
        return MagnonParams(self.params, self.magnon_cutoff) if self.mode == MAGNON else self.params

    def block(self, name: str) -> dict:
        b = self.blocks.get(name, {})
        if not isinstance(b, dict):
            raise ConfigError(f"[{name}] must be a table")
        return b

    # SI inputs are rad/s and seconds
    def freq(self, x) -> float:
        return float(x) if self.params.unit_mode == "natural" else float(self.params.from_rad_per_s(x))

    def time(self, x) -> float:
        return float(x) if self.params.unit_mode == "natural" else float(self.params.from_seconds(x))


def _need(block: dict, key: str, name: str):
    if key not in block:
        raise ConfigError(f"[{name}] is missing '{key}'")
    return block[key]


def parse_config(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a parsed TOML document into a :class:`RunConfig`."""
    sysb = doc.get("system")
    if not isinstance(sysb, dict):
        raise ConfigError("config needs a [system] table")
    units = sysb.get("units", "natural")
    mode = sysb.get("mode", FINITE)
    if mode not in (FINITE, MAGNON):
        raise ConfigError(f"unknown mode {mode!r}")
    try:
        n = int(_need(sysb, "N", "system"))
        cutoff = int(sysb.get("fock_cutoff", 12 if mode == MAGNON else 15))
        if units == "natural":
            params = SystemParams(
                epsilon=float(sysb.get("epsilon", 0.01)),
                delta=float(sysb.get("delta", DEFAULT_DELTA_SI / DEFAULT_OMEGA_R_SI)),
                g=float(_need(sysb, "g", "system")),
                n_qubits=n,
                fock_cutoff=cutoff,
                omega_r_si=float(sysb.get("omega_r_si", DEFAULT_OMEGA_R_SI)),
            )
        elif units == "si":
            w = float(sysb.get("omega_r", DEFAULT_OMEGA_R_SI))
            params = SystemParams.from_si(
                w,
                float(sysb.get("epsilon", 0.01 * w)),
                float(sysb.get("delta", DEFAULT_DELTA_SI)),
                float(_need(sysb, "g", "system")),
                n,
                cutoff,
            )
        else:
            raise ConfigError(f"units must be 'natural' or 'si', got {units!r}")
        magnon_cutoff = int(sysb.get("magnon_cutoff", 12))
        if mode == MAGNON:
            MagnonParams(params, magnon_cutoff)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    blocks = {k: v for k, v in doc.items() if k != "system"}
    return RunConfig(params, mode, magnon_cutoff, blocks, base_dir)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {p}: {exc}") from exc
    return parse_config(doc, p.parent)


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path: Path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def params_echo(cfg: RunConfig) -> dict:
    p = cfg.params
    doc = {
        "mode": cfg.mode,
        "natural": {"epsilon": p.epsilon, "delta": p.delta, "g": p.g, "omega_r": p.omega_r,
                    "N": p.n_qubits, "fock_cutoff": p.fock_cutoff},
        "si": {"omega_r_rad_s": p.omega_r_si, "epsilon_rad_s": float(p.to_rad_per_s(p.epsilon)),
               "delta_rad_s": float(p.to_rad_per_s(p.delta)), "g_rad_s": float(p.to_rad_per_s(p.g))},
    }
    if cfg.mode == MAGNON:
        doc["natural"]["magnon_cutoff"] = cfg.magnon_cutoff
    return doc


# spectrum

def cmd_spectrum(cfg: RunConfig, out: Path):
    b = cfg.block("spectrum")
    p = cfg.params
    n_max = int(b.get("n_max", min(p.fock_cutoff, 3)))
    rows = []
    if cfg.mode == MAGNON:
        mp = cfg.model
        m_max = int(b.get("m_max", mp.magnon_cutoff))
        for m in range(m_max + 1):
            d = magnon_gap(mp, m) if m < mp.magnon_cutoff else None
            rows += [(m, n, magnon_spectrum(mp, n, m), d) for n in range(n_max + 1)]
        header = ["m", "n", "E", "Delta_m"]
    else:
        k_max = int(b.get("k_max", p.n_qubits))
        for k in range(min(k_max, p.n_qubits) + 1):
            d = gap(p, k) if k < p.n_qubits else None
            rows += [(k, n, bare_spectrum(p, n, k), d) for n in range(n_max + 1)]
        header = ["k", "n", "E", "Delta_k"]
    write_csv(out / "spectrum.csv", header, rows)
    write_json(out / "spectrum.json", {"params": params_echo(cfg), "rows": len(rows)})


# sidebands

def _choice(b: dict) -> EffectiveChoice:
    return EffectiveChoice(str(b.get("kind", "carrier")), int(b.get("k0", 0)), int(b.get("n0", 0)),
                           int(b.get("l0", -1)), int(b.get("s0", 0)))


def _drive_segment(cfg: RunConfig, b: dict, choice: EffectiveChoice, duration: float = 1.0) -> DriveSegment:
    p = cfg.params
    w = cfg.freq(b["omega_d"]) if "omega_d" in b else resonance_frequency(p, choice)
    if "Omega_d" in b:
        return DriveSegment(w, cfg.freq(b["Omega_d"]), duration)
    return DriveSegment.from_eta(w, float(b.get("eta_d", ETA_ON)), duration)


def cmd_sidebands(cfg: RunConfig, out: Path, strict: bool):
    if cfg.mode != FINITE:
        raise ConfigError("the sidebands command needs mode = 'finite'")
    b = cfg.block("drive")
    p = cfg.params
    choice = _choice(b)
    seg = _drive_segment(cfg, b, choice)
    ranges = {k: int(b[k]) for k in ("n_max", "l_max", "s_max", "k_max") if k in b}
    populated = b.get("populated")
    rep = rwa_report(p, seg, choice, ranges, float(b.get("threshold", 0.1)),
                     float(b.get("collision_factor", 10.0)),
                     None if populated is None else [tuple(x) for x in populated])
    om = selected_rabi(p, seg.eta_d, choice)
    sel = {"k0": choice.k0, "n0": choice.n0, "l0": choice.l0, "s0": choice.s0, "kind": choice.kind,
           "omega_d": seg.omega_d, "Omega_d": seg.Omega_d, "eta_d": seg.eta_d, "rabi": om,
           "detuning": seg.omega_d - resonance_frequency(p, choice)}
    if abs(om) < 1e-12:
        sel["note"] = "interaction off: the selected Bessel factor vanishes"
    else:
        t_pi = math.pi / (2 * abs(om))
        sel["period_T"] = t_pi
        sel["period_T_s"] = float(p.to_seconds(t_pi))
    collisions = [describe_collision(p, seg, t) for t in rep if t.flag == "collision"]
    doc = {"params": params_echo(cfg), "selected": sel, "collisions": collisions,
           "terms": [t.to_dict() for t in rep]}
    write_json(out / "sidebands.json", doc)
    if collisions and strict:
        raise CollisionError("; ".join(collisions))


# evolve

def _initial(cfg, b, model):
    k, n = b.get("initial", [0, 0])
    return basis_state(int(k), int(n), model)


def _protocol_steps(cfg: RunConfig, b: dict, strict: bool):
    kind = b.get("protocol", "ladder")
    p, eta = cfg.params, float(b.get("eta_d", ETA_ON))
    if cfg.mode == MAGNON:
        if kind != "magnon":
            raise ConfigError("mode = 'magnon' supports protocol = 'magnon' only")
        return magnon_fock_protocol(cfg.model, int(b.get("m_target", 1)), eta)
    if kind == "ladder":
        k0 = int(b.get("k_start", 0))
        steps = dicke_ladder(p, int(b.get("k_target", p.n_qubits)), eta, strict=strict)
        return steps[k0:]
    if kind == "ghz":
        return ghz_sequence(p, eta, strict=strict)
    if kind == "step":
        return [carrier_step(p, int(b.get("k0", 0)), eta, float(b.get("pulse_fraction", 1.0)))]
    if kind == "schedule":
        path = cfg.base_dir / _need(b, "schedule_file", "evolve")
        try:
            loaded = schedule_from_json(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read schedule {path}: {exc}") from exc
        return loaded
    raise ConfigError(f"unknown protocol {kind!r}")


def _rabi_block(cfg, b):
    p = cfg.params
    choice = EffectiveChoice("carrier", int(b.get("k0", 0)))
    eta = float(b.get("eta_d", ETA_ON))
    om = selected_rabi(p, eta, choice)
    t_half = math.pi / (2 * abs(om))
    seg = DriveSegment.from_eta(resonance_frequency(p, choice), eta, float(b.get("periods", 2.0)) * 2 * t_half)
    return choice, om, t_half, DriveSchedule([seg])


def cmd_evolve(cfg: RunConfig, out: Path, strict: bool, tol: float):
    b = cfg.block("evolve")
    model = cfg.model
    kind = b.get("protocol", "ladder")
    samples = int(b.get("sample_count", 40))
    track = [tuple(x) for x in b["track"]] if "track" in b else [(k, 0) for k in range(model.n_levels if cfg.mode == FINITE else min(model.n_levels, 4))]
    summary = {"params": params_echo(cfg), "protocol": kind, "rel_tol": tol}

    if kind == "trapping":
        if cfg.mode != FINITE:
            raise ConfigError("trapping needs mode = 'finite'")
        k0 = int(b.get("k0", 1))
        choice = EffectiveChoice("carrier", k0)
        t_unit = math.pi / (2 * abs(selected_rabi(cfg.params, ETA_ON, choice)))
        if "segment_times_T" in b:
            times = [float(x) * t_unit for x in b["segment_times_T"]]
        else:
            times = [cfg.time(x) for x in _need(b, "segment_times", "evolve")]
        sched = trapping_schedule(cfg.params, b.get("variant", "amplitude"), times, k0)
        psi0 = _initial(cfg, {"initial": b.get("initial", [k0, 0])}, model)
        res = evolve(full_generator(model), sched, psi0, samples, tol, track)
        states = interaction_states(res, cfg.params, sched)
        losses = []
        for i in range(1, len(sched), 2):
            a, c = i * samples, (i + 1) * samples
            f = np.abs(states[a:c + 1].conj() @ states[a]) ** 2
            losses.append({"segment": i, "t_start": res.times[a], "t_end": res.times[c],
                           "max_loss": float(1 - f.min())})
        summary.update(T=t_unit, T_s=float(cfg.params.to_seconds(t_unit)), off_segments=losses,
                       variant=b.get("variant", "amplitude"))
    elif kind == "rabi":
        choice, om, t_half, sched = _rabi_block(cfg, b)
        psi0 = basis_state(choice.k0, 0, model)
        track = sorted(set(track) | {(choice.k0, 0), (choice.k0 + 1, 0)})
        res = evolve(full_generator(model), sched, psi0, samples, tol, track)
        q = inversion(res, choice.k0, choice.k0 + 1)
        om_r = fit_rabi_frequency(res.times, q, 2 * abs(om))
        summary.update(rabi_fit={"Omega_R": om_r, "T": math.pi / om_r, "T_s": float(cfg.params.to_seconds(math.pi / om_r)),
                                 "T_analytic": t_half, "residual_max": float(np.max(np.abs(q - np.cos(om_r * res.times))))})
    else:
        steps = _protocol_steps(cfg, b, strict)
        if isinstance(steps, DriveSchedule):
            psi0 = _initial(cfg, b, model)
            sched = steps
            res = evolve(full_generator(model), sched, psi0, samples, tol, track)
        else:
            k_first = steps[0].intended_transition[0]
            psi0 = _initial(cfg, {"initial": b.get("initial", list(k_first))}, model)
            run = simulate_protocol(model, steps, psi0, samples, tol, track)
            res, sched = run.result, run.schedule
            summary.update(step_fidelities=run.fidelities, final_fidelity=run.final_fidelity,
                           step_end_times=[float(x) for x in sched.boundaries[1:]],
                           step_end_times_s=[float(cfg.params.to_seconds(x)) for x in sched.boundaries[1:]])
            if b.get("effective", False) and cfg.mode == FINITE:
                _, _, fid = run_full_and_effective(cfg.params, sched, [s.choice for s in steps], psi0, samples, tol, track)
                summary["full_vs_effective_min"] = float(fid.min())
    summary.update(norm_drift=res.norm_drift, nfev=res.nfev, t_final=float(res.times[-1]),
                   final_populations={f"{k},{n}": float(v[-1]) for (k, n), v in res.populations.items()})
    res.to_csv(out / "evolution.csv")
    write_json(out / "summary.json", summary)


# sweep

def _sweep_point(args):
    cfg_doc, base_dir, axis, value, tol = args
    cfg = parse_config(cfg_doc, Path(base_dir))
    b = cfg.block("sweep")
    p = cfg.params
    kind = b.get("protocol", "step")
    eta = float(b.get("eta_d", ETA_ON))
    if axis == "g":
        p = p.replace(g=cfg.freq(value))
    elif axis == "eta_d":
        eta = float(value)
    samples = int(b.get("sample_count", 20))
    k0 = int(b.get("k0", 0))
    if axis == "omega_d":
        ref = carrier_step(p, k0, eta, float(b.get("pulse_fraction", 1.0)))
        seg = DriveSegment.from_eta(cfg.freq(value), eta, ref.duration)
        res = evolve(full_generator(p), DriveSchedule([seg]), basis_state(k0, 0, p), samples, tol,
                     [(k0, 0), (k0 + 1, 0)])
        pops = {lab: float(v[-1]) for lab, v in res.populations.items()}
        return [value, pops[(k0 + 1, 0)], pops[(k0, 0)], pops[(k0 + 1, 0)], res.norm_drift]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if kind == "step":
            steps = [carrier_step(p, k0, eta, float(b.get("pulse_fraction", 1.0)))]
        elif kind == "ladder":
            steps = dicke_ladder(p, int(b.get("k_target", p.n_qubits)), eta)
        elif kind == "ghz":
            steps = ghz_sequence(p, eta)
        else:
            raise ConfigError(f"unknown sweep protocol {kind!r}")
    (ki, _), (kf, _) = steps[0].intended_transition[0], steps[-1].intended_transition[1]
    psi0 = basis_state(ki, 0, p)
    run = simulate_protocol(p, steps, psi0, samples, tol, [(ki, 0), (kf, 0)])
    pops = run.result.populations
    return [value, run.final_fidelity, float(pops[(ki, 0)][-1]), float(pops[(kf, 0)][-1]), run.result.norm_drift]


def cmd_sweep(cfg: RunConfig, out: Path, tol: float, doc: dict):
    b = cfg.block("sweep")
    axis = b.get("axis")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if cfg.mode != FINITE:
        raise ConfigError("sweeps need mode = 'finite'")
    if "values" in b:
        values = [float(v) for v in b["values"]]
    else:
        try:
            count = int(_need(b, "count", "sweep"))
            start, stop = float(_need(b, "start", "sweep")), float(_need(b, "stop", "sweep"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if count < 1:
            raise ConfigError("sweep count must be >= 1")
        values = list(np.linspace(start, stop, count)) if count > 1 else [start]
    if not values:
        raise ConfigError("sweep has no points")
    if axis == "omega_d" and b.get("protocol", "step") != "step":
        raise ConfigError("an omega_d sweep drives a single step")
    jobs = [(doc, str(cfg.base_dir), axis, v, tol) for v in values]
    workers = int(b.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    write_csv(out / "sweep.csv", [axis, "fidelity", "P_initial", "P_target", "norm_drift"], rows)
    write_json(out / "sweep.json", {"params": params_echo(cfg), "axis": axis, "points": len(rows)})


# click wiring

@click.group()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="TOML run configuration.")
@click.option("--out", "out_dir", default=".", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--strict", is_flag=True, help="Treat sideband collisions as errors (exit 3).")
@click.option("--tol", default=1e-9, show_default=True, type=float, help="Integrator relative tolerance.")
@click.pass_context
def main(ctx, config_path, out_dir, strict, tol):
    """Spectra, sideband catalogs, evolutions and sweeps of the driven Dicke model."""
    ctx.obj = {"config": config_path, "out": Path(out_dir), "strict": strict, "tol": tol}


def _run(ctx, fn):
    o = ctx.obj
    try:
        if not 1e-14 < o["tol"] < 1e-3:
            raise ConfigError(f"--tol must lie in (1e-14, 1e-3), got {o['tol']}")
        cfg = load_config(o["config"])
        o["out"].mkdir(parents=True, exist_ok=True)
        fn(cfg, o)
    except CollisionError as exc:
        click.echo(f"collision: {exc}", err=True)
        sys.exit(EXIT_COLLISION)
    except (IntegrationError, FloatingPointError, np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except (ConfigError, ResonanceError, ValueError, KeyError, TypeError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@main.command()
@click.pass_context
def spectrum(ctx):
    """Write E_{n,k} and the gaps Delta_k."""
    _run(ctx, lambda cfg, o: cmd_spectrum(cfg, o["out"]))


@main.command()
@click.pass_context
def sidebands(ctx):
    """Write the RWA report for the configured drive."""
    _run(ctx, lambda cfg, o: cmd_sidebands(cfg, o["out"], o["strict"]))


@main.command(name="evolve")
@click.pass_context
def evolve_cmd(ctx):
    """Simulate a protocol or schedule under the full Hamiltonian."""
    _run(ctx, lambda cfg, o: cmd_evolve(cfg, o["out"], o["strict"], o["tol"]))


@main.command()
@click.pass_context
def sweep(ctx):
    """Sweep g, omega_d or eta_d and write one row per point."""
    def go(cfg, o):
        with open(o["config"], "rb") as fh:
            doc = tomllib.load(fh)
        cmd_sweep(cfg, o["out"], o["tol"], doc)

    _run(ctx, go)


if __name__ == "__main__":
    main()
