"""Command-line driver: run scenarios and compare methods.

    dickecr simulate --preset fig1 [--out DIR] [--strict] [--parallel]
    dickecr compare  --config my.cfg [--out DIR] [--strict] [--parallel]

Exit codes: 0 success, 2 configuration error, 3 numerical failure or
truncation violation. ``DICKECR_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import envelope, obs, pert, sca
from .cheby import ChebyshevPropagator, PropagationAborted, PropagationError
from .model import build_dicke_hamiltonian
from .scenario import ConfigError, Scenario, load_config, load_preset, to_text
from .states import CutoffError, cutoff_ok, initial_state, product_state
from .timeseries import TimeSeries, fmt

log = logging.getLogger("dickecr")

TRUNCATION_LIMIT = 1e-10
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class TruncationError(RuntimeError):
    """Fock-space tail weight above the limit under --strict."""


@dataclass
class MethodResult:
    method: str
    series: TimeSeries
    husimi: dict[tuple[str, int], obs.HusimiGrid] = field(default_factory=dict)
    schmidt: dict[int, obs.SchmidtDecomposition] = field(default_factory=dict)
    schmidt_husimi: dict[tuple[int, int, str], obs.HusimiGrid] = field(default_factory=dict)
    max_truncation: float = 0.0


@dataclass
class RunResult:
    scenario: Scenario
    results: dict[str, MethodResult]
    summary: dict[str, str]
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------- sampling

def sample_times(sc: Scenario) -> np.ndarray:
    if sc.sampling == "uniform":
        return np.linspace(0.0, sc.t_max, sc.n_samples)
    period = 2 * math.pi / abs(sc.delta)
    anchors = np.arange(0.0, sc.t_max - period + 1e-9 * sc.t_max, sc.anchor_step)
    return envelope.window_times(anchors, period, sc.window_samples).ravel()


def _all_times(sc: Scenario, times: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate([times, sc.husimi_times, sc.schmidt_times]))


def _ket_channels(sc: Scenario, ket, h=None) -> dict[str, float]:
    out = {}
    want = set(sc.outputs)
    if want & {"jx", "jy", "jz"}:
        spin = obs.spin_expectations(ket)
        out.update({k: v for k, v in spin.items() if k in want})
    if "entropy" in want:
        out["entropy"] = obs.entanglement_entropy(ket)
    if "field_var" in want:
        out["field_var"] = obs.field_variance(ket)
    if "norm" in want:
        out["norm"] = ket.norm()
    if "energy" in want and h is not None:
        out["energy"] = float(np.vdot(ket.amps, h @ ket.amps).real)
    return out


def _grids(sc: Scenario):
    f_axes = (np.linspace(*sc.field_re[:2], sc.field_re[2]), np.linspace(*sc.field_im[:2], sc.field_im[2]))
    a_axes = obs.atomic_grid(sc.atom_theta_max, sc.atom_n_theta, sc.atom_n_phi)
    return f_axes, a_axes


def _snapshots(sc: Scenario, res: MethodResult, t: float, ket):
    f_axes, a_axes = _grids(sc)
    meta = {"t": fmt(t), "method": res.method}
    for k, ts in enumerate(sc.husimi_times):
        if ts != t:
            continue
        if "husimi_field" in sc.outputs:
            res.husimi[("field", k)] = obs.field_husimi(ket, *f_axes, meta=meta)
        if "husimi_atom" in sc.outputs:
            res.husimi[("atom", k)] = obs.atomic_husimi(ket, *a_axes, meta=meta)
    if "schmidt" not in sc.outputs:
        return
    for k, ts in enumerate(sc.schmidt_times):
        if ts != t:
            continue
        dec = obs.schmidt(ket, sc.schmidt_k)
        res.schmidt[k] = dec
        for c in range(min(2, dec.coefficients.size)):
            comp = product_state(dec.atomic_vectors[c], dec.field_vectors[c], ket.basis)
            cmeta = dict(meta, component=str(c), weight=fmt(dec.coefficients[c]))
            if "husimi_field" in sc.outputs:
                res.schmidt_husimi[(k, c, "field")] = obs.field_husimi(comp, *f_axes, meta=cmeta)
            if "husimi_atom" in sc.outputs:
                res.schmidt_husimi[(k, c, "atom")] = obs.atomic_husimi(comp, *a_axes, meta=cmeta)


def _split(sc: Scenario, times, all_times, records) -> TimeSeries:
    keep = np.isin(all_times, times)
    ts = TimeSeries.from_records(all_times, records)
    return TimeSeries(ts.times[keep], {k: v[keep] for k, v in ts.channels.items()})


# ---------------------------------------------------------------- methods

def run_exact(sc: Scenario, times) -> MethodResult:
    p = sc.params
    h = build_dicke_hamiltonian(p)
    psi0 = initial_state(p.basis, sc.theta0, sc.alpha0, sc.phi0)
    all_t = _all_times(sc, times)
    res = MethodResult("exact", TimeSeries([]))
    snaps = set(sc.husimi_times) | set(sc.schmidt_times)
    prop = ChebyshevPropagator(h, tol=sc.tol)
    records = []
    psi, t_cur = psi0.amps, 0.0
    for t in all_t:
        psi = prop.evolve(psi, t - t_cur)
        t_cur = t
        ket = psi0.with_amps(psi)
        records.append(_ket_channels(sc, ket, h))
        res.max_truncation = max(res.max_truncation, obs.truncation_weight(ket))
        if t in snaps:
            _snapshots(sc, res, t, ket)
    res.series = _split(sc, times, all_t, records)
    res.series.meta.update({"method": "exact", "kernel_backend": _backend(), "tol": repr(sc.tol)})
    return res


def _backend():
    from . import kernels

    return kernels.BACKEND


def run_pert(sc: Scenario, times) -> MethodResult:
    p = sc.params
    h = build_dicke_hamiltonian(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", pert.ValidityWarning)
        pert.check_validity(p, sc.alpha0)
    all_t = _all_times(sc, times)
    res = MethodResult("pert", TimeSeries([]))
    snaps = set(sc.husimi_times) | set(sc.schmidt_times)
    records = []
    for t in all_t:
        _, ket = pert.perturbative_state(t, p, sc.theta0, sc.alpha0, sc.phi0, check=False)
        records.append(_ket_channels(sc, ket, h))
        res.max_truncation = max(res.max_truncation, obs.truncation_weight(ket))
        if t in snaps:
            _snapshots(sc, res, t, ket)
    res.series = _split(sc, times, all_t, records)
    res.series.meta["method"] = "pert"
    return res


def run_classical(sc: Scenario, times, method: str) -> MethodResult:
    p = sc.params
    st = sca.ClassicalState.coherent(sc.spin_j, sc.theta0, sc.alpha0, sc.phi0)
    tr = sca.sample(p, st, times, method, dt=sc.rk4_dt or None)
    keep = {k: v for k, v in tr.channels.items() if k in ("jx", "jy", "jz") and k in sc.outputs}
    return MethodResult(method, TimeSeries(tr.times, keep, {"method": method, "integrator": "rk4"}))


def _run_method(sc: Scenario, times, method: str) -> MethodResult:
    if method == "exact":
        return run_exact(sc, times)
    if method == "pert":
        return run_pert(sc, times)
    return run_classical(sc, times, method)


# ---------------------------------------------------------------- metrics

def envelope_series(sc: Scenario, series: TimeSeries, channel: str = "jz"):
    """(anchor times, envelope, window mean) of ``channel``."""
    v = series[channel]
    if sc.sampling == "windowed":
        n = sc.window_samples
        env, mean = envelope.window_stats(v.reshape(-1, n))
        return series.times[::n], env, mean
    period = 2 * math.pi / abs(sc.delta)
    dt = series.times[1] - series.times[0]
    w = int(round(period / dt))
    if w < 4:
        return None
    env, mean = envelope.running_envelope(v, w)
    return series.times[: env.size], env, mean


def method_metrics(sc: Scenario, res: MethodResult) -> dict[str, str]:
    out: dict[str, str] = {}
    m = res.method
    s = res.series
    freqs = pert.effective_frequencies(sc.params, sc.alpha0)
    tf = 2 * math.pi / sc.omega
    if "jz" in s.channels:
        es = envelope_series(sc, s)
        if es is not None:
            t_a, env, mean = es
            out[f"{m}.envelope_initial"] = fmt(env[0])
            if math.isfinite(freqs.T_E) and t_a[-1] >= 0.5 * freqs.T_E - 0.5 * tf:
                k = int(np.argmin(np.abs(t_a - 0.5 * freqs.T_E)))
                out[f"{m}.envelope_half_TE_ratio"] = fmt(env[k] / env[0]) if env[0] > 0 else "nan"
            if math.isfinite(freqs.T_E) and t_a[-1] >= 0.7 * freqs.T_E:
                sel = (t_a >= 0.3 * freqs.T_E) & (t_a <= 0.7 * freqs.T_E)
                out[f"{m}.plateau_mean"] = fmt(float(mean[sel].mean()))
            rev = envelope.detect_revival(t_a, env, tf)
            if rev is not None:
                out[f"{m}.revival_time"] = fmt(rev.time)
                out[f"{m}.revival_field_periods"] = fmt(rev.time / tf)
    for name in ("entropy", "norm", "energy"):
        if name in s.channels:
            v = s[name]
            key = {"entropy": "entropy_max", "norm": "norm_drift_max", "energy": "energy_drift_max"}[name]
            val = v.max() if name == "entropy" else np.max(np.abs(v - v[0]))
            if name == "energy" and v[0] != 0:
                val = val / abs(v[0])
            out[f"{m}.{key}"] = fmt(float(val))
    for (kind, k), g in sorted(res.husimi.items()):
        peaks = obs.sphere_peaks(g) if kind == "atom" else g.peaks()
        out[f"{m}.husimi_{kind}_{k}.peaks"] = str(len(peaks))
    for k, dec in sorted(res.schmidt.items()):
        out[f"{m}.schmidt_{k}.top"] = " ".join(fmt(c) for c in dec.coefficients[:2])
    if m in ("exact", "pert"):
        out[f"{m}.max_truncation_weight"] = fmt(res.max_truncation)
    return out


def scenario_summary(sc: Scenario) -> dict[str, str]:
    p = sc.params
    f = pert.effective_frequencies(p, sc.alpha0)
    tf = 2 * math.pi / sc.omega
    out = {
        "scenario": sc.name,
        "T_E": fmt(f.T_E), "T_S": fmt(f.T_S),
        "T_E_field_periods": fmt(f.T_E / tf), "T_S_field_periods": fmt(f.T_S / tf),
        "validity_ratio": fmt(f.validity_ratio),
    }
    if f.delta_theta is not None:
        out["delta_theta"] = fmt(f.delta_theta)
        out["plateau_prediction"] = fmt(pert.collapse_plateau(p, sc.theta0, sc.alpha0.real))
    return out


# ---------------------------------------------------------------- run / compare

def run(sc: Scenario, out_dir=None, strict: bool = False, parallel: bool = False) -> RunResult:
    """Run every method of ``sc``; write files into ``out_dir`` when given."""
    p = sc.params
    if not cutoff_ok(sc.alpha0, p.n_max):
        raise CutoffError(f"n_max={p.n_max} too small for alpha0={sc.alpha0}")
    times = sample_times(sc)
    if parallel and len(sc.methods) > 1:
        with ThreadPoolExecutor(max_workers=len(sc.methods)) as pool:
            done = list(pool.map(lambda m: _run_method(sc, times, m), sc.methods))
    else:
        done = [_run_method(sc, times, m) for m in sc.methods]
    results = {r.method: r for r in done}
    summary = scenario_summary(sc)
    notes = []
    for r in done:
        summary.update(method_metrics(sc, r))
        if r.max_truncation > TRUNCATION_LIMIT:
            msg = (f"{r.method}: Fock tail weight {r.max_truncation:.3e} exceeds {TRUNCATION_LIMIT:g}; "
                   f"increase n_max")
            if strict:
                raise TruncationError(msg)
            log.warning(msg)
            notes.append(msg)
    rr = RunResult(sc, results, summary, notes)
    if out_dir is not None:
        write_outputs(rr, Path(out_dir))
    return rr


def write_outputs(rr: RunResult, out: Path) -> None:
    sc = rr.scenario
    out.mkdir(parents=True, exist_ok=True)
    for m, res in rr.results.items():
        for ch in res.series.channels:
            ts = TimeSeries(res.series.times, {ch: res.series[ch]},
                            dict(res.series.meta, scenario=sc.name, channel=ch))
            ts.save(out / f"{m}_{ch}.dat", omega=sc.omega, delta=sc.delta)
        for (kind, k), g in sorted(res.husimi.items()):
            g.save(out / f"{m}_husimi_{kind}_{k}.dat")
        if res.schmidt:
            lines = [f"# scenario = {sc.name}", f"# method = {m}",
                     "# columns: t " + " ".join(f"p{i + 1}" for i in range(sc.schmidt_k))]
            for k, dec in sorted(res.schmidt.items()):
                vals = list(dec.coefficients) + [0.0] * (sc.schmidt_k - dec.coefficients.size)
                lines.append(" ".join(fmt(x) for x in [sc.schmidt_times[k], *vals]))
            (out / f"{m}_schmidt.dat").write_text("\n".join(lines) + "\n", newline="\n")
        for (k, c, kind), g in sorted(res.schmidt_husimi.items()):
            g.save(out / f"{m}_schmidt_{k}_component{c}_husimi_{kind}.dat")
    (out / "summary.txt").write_text("".join(f"{k} = {v}\n" for k, v in rr.summary.items()), newline="\n")
    (out / "manifest.cfg").write_text(to_text(sc), newline="\n")


def compare_series(a: TimeSeries, b: TimeSeries) -> dict[str, tuple[float, float]]:
    """Per-channel (sup, rms) differences over the channels both series carry."""
    if a.times.shape != b.times.shape or np.any(a.times != b.times):
        raise ValueError("series are sampled at different times")
    out = {}
    for ch in a.channels:
        if ch in b.channels:
            d = a[ch] - b[ch]
            out[ch] = (float(np.max(np.abs(d))), float(np.sqrt(np.mean(d * d))))
    return out


def compare(sc: Scenario, out_dir=None, strict: bool = False, parallel: bool = False):
    """Run ``sc`` and report pairwise channel differences plus envelope metrics."""
    if len(sc.methods) < 2:
        raise ConfigError("compare needs at least two methods")
    rr = run(sc, out_dir, strict, parallel)
    lines = [f"# scenario = {sc.name}", "# pair channel sup rms"]
    report = {}
    for a, b in itertools.combinations(sc.methods, 2):
        diffs = compare_series(rr.results[a].series, rr.results[b].series)
        for ch, (sup, rms) in diffs.items():
            report[(a, b, ch)] = (sup, rms)
            lines.append(f"{a}-{b} {ch} {fmt(sup)} {fmt(rms)}")
    lines.append("# envelope metrics")
    for k, v in rr.summary.items():
        if any(s in k for s in ("envelope", "revival", "plateau")):
            lines.append(f"{k} = {v}")
    text = "\n".join(lines) + "\n"
    if out_dir is not None:
        (Path(out_dir) / "compare.txt").write_text(text, newline="\n")
    return report, text, rr


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dickecr", description="Collapse and revival in the Dicke model")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "compare"):
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset")
        src.add_argument("--config")
        sp.add_argument("--out", default=None, help="output directory (default $DICKECR_OUT or ./out/<name>)")
        sp.add_argument("--strict", action="store_true", help="treat truncation warnings as errors")
        sp.add_argument("--parallel", action="store_true", help="run methods concurrently")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        sc = load_preset(args.preset) if args.preset else load_config(args.config)
        out = args.out or os.path.join(os.environ.get("DICKECR_OUT", "out"), sc.name)
        if args.command == "simulate":
            rr = run(sc, out, args.strict, args.parallel)
            text = "".join(f"{k} = {v}\n" for k, v in rr.summary.items())
        else:
            _, text, _ = compare(sc, out, args.strict, args.parallel)
    except (ConfigError, obs.GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CutoffError, TruncationError, PropagationError, PropagationAborted, sca.IntegrationError,
            pert.ValidityError, pert.ResonanceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(text)
    print(f"outputs written to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
