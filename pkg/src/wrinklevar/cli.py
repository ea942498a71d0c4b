"""Command line: ``wrinklevar <verify|minimize|sweep|analyze>``.

Exit codes: 0 success, 1 diagnostics (non-convergence, failed check),
2 usage or configuration errors.
"""
import argparse
import logging
import os
import sys

from . import discretization as disc
from ._backend import default_backend
from .analysis import equilibrium_residual, wrinkle_metrics
from .config import ConfigError, RunConfig, load_config, serialize
from .minimizer import (
    InfeasibleState,
    assemble_energy,
    continuation_sweep,
    extended_trace_state,
    minimize,
    perturb_out_of_plane,
)
from .verify import run_suite

log = logging.getLogger("wrinklevar")


def _g(x):
    return "nan" if x is None else f"{x:.17g}"


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _manifest(cfg, command, **status):
    lines = [f"command = {command}", f"backend = {cfg.minimizer.backend or default_backend()}"]
    lines += [f"{k} = {v}" for k, v in status.items()]
    return serialize(cfg) + "\n".join(lines) + "\n"


def _energy_lines(prefix, energy):
    return [
        f"{prefix}membrane = {_g(energy.membrane)}",
        f"{prefix}bending = {_g(energy.bending)}",
        f"{prefix}load = {_g(energy.load)}",
        f"{prefix}total = {_g(energy.total)}",
    ]


def _metric_lines(m):
    return [
        f"amplitude = {_g(m.amplitude)}",
        f"wavelength = {_g(m.wavelength)}",
        f"sign_change_count = {m.sign_change_count}",
    ]


def cmd_verify(cfg, out):
    reports = run_suite(cfg.material, seed=cfg.seed, n_h1=cfg.verify.samples_h1,
                        n_h2=cfg.verify.samples_h2, workers=cfg.verify.workers)
    lines = [r.line() for r in reports]
    ok = all(r.passed for r in reports)
    _write(os.path.join(out, "report.txt"), "\n".join(lines) + "\n")
    _write(os.path.join(out, "manifest.txt"), _manifest(cfg, "verify", passed=ok))
    print("\n".join(lines))
    return 0 if ok else 1


def cmd_minimize(cfg, out):
    grid = cfg.grid
    bc = cfg.boundary.spec()
    loads = cfg.loads.spec()
    start = extended_trace_state(grid, bc)
    start = perturb_out_of_plane(start, cfg.minimizer.amplitude(grid), cfg.minimizer.mode, bc)
    res = minimize(start, cfg.material, loads, bc, cfg.minimizer)
    res.trace.write_csv(os.path.join(out, "trace.csv"))
    disc.write_fields_csv(os.path.join(out, "fields.csv"), res.state, bc)
    metrics = wrinkle_metrics(res.state)
    lines = [
        f"converged = {int(res.converged)}",
        f"message = {res.message}",
        f"iterations = {res.iterations}",
        f"initial_total = {_g(res.initial_energy)}",
        *_energy_lines("", res.energy),
        f"min_J = {_g(res.trace.min_J[-1])}",
        f"gradnorm = {_g(res.trace.gradnorm[-1])}",
        *_metric_lines(metrics),
    ]
    _write(os.path.join(out, "report.txt"), "\n".join(lines) + "\n")
    _write(os.path.join(out, "manifest.txt"),
           _manifest(cfg, "minimize", converged=int(res.converged)))
    print(f"total energy {res.energy.total:.17g} ({res.message}, {res.iterations} iterations)")
    return 0 if res.converged else 1


SWEEP_COLUMNS = ("lambda", "membrane", "bending", "load", "total", "amplitude",
                 "wavelength", "count", "converged")


def cmd_sweep(cfg, out):
    sw = cfg.sweep
    bc = cfg.boundary.spec()
    steps = continuation_sweep(sw.lambda_from, sw.lambda_to, sw.steps, cfg.material,
                               cfg.loads.spec(), bc, cfg.minimizer, grid=cfg.grid)
    rows = [",".join(SWEEP_COLUMNS)]
    for k, st in enumerate(steps):
        e, m = st.energy, st.metrics
        rows.append(",".join([
            _g(st.stretch), _g(e.membrane), _g(e.bending), _g(e.load), _g(e.total),
            _g(m.amplitude), _g(m.wavelength), str(m.sign_change_count),
            str(int(st.converged)),
        ]))
        st.trace.write_csv(os.path.join(out, f"trace_{k:03d}.csv"))
        disc.write_fields_csv(os.path.join(out, f"fields_{k:03d}.csv"), st.state,
                              bc.with_stretch(st.stretch))
    _write(os.path.join(out, "sweep.csv"), "\n".join(rows) + "\n")
    last = steps[-1]
    last.trace.write_csv(os.path.join(out, "trace.csv"))
    disc.write_fields_csv(os.path.join(out, "fields.csv"), last.state,
                          bc.with_stretch(last.stretch))
    ok = all(st.converged for st in steps)
    lines = [f"steps = {len(steps)}", f"all_converged = {int(ok)}"]
    for st in steps:
        lines.append(
            f"lambda={_g(st.stretch)} total={_g(st.energy.total)} "
            f"count={st.metrics.sign_change_count} converged={int(st.converged)}"
        )
    _write(os.path.join(out, "report.txt"), "\n".join(lines) + "\n")
    _write(os.path.join(out, "manifest.txt"), _manifest(cfg, "sweep", converged=int(ok)))
    print("\n".join(rows))
    return 0 if ok else 1


def cmd_analyze(cfg, out, fields_path=None):
    grid = cfg.grid
    bc = cfg.boundary.spec()
    path = fields_path or os.path.join(out, "fields.csv")
    state = disc.read_fields_csv(path, grid)
    loads = cfg.loads.spec()
    energy = assemble_energy(state, cfg.material, loads, bc, jmin=cfg.minimizer.jmin)
    metrics = wrinkle_metrics(state)
    rep = equilibrium_residual(state, cfg.material, cfg.analysis.n,
                               cfg.analysis.test_functions, cfg.seed, bc=bc, loads=loads)
    lines = [
        f"fields = {os.path.basename(path)}",
        *_energy_lines("", energy),
        f"min_J = {_g(float(disc.nodal_J(state).min()))}",
        *_metric_lines(metrics),
        f"omega_n_cutoff = {_g(rep.n)}",
        f"omega_n_fraction = {_g(rep.measure_fraction)}",
        f"residual_max = {_g(rep.max_abs)}",
        "residuals = " + ",".join(_g(r) for r in rep.residuals),
    ]
    _write(os.path.join(out, "analysis.txt"), "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


COMMANDS = {"verify": cmd_verify, "minimize": cmd_minimize, "sweep": cmd_sweep,
            "analyze": cmd_analyze}


def build_parser():
    p = argparse.ArgumentParser(prog="wrinklevar", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--out", help="output directory (overrides 'out' in the config)")
    p.add_argument("--seed", type=int, help="sampling seed (overrides 'seed')")
    p.add_argument("--fields", help="analyze: fields CSV to read (default <out>/fields.csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_command(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
    except (OSError, ConfigError) as exc:
        print(f"wrinklevar: config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            print("wrinklevar: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        cfg = _with(cfg, seed=args.seed)
    if args.out:
        cfg = _with(cfg, out=args.out)
    os.makedirs(cfg.out, exist_ok=True)
    _write(os.path.join(cfg.out, "config.txt"), serialize(cfg))
    try:
        if args.command == "analyze":
            return cmd_analyze(cfg, cfg.out, args.fields)
        return COMMANDS[args.command](cfg, cfg.out)
    except (InfeasibleState, ValueError, OSError) as exc:
        print(f"wrinklevar: {exc}", file=sys.stderr)
        return 1


def _with(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
