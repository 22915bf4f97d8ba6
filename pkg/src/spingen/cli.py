"""Command-line interface: fit datasets, scan potentials, run chains, plot.

Commands write delimited CSV (with `# key: value` comment headers carrying
the scan kind and parameters) plus a JSON manifest per run; `--plot`
renders the matching figure next to the CSV.

Exit codes: 0 success, 2 usage error, 3 numeric-domain error, 4 resource
limit.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import coexistence as cx
from . import dataset as ds
from . import meanfield as mf
from . import montecarlo as mc
from . import replica as rp
from .errors import NumericDomainError, TableSizeError
from .manifest import RunManifest, Stopwatch
from .spinspace import CouplingVector, n_configs

CSV_SCHEMA = "spingen-csv v1"


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(":")
        return np.linspace(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise ValueError(f"grid must look like lo:hi:count, got {text!r}") from exc


def _parse_floats(text: str) -> list[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(item) for item in text.split(",") if item.strip()]


def _write_csv(path, kind: str, params: dict, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# {CSV_SCHEMA}\n")
        handle.write(f"# kind: {kind}\n")
        handle.write(f"# params: {json.dumps(params, sort_keys=True)}\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                "" if isinstance(v, float) and np.isnan(v) else repr(v)
                if isinstance(v, float) else v
                for v in row
            )


def read_csv(path):
    """Read back a CSV written by this package: (kind, params, header, columns)."""
    kind, params = None, {}
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        header = None
        for line in handle:
            if line.startswith("#"):
                text = line[1:].strip()
                if text.startswith("kind:"):
                    kind = text.split(":", 1)[1].strip()
                elif text.startswith("params:"):
                    params = json.loads(text.split(":", 1)[1].strip())
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = cells
            elif cells and "".join(cells).strip():
                rows.append(
                    [np.nan if cell == "" else cell for cell in cells]
                )
    if header is None:
        raise ValueError(f"{path}: no data rows")
    columns = {}
    for i, name in enumerate(header):
        values = [row[i] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in values])
        except (TypeError, ValueError):
            columns[name] = np.array([str(v) for v in values])
    return kind, params, header, columns


def _maybe_plot(args, csv_path) -> list[str]:
    if not getattr(args, "plot", False):
        return []
    from . import plotting

    figure_path = os.path.splitext(csv_path)[0] + ".png"
    plotting.render(csv_path, figure_path)
    return [figure_path]


# ---------------------------------------------------------------- fit


def cmd_fit(args) -> int:
    timer = Stopwatch().__enter__()
    data = ds.read_dataset_csv(args.dataset, n_spins=args.n_spins,
                               gauge_temperature=args.gauge_temp)
    explicit = None
    if args.unrep_energies:
        explicit = {}
        with open(args.unrep_energies, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header[:2]] != ["config", "energy"]:
                raise ValueError(
                    f"{args.unrep_energies}: expected header 'config,energy'"
                )
            for row in reader:
                if not row or not "".join(row).strip():
                    continue
                index, _ = ds.parse_config_label(row[0], data.n_spins)
                explicit[index] = float(row[1])
    model = ds.standardize(data, floor=args.floor, explicit_energies=explicit)

    prefix = args.out or os.path.splitext(args.dataset)[0]
    couplings_path = prefix + ".couplings.csv"
    standard_path = prefix + ".standard.csv"
    params = {
        "dataset": str(args.dataset),
        "n_spins": model.n_spins,
        "gauge_temperature": args.gauge_temp,
        "floor": args.floor,
        "unrep_energies": args.unrep_energies,
    }
    n = model.n_spins
    _write_csv(
        couplings_path, "couplings", params, ["subset", "coupling"],
        (
            (ds.config_label(k, n), float(model.standard_couplings.values[k]))
            for k in range(n_configs(n))
        ),
    )
    _write_csv(
        standard_path, "standard-weights", params,
        ["config", "weight", "energy"],
        (
            (
                ds.config_label(i, n),
                float(model.standard_weights[i]),
                float(model.standard_energies.values[i]),
            )
            for i in range(n_configs(n))
        ),
    )
    outputs = [couplings_path, standard_path]
    timer.__exit__()
    manifest = RunManifest(
        command="fit", argv=sys.argv[1:], parameters=params,
        outputs=outputs, wall_clock_seconds=timer.elapsed,
    )
    manifest.write(prefix + ".manifest.json")
    print(f"wrote {couplings_path} and {standard_path}")
    return 0


# ---------------------------------------------------------------- scan


def _scan_a_surface(args):
    grid = _parse_grid(args.grid or "-3:3:61")
    pair_values = _parse_floats(args.j12) if args.j12 else [-args.coupling, 0.0]
    standard = mf.two_spin_standard_model(args.coupling, args.gauge_temp)
    from .spinspace import energies_from_couplings
    from .thermo import Ensemble, learning_potential

    rows = []
    for j12 in pair_values:
        for j1 in grid:
            for j2 in grid:
                trial = CouplingVector(
                    values=[0.0, j1, j2, j12], n_spins=2
                )
                ens = Ensemble.driven(
                    standard, energies_from_couplings(trial), args.temp
                )
                rows.append((j12, j1, j2, learning_potential(ens)))
    header = ["j12", "j1", "j2", "potential"]
    params = {
        "coupling": args.coupling, "temperature": args.temp,
        "gauge_temperature": args.gauge_temp, "j12_values": pair_values,
    }
    return "a-surface", params, header, rows


def _scan_meanfield(args):
    grid = _parse_grid(args.grid or "-0.995:0.995:199")
    couplings = _parse_floats(args.couplings) if args.couplings else [0.5, 1.0, 1.5]
    rows = []
    for j in couplings:
        model = mf.MeanFieldModel(
            CouplingVector(values=[0.0, 0.0, 0.0, -j], n_spins=2), args.temp
        )
        reduced = mf.slice_free_energy(model, grid)
        exact = mf.exact_slice_free_energy(j, args.temp, grid, args.gauge_temp)
        for m, r, e in zip(grid, reduced, exact):
            rows.append((j, float(m), float(r), float(e)))
    params = {"temperature": args.temp, "gauge_temperature": args.gauge_temp,
              "couplings": couplings}
    return "meanfield-slice", params, ["coupling", "m", "reduced", "exact"], rows


def _scan_branches(args):
    grid = _parse_grid(args.grid or "-0.35:0.35:141")
    sizes = _parse_ints(args.n_replicas) if args.n_replicas else [4, 16, 64]
    model = mf.MeanFieldModel(
        CouplingVector(values=[0.0, 0.0, 0.0, -args.coupling], n_spins=2),
        args.temp,
    )
    curves = mf.restricted_gibbs_branches(model, grid)
    eq = {
        nr: [
            rp.equilibrium_gibbs_per_spin(
                rp.ReplicaModel(args.coupling, args.temp, nr), h, -h
            )
            for h in grid
        ]
        for nr in sizes
    }
    header = ["h", "branch_plus", "branch_minus"] + [f"eq_nr{nr}" for nr in sizes]
    rows = []
    for i, h in enumerate(grid):
        row = [
            float(h),
            float(curves.gibbs_plus[i]) / 2.0,
            float(curves.gibbs_minus[i]) / 2.0,
        ]
        row += [float(eq[nr][i]) for nr in sizes]
        rows.append(tuple(row))
    params = {"coupling": args.coupling, "temperature": args.temp,
              "n_replicas": sizes, "per_spin": True}
    return "gibbs-branches", params, header, rows


def _scan_replica(args):
    sizes = _parse_ints(args.n_replicas) if args.n_replicas else [4, 16, 64]
    model2 = mf.MeanFieldModel(
        CouplingVector(values=[0.0, 0.0, 0.0, -args.coupling], n_spins=2),
        args.temp,
    )
    if args.observable == "magnetization":
        grid = _parse_grid(args.grid or "-0.35:0.35:141")
        curves = mf.restricted_gibbs_branches(model2, grid)
        header = ["h", "mf_plus", "mf_minus"] + [f"eq_nr{nr}" for nr in sizes]
        eq = {
            nr: rp.magnetization_curve(
                rp.ReplicaModel(args.coupling, args.temp, nr), grid
            )
            for nr in sizes
        }
        rows = []
        for i, h in enumerate(grid):
            row = [float(h), float(curves.m_plus[i]), float(curves.m_minus[i])]
            row += [float(eq[nr][i]) for nr in sizes]
            rows.append(tuple(row))
        kind = "replica-magnetization"
    else:  # helmholtz
        grid = _parse_grid(args.grid or "-0.96:0.96:97")
        header = ["m", "mf"] + [f"eq_nr{nr}" for nr in sizes] + [
            f"cost_nr{nr}" for nr in sizes
        ]
        mf_curve = mf.slice_free_energy(model2, grid) / 2.0
        eq = {
            nr: rp.equilibrium_helmholtz(
                rp.ReplicaModel(args.coupling, args.temp, nr), grid
            ).free_energy
            for nr in sizes
        }
        cost = {}
        for nr in sizes:
            model = rp.ReplicaModel(args.coupling, args.temp, nr)
            values = np.full(grid.shape, np.nan)
            for i, m in enumerate(grid):
                a = m * nr
                if abs(a - round(a)) < 1e-9 and (round(a) - nr) % 2 == 0:
                    values[i] = rp.density_cost_per_spin(model, float(m))
            cost[nr] = values
        rows = []
        for i, m in enumerate(grid):
            row = [float(m), float(mf_curve[i])]
            row += [float(eq[nr][i]) for nr in sizes]
            row += [float(cost[nr][i]) for nr in sizes]
            rows.append(tuple(row))
        kind = "replica-helmholtz"
    params = {"coupling": args.coupling, "temperature": args.temp,
              "n_replicas": sizes, "per_spin": True,
              "observable": args.observable}
    return kind, params, header, rows


def _scan_coexistence(args):
    pair, meta = cx.borderline_pair(
        n_spins=args.n_spins, gauge_temperature=args.gauge_temp
    )
    t0 = cx.solve_coexistence_temperature(pair)
    params = {"construction": meta, "coexistence_temperature": t0,
              "observable": args.observable}
    if args.observable == "spectra":
        header = ["energy", "log_degeneracy", "label"]
        rows = [
            (float(e), float(ld), spec.label)
            for spec in (pair.true_states, pair.false_states)
            for e, ld in zip(spec.energies, spec.log_degeneracies)
        ]
        for label, spec in (("true", pair.true_states), ("false", pair.false_states)):
            q = cx.canonical_quantities(spec, args.gauge_temp)
            params[f"tangent_{label}"] = {"energy": q.energy, "entropy": q.entropy}
        return "coexistence-spectra", params, header, rows
    if args.observable == "canonical":
        grid = _parse_grid(args.grid or "0.5:2.0:301")
        curves = cx.equilibrium_two_phase(pair, grid)
        header = [
            "temperature", "energy_true", "energy_false", "energy_eq",
            "entropy_true", "entropy_false", "entropy_eq", "heat_capacity_eq",
        ]
        rows = [
            tuple(
                float(v)
                for v in (
                    curves.temperatures[i], curves.energy_true[i],
                    curves.energy_false[i], curves.energy_equilibrium[i],
                    curves.entropy_true[i], curves.entropy_false[i],
                    curves.entropy_equilibrium[i],
                    curves.heat_capacity_equilibrium[i],
                )
            )
            for i in range(grid.size)
        ]
        return "coexistence-canonical", params, header, rows
    # tilted potential at fixed retrieval temperatures
    temps = _parse_floats(args.temps) if args.temps else [0.95, 1.0, 1.05]
    rows = []
    for t in temps:
        for spec in (pair.true_states, pair.false_states):
            sweep = cx.microcanonical_curve(spec, (t / 50.0, t * 50.0), 80)
            e_grid = np.linspace(sweep[1][2], sweep[1][-3], args.points)
            tilt = cx.tilted_potential(spec, t, e_grid)
            rows += [
                (float(t), spec.label, float(e), float(v))
                for e, v in zip(tilt.energies, tilt.values)
            ]
            params[f"minimum_{spec.label}_T{t}"] = {
                "energy": tilt.minimizer, "value": tilt.minimum,
            }
    header = ["temperature", "label", "energy", "tilted_potential"]
    return "coexistence-tilted", params, header, rows


def cmd_scan(args) -> int:
    with Stopwatch() as timer:
        builders = {
            "a-surface": _scan_a_surface,
            "meanfield": _scan_meanfield,
            "branches": _scan_branches,
            "replica": _scan_replica,
            "coexistence": _scan_coexistence,
        }
        kind, params, header, rows = builders[args.kind](args)
        out = args.out or f"{args.kind}.csv"
        _write_csv(out, kind, params, header, rows)
        outputs = [out] + _maybe_plot(args, out)
    manifest = RunManifest(
        command="scan", argv=sys.argv[1:], parameters={"kind": args.kind, **params},
        outputs=outputs, wall_clock_seconds=timer.elapsed,
    )
    manifest.write(os.path.splitext(out)[0] + ".manifest.json")
    print(f"wrote {', '.join(outputs)}")
    return 0


# ---------------------------------------------------------------- mc


def cmd_mc(args) -> int:
    with Stopwatch() as timer:
        model = rp.ReplicaModel(args.coupling, args.temp, args.n_replicas)
        seeds = mc.spawn_seeds(args.seed, args.chains)
        configs = [
            mc.ChainConfig(
                model, seed=s, n_sweeps=args.sweeps, burn_in=args.burn_in,
                thinning=args.thin,
            )
            for s in seeds
        ]
        threads = args.threads or int(
            os.environ.get("SPINGEN_THREADS", os.cpu_count() or 1)
        )
        results = mc.run_chains(configs, max_workers=threads)

        prefix = args.out or "chain"
        outputs = []
        base_params = {
            "coupling": args.coupling, "temperature": args.temp,
            "n_replicas": args.n_replicas, "sweeps": args.sweeps,
            "burn_in": args.burn_in, "thinning": args.thin,
            "rng": mc.RNG_ALGORITHM, "master_seed": args.seed,
        }
        for index, result in enumerate(results):
            path = f"{prefix}.chain{index:02d}.csv"
            params = {**base_params, "seed": result.config.seed,
                      "acceptance_rate": result.acceptance_rate}
            _write_csv(
                path, "chain-samples", params, ["sweep", "a", "b"],
                zip(
                    result.sweep_index.tolist(),
                    result.a.tolist(),
                    result.b.tolist(),
                ),
            )
            outputs.append(path)

        lags = mc.log_lags(min(r.states.size for r in results))
        spin_curves = [
            mc.autocorrelation(r, "single_spin", lags).values for r in results
        ]
        coll_curves = [
            mc.autocorrelation(r, "magnetization", lags).values for r in results
        ]
        autocorr_path = f"{prefix}.autocorr.csv"
        _write_csv(
            autocorr_path, "autocorrelation",
            {**base_params, "n_chains": args.chains,
             "lag_unit_sweeps": args.thin},
            ["lag", "c_spin", "c_magnetization"],
            (
                (int(lag), float(np.mean([c[i] for c in spin_curves])),
                 float(np.mean([c[i] for c in coll_curves])))
                for i, lag in enumerate(lags)
            ),
        )
        outputs.append(autocorr_path)
        outputs += _maybe_plot(args, autocorr_path)
    manifest = RunManifest(
        command="mc", argv=sys.argv[1:], parameters=base_params, seeds=seeds,
        outputs=outputs, wall_clock_seconds=timer.elapsed,
    )
    manifest.write(prefix + ".manifest.json")
    print(f"wrote {', '.join(outputs)}")
    return 0


# ---------------------------------------------------------------- plot


def cmd_plot(args) -> int:
    from . import plotting

    out = args.out or os.path.splitext(args.csv)[0] + ".png"
    plotting.render(args.csv, out)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spingen",
        description="Spin-model generative thermodynamics toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="standardize a dataset and emit couplings")
    fit.add_argument("dataset", help="CSV with header config,count")
    fit.add_argument("--n-spins", type=int, default=None,
                     help="spin count (needed for decimal config labels)")
    fit.add_argument("--gauge-temp", type=float, default=1.0)
    group = fit.add_mutually_exclusive_group()
    group.add_argument("--floor", type=float, default=None,
                       help="count assigned to unrepresented configurations")
    group.add_argument("--unrep-energies", default=None,
                       help="CSV config,energy for unrepresented configurations")
    fit.add_argument("-o", "--out", default=None, help="output prefix")
    fit.set_defaults(func=cmd_fit)

    scan = sub.add_parser("scan", help="emit figure data for one analysis kind")
    scan.add_argument("--kind", required=True,
                      choices=["a-surface", "meanfield", "branches",
                               "replica", "coexistence"])
    scan.add_argument("--coupling", type=float, default=1.5)
    scan.add_argument("--couplings", default=None,
                      help="comma list of pair couplings (meanfield kind)")
    scan.add_argument("--j12", default=None,
                      help="comma list of fixed pair couplings (a-surface kind)")
    scan.add_argument("--temp", type=float, default=1.0)
    scan.add_argument("--gauge-temp", type=float, default=1.0)
    scan.add_argument("--grid", default=None, help="lo:hi:count")
    scan.add_argument("--n-replicas", default=None, help="comma list of sizes")
    scan.add_argument("--observable", default="magnetization",
                      choices=["magnetization", "helmholtz", "spectra",
                               "canonical", "tilted"])
    scan.add_argument("--n-spins", type=int, default=64,
                      help="system size for the coexistence construction")
    scan.add_argument("--temps", default=None,
                      help="comma list of retrieval temperatures (tilted)")
    scan.add_argument("--points", type=int, default=200,
                      help="energy-grid points per tilted curve")
    scan.add_argument("-o", "--out", default=None)
    scan.add_argument("--plot", action="store_true",
                      help="render the figure next to the CSV")
    scan.set_defaults(func=cmd_scan)

    run = sub.add_parser("mc", help="run Metropolis chains and autocorrelations")
    run.add_argument("--coupling", type=float, default=1.5)
    run.add_argument("--temp", type=float, default=1.0)
    run.add_argument("--n-replicas", type=int, default=16)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--sweeps", type=int, default=100_000)
    run.add_argument("--burn-in", type=int, default=1000)
    run.add_argument("--thin", type=int, default=1)
    run.add_argument("--chains", type=int, default=1)
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: SPINGEN_THREADS or cores)")
    run.add_argument("-o", "--out", default=None, help="output prefix")
    run.add_argument("--plot", action="store_true")
    run.set_defaults(func=cmd_mc)

    plot = sub.add_parser("plot", help="render a figure from an emitted CSV")
    plot.add_argument("csv")
    plot.add_argument("-o", "--out", default=None)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TableSizeError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
