"""Figure rendering for emitted CSV files (one figure per scan kind)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cli import read_csv


def _plot_a_surface(params, cols, fig):
    j12_values = sorted(set(cols["j12"]))
    axes = fig.subplots(1, len(j12_values), squeeze=False)[0]
    for ax, j12 in zip(axes, j12_values):
        mask = cols["j12"] == j12
        j1 = np.unique(cols["j1"][mask])
        j2 = np.unique(cols["j2"][mask])
        grid = cols["potential"][mask].reshape(j1.size, j2.size)
        contour = ax.contourf(j2, j1, grid, levels=30, cmap="viridis")
        fig.colorbar(contour, ax=ax, shrink=0.8)
        ax.set_title(f"pair coupling {j12:g}")
        ax.set_xlabel("onsite coupling 2")
        ax.set_ylabel("onsite coupling 1")


def _plot_meanfield(params, cols, fig):
    ax = fig.subplots()
    for j in sorted(set(cols["coupling"])):
        mask = cols["coupling"] == j
        (line,) = ax.plot(cols["m"][mask], cols["exact"][mask], "-",
                          label=f"exact, J={j:g}")
        ax.plot(cols["m"][mask], cols["reduced"][mask], "--",
                color=line.get_color(), label=f"reduced, J={j:g}")
    ax.set_xlabel("magnetization along (1, -1)")
    ax.set_ylabel("free energy")
    ax.legend(fontsize=8)


def _plot_branches(params, cols, fig):
    ax = fig.subplots()
    ax.plot(cols["h"], cols["branch_plus"], "k-", label="restricted +")
    ax.plot(cols["h"], cols["branch_minus"], "k--", label="restricted -")
    for name in cols:
        if name.startswith("eq_nr"):
            ax.plot(cols["h"], cols[name], label=name.replace("eq_nr", "N_r="))
    ax.set_xlabel("field along (1, -1)")
    ax.set_ylabel("Gibbs energy per spin")
    ax.legend(fontsize=8)


def _plot_replica_magnetization(params, cols, fig):
    ax = fig.subplots()
    ax.plot(cols["h"], cols["mf_plus"], "r-", label="reduced +")
    ax.plot(cols["h"], cols["mf_minus"], "b-", label="reduced -")
    for name in cols:
        if name.startswith("eq_nr"):
            ax.plot(cols["h"], cols[name], "--", label=name.replace("eq_nr", "N_r="))
    ax.set_xlabel("field along (1, -1)")
    ax.set_ylabel("magnetization per spin")
    ax.legend(fontsize=8)


def _plot_replica_helmholtz(params, cols, fig):
    ax = fig.subplots()
    ax.plot(cols["m"], cols["mf"], "k-", label="reduced")
    for name in cols:
        if name.startswith("eq_nr"):
            ax.plot(cols["m"], cols[name], "--", label=name.replace("eq_nr", "N_r="))
        elif name.startswith("cost_nr"):
            mask = ~np.isnan(cols[name])
            ax.plot(cols["m"][mask], cols[name][mask], ".",
                    label=name.replace("cost_nr", "count cost, N_r="))
    ax.set_xlabel("magnetization along (1, -1)")
    ax.set_ylabel("Helmholtz energy per spin")
    ax.legend(fontsize=8)


def _plot_coexistence_spectra(params, cols, fig):
    from .coexistence import Spectrum, microcanonical_curve

    ax = fig.subplots()
    for label in sorted(set(cols["label"])):
        mask = cols["label"] == label
        energies = cols["energy"][mask]
        log_deg = cols["log_degeneracy"][mask]
        order = np.argsort(energies)
        spec = Spectrum(energies[order], log_deg[order], label)
        ax.plot(energies, log_deg, ".", label=f"levels ({label})")
        _, e_curve, s_curve = microcanonical_curve(spec, (0.2, 20.0), 60)
        ax.plot(e_curve, s_curve, "-", label=f"entropy ({label})")
    for key, value in params.items():
        if key.startswith("tangent_"):
            ax.plot(value["energy"], value["entropy"], "o", markersize=9,
                    fillstyle="none")
    ax.set_xlabel("energy")
    ax.set_ylabel("entropy")
    ax.legend(fontsize=8)


def _plot_coexistence_canonical(params, cols, fig):
    top, bottom = fig.subplots(2, 1, sharex=True)
    t = cols["temperature"]
    for ax, stem in ((top, "energy"), (bottom, "entropy")):
        ax.plot(t, cols[f"{stem}_true"], "-", label="true states")
        ax.plot(t, cols[f"{stem}_false"], "-", label="false states")
        ax.plot(t, cols[f"{stem}_eq"], "k--", label="equilibrium")
        ax.set_ylabel(stem)
        ax.legend(fontsize=8)
    bottom.set_xlabel("temperature")


def _plot_coexistence_tilted(params, cols, fig):
    ax = fig.subplots()
    for t in sorted(set(cols["temperature"])):
        for label in sorted(set(cols["label"])):
            mask = (cols["temperature"] == t) & (cols["label"] == label)
            if mask.any():
                ax.plot(cols["energy"][mask], cols["tilted_potential"][mask],
                        label=f"{label}, T={t:g}")
    ax.set_xlabel("energy")
    ax.set_ylabel("tilted potential")
    ax.legend(fontsize=8)


def _plot_chain(params, cols, fig):
    ax = fig.subplots()
    ax.plot(cols["sweep"], cols["a"], lw=0.4, label="group sum a")
    ax.plot(cols["sweep"], cols["b"], lw=0.4, label="group sum b")
    ax.set_xlabel("sweep")
    ax.set_ylabel("group sum")
    ax.legend(fontsize=8)


def _plot_autocorrelation(params, cols, fig):
    ax = fig.subplots()
    positive = cols["lag"] > 0
    ax.semilogx(cols["lag"][positive], cols["c_spin"][positive], "o-",
                ms=3, label="single spin")
    ax.semilogx(cols["lag"][positive], cols["c_magnetization"][positive],
                "s--", ms=3, label="collective")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("lag (recorded samples)")
    ax.set_ylabel("autocorrelation")
    ax.legend(fontsize=8)


def _plot_couplings(params, cols, fig):
    ax = fig.subplots()
    ax.bar(range(len(cols["coupling"])), cols["coupling"])
    ax.set_xticks(range(len(cols["subset"])))
    ax.set_xticklabels(cols["subset"], rotation=90, fontsize=6)
    ax.set_xlabel("interaction subset")
    ax.set_ylabel("coupling")


def _plot_standard_weights(params, cols, fig):
    ax = fig.subplots()
    ax.bar(range(len(cols["weight"])), cols["weight"])
    ax.set_xticks(range(len(cols["config"])))
    ax.set_xticklabels(cols["config"], rotation=90, fontsize=6)
    ax.set_yscale("log")
    ax.set_xlabel("configuration")
    ax.set_ylabel("standard weight")


_RENDERERS = {
    "a-surface": _plot_a_surface,
    "meanfield-slice": _plot_meanfield,
    "gibbs-branches": _plot_branches,
    "replica-magnetization": _plot_replica_magnetization,
    "replica-helmholtz": _plot_replica_helmholtz,
    "coexistence-spectra": _plot_coexistence_spectra,
    "coexistence-canonical": _plot_coexistence_canonical,
    "coexistence-tilted": _plot_coexistence_tilted,
    "chain-samples": _plot_chain,
    "autocorrelation": _plot_autocorrelation,
    "couplings": _plot_couplings,
    "standard-weights": _plot_standard_weights,
}


def render(csv_path, out_path) -> None:
    """Render the figure matching a CSV's kind header to an image file."""
    kind, params, _, cols = read_csv(csv_path)
    if kind not in _RENDERERS:
        raise ValueError(f"{csv_path}: no renderer for kind {kind!r}")
    width = 10.0 if kind == "a-surface" else 6.0
    fig = plt.figure(figsize=(width, 4.5), dpi=110)
    try:
        _RENDERERS[kind](params, cols, fig)
        fig.tight_layout()
        fig.savefig(out_path)
    finally:
        plt.close(fig)
