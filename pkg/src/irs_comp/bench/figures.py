"""Named sweeps, one per reproduced figure.

Axis values not fixed by the figure captions are desk-scale choices; the
default realization count is 50 and every preset takes overrides.
"""

from __future__ import annotations

from .experiment import ExperimentSpec

ALL_SCHEMES = ("optimized-continuous", "quantized-b2", "quantized-b1", "random-phase", "no-irs")

FIGURES = {
    # single-user, N_t = 2, P_max = 1 W unless swept
    "fig2": dict(base="single-user", sweep="m", values=(20, 50, 100), schemes=("optimized-continuous",),
                 overrides={"num_irs_elements": 100}),
    "fig3": dict(base="single-user", sweep="pmax_dbm", values=(20, 25, 30, 35, 40), schemes=ALL_SCHEMES,
                 overrides={"num_irs_elements": 100}),
    "fig5": dict(base="single-user", sweep="m", values=(50, 100, 200, 300), schemes=ALL_SCHEMES),
    "fig6": dict(base="single-user", sweep="irs_x", values=(-150, -100, -50, 0, 50, 100, 150),
                 schemes=("optimized-continuous",), overrides={"num_irs_elements": 100}),
    # multiuser, N_t = 6, M = 100 unless swept
    "fig7": dict(base="multi-user", sweep="m", values=(20, 50, 100), schemes=("optimized-continuous",)),
    "fig9": dict(base="multi-user", sweep="nt", values=(2, 4, 6, 8), schemes=ALL_SCHEMES),
    "fig8": dict(base="multi-user", sweep="pmax_dbm", values=(-10, -5, 0, 5, 10), schemes=ALL_SCHEMES),
    "fig10": dict(base="multi-user", sweep="m", values=(20, 40, 60, 80, 100), schemes=ALL_SCHEMES),
    "fig11": dict(base="multi-user", sweep="m", values=(16, 36, 64, 100),
                  schemes=("optimized-continuous", "af-relay"), overrides={"direct_links": False}),
}


def figure_spec(name: str, realizations: int = 50, seed: int = 0, out=None, **overrides) -> ExperimentSpec:
    if name not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; choose from {', '.join(sorted(FIGURES))}")
    p = FIGURES[name]
    over = dict(p.get("overrides", {}))
    over.update(overrides)
    return ExperimentSpec(preset=name, base=p["base"], sweep=p["sweep"], values=tuple(p["values"]),
                          realizations=realizations, schemes=tuple(p["schemes"]), seed=seed,
                          out=out, overrides=over)
