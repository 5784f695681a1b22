"""Deterministic advertising under an antitrust market-share cap.

A firm grows its market share with advertising and would, left alone, settle
above the 60% cap it has promised regulators to respect.  A minimal-norm
barrier filter watches the optimal controller and trims the advertising rate
just enough to keep the share below the cap.

Run:  python3 demos/01_deterministic_advertising.py [--plot]
"""
import argparse

import numpy as np

from scbf import AdvertisingParams, ProblemSpec, build_context, simulate
from scbf.problems import DEFAULT_GRIDS, advertising_steady_state


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--plot", action="store_true", help="show matplotlib figures")
    args = parser.parse_args()

    params = AdvertisingParams()
    grid = DEFAULT_GRIDS["advertising"]
    costate = advertising_steady_state(params)

    print("Deterministic advertising with a market-share cap")
    print(f"  cap x_max = {params.x_max}, strengthening slope eta = {params.eta}")
    print(f"  turnpike costate q_bar = {costate.q_bar:.6f}, unfiltered steady share = {costate.x_bar:.4f}")
    print(f"  (the unfiltered optimum sits ABOVE the cap, so the filter has work to do)")
    print()

    filtered = simulate(build_context(ProblemSpec("advertising", params, "cbf", grid)))
    unfiltered = simulate(build_context(ProblemSpec("advertising", params, "off", grid)))

    t = grid.times()
    print(f"  unfiltered run: share reaches {unfiltered.x.max():.4f} (crosses the cap)")
    print(f"  filtered run:   share reaches {filtered.x.max():.10f} (never crosses)")
    print(f"  smallest barrier value along the filtered path: {filtered.h.min():.3e} >= 0")
    first = int(np.argmax(filtered.intervened)) if filtered.intervened.any() else None
    if first is not None:
        print(f"  filter first intervenes at t = {t[first]:.2f} (share {filtered.x[first]:.4f});")
        print(f"  before that the two control traces are identical, then the actual control")
        print(f"  smoothly drops below the optimal one:")
        for k in (first - 20, first, first + 60, first + 150):
            print(
                f"    t={t[k]:5.2f}  u_des={filtered.u_des[k]:.4f}  u_act={filtered.u_act[k]:.4f}"
                f"  margin={filtered.margin[k]:+.4f}"
            )
    print(f"  mean filter solve time: {filtered.solver_time.mean() * 1e3:.4f} ms per step")

    if args.plot:
        import matplotlib.pyplot as plt

        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
        ax1.axhspan(params.x_max, 1.0, color="red", alpha=0.15, label="unsafe")
        ax1.plot(t, unfiltered.x, "r--", label="unfiltered share")
        ax1.plot(t, filtered.x, "g-", label="filtered share")
        ax1.axhline(params.x_max, color="k", lw=0.8)
        ax1.set_ylabel("market share")
        ax1.legend()
        ax2.plot(t[:-1], filtered.u_des, "r--", label="optimal control")
        ax2.plot(t[:-1], filtered.u_act, "g-", label="actual control")
        ax2.set_xlabel("time")
        ax2.set_ylabel("advertising control u")
        ax2.legend()
        fig.tight_layout()
        plt.show()


if __name__ == "__main__":
    main()
