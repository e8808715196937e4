"""Shape the reference channel and cancel measured load disturbances.

The closed loop tracks constants exactly but its transient is whatever the
gain design produced. A prefilter warps the reference path into a chosen
low-pass template, and a feedforward compensator cancels the load current's
effect on the PCC voltage.
"""

import importlib.resources
import pathlib

import numpy as np

from mgpnp import (build_augmented_dgu, closed_loop_reference_tf,
                   design_disturbance_compensator, design_prefilter,
                   desired_tf_template, disturbance_tfs,
                   export_frequency_response_csv, frequency_response,
                   load_grid, rational_equal, synthesize_all)


def show(tf):
    num = " ".join(f"{c:.6g}" for c in tf.num)
    den = " ".join(f"{c:.6g}" for c in tf.den)
    return f"({num}) / ({den})"


grid = load_grid(importlib.resources.files("mgpnp")
                 .joinpath("data", "scenario1.grid"))
gains = synthesize_all(grid)
aug = build_augmented_dgu(grid, 1)

f = closed_loop_reference_tf(aug, gains[1])
print("reference-to-voltage transfer of DGU 1:")
print(" ", show(f))
print(f"  dc gain {f.dc_gain():.6f}, poles "
      f"{np.array_str(np.sort_complex(f.poles()), precision=1)}")

f_tilde = desired_tf_template(bandwidth_hz=100.0, order=f.relative_degree)
print("\ntarget template (unit-dc low-pass, 100 Hz):")
print(" ", show(f_tilde))

c = design_prefilter(f, f_tilde)
print("\nprefilter C = F_tilde / F:")
print(" ", show(c))
print("  exact:", rational_equal((c * f).cancel(), f_tilde, rtol=1e-9))

g_d, g_u = disturbance_tfs(aug, gains[1])
print("\nload-current disturbance path G_d and control path G_u share poles;")
print("the exact compensator is the first-order polynomial that cancels them:")
n_exact = design_disturbance_compensator(g_d, g_u)
print("  N =", show(n_exact.tf), "(improper by one degree, uses dI/dt)")

n_proper = design_disturbance_compensator(g_d, g_u, require_proper=True,
                                          fallback_bandwidth_hz=100.0)
print("  proper variant rolls off past 2 kHz:", show(n_proper.tf))
print(f"  dc gains match: {n_exact.tf.dc_gain():.6g} vs "
      f"{n_proper.tf.dc_gain():.6g}")

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
freqs = np.logspace(-1, 4, 200)
for name, tf in (("ref-shaped", (c * f).cancel()), ("ref-raw", f)):
    path = out / f"dgu1.{name}.csv"
    export_frequency_response_csv(frequency_response(tf, freqs), path)
    print(f"wrote {path}")
