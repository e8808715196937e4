"""Decide whether a sixth unit may join the five-unit mesh, then remove one.

Admission control re-solves the local gain programs of the units that face
new lines and re-certifies the whole grid before anything is switched in the
field. Neighbors whose existing gains still satisfy their constraints keep
them (keep-if-valid), so a plug-in touches as little of the grid as possible.
"""

import importlib.resources

from mgpnp import (DguParams, LineParams, PlugRequest, evaluate_plug_in,
                   evaluate_unplug, format_decision, load_grid,
                   synthesize_all)

grid = load_grid(importlib.resources.files("mgpnp")
                 .joinpath("data", "scenario2.grid"))
gains = synthesize_all(grid)
print(f"running grid: units {grid.dgu_ids()}, lines {sorted(grid.lines)}")

req = PlugRequest(
    kind="plug_in", dgu_id=6,
    new_dgu=DguParams(r_t=0.6, l_t=2.5e-3, c_t=3.0e-3, v_dc=100.0, load_r=8.0),
    new_lines={1: LineParams(r=0.1, l=2.5e-6),
               5: LineParams(r=0.08, l=3.0e-6)})

print("\n--- request: plug in DGU 6 against units 1 and 5 ---")
dec = evaluate_plug_in(grid, gains, req)
print(format_decision(dec))

print("\n--- same request under policy 'retune' "
      "(neighbors always re-solved) ---")
dec_rt = evaluate_plug_in(grid, gains, req, policy="retune")
print(format_decision(dec_rt))

# Continue from the accepted keep-if-valid topology: 6 units online.
gains6 = dict(gains)
gains6.update(dec.new_gains)

print("\n--- request: unplug DGU 3 from the six-unit grid ---")
dec2 = evaluate_unplug(dec.graph, gains6, PlugRequest(kind="unplug", dgu_id=3))
print(format_decision(dec2))
