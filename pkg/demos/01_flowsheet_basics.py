"""Solve the nominal flowsheet, inject faults, and watch a thermal runaway.

Run: python demos/01_flowsheet_basics.py
"""

from __future__ import annotations

import dataclasses as dc

from faultrules import LeakConfig, Trajectory, Unsolved, default_config, simulate_dynamic, solve_static

cfg = default_config()

print("=" * 64)
print("1. Nominal steady state")
print("=" * 64)
out = solve_static(cfg)
state = out.state
for name in ("m2_pv", "k1_p1", "k1_p2", "e2_tti", "m1_pv", "r1_t2", "r1_tau", "r1_xmax", "snk1_z_c2h4o"):
    print(f"   {name:14s} = {getattr(state, name):10.4f}")
print(f"   (stationarity residual {out.diagnostics.residual:.2e})")

print()
print("=" * 64)
print("2. A leak before the compressor, solved statically")
print("=" * 64)
leaky = dc.replace(cfg, leak=LeakConfig("beforeCompressor", 0.3))
leak_state = solve_static(leaky).state
print(f"   measured flow   {state.m2_pv:8.3f} -> {leak_state.m2_pv:8.3f}  (the meter sits before the leak)")
print(f"   residence time  {state.r1_tau:8.2f} -> {leak_state.r1_tau:8.2f}  (less flow, longer tau)")
print(f"   product fraction{state.snk1_z_c2h4o:8.4f} -> {leak_state.snk1_z_c2h4o:8.4f}  (EO more concentrated)")

print()
print("=" * 64)
print("3. Cooling-water outlet valve stuck closed: short horizon, then runaway")
print("=" * 64)
stuck = dc.replace(cfg, heat_exchanger=dc.replace(cfg.heat_exchanger, outlet_valve_pos=0.0))
traj = simulate_dynamic(cfg, stuck, [2, 6, 20, 60, 100], noise_seed=None)
assert isinstance(traj, Trajectory)
print("   t (s)   m1_pv (C)   r1_t2 (C)")
for t, s in zip(traj.times, traj.states):
    print(f"   {t:5.0f}   {s.m1_pv:9.1f}   {s.r1_t2:9.1f}")
long = simulate_dynamic(cfg, stuck, list(range(50, 801, 50)), noise_seed=None)
assert isinstance(long, Unsolved)
print(f"   ... longer horizon: {long.reason}")
