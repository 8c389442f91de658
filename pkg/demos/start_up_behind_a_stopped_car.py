"""
Starting up behind a stopped car
================================

A follower waits behind a stationary leader at a gap smaller than its jam
distance s0. The IDM reacts by reversing (with the velocity clamp turned off
the speed goes negative). From a 10 m gap it accelerates hard and then has to
brake. The Sigmoid-IDM stays put in the first case.
"""
import sys
from pathlib import Path


from carfollow import ModelParams, PlatoonConfig, StationaryLeader, acceleration, simulate_platoon
from carfollow import svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "start_up"
out.mkdir(parents=True, exist_ok=True)

base = dict(a=3.0, b=2.0, v0=10.0, T=1.6, s0=5.0)
idm = ModelParams(**base)
sig = ModelParams(**base, lam=1.0, d_c=10.0)

# Instantaneous response at standstill for a few gaps
for gap in (4.0, 5.0, 10.0):
    print(f"gap {gap:4.1f} m: IDM a = {float(acceleration('idm', gap, 0.0, 0.0, idm)):+.4f}, "
          f"Sigmoid-IDM a = {float(acceleration('sigmoid_idm', gap, 0.0, 0.0, sig)):+.4f} m/s^2")

# Closed-loop runs, clamp off so that reversing is visible
runs = {}
for label, model, params, gap in (("IDM, 4 m", "idm", idm, 4.0), ("IDM, 10 m", "idm", idm, 10.0),
                                  ("Sigmoid-IDM, 4 m", "sigmoid_idm", sig, 4.0)):
    cfg = PlatoonConfig(2, params, StationaryLeader(), 20.0, model=model, initial_gaps=gap,
                        velocity_clamp=False)
    runs[label] = simulate_platoon(cfg)
    traj = runs[label]
    print(f"{label:17s} min v = {traj.velocity[:, 1].min():+.3f} m/s, "
          f"min a = {traj.acceleration[:, 1].min():+.3f} m/s^2")

(out / "velocity.svg").write_text(svg.line_chart(
    [t.time for t in runs.values()], [t.velocity[:, 1] for t in runs.values()], labels=list(runs),
    title="follower speed behind a stopped car", xlabel="time (s)", ylabel="speed (m/s)"))
print("wrote", out / "velocity.svg")
