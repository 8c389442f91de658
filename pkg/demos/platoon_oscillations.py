"""
Oscillations travelling down a platoon
======================================

Eleven vehicles follow a leader whose speed swings by 1.4 m/s around
25 km/h. For four (lambda, d_c) pairs we compare the linear string-stability
criterion with the oscillation amplitude measured at vehicles 2 and 10.
"""
import sys
from pathlib import Path

from carfollow import (ModelParams, PlatoonConfig, SinusoidLeader, analyze, simulate_platoon)
from carfollow.simulation import velocity_amplitude
from carfollow import svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "platoon"
out.mkdir(parents=True, exist_ok=True)

context = dict(a=1.73, b=2.0, v0=21.667, T=1.0, s0=2.0)
v_e = 6.944
cases = {"I": (0.5, 10.0), "II": (0.1, 10.0), "III": (1.0, 15.0), "IV": (0.1, 15.0)}

print("case  lambda  d_c   s_e     criterion  quasi  amp(v2)  amp(v10)")
for name, (lam, d_c) in cases.items():
    p = ModelParams(**context, lam=lam, d_c=d_c)
    rep = analyze(p, "sigmoid_idm", v_e)
    cfg = PlatoonConfig(11, p, SinusoidLeader(v_e, 1.4, 60.0), 600.0, initial_gaps=rep.s_e,
                        initial_velocities=v_e)
    traj = simulate_platoon(cfg)
    a2, a10 = velocity_amplitude(traj, 2, 300.0), velocity_amplitude(traj, 10, 300.0)
    print(f"{name:4s}  {lam:6.2f}  {d_c:4.1f}  {rep.s_e:6.3f}  {rep.string_criterion:+9.3f}  "
          f"{str(rep.quasi):5s}  {a2:7.3f}  {a10:8.3f}")
    sel = traj.time >= 300.0
    (out / f"case_{name}.svg").write_text(svg.line_chart(
        [traj.time[sel]] * 3, [traj.velocity[sel, i] for i in (0, 2, 10)], labels=["leader", "2", "10"],
        title=f"case {name}", xlabel="time (s)", ylabel="speed (m/s)"))

# At an exact logistic-branch equilibrium the criterion does not depend on d_c
p = ModelParams(**context, lam=0.5, d_c=10.0)
for d_c in (5.0, 10.0, 20.0):
    print(f"v = 15 m/s, lambda 0.5, d_c {d_c:4.1f}: criterion "
          f"{analyze(p.replace(d_c=d_c), 'sigmoid_idm', 15.0).string_criterion:+.6f}")
