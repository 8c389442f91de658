"""
Calibrating against a synthetic follower
========================================

Generate a follower trajectory from known parameters behind a stop-and-go
leader, then ask the genetic algorithm to find the parameters again. Pass
``--full`` for the 100 x 500 run; the default is a quick one.
"""
import sys

from carfollow import ModelParams
from carfollow.estimation import GASettings, calibrate_ga, stop_and_go_leader, synthetic_problem

full = "--full" in sys.argv
truth = ModelParams(a=1.5, b=1.5, v0=15.0, T=1.5, s0=2.0, lam=1.0, d_c=6.0)
ga = GASettings(population=100, generations=500) if full else GASettings(population=40, generations=40)
problem = synthetic_problem(truth, leader=stop_and_go_leader(duration=120.0), initial_gap=4.0, ga=ga, seed=0)


def progress(gen, pop, fit):
    if gen % 10 == 0:
        print(f"generation {gen:4d}: best U = {fit.min():.3e}")


res = calibrate_ga(problem, callback=progress)
print(f"final U = {res.fitness:.3e}, spacing RMSE = {res.rmse['spacing']:.3e} m")
for name in problem.free:
    print(f"  {name:4s} true {getattr(truth, name):7.3f}  fitted {getattr(res.params, name):7.3f}")
