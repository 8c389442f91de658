"""Calibration, error metrics, fuel/comfort measures and logistic fitting."""
from ..model import CALIBRATION_BOUNDS
from .calibration import (CalibrationError, CalibrationProblem, CalibrationResult, FollowerRun,
                          GASettings, calibrate_ga, simulate_follower, stop_and_go_leader,
                          synthetic_problem)
from .fuel import FuelCoefficients, fuel_rate, load_fuel_coefficients, vt_micro_fuel
from .metrics import jerk_series, pearson, rmse, theils_u, theils_u_spacing
from .sigmoid_fit import SigmoidFit, fit_sigmoid, logistic, minmax_normalize
