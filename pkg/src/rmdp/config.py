"""Numeric defaults shared by every module and overridable from the CLI."""

#: Row sums of transition matrices must equal 1 within this tolerance.
ROW_SUM_TOL = 1e-12

#: An entry counts as structurally positive iff it exceeds this threshold.
SUPPORT_THRESHOLD = 1e-12

#: Detailed balance / stationarity checks.
BALANCE_TOL = 1e-9

#: Action independence of the normalized block kernels.
RATIO_TOL = 1e-9

#: A policy improvement is accepted only if it gains more than this.
IMPROVEMENT_TOL = 1e-9

#: Relative tolerance used to break ties between (nearly) equal gains.
TIE_TOL = 1e-12

#: Largest number of deterministic policies we are willing to enumerate.
ENUMERATION_CAP = 10**6

#: Symmetry / PSD tolerances for the free-field covariance.
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-9

#: Pinned Green function vs. covariance-difference formula.
GREEN_TOL = 1e-8

#: z-threshold (in standard errors) for the Monte Carlo Ray-Knight test.
Z_THRESHOLD = 4.0

#: Lower end of the interval rho values are drawn from by the generator.
RHO_MIN = 0.1
