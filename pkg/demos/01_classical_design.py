"""Classical E-optimal rate design on a two-flow example.

Two flows, each crossing two observation points with information
coefficients J = [[40, 10], [10, 40]], compete for one unit of sampling
budget. The E-optimal design maximizes the smallest per-flow information
(J xi)_i, solved as a small LP.
"""

import numpy as np

from flowdesign import DesignProblem, FlowModel, solve_classical_E, solve_steady_state_E

p = DesignProblem(J=[[40.0, 10.0], [10.0, 40.0]], R=[[1.0, 1.0]], b=[1.0],
                  upper=[np.inf, np.inf])
res = solve_classical_E(p)
print("classical E-optimal design")
print("  xi      =", np.round(res.xi, 6))
print("  theta   =", res.theta, "(smallest per-flow information, balanced)")
print("  info    =", res.info)

# the symmetric problem splits the budget evenly; scaling the budget
# scales the design linearly
p2 = DesignProblem(J=p.J, R=p.R, b=[0.3], upper=[np.inf, np.inf])
print("\nwith budget 0.3:", np.round(solve_classical_E(p2).xi, 6))

# once per-flow noise differs, the steady-state criterion (which feeds
# the information into a tracking filter) skews the allocation toward
# the noisier flow
fm = FlowModel(sigma2=[0.01, 0.04], mu=[100.0, 100.0])
p3 = DesignProblem(J=p.J, R=p.R, b=[1.0])
ss = solve_steady_state_E(p3, fm)
print("\nsteady-state design with sigma2 = (0.01, 0.04)")
print("  xi    =", np.round(ss.xi, 6), " (noisier flow 2 gets more)")
print("  theta =", ss.theta)
