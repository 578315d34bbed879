"""Two senders, one listener: recover both gains from two power vectors.

Both senders couple to the listener with gain 0.001.  In the first slot they
transmit at 1 mW and 2 mW, in the second they swap.  Each slot yields one
received-power equation; two independent equations pin down both gains.
"""

import numpy as np

from floodige import PowerSchedule, condition_number, solve_gains
from floodige.radio import dbm_to_mw, mw_to_dbm

h_true = np.array([0.001, 0.001])
two_mw = float(mw_to_dbm(2.0))
schedule = PowerSchedule([[0.0, two_mw], [two_mw, 0.0]], level_set=(0.0, two_mw))

rx = schedule.matrix_mw @ h_true
print("transmit powers (mW):\n", schedule.matrix_mw)
print("received powers (mW):", rx)

sol = solve_gains(schedule, rx)
print("recovered gains:", sol.gains)
print("condition number:", condition_number(schedule))

# swapping the rows leaves the conditioning unchanged; equal powers break it
print("cond of [[1, 1], [2, 2]] mW:", condition_number(dbm_to_mw(np.array([[0.0, 0.0], [two_mw, two_mw]]))))
