"""Estimate the interference graph of a six-node network while it floods.

The bundled ``flood_ige`` scenario describes a four-level network (initiator,
two relays, two relays, one leaf).  Every estimation cycle lasts 30 flooding
rounds; nodes of each hop vary their power following a 4-vector schedule
and the hop below subtracts the interference it already heard.
"""

import numpy as np

from floodige.harness import load_scenario, run_scenario

spec = load_scenario("flood_ige")
topology = spec.network()
from floodige.flood import assign_hops

print("hop of each node:", assign_hops(topology))

result = run_scenario(spec)
print(result.summary_table())

report = result.tables["report.csv"]
err = report.column("error_db")
sender, receiver = report.column("sender"), report.column("receiver")
print("\nmedian error per downstream link (dB):")
for s, r in sorted({(int(a), int(b)) for a, b in zip(sender, receiver)}):
    sel = (sender == s) & (receiver == r)
    true_db = report.column("h_true_db")[sel][0]
    print(f"  {s} -> {r}  gain {true_db:7.1f} dB   median error {np.median(err[sel]):6.2f}")
