"""Where does received power stop adding up?

Two senders arrive at a receiver with powers on a 1 dB grid.  The ratio of
the measured total to the sum of the parts stays near 1 for weak signals
and sinks for strong ones as the front end compresses.
"""

from floodige.harness import load_scenario, run_scenario

result = run_scenario(load_scenario("linearity_study"))
print(result.summary_table())

heat = result.tables["heatmap.csv"]
print("\nstrong-power grid, mean ratio per 4 dB bin (rows rx1, columns rx2):")
cells = {(r1, r2): v for region, r1, r2, v, _ in heat.rows if region == 0}
axis = sorted({k[0] for k in cells})
print("        " + "".join(f"{c:8.0f}" for c in axis))
for r1 in axis:
    print(f"{r1:8.0f}" + "".join(f"{cells[(r1, r2)]:8.3f}" for r2 in axis))
