"""Head-to-head run of the three protocols on one workload family.

A scaled-down version of the benchmark matrix: same client count and item
table, rising transaction counts inside a fixed submission window, five
seeds per cell. Every run's history goes through the serializability oracle
before its numbers are used. Expect the optimistic baseline to abort the
most, locking to wait the most, and the commit-order validator to do neither.
"""

import statistics

from ccarena import MatrixConfig, SimConfig, compute_waiting_time, run_matrix
from ccarena.harness import cell_means, rows_to_gnuplot

matrix = MatrixConfig(
    protocols=["opcot", "occ", "s2pl"],
    n_txns_list=[200, 400],
    n_items_list=[50],
    seeds=[1, 2, 3, 4, 5],
    base=SimConfig(n_clients=25, mean_len=5, sd_len=1, op_service_ms=10,
                   uplink_latency_ms=(20, 60), downlink_latency_ms=(20, 60),
                   disconnect_prob=0.10, reconnect_delay_ms=(100, 300)),
    arrival_window_ms=20_000,
)

print(f"running {len(matrix.cells())} simulations (oracle-checked)...\n")
rows = run_matrix(matrix)

print(f"{'protocol':<10}{'txns':>6}{'mean aborts':>14}{'mean wait ms':>14}")
for protocol in matrix.protocols:
    for n_txns in matrix.n_txns_list:
        aborts, wait = cell_means(rows, protocol, 50, n_txns)
        print(f"{protocol:<10}{n_txns:>6}{aborts:>14.1f}{wait:>14.1f}")

print("\ngnuplot-ready blocks:\n")
print(rows_to_gnuplot(rows))
