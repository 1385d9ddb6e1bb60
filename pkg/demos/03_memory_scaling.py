"""Peak memory of the scan grows linearly in sequence length.

Attention-style mixing pays O(L^2) memory for pairwise scores; a scan
carries a fixed-size state and touches each step once, so its working
set is O(L). This script measures peak traced allocation at several
lengths and prints the ratio between the longest and shortest runs.
Linear scaling means an 8x longer input costs about 8x the memory.

Run from the repository root:

    python demos/03_memory_scaling.py
"""

from sepscan import bench

# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------

E, H = 4, 16
lengths = (1000, 2000, 4000, 8000)

print(f"selective scan, E={E} H={H}, batch of one\n")
print(f"{'L':>6}  {'peak_bytes':>12}  {'bytes/step':>10}")
peaks = {}
for L in lengths:
    _, peak = bench.measure("seq", L, E, H, seed=0)
    peaks[L] = peak
    print(f"{L:>6}  {peak:>12,}  {peak / L:>10,.0f}")

# ---------------------------------------------------------------------------
# the scaling law
# ---------------------------------------------------------------------------

ratio = peaks[8000] / peaks[1000]
print(f"\npeak(L=8000) / peak(L=1000) = {ratio:.2f}")
print("an 8x longer input costs ~8x the memory: the working set is O(L).")
print("quadratic mixing would have made that ratio ~64x.")
