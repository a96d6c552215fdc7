"""Small version of the simulation study: accuracy and speed of each variant.

Increase ``REPS`` and ``N`` for numbers comparable to the published tables
(n = 2^16, 50 replications).
"""

from rtdetmcd import Scenario, run_scenario

N, REPS = 2**14, 5

# compile the kernels once so the first timed variant is not penalised
run_scenario(Scenario(n=2**12, p=4, variant="IDCP4", replications=1), baseline="I")

for contamination, eps in (("shift", 0.1), ("point", 0.3)):
    print(f"\n{contamination} contamination, eps={eps}, gamma=50, p=4")
    print(f"{'variant':8} {'KL':>8} {'time [s]':>9} {'speedup vs I':>13}")
    for variant in ("I", "ID", "IDC", "IDCP4"):
        s = Scenario(n=N, p=4, contamination=contamination, eps=eps, gamma=50,
                     variant=variant, replications=REPS, seed=7)
        r = run_scenario(s, baseline="I")
        print(f"{variant:8} {r.mean_kl:8.4f} {r.mean_runtime:9.4f} {r.speedup:13.2f}")
