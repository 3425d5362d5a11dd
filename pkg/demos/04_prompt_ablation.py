"""Train one model per prompt combination and compare held-out Dice.

By default this runs a reduced benchmark (60 train / 20 test, 5 epochs) that
finishes in a few minutes.  Pass --full for the standard protocol
(200 / 50, 30 epochs, seed 42), which takes about twenty minutes on one core.

Run:  python demos/04_prompt_ablation.py [--full]
"""

import sys
import time

from vessam.eval import AblationConfig, results_table, run_ablation, standard_benchmark

full = "--full" in sys.argv
n_train, n_test, epochs = (200, 50, 30) if full else (60, 20, 5)
data = standard_benchmark(42, n_train, n_test, 64)
start = time.perf_counter()
rows = run_ablation(
    AblationConfig(seed=42, epochs=epochs, n_test=n_test),
    data,
    progress=lambda r: print(f"  {str(r.flags):<13} Dice {r.dice:.4f}  ({time.perf_counter() - start:.0f}s)"),
)
print()
print(results_table(rows), end="")
best_single = max(r.dice for r in rows if len(r.flags.names) == 1)
print(f"all three prompts vs best single prompt: {rows[-1].dice:.4f} vs {best_single:.4f}")
