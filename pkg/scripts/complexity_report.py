"""Operation counts, MLE speedup and the sub-array rule sweep for the mult ratios."""
from bisac.complexity import REFERENCE_GRID, complexity_report, ratio_rule_sweep
from bisac.model import ScenarioConfig
from bisac.pencil import PencilConfig

cfg = ScenarioConfig()
for q in (1, 2):
    print(f"## q = {q}\n")
    print(complexity_report(cfg, PencilConfig.for_scenario(cfg, q), REFERENCE_GRID))
    print()

print("## mult ratio (2D / MLP) at N_t = 8, N_r = 8 and 16, q = 2\n")
for row in ratio_rule_sweep():
    mark = "match" if row["match"] else ""
    print(f"{row['tx_rule']:>14s} {row['rx_rule']:>14s}  {row['ratios'][0]:6.2f} {row['ratios'][1]:6.2f}  {mark}")
