"""
The whole pipeline on the bundled fixture
=========================================

``fixtures/pipeline.json`` drives every stage over 600 synthetic reviews
with an in-process mock toxicity server.  Two runs write byte-identical
outputs, which is what makes results reproducible.
"""

import csv
import filecmp
import tempfile
from pathlib import Path

from toxsem.boxplot import boxplot_stats
from toxsem.pipeline import load_config, run_pipeline

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

# %%
# Point the config at a scratch directory and run it.
tmp = Path(tempfile.mkdtemp())
cfg = load_config(FIXTURES / "pipeline.json")
cfg.output_dir = tmp / "run1"
result = run_pipeline(cfg)
print(result.clean_report.to_text())
for name, f in result.fits.items():
    print(f"{name:>13}: chisq={f.chisq:8.3f} df={f.df} cfi={f.indices.cfi:.3f} "
          f"rmsea={f.indices.rmsea:.3f}")

# %%
# A second run into another directory produces the same bytes.
cfg.output_dir = tmp / "run2"
run_pipeline(cfg)
names = sorted(p.name for p in (tmp / "run1").iterdir())
_, mismatch, errors = filecmp.cmpfiles(tmp / "run1", tmp / "run2", names, shallow=False)
print(f"{len(names)} files compared, mismatches: {mismatch + errors}")

# %%
# Quartiles of toxicity per sector: the numbers behind a grouped boxplot.
with open(tmp / "run1" / "analysis_rows.csv", newline="") as fh:
    rows = list(csv.DictReader(fh))
for s in boxplot_stats(rows, "commentToxicity", ["serviceCluster"]):
    print(f"sector {s.group[0]}: n={s.count} q1={s.q1:.3f} median={s.median:.3f} q3={s.q3:.3f}")
