"""
The experiment protocol in miniature
====================================

A preprocessing sweep over a slice of the (f_max, W_l, O) grid with a
small random search at every point, then the top configurations
re-evaluated with full cross-validation.
"""

import tempfile

from szclass.evaluation import make_folds, run_cv
from szclass.featurize import FeatureSpec, WindowSpec, featurize_manifest
from szclass.hpo import preproc_grid, select_top_configs, sweep_csv, sweep_preproc_grid
from szclass.synthgen import GenSpec, generate_corpus

spec = GenSpec(patients_per_class=3, seizures_per_patient=2, duration=16.0, n_channels=4,
               separability=0.3, seed=3)
manifest = generate_corpus(spec, tempfile.mkdtemp(prefix="szclass_sweep_"))

grid = preproc_grid()
print("full grid has %d points; sweeping the first 8" % len(grid))
rows = sweep_preproc_grid(manifest, "knn", spec.montage, budget=5, cv_mode="patient",
                          seed=0, grid=grid[:8])
print(sweep_csv(rows))

folds = make_folds(manifest.events, "patient", 3, seed=0)
for f_max, wl, ov in select_top_configs(rows, n=2):
    fm = featurize_manifest(manifest, spec.montage, WindowSpec(wl, ov), FeatureSpec(1, f_max))
    score = run_cv(fm, "knn", {"k": 5}, folds).mean_weighted_f1
    print("f_max=%d W_l=%g O=%g: 3-fold patient-wise weighted F1 %.3f" % (f_max, wl, ov, score))
