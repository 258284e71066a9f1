"""
Labeling unknown samples through a cluster hierarchy
====================================================

Ten families arranged in a two-level tree share features with their
siblings. Thirty percent of the samples are unlabeled, and two extra
families have no labeled sample at all. Known and unknown samples are
factorized together; clusters whose labeled members agree pass their class
to the unlabeled ones, mixed clusters are factorized again, and clusters
without any labeled member abstain.
"""

import numpy as np

from hnmfk import ClassifierParams, classify, make_report, synth_generate, SyntheticSpec
from hnmfk.classifier import hierarchy_records

spec = SyntheticSpec(family_count=12, samples_per_family=150, hierarchy_levels=2,
                     unknown_fraction=0.3, novel_family_count=2, seed=3)
data = synth_generate(spec)
print(f"{data.X.shape[0]} samples, {data.X.shape[1]} features, "
      f"{np.sum(~data.known)} unknown, novel families {data.novel_families.tolist()}")

pred, root = classify(data.X, data.observed, ClassifierParams(k_max_root=8, n_perturbs=10))

###############################################################################
# The tree. Each line is one node: how many samples it holds, the number of
# latent features chosen there, and why expansion stopped.

for rec in hierarchy_records(root):
    k = "" if rec["kOpt"] is None else f"k={rec['kOpt']}"
    label = "" if rec["predictedClass"] is None else f"-> {rec['predictedClass']}"
    print(f"{'  ' * rec['depth']}{rec['nodeId']:<8} n={rec['sampleCount']:<5} "
          f"known={rec['knownCount']:<4} {k:<5} {rec['exitReason']} {label}")

###############################################################################
# Scores over the unknown samples. Abstentions should fall almost entirely on
# the novel families.

rep = make_report(data.labels, pred, data.observed)
print(f"\nweighted F1 on answered samples {rep.weighted_f1:.3f}, coverage {rep.coverage:.3f}")
print(f"abstained: seen families {rep.abstain_seen_pct:.1f}%, novel families {rep.abstain_novel_pct:.1f}%")
