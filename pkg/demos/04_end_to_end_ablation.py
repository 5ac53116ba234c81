"""Full pipeline on the synthetic ambiguity scenario, with and without context.

The scenario plants an object whose appearance sits between two classes, so
the appearance model alone mislabels it; co-occurrence links propagated from
the annotated frames recover the true class. Compare the mean IoU of the
full pipeline against the no-context ablation, then against a variant whose
classes never co-occur.
"""

from ctxseg.evaluation import iou_per_class
from ctxseg.pipeline import PipelineConfig, run_pipeline
from ctxseg.synthetic import AMBIGUITY_MU, ambiguity_scenario, generate

print(__doc__)

spec = ambiguity_scenario(seed=7)
seq, gt = generate(spec)
tail = seq.frame_count - 5
print(f"{seq.n} regions over {seq.frame_count} frames, "
      f"{len(seq.detections)} detections (none after frame {tail - 1})\n")

full = run_pipeline(seq, PipelineConfig(seed=7, mu=AMBIGUITY_MU), gt=gt)
bare = run_pipeline(seq, PipelineConfig(seed=7, mu=AMBIGUITY_MU,
                                        no_context=True), gt=gt)

print("with context links:")
print(full.report.format_table())
print("\nwithout context (unary-only CRF):")
print(bare.report.format_table())

ambiguous = [r for r, c in gt.items() if c == 2 and seq.region(r).frame >= tail]
print(f"\nambiguous regions (true class 2):")
print(f"  full pipeline says: {[full.prediction[r] for r in ambiguous]}")
print(f"  no-context says:    {[bare.prediction[r] for r in ambiguous]}")
gap = (full.report.mean_iou - bare.report.mean_iou) * 100
print(f"\ncontext advantage: +{gap:.1f} IoU points")

print(f"\nobserved class-pair links: {sorted(full.links)}")
print("the (1, 2) entries above are the co-occurrence evidence doing the work")
