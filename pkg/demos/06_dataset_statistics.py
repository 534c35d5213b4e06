"""Dataset statistics: object/part histograms and aggregate contact probability.

Mirrors the dataset-analysis workflow: which objects people touch, which
body parts carry contact (counting images with at least 10 contact vertices
on the part), and the per-vertex contact frequency painted on the template.
"""

from pathlib import Path

import numpy as np

from contactkit import synth
from contactkit.contact_data import (
    aggregate_contact_probability,
    object_label_histogram,
    part_contact_histogram,
)
from contactkit.mesh import save_ply
from contactkit.train import template_from_ref

out = Path("demo_output/06_stats")
out.mkdir(parents=True, exist_ok=True)

config = synth.SynthConfig()
dataset = synth.write_synthetic_dataset(config, 40, out / "ds", seed=0)
template = template_from_ref(dataset.template_ref)

print("object label histogram (records containing the label):")
for label, count in sorted(object_label_histogram(dataset).items()):
    print(f"  {label:8s} {count}")

counts = part_contact_histogram(dataset, template, min_vertices=10)
print("parts with >= 10 contact vertices in at least one record:",
      int((counts > 0).sum()), "of", template.num_parts)

probs = aggregate_contact_probability(dataset)
print(f"aggregate contact probability: max {probs.max():.2f} "
      f"at vertex {int(np.argmax(probs))}; {int((probs > 0).sum())} vertices ever in contact")
save_ply(template, out / "contact_probability.ply", vertex_colors=probs / max(probs.max(), 1e-9))
print(f"wrote {out / 'contact_probability.ply'}")
