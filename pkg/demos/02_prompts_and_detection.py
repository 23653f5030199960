"""
Synonym prompts and multi-scale detection
=========================================

Each task class is described by several synonyms. The detector sees every
synonym, and whatever label it returns is folded back to the class id. The
image is also viewed at several scales so that large and small objects are
both found; the views are merged and deduplicated.
"""

import numpy as np

from promptseg.backends.mock import DEFAULT_PROMPTS, MockDetector, random_scene, render_scene
from promptseg.detection import GdPlusConfig, generate_scaled_views, run_gd_plus
from promptseg.prompts import PromptSet, canonicalize, detector_vocabulary, scorer_candidates

ps = PromptSet.from_dict(DEFAULT_PROMPTS)
print("detector vocabulary:")
for text, cid in detector_vocabulary(ps):
    print(f"  {text!r:28} -> class {cid}")
print("'Pond' canonicalizes to", canonicalize("Pond", ps))

# %%
# The filter later compares each patch against one templated prompt per
# class plus the unrelated prompts.
for text, cid in scorer_candidates(ps):
    print(f"  {text!r:40} {cid}")

# %%
# A synthetic scene: three objects and one distractor that the detector
# mistakes for a task class. The mock detector only sees objects whose
# longer side is at most 48 px in the current view, so some objects are
# only found in the half-size view.
scene = random_scene(np.random.default_rng(1))
img = render_scene(scene, "demo")
for s in scene.shapes:
    print(f"  {s.label:>16}  {s.rect.as_tuple()}  distractor={s.is_distractor}")

views = generate_scaled_views(img, (0.5, 1.0))
print("views:", [(v.scale, v.image.height, v.image.width) for v in views])

detector = MockDetector(scene, duplicates=3, max_size=48)
trace = run_gd_plus(img, ps, detector, GdPlusConfig())
print("raw per scale:", trace.raw_counts, " after NMS:", len(trace.detections))
for d in trace.detections:
    print(f"  class {d.canonical_class} {d.raw_label!r:24} conf {d.confidence:.3f} "
          f"scale {d.source_scale} box {tuple(round(v, 1) for v in d.bbox.as_tuple())}")
