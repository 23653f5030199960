"""
Red-circle visual prompts
=========================

Each surviving box is cut out with some surrounding context, a red ellipse
is drawn on the box outline, and an image-text scorer decides which prompt
the circled region matches best. Boxes whose best prompt is an unrelated
word, or a different class, are rejected.
"""

import tempfile
from pathlib import Path

import numpy as np

from promptseg.backends.mock import DEFAULT_PROMPTS, MockScorer, random_scene, render_scene
from promptseg.clip_filter import draw_red_circle, extend_patch, run_filter
from promptseg.geometry import Detection
from promptseg.io import write_image
from promptseg.prompts import PromptSet, scorer_candidates

ps = PromptSet.from_dict(DEFAULT_PROMPTS)
scene = random_scene(np.random.default_rng(3))
img = render_scene(scene, "demo")

# %%
# Extend the first box by 1.2 and 1.5 and draw the stroke. The stroke
# width grows with the patch diagonal but never drops below 2 px.
shape = scene.shapes[0]
out = Path(tempfile.mkdtemp())
for m in (1.2, 1.5):
    patch = extend_patch(img, shape.rect, m)
    ann = draw_red_circle(patch)
    changed = np.any(patch.pixels.pixels != ann.pixels.pixels, axis=0)
    print(f"x{m}: patch {ann.pixels.width}x{ann.pixels.height}, stroke {ann.stroke_width} px, "
          f"{int(changed.sum())} pixels painted")
    write_image(out / f"patch_x{m}.png", ann.pixels)
print("annotated patches written to", out)

# %%
# Filter one detection per scene shape. The distractor scores highest on
# an unrelated prompt and is dropped.
dets = [Detection(s.rect, s.label, s.reported_class, s.confidence) for s in scene.shapes]
trace = run_filter(dets, img, ps, MockScorer(scene), (1.2, 1.5))
texts = [t for t, _ in scorer_candidates(ps)]
for d in trace.decisions:
    best = texts[d.result.argmax]
    print(f"{d.detection.raw_label:>16}: best prompt {best!r:38} kept={d.kept}")
