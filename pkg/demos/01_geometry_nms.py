"""
Boxes, overlap and duplicate suppression
========================================

Detections from several views of the same image pile up on each object.
This walk-through builds a few overlapping boxes by hand and shows how the
per-class greedy suppression keeps one box per object.
"""

from promptseg.geometry import BBox, Detection, centroid, iou, nms, project_to_original, remove_oversized

# %%
# Two boxes on the same roof, one on a lake next to it, and one that
# covers almost the whole 100 x 100 tile.
dets = [
    Detection(BBox(10, 10, 40, 30), "building", 1, 0.92),
    Detection(BBox(12, 11, 41, 31), "roof", 1, 0.85),
    Detection(BBox(35, 5, 80, 45), "pond", 2, 0.88),
    Detection(BBox(0, 0, 98, 97), "house", 1, 0.40),
]
for d in dets:
    print(f"{d.raw_label:>9}  class {d.canonical_class}  conf {d.confidence:.2f}  centre {centroid(d.bbox)}")

# %%
# IoU of the two roof boxes is high; the roof and the lake overlap too,
# but they belong to different classes so suppression ignores that pair.
print("roof/roof IoU  ", round(iou(dets[0].bbox, dets[1].bbox), 3))
print("roof/lake IoU  ", round(iou(dets[0].bbox, dets[2].bbox), 3))

# %%
# Boxes covering more than 90 % of the tile are dropped first, then NMS
# at an overlap threshold of 0.1.
trimmed = remove_oversized(dets, 100, 100, 0.9)
kept = nms(trimmed, 0.1)
print("after size pruning:", len(trimmed), " after NMS:", len(kept))
for d in kept:
    print("  kept", d.raw_label, d.bbox.as_tuple())

# %%
# A box found in the half-size view maps back by dividing by the scale.
print(project_to_original(BBox(5, 5, 20, 15), 0.5).as_tuple())
