"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""

import json
import math
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import greedy_nms_oracle, pixel_set_metrics
from promptseg.backends import Image
from promptseg.backends.mock import load_scenes, write_mock_corpus
from promptseg.clip_filter import draw_red_circle, extend_patch, score_patch, softmax, stroke_width
from promptseg.geometry import BBox, Detection, centroid, nms, project_to_original
from promptseg.metrics import ConfusionMatrix, accumulate, compute_report
from promptseg.runner import ablate, evaluate, load_config, run
from promptseg.segmentation import LabelMask


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------


def test_nms_matches_brute_force_oracle():
    start = time.perf_counter()
    mismatches = []
    for seed in range(1000):
        rnd = random.Random(seed)
        items = []
        for _ in range(rnd.randint(0, 12)):
            x0, y0 = rnd.randint(0, 40), rnd.randint(0, 40)
            box = (x0, y0, x0 + rnd.randint(1, 25), y0 + rnd.randint(1, 25))
            # a small confidence grid makes ties common
            items.append((box, rnd.randint(1, 3), rnd.choice([0.2, 0.4, 0.5, 0.7, 0.9])))
        thr = rnd.choice([0.0, 0.1, 0.25, 0.5, 0.75, 1.0])
        dets = [Detection(BBox(*b), "x", c, p) for b, c, p in items]
        got = nms(dets, thr)
        want = [dets[i] for i in greedy_nms_oracle(items, thr)]
        if [id(d) for d in got] != [id(d) for d in want]:
            mismatches.append(seed)
    elapsed = time.perf_counter() - start
    report(1, "NMS oracle equivalence", not mismatches and elapsed < 10,
           f"1000 seeds, {len(mismatches)} mismatches, {elapsed:.2f} s (< 10 s)")


# 2 -------------------------------------------------------------------------


def test_geometry_closed_forms():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10_000):
        W, H = (int(v) for v in rng.integers(32, 1024, 2))
        x0, x1 = np.sort(rng.uniform(0, W, 2))
        y0, y1 = np.sort(rng.uniform(0, H, 2))
        if x1 - x0 < 1e-3 or y1 - y0 < 1e-3:
            continue
        box = BBox(x0, y0, x1, y1)
        w, h = x1 - x0, y1 - y0

        cx, cy = centroid(box)
        worst = max(worst, abs(cx - (x0 + w / 2)), abs(cy - (y0 + h / 2)))

        s = float(rng.choice([0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0]))
        scaled = BBox(x0 * s, y0 * s, x1 * s, y1 * s)
        back = project_to_original(scaled, s)
        worst = max(worst, *(abs(a - b) for a, b in zip(back.as_tuple(), box.as_tuple())))

        m = float(rng.uniform(1.0, 2.0))
        img = Image(np.zeros((1, H, W)))
        patch = extend_patch(img, box, m)
        pad_x, pad_y = (m - 1) * w / 2, (m - 1) * h / 2
        expected = (max(0.0, x0 - pad_x), max(0.0, y0 - pad_y), min(W, x1 + pad_x), min(H, y1 + pad_y))
        worst = max(worst, *(abs(a - b) for a, b in zip(patch.crop.as_tuple(), expected)))
        ox, oy = patch.origin
        worst = max(worst, abs(patch.center[0] + ox - cx), abs(patch.center[1] + oy - cy))
        worst = max(worst, abs(patch.radii[0] - w / 2), abs(patch.radii[1] - h / 2))
    report(2, "Geometry exactness", worst <= 1e-9, f"10,000 cases, max error {worst:.2e} (<= 1e-9)")


# 3 -------------------------------------------------------------------------


class FixedScorer:
    def __init__(self, scores):
        self.scores = np.asarray(scores, dtype=float)

    def score(self, patch, candidates):
        return self.scores


def first_argmax(xs):
    best = 0
    for i, x in enumerate(xs):
        if x > xs[best]:
            best = i
    return best


def test_softmax_contract():
    rnd = random.Random(3)
    failures = []
    worst_norm = 0.0
    vectors = []
    for _ in range(2000):
        n = rnd.randint(1, 12)
        kind = rnd.randrange(5)
        if kind == 0:
            vectors.append(([rnd.randint(-50, 50) for _ in range(n)], rnd.randint(-10**6, 10**6)))
        elif kind == 1:
            vectors.append(([rnd.randint(-9, 9) * 2.0**990 for _ in range(n)], rnd.randint(-9, 9) * 2.0**990))
        elif kind == 2:
            vectors.append(([rnd.randint(-9, 9) * 2.0**-1000 for _ in range(n)], rnd.randint(-9, 9) * 2.0**-1000))
        elif kind == 3:
            vectors.append(([rnd.randint(0, 3) * 0.25 for _ in range(n)], 0.0))
        else:
            vectors.append(([float(rnd.randint(-5, 5))] * n, rnd.randint(-100, 100)))
    vectors += [
        ([1e308, -1e308], 0.0),
        ([-1e308, 1e308, 1e308], 0.0),
        ([1e-300, 0.0, -1e-300], 0.0),
        ([0.0] * 7, 0.0),
        ([5.0], 1e300),
    ]
    for xs, c in vectors:
        p = softmax(xs)
        q = softmax([x + c for x in xs])
        worst_norm = max(worst_norm, abs(p.sum() - 1.0), abs(q.sum() - 1.0))
        if not (p >= 0).all():
            failures.append(("negative", xs))
        # each shifted vector is exactly representable, so the argmax must not move
        if first_argmax(p) != first_argmax(q):
            failures.append(("shift", xs, c))
        # gaps of order 2**-1000 are below what exp resolves: the probabilities tie
        expected = 0 if max(map(abs, xs)) < 1e-290 else first_argmax(xs)
        if first_argmax(p) != expected:
            failures.append(("argmax", xs, c))

    cands = [f"c{i}" for i in range(5)]
    patch = draw_red_circle(extend_patch(Image(np.zeros((3, 40, 40))), BBox(5, 5, 30, 30), 1.2))
    for scores, expected in [([0, 0, 0, 0, 0], 0), ([1, 3, 3, 0, 3], 1), ([-2, -2, -5, 1e3, 1e3], 3)]:
        r = score_patch(patch, cands, FixedScorer(scores))
        if r.argmax != expected:
            failures.append(("tie", scores, r.argmax))
    report(3, "Softmax contract", not failures and worst_norm <= 1e-9,
           f"{len(vectors)} vectors, max |sum-1| {worst_norm:.1e}, {len(failures)} failures")


# 4 -------------------------------------------------------------------------


def test_metrics_match_pixel_set_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    identity_ok = True
    undefined_mismatch = 0
    for _ in range(200):
        k = int(rng.integers(1, 5))
        present = rng.choice(np.arange(0, k + 1), size=int(rng.integers(1, k + 2)), replace=False)
        pred = rng.choice(present, (64, 64))
        gt = rng.choice(rng.permutation(present)[: max(1, len(present) - 1)], (64, 64))
        r = compute_report(accumulate(ConfusionMatrix(k), LabelMask(pred, k), LabelMask(gt, k)))
        o = pixel_set_metrics(pred.tolist(), gt.tolist(), k)
        for name, value in r.metrics().items():
            if (value is None) != (o[name] is None):
                undefined_mismatch += 1
            elif value is not None:
                worst = max(worst, abs(value - o[name]))
        for c, p in r.per_class.items():
            if abs(p["dice"] - 2 * p["iou"] / (1 + p["iou"])) > 1e-12:
                identity_ok = False
    ok = worst <= 1e-12 and identity_ok and not undefined_mismatch
    report(4, "Metrics oracle equivalence", ok,
           f"200 pairs, max error {worst:.1e} (<= 1e-12), dice/IoU identity {'holds' if identity_ok else 'broken'}")


# 5 -------------------------------------------------------------------------


def test_end_to_end_mock_run(tmp_path):
    corpus = write_mock_corpus(tmp_path / "corpus", n_images=10, seed=5)
    cfg = load_config(corpus["config"])
    first = run(cfg, corpus["images"], tmp_path / "run1")
    second = run(cfg, corpus["images"], tmp_path / "run2")
    rep = evaluate(tmp_path / "run1", corpus["gt"], cfg.prompts)

    scenes = load_scenes(corpus["scenes"])
    records = {r["image"]: r for r in first.records}
    rejected, planted = 0, 0
    for stem, scene in scenes.items():
        for shape in scene.shapes:
            if not shape.is_distractor:
                continue
            planted += 1
            hits = [d for d in records[stem]["detections"] if d["bbox"] == list(shape.rect.as_tuple())]
            if hits and not any(d["kept"] for d in hits):
                rejected += 1

    identical = (tmp_path / "run1" / "manifest.jsonl").read_bytes() == (tmp_path / "run2" / "manifest.jsonl").read_bytes()
    identical &= all(
        (tmp_path / "run1" / f"{s}.png").read_bytes() == (tmp_path / "run2" / f"{s}.png").read_bytes()
        for s in scenes
    )
    ok = first.exit_status == 0 and rep.miou >= 0.99 and rejected == planted and identical
    report(5, "End-to-end mock run", ok,
           f"MIoU {rep.miou:.4f} (>= 0.99), distractors rejected by filter {rejected}/{planted}, "
           f"rerun bit-identical: {identical}")


# 6 -------------------------------------------------------------------------


def _distractor_removal(row, scenes):
    removed = total = 0
    for stem, scene in scenes.items():
        labels = row.result.masks[stem]
        for i, shape in enumerate(scene.shapes):
            if shape.is_distractor:
                total += 1
                removed += not labels[scene.shape_mask(i)].any()
    return removed, total


def test_ablation_structure(tmp_path):
    corpus = write_mock_corpus(
        tmp_path / "abl", n_images=20, seed=6,
        backend={"duplicates": 3, "min_size": 10, "max_size": 48},
    )
    start = time.perf_counter()
    rows = ablate(load_config(corpus["config"]), corpus["images"], corpus["gt"])
    elapsed = time.perf_counter() - start
    scenes = load_scenes(corpus["scenes"])

    mious = [r.report.miou for r in rows]
    monotone = all(b >= a for a, b in zip(mious, mious[1:]))
    removal = {r.key: _distractor_removal(r, scenes) for r in rows}
    exact = all((removed == total) == r.config.use_filter for r, (removed, total) in zip(rows, removal.values()))
    ok = monotone and exact and elapsed < 60
    detail = ", ".join(f"({r.key}) {m:.4f}" for r, m in zip(rows, mious))
    removed_text = ", ".join(f"({k}) {a}/{b}" for k, (a, b) in removal.items())
    report(6, "Ablation structure", ok,
           f"MIoU {detail}; distractors removed {removed_text}; {elapsed:.1f} s (< 60 s)")


# 7 -------------------------------------------------------------------------


def _band_oracle(h, w, cx, cy, a, b, sw):
    """Pixels whose centre is inside the ellipse but not inside the one shrunk by sw."""
    band = np.zeros((h, w), bool)
    for r in range(h):
        for c in range(w):
            dx, dy = c + 0.5 - cx, r + 0.5 - cy
            inside = (dx / a) ** 2 + (dy / b) ** 2 <= 1
            core = a > sw and b > sw and (dx / (a - sw)) ** 2 + (dy / (b - sw)) ** 2 < 1
            band[r, c] = inside and not core
    return band


def _run_length(values):
    longest = run = 0
    for v in values:
        run = run + 1 if v else 0
        longest = max(longest, run)
    return longest


@pytest.mark.parametrize("size", [(31, 31), (151, 101), (301, 201)])
def test_red_circle_rendering(size):
    bw, bh = size
    img = Image(np.random.default_rng(bw).integers(0, 200, (3, 400, 400)).astype(float))
    box = BBox(40, 60, 40 + bw, 60 + bh)
    problems = []

    p = extend_patch(img, box, 1.0)
    ann = draw_red_circle(p)
    before, after = p.pixels.pixels, ann.pixels.pixels
    changed = np.any(before != after, axis=0)
    sw = stroke_width(bh, bw)
    if sw != max(2, math.floor(0.02 * math.hypot(bh, bw) + 0.5)):
        problems.append("width")
    if not np.array_equal(changed, _band_oracle(bh, bw, bw / 2, bh / 2, bw / 2, bh / 2, sw)):
        problems.append("band")
    if not (np.all(after[0][changed] == 255) and np.all(after[1:, changed] == 0)):
        problems.append("colour")
    # odd sides put a pixel row and column exactly on the centre lines
    row, col = changed[bh // 2], changed[:, bw // 2]
    runs = (_run_length(row[: bw // 2]), _run_length(row[bw // 2:][::-1]),
            _run_length(col[: bh // 2]), _run_length(col[bh // 2:][::-1]))
    if set(runs) != {sw}:
        problems.append(f"runs {runs}")

    for m in (1.2, 1.5):
        q = extend_patch(img, box, m)
        qa = draw_red_circle(q)
        diff = np.any(q.pixels.pixels != qa.pixels.pixels, axis=0)
        if not (diff.any() and np.all(qa.pixels.pixels[0][diff] == 255) and np.all(qa.pixels.pixels[1:, diff] == 0)):
            problems.append(f"colour x{m}")
        if (diff & ~_band_oracle(*diff.shape, *q.center, *q.radii, q.stroke_width)).any():
            problems.append(f"band x{m}")
    report(7, f"Red-circle rendering {bw}x{bh}", not problems,
           f"stroke width {sw}, changed pixels {int(changed.sum())}, issues {problems or 'none'}")


# 8 -------------------------------------------------------------------------


def test_determinism_and_manifest_monotonicity(tmp_path):
    corpus = write_mock_corpus(
        tmp_path / "c", n_images=20, seed=8,
        backend={"duplicates": 3, "min_size": 10, "max_size": 48},
    )
    cfg = load_config(corpus["config"])
    rows_1 = ablate(cfg, corpus["images"], corpus["gt"], tmp_path / "a1")
    ablate(cfg, corpus["images"], corpus["gt"], tmp_path / "a2")

    identical = True
    checked = violations = 0
    for row in rows_1:
        d1, d2 = tmp_path / "a1" / f"row_{row.key}", tmp_path / "a2" / f"row_{row.key}"
        for f in sorted(p.name for p in d1.iterdir() if p.name != "timings.jsonl"):
            identical &= (d1 / f).read_bytes() == (d2 / f).read_bytes()
        for line in (d1 / "manifest.jsonl").read_text().splitlines():
            rec = json.loads(line)
            checked += 1
            if not (rec["status"] == "ok" and rec["post_filter"] <= rec["post_nms"] <= rec["raw"]):
                violations += 1
    identical &= (tmp_path / "a1" / "ablation.json").read_bytes() == (tmp_path / "a2" / "ablation.json").read_bytes()
    report(8, "Determinism and manifest monotonicity", identical and not violations and checked == 80,
           f"{checked} records over 4 configurations, {violations} violations, reruns bit-identical: {identical}")
