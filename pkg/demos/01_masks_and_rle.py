"""Mask basics: RLE round trips, boxes, IoU, components, NMS."""
import numpy as np

from mobilabel import (
    InstanceLabel,
    LabelSet,
    bbox_of,
    connected_components,
    mask_area,
    mask_iou,
    nms,
    rle_decode,
    rle_encode,
)

rng = np.random.default_rng(7)

# a small binary mask with two blobs and a stray pixel
mask = np.zeros((12, 20), dtype=bool)
mask[2:6, 3:9] = True
mask[7:11, 12:18] = True
mask[0, 19] = True

rle = rle_encode(mask)
print("rle counts:", rle.counts)
print("round trip exact:", np.array_equal(rle_decode(rle), mask))
print("area:", mask_area(mask), "box:", bbox_of(mask))

# connected components split the blobs back apart
parts = connected_components(mask)
print("components:", len(parts), "areas:", sorted(mask_area(p) for p in parts))

# IoU of two shifted copies of the same rectangle
a = np.zeros((16, 16), dtype=bool)
a[2:10, 2:10] = True
b = np.roll(a, 4, axis=1)
print("iou shifted by half:", mask_iou(a, b))

# NMS keeps the best-scoring of heavily overlapping proposals
base = np.zeros((24, 24), dtype=bool)
base[4:16, 4:16] = True
insts = []
for i in range(5):
    m = np.roll(base, i, axis=0)
    insts.append(InstanceLabel.from_mask(m, score=float(rng.uniform(0.3, 1.0)), instance_id=i))
far = np.zeros((24, 24), dtype=bool)
far[18:23, 18:23] = True
insts.append(InstanceLabel.from_mask(far, score=0.4, instance_id=5))

proposals = LabelSet("demo", 24, 24, insts)
kept = nms(proposals, iou_thrd=0.5)
print("proposals:", len(proposals.instances), "-> kept:", len(kept.instances))
for inst in kept.instances:
    print("  id %d score %.3f area %d" % (inst.instance_id, inst.score, inst.area))
