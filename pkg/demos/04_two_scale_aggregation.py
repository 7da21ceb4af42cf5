"""Merging large-scale and small-scale detections of one frame.

The small pass sees shrunken objects, so big things that fragment at
full resolution often come back as several clean parts.  mask_agg
keeps a large detection only while no matched or covering group from
the small pass beats it, and ships unmatched small detections through
unchanged.
"""
import numpy as np

from mobilabel import AggParams, InstanceLabel, LabelSet, mask_agg

H, W = 48, 64


def rect(y, x, h, w):
    m = np.zeros((H, W), dtype=bool)
    m[y:y + h, x:x + w] = True
    return m


# the large pass found one blobby detection covering two real objects
big = rect(10, 10, 20, 40)
large = LabelSet("f", H, W, [InstanceLabel.from_mask(big, 0.70, 0)])

# the small pass resolved the two halves, plus a new find elsewhere
left = rect(10, 10, 20, 18)
right = rect(10, 32, 20, 18)
extra = rect(36, 50, 8, 10)
small = LabelSet("f", H, W, [
    InstanceLabel.from_mask(left, 0.85, 0),
    InstanceLabel.from_mask(right, 0.80, 1),
    InstanceLabel.from_mask(extra, 0.95, 2),
])

merged = mask_agg(large, small, AggParams())
print("large %d + small %d -> merged %d" % (
    len(large.instances), len(small.instances), len(merged.instances)))
for inst in merged.instances:
    print("  score %.2f area %4d box %s" % (inst.score, inst.area, inst.box))

# raise the coverage bar and the group no longer wins
strict = mask_agg(large, small, AggParams(cover_frac=0.95))
print("with cover_frac=0.95 the big mask survives:",
      any(inst.area == int(big.sum()) for inst in strict.instances))
