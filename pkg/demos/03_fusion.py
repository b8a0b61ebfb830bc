"""
Fusing four systems
===================

The root system keeps its own speech and gains only what the other
three agree on.  With weights 1.0 / 0.34 / 0.34 / 0.34 and a vote
threshold of 1.0, two supporting systems are not enough.
"""

from diarfuse.dover import FusionConfig, align_to_root, fuse
from diarfuse.timeline import Hypothesis, Timeline

best = Hypothesis("r", {"A": Timeline([(0, 4000)]), "B": Timeline([(6000, 9000)])})
# the others use their own labels; alignment maps them onto the root's
x = Hypothesis("r", {"p": Timeline([(0, 5000)]), "q": Timeline([(6000, 9000)])})
y = Hypothesis("r", {"m": Timeline([(0, 5000)]), "n": Timeline([(5500, 9000)])})
z = Hypothesis("r", {"u": Timeline([(500, 5000)]), "v": Timeline([(5500, 9000)]),
                     "w": Timeline([(9000, 12000)])})

for name, h in (("x", x), ("y", y), ("z", z)):
    al = align_to_root(best, h)
    print(name, "->", al.mapping, "discarded:", sorted(al.discarded))

cfg = FusionConfig.best_plus_agreement("best", ["x", "y", "z"])
fused = fuse({"best": best, "x": x, "y": y, "z": z}, cfg)
for label, tl in fused.tracks.items():
    print(label, [(s.start_ms, s.end_ms) for s in tl])
# A gains [4000, 5000) (all three agree); B does not gain [5500, 6000)
# because x is silent there; z's extra speaker w never appears
