"""Optimizing the input mask with the closed-form capacity.

Because the capacity formula costs milliseconds, the input mask can be
tuned directly by Nelder-Mead. The optimized mask is then ranked against
a population of uniformly drawn masks.

Run with ``python3 demos/03_mask_optimization.py``.
"""

import numpy as np

from tdrc import config
from tdrc.optimize import box_summary, maximize_capacity, random_mask_nmse

doc = config.resolve({"preset": "fig5"})
base = config.build_experiment(doc, 10)

res = maximize_capacity(base, ["mask"], {"mask": (-3.0, 3.0)}, budget=600, n_starts=3, seed=0)
values = random_mask_nmse(base, 300, -3.0, 3.0, seed=0)
box = box_summary(values)

print(f"optimized mask NMSE   {res.nmse_opt:.4f}  ({res.evaluations} evaluations)")
print(f"random masks          median {box['median']:.4f}, quartiles "
      f"[{box['q1']:.4f}, {box['q3']:.4f}], best {np.nanmin(values):.4f}")
print("mask:", " ".join(f"{v:+.2f}" for v in res.c_opt))
