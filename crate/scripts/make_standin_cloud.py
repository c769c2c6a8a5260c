#!/usr/bin/env python3
"""Writes the synthetic stand-in cloud used when the Stanford Bunny is not
available: a body, head, two ears and a tail, sampled on ellipsoid surfaces."""
import sys

import numpy as np

rng = np.random.default_rng(20240607)
# center, radii, share of points
parts = [
    ((0.00, 0.00, 0.00), (0.55, 0.40, 0.42), 0.50),
    ((0.50, 0.00, 0.32), (0.24, 0.22, 0.22), 0.20),
    ((0.58, 0.09, 0.70), (0.06, 0.05, 0.24), 0.10),
    ((0.52, -0.10, 0.68), (0.06, 0.05, 0.22), 0.10),
    ((-0.56, 0.00, 0.10), (0.10, 0.10, 0.10), 0.10),
]
total = 4000
points = []
for center, radii, share in parts:
    n = int(round(share * total))
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    bump = 1.0 + 0.04 * np.sin(7 * d[:, 0]) * np.cos(5 * d[:, 1])
    points.append(np.asarray(center) + d * np.asarray(radii) * bump[:, None])
points = np.concatenate(points)
out = sys.argv[1] if len(sys.argv) > 1 else "crates/rotavg/data/standin_cloud.xyz"
np.savetxt(out, points, fmt="%.6f")
