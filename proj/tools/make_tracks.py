#!/usr/bin/env python3
"""Generates the bundled track files in data/tracks.

The closed loop is a sequence of straights and circular arcs; the lengths of
the last two straights are solved so that the loop closes.
"""
import json
import math
import pathlib
import sys

import numpy as np

SPACING = 1.0


def sample(pieces, x=0.0, y=0.0, heading=0.0):
    """Samples (length, curvature) pieces at roughly SPACING metres."""
    pts = [(x, y)]
    for length, kappa in pieces:
        n = max(1, round(length / SPACING))
        ds = length / n
        for _ in range(n):
            if abs(kappa) < 1e-12:
                x += ds * math.cos(heading)
                y += ds * math.sin(heading)
            else:
                h1 = heading + kappa * ds
                x += (math.sin(h1) - math.sin(heading)) / kappa
                y -= (math.cos(h1) - math.cos(heading)) / kappa
                heading = h1
            pts.append((x, y))
    return pts, x, y, heading


def arc(radius, degrees):
    """Left turn for positive degrees, right turn for negative."""
    return (abs(math.radians(degrees)) * radius, math.copysign(1.0 / radius, degrees))


def reference_loop():
    head = [
        (150.0, 0.0),
        arc(80.0, 90.0),
        (80.0, 0.0),
        arc(80.0, 90.0),
        (60.0, 0.0),
        arc(80.0, -60.0),
        arc(80.0, 60.0),
        (60.0, 0.0),
        arc(80.0, 90.0),
    ]
    tail_arc = arc(80.0, 90.0)
    # close with a southbound straight, the last arc and an eastbound straight
    _, x, y, heading = sample(head)
    assert abs(heading - 1.5 * math.pi) < 1e-9
    _, ax, ay, _ = sample([tail_arc], 0.0, 0.0, 1.5 * math.pi)
    # (x, y) + south * a + (ax, ay) + east * b = (0, 0)
    a, b = np.linalg.solve(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([-x - ax, -y - ay]))
    if a <= 0.0 or b <= 0.0:
        raise SystemExit("loop does not close with positive straights")
    pieces = head + [(a, 0.0), tail_arc, (b, 0.0)]
    pts, x, y, _ = sample(pieces)
    assert math.hypot(x, y) < 1e-6, (x, y)
    return pts[:-1]


def straight(length=150.0):
    return [(float(i), 0.0) for i in range(int(length) + 1)]


def write(path, name, closed, pts):
    data = {"name": name, "closed": closed, "waypoints": [[round(px, 9), round(py, 9)] for px, py in pts]}
    path.write_text(json.dumps(data) + "\n")


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/tracks")
    out.mkdir(parents=True, exist_ok=True)
    write(out / "reference_loop.json", "reference_loop", True, reference_loop())
    write(out / "straight150.json", "straight150", False, straight())


if __name__ == "__main__":
    main()
