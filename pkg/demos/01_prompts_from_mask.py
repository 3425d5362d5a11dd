"""From a binary vessel mask to the three prompt types and their graph.

Run:  python demos/01_prompts_from_mask.py [out_dir]
"""

import sys
from pathlib import Path

from vessam.cli import overlay
from vessam.prompts import generate_prompt_set, serialize_prompts
from vessam.raster import save_gray
from vessam.skeleton import is_thin
from vessam.synthgen import TreeSpec, generate_vessel_tree
from vessam.topology import build_graph, graph_to_dot, normalized_adjacency

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

# A procedurally grown tree with three recorded branch points.
mask, truth = generate_vessel_tree(TreeSpec(seed=11, size=48, branch_events=3, width_px=2, wiggle=0.4))
print(f"mask {mask.width}x{mask.height}, {int(mask.array.sum())} foreground pixels")
print("generator branch points (x, y):", [(p.x, p.y) for p in truth.branch_points])

# Thinning, junction clustering and segment tracing all happen here.
ps = generate_prompt_set(mask)
print(f"skeleton: {int(ps.skeleton.array.sum())} pixels, thin={is_thin(ps.skeleton)}")
print("detected bifurcations (x, y):", [(p.x, p.y) for p in ps.bifurcations])
print(f"{len(ps.midpoints)} segment midpoints, first three with tangents:")
for m in ps.midpoints[:3]:
    print(f"  ({m.point.x}, {m.point.y})  t=({m.tangent[0]:+.2f}, {m.tangent[1]:+.2f})")

# Terminal picture: '.' background, ':' mask, '+' skeleton, 'B'/'M' prompts.
art = [[":" if v else "." for v in row] for row in mask.array]
for y, x in zip(*ps.skeleton.array.nonzero()):
    art[y][x] = "+"
for m in ps.midpoints:
    art[m.point.y][m.point.x] = "M"
for b in ps.bifurcations:
    art[b.y][b.x] = "B"
print("\n".join("".join(r) for r in art))

graph = build_graph(ps)
a = normalized_adjacency(graph)
print(f"graph: {graph.n} nodes, {len(graph.edges)} edges; normalized adjacency row sums "
      f"{a.sum(axis=1).min():.2f}..{a.sum(axis=1).max():.2f}")

(out / "prompts.json").write_bytes(serialize_prompts(ps))
(out / "graph.dot").write_text(graph_to_dot(graph))
(out / "overlay.pgm").write_bytes(save_gray(overlay(mask, ps)))
print(f"wrote prompts.json, graph.dot and overlay.pgm to {out}/")
