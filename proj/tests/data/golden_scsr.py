"""Writes the pinned SCSR files for tiny_edges.txt straight from the
container layout, without the library.

    python3 golden_scsr.py tiny_edges.txt golden --nodes 6 --interval 10 --edge-life 2 --slice-cap 2
"""
import argparse
import os
import struct


def load(path, interval, life):
    events = []
    for line_no, line in enumerate(open(path)):
        f = line.split()
        if not f or f[0][0] in "#%":
            continue
        w = float(f[3]) if len(f) == 4 else 1.0
        events.append((int(f[2]), line_no, int(f[0]), int(f[1]), w))
    length = max(ts // interval for ts, *_ in events) + 1
    alive = [dict() for _ in range(length)]
    for ts, _, s, d, w in sorted(events):
        b = ts // interval
        for u in range(b, min(b + life, length)):
            alive[u][(s, d)] = w  # later timestamp wins
    return alive


def scsr(edges, nodes, cap):
    ri, so, cols, vals = [], [0], [], []
    for r in range(nodes):
        row = sorted((d, w) for (s, d), w in edges.items() if s == r)
        for k in range(0, len(row), cap):
            chunk = row[k:k + cap]
            ri.append(r)
            cols += [d for d, _ in chunk]
            vals += [w for _, w in chunk]
            so.append(len(cols))
    out = b"SCSR" + struct.pack("<IIQQ", 1, cap, len(ri), len(cols))
    out += struct.pack(f"<{len(ri)}I", *ri) + struct.pack(f"<{len(so)}I", *so)
    out += struct.pack(f"<{len(cols)}I", *cols) + struct.pack(f"<{len(vals)}f", *vals)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("input")
    ap.add_argument("out")
    ap.add_argument("--nodes", type=int, required=True)
    ap.add_argument("--interval", type=int, default=1)
    ap.add_argument("--edge-life", type=int, default=1)
    ap.add_argument("--slice-cap", type=int, default=32)
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    for t, edges in enumerate(load(a.input, a.interval, a.edge_life)):
        with open(os.path.join(a.out, f"snap_{t:06d}.scsr"), "wb") as fh:
            fh.write(scsr(edges, a.nodes, a.slice_cap))


if __name__ == "__main__":
    main()
