#!/usr/bin/env python3
"""Writes the bundled gridworld and surveillance models into assets/."""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "assets"

MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
REGIONS = {
    "blue": [(r, c) for r in (4, 5) for c in (0, 1)],
    "red": [(r, c) for r in (0, 1) for c in (4, 5)],
    "yellow": [(r, c) for r in (2, 3) for c in (2, 3)],
    "green": [(r, c) for r in (4, 5) for c in (4, 5)],
}


def grid(n=6, success=0.99):
    name = lambda r, c: f"r{r}c{c}"
    states = [name(r, c) for r in range(n) for c in range(n)]
    slip = (1.0 - success) / 3.0
    transitions = []
    for r in range(n):
        for c in range(n):
            for action in MOVES:
                probs = {}
                for direction, (dr, dc) in MOVES.items():
                    nr, nc = r + dr, c + dc
                    if not (0 <= nr < n and 0 <= nc < n):
                        nr, nc = r, c
                    p = success if direction == action else slip
                    probs[name(nr, nc)] = probs.get(name(nr, nc), 0.0) + p
                for to, p in probs.items():
                    transitions.append({"from": name(r, c), "action": action, "to": to, "prob": p})
    labels = {}
    for prop, cells in REGIONS.items():
        for r, c in cells:
            labels.setdefault(name(r, c), []).append(prop)
    return {"states": states, "initial": name(0, 0), "actions": list(MOVES),
            "transitions": transitions, "labels": labels}


def surveillance():
    states = ["S1", "S2", "S3", "S4", "S5"]
    edges = {("S1", s) for s in states[1:]}
    ring = ["S2", "S3", "S4", "S5"]
    edges |= {(ring[i], ring[(i + 1) % 4]) for i in range(4)}
    adjacent = lambda a, b: a == b or (a, b) in edges or (b, a) in edges
    transitions = []
    for s in states:
        for target in states:
            to = target if adjacent(s, target) else s
            transitions.append({"from": s, "action": f"go{target}", "to": to, "prob": 1.0})
    labels = {"S2": ["blue"], "S3": ["red"], "S4": ["yellow"], "S5": ["green"]}
    return {"states": states, "initial": "S1", "actions": [f"go{s}" for s in states],
            "transitions": transitions, "labels": labels}


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    (OUT / "grid6x6.json").write_text(json.dumps(grid(), indent=1) + "\n")
    (OUT / "surveillance.json").write_text(json.dumps(surveillance(), indent=1) + "\n")
