#!/usr/bin/env python3
"""Regenerates src/brief_pattern.cpp (the fixed steered-BRIEF sampling table)."""
import random

SEED = 20200531
SIGMA = 31.0 / 5.0
RADIUS = 13

rng = random.Random(SEED)


def sample():
    while True:
        x = round(rng.gauss(0.0, SIGMA))
        y = round(rng.gauss(0.0, SIGMA))
        if x * x + y * y <= RADIUS * RADIUS:
            return x, y


pairs = []
while len(pairs) < 256:
    p, q = sample(), sample()
    if p != q:
        pairs.append((p[0], p[1], q[0], q[1]))

rows = ",\n".join("    {%d, %d, %d, %d}" % t for t in pairs)
print(f"""// Generated by tools/scripts/gen_brief_pattern.py (seed {SEED}); do not edit.
#include "treereg/image_features.hpp"

namespace treereg {{

namespace {{

constexpr BriefPair kPattern[256] = {{
{rows}}};

}}  // namespace

std::span<const BriefPair, 256> brief_pattern() {{ return std::span<const BriefPair, 256>(kPattern); }}

}}  // namespace treereg""")
