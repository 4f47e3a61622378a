"""Reference values for the C++ tests, computed without the library.

Run from this directory: python3 generate_oracles.py
Writes golden_embeddings.json and schedule_constants.json.
"""
import json
import math
import re

from mpmath import mp, mpf


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for c in data:
        h ^= c
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def embed(text: str, d: int) -> list:
    acc = [0.0] * d
    for tok in re.split(r"[^0-9a-z]+", text.lower()):
        if not tok:
            continue
        h = fnv1a64(tok.encode())
        acc[h % d] += 1.0 if (h >> 63) == 0 else -1.0
    n = math.sqrt(sum(a * a for a in acc))
    return [a / n for a in acc] if n > 0 else acc


PROMPTS = [
    "bear be in forest",
    "trees be behind train",
    "wolf be in forest, tiger be in field, trees be behind train",
    "null",
]

with open("golden_embeddings.json", "w") as f:
    json.dump({p: embed(p, 16) for p in PROMPTS}, f, indent=1)

mp.dps = 50
alpha_bar = mpf(1)
for i in range(1000):
    beta = mpf("1e-4") + (mpf("0.02") - mpf("1e-4")) * i / 999
    alpha_bar *= 1 - beta

a_from, a_to, x, eps = mpf("0.25"), mpf("0.64"), mpf(1), mpf("0.5")
x0_hat = (x - mp.sqrt(1 - a_from) * eps) / mp.sqrt(a_from)

constants = {
    "alpha_bar_1000": float(alpha_bar),
    "ddim_example_x0_hat": float(x0_hat),
    "ddim_example_result": float(mp.sqrt(a_to) * x0_hat + mp.sqrt(1 - a_to) * eps),
    "add_noise_example": float(mp.sqrt(mpf("0.25")) * 2 + mp.sqrt(mpf("0.75"))),
    "uniform_nll_16x32": float(16 * mp.log(32)),
}
with open("schedule_constants.json", "w") as f:
    json.dump(constants, f, indent=1)
