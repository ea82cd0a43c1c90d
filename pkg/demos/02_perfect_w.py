"""Synthesize a perfect W state: half the weight on the first pump mode.

Perfect W states put probability 1/2 on one distinguished mode and spread
the rest evenly, which makes every pairwise reduction maximally entangled.
The only change from the standard recipe is the drive ratio and timing.
"""

import pathlib

from fbsim.protocols import run_preset

OUT = pathlib.Path(__file__).resolve().parent.parent / "demo_output"
OUT.mkdir(exist_ok=True)

for n in (3, 4, 6):
    result = run_preset("w-perfect", {"n": n, "alpha": 1.0})
    probs = result.final_state.probabilities()
    basis = result.final_state.basis
    pattern = []
    for k in range(n):
        occ = [0] * (n + 1)
        occ[k] = 1
        pattern.append(probs[basis.index_of(tuple(occ))])
    want_rest = 1.0 / (2.0 * (n - 1))
    print(f"perfect W, N = {n}: fidelity {result.fidelity:.12f}")
    print(f"  P(pump 1) = {pattern[0]:.9f}  (want 0.5)")
    print(f"  P(pump n) = {pattern[1]:.9f}  (want {want_rest:.9f})"
          f"  for n = 2..{n}")
    with open(OUT / f"perfect_w_n{n}.txt", "w") as fh:
        for k, p in enumerate(pattern):
            fh.write(f"pump {k + 1}\t{p:.12f}\n")
print(f"wrote pattern files to {OUT}")
