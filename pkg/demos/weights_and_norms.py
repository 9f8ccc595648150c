"""Weight diagnostics, Bergman norms and Bloch-type seminorms for a few symbols."""

import numpy as np

from paraprod import TruncatedSeries, bergman_norm, bloch_seminorm, parse_weight, self_check
from paraprod.norms import lp_ratio

for text in ["w0:1:1", "w0:2:0.5", "w1:1:1", "w2:1:1"]:
    rep = self_check(parse_weight(text))
    print(f"{text:>9}: checks {'pass' if rep.passed else 'fail'}, eta={rep.eta}, r_cut={rep.r_cut:.6f}")

spec = parse_weight("w0:1:1")
print()
for k in range(4):
    z_k = TruncatedSeries.monomial(k)
    print(f"||z^{k}||_2 = {bergman_norm(z_k, spec, 2).value:.12e}")

g = TruncatedSeries([0.3, 1.0, -0.4 + 0.2j])
for q in (1, 2, 3):
    est = bloch_seminorm(g, spec, q)
    print(f"Bloch q={q}: {est.value:.8f} at z={np.round(est.argmax, 4)}")
for p in (2, 4):
    print(f"LP ratio p={p}: {lp_ratio(g, spec, p):.6f}")
