"""Moments, kernel diagnostics and a reproducing-property check."""

import numpy as np

from paraprod import TruncatedSeries, parse_weight
from paraprod.kernel import diagonal_ratio, kernel_norm_ratio, moments, required_cap, verify_reproducing

spec = parse_weight("w0:1:1")
table = moments(spec, 255)
print("alpha_0..alpha_4:", np.round(table.alpha(np.arange(5)), 10))

for a in (0.0, 0.3, 0.6, 0.9):
    cap, table = required_cap(a, spec, table=table)
    print(f"a={a:.1f} cap={cap:5d} diagonal={diagonal_ratio(a, spec, table):.5f} "
          f"p=1 norm ratio={kernel_norm_ratio(a, spec, 1.0, table):.5f}")

res = verify_reproducing(TruncatedSeries([0, 1, 0.5j, 0, -1]), 0.4 + 0.3j, spec, table)
print("reproducing residuals:", res)
