"""Reference values computed once with mpmath (25-30 digits) and frozen.

``alpha_j`` is ``2 int_0^1 r^{2j+1} omega(r) dr``.  Integrals were split at
fixed break points and cut where the integrand is below ``e^{-380}`` of its
peak.
"""

ALPHA_W011 = {0: 0.037534261820490453, 1: 0.0074008820226745596,
              2: 0.0022903434385189682, 5: 0.00018574075944609367}
ALPHA_W111 = {0: 0.00054710123610377682, 3: 1.7772199370832671e-6}
ALPHA_W021 = {0: 0.021283035250828595}

# 2 int r omega / (1 + phi')^2 for w0:1:1, the p = 2 damped norm of f' = 1
LP_NUM_Z_P2_W011 = 0.0096534300881537783
# 2 int r (1 + 4r^2 + r^4) omega^2 for w0:1:1, the 4th power of the p = 4 norm of 1 + z
NORM4_1PZ_W011 = 0.0050446081905495228
# 2 int r^2 omega^{1/2} for w0:1:1, the p = 1 norm of z
NORM1_Z_W011 = 0.07020147675297541
# int_0^{1/2} (1 + phi' + phi'')^{1/2} dt for w0:1:1
TAU_DIST_0_HALF_W011 = 1.1207922722736329
# sup_r 2r / (1 + phi'(r)) for w0:1:1 and the maximizing radius
BLOCH_Z_Q2_SQ_W011 = 0.37534528542421725
BLOCH_Z_Q2_ARGMAX_W011 = 0.41421356237309505
