"""
The conic loss
==============

The conic loss sits between zero (correct side of the margin) and the flat
penalty ``lambda`` (deep misclassification), with a concave quadratic ramp in
between. Unlike the hinge loss it is bounded, so far-away outliers cost no
more than ``lambda`` each.
"""

import numpy as np

from conicsvm.loss import ConicLossParams, conic_loss, conic_loss_argmin_z, hinge_loss, zero_one_loss

###############################################################################
# Sample the three losses over a range of margins ``u = y x^T w``.
params = ConicLossParams(gamma=0.25, lam=1.0)
u = np.linspace(-3.0, 1.5, 10)

print(f"breakpoint: 1 - u = {params.breakpoint:.2f}")
print(f"{'u':>6} {'0-1':>6} {'hinge':>7} {'conic':>7} {'z*':>6}")
for ui, a, b, c, z in zip(u, zero_one_loss(u), hinge_loss(u), conic_loss(u, params),
                          conic_loss_argmin_z(u, params)):
    print(f"{ui:6.2f} {a:6.1f} {b:7.3f} {c:7.3f} {z:6.3f}")

###############################################################################
# A larger ``gamma`` makes the ramp steeper and the loss closer to the
# scaled 0-1 loss; ``gamma -> 0`` flattens it towards zero.
for gamma in (0.05, 0.25, 1.0, 4.0):
    print(gamma, conic_loss(0.5, ConicLossParams(gamma, 1.0)))
