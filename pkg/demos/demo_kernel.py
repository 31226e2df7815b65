"""
Kernel conic SVM
================

The same training problem in its kernel form: the decision function is
``sum_j alpha_j y_j k(x_j, x)``. A Gaussian kernel separates XOR-like data
that no hyperplane can.
"""

import numpy as np

from conicsvm.core import Kernel, LabeledDataset, misclassification_rate
from conicsvm.formulations import train_conic, train_kernel_conic

rng = np.random.default_rng(1)
X = rng.uniform(-1, 1, size=(60, 2))
y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
data = LabeledDataset(X, y)

linear = train_conic(data, lam=1.0)
print("linear training error  ", misclassification_rate(linear, data))

for h in (0.2, 0.5, 1.0):
    model = train_kernel_conic(data, Kernel.gaussian(h), lam=1.0)
    print(f"gaussian h={h}: training error {misclassification_rate(model, data):.3f}")

###############################################################################
# Fresh points from the same distribution.
Xt = rng.uniform(-1, 1, size=(2000, 2))
test = LabeledDataset(Xt, np.where(Xt[:, 0] * Xt[:, 1] > 0, 1.0, -1.0))
model = train_kernel_conic(data, Kernel.gaussian(0.5), lam=1.0)
print("gaussian h=0.5 test error", misclassification_rate(model, test))
