"""
Three classifiers on toy problems
=================================

k-NN, the SGD-trained linear model and gradient-boosted trees on two
small datasets: Gaussian blobs, which all three separate, and XOR, which
only the trees can.
"""

import numpy as np

from szclass.classifiers import fit_model, predict_labels

rng = np.random.default_rng(0)

# three blobs in 2-D
centers = np.array([[0, 0], [5, 0], [0, 5]])
y_blobs = np.repeat([0, 3, 6], 60)
X_blobs = centers[[0] * 60 + [1] * 60 + [2] * 60] + rng.standard_normal((180, 2))

# XOR: the label depends on the product of the signs
X_xor = rng.uniform(-1, 1, (300, 2))
y_xor = ((X_xor[:, 0] > 0) ^ (X_xor[:, 1] > 0)).astype(int)

params = {
    "knn": {"k": 5},
    "sgd": {"epochs": 30, "lr": 0.05},
    "gbt": {"rounds": 50, "depth": 2, "learning_rate": 0.3},
}
for name, X, y in (("blobs", X_blobs, y_blobs), ("xor", X_xor, y_xor)):
    for kind, p in params.items():
        model = fit_model(kind, p, X, y, seed=0)
        acc = np.mean(predict_labels(model, X) == y)
        print("%-5s %-3s training accuracy %.3f" % (name, kind, acc))
