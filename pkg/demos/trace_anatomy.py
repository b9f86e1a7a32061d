"""Fit one trace on a 1-D curved function and print its anatomy.

Shows the knots, per-segment weights, derived biases, the loss breakdown,
and how the piecewise values hug the model surface.
"""

import numpy as np

from comparables import DesiderataConfig, fit_trace
from comparables.predictors import SinusoidLinearPredictor, predict


def main():
    f = SinusoidLinearPredictor(amplitude=(1.5,), frequency=(2.0,), weights=(0.5,))
    x_c, x_s = np.array([-1.5]), np.array([1.5])
    cfg = DesiderataConfig(
        lambda_s=1.0, lambda_d=0.5, lambda_m=0.5, lambda_e=0.1, segments=4, seed=2
    )
    model, breakdown = fit_trace(f, x_c, x_s, cfg)

    print("knots ->", np.round(model.knots.ravel(), 3).tolist())
    print("segment weights ->", np.round(model.weights.ravel(), 3).tolist())
    print("first bias", round(model.base_bias, 3), "| derived biases",
          np.round(model.biases, 3).tolist())

    print("\nloss breakdown")
    for name in ("total", "faithfulness", "sparsity", "disjointness", "monotonicity", "evenness"):
        print(f"  {name:14s} {getattr(breakdown, name):.4f}")
    print(f"  segment value deltas {np.round(breakdown.segment_deltas, 3).tolist()}")

    print("\ntrace vs model along the path")
    for t in np.linspace(0, 1, 9):
        x = model.point_at_param(float(t))
        print(
            f"  t={t:.2f} x={x[0]:+.2f}  trace {model.value_at_param(float(t)):+.3f}"
            f"  model {float(predict(f, x[None, :])[0]):+.3f}"
        )


if __name__ == "__main__":
    main()
