"""Small-scale copy of the modeling sweep: four methods, three comparable counts.

Prints the per-cell means for the three harness metrics. The full-size run
lives in the acceptance suite; this one finishes in about a minute.
"""

from comparables.evaluation import SweepSpec, run_sweep
from comparables.selection import Method
from comparables.trace import DesiderataConfig


def main():
    spec = SweepSpec(
        task="sinlin3",
        methods=tuple(Method),
        axis="comparables",
        ks=(2, 4, 8),
        n_subjects=4,
        seeds=(0, 1, 2),
        n_rows=2000,
        noise_std=0.0,
        trace_config=DesiderataConfig(
            lambda_s=1.0, lambda_d=1.0, lambda_m=0.1, lambda_e=0.1, max_epochs=240
        ),
    )
    report = run_sweep(spec)
    for metric in ("unfaithfulness", "prediction_error", "bounds_width"):
        print(f"\n{metric} by number of comparables")
        print(f"{'method':16s}" + "".join(f"  k={k:<6d}" for k in spec.ks))
        for method in spec.methods:
            cells = [report.mean(method, float(k), metric) for k in spec.ks]
            print(f"{method.value:16s}" + "".join(f"  {v:8.4f}" for v in cells))


if __name__ == "__main__":
    main()
