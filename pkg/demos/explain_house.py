"""Walk one subject house through all four explanation methods.

Loads the bundled 20-row excerpt, fits a k-NN model as the black box, and
prints each method's estimate with its uncertainty bounds, then expands the
trace steps for the nearest comparable.
"""

from pathlib import Path

from comparables import fit_knn, fit_standardizer, load_csv, load_schema_json
from comparables.explain import build_context, explain_document
from comparables.schema import Dataset
from comparables.selection import Method
from comparables.trace import DesiderataConfig

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    schema = load_schema_json(DATA / "houses_schema.json")
    dataset = load_csv(DATA / "houses.csv", schema)

    # hold the first row out as the subject
    subject, actual = dataset.rows[0]
    candidates = Dataset(schema=schema, rows=dataset.rows[1:], provenance="demo")
    std = fit_standardizer(candidates)
    predictor = fit_knn(candidates, std, k=4)
    ctx = build_context(candidates, predictor)

    print(f"subject: {dict(zip(schema.names, subject.values))}")
    print(f"actual price: ${actual:,.0f}\n")

    cfg = DesiderataConfig(max_epochs=400)
    for method in Method:
        doc = explain_document(
            ctx, subject, method, k=3, cfg=cfg, seed=11, subject_actual=actual
        )
        low, high = doc["estimate"]["bounds"]
        print(
            f"{method.value:15s} estimate ${doc['estimate']['value']:>10,.0f}"
            f"   bounds [${low:,.0f}, ${high:,.0f}]"
        )
        if method == Method.TRACE_ADJUSTMENTS:
            steps = doc["detail"]["traces"][0]["steps"]
            print("\n  trace of the most similar comparable:")
            running = steps["anchor_value"]
            print(f"    start at actual price ${running:,.0f}")
            for step in steps["steps"]:
                changes = ", ".join(
                    f"{c['attribute']} {c['from']} -> {c['to']}"
                    for c in step["changed_attributes"]
                ) or "(no visible change)"
                print(
                    f"    {changes}: {step['money_delta']:+,.0f}"
                    f" => ${step['running_value']:,.0f}"
                )


if __name__ == "__main__":
    main()
