"""Walk a deliberately messy table through the full preprocessing pipeline.

The table below has a bit of everything: a duplicated row, a constant column,
a mostly-missing column, an ordinal grade, a categorical site code, a
timeseries group that gets row-summed, and scattered missing numerics that
MICE has to fill before standardization.
"""

import csv
import tempfile
from pathlib import Path

from tabmtl import ColumnDescriptor, load_csv, preprocess_pipeline

schema = (
    ColumnDescriptor("id", "identifier"),
    ColumnDescriptor("age", "numeric"),
    ColumnDescriptor("weight", "numeric"),
    ColumnDescriptor("grade", "ordinal", mapping={"low": 0, "mid": 1, "high": 2}),
    ColumnDescriptor("site", "categorical", levels=("a", "b")),
    ColumnDescriptor("dose_1", "timeseries", group="dose"),
    ColumnDescriptor("dose_2", "timeseries", group="dose"),
    ColumnDescriptor("always_7", "numeric"),
    ColumnDescriptor("sparse", "numeric"),
    ColumnDescriptor("sick", "outcome", task_index=0, task="classification",
                     num_classes=2),
)

rows = [
    ["p01", "61", "80.1", "low", "a", "1.0", "2.0", "7", "NA", "0"],
    ["p02", "58", "", "mid", "b", "0.5", "0.5", "7", "NA", "1"],
    ["p03", "49", "92.3", "high", "a", "2.0", "1.5", "7", "NA", "1"],
    ["p04", "61", "80.1", "low", "a", "1.0", "2.0", "7", "NA", "0"],  # dup of p01
    ["p05", "70", "77.7", "mid", "b", "", "1.0", "7", "3.2", "0"],
    ["p06", "66", "85.0", "low", "a", "1.5", "", "7", "NA", "1"],
    ["p07", "53", "", "high", "b", "2.5", "2.5", "7", "1.1", "0"],
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "cohort.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in schema])
        writer.writerows(rows)
    table = load_csv(path, schema)

# tighten the missing-data budget so the mostly-NA column gets cut
dataset, report = preprocess_pipeline(table, max_missing_frac=0.5)

print("dropped columns:")
for item in report.dropped_columns:
    print(f"  {item['name']}: {item['reason']}")
print(f"duplicate rows removed: {report.duplicates_removed}")

print(f"\nfinal feature names: {dataset.feature_names}")
print(f"feature matrix shape: {dataset.features.shape}")
print("standardized means (should be ~0):",
      [round(float(m), 6) for m in dataset.features.mean(axis=0)])
print("stored means:", [round(float(m), 3) for m in dataset.normalization_stats.mean])
