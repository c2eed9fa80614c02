"""Quarterly crisis-phase anchors to a monthly index.

The severity phases arrive quarterly; the forecasting targets are monthly.
This walks the interpolation: exact at anchors, affine between them, held
constant outside the anchored span.
"""
from gistcast.panel import Month, QuarterlyIpcSeries, interpolate_ipc

series = QuarterlyIpcSeries("ML", (
    (Month(2019, 1), 2.0),
    (Month(2019, 4), 3.0),
    (Month(2019, 7), 3.0),
    (Month(2019, 10), 1.5),
))

print("anchors:")
for month, value in series.points:
    print(f"  {month}  phase={value}")

print("\nmonthly index (held one month past the last anchor):")
for month, value in interpolate_ipc(series, end=Month(2019, 12)):
    marker = " <- anchor" if any(month == m for m, _ in series.points) else ""
    print(f"  {month}  fci={value:.4f}{marker}")
