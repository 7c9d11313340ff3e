"""
Reading improvements as relative error reduction
================================================

Near the accuracy ceiling, absolute point gains understate progress: going
from 97.8 to 97.9 removes a twentieth of the remaining errors, the same
absolute gain at 80 removes a two-hundredth. Relative error reduction
(percent of remaining errors eliminated) makes the two comparable.
"""

from jointnlu import relative_error_reduction

# Same absolute gain, very different share of errors removed.
for base in (0.80, 0.90, 0.98):
    rer = relative_error_reduction(base + 0.001, base)
    print(f"+0.1 points on top of {base:.1%}: {rer:5.2f}% of errors removed")
print()

# Two public-benchmark result sets, new system vs. prior system, all three
# headline measures. Accuracies are percentages here, so divide by 100.
BENCHMARKS = {
    "airline queries": {
        "intent_acc": (97.87, 97.76),
        "sent_acc": (88.69, 86.90),
        "slot_f1": (96.25, 95.80),
    },
    "voice commands": {
        "intent_acc": (98.86, 97.43),
        "sent_acc": (91.86, 80.90),
        "slot_f1": (96.57, 92.23),
    },
}

for name, rows in BENCHMARKS.items():
    print(f"{name}:")
    print(f"  {'measure':12s} {'new':>6s} {'old':>6s} {'points':>7s} {'rer%':>6s}")
    for measure, (new, old) in rows.items():
        rer = relative_error_reduction(new / 100, old / 100)
        print(f"  {measure:12s} {new:6.2f} {old:6.2f} {new - old:+7.2f}"
              f" {rer:6.2f}")
    print()

# The measure is signed and asymmetric: a regression removes a negative
# share of errors, and a perfect baseline leaves nothing to reduce.
print("regression:", f"{relative_error_reduction(0.95, 0.97):.2f}%")
try:
    relative_error_reduction(0.99, 1.0)
except ValueError as err:
    print("perfect baseline rejected:", err)
