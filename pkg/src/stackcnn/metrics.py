"""Confusion counts and the micro-averaged F-score over classes 1 and 2.

The shared-task ranking metric pools true/false positives and false negatives
of the two intake classes (1 and 2) before taking precision, recall and their
harmonic mean. Class 3 ("no intake") only contributes through the errors it
causes on classes 1 and 2.
"""

from dataclasses import dataclass

CLASSES = (1, 2, 3)
POSITIVE_CLASSES = (1, 2)


def safe_div(num, den):
    return num / den if den else 0.0


def harmonic_f(p, r):
    """F = 2PR / (P + R), or 0 when P + R == 0."""
    return safe_div(2.0 * p * r, p + r)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: dict
    fp: dict
    fn: dict
    tn: dict
    total: int

    def support(self, c):
        return self.tp[c] + self.fn[c]


def confusion_counts(gold, pred):
    gold, pred = list(gold), list(pred)
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} labels but pred has {len(pred)}")
    for name, seq in (("gold", gold), ("pred", pred)):
        bad = [x for x in seq if x not in CLASSES]
        if bad:
            raise ValueError(f"{name} contains labels outside {CLASSES}: {bad[0]!r}")
    n = len(gold)
    tp, fp, fn, tn = ({c: 0 for c in CLASSES} for _ in range(4))
    for g, p in zip(gold, pred):
        if g == p:
            tp[g] += 1
        else:
            fp[p] += 1
            fn[g] += 1
    for c in CLASSES:
        tn[c] = n - tp[c] - fp[c] - fn[c]
    return ConfusionCounts(tp, fp, fn, tn, n)


def micro_prf_12(counts):
    """(P, R, F) micro-averaged over classes 1 and 2."""
    tp = sum(counts.tp[c] for c in POSITIVE_CLASSES)
    fp = sum(counts.fp[c] for c in POSITIVE_CLASSES)
    fn = sum(counts.fn[c] for c in POSITIVE_CLASSES)
    p = safe_div(tp, tp + fp)
    r = safe_div(tp, tp + fn)
    return p, r, harmonic_f(p, r)


def per_class_prf(counts):
    out = {}
    for c in CLASSES:
        p = safe_div(counts.tp[c], counts.tp[c] + counts.fp[c])
        r = safe_div(counts.tp[c], counts.tp[c] + counts.fn[c])
        out[c] = (p, r, harmonic_f(p, r))
    return out


def f12_score(gold, pred):
    return micro_prf_12(confusion_counts(gold, pred))[2]


def evaluation_record(gold, pred):
    """Machine-readable evaluation output (JSON-serializable)."""
    counts = confusion_counts(gold, pred)
    p12, r12, f12 = micro_prf_12(counts)
    per_class = {}
    for c, (p, r, f) in per_class_prf(counts).items():
        per_class[str(c)] = {"precision": p, "recall": r, "f1": f, "support": counts.support(c)}
    return {"per_class": per_class, "P12": p12, "R12": r12, "F12": f12, "total": counts.total}


def format_evaluation(record):
    """Text summary laid out like the precision/recall and F1/micro tables."""
    pc = record["per_class"]
    lines = [
        "            Precision              Recall                 F1",
        "        1      2      3      1      2      3      1      2      3",
        "   "
        + " ".join(f"{pc[c]['precision']:6.3f}" for c in "123")
        + " "
        + " ".join(f"{pc[c]['recall']:6.3f}" for c in "123")
        + " "
        + " ".join(f"{pc[c]['f1']:6.3f}" for c in "123"),
        "",
        f"R12 {record['R12']:.3f}  P12 {record['P12']:.3f}  F12 {record['F12']:.3f}  (n={record['total']})",
        "support " + "  ".join(f"{c}:{pc[c]['support']}" for c in "123"),
    ]
    return "\n".join(lines) + "\n"
