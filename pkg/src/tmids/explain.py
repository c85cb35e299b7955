"""Class votes, clause activation maps and readable clause rules."""

from __future__ import annotations

import csv
import io
import json
import re
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .tsetlin import TsetlinMachineClassifier


def class_votes(tm: TsetlinMachineClassifier, x) -> np.ndarray:
    """Unclamped votes ``f_c(x)`` for every class."""
    return tm.decision_function(np.asarray(x).reshape(1, -1))[0]


@dataclass
class ClauseActivationMap:
    activations: np.ndarray  # (n_classes, m) uint8
    polarity: np.ndarray  # (m,) +1 / -1

    def signed_sums(self):
        return (self.activations.astype(np.int64) * self.polarity).sum(axis=1)

    def to_csv(self, class_names=None):
        C, m = self.activations.shape
        names = class_names or [str(c) for c in range(C)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class"] + [f"{'+' if p > 0 else '-'}{j}" for j, p in enumerate(self.polarity)])
        for c in range(C):
            w.writerow([names[c]] + self.activations[c].tolist())
        return buf.getvalue()

    def to_svg(self, class_names=None, cell=10):
        """Self-contained SVG grid; lit cells are yellow, idle ones dark purple."""
        C, m = self.activations.shape
        names = class_names or [str(c) for c in range(C)]
        left, top = 90, 20
        width, height = left + m * cell + 10, top + C * cell + 30
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="9">'
        ]
        half = m // 2
        out.append(f'<text x="{left}" y="12">positive clauses 0..{half - 1}</text>')
        out.append(f'<text x="{left + half * cell}" y="12">negative clauses {half}..{m - 1}</text>')
        for c in range(C):
            y = top + c * cell
            out.append(f'<text x="{left - 4}" y="{y + cell - 2}" text-anchor="end">{_xml(names[c])}</text>')
            for j in range(m):
                fill = "#fde725" if self.activations[c, j] else "#440154"
                out.append(f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>')
        x_mid = left + half * cell
        out.append(f'<line x1="{x_mid}" y1="{top}" x2="{x_mid}" y2="{top + C * cell}" stroke="white" stroke-width="1"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _xml(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def activation_map(tm: TsetlinMachineClassifier, x) -> ClauseActivationMap:
    out = tm.clause_outputs(np.asarray(x).reshape(1, -1))[0]
    return ClauseActivationMap(activations=out, polarity=tm.polarity_.astype(np.int64))


@dataclass
class RenderedRule:
    class_id: int
    clause_index: int
    polarity: int
    text: str
    included: list = field(default_factory=list)
    negated: list = field(default_factory=list)
    intervals: list = field(default_factory=list)
    fire_frequency: float = 0.0

    def to_dict(self):
        return asdict(self)


_EMPTY = "TRUE (unconstrained)"
_LITERAL = re.compile(r"^(NOT\s+)?x(\d+)$")


def rule_text(included, negated):
    terms = [(i, False) for i in included] + [(i, True) for i in negated]
    terms.sort()
    if not terms:
        return _EMPTY
    return " AND ".join(("NOT " if neg else "") + f"x{i}" for i, neg in terms)


def parse_rule(text):
    """Inverse of :func:`rule_text`: ``(included, negated)`` index lists."""
    if text.strip() == _EMPTY:
        return [], []
    inc, neg = [], []
    for term in text.split(" AND "):
        match = _LITERAL.match(term.strip())
        if match is None:
            raise ValueError(f"cannot parse literal {term!r}")
        (neg if match.group(1) else inc).append(int(match.group(2)))
    return sorted(inc), sorted(neg)


def _interval(binarizer, k, negated, inverse):
    feat, b, low, high = binarizer.describe_bit(k, inverse)
    lo = "-inf" if np.isinf(low) else f"{low:.6g}"
    hi = "inf" if np.isinf(high) else f"{high:.6g}"
    op = "∉" if negated else "∈"
    return f"{feat} {op} bin {b} [{lo}, {hi})"


def render_rules(tm: TsetlinMachineClassifier, class_id, top_k=10, binarizer=None, inverse=None):
    """Positive clauses of ``class_id``, most frequently firing first.

    Frequencies are the training-set firing rates stored at fit time.
    With a ``binarizer`` each literal is also translated into a bin
    interval; ``inverse(feature, value)`` can map edges to raw units.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    m = tm.clauses_per_class_
    half = m // 2
    freq = np.asarray(tm.clause_fire_freq_[class_id][:half])
    # stable sort keeps clause order among equal frequencies
    order = np.argsort(-freq, kind="stable")[: min(top_k, half)]
    rules = []
    for j in order:
        clause = tm.clause(class_id, int(j))
        inc, neg = clause.included.tolist(), clause.negated.tolist()
        text = rule_text(inc, neg)
        if not inc and not neg:
            warnings.warn(f"clause {class_id}/{j} includes no literals", stacklevel=2)
        intervals = []
        if binarizer is not None:
            intervals = [_interval(binarizer, k, False, inverse) for k in inc]
            intervals += [_interval(binarizer, k, True, inverse) for k in neg]
        rules.append(RenderedRule(
            class_id=int(class_id),
            clause_index=int(j),
            polarity=1,
            text=text,
            included=inc,
            negated=neg,
            intervals=intervals,
            fire_frequency=float(freq[j]),
        ))
    return rules


def rules_to_text(rules, class_names=None):
    lines = []
    for r in rules:
        name = class_names[r.class_id] if class_names else str(r.class_id)
        lines.append(f"[{name} clause {r.clause_index}, fires {r.fire_frequency:.3f}] {r.text}")
        for iv in r.intervals:
            lines.append(f"    {iv}")
    return "\n".join(lines) + "\n"


def rules_to_json(rules):
    return json.dumps([r.to_dict() for r in rules], indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def votes_to_csv(votes, class_names=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "vote"])
    for c, v in enumerate(votes):
        w.writerow([class_names[c] if class_names else c, int(v)])
    return buf.getvalue()
