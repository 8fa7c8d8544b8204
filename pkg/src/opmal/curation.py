"""Instance selection: size cap, opcode-weight threshold, interval pruning.

The pipeline drops oversized benign listings before parsing, drops any
sample at or above the weight threshold, then walks a decreasing schedule
of interval widths; at each width, malware falling in a weight interval
that contains no benign file is deleted and the survivors are re-binned
at the next width.
"""

import logging
from dataclasses import dataclass, field

from .errors import EmptyCorpus

log = logging.getLogger(__name__)

DEFAULT_SIZE_CAP = 147_000_000  # bytes; cap is inclusive and benign-only
DEFAULT_WEIGHT_THRESHOLD = 40_000  # strict: keep weight < threshold
DEFAULT_INTERVAL_WIDTHS = (500, 100, 50, 10, 5, 2)

CURATION_FORMAT = "opmal.curation"
CURATION_VERSION = 1


@dataclass(frozen=True)
class CurationConfig:
    size_cap_bytes: int = DEFAULT_SIZE_CAP
    weight_threshold: int = DEFAULT_WEIGHT_THRESHOLD
    interval_widths: tuple = DEFAULT_INTERVAL_WIDTHS

    def __post_init__(self):
        if self.size_cap_bytes <= 0 or self.weight_threshold <= 0:
            raise ValueError("size cap and weight threshold must be positive")
        widths = tuple(self.interval_widths)
        if not widths or any(w <= 0 for w in widths):
            raise ValueError("interval widths must be positive")
        if any(a <= b for a, b in zip(widths, widths[1:])):
            raise ValueError("interval widths must be strictly decreasing")
        object.__setattr__(self, "interval_widths", widths)


@dataclass(frozen=True)
class IntervalBin:
    lo: int
    hi: int
    malware_count: int
    benign_count: int


@dataclass
class CurationReport:
    config: CurationConfig
    input_samples: int
    retained_malware: int = 0
    retained_benign: int = 0
    removed_by_size: int = 0
    removed_by_threshold_malware: int = 0
    removed_by_threshold_benign: int = 0
    removed_by_interval: list = field(default_factory=list)
    bins: list = field(default_factory=list)  # one IntervalBin list per width

    @property
    def removed_by_threshold(self) -> int:
        return self.removed_by_threshold_malware + self.removed_by_threshold_benign

    def conserves(self) -> bool:
        """Every input sample is either retained or accounted to one removal."""
        accounted = (
            self.retained_malware
            + self.retained_benign
            + self.removed_by_threshold
            + sum(self.removed_by_interval)
        )
        return accounted == self.input_samples


def _is_malware(label) -> bool:
    return label.is_malware if hasattr(label, "is_malware") else label == "malware"


def filter_size_cap(files, cfg: CurationConfig):
    """Drop benign entries strictly larger than the cap; malware always kept.

    files: iterable of (path, byte_size, label).  Returns (retained, removed).
    """
    retained = []
    removed = 0
    for path, size, label in files:
        if not _is_malware(label) and size > cfg.size_cap_bytes:
            removed += 1
        else:
            retained.append((path, size, label))
    return retained, removed


def filter_weight_threshold(samples, cfg: CurationConfig):
    """Keep samples with weight strictly below the threshold.

    Returns (retained, removed_malware, removed_benign).
    """
    retained = []
    removed_m = 0
    removed_b = 0
    for s in samples:
        if s.weight < cfg.weight_threshold:
            retained.append(s)
        elif s.label.is_malware:
            removed_m += 1
        else:
            removed_b += 1
    return retained, removed_m, removed_b


def _bin_index(weight: int, width: int) -> int:
    # bin b covers [b*width + 1, (b+1)*width]; weight 0 joins the first bin
    if weight <= 0:
        return 0
    return (weight - 1) // width


def interval_histogram(samples, width: int, max_weight: int = None):
    """Per-interval class counts, bins of the given width starting at 1.

    Bins run contiguously from 1 up to the highest occupied interval; the
    last bin's hi is truncated at max_weight - 1 when a bound is given.
    """
    samples = list(samples)
    if not samples:
        return []
    top = 0
    counts = {}
    for s in samples:
        b = _bin_index(s.weight, width)
        m, bn = counts.get(b, (0, 0))
        if s.label.is_malware:
            counts[b] = (m + 1, bn)
        else:
            counts[b] = (m, bn + 1)
        top = max(top, b)
    bins = []
    for b in range(top + 1):
        m, bn = counts.get(b, (0, 0))
        hi = (b + 1) * width
        if max_weight is not None:
            hi = min(hi, max_weight - 1)
        bins.append(IntervalBin(lo=b * width + 1, hi=hi, malware_count=m, benign_count=bn))
    return bins


def prune_pass(samples, width: int, max_weight: int = None):
    """Remove malware whose interval holds no benign file.

    Returns (retained, removed_malware_count); benign is never touched.
    """
    samples = list(samples)
    bins = interval_histogram(samples, width, max_weight)
    return _prune_with_bins(samples, width, bins)


def _prune_with_bins(samples, width, bins):
    benign_empty = {i for i, b in enumerate(bins) if b.benign_count == 0}
    retained = []
    removed = 0
    for s in samples:
        if s.label.is_malware and _bin_index(s.weight, width) in benign_empty:
            removed += 1
        else:
            retained.append(s)
    return retained, removed


def curate(samples, cfg: CurationConfig, removed_by_size: int = 0):
    """Weight-threshold filter, then one prune pass per interval width.

    removed_by_size carries the pre-parse size-cap accounting into the
    report.  Returns (retained samples, CurationReport); raises
    EmptyCorpus when nothing survives.
    """
    samples = list(samples)
    report = CurationReport(
        config=cfg, input_samples=len(samples), removed_by_size=removed_by_size
    )
    current, rm, rb = filter_weight_threshold(samples, cfg)
    report.removed_by_threshold_malware = rm
    report.removed_by_threshold_benign = rb
    for width in cfg.interval_widths:
        bins = interval_histogram(current, width, cfg.weight_threshold)
        report.bins.append(bins)
        current, removed = _prune_with_bins(current, width, bins)
        report.removed_by_interval.append(removed)
        if removed:
            log.info("interval width %d removed %d malware", width, removed)
    report.retained_malware = sum(1 for s in current if s.label.is_malware)
    report.retained_benign = len(current) - report.retained_malware
    if not current:
        raise EmptyCorpus("curation removed every sample; check thresholds")
    assert report.conserves()
    return current, report


def report_to_dict(r: CurationReport) -> dict:
    return {
        "format": CURATION_FORMAT,
        "version": CURATION_VERSION,
        "config": {
            "size_cap_bytes": r.config.size_cap_bytes,
            "weight_threshold": r.config.weight_threshold,
            "interval_widths": list(r.config.interval_widths),
        },
        "input_samples": r.input_samples,
        "removed_by_size": r.removed_by_size,
        "removed_by_threshold": {
            "malware": r.removed_by_threshold_malware,
            "benign": r.removed_by_threshold_benign,
            "total": r.removed_by_threshold,
        },
        "removed_by_interval": [
            {"width": w, "removed": n}
            for w, n in zip(r.config.interval_widths, r.removed_by_interval)
        ],
        "retained": {"malware": r.retained_malware, "benign": r.retained_benign},
        "bins": [
            {
                "width": w,
                "bins": [
                    {"lo": b.lo, "hi": b.hi, "malware": b.malware_count, "benign": b.benign_count}
                    for b in bin_list
                ],
            }
            for w, bin_list in zip(r.config.interval_widths, r.bins)
        ],
    }


def render_curation(d: dict) -> str:
    """Human-readable account: per-width interval tables plus the totals."""
    lines = []
    for block in d["bins"]:
        lines.append(f"interval width {block['width']}")
        lines.append("interval        malware  benign")
        for b in block["bins"]:
            if b["malware"] == 0 and b["benign"] == 0:
                continue
            lines.append(f"{b['lo']:>6}-{b['hi']:<6}  {b['malware']:>7}  {b['benign']:>6}")
        lines.append("")
    thr = d["removed_by_threshold"]
    lines.append(f"removed by size cap: {d['removed_by_size']}")
    lines.append(
        f"removed by weight threshold: {thr['total']} (malware {thr['malware']}, benign {thr['benign']})"
    )
    for row in d["removed_by_interval"]:
        lines.append(f"removed at width {row['width']}: {row['removed']}")
    ret = d["retained"]
    lines.append(f"retained: {ret['malware']} malware, {ret['benign']} benign")
    return "\n".join(lines) + "\n"
