import pytest

import synth
from opmal.corpus import BENIGN, MALWARE, Label
from opmal.curation import (
    DEFAULT_INTERVAL_WIDTHS,
    DEFAULT_SIZE_CAP,
    DEFAULT_WEIGHT_THRESHOLD,
    CurationConfig,
    curate,
    filter_size_cap,
    filter_weight_threshold,
    interval_histogram,
    prune_pass,
    render_curation,
    report_to_dict,
)
from opmal.errors import EmptyCorpus


def config(**kw):
    return CurationConfig(**kw)


class TestConfig:
    def test_defaults(self):
        cfg = config()
        assert cfg.size_cap_bytes == 147_000_000
        assert cfg.weight_threshold == 40_000
        assert cfg.interval_widths == (500, 100, 50, 10, 5, 2)

    def test_widths_must_decrease(self):
        with pytest.raises(ValueError):
            config(interval_widths=(100, 100, 50))
        with pytest.raises(ValueError):
            config(interval_widths=(50, 100))

    def test_positive_values(self):
        with pytest.raises(ValueError):
            config(size_cap_bytes=0)
        with pytest.raises(ValueError):
            config(weight_threshold=-1)
        with pytest.raises(ValueError):
            config(interval_widths=())


class TestSizeCap:
    def test_benign_over_cap_removed(self):
        files = [
            ("big.bin", DEFAULT_SIZE_CAP + 1, Label(BENIGN)),
            ("exact.bin", DEFAULT_SIZE_CAP, Label(BENIGN)),
            ("small.bin", 10, Label(BENIGN)),
        ]
        retained, removed = filter_size_cap(files, config())
        assert removed == 1
        assert [f[0] for f in retained] == ["exact.bin", "small.bin"]

    def test_cap_is_inclusive_at_147_mb(self):
        # 148 MB is out, exactly 147.0 MB stays
        files = [
            ("a", 148_000_000, Label(BENIGN)),
            ("b", 147_000_000, Label(BENIGN)),
        ]
        retained, removed = filter_size_cap(files, config())
        assert removed == 1
        assert retained[0][0] == "b"

    def test_malware_never_removed(self):
        files = [("huge.asm", 10 * DEFAULT_SIZE_CAP, Label(MALWARE, "simda"))]
        retained, removed = filter_size_cap(files, config())
        assert removed == 0
        assert len(retained) == 1


class TestWeightThreshold:
    def test_strict_boundary(self):
        samples = [
            synth.weight_sample(39_999, MALWARE, "m0", "ramnit"),
            synth.weight_sample(40_000, MALWARE, "m1", "ramnit"),
            synth.weight_sample(40_001, BENIGN, "b0"),
            synth.weight_sample(1, BENIGN, "b1"),
        ]
        retained, removed_m, removed_b = filter_weight_threshold(samples, config())
        assert [s.file_id for s in retained] == ["m0", "b1"]
        assert removed_m == 1
        assert removed_b == 1

    def test_default_threshold(self):
        assert DEFAULT_WEIGHT_THRESHOLD == 40_000


class TestIntervalHistogram:
    def test_bin_edges(self):
        samples = [
            synth.weight_sample(1, BENIGN, "a"),
            synth.weight_sample(50, BENIGN, "b"),
            synth.weight_sample(51, MALWARE, "c", "vundo"),
            synth.weight_sample(100, MALWARE, "d", "vundo"),
        ]
        bins = interval_histogram(samples, 50)
        assert len(bins) == 2
        assert (bins[0].lo, bins[0].hi) == (1, 50)
        assert (bins[1].lo, bins[1].hi) == (51, 100)
        assert (bins[0].malware_count, bins[0].benign_count) == (0, 2)
        assert (bins[1].malware_count, bins[1].benign_count) == (2, 0)

    def test_zero_weight_joins_first_bin(self):
        bins = interval_histogram([synth.weight_sample(0, BENIGN, "z")], 50)
        assert len(bins) == 1
        assert bins[0].benign_count == 1

    def test_gap_bins_present_and_empty(self):
        samples = [
            synth.weight_sample(5, BENIGN, "a"),
            synth.weight_sample(205, BENIGN, "b"),
        ]
        bins = interval_histogram(samples, 100)
        assert len(bins) == 3
        assert (bins[1].malware_count, bins[1].benign_count) == (0, 0)

    def test_last_bin_truncated_at_max_weight(self):
        samples = [synth.weight_sample(39_999, MALWARE, "m", "gatak")]
        bins = interval_histogram(samples, 500, max_weight=40_000)
        assert bins[-1].lo == 39_501
        assert bins[-1].hi == 39_999

    def test_empty(self):
        assert interval_histogram([], 50) == []


class TestPrunePass:
    def test_removes_malware_in_benign_empty_bins(self):
        samples = [
            synth.weight_sample(10, BENIGN, "b0"),
            synth.weight_sample(20, MALWARE, "m0", "simda"),
            synth.weight_sample(120, MALWARE, "m1", "simda"),
        ]
        retained, removed = prune_pass(samples, 100)
        assert removed == 1
        assert [s.file_id for s in retained] == ["b0", "m0"]

    def test_benign_untouched(self):
        samples = [synth.weight_sample(10, BENIGN, "b0")]
        retained, removed = prune_pass(samples, 100)
        assert removed == 0
        assert len(retained) == 1


class TestCurate:
    def corpus(self):
        # width 500/100: malware m_iso shares bins with benign; width 50
        # isolates it (weights 130 vs 180 split at the 151 boundary)
        return [
            synth.weight_sample(180, BENIGN, "b0"),
            synth.weight_sample(450, BENIGN, "b1"),
            synth.weight_sample(130, MALWARE, "m_iso", "kelihos"),
            synth.weight_sample(180, MALWARE, "m_keep", "kelihos"),
            synth.weight_sample(50_000, MALWARE, "m_heavy", "kelihos"),
        ]

    def test_sequential_widths(self):
        cfg = config(interval_widths=(500, 100, 50))
        retained, report = curate(self.corpus(), cfg)
        ids = [s.file_id for s in retained]
        assert ids == ["b0", "b1", "m_keep"]
        assert report.removed_by_threshold_malware == 1
        assert report.removed_by_threshold_benign == 0
        # width 500 keeps everything, width 100 drops nothing (130 and 180
        # share the 101-200 bin with b0), width 50 isolates m_iso
        assert report.removed_by_interval == [0, 0, 1]

    def test_conservation(self):
        cfg = config(interval_widths=(500, 100, 50))
        _, report = curate(self.corpus(), cfg, removed_by_size=3)
        assert report.conserves()
        assert report.input_samples == 5
        d = report_to_dict(report)
        total_removed = (
            d["removed_by_threshold"]["total"]
            + sum(r["removed"] for r in d["removed_by_interval"])
        )
        assert d["input_samples"] == d["retained"]["malware"] + d["retained"]["benign"] + total_removed

    def test_histograms_recorded_before_prune(self):
        cfg = config(interval_widths=(500, 100, 50))
        _, report = curate(self.corpus(), cfg)
        width50 = report.bins[2]
        iso_bin = [b for b in width50 if b.lo <= 130 <= b.hi][0]
        assert iso_bin.malware_count == 1
        assert iso_bin.benign_count == 0

    def test_empty_corpus_raises(self):
        samples = [synth.weight_sample(90_000, MALWARE, "m", "tracur")]
        with pytest.raises(EmptyCorpus):
            curate(samples, config())

    def test_default_widths_run(self):
        samples = [
            synth.weight_sample(w, BENIGN, f"b{w}") for w in (100, 600, 1200)
        ] + [
            synth.weight_sample(w, MALWARE, f"m{w}", "lollipop") for w in (105, 610, 9_000)
        ]
        retained, report = curate(samples, config())
        assert len(report.bins) == len(DEFAULT_INTERVAL_WIDTHS)
        assert report.conserves()
        # the 9000-weight malware sits alone from width 500 onward
        assert "m9000" not in [s.file_id for s in retained]

    def test_render(self):
        _, report = curate(self.corpus(), config(interval_widths=(500, 100, 50)))
        text = render_curation(report_to_dict(report))
        assert "interval width 50" in text
        assert "retained: 1 malware, 2 benign" in text
        assert "removed by weight threshold: 1" in text
