import numpy as np
import pytest

from carp.events import EventHistory, EventRecord
from carp.io import (
    DEFAULT_MAPPING,
    IngestError,
    ingest_csv,
    ingest_csv_text,
    serialize_history_csv,
    summarize,
)

HEADER = "time,duration,geyser\n"


class TestIngest:
    def test_sample_file(self, sample_csv_path):
        h = ingest_csv(sample_csv_path)
        assert h.n == 10
        assert h.events[0].time == 0.0
        assert h.origin == "2008-06-20 16:58:00"
        assert h.termination == pytest.approx(h.events[-1].time)
        # West Triplet 20:46 -> next-day 02:51 is 6h05m
        wt = [e.time for e in h.events if e.event_type == 1]
        assert wt[1] - wt[0] == pytest.approx(6.0833, abs=1e-3)

    def test_covariates_use_previous_durations(self, sample_csv_path):
        h = ingest_csv(sample_csv_path)
        # row 2 (West Triplet) sees only the first Grotto duration
        assert h.events[1].covariates == (0.0, 0.93)
        # row 3 (Grotto) sees the West Triplet 0.75 and Grotto 0.93
        assert h.events[2].covariates == (0.75, 0.93)

    def test_single_row(self):
        h = ingest_csv_text(HEADER + "2008-06-20 16:58:00,0.93,Grotto\n")
        assert h.n == 1
        assert h.events[0].covariates == (0.0, 0.0)
        assert h.events[0].duration == 0.93

    def test_shuffled_rows_sorted(self, sample_csv_path):
        lines = sample_csv_path.read_text().strip().splitlines()
        shuffled = [lines[0]] + lines[:0:-1]
        assert ingest_csv_text("\n".join(shuffled)) == ingest_csv(sample_csv_path)

    def test_unparseable_timestamp_reports_line(self):
        text = HEADER + "2008-06-20 16:58:00,0.93,Grotto\nnot-a-date,1.0,Grotto\n"
        with pytest.raises(IngestError, match="line 3"):
            ingest_csv_text(text)

    def test_duplicate_timestamps_rejected(self):
        text = (HEADER + "2008-06-20 16:58:00,0.93,Grotto\n"
                "2008-06-20 16:58:00,0.75,West Triplet\n")
        with pytest.raises(IngestError, match="duplicate"):
            ingest_csv_text(text)

    def test_unmapped_geyser_rejected(self):
        with pytest.raises(IngestError, match="unmapped"):
            ingest_csv_text(HEADER + "2008-06-20 16:58:00,0.93,Old Faithful\n")

    def test_negative_duration_rejected(self):
        with pytest.raises(IngestError, match="duration"):
            ingest_csv_text(HEADER + "2008-06-20 16:58:00,-1.0,Grotto\n")

    def test_missing_header(self):
        with pytest.raises(IngestError, match="header"):
            ingest_csv_text("a,b\n1,2\n")

    def test_custom_mapping(self):
        text = HEADER + "2008-06-20 16:58:00,0.5,Castle\n"
        h = ingest_csv_text(text, mapping={"Castle": 2})
        assert h.events[0].event_type == 2

    def test_date_bounds_slice(self, sample_csv_path):
        text = sample_csv_path.read_text()
        h = ingest_csv_text(text, date_min="2008-06-21 00:00:00",
                            date_max="2008-06-21 23:59:59")
        assert h.n == 6
        assert h.events[0].time == 0.0


class TestRoundTrip:
    def test_ingest_serialize_ingest(self, sample_csv_path):
        h1 = ingest_csv(sample_csv_path)
        text = serialize_history_csv(h1)
        h2 = ingest_csv_text(text)
        assert h1 == h2

    def test_fullscale_round_trip(self, fullscale_csv_path):
        h1 = ingest_csv(fullscale_csv_path)
        assert h1.n == 1001
        assert ingest_csv_text(serialize_history_csv(h1)) == h1

    def test_simulated_round_trip(self):
        from carp.model import make_model
        from carp.simulate import CovariateLaw, SimConfig, simulate_history

        truth = make_model("copula", [1.0, 1.5, 0.25, 0.25, 1.5, 1.5, 0, 0, 0.1])
        h = simulate_history(SimConfig(truth, 60, CovariateLaw(), seed=8))
        text = serialize_history_csv(h)
        h2 = ingest_csv_text(text)
        # re-ingestion re-bases the origin to the first event and timestamps
        # quantize to whole seconds, so compare the inter-event gaps
        np.testing.assert_allclose(np.diff([e.time for e in h2.events]),
                                   np.diff([e.time for e in h.events]), atol=2.01 / 3600)
        assert [e.event_type for e in h2.events] == [e.event_type for e in h.events]

    def test_missing_duration_rejected(self):
        h = EventHistory(events=(EventRecord(1.0, 1, (0, 0)),), termination=1.0)
        with pytest.raises(ValueError, match="duration"):
            serialize_history_csv(h)


class TestSummarize:
    def test_fullscale_counts(self, fullscale_csv_path):
        s = summarize(ingest_csv(fullscale_csv_path))
        assert s["n"] == 1001
        assert s["per_type"][1]["count"] + s["per_type"][2]["count"] == 1001

    def test_moments_match_numpy(self, sample_csv_path):
        h = ingest_csv(sample_csv_path)
        s = summarize(h)
        wt_times = [e.time for e in h.events if e.event_type == 1]
        gaps = np.diff(np.concatenate(([0.0], wt_times)))
        gaps = gaps[gaps > 0]
        assert s["per_type"][1]["gap_mean"] == pytest.approx(gaps.mean())
        assert s["per_type"][1]["gap_sd"] == pytest.approx(gaps.std(ddof=1))

    def test_empty_history(self):
        s = summarize(EventHistory(events=(), termination=0.0))
        assert s["per_type"][1]["count"] == 0
        assert s["per_type"][1]["gap_mean"] is None

    def test_simulated_independence_moments(self):
        from carp.model import make_model
        from carp.simulate import CovariateLaw, SimConfig, simulate_history

        ind = make_model("copula", [1.0, 1.5, 0.25, 0.25, 1.0, 0, 0, 0, 0])
        h = simulate_history(SimConfig(ind, 4000, CovariateLaw(kind="none"), seed=12))
        s = summarize(h)
        for j, mu in ((1, 1.0), (2, 1.5)):
            target = np.exp(mu + 0.25**2 / 2)
            n = s["per_type"][j]["count"]
            sd = target * np.sqrt(np.exp(0.25**2) - 1)
            assert abs(s["per_type"][j]["gap_mean"] - target) < 3 * sd / np.sqrt(n)

    def test_mapping_default(self):
        assert DEFAULT_MAPPING == {"West Triplet": 1, "Grotto": 2}
