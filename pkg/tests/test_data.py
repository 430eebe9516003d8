"""Tests for interaction ingestion, filtering, splitting and BPR batching."""

from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from pckd.core.rng import StreamFactory
from pckd.modules.data import (
    DataConfig,
    DatasetRepository,
    InteractionLog,
    SplitMode,
    chrono_split,
    generate_synthetic,
    iterate_epoch,
    load_interactions,
    preprocess,
    sample_bpr_batch,
)
from pckd.shared.exceptions import ConfigurationError, DomainError, InputParseError


def brute_force_filter(records, k):
    """Remove entities with fewer than k records until stable."""
    rows = list(records)
    while True:
        users = Counter(r[0] for r in rows)
        items = Counter(r[1] for r in rows)
        kept = [r for r in rows if users[r[0]] >= k and items[r[1]] >= k]
        if len(kept) == len(rows):
            return kept
        rows = kept


def complete_block(users, items, start=0):
    """Every user of ``users`` interacts with every item of ``items``."""
    stamp = start
    rows = []
    for u in users:
        for i in items:
            rows.append((u, i, stamp))
            stamp += 1
    return rows


class TestLoadInteractions:
    """Test suite for reading interaction files."""

    def test_three_valid_lines(self, tmp_path: Path):
        """Test that three valid lines give a log of length three."""
        path = tmp_path / "log.csv"
        path.write_text("u1,i1,10\nu1,i2,11\nu2,i1,12\n")
        log = load_interactions(path)
        assert len(log) == 3
        assert log.records[2] == ("u2", "i1", 12)

    def test_malformed_timestamp_reports_line(self, tmp_path: Path):
        """Test that a non-integer timestamp is a parse error at its line number."""
        path = tmp_path / "log.csv"
        path.write_text("u1,i1,10\nu1,i9,notatime\n")
        with pytest.raises(InputParseError) as excinfo:
            load_interactions(path)
        assert excinfo.value.line == 2

    def test_invalid_utf8_reports_offset(self, tmp_path: Path):
        """Test that undecodable bytes are a parse error naming the file, line and byte offset."""
        path = tmp_path / "log.tsv"
        path.write_bytes(b"u1\ti1\t10\n\xff\xfeu2\ti2\t11\n")
        with pytest.raises(InputParseError) as excinfo:
            load_interactions(path)
        assert excinfo.value.line == 2
        assert excinfo.value.details == {"path": str(path), "offset": 9, "byte": "0xff"}
        assert excinfo.value.exit_code == 1

    def test_crlf_matches_lf(self, tmp_path: Path):
        """Test that CRLF line endings parse identically to LF."""
        lf = tmp_path / "lf.csv"
        crlf = tmp_path / "crlf.csv"
        lf.write_bytes(b"u1,i1,1\nu2,i2,2\n")
        crlf.write_bytes(b"u1,i1,1\r\nu2,i2,2\r\n")
        assert load_interactions(lf) == load_interactions(crlf)

    def test_tab_separated_with_comments(self, tmp_path: Path):
        """Test tab separation and skipped comment lines."""
        path = tmp_path / "log.tsv"
        path.write_text("# user item time\nu1\ti1\t5\n\nu2\ti3\t6\n")
        assert len(load_interactions(path)) == 2

    def test_empty_file(self, tmp_path: Path):
        """Test that a file without records is a domain error."""
        path = tmp_path / "empty.csv"
        path.write_text("# nothing here\n")
        with pytest.raises(DomainError):
            load_interactions(path)


class TestPreprocess:
    """Test suite for duplicate collapsing and k-core filtering."""

    def test_dense_log_is_unchanged(self):
        """Test that a log where every entity has enough records only gets remapped."""
        rows = complete_block([f"u{k}" for k in range(10)], [f"i{k}" for k in range(10)])
        filtered, id_maps = preprocess(InteractionLog.from_records(rows), min_interactions=10)
        assert len(filtered) == 100
        assert id_maps.users["u0"] == 0
        assert id_maps.items["i9"] == 9

    def test_sparse_user_removed(self):
        """Test that a user with nine records is removed and the rest kept."""
        rows = complete_block([f"u{k}" for k in range(10)], [f"i{k}" for k in range(10)])
        rows += [("lonely", f"i{k}", 1000 + k) for k in range(9)]
        filtered, id_maps = preprocess(InteractionLog.from_records(rows), min_interactions=10)
        assert len(filtered) == 100
        assert "lonely" not in id_maps.users

    def test_cascade_matches_brute_force(self):
        """Test that cascading removals reach the same fixed point as repeated filtering."""
        rows = complete_block([f"u{k}" for k in range(3)], [f"i{k}" for k in range(3)])
        # user A has one record too few; removing it drops item B, which drops users C and D
        rows += [("A", "B", 100), ("A", "i0", 101)]
        rows += [("C", "B", 102), ("C", "i1", 103), ("C", "i2", 104)]
        rows += [("D", "B", 105), ("D", "i0", 106), ("D", "i1", 107)]
        filtered, _ = preprocess(InteractionLog.from_records(rows), min_interactions=3)
        expected = brute_force_filter(rows, 3)
        assert sorted(filtered.records) == sorted(InteractionLog.from_records(expected).records)

    def test_duplicates_keep_earliest(self):
        """Test that repeated (user, item) pairs keep the earliest timestamp."""
        rows = [("u", "i", 50), ("u", "i", 10), ("u", "j", 20)]
        filtered, _ = preprocess(InteractionLog.from_records(rows), min_interactions=1)
        stamps = {(r.user, r.item): r.timestamp for r in filtered.records}
        assert stamps == {("u", "i"): 10, ("u", "j"): 20}

    def test_vanishing_dataset(self):
        """Test that filtering everything away is a domain error."""
        rows = [("u1", "i1", 1), ("u2", "i2", 2)]
        with pytest.raises(DomainError, match="vanished"):
            preprocess(InteractionLog.from_records(rows), min_interactions=10)


class TestChronoSplit:
    """Test suite for chronological splitting."""

    def test_ten_distinct_timestamps(self):
        """Test an 8/1/1 split by time order."""
        rows = [("u", f"i{k}", 100 - k) for k in range(10)]
        dataset = chrono_split(InteractionLog.from_records(rows))
        assert len(dataset.train_records) == 8
        # the two latest records hold items never seen in training, so they are dropped
        assert dataset.dropped == {"val": 1, "test": 1}

    def test_equal_timestamps_follow_input_order(self):
        """Test that ties keep the input order."""
        rows = [(f"u{k % 3}", f"i{k % 4}", 7) for k in range(10)]
        dataset = chrono_split(InteractionLog.from_records(rows))
        user_raw = {dense: raw for raw, dense in dataset.id_maps.users.items()}
        item_raw = {dense: raw for raw, dense in dataset.id_maps.items.items()}
        pairs = zip(dataset.train_records.users.tolist(), dataset.train_records.items.tolist())
        train_raw = [(user_raw[u], item_raw[i]) for u, i in pairs]
        assert train_raw == [(r[0], r[1]) for r in rows[:8]]
        assert len(dataset.val_records) == 1
        assert len(dataset.test_records) == 1

    def test_synthetic_split_is_time_ordered(self):
        """Test that train precedes val which precedes test on a generated log."""
        log = generate_synthetic(50, 100, density=0.2, seed=3)
        dataset = chrono_split(log)
        train_max = dataset.train_records.timestamps.max()
        if len(dataset.val_records):
            assert train_max <= dataset.val_records.timestamps.min()
            if len(dataset.test_records):
                assert dataset.val_records.timestamps.max() <= dataset.test_records.timestamps.min()

    def test_per_user_mode(self):
        """Test that the per-user split cuts every user's own history."""
        rows = []
        for user in ("a", "b"):
            rows += [(user, f"i{k}", k) for k in range(10)]
        dataset = chrono_split(InteractionLog.from_records(rows), split_mode=SplitMode.PER_USER)
        assert len(dataset.train_records) == 16
        assert np.bincount(dataset.train_records.users).tolist() == [8, 8]

    def test_bad_ratios(self):
        """Test that ratios not summing to one are rejected."""
        with pytest.raises(ConfigurationError):
            chrono_split(InteractionLog.from_records([("u", "i", 1)]), ratios=(0.5, 0.2, 0.2))

    def test_config_rejects_bad_ratios(self):
        """Test that the data config validates ratios too."""
        with pytest.raises(ValueError):
            DataConfig(ratios=(0.9, 0.2, 0.1))

    def test_snapshot_round_trip(self, tmp_path: Path, toy_dataset):
        """Test that a saved snapshot loads back with identical splits."""
        DatasetRepository(tmp_path / "snap").save(toy_dataset)
        loaded = DatasetRepository(tmp_path / "snap").load()
        assert (loaded.n_users, loaded.n_items) == (toy_dataset.n_users, toy_dataset.n_items)
        np.testing.assert_array_equal(loaded.train_records.items, toy_dataset.train_records.items)
        np.testing.assert_array_equal(loaded.test_records.users, toy_dataset.test_records.users)
        assert loaded.id_maps == toy_dataset.id_maps


class TestBprSampling:
    """Test suite for BPR triple sampling."""

    def test_single_user_two_items(self):
        """Test that the only possible triple is always drawn."""
        # a second user keeps item 1 in the training split
        log, id_maps = preprocess(InteractionLog.from_records([("u", "i0", 1), ("v", "i1", 2)]), 1)
        dataset = chrono_split(log, id_maps, ratios=(1.0, 0.0, 0.0))
        batch = sample_bpr_batch(dataset, 50, StreamFactory(0).stream("negatives"))
        user0 = batch.users == 0
        assert np.all(batch.pos_items[user0] == 0)
        assert np.all(batch.neg_items[user0] == 1)

    def test_user_frequencies_follow_degrees(self):
        """Test that users are drawn in proportion to their training counts (multinomial bound)."""
        rows = [("a", f"i{k}", k) for k in range(3)] + [("b", "i0", 10), ("a", "i9", 20), ("b", "i9", 21), ("b", "z", 22)]
        log, id_maps = preprocess(InteractionLog.from_records(rows), 1)
        dataset = chrono_split(log, id_maps, ratios=(1.0, 0.0, 0.0))
        batch = sample_bpr_batch(dataset, 100_000, StreamFactory(1).stream("negatives"))
        share_a = np.mean(batch.users == dataset.id_maps.users["a"])
        expected = 4 / 7
        sigma = np.sqrt(expected * (1 - expected) / 100_000)
        assert abs(share_a - expected) < 4 * sigma

    def test_negatives_are_never_positives(self, toy_dataset):
        """Test that no negative is a training positive of its user."""
        batch = sample_bpr_batch(toy_dataset, 2000, StreamFactory(2).stream("negatives"))
        assert not np.any(toy_dataset.is_train_positive(batch.users, batch.neg_items))

    def test_fixed_seed_repeats(self, toy_dataset):
        """Test that a fixed stream reproduces the batch."""
        first = sample_bpr_batch(toy_dataset, 64, StreamFactory(3).stream("negatives"))
        second = sample_bpr_batch(toy_dataset, 64, StreamFactory(3).stream("negatives"))
        np.testing.assert_array_equal(first.users, second.users)
        np.testing.assert_array_equal(first.neg_items, second.neg_items)

    def test_saturated_user(self):
        """Test that a user positive on every item cannot get a negative."""
        rows = [("u", "i0", 1), ("u", "i1", 2)]
        log, id_maps = preprocess(InteractionLog.from_records(rows), 1)
        dataset = chrono_split(log, id_maps, ratios=(1.0, 0.0, 0.0))
        with pytest.raises(DomainError):
            sample_bpr_batch(dataset, 4, StreamFactory(0).stream("negatives"))

    def test_epoch_covers_every_pair_once(self, toy_dataset):
        """Test that one epoch visits each training pair exactly once."""
        batches = list(iterate_epoch(toy_dataset, 50, StreamFactory(4).stream("batching", 0)))
        seen = sorted(
            zip(np.concatenate([b.users for b in batches]).tolist(), np.concatenate([b.pos_items for b in batches]).tolist())
        )
        expected = sorted(zip(toy_dataset.train_records.users.tolist(), toy_dataset.train_records.items.tolist()))
        assert seen == expected


class TestSyntheticGenerator:
    """Test suite for the latent-factor generator."""

    def test_density_one_is_rejected(self):
        """Test the infeasible density guard."""
        with pytest.raises(DomainError):
            generate_synthetic(10, 10, density=1.0)

    def test_fixed_seed_repeats(self):
        """Test that the same seed gives the same log."""
        assert generate_synthetic(20, 30, seed=5) == generate_synthetic(20, 30, seed=5)

    def test_interaction_count(self):
        """Test that the benchmark size gives about density * users * items records."""
        log = generate_synthetic(200, 500, density=0.02, seed=0)
        assert abs(len(log) - 2000) <= 200
