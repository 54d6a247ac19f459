import math
import os
import random

import pytest

from mtforge.errors import ConfigError, DataError
from mtforge.sharding import (
    epoch_manifest,
    load_plan,
    plan_shards,
    save_plan,
    write_shards,
)


class TestPlanShards:
    def test_table_sizes_fixture(self):
        plan = plan_shards(
            {"de-bitext": 571_000_000, "ha-bitext": 1_700_000}, "ha-bitext"
        )
        assert plan.corpora["ha-bitext"].shards == 1
        assert plan.corpora["de-bitext"].shards == 336

    def test_single_corpus(self):
        plan = plan_shards({"only": 123}, "only")
        assert plan.corpora["only"].shards == 1

    def test_equal_sizes_no_downsampling(self):
        plan = plan_shards({"a": 10, "b": 10}, "a")
        assert plan.corpora["b"].shards == 1

    def test_zero_size_rejected(self):
        with pytest.raises(DataError):
            plan_shards({"a": 0, "b": 5}, "b")

    def test_unknown_base_rejected(self):
        with pytest.raises(ConfigError):
            plan_shards({"a": 5}, "nope")

    def test_ceiling_rule(self):
        rng = random.Random(0)
        for _ in range(50):
            sizes = {f"c{i}": rng.randrange(1, 500) for i in range(4)}
            base = rng.choice(list(sizes))
            plan = plan_shards(sizes, base)
            for name, cs in plan.corpora.items():
                if name == base:
                    assert cs.shards == 1
                else:
                    assert cs.shards == max(1, math.ceil(sizes[name] / sizes[base]))


class TestWriteShards:
    def test_even_split(self, tmp_path):
        lines = [f"line{i}" for i in range(10)]
        paths = write_shards(lines, 2, str(tmp_path), "c")
        shards = [open(p).read().splitlines() for p in paths]
        assert [len(s) for s in shards] == [5, 5]
        assert sorted(shards[0] + shards[1]) == sorted(lines)
        assert set(shards[0]).isdisjoint(shards[1])

    def test_modular_sizes(self, tmp_path):
        lines = [f"l{i}" for i in range(7)]
        paths = write_shards(lines, 3, str(tmp_path), "c")
        sizes = [len(open(p).read().splitlines()) for p in paths]
        assert sizes == [3, 2, 2]

    def test_single_shard_identity(self, tmp_path):
        lines = [f"l{i}" for i in range(5)]
        (path,) = write_shards(lines, 1, str(tmp_path), "c")
        assert open(path).read().splitlines() == lines

    def test_interleaved_reconstruction(self, tmp_path):
        lines = [f"row-{i}" for i in range(11)]
        paths = write_shards(lines, 4, str(tmp_path), "c")
        shards = [open(p).read().splitlines() for p in paths]
        rebuilt = []
        for i in range(len(lines)):
            rebuilt.append(shards[i % 4][i // 4])
        assert rebuilt == lines

    def test_byte_identical_across_runs(self, tmp_path):
        lines = [f"x{i}" for i in range(9)]
        p1 = write_shards(lines, 2, str(tmp_path / "a"), "c")
        p2 = write_shards(lines, 2, str(tmp_path / "b"), "c")
        for a, b in zip(p1, p2):
            assert open(a, "rb").read() == open(b, "rb").read()

    def test_file_naming(self, tmp_path):
        paths = write_shards(["x"], 2, str(tmp_path), "news-de")
        assert [os.path.basename(p) for p in paths] == [
            "news-de.shard0.txt",
            "news-de.shard1.txt",
        ]


class TestEpochManifest:
    def test_single_shard_always_zero(self):
        plan = plan_shards({"a": 5}, "a")
        for epoch in range(5):
            assert epoch_manifest(plan, epoch)["a"] == 0

    def test_modular_cycle(self):
        plan = plan_shards({"a": 5, "b": 15}, "a")
        assert plan.corpora["b"].shards == 3
        assert [epoch_manifest(plan, e)["b"] for e in range(6)] == [0, 1, 2, 0, 1, 2]

    def test_table_fixture_epoch_336_wraps(self):
        plan = plan_shards(
            {"de-bitext": 571_000_000, "ha-bitext": 1_700_000}, "ha-bitext"
        )
        assert epoch_manifest(plan, 336)["de-bitext"] == 0

    def test_negative_epoch_rejected(self):
        plan = plan_shards({"a": 5}, "a")
        with pytest.raises(ConfigError):
            epoch_manifest(plan, -1)

    def test_coverage_over_lcm(self):
        rng = random.Random(1)
        for _ in range(10):
            base_size = rng.randrange(1, 20)
            sizes = {"base": base_size}
            for i in range(3):
                sizes[f"c{i}"] = rng.randrange(1, base_size * 8)
            plan = plan_shards(sizes, "base")
            counts = [plan.corpora[c].shards for c in plan.corpora]
            lcm = math.lcm(*counts)
            seen = {c: [0] * plan.corpora[c].shards for c in plan.corpora}
            for epoch in range(lcm):
                for c, shard in epoch_manifest(plan, epoch).items():
                    seen[c][shard] += 1
            for c, tallies in seen.items():
                assert all(t == lcm // plan.corpora[c].shards for t in tallies)


class TestPlanIO:
    def test_roundtrip(self, tmp_path):
        plan = plan_shards({"a": 17, "b": 170}, "a")
        path = str(tmp_path / "plan.json")
        save_plan(plan, path)
        back = load_plan(path)
        assert back.corpora == plan.corpora
