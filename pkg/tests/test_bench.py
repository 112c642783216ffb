import csv
import io

import pytest

from cflog.bench import CONFIGS, CSV_COLUMNS, bench_run, bench_workload, resolve_configs, to_csv, to_text
from cflog.workloads import WORKLOADS, get_workload, sensor_loop
from cflog.model import cfg_check_trace


def test_config_matrix_axes():
    names = [c.name for c in CONFIGS]
    assert names[:4] == ["baseline", "prefix", "huffman", "prefix+huffman"]
    assert "subpath1" in names and "subpath8+prefix+huffman" in names
    assert len(names) == 4 + 8 * 4


@pytest.mark.parametrize("name", sorted(WORKLOADS))
def test_workloads_follow_their_cfg(name):
    for run in (0, 1):
        wl = get_workload(name, 3, run)
        assert cfg_check_trace(wl.cfg, wl.trace).valid
    assert get_workload(name, 3, 0) == get_workload(name, 3, 0)


def test_sensor_loop_shape():
    wl = sensor_loop(0)
    assert len(wl.trace) >= 500 * 6
    assert get_workload("sensor-loop", 0, 1).cfg == wl.cfg


def test_unknown_workload():
    with pytest.raises(KeyError):
        bench_run(["nope"])
    with pytest.raises(KeyError):
        resolve_configs(["nope"])


def test_bench_deterministic_and_csv_schema():
    cfgs = resolve_configs(["baseline", "prefix", "huffman", "subpath2+prefix+huffman"])
    a = to_csv(bench_run(["sensor-loop", "multi-function"], cfgs, seed=5))
    b = to_csv(bench_run(["sensor-loop", "multi-function"], cfgs, seed=5))
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 8


def test_prefix_only_single_prefix_below_half():
    (row,) = bench_workload("single-prefix", resolve_configs(["prefix"]))
    assert 45 < row.reduction_pct < 50


def test_uniform_random_huffman_near_zero():
    (row,) = bench_workload("uniform-random", resolve_configs(["huffman"]))
    assert abs(row.reduction_pct) < 3


def test_loop_all_stages_beats_single_stages():
    rows = {r.config: r for r in bench_workload("sensor-loop", resolve_configs(
        ["prefix", "huffman", "subpath8", "subpath8+prefix+huffman"]))}
    best_single = max(rows[c].reduction_pct for c in ("prefix", "huffman", "subpath8"))
    assert rows["subpath8+prefix+huffman"].reduction_pct >= best_single


def test_text_table_aligned():
    text = to_text(bench_workload("single-prefix", resolve_configs(["baseline", "prefix"])))
    lines = text.splitlines()
    assert lines[0].split() == list(CSV_COLUMNS)
    assert len({len(l) for l in lines[2:]}) == 1
