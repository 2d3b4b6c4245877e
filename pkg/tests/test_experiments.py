import statistics

import pytest

from adsbauth.experiments import (
    ConfigInvalid, SweepConfig, check_practical_config, rows_to_csv, run_plr_sweep, run_range_limited,
    summary_table, sweep_redundancy, write_csv,
)

SMALL = SweepConfig(payload_sizes_bits=(256, 512), symbol_bits=16, plr_grid=(0.65, 0.8, 0.95), trials=60, seed=3)


@pytest.fixture(scope="module")
def plr_rows():
    return run_plr_sweep(SMALL)


def test_practical_config_1024():
    r = check_practical_config(1024, 32, 3.25)
    assert (r.hint_bits, r.used_bits, r.passes) == (7, 39, True)
    assert r.columns_needed == 104


def test_practical_config_2048():
    r = check_practical_config(2048, 32, 3.25)
    assert (r.hint_bits, r.used_bits, r.symbol_headroom_bits) == (8, 40, 43)


def test_practical_config_tiny_and_overfull():
    assert check_practical_config(1, 1, 1.01).hint_bits == 1
    assert not check_practical_config(4096, 48, 4.0).passes
    assert any("PASS" in line for line in check_practical_config(1024, 32, 3.25).lines())
    with pytest.raises(ValueError):
        check_practical_config(0, 32, 3.25)


def test_baseline_ratio_is_one(plr_rows):
    base = [r for r in plr_rows if r.plr == 0.0]
    assert len(base) == 2
    assert all(r.mean_r0_star == 1.0 and r.std_r0_star == 0.0 for r in base)


def test_redundancy_grows_with_loss(plr_rows):
    for m in SMALL.payload_sizes_bits:
        r0 = [r.mean_r0_star for r in plr_rows if r.payload_bits == m]
        assert all(a < b for a, b in zip(r0, r0[1:]))


def test_transmissions_track_loss_rate(plr_rows):
    for r in plr_rows:
        if r.plr > 0:
            expected = r.mean_n0 / (1 - r.plr)
            assert abs(r.mean_packets_transmitted - expected) / expected < 0.15


def test_decoded_sessions_accepted(plr_rows):
    for r in plr_rows:
        assert r.decoded_fraction == 1.0
        assert r.accepted_fraction == r.decoded_fraction
        assert r.mean_distinct_delivered <= r.mean_packets_delivered


def test_sweep_sizing_avoids_wraparound():
    assert sweep_redundancy(SMALL) == pytest.approx(40.0)
    assert sweep_redundancy(SweepConfig(plr_grid=(0.65,))) == pytest.approx(2 / 0.35)
    assert sweep_redundancy(SweepConfig(plr_grid=(0.65,), redundancy=8.0)) == 8.0


def test_csv_deterministic(plr_rows, tmp_path):
    text = rows_to_csv(plr_rows)
    assert text == rows_to_csv(run_plr_sweep(SMALL))
    header = text.splitlines()[0].split(",")
    assert header[:3] == ["payload_bits", "symbol_bits", "n_columns"] and "mean_r0_star" in header
    assert len(text.splitlines()) == 1 + len(plr_rows)
    write_csv(plr_rows, tmp_path / "out.csv")
    assert (tmp_path / "out.csv").read_text() == text
    assert "r0*" in summary_table(plr_rows)


def test_seed_changes_results(plr_rows):
    other = run_plr_sweep(SweepConfig(**{**SMALL.__dict__, "seed": 4}))
    assert rows_to_csv(other) != rows_to_csv(plr_rows)


def test_parallel_matches_serial():
    cfg = SweepConfig(payload_sizes_bits=(256,), plr_grid=(0.7,), trials=12, seed=9)
    assert rows_to_csv(run_plr_sweep(cfg)) == rows_to_csv(run_plr_sweep(SweepConfig(**{**cfg.__dict__, "workers": 2})))


def test_range_sweep_stable_redundancy():
    cfg = SweepConfig(payload_sizes_bits=(512, 1024), symbol_bits=32, distance_grid=(0.0, 50.0, 100.0), trials=40, seed=1)
    rows = run_range_limited(cfg)
    assert [r.distance_km for r in rows[:3]] == [0.0, 50.0, 100.0]
    assert rows[0].plr == pytest.approx(0.65366)
    at_100 = [r.mean_r0_star for r in rows if r.distance_km == 100.0]
    assert statistics.pstdev(at_100) / statistics.fmean(at_100) < 0.15
    assert all(r.accepted_fraction == 1.0 for r in rows)


@pytest.mark.parametrize(
    "cfg, runner",
    [
        (SweepConfig(payload_sizes_bits=(250,), symbol_bits=16, trials=1), run_plr_sweep),
        (SweepConfig(trials=0), run_plr_sweep),
        (SweepConfig(payload_sizes_bits=(256,), plr_grid=(0.5,), trials=1), run_plr_sweep),
        (SweepConfig(payload_sizes_bits=(256,), plr_grid=(1.0,), trials=1), run_plr_sweep),
        (SweepConfig(payload_sizes_bits=(256,), distance_grid=(150.0,), trials=1), run_range_limited),
        (SweepConfig(payload_sizes_bits=(256,), symbol_bits=64, trials=1), run_range_limited),
        (SweepConfig(payload_sizes_bits=(256,), n_columns=16, trials=1), run_range_limited),
    ],
)
def test_invalid_configs(cfg, runner):
    with pytest.raises(ConfigInvalid):
        runner(cfg)
