import math

import numpy as np
import pytest

from faultrules.campaign import (
    CampaignError,
    NULL_LABEL,
    PERTURBATION_HEADER,
    STATIC_COLUMNS,
    apply_perturbation,
    derive_seed,
    experiment_catalog,
    manifest_text,
    parse_perturbation_file,
    read_dataset,
    run_campaign,
    select_experiments,
    write_dataset,
)
from faultrules.flowsheet import default_config

HEADER = ",".join(PERTURBATION_HEADER) + "\n"


class TestPerturbationParsing:
    def test_uniform_row(self):
        pf = parse_perturbation_file(HEADER + "SRCR1.P,bar,2,1.6,1.98,uniform\n")
        row = pf.rows[0]
        assert (row.param, row.lo, row.hi, row.instr) == ("SRCR1.P", 1.6, 1.98, "uniform")

    def test_pinned_valve_row(self):
        pf = parse_perturbation_file(HEADER + "XC1.OP,fraction,0,0,0,\n")
        cfg, pinned, sampled = apply_perturbation(default_config(), pf, np.random.default_rng(0))
        assert cfg.heat_exchanger.tc_fixed_op == 0.0
        assert "xc1_op" in pinned
        assert sampled == {"XC1.OP": 0.0}

    def test_stuck_valve_toggle_block(self):
        text = HEADER + "XC1.SP,bool,uncheck,,,\nXC1.OP,bool,check,,,\nXC1.OP,fraction,0,0,0,\n"
        pf = parse_perturbation_file(text)
        cfg, _, _ = apply_perturbation(default_config(), pf, np.random.default_rng(0))
        assert cfg.heat_exchanger.tc_fixed_op == 0.0

    def test_figure_style_file_parses(self):
        text = HEADER + "SRCR1.P,bar,2,1.6,1.98,uniform\nSRCE1.P,bar,2,1.95,2.05,uniform\nSRCR1.M[C2H4],kmol,4464,4240,4360,uniform\n"
        pf = parse_perturbation_file(text)
        assert len(pf.rows) == 3

    def test_empty_file_is_noop(self):
        pf = parse_perturbation_file(HEADER)
        cfg, pinned, sampled = apply_perturbation(default_config(), pf, np.random.default_rng(0))
        assert cfg == default_config()
        assert not pinned and not sampled

    def test_unknown_path_named(self):
        with pytest.raises(CampaignError, match="BOGUS.X"):
            parse_perturbation_file(HEADER + "BOGUS.X,bar,1,,,\n")

    def test_malformed_row_has_line_number(self):
        with pytest.raises(CampaignError, match="line 2"):
            parse_perturbation_file(HEADER + "SRCR1.P,bar,two,,,\n")

    def test_uniform_requires_bounds(self):
        with pytest.raises(CampaignError, match="bounds"):
            parse_perturbation_file(HEADER + "SRCR1.P,bar,2,,,uniform\n")

    def test_inverted_bounds(self):
        with pytest.raises(CampaignError, match="above max"):
            parse_perturbation_file(HEADER + "SRCR1.P,bar,2,2.0,1.0,uniform\n")

    def test_header_required(self):
        with pytest.raises(CampaignError, match="header"):
            parse_perturbation_file("SRCR1.P,bar,2,1.6,1.98,uniform\n")

    def test_round_trip_text(self):
        pf = parse_perturbation_file(HEADER + "SRCR1.P,bar,2,1.6,1.98,uniform\n")
        assert parse_perturbation_file(pf.to_text()) == pf


class TestSampling:
    def test_values_respect_bounds_and_mean(self):
        pf = parse_perturbation_file(HEADER + "SRCR1.P,bar,2,1.6,1.98,uniform\n")
        rng = np.random.default_rng(11)
        values = []
        for _ in range(10_000):
            _, _, sampled = apply_perturbation(default_config(), pf, rng)
            values.append(sampled["SRCR1.P"])
        values = np.array(values)
        assert values.min() >= 1.6 and values.max() <= 1.98
        half_width = (1.98 - 1.6) / 2
        sigma = half_width / math.sqrt(3) / math.sqrt(len(values))
        assert abs(values.mean() - 1.79) < 3 * sigma


class TestSeeds:
    def test_distinct_per_experiment_and_run(self):
        names = [e for e in experiment_catalog()]
        seeds = {derive_seed(99, n, r) for n in names for r in range(200)}
        assert len(seeds) == len(names) * 200

    def test_deterministic(self):
        assert derive_seed(5, "a:b", 7) == derive_seed(5, "a:b", 7)
        assert derive_seed(5, "a:b", 7) != derive_seed(6, "a:b", 7)


class TestSelectors:
    def test_trivial_includes_nominal(self):
        exps = select_experiments("trivial")
        assert exps[0].name == NULL_LABEL
        assert len(exps) == 5  # nominal + 4 trivial
        assert all(e.trivial for e in exps[1:])

    def test_nontrivial_counts(self):
        assert len(select_experiments("nontrivial6")) == 7
        assert len(select_experiments("nontrivial10")) == 11

    def test_explicit_names(self):
        exps = select_experiments("beforeCompressor:leak,source:lowPressure")
        assert [e.name for e in exps] == [NULL_LABEL, "beforeCompressor:leak", "source:lowPressure"]

    def test_unknown_name(self):
        with pytest.raises(CampaignError, match="unknown experiment"):
            select_experiments("nope:never")


class TestCampaign:
    def test_single_nominal_static_run(self):
        ds = run_campaign(select_experiments([]), n_runs=1, mode="static")
        assert ds.mode == "static"
        assert len(ds.rows) == 1
        assert ds.rows[0][0] == NULL_LABEL
        assert len(ds.rows[0]) == 27

    def test_static_row_accounting(self):
        # 6 nontrivial + nominal at 4 runs each
        ds = run_campaign(select_experiments("nontrivial6"), n_runs=4, mode="static")
        assert len(ds.rows) == 7 * 4
        assert len(ds.columns) == 27

    def test_dynamic_rows_per_run(self):
        exps = select_experiments(["source:lowPressure"])
        ds = run_campaign(exps, n_runs=2, mode="dynamic", timepoints=(2.0, 6.0))
        assert ds.mode == "dynamic"
        assert len(ds.rows) == 2 * 2 * (1 + 2)
        assert len(ds.columns) == 28
        by_run = {}
        for r in ds.rows:
            by_run.setdefault((r[0], r[1]), []).append(r[2])
        assert all(ts == [0.0, 2.0, 6.0] for ts in by_run.values())

    def test_byte_identical_given_seed_and_workers(self, tmp_path):
        exps = select_experiments(["beforeCompressor:leak"])
        a = run_campaign(exps, 3, "dynamic", (2.0, 6.0), master_seed=17, workers=1)
        b = run_campaign(exps, 3, "dynamic", (2.0, 6.0), master_seed=17, workers=4)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_dataset(a, pa)
        write_dataset(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seed_changes_data(self):
        exps = select_experiments(["beforeCompressor:leak"])
        a = run_campaign(exps, 2, "dynamic", (2.0,), master_seed=1)
        b = run_campaign(exps, 2, "dynamic", (2.0,), master_seed=2)
        assert a.rows != b.rows

    def test_unsolved_static_runs_get_sentinels(self):
        # the stuck-closed cooling valve has no steady state
        exps = select_experiments(["coolingWaterOutValve:stuckClosed"])
        ds = run_campaign(exps, 2, "static")
        stuck = [r for r in ds.rows if r[0] != NULL_LABEL]
        assert len(stuck) == 2
        assert all(math.isnan(r[2]) for r in stuck)

    def test_manifest(self):
        exps = select_experiments("trivial")
        text = manifest_text(exps, "dynamic", 75, 3)
        assert "mode dynamic" in text and "seed 3" in text
        assert text.count("experiment ") == len(exps)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        exps = select_experiments(["source:lowPressure"])
        ds = run_campaign(exps, 2, "dynamic", (2.0, 4.0), master_seed=5)
        path = tmp_path / "d.csv"
        write_dataset(ds, path)
        again = read_dataset(path)
        assert again == ds

    def test_header_matches_schema_order(self, tmp_path):
        ds = run_campaign(select_experiments([]), 1, "static")
        path = tmp_path / "s.csv"
        write_dataset(ds, path)
        header = path.read_text().splitlines()[0]
        assert header == ",".join(STATIC_COLUMNS)

    def test_column_mismatch_positioned_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(",".join(STATIC_COLUMNS) + "\nnull,0,1.0\n")
        with pytest.raises(CampaignError, match="bad.csv:2"):
            read_dataset(path)

    def test_non_numeric_cell_positioned_error(self, tmp_path):
        ds = run_campaign(select_experiments([]), 1, "static")
        path = tmp_path / "s.csv"
        write_dataset(ds, path)
        lines = path.read_text().splitlines()
        cells = lines[1].split(",")
        cells[5] = "oops"
        path.write_text("\n".join([lines[0], ",".join(cells)]) + "\n")
        with pytest.raises(CampaignError, match=":2"):
            read_dataset(path)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(CampaignError, match="schema"):
            read_dataset(path)
