import subprocess
import sys
import pytest

PY = [sys.executable, "-m", "faultrules"]


def run(*argv, cwd=None):
    return subprocess.run(PY + list(argv), capture_output=True, text=True, cwd=cwd)


class TestSimulate:
    def test_nominal_static(self):
        r = run("simulate", "--mode", "static")
        assert r.returncode == 0, r.stderr
        lines = r.stdout.strip().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("srcr1_p,")

    def test_cooling_disabled_is_domain_failure(self, tmp_path):
        cfg = tmp_path / "broken.cfg"
        cfg.write_text("CW1.OP = 0\n")
        r = run("simulate", "--mode", "static", "--config", str(cfg))
        assert r.returncode == 2
        assert "runaway" in r.stderr

    def test_bad_path_is_usage_error(self):
        r = run("simulate", "--config", "/nonexistent/x.cfg")
        assert r.returncode == 1

    def test_dynamic_trajectory(self, tmp_path):
        pert = tmp_path / "p.csv"
        pert.write_text("param,unit,default,min,max,instr\nSRCR1.P,bar,2,1.6,1.98,uniform\n")
        r = run("simulate", "--mode", "dynamic", "--perturbation", str(pert), "--timepoints", "2,6", "--seed", "4")
        assert r.returncode == 0, r.stderr
        lines = r.stdout.strip().splitlines()
        assert lines[0].startswith("timepoint,")
        assert len(lines) == 4  # header + t=0 + two timepoints

    def test_unknown_flag_is_error(self):
        r = run("simulate", "--frobnicate")
        assert r.returncode == 1

    def test_help_lists_flags(self):
        r = run("simulate", "--help")
        assert r.returncode == 0
        for flag in ("--mode", "--config", "--perturbation", "--timepoints", "--seed", "--workers"):
            assert flag in r.stdout


@pytest.fixture(scope="module")
def small_pipeline(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    data = tmp / "data.csv"
    hyp = tmp / "rules.lp"
    report = tmp / "report.txt"
    split_file = tmp / "split.csv"
    gen = run(
        "gen-data", "--experiments", "source:lowPressure,tempControl:lowSetpoint",
        "--n-runs", "4", "--out", str(data), "--seed", "3", "--workers", "2",
        "--manifest-out", str(tmp / "manifest.txt"),
    )
    assert gen.returncode == 0, gen.stderr
    learn = run("learn", "--data", str(data), "--out", str(hyp), "--seed", "3", "--split-out", str(split_file))
    assert learn.returncode == 0, learn.stderr
    ev = run(
        "eval", "--data", str(data), "--hypothesis", str(hyp), "--seed", "3",
        "--out", str(report), "--roc-out", str(tmp / "roc.csv"), "--csv-out", str(tmp / "report.csv"),
    )
    assert ev.returncode == 0, ev.stderr
    return tmp


class TestPipelineCommands:
    def test_gen_data_row_count(self, small_pipeline):
        lines = (small_pipeline / "data.csv").read_text().strip().splitlines()
        # header + 3 classes x 4 runs x (1 + 11 timepoints)
        assert len(lines) == 1 + 3 * 4 * 12

    def test_hypothesis_parseable_round_trip(self, small_pipeline):
        from faultrules.solver import hypothesis_from_text, hypothesis_to_text

        text = (small_pipeline / "rules.lp").read_text()
        h = hypothesis_from_text(text)
        assert hypothesis_to_text(h) == text

    def test_report_contents(self, small_pipeline):
        text = (small_pipeline / "report.txt").read_text()
        assert "avg(auc)=" in text
        csv_text = (small_pipeline / "report.csv").read_text()
        assert csv_text.startswith("config,min_auc")

    def test_roc_csv(self, small_pipeline):
        text = (small_pipeline / "roc.csv").read_text()
        assert text.startswith("event,fpr,tpr")

    def test_split_file(self, small_pipeline):
        lines = (small_pipeline / "split.csv").read_text().strip().splitlines()
        assert lines[0] == "example_id,fold"
        assert len(lines) == 1 + 3 * 4

    def test_manifest(self, small_pipeline):
        text = (small_pipeline / "manifest.txt").read_text()
        assert "mode dynamic" in text and "experiment null" in text


class TestGenDataStatic:
    def test_two_nominal_rows(self, tmp_path):
        out = tmp_path / "s.csv"
        r = run("gen-data", "--experiments", "", "--n-runs", "2", "--task", "static", "--out", str(out), "--seed", "1")
        assert r.returncode == 0, r.stderr
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3
        assert lines[1].startswith("null,0,")


class TestSweepCommand:
    def test_single_axis(self, tmp_path):
        data_args = ["--experiments", "source:lowPressure", "--n-runs", "4"]
        r = run("sweep", "--axis", "t_short_term", "--values", "6", *data_args, "--seed", "2")
        assert r.returncode == 0, r.stderr
        assert "t_short_term=6" in r.stdout

    def test_unknown_axis_usage_error(self):
        r = run("sweep", "--axis", "nope", "--values", "1", "--seed", "0")
        assert r.returncode == 1


class TestDeterminism:
    def test_full_pipeline_byte_identical_across_worker_counts(self, tmp_path):
        outputs = {}
        for workers in ("1", "8"):
            for attempt in ("a", "b"):
                d = tmp_path / f"w{workers}{attempt}"
                d.mkdir()
                gen = run(
                    "gen-data", "--experiments", "source:lowPressure", "--n-runs", "3",
                    "--out", str(d / "data.csv"), "--seed", "11", "--workers", workers,
                )
                assert gen.returncode == 0, gen.stderr
                learn = run(
                    "learn", "--data", str(d / "data.csv"), "--out", str(d / "rules.lp"),
                    "--seed", "11", "--workers", workers,
                )
                assert learn.returncode == 0, learn.stderr
                ev = run(
                    "eval", "--data", str(d / "data.csv"), "--hypothesis", str(d / "rules.lp"),
                    "--seed", "11", "--out", str(d / "report.txt"),
                )
                assert ev.returncode == 0, ev.stderr
                outputs[(workers, attempt)] = tuple(
                    (d / name).read_bytes() for name in ("data.csv", "rules.lp", "report.txt")
                )
        assert len(set(outputs.values())) == 1
