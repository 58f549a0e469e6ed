import io
import json
import math

import numpy as np
import pytest

from genloggamma import Theta, sample
from genloggamma.cli import InputError, main, read_numbers, simulate_data
from genloggamma.control import Control

# fits of the committed fixture (500 LG(0,1,0) draws, seed 2013), frozen at first build
FROZEN = {
    "QTau": (0.02932063028133576, 1.0146583850090236, 0.0),
    "WQTau": (0.032687790625676415, 1.0169743053876297, 0.0),
    "oneWL": (0.05331588906039278, 1.0011313246357174, 0.03606711334485178),
    "WL": (0.05581683500247563, 1.000593924900987, 0.04153082719905345),
    "ML": (0.05585648424408123, 1.0006495217966116, 0.04170515264126978),
}
# the fixture is clean normal data; every estimator's shape must land here
FIXTURE_LAMBDA_TOL = 0.25


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


@pytest.fixture(scope="module")
def fixture_fits(fixture_path):
    from genloggamma import fit

    with open(fixture_path) as fh:
        y = read_numbers(fh)
    return {m: fit(y, m) for m in FROZEN}


class TestReadNumbers:
    def test_comments_blank_and_columns(self):
        text = "# c\n\n1.5\n 2 \n"
        assert read_numbers(io.StringIO(text)).tolist() == [1.5, 2.0]
        csv_text = "a,b\n1,10\n2,20\n"
        assert read_numbers(io.StringIO(csv_text), column=2, header=True).tolist() == [10.0, 20.0]

    def test_errors_carry_line_numbers(self):
        with pytest.raises(InputError, match=":3:"):
            read_numbers(io.StringIO("1\n2\nx\n"))
        with pytest.raises(InputError, match="no column 3"):
            read_numbers(io.StringIO("1,2\n"), column=3)
        with pytest.raises(InputError):
            read_numbers(io.StringIO("1\nnan\n"))


class TestSimulate:
    def test_clean_matches_sample(self, capsys):
        code, out, _ = run(capsys, "simulate", "--mu", 1, "--sigma", 2, "--lambda", 0.5, "-n", 50, "--seed", 7)
        assert code == 0
        lines = out.splitlines()
        assert lines[0].startswith("# LG draws") and "seed=7" in lines[0]
        values = [float(v) for v in lines[1:]]
        assert values == sample(50, (1, 2, 0.5), seed=7).tolist()

    def test_contamination_shifts_exactly_floor(self, capsys):
        base = simulate_data(Theta(0, 1, 1), 123, 3)
        dirty = simulate_data(Theta(0, 1, 1), 123, 3, eps=0.2, shift=15.0)
        moved = np.flatnonzero(dirty != base)
        assert moved.size == math.floor(0.2 * 123)
        assert np.allclose(dirty[moved] - base[moved], 15.0)

    def test_eps_out_of_range(self, capsys):
        code, _, err = run(capsys, "simulate", "--eps", 0.5)
        assert code == 4 and "eps" in err

    def test_writes_file(self, capsys, tmp_path):
        out = tmp_path / "y.txt"
        assert run(capsys, "simulate", "-n", 10, "-o", out)[0] == 0
        with open(out) as fh:
            assert read_numbers(fh).size == 10


class TestFit:
    @pytest.mark.parametrize("method", sorted(FROZEN))
    def test_fixture_frozen(self, fixture_fits, method):
        th = fixture_fits[method].theta.as_array()
        assert th == pytest.approx(FROZEN[method], rel=1e-7, abs=1e-9)
        assert abs(th[2]) < FIXTURE_LAMBDA_TOL

    def test_text_output(self, capsys, fixture_path):
        code, out, _ = run(capsys, "fit", fixture_path, "--method", "ML")
        assert code == 0
        for piece in ("Call:", "Location:", "Scale:", "Shape:", "percent confidence interval", "Robustness weights"):
            assert piece in out

    def test_json_roundtrip(self, capsys, fixture_path):
        from genloggamma import FitResult

        d = run_json(capsys, "fit", fixture_path, "--method", "WL")
        assert d["schema"] == 1
        fit = FitResult.from_dict(d["fit"])
        assert fit.to_dict() == d["fit"]
        for key in ("mu", "sigma", "lambda", "eta", "weights", "iterations"):
            assert key in d["fit"]
        assert Control.from_dict(d["control"]) == Control()
        assert fit.theta.as_array() == pytest.approx(FROZEN["WL"], rel=1e-7)

    def test_byte_identical_reruns(self, capsys, fixture_path):
        a = run(capsys, "fit", fixture_path, "--method", "oneWL", "--json")
        b = run(capsys, "fit", fixture_path, "--method", "oneWL", "--json")
        assert a == b

    def test_explicit_chain_equals_default(self, capsys, fixture_path):
        q = run_json(capsys, "fit", fixture_path, "--method", "QTau")["fit"]
        start = f"{q['mu']!r},{q['sigma']!r},{q['lambda']!r}"
        chained = run_json(capsys, "fit", fixture_path, "--method", "WQTau", "--start", start)["fit"]
        default = run_json(capsys, "fit", fixture_path, "--method", "WQTau")["fit"]
        assert (chained["mu"], chained["sigma"], chained["lambda"]) == (default["mu"], default["sigma"], default["lambda"])

    def test_log_transform(self, capsys, tmp_path, fixture_data):
        path = tmp_path / "cost.txt"
        path.write_text("\n".join(repr(float(v)) for v in np.exp(fixture_data)))
        d = run_json(capsys, "fit", path, "--log", "--method", "QTau")
        assert (d["fit"]["mu"], d["fit"]["sigma"]) == pytest.approx(FROZEN["QTau"][:2], rel=1e-9)

    def test_log_rejects_nonpositive(self, capsys, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1\n2\n0\n4\n5\n")
        code, _, err = run(capsys, "fit", path, "--log")
        assert code == 2 and "value #3" in err

    def test_csv_column(self, capsys, tmp_path, fixture_data):
        path = tmp_path / "d.csv"
        path.write_text("id,y\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(fixture_data.tolist())))
        d = run_json(capsys, "fit", path, "--column", 2, "--header", "--method", "QTau")
        assert d["fit"]["mu"] == pytest.approx(FROZEN["QTau"][0], rel=1e-12)


class TestTest:
    def test_wald_on_fixture(self, capsys, fixture_path):
        code, out, _ = run(capsys, "test", fixture_path, "--method", "ML", "--lambda", 0)
        assert code == 0
        assert "ww = " in out and "df = 1" in out and "confidence interval" in out
        assert "true shape is not equal to 0" in out

    def test_two_restrictions_have_no_interval(self, capsys, fixture_path):
        d = run_json(capsys, "test", fixture_path, "--method", "ML", "--mu", 0, "--sigma", 1)
        assert d["test"]["df"] == 2 and d["test"]["conf_int"] is None

    def test_null_at_estimate(self, capsys, fixture_path):
        mu = run_json(capsys, "fit", fixture_path, "--method", "ML")["fit"]["mu"]
        d = run_json(capsys, "test", fixture_path, "--method", "ML", "--mu", repr(mu))
        assert d["test"]["p_value"] == pytest.approx(1.0)

    def test_wilks(self, capsys, fixture_path):
        d = run_json(capsys, "test", fixture_path, "--method", "ML", "--wilks")
        assert d["test"]["test"] == "Wilks" and d["test"]["df"] == 1
        assert 0 <= d["test"]["p_value"] <= 1

    def test_flag_conflicts(self, capsys, fixture_path):
        assert run(capsys, "test", fixture_path)[0] == 4
        assert run(capsys, "test", fixture_path, "--wilks", "--mu", 0)[0] == 4
        assert run(capsys, "test", fixture_path, "--wilks", "--method", "QTau")[0] == 4


class TestQQ:
    def test_table(self, capsys, fixture_path):
        code, out, _ = run(capsys, "qq", fixture_path, "--method", "ML")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "theoretical_q,empirical_q,lower,upper,weight"
        rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        assert rows.shape == (500, 5)
        assert np.all(np.diff(rows[:, 0]) > 0)
        assert np.all((rows[:, 2] < rows[:, 0]) & (rows[:, 0] < rows[:, 3]))
        assert np.all(np.diff(rows[:, 1]) >= 0)

    @pytest.mark.slow
    def test_pointwise_band_coverage(self, capsys, tmp_path):
        inside = []
        for seed in range(100):
            path = tmp_path / "y.txt"
            path.write_text("\n".join(map(repr, sample(500, (0, 1, 0.5), seed=seed).tolist())))
            rows = run_json(capsys, "qq", path, "--method", "ML")["rows"]
            inside += [r["lower"] <= r["empirical_q"] <= r["upper"] for r in rows]
        assert np.mean(inside) == pytest.approx(0.90, abs=0.10)


class TestExitCodes:
    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "fit", tmp_path / "nope.txt")
        assert code == 2 and "cannot read" in err

    def test_unparseable_line(self, capsys, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1\n2\nthree\n4\n5\n")
        code, _, err = run(capsys, "fit", path)
        assert code == 2 and ":3:" in err

    def test_too_few(self, capsys, tmp_path):
        path = tmp_path / "few.txt"
        path.write_text("1\n2\n")
        assert run(capsys, "fit", path)[0] == 2

    def test_estimation_failure(self, capsys, tmp_path):
        path = tmp_path / "flat.txt"
        path.write_text("1\n" * 20)
        code, _, err = run(capsys, "fit", path, "--method", "QTau")
        assert code == 3 and "estimation failed" in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["fit", "--method", "nope"],
            ["fit", "--grid", "1:2"],
            ["fit", "--start", "1,2"],
            ["fit", "--start", "0,-1,0"],
            ["fit", "--raf", "xyz"],
            ["fit", "--minw", "2"],
            ["bogus"],
        ],
    )
    def test_usage_errors(self, capsys, fixture_path, argv):
        assert run(capsys, *argv[:1], fixture_path, *argv[1:])[0] == 4

    def test_start_with_qtau(self, capsys, fixture_path):
        assert run(capsys, "fit", fixture_path, "--method", "QTau", "--start", "0,1,0")[0] == 4

    def test_weights_only_for_tau_methods(self, capsys, fixture_path, tmp_path):
        w = tmp_path / "w.txt"
        w.write_text("1\n" * 500)
        assert run(capsys, "fit", fixture_path, "--weights", w)[0] == 4
        assert run(capsys, "fit", fixture_path, "--weights", w, "--method", "QTau")[0] == 0

    @pytest.mark.parametrize("command", ["fit", "test", "qq"])
    def test_help_lists_every_knob(self, capsys, command):
        code, out, _ = run(capsys, command, "--help")
        assert code == 0
        for flag in ("--tuning-rho", "--tuning-psi", "--n-resample", "--max-it", "--refine-tol", "--grid",
                     "--bw", "--subdivisions", "--raf", "--raf-tau", "--minw", "--nexp", "--step", "--seed"):
            assert flag in out
        assert "1.548" in out and "6.08" in out
