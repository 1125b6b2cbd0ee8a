import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilinear_sliding.cli import SUMMARY_HEADER, main
from bilinear_sliding.fileformat import ConfigError, dump_instance, load_instance, parse_bench_config
from bilinear_sliding.instances import named_instance
from bilinear_sliding.traces import TRACE_HEADER, TraceRecord, format_float, read_trace_csv, write_trace_csv

floats = st.floats(allow_nan=False, allow_infinity=False)
optional = st.one_of(st.none(), floats)
counts = st.integers(0, 2 ** 53)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestTraceCSV:
    def test_header_and_empty_cells(self):
        text = write_trace_csv([TraceRecord(0, 0.5, None, None, 1, 2, 3, 4, 10.0)])
        lines = text.splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert lines[1] == "0,0.5,,,1,2,3,4,10"

    def test_seventeen_digits(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert float(format_float(math.pi)) == math.pi

    @given(st.lists(st.tuples(st.integers(0, 10 ** 6), optional, optional, optional, counts, counts, counts, counts,
                              floats), max_size=8))
    def test_round_trip(self, rows):
        records = [TraceRecord(*r) for r in rows]
        back = read_trace_csv(io.StringIO(write_trace_csv(records)))
        assert back == records

    def test_writes_to_stream(self):
        buf = io.StringIO()
        write_trace_csv([], buf)
        assert buf.getvalue().strip() == ",".join(TRACE_HEADER)


class TestInstanceFile:
    @pytest.mark.parametrize("name", ["scsc_small", "coupled_block_n3", "chain_gradient_small", "bilinear_1d"])
    def test_round_trip(self, name):
        p = named_instance(name)
        q, meta = load_instance(dump_instance(p, {"name": name}))
        assert meta["name"] == name
        assert np.array_equal(p.f.hessian, q.f.hessian)
        assert np.array_equal(p.f.linear, q.f.linear)
        assert np.array_equal(p.g.hessian, q.g.hessian)
        assert np.array_equal(p.dense_B(), q.dense_B())
        assert p.params == q.params

    def test_missing_field(self):
        text = dump_instance(named_instance("bilinear_1d")).replace("L_xy", "L_zz")
        with pytest.raises(ConfigError, match="L_xy"):
            load_instance(text)

    def test_bad_matrix(self):
        text = dump_instance(named_instance("bilinear_1d"))
        text = text.replace("shape = 1 1", "shape = 2 1")
        with pytest.raises(ConfigError, match=r"\[B\]"):
            load_instance(text)


class TestBenchConfig:
    TEXT = """
[defaults]
eps = 1e-4
seed = 3

[run a]
instance = scsc_small

[run b]
instance = bilinear_1d
method = extragradient
relative = no
eps = 1e-6
"""

    def test_parse(self):
        a, b = parse_bench_config(self.TEXT)
        assert (a.name, a.instance, a.method, a.eps, a.seed, a.relative) == ("a", "scsc_small", "sliding", 1e-4, 3,
                                                                             True)
        assert (b.method, b.eps, b.relative) == ("extragradient", 1e-6, False)

    def test_seed_override(self):
        assert all(rc.seed == 11 for rc in parse_bench_config(self.TEXT, seed_override="11"))

    @pytest.mark.parametrize("bad, field", [("eps = -1", "eps"), ("restarts = many", "restarts"),
                                            ("colour = red", "colour"), ("method = sgd", "method")])
    def test_errors_name_field(self, bad, field):
        with pytest.raises(ConfigError, match=field):
            parse_bench_config(self.TEXT + bad + "\n")

    def test_no_runs(self):
        with pytest.raises(ConfigError):
            parse_bench_config("[defaults]\neps = 1\n")


class TestCommands:
    def test_solve_sliding(self, capsys):
        code, out, _ = run(capsys, "solve", "--instance", "scsc_small", "--method", "sliding", "--eps", "1e-8")
        assert code == 0
        rows = read_trace_csv(io.StringIO(out))
        r2 = [r.r2 for r in rows]
        # the planned restart count overshoots; once r2 reaches the rounding floor it only jitters
        floor = 1e4 * np.finfo(float).eps ** 2 * r2[0]
        assert all(b <= a for a, b in zip(r2, r2[1:]) if a > floor)
        assert max(r2[1:]) < r2[0] and r2[-1] <= 1e-8 * r2[0]

    def test_solve_identical_bytes(self, capsys, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            assert run(capsys, "solve", "--instance", "scsc_small", "--eps", "1e-3", "-o", str(p))[0] == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_solve_baseline(self, capsys):
        code, out, _ = run(capsys, "solve", "--instance", "scsc_small", "--method", "extragradient",
                           "--max-iters", "5")
        assert code == 0
        rows = read_trace_csv(io.StringIO(out))
        assert len(rows) == 6 and rows[-1].grad_f == 10

    def test_execution_time_weights(self, capsys):
        code, out, _ = run(capsys, "solve", "--instance", "scsc_small", "--method", "gda", "--max-iters", "3",
                           "--tau-f", "2", "--tau-g", "3", "--tau-B", "5")
        last = read_trace_csv(io.StringIO(out))[-1]
        assert last.exec_time == 3 * (2 + 3 + 5 * 2)

    def test_validate_coupled_block(self, capsys):
        code, out, _ = run(capsys, "validate", "--instance", "coupled_block_n3")
        assert code == 0
        assert "lower_bound_ok=true" in out and "upper_bound_ok=true" in out
        assert out.strip().endswith("valid=true")

    def test_validate_file_round_trip(self, capsys, tmp_path):
        path = tmp_path / "inst.ini"
        assert run(capsys, "gen-instance", "--name", "coupled_block_n3", "-o", str(path))[0] == 0
        code, out, _ = run(capsys, "validate", "--instance", str(path))
        assert code == 0 and "lower_bound_ok=true" in out

    def test_validate_failure(self, capsys, tmp_path):
        path = tmp_path / "bad.ini"
        assert run(capsys, "gen-instance", "--name", "scsc_small", "-o", str(path))[0] == 0
        path.write_text(path.read_text().replace("mu_x = 1\n", "mu_x = 3\n"))
        code, out, _ = run(capsys, "validate", "--instance", str(path))
        assert code == 1 and "valid=false" in out

    def test_gen_instance_kind(self, capsys):
        code, out, _ = run(capsys, "gen-instance", "--kind", "bilinear-tridiag", "--params",
                           "L_x=10,L_y=10,L_xy=19,mu_x=1,mu_y=1,mu_xy=1,mu_yx=1", "--dx", "4")
        assert code == 0
        p, meta = load_instance(out)
        np.testing.assert_allclose(np.diag(p.dense_B()), 10.0)

    def test_seed_environment(self, capsys, monkeypatch):
        base = run(capsys, "gen-instance", "--name", "scsc_small")[1]
        monkeypatch.setenv("SEED", "99")
        other = run(capsys, "gen-instance", "--name", "scsc_small")[1]
        again = run(capsys, "gen-instance", "--name", "scsc_small", "--seed", "1")[1]
        assert other != base and again == other
        monkeypatch.setenv("SEED", "x")
        assert run(capsys, "gen-instance", "--name", "scsc_small")[0] == 2

    def test_bench(self, capsys, tmp_path):
        cfg = tmp_path / "bench.ini"
        trace_path = tmp_path / "t.csv"
        cfg.write_text(TestBenchConfig.TEXT + f"output = {trace_path}\n")
        code, out, _ = run(capsys, "bench", "--config", str(cfg))
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert tuple(rows[0]) == SUMMARY_HEADER
        assert [r[:3] for r in rows[1:]] == [["a", "scsc_small", "sliding"], ["b", "bilinear_1d", "extragradient"]]
        assert float(rows[2][6]) <= 1e-6
        assert read_trace_csv(io.StringIO(trace_path.read_text()))[-1].r2 <= 1e-6
        code2, out2, _ = run(capsys, "bench", "--config", str(cfg))
        assert out2 == out

    @pytest.mark.parametrize("argv", [["--bogus"], ["solve"], ["solve", "--instance", "scsc_small", "--wat"],
                                      ["solve", "--instance", "nope"], ["solve", "--instance", "scsc_small",
                                                                         "--eps", "0"],
                                      ["gen-instance", "--kind", "bilinear-tridiag"],
                                      ["gen-instance", "--kind", "bilinear-tridiag", "--params", "L_x=abc"]])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2

    def test_bad_config_names_field(self, capsys, tmp_path):
        cfg = tmp_path / "bench.ini"
        cfg.write_text("[run a]\ninstance = scsc_small\nmax_iters = lots\n")
        code, _, err = run(capsys, "bench", "--config", str(cfg))
        assert code == 2 and "max_iters" in err

    def test_assumption_violation_exit(self, capsys):
        code, _, err = run(capsys, "gen-instance", "--kind", "random-quadratic", "--params",
                           "L_x=4,L_y=10,L_xy=20,mu_x=1,mu_y=1")
        assert code == 1 and "L_x > 4 mu_x" in err

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "bilinear_sliding.cli", "validate", "--instance",
                              "bilinear_tridiag_small"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "bidiagonal_coupling" in res.stdout
