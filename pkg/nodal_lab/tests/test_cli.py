"""Tests for the nodal-lab command line."""
import csv
import io
import json

import pytest

from nodal_lab.cli import build_parser, resolve_config, run, run_selftest
from nodal_lab.field import field_to_json, make_harmonic_polynomial


@pytest.fixture
def re_z3_file(tmp_path):
    f = make_harmonic_polynomial(2, [{"degree": 3, "part": "cos", "weight": 1.0}])
    path = tmp_path / "re_z3.json"
    path.write_text(field_to_json(f))
    return path


class TestSelftest:
    """Tests for the closed-form self test."""

    def test_selftest_passes(self):
        """Test that every check passes with the default quadrature."""
        stream = io.StringIO()
        assert run_selftest(stream=stream) == 0
        assert "✗" not in stream.getvalue()

    def test_sabotaged_quadrature_fails(self, capsys):
        """Test that a one-node quadrature makes the self test exit 3."""
        assert run(["selftest", "--quadrature-order", "1"]) == 3
        assert "✗" in capsys.readouterr().out

    def test_seeded_rerun_is_byte_identical(self, tmp_path, capsys):
        """Test that selftest --seed S --output file reproduces the same bytes."""
        target = tmp_path / "selftest.txt"
        argv = ["selftest", "--seed", "7", "--output", str(target)]
        assert run(argv) == 0
        first = target.read_bytes()
        assert run(argv) == 0
        assert target.read_bytes() == first
        text = first.decode("utf-8")
        assert "(seed 7)" in text
        assert "✗" not in text
        assert capsys.readouterr().out == ""


class TestArguments:
    """Tests for argument handling and exit codes."""

    def test_unknown_flag(self):
        """Test that an unknown flag is a usage error."""
        assert run(["tail-check", "--bogus", "1"]) == 1

    def test_missing_parameter(self, capsys):
        """Test that a missing required parameter is a usage error."""
        assert run(["tail-check", "--p", "1/2"]) == 1
        assert "--epsilon" in capsys.readouterr().err

    def test_bad_rational(self):
        """Test that a malformed rational is a usage error."""
        assert run(["tail-check", "--p", "half", "--epsilon", "0.5", "--sigma", "0.1", "--kmax", "50"]) == 1

    def test_missing_field_file(self, tmp_path):
        """Test that an unreadable field file is a precondition failure."""
        argv = ["frequency", "--field", str(tmp_path / "absent.json"), "--center", "0,0", "--rmin", "0.1", "--rmax", "1"]
        assert run(argv) == 2

    def test_unknown_config_key(self, tmp_path):
        """Test that a config document with an unknown key is rejected."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"command": "tail-check", "constants": {"colour": 1}}))
        assert run(["tail-check", "--config", str(path)]) == 2

    def test_unknown_params_key(self, tmp_path, capsys):
        """Test that a misspelled params key is rejected instead of ignored."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "command": "tail-check",
            "params": {"p": "1/2", "epsilon": 0.5, "sigma": 0.1, "kmaxx": 50},
        }))
        assert run(["tail-check", "--config", str(path)]) == 2
        assert capsys.readouterr().out == ""

    def test_known_params_keys_accepted(self, tmp_path):
        """Test that params keys named by the command's flags are accepted."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "command": "tail-check",
            "params": {"p": "1/2", "epsilon": 0.5, "sigma": 0.1, "kmax": 200},
        }))
        config = resolve_config(build_parser().parse_args(["tail-check", "--config", str(path)]))
        assert config.params["kmax"] == 200

    def test_config_for_another_command(self, tmp_path):
        """Test that a config written for another command is rejected."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"command": "window"}))
        assert run(["tail-check", "--config", str(path)]) == 2

    def test_flags_override_config(self, tmp_path):
        """Test the precedence settings, then config, then flags."""
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "command": "iterate-sim",
            "params": {"k": 5, "trials": 100},
            "constants": {"A": 3, "N0": 7.0},
        }))
        args = build_parser().parse_args(["iterate-sim", "--config", str(path), "--k", "8", "--N0", "9"])
        config = resolve_config(args)
        assert config.params["k"] == 8
        assert config.params["trials"] == 100
        assert config.params["N_start"] == 1000.0
        assert config.constants.A == 3
        assert config.constants.N0 == 9.0


class TestCommands:
    """Tests for command outputs."""

    def test_tail_check_json(self, capsys):
        """Test that tail-check embeds the resolved config and the verified k0."""
        argv = ["tail-check", "--p", "1/2", "--epsilon", "0.5", "--sigma", "0.1", "--kmax", "200", "--seed", "4"]
        assert run(argv) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["config"]["command"] == "tail-check"
        assert document["config"]["seed"] == 4
        assert document["config"]["params"]["p"] == "1/2"
        assert 2 <= document["result"]["k0"] <= 200

    def test_tail_check_violation_writes_partial_result(self, capsys):
        """Test exit 3 with the largest violating k in the partial output."""
        argv = ["tail-check", "--p", "1/1000000000000", "--epsilon", "0.08", "--sigma", "0.5", "--kmax", "10"]
        assert run(argv) == 3
        document = json.loads(capsys.readouterr().out)
        assert document["result"]["largest_violation"] == 10
        assert "error" in document

    def test_frequency_csv(self, re_z3_file, capsys):
        """Test one CSV row per radius with beta = 3.5 for Re z^3."""
        argv = ["frequency", "--field", str(re_z3_file), "--center", "0,0", "--rmin", "0.1", "--rmax", "1",
                "--count", "8", "--format", "csv"]
        assert run(argv) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 8
        assert list(rows[0]) == ["center", "r", "H", "beta", "order"]
        for row in rows:
            assert float(row["beta"]) == pytest.approx(3.5, abs=1e-9)

    def test_reruns_are_byte_identical(self, re_z3_file, tmp_path):
        """Test that the same command and seed reproduce the same file."""
        target = tmp_path / "out.json"
        argv = ["frequency", "--field", str(re_z3_file), "--center", "0,0", "--rmin", "0.1", "--rmax", "1",
                "--count", "4", "--output", str(target)]
        assert run(argv) == 0
        first = target.read_bytes()
        assert run(argv) == 0
        assert target.read_bytes() == first

    def test_iterate_sim_default_keep_probability(self, capsys):
        """Test that iterate-sim defaults p to 1/(2A)."""
        assert run(["iterate-sim", "--A", "4", "--k", "3", "--trials", "200", "--N-start", "100"]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["result"]["p"] == "1/8"

    def test_tunnel_degrees(self, capsys):
        """Test that tunnels --degrees reports one scaling row per degree."""
        assert run(["tunnels", "--degrees", "30", "--threshold", "1e9"]) == 0
        document = json.loads(capsys.readouterr().out)
        rows = document["result"]["rows"]
        assert [row["degree"] for row in rows] == [30]
        assert rows[0]["N"] == pytest.approx(15.25)
        assert document["result"]["slope"] is None
        assert document["result"]["slope_holds"] is False

    def test_low_frequency_tunnels(self, re_z3_file):
        """Test that a field below the frequency gate exits 2."""
        assert run(["tunnels", "--field", str(re_z3_file), "--center", "0,0", "--r", "0.5"]) == 2


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
