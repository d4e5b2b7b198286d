"""Golden tests for the command line frontend.

Each subcommand is exercised through main() with captured output; the
table-producing commands are checked byte for byte against frozen
snapshots and against the library calls they wrap, and the exit code
contract (0 ok, 1 usage, 2 domain) is pinned on representative errors.
"""

from __future__ import annotations

import numpy as np
import pytest

from bflow.algebra import render_sum
from bflow.bseries_hopf import builtin_tableau, convolve_bck, rk_character
from bflow.cli import main
from bflow.forest_core import enumerate_trees

EULER_TABLEAU_TEXT = "1\n0\n1\n"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestAlgebraCommands:
    def test_trees_table(self, capsys):
        code, out, _ = run(capsys, "trees", "-N", "3")
        assert code == 0
        assert out == (
            "[]\t1\t1\t1\n"
            "[[]]\t2\t1\t2\n"
            "[[[]]]\t3\t1\t6\n"
            "[[][]]\t3\t2\t3\n"
        )

    def test_planar_forest_listing(self, capsys):
        code, out, _ = run(capsys, "trees", "-N", "2", "--planar", "--forests")
        assert code == 0
        assert out == "[]\t1\n[[]]\t2\n[] []\t2\n"

    @pytest.mark.parametrize(
        "algebra,element,expected",
        [
            ("cefm", "[]", "[] (x) []"),
            (
                "bck",
                "[[][]]",
                "[[][]] (x) 1 + [] [] (x) [] + 2 * [] (x) [[]] + 1 (x) [[][]]",
            ),
            (
                "mkw",
                "[[]] []",
                "[[]] [] (x) 1 + [[]] (x) [] + [] (x) [] [] + 1 (x) [[]] []",
            ),
            ("fdb", "d2", "d1.d1 (x) d2 + d2 (x) d1"),
            ("fdb", "1", "1 (x) 1"),
        ],
    )
    def test_coproduct_single_element(self, capsys, algebra, element, expected):
        code, out, _ = run(capsys, "coproduct", algebra, element)
        assert code == 0
        assert out == expected + "\n"

    def test_coproduct_table_is_byte_stable(self, capsys):
        code, first, _ = run(capsys, "coproduct", "bck", "--table", "2")
        assert code == 0
        assert first == (
            "[]\t[] (x) 1 + 1 (x) []\n"
            "[[]]\t[[]] (x) 1 + [] (x) [] + 1 (x) [[]]\n"
            "[] []\t[] [] (x) 1 + 2 * [] (x) [] + 1 (x) [] []\n"
        )
        _, second, _ = run(capsys, "coproduct", "bck", "--table", "2")
        assert second == first

    def test_coproduct_needs_input(self, capsys):
        code, _, err = run(capsys, "coproduct", "bck")
        assert code == 1
        assert "usage error" in err

    def test_parse_failure_reports_position(self, capsys):
        code, _, err = run(capsys, "coproduct", "bck", "[[")
        assert code == 1
        assert "position" in err


class TestAnalysisCommands:
    def test_compose_matches_library(self, capsys):
        code, out, _ = run(capsys, "compose", "--first", "euler", "--second", "euler", "-N", "3")
        assert code == 0
        assert out == "1\t1\n[]\t2\n[[]]\t1\n[[][]]\t1\n"
        composed = convolve_bck(
            rk_character(builtin_tableau("euler"), 3),
            rk_character(builtin_tableau("euler"), 3),
            3,
        )
        rows = [f"1\t{composed.unit_value()}"]
        for n in range(1, 4):
            for tree in enumerate_trees(n):
                value = composed.tree_value(tree)
                if value:
                    rows.append(f"{tree.serial}\t{value}")
        assert out == "\n".join(rows) + "\n"

    def test_modified_backward_error_rows(self, capsys):
        code, out, _ = run(
            capsys, "modified", "--builtin", "euler", "--mode", "backward_error", "-N", "2"
        )
        assert code == 0
        assert out == "[]\t1\n[[]]\t-1/2\n"

    def test_substitute_solved_field_recovers_the_method(self, capsys):
        code, out, _ = run(
            capsys,
            "substitute",
            "--builtin",
            "euler",
            "--mode",
            "backward_error",
            "--into",
            "exact",
            "-N",
            "3",
        )
        assert code == 0
        assert out == "1\t1\n[]\t1\n"

    def test_order_of_rk4(self, capsys):
        code, out, _ = run(capsys, "order", "--builtin", "rk4", "-N", "5")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "order: 4"
        assert lines[1].startswith("first violation: ")
        assert "order: " in out

    def test_order_from_tableau_file(self, capsys, tmp_path):
        path = tmp_path / "euler.txt"
        path.write_text(EULER_TABLEAU_TEXT)
        code, out, _ = run(capsys, "order", "--tableau", str(path), "-N", "3")
        assert code == 0
        assert out.splitlines()[0] == "order: 1"

    def test_geometric_verdicts(self, capsys):
        code, out, _ = run(
            capsys, "geometric", "--builtin", "implicit_midpoint", "--kind", "symplectic", "-N", "4"
        )
        assert code == 0
        assert out == "OK\n"
        code, out, _ = run(
            capsys, "geometric", "--builtin", "euler", "--kind", "symplectic", "-N", "2"
        )
        assert code == 0
        assert out.splitlines()[0] == "violation: [] | []"

    def test_series_rows(self, capsys):
        code, out, _ = run(
            capsys, "series", "--method", "lie_implicit_midpoint", "--rep", "type1", "-N", "3"
        )
        assert code == 0
        assert out == "[]\t1\n[[]]\t1/2\n[[[]]]\t1/4\n[[][]]\t1/8\n"
        code, out, _ = run(
            capsys, "series", "--method", "exponential_euler", "--rep", "type3", "-N", "2"
        )
        assert code == 0
        assert out == "[]\t1\n"


class TestRunCommands:
    def test_integrate_rotation_with_norm_drift(self, capsys):
        code, out, _ = run(
            capsys,
            "integrate",
            "--method",
            "lie_euler",
            "--action",
            "rotation",
            "--steps",
            "10",
            "--h",
            "0.1",
            "--check-invariant",
            "norm",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "step,t,y0,y1,y2,norm_drift"
        assert len(lines) == 11
        drifts = [float(line.split(",")[-1]) for line in lines[1:]]
        assert max(drifts) <= 1e-12

    def test_integrate_is_byte_stable(self, capsys):
        args = (
            "integrate", "--method", "cf4", "--action", "rotation",
            "--steps", "5", "--h", "0.2",
        )
        _, first, _ = run(capsys, *args)
        _, second, _ = run(capsys, *args)
        assert first == second

    def test_translation_reduction_rows_match_classical(self, capsys):
        base = (
            "--action", "translation", "--f", "linear",
            "--steps", "4", "--h", "0.2",
        )
        _, classical, _ = run(capsys, "integrate", "--method", "euler", *base)
        _, lie, _ = run(capsys, "integrate", "--method", "lie_euler", *base)
        assert classical == lie

    def test_custom_polynomial_field(self, capsys):
        code, out, _ = run(
            capsys,
            "integrate",
            "--method",
            "euler",
            "--action",
            "translation",
            "--f",
            "y0",
            "--steps",
            "1",
            "--h",
            "0.5",
        )
        assert code == 0
        assert out.splitlines()[1] == "1,0.5,1.5"

    def test_custom_tableau_runs_classically(self, capsys, tmp_path):
        path = tmp_path / "euler.txt"
        path.write_text(EULER_TABLEAU_TEXT)
        base = ("--action", "translation", "--f", "linear", "--steps", "3", "--h", "0.1")
        _, custom, _ = run(capsys, "integrate", "--method", "custom", "--tableau", str(path), *base)
        _, builtin, _ = run(capsys, "integrate", "--method", "euler", *base)
        assert custom == builtin

    def test_isospectral_spectrum_drift(self, capsys):
        code, out, _ = run(
            capsys,
            "integrate",
            "--method",
            "lie_rk4",
            "--action",
            "isospectral",
            "--steps",
            "5",
            "--h",
            "0.05",
            "--check-invariant",
            "spectrum",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0].endswith("eig_drift")
        assert len(lines) == 6
        assert max(float(line.split(",")[-1]) for line in lines[1:]) <= 1e-12

    def test_converge_csv_shape_and_slope(self, capsys):
        code, out, _ = run(
            capsys,
            "converge",
            "--method",
            "cf4",
            "--action",
            "rotation",
            "--h",
            "0.2,0.1,0.05,0.025",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "method,h,error,slope_estimate"
        assert len(lines) == 6
        assert lines[1].startswith("cf4,") and lines[1].endswith(",")
        pair_slopes = [float(line.split(",")[3]) for line in lines[2:5]]
        assert all(abs(s - 4.0) <= 0.2 for s in pair_slopes)
        assert lines[5].startswith("# least-squares slope: ")
        assert abs(float(lines[5].split(": ")[1]) - 4.0) <= 0.2

    def test_converge_writes_a_file(self, capsys, tmp_path):
        path = tmp_path / "rows.csv"
        code, out, _ = run(
            capsys,
            "converge",
            "--method",
            "lie_midpoint",
            "--action",
            "rotation",
            "--h",
            "0.2,0.1,0.05",
            "--out",
            str(path),
        )
        assert code == 0
        assert out == ""
        lines = path.read_text().splitlines()
        assert lines[0] == "method,h,error,slope_estimate"
        assert abs(float(lines[-1].split(": ")[1]) - 2.0) <= 0.15

    def test_y0_override(self, capsys):
        code, out, _ = run(
            capsys,
            "integrate",
            "--method",
            "lie_euler",
            "--action",
            "rotation",
            "--steps",
            "1",
            "--h",
            "0.1",
            "--y0",
            "0,0.6,0.8",
        )
        assert code == 0
        state = [float(v) for v in out.splitlines()[1].split(",")[2:]]
        assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)


class TestExitCodes:
    def test_missing_subcommand_is_usage(self, capsys):
        code, _, err = run(capsys)
        assert code == 1 and "usage error" in err

    def test_unknown_builtin_is_domain(self, capsys):
        code, _, err = run(capsys, "order", "--builtin", "nope", "-N", "3")
        assert code == 2 and "unknown tableau" in err

    def test_order_cap_fails_before_output(self, capsys):
        code, out, err = run(capsys, "trees", "-N", "99")
        assert code == 2
        assert out == ""
        assert "BF_MAX_ORDER" in err

    def test_cap_is_adjustable(self, capsys, monkeypatch):
        monkeypatch.setenv("BF_MAX_ORDER", "3")
        code, _, err = run(capsys, "trees", "-N", "4")
        assert code == 2 and "cap 3" in err
        monkeypatch.setenv("BF_MAX_ORDER", "9")
        code, out, _ = run(capsys, "trees", "-N", "9")
        assert code == 0
        assert len(out.splitlines()) == 486

    def test_classical_method_off_translation_is_domain(self, capsys):
        code, _, err = run(
            capsys,
            "integrate", "--method", "rk4", "--action", "rotation",
            "--steps", "2", "--h", "0.1",
        )
        assert code == 2 and "translation" in err

    def test_translation_requires_field(self, capsys):
        code, _, err = run(
            capsys,
            "integrate", "--method", "lie_euler", "--action", "translation",
            "--steps", "2", "--h", "0.1",
        )
        assert code == 2 and "--f" in err

    def test_wrong_y0_length_is_domain(self, capsys):
        code, _, err = run(
            capsys,
            "integrate", "--method", "lie_euler", "--action", "rotation",
            "--steps", "1", "--h", "0.1", "--y0", "1,2",
        )
        assert code == 2 and "components" in err

    def test_spectrum_needs_matrix_state(self, capsys):
        code, _, err = run(
            capsys,
            "integrate", "--method", "lie_euler", "--action", "rotation",
            "--steps", "1", "--h", "0.1", "--check-invariant", "spectrum",
        )
        assert code == 2 and "symmetric" in err

    def test_too_few_step_sizes_is_domain(self, capsys):
        code, _, err = run(
            capsys,
            "converge", "--method", "lie_euler", "--action", "rotation",
            "--h", "0.1,0.05",
        )
        assert code == 2 and "three" in err

    def test_bad_choice_is_usage(self, capsys):
        code, _, err = run(capsys, "coproduct", "nope", "[]")
        assert code == 1

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["-h"])
        assert exc.value.code == 0
