import json

import numpy as np
import pytest

from sddc.exceptions import DimensionError, SchemaError, ValidationError
from sddc.optimization.programs import (
    LinearProgram,
    ProductGroup,
    QclProgram,
    QuadraticConstraint,
    SolverResult,
    SolveStatus,
    dump_program,
    load_program,
)


def small_lp() -> LinearProgram:
    return LinearProgram([1.0, 2.0], [[1.0, 1.0]], [1.0], [[1.0, -1.0]], [0.5], ("x", "y"), ("sum", "gap"))


def test_default_names():
    lp = LinearProgram([1.0, 2.0, 3.0], [[1.0, 1.0, 1.0]], [1.0], None, None)
    assert lp.variable_names == ("x0", "x1", "x2")
    assert lp.row_names == ("eq0",)
    assert lp.n_rows == 1


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        LinearProgram([1.0, 2.0], [[1.0, 1.0, 1.0]], [1.0], None, None)
    with pytest.raises(DimensionError):
        LinearProgram([1.0, 2.0], [[1.0, 1.0]], [1.0], None, None, variable_names=("x",))


def test_non_finite_rejected():
    with pytest.raises(ValidationError):
        LinearProgram([np.inf, 1.0], [[1.0, 1.0]], [1.0], None, None)


def test_residuals():
    residuals = small_lp().residuals(np.array([1.0, 0.0]))
    assert residuals["equality"] == 0.0
    assert residuals["inequality"] == pytest.approx(0.5)
    assert residuals["bounds"] == 0.0


def test_quadratic_constraint():
    qc = QuadraticConstraint([[1.0, 0.0], [0.0, -1.0]], r=0.5, name="q")
    assert qc.value(np.array([1.0, 2.0])) == pytest.approx(-2.5)
    np.testing.assert_allclose(qc.value(np.array([[1.0, 0.0], [0.0, 1.0]])), [1.5, -0.5])
    np.testing.assert_allclose(qc.gradient(np.array([1.0, 2.0])), [2.0, -4.0])
    assert not qc.homogeneous
    np.testing.assert_array_equal(QuadraticConstraint(np.diag([0.0, 1.0, 0.0])).support(), [1])
    with pytest.raises(ValidationError):
        QuadraticConstraint([[1.0, 2.0], [0.0, 1.0]])


def test_product_groups_must_not_overlap():
    lp = LinearProgram(np.ones(4), [np.ones(4)], [1.0], None, None)
    with pytest.raises(ValidationError):
        QclProgram(lp, (), (ProductGroup([[0, 1]]), ProductGroup([[1, 2]])))
    with pytest.raises(DimensionError):
        QclProgram(lp, (QuadraticConstraint(np.eye(3)),))


def test_dump_and_load(tmp_path):
    lp = small_lp()
    path = dump_program(lp, tmp_path / "lp.json")
    loaded = load_program(path)
    np.testing.assert_array_equal(loaded.A_ub, lp.A_ub)
    assert loaded.row_names == ("sum", "gap")

    qp = QclProgram(lp, (QuadraticConstraint(np.eye(2), name="ball"),), (ProductGroup([[0, 1]], name="s"),))
    loaded = load_program(dump_program(qp, tmp_path / "qp.json"))
    assert isinstance(loaded, QclProgram)
    assert loaded.quadratic[0].name == "ball"
    np.testing.assert_array_equal(loaded.product_groups[0].indices, [[0, 1]])


def test_load_unknown_kind(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema": 1, "kind": "milp"}), encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        load_program(path)
    assert info.value.path == "$.kind"


def test_solver_result_dict():
    result = SolverResult(SolveStatus.INFEASIBLE, method="simplex", extra={"note": 1})
    assert not result.ok
    payload = result.to_dict()
    assert payload["status"] == "infeasible"
    assert payload["note"] == 1
    assert "x" not in payload
