import numpy as np
import pytest

from sddc.exceptions import (
    ConvergenceError,
    DimensionError,
    SchemaError,
    SddcError,
    UnknownLabelError,
    ValidationError,
    error_payload,
)


def test_to_dict_carries_code_and_details():
    exc = DimensionError("维度错误", expected=(2, 2), actual=np.int64(3))
    payload = exc.to_dict()
    assert payload["error"] == "dimension_error"
    assert payload["message"] == "维度错误"
    assert payload["expected"] == [2, 2]
    assert payload["actual"] == 3
    assert isinstance(payload["actual"], int)


def test_hierarchy():
    assert issubclass(DimensionError, ValidationError)
    assert issubclass(UnknownLabelError, ValidationError)
    assert issubclass(ValidationError, SddcError)
    with pytest.raises(ValidationError):
        raise UnknownLabelError("未知的状态", label="s9")


def test_convergence_error_keeps_residual():
    exc = ConvergenceError("不收敛", residual=1e-3)
    assert exc.residual == 1e-3
    assert exc.to_dict()["residual"] == 1e-3


def test_schema_error_renders_path():
    exc = SchemaError("缺少必填字段", path="$.lambda")
    assert str(exc) == "$.lambda: 缺少必填字段"
    assert exc.to_dict()["path"] == "$.lambda"


def test_error_payload_for_foreign_exception():
    payload = error_payload(FileNotFoundError("missing.json"), path="missing.json")
    assert payload["error"] == "FileNotFoundError"
    assert payload["path"] == "missing.json"


def test_error_payload_keeps_own_path():
    payload = error_payload(SchemaError("x", path="$.mdp"), path="other")
    assert payload["path"] == "$.mdp"
