import pytest

from spillseg.core import ops
from spillseg.domain.diagnostics import (
    ALL_CASES,
    COMPOSITE_CASES,
    OPERATOR_CASES,
    run_case,
    run_gradcheck_suite,
)


def _operator_names(cls=ops.Operator):
    names = set()
    for sub in cls.__subclasses__():
        names.add(sub.name)
        names |= _operator_names(sub)
    return names


def test_every_operator_has_exactly_one_check():
    case_names = [case.name for case in OPERATOR_CASES]

    assert len(case_names) == len(set(case_names))
    assert set(case_names) == _operator_names()


def test_composites_cover_branches_head_and_loss():
    assert [case.name for case in COMPOSITE_CASES] == ["segnet", "deeplab", "fusion", "total_loss"]


def test_suite_passes_on_two_seeds():
    seen = []

    rows = run_gradcheck_suite((0, 1), ALL_CASES, on_case=seen.append)

    assert [row.name for row in rows] == [case.name for case in ALL_CASES]
    assert seen == rows
    failing = [(row.name, row.max_rel_error) for row in rows if not row.passed]
    assert failing == []
    assert all(row.seeds == 2 for row in rows)


def test_wrong_backward_is_caught(monkeypatch):
    original = ops.Sigmoid.backward

    def doubled(self, dout):
        (dx,) = original(self, dout)
        return (2.0 * dx,)

    monkeypatch.setattr(ops.Sigmoid, "backward", doubled)
    sigmoid = next(case for case in OPERATOR_CASES if case.name == "sigmoid")

    row = run_case(sigmoid, [0])

    assert not row.passed
    assert row.max_rel_error == pytest.approx(0.5, rel=1e-3)
