import pytest

from mcore.smt import expression as E
from mcore.smt.constraints import ConstraintSet
from mcore.smt.solver import (
    NoModel,
    Solver,
    SolverConfig,
    SolverUnavailable,
    Verdict,
)

x = E.BitVec("x", 8)


@pytest.fixture(scope="module")
def solver():
    s = Solver()
    yield s
    s.close()


def cs(*conds):
    return ConstraintSet().add(*conds)


class TestCheck:
    def test_contradiction(self, solver):
        assert solver.check(cs(x.ugt(5), x.ult(3))).verdict is Verdict.UNSAT

    def test_sat(self, solver):
        assert solver.check(cs((x + 1).eq(10))).verdict is Verdict.SAT

    def test_empty(self, solver):
        assert solver.check(ConstraintSet()).verdict is Verdict.SAT


class TestGetValue:
    def test_unique(self, solver):
        # brute force: x + 1 == 10 (mod 256) only for x == 9
        assert [v for v in range(256) if (v + 1) % 256 == 10] == [9]
        assert solver.get_value(cs((x + 1).eq(10)), x) == 9

    def test_constant(self, solver):
        assert solver.get_value(ConstraintSet(), E.bv(42, 8)) == 42

    def test_either(self, solver):
        assert solver.get_value(cs(x.ult(2)), x) in {0, 1}

    def test_unsat_raises(self, solver):
        with pytest.raises(NoModel):
            solver.get_value(cs(x.ne(x)), x)


class TestCanMust:
    def test_fixed(self, solver):
        c = cs(x.eq(3))
        assert solver.can_be_true(c, x.eq(3)) and solver.must_be_true(c, x.eq(3))

    def test_range(self, solver):
        c = cs(x.ult(10))
        assert solver.can_be_true(c, x.eq(4)) and not solver.must_be_true(c, x.eq(4))

    def test_impossible(self, solver):
        assert not solver.can_be_true(cs(x.eq(3)), x.eq(4))


class TestAllValues:
    def test_small_range(self, solver):
        expected = {v for v in range(256) if v < 3}
        assert set(solver.all_values(cs(x.ult(3)), x, 10)) == expected

    def test_singleton(self, solver):
        assert solver.all_values(cs(x.eq(7)), x, 10) == [7]

    def test_unsat_empty(self, solver):
        assert solver.all_values(cs(x.ne(x)), x, 10) == []

    def test_cap(self, solver):
        vals = solver.all_values(ConstraintSet(), x, 5)
        assert len(vals) == 5 and len(set(vals)) == 5


def test_min_max(solver):
    c = cs(x.ugt(17), x.ult(200), x.ne(199))
    assert solver.min_max(c, x) == (18, 198)


def test_arrays(solver):
    m = E.Array("m", 32, 8)
    i = E.BitVec("i", 32)
    c = cs(E.select(E.store(m, i, E.bv(7, 8)), E.bv(5, 32)).eq(7), E.select(m, E.bv(5, 32)).ne(7))
    assert solver.get_value(c, i) == 5


def test_wide_values(solver):
    w = E.BitVec("w", 256)
    c = cs(w.eq(E.bv((1 << 255) + 3, 256)))
    assert solver.get_value(c, w) == (1 << 255) + 3


def test_oneshot_mode_agrees():
    s = Solver(SolverConfig(incremental=False))
    assert s.get_value(cs((x + 1).eq(10)), x) == 9
    assert set(s.all_values(cs(x.ult(3)), x, 10)) == {0, 1, 2}


def test_missing_solver_is_unavailable():
    s = Solver(SolverConfig(command=("/nonexistent/z3", "-in")))
    with pytest.raises(SolverUnavailable):
        s.check(cs(x.eq(1)))


def test_queries_counted(solver):
    before = solver.queries
    solver.is_sat(cs(x.eq(1)))
    assert solver.queries == before + 1
