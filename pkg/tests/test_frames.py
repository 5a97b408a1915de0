import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vfsim.errors import InvalidArgumentError, MissingFactorError
from vfsim.frames import (Context, EnumDomain, ExecutionSpec, FactorSet, Interval, PropertySet,
                          Status, ValidityFrame, ValidityRecord, domain_region_contains,
                          frame_admits, frame_covers, parse_domain, run_validations, validation)
from vfsim.models import Trajectory
from vfsim.vfg import VFGraph, enumerate_admissible


def frame(fid="f", pi=None, gamma=None, wcet=1.0, **kw):
    pi = {"position": "[0, 100]"} if pi is None else pi
    return ValidityFrame(fid, f"m_{fid}", pi, gamma or {}, ExecutionSpec("desk", wcet, wcet), **kw)


def trace(x, lane=None):
    x = np.asarray(x, dtype=float)
    lane = np.zeros(len(x), dtype=np.int64) if lane is None else np.asarray(lane)
    return Trajectory(np.arange(len(x), dtype=float), x, np.ones(len(x)), lane, [])


class TestAdmits:
    def test_non_blinking_frame(self):
        fr = frame(gamma={"blinking": "{false}"})
        assert frame_admits(fr, Context(blinking=False))
        assert not frame_admits(fr, Context(blinking=True))

    def test_empty_gamma_admits_everything(self):
        fr = frame()
        assert frame_admits(fr, Context(blinking=True))
        assert frame_admits(fr, Context())

    def test_missing_factor_is_an_error(self):
        with pytest.raises(MissingFactorError) as err:
            frame_admits(frame(gamma={"blinking": "{false}"}), Context(gap=3.0))
        assert err.value.factor == "blinking"

    def test_interval_factor(self):
        fr = frame(gamma={"gap": "[10, 50]"})
        assert frame_admits(fr, {"gap": 10.0}) and frame_admits(fr, {"gap": 50})
        assert not frame_admits(fr, {"gap": 50.001})
        assert not frame_admits(fr, {"gap": True})
        assert not frame_admits(fr, {"gap": "near"})

    def test_bool_is_not_number(self):
        fr = frame(gamma={"lanes": "{1, 2}"})
        assert not frame_admits(fr, {"lanes": True})
        assert frame_admits(fr, {"lanes": 1.0})


class TestCovers:
    def test_reflexive(self):
        fr = frame(pi={"position": "[0, 100]", "lane": "{0, 1}"})
        assert frame_covers(fr, fr.pi)

    def test_absent_name(self):
        assert not frame_covers(frame(), PropertySet({"lane": "{0}"}))

    @pytest.mark.parametrize("req,expected", [
        ("[0, 100]", True), ("[10, 90]", True), ("[0, 100.5]", False),
        ("[-1, 50]", False), ("[100, 100]", True), ("[-5, 105]", False)])
    def test_interval_containment(self, req, expected):
        assert frame_covers(frame(), PropertySet({"position": req})) is expected

    def test_kind_mismatch(self):
        assert not frame_covers(frame(), PropertySet({"position": "{1}"}))


class TestValidations:
    def test_empty(self):
        fr = frame()
        assert run_validations(fr, trace([0, 1]), Context()) == []
        assert fr.validity.status is Status.ASSUMED_VALID

    def test_monotone_passes(self):
        fr = frame(validations=[validation("x_nondecreasing")])
        assert run_validations(fr, trace([0, 1, 1, 3]), Context()) == [("x_nondecreasing", True)]
        assert fr.validity.status is Status.ASSUMED_VALID

    def test_violation_invalidates_and_dispatch_excludes(self):
        fr = frame("bad", validations=[validation("x_nondecreasing")])
        g = VFGraph().add_frame(frame("head", wcet=5.0), head=True).add_frame(fr)
        ctx = Context(blinking=False)
        assert enumerate_admissible(g, ctx, {}) == ["bad", "head"]
        results = run_validations(fr, trace([0, 2, 1]), ctx)
        assert results == [("x_nondecreasing", False)]
        assert fr.invalidated and "x_nondecreasing" in fr.validity.notes
        assert enumerate_admissible(g, ctx, {}) == ["head"]

    def test_expected_false(self):
        fr = frame(validations=[validation("lane_constant", expected=False)])
        assert run_validations(fr, trace([0, 1], lane=[0, 1]), Context()) == [
            ("lane_constant", True)]

    def test_unknown_predicate(self):
        with pytest.raises(InvalidArgumentError):
            validation("never_heard_of_it")

    def test_record_updates_serialised(self):
        rec = ValidityRecord()
        threads = [threading.Thread(target=rec.update, args=(s, s.value))
                   for s in list(Status) * 20]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert rec.notes == rec.status.value


class TestTypes:
    def test_exec_spec_bounds(self):
        with pytest.raises(InvalidArgumentError):
            ExecutionSpec("p", 1.0, 2.0)
        with pytest.raises(InvalidArgumentError):
            ExecutionSpec("p", 1.0, 0.0)

    def test_empty_interval(self):
        with pytest.raises(InvalidArgumentError):
            Interval(2.0, 1.0)

    def test_parse_domain(self):
        assert parse_domain("[1, 2.5]") == Interval(1.0, 2.5)
        assert parse_domain("{true, false}") == EnumDomain((False, True))
        assert parse_domain("{dry, wet}").values == ("dry", "wet")
        with pytest.raises(InvalidArgumentError):
            parse_domain("1..2")
        with pytest.raises(InvalidArgumentError):
            parse_domain("{}")

    def test_domain_str_round_trip(self):
        for text in ("[0, 100]", "{false, true}", "{0, 1, 2}", "[0.5, 1.5]"):
            assert str(parse_domain(text)) == text

    def test_map_names_checked(self):
        with pytest.raises(InvalidArgumentError):
            frame(map_pi={"speed": "v"})
        with pytest.raises(InvalidArgumentError):
            frame(map_gamma={"blinking": "b"})
        fr = frame(gamma={"blinking": "{true}"}, map_pi={"position": "x"},
                   map_gamma={"blinking": "signal"})
        assert fr.map_gamma["blinking"] == "signal"

    def test_sets_are_mappings(self):
        fs = FactorSet({"b": "{true}", "a": "[0, 1]"})
        assert list(fs) == ["a", "b"] and fs.names == {"a", "b"}
        assert fs == FactorSet({"a": Interval(0, 1), "b": EnumDomain((True,))})
        assert fs != PropertySet({"a": "[0, 1]", "b": "{true}"})


# -- properties --------------------------------------------------------------

values = st.one_of(st.booleans(), st.integers(-3, 3), st.sampled_from(["dry", "wet"]))
enum_doms = st.lists(values, min_size=1, max_size=4).map(lambda vs: EnumDomain(tuple(vs)))


@given(shared=st.dictionaries(st.sampled_from("abc"), enum_doms, max_size=3),
       extra=st.dictionaries(st.sampled_from("xyz"), enum_doms, max_size=3),
       ctx=st.fixed_dictionaries({k: values for k in "abcxyz"}))
def test_fewer_constraints_admit_more(shared, extra, ctx):
    small = frame("s", gamma=shared)
    big = frame("b", gamma={**shared, **extra})
    if frame_admits(big, ctx):
        assert frame_admits(small, ctx)


intervals = st.tuples(st.integers(0, 10), st.integers(0, 10)).map(
    lambda p: Interval(float(min(p)), float(max(p))))


@given(a=st.dictionaries(st.sampled_from("pqr"), intervals, max_size=3),
       b=st.dictionaries(st.sampled_from("pqr"), intervals, max_size=3))
def test_covers_antisymmetric(a, b):
    fa, fb = frame("a", pi=a), frame("b", pi=b)
    if frame_covers(fa, fb.pi) and frame_covers(fb, fa.pi):
        assert fa.pi == fb.pi


@given(outer=st.dictionaries(st.sampled_from("pq"), intervals, max_size=2))
def test_region_containment_reflexive(outer):
    assert domain_region_contains(outer, outer)
    assert domain_region_contains({}, outer)
