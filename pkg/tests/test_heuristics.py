import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vmga.datacenter import Instance, active_pm_count, capacity_overflow
from vmga.errors import InfeasibleError
from vmga.heuristics import bfd_place, check_hostable, ffd_place

from conftest import make_instance, random_instance


@pytest.mark.parametrize("place", [ffd_place, bfd_place])
def test_worked_example(place):
    inst = make_instance([5, 4, 3, 2], caps=[(8, 10)] * 3)
    p = place(inst)
    assert p.tolist() == [0, 1, 0, 1]
    assert active_pm_count(p, inst) == 2


@pytest.mark.parametrize("place", [ffd_place, bfd_place])
def test_single_vm(place):
    assert place(make_instance([3], caps=[(8, 10)])).tolist() == [0]


@pytest.mark.parametrize("place", [ffd_place, bfd_place])
def test_unplaceable_vm_named(place):
    inst = make_instance([2, 9], caps=[(8, 10), (8, 10)])
    with pytest.raises(InfeasibleError) as info:
        place(inst)
    assert info.value.vm_id == 1
    with pytest.raises(InfeasibleError):
        check_hostable(inst)


def test_bfd_prefers_tightest_host():
    inst = make_instance([5], caps=[(10, 10), (6, 10)])
    assert bfd_place(inst).tolist() == [1]
    assert ffd_place(inst).tolist() == [0]


def test_bfd_tie_goes_to_lowest_index():
    assert bfd_place(make_instance([3], caps=[(8, 10)] * 3)).tolist() == [0]


def test_memory_is_checked():
    inst = make_instance([1, 1], mem=[6, 6], caps=[(8, 10), (8, 10)])
    assert ffd_place(inst).tolist() == [0, 1]


def test_sort_tie_breaks_on_memory_then_id():
    # Equal CPU: larger memory goes first and takes PM 0.
    inst = make_instance([4, 4], mem=[2, 8], caps=[(4, 10), (4, 10)])
    assert ffd_place(inst).tolist() == [1, 0]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sound_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 25))
    inst = random_instance(rng, n, n)
    perm = rng.permutation(n)
    shuffled = Instance(tuple(inst.vms[i] for i in perm), inst.pms)
    for place in (ffd_place, bfd_place):
        p = place(inst)
        q = place(shuffled)
        assert capacity_overflow(p, inst) == 0
        assert capacity_overflow(q, shuffled) == 0
        np.testing.assert_array_equal(p[perm], q)
        assert active_pm_count(p, inst) == active_pm_count(q, shuffled)
        np.testing.assert_array_equal(place(inst), p)
