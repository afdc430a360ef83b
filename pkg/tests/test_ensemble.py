import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhcompress.ensemble import (
    DiagonalState,
    Ensemble,
    EnsembleError,
    average_state,
    entropy_bits,
    levitin_holevo,
)


def test_blind_example_values(blind):
    rho = average_state(blind)
    assert rho.eigenvalues == (Fraction(1, 4), Fraction(3, 4))
    # h(1/4) = 2 - (3/4) log2 3
    h = 2 - 0.75 * math.log2(3)
    assert entropy_bits(rho) == pytest.approx(h, abs=1e-15)
    assert levitin_holevo(blind) == pytest.approx(h - 0.5, abs=1e-15)


def test_entropy_zero_log_zero():
    assert entropy_bits(DiagonalState((0, 1))) == 0.0
    assert entropy_bits(DiagonalState((0.5, 0.5))) == pytest.approx(1.0)
    assert entropy_bits(DiagonalState((0.25,) * 4)) == pytest.approx(2.0)


def test_qubit_constructor():
    assert DiagonalState.qubit(Fraction(1, 3)).eigenvalues == (Fraction(2, 3), Fraction(1, 3))


@pytest.mark.parametrize(
    "weights, states",
    [
        ((1.0,), ((1.2, -0.2),)),
        ((0.5, 0.6), ((0.5, 0.5), (0.5, 0.5))),
        ((1.0,), ((0.5, 0.4),)),
        ((0.5, 0.5), ((0.5, 0.5), (0.2, 0.3, 0.5))),
        ((1.0,), ((1.0,),)),
        ((), ()),
    ],
)
def test_invalid_ensembles(weights, states):
    with pytest.raises(EnsembleError):
        Ensemble(weights, states)


def test_tiny_drift_is_renormalized():
    e = Ensemble((0.5, 0.5 + 1e-14), ((0.3, 0.7), (1.0, 0.0)))
    assert math.fsum(e.weights) == pytest.approx(1.0, abs=1e-16)


def test_json_round_trip(tmp_path):
    e = Ensemble((Fraction(1, 3), Fraction(2, 3)), ((0, 1), (Fraction(1, 5), Fraction(4, 5))))
    path = tmp_path / "e.json"
    e.dump(path)
    data = json.loads(path.read_text())
    assert data["weights"] == ["1/3", "2/3"]
    back = Ensemble.load(path)
    assert back == e and back.exact


def test_from_dict_checks_dimension():
    with pytest.raises(EnsembleError):
        Ensemble.from_dict({"d": 3, "states": [[0.5, 0.5]], "weights": [1]})
    with pytest.raises(EnsembleError):
        Ensemble.from_dict({"states": [[0.5, 0.5]]})


prob_vec = st.lists(st.integers(0, 20), min_size=2, max_size=4).filter(lambda v: sum(v) > 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(prob_vec, min_size=1, max_size=3), st.data())
def test_holevo_bounds(raw_states, data):
    d = len(raw_states[0])
    states = [tuple(Fraction(v, sum(s)) for v in s) for s in raw_states if len(s) == d]
    raw_w = data.draw(st.lists(st.integers(1, 9), min_size=len(states), max_size=len(states)))
    e = Ensemble(tuple(Fraction(w, sum(raw_w)) for w in raw_w), tuple(states))
    I = levitin_holevo(e)
    H = entropy_bits(average_state(e))
    # 0 <= I <= min(S(rho), H(p)) for commuting ensembles
    Hp = -sum(float(w) * math.log2(w) for w in e.weights)
    assert -1e-12 <= I <= H + 1e-12
    assert I <= Hp + 1e-12
    assert H <= math.log2(d) + 1e-12


def test_identical_states_carry_no_information():
    e = Ensemble((0.3, 0.7), ((0.2, 0.8), (0.2, 0.8)))
    assert levitin_holevo(e) == pytest.approx(0.0, abs=1e-15)
