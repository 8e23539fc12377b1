import numpy as np
import pytest

from bcel.data import IID, Microsat, Series, load_dataset, save_dataset
from bcel.mathfn import rng_stream
from bcel.simulate import ScenarioSpec, sim_coalescent


def test_values_round_trip_exactly(tmp_path):
    y = Series(np.random.default_rng(0).normal(size=40) * 1e-7)
    save_dataset(tmp_path / "y.txt", y)
    back = load_dataset(tmp_path / "y.txt", "series")
    assert isinstance(back, Series)
    np.testing.assert_array_equal(back.values, y.values)
    assert isinstance(load_dataset(tmp_path / "y.txt", "iid"), IID)


def test_microsat_round_trip(tmp_path):
    d = sim_coalescent(rng_stream(1), ScenarioSpec("B", 3, 4), (2.0, 0.3, 0.9))
    save_dataset(tmp_path / "m.txt", d)
    lines = (tmp_path / "m.txt").read_text().splitlines()
    assert lines[0] == "4 18 B" and len(lines) == 5
    back = load_dataset(tmp_path / "m.txt", "microsat")
    np.testing.assert_array_equal(back.alleles, d.alleles)
    np.testing.assert_array_equal(back.demes, d.demes)
    assert back.scenario == "B"


@pytest.mark.parametrize("text", [
    "",
    "2 2 A\n0:1 1:2\n",
    "1 2 A\n0:1 1\n",
    "1 3 A\n0:1 1:2\n",
    "1 2 A\n0:1 1:3\n",
    "1 2 C\n0:1 1:2\n",
])
def test_malformed_microsat(tmp_path, text):
    (tmp_path / "m.txt").write_text(text)
    with pytest.raises(ValueError):
        load_dataset(tmp_path / "m.txt", "microsat")


def test_container_validation():
    with pytest.raises(ValueError):
        IID([])
    with pytest.raises(ValueError):
        Series([1.0, np.nan])
    with pytest.raises(ValueError):
        Microsat(np.array([[0.5, 1.0]]), np.array([[1, 1]]))
    with pytest.raises(ValueError):
        load_dataset("x", "table")
    m = Microsat(np.array([[0, 1], [2, 2]]), np.array([1, 2]), "A")
    assert m.n_loci == 2 and m.n_genes == 2 and m.demes.shape == (2, 2)
