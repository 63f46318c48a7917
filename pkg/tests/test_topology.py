import pytest

from rpnsel import DomainError, TopologyError
from rpnsel.topology import (
    build_custom,
    build_toroid,
    dump_topology,
    from_text,
    load_topology,
    to_text,
    toroid_for,
    validate,
)
from rpnsel._validation import ContractError


def test_toroid_neighbours(toroid64):
    assert toroid64.neighbours(0) == (1, 15, 16, 48)
    assert toroid64.neighbours(17) == (1, 16, 18, 33)
    assert all(len(toroid64.neighbours(p)) == 4 for p in range(64))
    assert len(toroid64.edges) == 128
    assert validate(toroid64) == []


def test_toroid_neighbourhoods(toroid64):
    left = {15, 31, 47, 63, 0, 16, 32, 48}
    right = {0, 16, 32, 48, 1, 17, 33, 49}
    assert set(toroid64.neighbourhood(0, 15)) == left
    assert set(toroid64.neighbourhood(0, 16)) == left
    assert set(toroid64.neighbourhood(0, 1)) == right
    assert set(toroid64.neighbourhood(0, 48)) == right
    for (a, b), hood in toroid64.edge_neighbourhood.items():
        assert a in hood and b in hood and len(hood) == 8


def test_two_row_toroid_collapses_links():
    top = build_toroid(2, 2)
    assert all(len(top.neighbours(p)) == 2 for p in range(4))
    # the vertical link 0-2 is assigned the left neighbourhood from place 0
    assert set(top.neighbourhood(0, 2)) == {0, 1, 2, 3}
    assert validate(top) == []


def test_toroid_domain():
    with pytest.raises(DomainError):
        build_toroid(1, 8)


def test_toroid_for():
    top = toroid_for(64)
    assert top.shape == (4, 16)
    assert toroid_for(16).shape == (2, 8)
    assert toroid_for(256).shape == (8, 32)
    with pytest.raises(DomainError):
        toroid_for(49)


def test_custom_permutation():
    top = build_toroid(2, 4, place_to_antenna=[7, 6, 5, 4, 3, 2, 1, 0])
    assert top.antenna(0) == 7


def test_custom_from_sets():
    top = build_custom(4, [(0, 1), (1, 2), (2, 3)], [{0, 1, 2}, {2, 3}])
    assert set(top.neighbourhood(2, 3)) == {2, 3}
    assert set(top.neighbourhood(1, 0)) == {0, 1, 2}


def test_custom_directed_mapping():
    top = build_custom(3, [(0, 1), (1, 2)], {(0, 1): (0, 1), (1, 0): (0, 1, 2), (1, 2): (1, 2)})
    assert top.neighbourhood(1, 0) == (0, 1, 2)
    assert top.neighbourhood(2, 1) == (1, 2)


def test_violations_are_listed():
    with pytest.raises(TopologyError) as err:
        build_custom(4, [(0, 1), (2, 3)], [{0, 1}])
    text = str(err.value)
    assert "graph not connected" in text
    assert "edge (2, 3) has no neighbourhood" in text
    assert len(err.value.violations) >= 3


def test_bad_bijection_and_endpoint():
    with pytest.raises(TopologyError):
        build_custom(2, [(0, 1)], [{0, 1}], place_to_antenna=[0, 0])
    with pytest.raises(TopologyError, match="misses an endpoint"):
        build_custom(3, [(0, 1), (1, 2)], {(0, 1): (0, 1), (1, 2): (1,)})


def test_text_roundtrip(tmp_path, toroid64):
    assert from_text(to_text(toroid64)) == toroid64
    path = tmp_path / "t.txt"
    dump_topology(toroid64, path)
    back = load_topology(path)
    assert back == toroid64 and back.shape == (4, 16)


def test_text_format_parsing():
    text = """
    # a line graph
    places 3
    edge 0 1
    edge 1 2
    hood 0 1 : 0 1
    hood 1 0 : 0 1
    hood 1 2 : 1 2   # trailing comment
    hood 2 1 : 1 2
    """
    top = from_text(text)
    assert top.neighbours(1) == (0, 2)
    with pytest.raises(ContractError, match="unknown directive"):
        from_text("places 2\nvertex 0")
    with pytest.raises(ContractError, match="malformed"):
        from_text("places x")
    with pytest.raises(FileNotFoundError):
        load_topology("/nonexistent/topology.txt")
