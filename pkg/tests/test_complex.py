from itertools import combinations
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hdx.complex import (
    ComplexBuilder,
    Design,
    ParseError,
    as_cell,
    boundary,
    colex_combinations,
    colex_rank,
    colex_unrank,
    complete_complex,
    degree,
    degree_indexed,
    design_of_complex,
    dumps_complex,
    dumps_design,
    from_top_cells,
    is_design,
    is_steiner,
    link,
    loads_complex,
    loads_design,
    max_degree,
    relabel_complex,
    steiner_admissible,
)
from strategies import complexes

FANO = [(0, 1, 2), (0, 3, 4), (0, 5, 6), (1, 3, 5), (1, 4, 6), (2, 3, 6), (2, 4, 5)]


@given(st.integers(0, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_colex_rank_enumerates_in_order(nk):
    n, k = nk
    cells = list(colex_combinations(n, k))
    assert len(cells) == comb(n, k)
    assert [colex_rank(c) for c in cells] == list(range(len(cells)))
    assert all(colex_unrank(i, k) == c for i, c in enumerate(cells))


def test_colex_order_is_reversed_lex():
    assert list(colex_combinations(4, 2)) == [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]


def test_as_cell_validation():
    assert as_cell([3, 1, 2]) == (1, 2, 3)
    with pytest.raises(ValueError):
        as_cell([1, 1])
    with pytest.raises(ValueError):
        as_cell([-1, 2])


def test_boundary():
    assert boundary((0, 1, 2)) == [(1, 2), (0, 2), (0, 1)] or sorted(boundary((0, 1, 2))) == [(0, 1), (0, 2), (1, 2)]
    assert boundary((4,)) == [()]
    with pytest.raises(ValueError, match="empty cell"):
        boundary(())


@settings(max_examples=80, deadline=None)
@given(complexes(max_n=9))
def test_builder_closure_and_audit(data):
    X, n, d, top, skel = data
    X.audit()
    cells = oracles.closure(n, d, top, skel)
    for j in range(-1, d + 1):
        assert {frozenset(c) for c in X.cells(j)} == set(oracles.by_dim(cells, j))
    assert X.complete_skeleton_dim >= skel
    assert () in X


@settings(max_examples=80, deadline=None)
@given(complexes(max_n=9))
def test_file_round_trip(data):
    X, *_ = data
    text = dumps_complex(X)
    Y = loads_complex(text)
    assert Y == X and dumps_complex(Y) == text


@settings(max_examples=60, deadline=None)
@given(complexes(max_n=8))
def test_degree_two_ways(data):
    X, n, d, top, skel = data
    for j in range(-1, d):
        for s in X.cells(j)[:6]:
            assert degree(X, s) == degree_indexed(X, s) == sum(set(s) < set(t) for t in X.cells(j + 1))


@settings(max_examples=60, deadline=None)
@given(complexes(max_n=8), st.data())
def test_link_definition(data, draw):
    X, n, d, top, skel = data
    j = draw.draw(st.integers(-1, d))
    if not X.size(j):
        return
    rho = draw.draw(st.sampled_from(X.cells(j)))
    L, relabel = link(X, rho)
    assert L.n == n - len(rho) and L.d == d - len(rho)
    expected = {
        frozenset(c) - set(rho)
        for i in range(len(rho) - 1, d + 1)
        for c in X.cells(i)
        if set(rho) <= set(c)
    }
    got = {frozenset(relabel[v] for v in c) for i in range(-1, L.d + 1) for c in L.cells(i)}
    assert got == expected
    L.audit()


def test_link_of_empty_cell_is_the_complex():
    X = from_top_cells(7, 2, FANO[:4], skeleton=1)
    L, relabel = link(X, ())
    assert L == X and relabel == tuple(range(7))


def test_link_of_missing_cell():
    with pytest.raises(KeyError):
        link(from_top_cells(5, 2, [(0, 1, 2)]), (3, 4))


def test_complete_complex_counts():
    X = complete_complex(6, 3)
    assert [X.size(j) for j in range(-1, 4)] == [1, 6, 15, 20, 15]
    assert X.complete_skeleton_dim == 3
    with pytest.raises(ValueError):
        complete_complex(3, 3)


def test_max_degree():
    X = complete_complex(5, 2)
    assert max_degree(X, 1) == 3 and max_degree(X, 0) == 4 and max_degree(X, -1) == 5


def test_relabel_is_isomorphism():
    X = from_top_cells(7, 2, FANO, skeleton=1)
    Y = relabel_complex(X, [6, 5, 4, 3, 2, 1, 0])
    assert {tuple(sorted(6 - v for v in c)) for c in X.top_cells} == set(Y.top_cells)


def test_builder_rejections():
    b = ComplexBuilder(4, 1)
    with pytest.raises(ValueError):
        b.add((0, 1, 2))
    with pytest.raises(ValueError):
        b.add((0, 7))


def test_fano_is_steiner():
    D = Design(7, 3, 2, 1, FANO)
    assert is_design(D) == (True, None)
    assert is_steiner(D, 7, 2)[0]


def test_fano_minus_block_has_witness():
    D = Design(7, 3, 2, 1, FANO[1:])
    ok, (pair, count) = is_steiner(D, 7, 2)
    assert not ok and count == 0 and set(pair) <= {0, 1, 2}


def test_steiner_parameter_mismatch():
    with pytest.raises(ValueError, match="Steiner"):
        is_steiner(Design(7, 3, 2, 1, FANO), 7, 3)


def test_design_validation():
    with pytest.raises(ValueError):
        Design(7, 3, 2, 1, [(0, 1)])
    with pytest.raises(ValueError):
        Design(7, 3, 2, 0, FANO)


@pytest.mark.parametrize("n,d,ok", [(7, 2, True), (9, 2, True), (8, 2, False), (13, 2, True),
                                    (8, 3, True), (10, 3, True), (9, 3, False), (4, 1, True)])
def test_admissibility(n, d, ok):
    assert steiner_admissible(n, d) is ok


def test_design_round_trip_and_complex_view():
    D = Design(7, 3, 2, 1, FANO)
    assert loads_design(dumps_design(D)) == D
    X = from_top_cells(7, 2, FANO, skeleton=1)
    assert design_of_complex(X) == D


@pytest.mark.parametrize("text", [
    "",
    "hdx v1 n=4 d=1 skeleton=0\n0 1\n",
    "hdx v1 n=4 d=1 skeleton=0\n0 1\nend",
    "hdx v2 n=4 d=1 skeleton=0\nend\n",
    "hdx v1 n=4 d=1\nend\n",
    "hdx v1 n=4 d=1 skeleton=0\n1 0\nend\n",
    "hdx v1 n=4 d=1 skeleton=0\n0 x\nend\n",
    "hdx v1 n=4 d=1 skeleton=0\n0 9\nend\n",
    "hdx v1 n=4 d=1 skeleton=0\n0 1 2\nend\n",
    "hdx v1 n=x d=1 skeleton=0\nend\n",
])
def test_malformed_complex_files(text):
    with pytest.raises(ParseError):
        loads_complex(text)


def test_truncation_is_always_detected():
    text = dumps_complex(from_top_cells(7, 2, FANO, skeleton=1))
    for cut in range(len(text)):
        with pytest.raises(ParseError):
            loads_complex(text[:cut])


def test_malformed_design_files():
    for text in ["design 7 3 2\nend\n", "design 7 3 2 1\n0 1 2\n", "design 7 3 2 1\n0 1 9\nend\n"]:
        with pytest.raises(ParseError):
            loads_design(text)


def test_cofaces_index_the_next_dimension():
    X = complete_complex(5, 2)
    for i, c in enumerate(X.cells(1)):
        assert {X.cells(2)[t] for t in X.cofaces(1)[i]} == {t for t in combinations(range(5), 3) if set(c) < set(t)}
