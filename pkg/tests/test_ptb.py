import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subsent.ptb import (
    EmptyInputError,
    LeafCountMismatch,
    MissingLabelError,
    MissingTokenError,
    ParseError,
    ParseTree,
    TokenMismatch,
    TrailingInputError,
    UnbalancedParenthesesError,
    align_leaves,
    base_label,
    parse_bracketed,
)

CAT = "(S (NP (DT the) (NN cat)) (VP (VBD sat)))"


def test_parse_simple_tree():
    tree = parse_bracketed(CAT)
    assert tree.label == "S"
    assert tree.span == (0, 3)
    assert tree.tokens() == ["the", "cat", "sat"]
    assert len(tree.leaves()) == 3
    np_, vp = tree.children
    assert np_.span == (0, 2) and vp.span == (2, 3)
    assert [leaf.span for leaf in tree.leaves()] == [(0, 1), (1, 2), (2, 3)]


def test_bare_tokens_become_unlabeled_leaves():
    tree = parse_bracketed("(S (NP I) (VP (VBD said) (SBAR (S he left))))")
    assert tree.tokens() == ["I", "said", "he", "left"]
    inner = tree.children[1].children[1].children[0]
    assert inner.label == "S" and inner.span == (2, 4)
    assert [c.label for c in inner.children] == ["", ""]


def test_escaped_brackets():
    tree = parse_bracketed("(S (-LRB- -LRB-))")
    assert tree.tokens() == ["("]
    assert tree.children[0].label == "-LRB-"
    assert "-LRB- -LRB-" in tree.to_bracketed()


@pytest.mark.parametrize(
    "raw, base",
    [("S-TPC-1", "S"), ("NP=2", "NP"), ("NP-SBJ", "NP"), ("-NONE-", "-NONE-"), ("-LRB-", "-LRB-"), ("PRP$", "PRP$")],
)
def test_base_label(raw, base):
    assert base_label(raw) == base


def test_functional_tags_are_stripped_when_parsing():
    tree = parse_bracketed("(S-TPC-1 (NP-SBJ=2 (NN x)) (VP (VB y)))")
    assert [n.label for n in tree.iter_nodes()][:3] == ["S", "NP", "NN"]


@pytest.mark.parametrize("wrapped", ["(TOP {})", "(ROOT {})", "( {})"])
def test_wrapper_nodes_are_unwrapped(wrapped):
    assert parse_bracketed(wrapped.format(CAT)) == parse_bracketed(CAT)


def test_top_with_two_children_is_kept():
    tree = parse_bracketed("(TOP (NN a) (NN b))")
    assert tree.label == "TOP" and len(tree.children) == 2


@pytest.mark.parametrize(
    "text, exc, offset",
    [
        ("(S (NP the)", UnbalancedParenthesesError, 0),
        ("(S (NP the)))", UnbalancedParenthesesError, 12),
        ("", EmptyInputError, 0),
        ("   ", EmptyInputError, 3),
        ("(S (NN))", MissingTokenError, 3),
        ("(S ((NN a)))", MissingLabelError, 3),
        ("(S ())", MissingLabelError, 3),
        ("(S a) (S b)", TrailingInputError, 6),
    ],
)
def test_parse_errors(text, exc, offset):
    with pytest.raises(exc) as info:
        parse_bracketed(text)
    assert info.value.offset == offset
    assert f"byte {offset}" in str(info.value)


def test_error_offsets_are_bytes_not_chars():
    with pytest.raises(UnbalancedParenthesesError) as info:
        parse_bracketed("(S (NN é)))")
    assert info.value.offset == len("(S (NN é))".encode())


def test_invalid_utf8_bytes():
    with pytest.raises(ParseError) as info:
        parse_bracketed(b"(S (NN \xff))")
    assert info.value.offset == 7


def test_align_leaves():
    tree = parse_bracketed(CAT)
    assert align_leaves(tree, ["the", "cat", "sat"]) is tree
    with pytest.raises(LeafCountMismatch):
        align_leaves(tree, ["the", "cat"])
    with pytest.raises(TokenMismatch) as info:
        align_leaves(tree, ["the", "dog", "sat"])
    assert info.value.index == 1


def test_align_escape_table():
    tree = parse_bracketed("(S (-LRB- -LRB-) (NN x) (-RRB- -RRB-))")
    align_leaves(tree, ["(", "x", ")"])
    align_leaves(tree, ["-LRB-", "x", "-RRB-"])


# ---------------------------------------------------------------- properties

labels = st.sampled_from(["S", "SBAR", "NP", "VP", "PP", "-LRB-", "NN"])
words = st.sampled_from(["a", "b", "(", ")", "{", "]", "cat", "é"])


@st.composite
def trees(draw, depth=0):
    if depth >= 4 or draw(st.booleans()):
        return f"({draw(labels)} {_esc(draw(words))})"
    kids = draw(st.lists(trees(depth=depth + 1), min_size=1, max_size=3))
    return f"({draw(labels)} {' '.join(kids)})"


def _esc(w):
    from subsent.ptb import escape

    return escape(w)


def _check_spans(node: ParseTree):
    if node.is_leaf:
        assert node.end - node.start == 1 and node.token is not None
        return
    pos = node.start
    for child in node.children:
        assert child.start == pos
        _check_spans(child)
        pos = child.end
    assert pos == node.end


@given(trees())
def test_round_trip_and_span_invariants(text):
    tree = parse_bracketed(text)
    assert parse_bracketed(tree.to_bracketed()) == tree
    assert tree.span == (0, len(tree.tokens()))
    _check_spans(tree)
    align_leaves(tree, tree.tokens())


@settings(max_examples=300)
@given(st.binary(max_size=60))
def test_arbitrary_bytes_never_crash(data):
    try:
        tree = parse_bracketed(data)
    except ParseError as exc:
        assert exc.offset >= 0
    else:
        assert isinstance(tree, ParseTree)


@settings(max_examples=300)
@given(st.text(alphabet="()ab -", max_size=40))
def test_arbitrary_text_never_crashes(text):
    try:
        parse_bracketed(text)
    except ParseError:
        pass
