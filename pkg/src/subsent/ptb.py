"""Reading Penn-Treebank style bracketed constituency trees.

Trees are consumed as produced by an external parser, one bracketed
s-expression per sentence.  Leaves are aligned to the corpus tokens so
that every node carries a half-open token span.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

ESCAPES = {
    "-LRB-": "(",
    "-RRB-": ")",
    "-LCB-": "{",
    "-RCB-": "}",
    "-LSB-": "[",
    "-RSB-": "]",
}
UNESCAPES = {v: k for k, v in ESCAPES.items()}

WRAPPER_LABELS = {"TOP", "ROOT", ""}


class ParseError(ValueError):
    """Malformed bracketed input; ``offset`` is a byte offset into the UTF-8 text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class EmptyInputError(ParseError):
    pass


class UnbalancedParenthesesError(ParseError):
    pass


class MissingTokenError(ParseError):
    pass


class MissingLabelError(ParseError):
    pass


class TrailingInputError(ParseError):
    pass


class EncodingError(ParseError):
    pass


class AlignmentError(ValueError):
    pass


class LeafCountMismatch(AlignmentError):
    def __init__(self, n_leaves: int, n_tokens: int):
        super().__init__(f"tree has {n_leaves} leaves but sentence has {n_tokens} tokens")
        self.n_leaves = n_leaves
        self.n_tokens = n_tokens


class TokenMismatch(AlignmentError):
    def __init__(self, index: int, leaf: str, token: str):
        super().__init__(f"leaf {leaf!r} does not match token {token!r} at index {index}")
        self.index = index
        self.leaf = leaf
        self.token = token


def unescape(token: str) -> str:
    return ESCAPES.get(token, token)


def escape(token: str) -> str:
    return UNESCAPES.get(token, token)


def base_label(label: str) -> str:
    """Strip functional tags and indices: ``S-TPC-1`` -> ``S``, ``NP=2`` -> ``NP``.

    Labels that start with a hyphen (``-NONE-``, ``-LRB-``) are kept whole.
    """
    if label.startswith("-"):
        return label
    for i, ch in enumerate(label):
        if i > 0 and ch in "-=":
            return label[:i]
    return label


@dataclass(frozen=True)
class ParseTree:
    label: str
    children: tuple[ParseTree, ...] = ()
    token: str | None = None
    span: tuple[int, int] = (0, 0)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def __len__(self) -> int:
        return self.span[1] - self.span[0]

    def leaves(self) -> list[ParseTree]:
        return [n for n in self.iter_nodes() if n.is_leaf]

    def tokens(self) -> list[str]:
        return [n.token for n in self.iter_nodes() if n.is_leaf]

    def iter_nodes(self) -> Iterator[ParseTree]:
        """Pre-order (document order) traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def iter_with_ancestors(self) -> Iterator[tuple[ParseTree, tuple[ParseTree, ...]]]:
        """Pre-order traversal yielding each node with its ancestor chain (root first)."""
        stack: list[tuple[ParseTree, tuple[ParseTree, ...]]] = [(self, ())]
        while stack:
            node, ancestors = stack.pop()
            yield node, ancestors
            below = ancestors + (node,)
            stack.extend((child, below) for child in reversed(node.children))

    def to_bracketed(self) -> str:
        if self.is_leaf:
            tok = escape(self.token)
            return f"({self.label} {tok})" if self.label else tok
        inner = " ".join(child.to_bracketed() for child in self.children)
        return f"({self.label} {inner})"

    def __str__(self) -> str:
        return self.to_bracketed()


def _lex(text: str) -> Iterator[tuple[str, int]]:
    """Yield (piece, char offset); pieces are '(', ')' or atoms."""
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


@dataclass
class _Frame:
    label: str | None
    offset: int
    children: list = field(default_factory=list)


def parse_bracketed(text: Union[str, bytes]) -> ParseTree:
    """Parse one bracketed tree.

    >>> parse_bracketed("(S (NP (DT the) (NN cat)) (VP (VBD sat)))").span
    (0, 3)
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError("invalid UTF-8", exc.start) from None

    # char offset -> byte offset, computed lazily on error
    def boff(i: int) -> int:
        return len(text[:i].encode("utf-8"))

    stack: list[_Frame] = []
    root_items: list = []
    n_leaves = 0
    expect_label = False
    pieces = _lex(text)
    for piece, pos in pieces:
        if expect_label:
            expect_label = False
            if piece not in "()":
                stack[-1].label = piece
                continue
            if piece == ")":
                raise MissingLabelError("node with no label", boff(stack[-1].offset))
            # '(' right after '(' : unlabeled wrapper, validated on close
        if piece == "(":
            if not stack and root_items:
                raise TrailingInputError("content after the root tree", boff(pos))
            stack.append(_Frame(label=None, offset=pos))
            expect_label = True
        elif piece == ")":
            if not stack:
                raise UnbalancedParenthesesError("unbalanced parentheses: unexpected ')'", boff(pos))
            frame = stack.pop()
            node, n_leaves = _close(frame, n_leaves, is_root=not stack, boff=boff)
            (stack[-1].children if stack else root_items).append(node)
        else:
            if not stack:
                if root_items:
                    raise TrailingInputError("content after the root tree", boff(pos))
                raise ParseError(f"expected '(' but found {piece!r}", boff(pos))
            stack[-1].children.append(piece)

    if stack:
        raise UnbalancedParenthesesError("unbalanced parentheses: missing ')'", boff(stack[-1].offset))
    if not root_items:
        raise EmptyInputError("empty input", boff(len(text)))
    root = root_items[0]
    while not root.is_leaf and root.label in WRAPPER_LABELS and len(root.children) == 1:
        root = root.children[0]
    return root


def _close(frame: _Frame, n_leaves: int, is_root: bool, boff) -> tuple[ParseTree, int]:
    label = frame.label
    kids = frame.children
    if label is None:
        # only "( (S ...) )" style outer wrappers may omit the label
        if not (is_root and len(kids) == 1 and isinstance(kids[0], ParseTree)):
            raise MissingLabelError("node with no label", boff(frame.offset))
        label = ""
    label = base_label(label)
    if not kids:
        raise MissingTokenError(f"leaf {label!r} has no token", boff(frame.offset))
    if len(kids) == 1 and isinstance(kids[0], str):
        leaf = ParseTree(label, (), unescape(kids[0]), (n_leaves, n_leaves + 1))
        return leaf, n_leaves + 1

    children = []
    for kid in kids:
        if isinstance(kid, str):
            # bare token among siblings: unlabeled leaf
            kid = ParseTree("", (), unescape(kid), (n_leaves, n_leaves + 1))
            n_leaves += 1
        children.append(kid)
    span = (children[0].span[0], children[-1].span[1])
    return ParseTree(label, tuple(children), None, span), n_leaves


def align_leaves(tree: ParseTree, tokens: Sequence[str]) -> ParseTree:
    """Check that the tree's leaves spell out ``tokens`` (modulo bracket escapes)."""
    leaves = tree.tokens()
    if len(leaves) != len(tokens):
        raise LeafCountMismatch(len(leaves), len(tokens))
    for i, (leaf, tok) in enumerate(zip(leaves, tokens)):
        if unescape(leaf) != unescape(tok):
            raise TokenMismatch(i, leaf, tok)
    if tree.span != (0, len(tokens)):
        # spans are always assigned from 0 by parse_bracketed; guard hand-built trees
        raise AlignmentError(f"root span {tree.span} does not cover [0, {len(tokens)})")
    return tree
