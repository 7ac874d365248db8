"""Public product taxonomy and purchase generalization.

Document format: one node per line, two spaces of indentation per level,
the root alone at depth 0. Blank lines and ``#`` comments are ignored::

    Product
      DigitalMedia
        Movie
          ActionMovie
            Inception

Levels count upwards from the leaves: level 0 is the exact product and
level ``d`` the root, so ``generalize(t, leaf, m)`` discloses a purchase at
level ``m``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class TaxonomyError(ValueError):
    pass


class TaxonomySyntaxError(TaxonomyError):
    pass


class CycleError(TaxonomyError):
    pass


class MultipleRootsError(TaxonomyError):
    pass


class NonUniformDepthError(TaxonomyError):
    pass


class DuplicateLabelError(TaxonomyError):
    pass


class UnknownNodeError(TaxonomyError, KeyError):
    def __str__(self):
        return f"unknown node {self.args[0]!r}"


INDENT = "  "


class ChainFault(str, enum.Enum):
    EMPTY = "empty"
    UNKNOWN_LABEL = "unknown-label"
    BROKEN_CHAIN = "broken-chain"
    MISSING_ROOT = "missing-root"


@dataclass(frozen=True)
class ChainCheck:
    valid: bool
    start_depth: int | None = None
    level: int | None = None
    reason: ChainFault | None = None

    def __bool__(self):
        return self.valid


class Taxonomy:
    """Immutable rooted tree with all leaves at the same depth."""

    def __init__(self, parents):
        """``parents`` maps every label to its parent label (root maps to None)."""
        parents = dict(parents)
        roots = [n for n, p in parents.items() if p is None]
        if len(roots) > 1:
            raise MultipleRootsError(f"multiple roots: {sorted(roots)}")
        for node, parent in parents.items():
            if parent is not None and parent not in parents:
                raise TaxonomyError(f"{node!r} has unknown parent {parent!r}")
        depth = {}
        for node in parents:
            trail = []
            cur = node
            while cur is not None and cur not in depth:
                if cur in trail:
                    raise CycleError(f"cycle through {cur!r}")
                trail.append(cur)
                cur = parents[cur]
            base = -1 if cur is None else depth[cur]
            for i, n in enumerate(reversed(trail)):
                depth[n] = base + 1 + i
        if not roots:
            # every node has a parent, so the walk above must have looped
            raise CycleError("no root")
        children = {n: [] for n in parents}
        for node, parent in parents.items():
            if parent is not None:
                children[parent].append(node)
        leaf_depths = {depth[n] for n, ch in children.items() if not ch}
        if len(leaf_depths) != 1:
            raise NonUniformDepthError(f"leaves at depths {sorted(leaf_depths)}")
        self.root = roots[0]
        self._parent = parents
        self._children = {n: tuple(sorted(ch)) for n, ch in children.items()}
        self._depth = depth
        self.height = leaf_depths.pop()

    # -- structure ---------------------------------------------------------

    def __contains__(self, label):
        return label in self._parent

    def __len__(self):
        return len(self._parent)

    def __eq__(self, other):
        return isinstance(other, Taxonomy) and self._parent == other._parent

    def __repr__(self):
        return f"Taxonomy(root={self.root!r}, nodes={len(self)}, depth={self.height})"

    @property
    def nodes(self):
        return list(self._parent)

    def parent(self, label):
        self._require(label)
        return self._parent[label]

    def children(self, label):
        self._require(label)
        return self._children[label]

    def depth(self, label):
        self._require(label)
        return self._depth[label]

    def level(self, label):
        return self.height - self.depth(label)

    def is_leaf(self, label):
        return not self.children(label)

    def leaves(self):
        return sorted(n for n, ch in self._children.items() if not ch)

    def parent_map(self):
        return dict(self._parent)

    def _require(self, label):
        if label not in self._parent:
            raise UnknownNodeError(label)

    # -- generalization ----------------------------------------------------

    def generalize(self, node, m):
        """The m-th ancestor of ``node``; m = 0 is the node itself."""
        d = self.depth(node)
        if not 0 <= m <= d:
            raise TaxonomyError(f"cannot generalize {node!r} {m} levels (depth {d})")
        for _ in range(m):
            node = self._parent[node]
        return node

    def path_to_root(self, node):
        self._require(node)
        path = [node]
        while self._parent[path[-1]] is not None:
            path.append(self._parent[path[-1]])
        return path

    def validate_chain(self, labels):
        """Accept only a contiguous parent chain that ends at the root."""
        labels = list(labels)
        if not labels:
            return ChainCheck(False, reason=ChainFault.EMPTY)
        for label in labels:
            if label not in self._parent:
                return ChainCheck(False, reason=ChainFault.UNKNOWN_LABEL)
        for child, parent in zip(labels, labels[1:]):
            if self._parent[child] != parent:
                return ChainCheck(False, reason=ChainFault.BROKEN_CHAIN)
        if labels[-1] != self.root:
            return ChainCheck(False, reason=ChainFault.MISSING_ROOT)
        start = self._depth[labels[0]]
        return ChainCheck(True, start_depth=start, level=self.height - start)

    # -- serialization -----------------------------------------------------

    def dumps(self):
        """Canonical document: depth-first, children sorted."""
        out = []
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            out.append(INDENT * d + node)
            stack.extend((ch, d + 1) for ch in reversed(self._children[node]))
        return "\n".join(out) + "\n"


def parse_taxonomy(document):
    text = document.decode("utf-8") if isinstance(document, (bytes, bytearray)) else document
    parents = {}
    stack = []  # labels on the path to the previous line
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.rstrip()
        if not body.strip() or body.lstrip().startswith("#"):
            continue
        label = body.lstrip(" ")
        pad = len(body) - len(label)
        if "\t" in body[:pad + 1] or pad % len(INDENT):
            raise TaxonomySyntaxError(f"line {lineno}: indentation must be pairs of spaces")
        d = pad // len(INDENT)
        if d == 0 and stack:
            raise MultipleRootsError(f"line {lineno}: second root {label!r}")
        if d > len(stack):
            raise TaxonomySyntaxError(f"line {lineno}: {label!r} skips a level")
        del stack[d:]
        if label in parents:
            if label in stack:
                raise CycleError(f"line {lineno}: {label!r} is its own ancestor")
            raise DuplicateLabelError(f"line {lineno}: duplicate label {label!r}")
        parents[label] = stack[-1] if stack else None
        stack.append(label)
    if not parents:
        raise TaxonomySyntaxError("empty taxonomy")
    return Taxonomy(parents)


def generalize(t, node, m):
    return t.generalize(node, m)


def path_to_root(t, node):
    return t.path_to_root(node)


def validate_chain(t, labels):
    return t.validate_chain(labels)
