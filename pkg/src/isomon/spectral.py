"""Combinatorics of spectral types: moves, equivalence classes, degeneration graph.

A spectral type records, per singular point, the multiplicity pattern of the
local exponents.  A Fuchsian point carries a single partition of the system
rank m.  A Poincare-rank-1 point carries a refining pair: an outer partition
(block sizes of the leading matrix) with one inner partition per block
(multiplicities of the residue eigenvalues inside that block).

String grammar
--------------
Point-types are comma separated.  A Fuchsian point is a digit string with
weakly decreasing parts ("211"); parts above 9 are parenthesized decimals
("(10)1").  A rank-1 point is a concatenation of at least two parenthesized
inner partitions ("(111)(11)").  A single parenthesized group is read as a
Fuchsian point with one large part.

Normalizations performed on construction:

* parts and blocks are sorted weakly decreasing;
* a rank-1 point whose outer partition has a single block is replaced by the
  Fuchsian point given by its inner partition (the leading coefficient is a
  scalar matrix there, removable by a shift of that coefficient).
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .errors import NotARefinement, ShapeMismatch, Unsupported

__all__ = [
    "SpectralType",
    "parse_spectral_type",
    "MoveKind",
    "TypeMove",
    "accessory_count",
    "laplace_on_type",
    "confluence_on_type",
    "confluence_groupings",
    "drop_trivial_points",
    "EquivalenceClass",
    "equivalence_class",
    "DegenerationGraph",
    "degeneration_graph",
    "OSHIMA_4PARAM_TYPES",
    "OSHIMA_3PT_TYPES",
    "KOSTOV_2PARAM_TYPES",
    "KOSTOV_3PT_CHAIN",
    "DEGENERATION_ARROWS_3PT_4PARAM",
]

Partition = tuple[int, ...]
# Fuchsian point: Partition; rank-1 point: tuple of inner Partitions
PointType = object


def _is_fuchsian_point(pt) -> bool:
    return len(pt) > 0 and isinstance(pt[0], int)


def _check_partition(p) -> Partition:
    parts = tuple(int(x) for x in p)
    if not parts or any(x <= 0 for x in parts):
        raise ShapeMismatch(f"invalid partition {p}")
    return tuple(sorted(parts, reverse=True))


def _point_sort_key(pt):
    # irregular points first, then Fuchsian, each branch ordered descending
    if _is_fuchsian_point(pt):
        return (1, tuple(-x for x in pt))
    outer = tuple(sorted((sum(inner) for inner in pt), reverse=True))
    return (0, tuple(-x for x in outer), tuple(tuple(-x for x in inner) for inner in pt))


@dataclass(frozen=True)
class SpectralType:
    points: tuple[PointType, ...]

    @classmethod
    def from_points(cls, points) -> "SpectralType":
        norm: list[PointType] = []
        rank = None
        for pt in points:
            if _is_fuchsian_point(pt):
                part = _check_partition(pt)
            else:
                inners = tuple(_check_partition(inner) for inner in pt)
                if len(inners) == 1:
                    part = inners[0]  # scalar leading block: Fuchsian point
                else:
                    part = tuple(sorted(inners, key=lambda q: (-sum(q), tuple(-x for x in q))))
            total = sum(part) if _is_fuchsian_point(part) else sum(sum(q) for q in part)
            if rank is None:
                rank = total
            elif total != rank:
                raise ShapeMismatch("all point-types must sum to the same rank")
            norm.append(part)
        if rank is None:
            raise ShapeMismatch("a spectral type needs at least one point")
        norm.sort(key=_point_sort_key)
        return cls(points=tuple(norm))

    @property
    def rank(self) -> int:
        pt = self.points[0]
        return sum(pt) if _is_fuchsian_point(pt) else sum(sum(q) for q in pt)

    @property
    def is_fuchsian(self) -> bool:
        return all(_is_fuchsian_point(pt) for pt in self.points)

    def irregular_indices(self) -> list[int]:
        return [i for i, pt in enumerate(self.points) if not _is_fuchsian_point(pt)]

    def __str__(self) -> str:
        return ",".join(_point_str(pt) for pt in self.points)

    def __repr__(self) -> str:
        return f"SpectralType({str(self)!r})"


def _partition_str(p: Partition) -> str:
    return "".join(str(x) if x < 10 else f"({x})" for x in p)


def _point_str(pt) -> str:
    if _is_fuchsian_point(pt):
        return _partition_str(pt)
    return "".join(f"({_partition_str(inner)})" for inner in pt)


_GROUPED = re.compile(r"^(\((?:[0-9]|\([0-9]+\))+\))+$")


def _parse_partition(s: str) -> Partition:
    parts: list[int] = []
    i = 0
    while i < len(s):
        if s[i] == "(":
            j = s.index(")", i)
            parts.append(int(s[i + 1 : j]))
            i = j + 1
        elif s[i].isdigit():
            parts.append(int(s[i]))
            i += 1
        else:
            raise ShapeMismatch(f"cannot parse partition {s!r}")
    return _check_partition(parts)


def _parse_point(s: str):
    s = s.strip()
    if not s:
        raise ShapeMismatch("empty point-type")
    if _GROUPED.match(s):
        groups = re.findall(r"\(((?:[0-9]|\([0-9]+\))+)\)", s)
        if len(groups) >= 2:
            return tuple(_parse_partition(g) for g in groups)
        # single parenthesized group: one large Fuchsian part
        return _parse_partition(s)
    return _parse_partition(s)


def parse_spectral_type(text: str) -> SpectralType:
    pts = [_parse_point(tok) for tok in text.split(",") if tok.strip()]
    return SpectralType.from_points(pts)


# ---------------------------------------------------------------------------
# moves
# ---------------------------------------------------------------------------


class MoveKind(enum.Enum):
    LAPLACE = "laplace"
    CONFLUENCE = "confluence"
    ADDITION = "addition"
    MOEBIUS = "moebius"


@dataclass(frozen=True)
class TypeMove:
    kind: MoveKind
    before: SpectralType
    after: SpectralType
    detail: tuple = ()

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "before": str(self.before),
            "after": str(self.after),
            "detail": list(self.detail),
        }


def accessory_count(t: SpectralType) -> int:
    """Number of accessory parameters of a Fuchsian type: (n-1)m^2 - sum m_ij^2 + 2."""
    if not t.is_fuchsian:
        raise Unsupported(
            "accessory count is defined for Fuchsian types; use the Fuchsian "
            "representative of the equivalence class"
        )
    m = t.rank
    npts = len(t.points)
    sq = sum(x * x for pt in t.points for x in pt)
    return (npts - 2) * m * m - sq + 2


def drop_trivial_points(t: SpectralType) -> tuple[SpectralType, bool]:
    """Remove Fuchsian points whose partition is a single part.

    Such a point has a scalar residue, removable by an addition; at type level
    the point simply disappears.  Returns (new type, whether anything changed);
    a type consisting only of trivial points is returned unchanged.
    """
    kept = [pt for pt in t.points if not (_is_fuchsian_point(pt) and len(pt) == 1)]
    if not kept or len(kept) == len(t.points):
        return t, False
    return SpectralType.from_points(kept), True


def _split_zero_part(partition: Partition) -> tuple[int, Partition]:
    """Split off the designated zero part (a maximal part) from a Fuchsian partition."""
    z = partition[0]
    return z, partition[1:]


def _laplace_of_shape(finite_parts: list[Partition], blocks: list[Partition], m: int) -> SpectralType:
    """Image type of the factored shape: finite Fuchsian partitions + blocks at infinity.

    ``blocks`` are the inner partitions mu_i of the irregular point (block size
    m_i = sum mu_i).  The designated zero part of each finite partition is a
    maximal part; trivial single-part finite points contribute no block and are
    dropped.
    """
    reduced: list[tuple[int, Partition]] = []
    for lam in finite_parts:
        z, rest = _split_zero_part(lam)
        if rest:
            reduced.append((m - z, rest))
    if not reduced:
        raise ShapeMismatch("no finite point survives: nothing to transform")
    n = sum(nj for nj, _ in reduced)
    for mu in blocks:
        if sum(mu) > n:
            raise ShapeMismatch(
                f"block of size {sum(mu)} exceeds the transformed rank {n}; "
                "outside the supported correspondence"
            )
    new_points: list[PointType] = []
    for mu in blocks:
        pad = n - sum(mu)
        new_points.append(tuple(mu) + ((pad,) if pad else ()))
    new_points.append(tuple(rest for _, rest in reduced))
    return SpectralType.from_points(new_points)


def laplace_on_type(t: SpectralType) -> SpectralType:
    """Type-level Laplace transform.

    A type with exactly one rank-1 point maps deterministically: the inner
    partitions of that point become the new finite points (padded with the
    forced zero multiplicity n - m_i), and the finite partitions, with their
    maximal part playing the zero slot, become the new irregular point.  A
    Fuchsian type is first put in factored shape by designating one point as
    the infinity of the realization; among the valid designations the one of
    minimal transformed rank is chosen (ties broken by the lexicographically
    smallest image).  Applied twice this returns the original type whenever
    the zero-slot bookkeeping is unambiguous: every pad n - m_i at least as
    large as every part of mu_i and, when only one finite point is present,
    its reduced partition recoverable by the minimal-rank designation.
    """
    irr = t.irregular_indices()
    if len(irr) > 1:
        raise ShapeMismatch("supported types carry at most one rank-1 point")
    m = t.rank
    if len(irr) == 1:
        blocks = list(t.points[irr[0]])
        finite = [pt for i, pt in enumerate(t.points) if i != irr[0]]
        return _laplace_of_shape(finite, blocks, m)

    candidates: list[tuple[int, str, SpectralType]] = []
    for i, pt in enumerate(t.points):
        finite = [p for j, p in enumerate(t.points) if j != i]
        try:
            img = _laplace_of_shape(finite, [tuple(pt)], m)
        except ShapeMismatch:
            continue
        nrank = img.rank
        candidates.append((nrank, str(img), img))
    if not candidates:
        raise ShapeMismatch(f"{t} admits no factored realization shape")
    candidates.sort(key=lambda c: (c[0], c[1]))
    return candidates[0][2]


def confluence_groupings(lam: Partition, mu: Partition) -> list[tuple[Partition, ...]]:
    """All groupings of mu's parts into blocks summing to lam's parts.

    Returned as tuples of inner partitions, one per part of lam (sorted
    canonically), without duplicates.  Empty when mu does not refine lam.
    """
    lam = _check_partition(lam)
    mu = _check_partition(mu)
    if sum(lam) != sum(mu):
        return []
    results: set[tuple[Partition, ...]] = set()
    parts = list(mu)

    def assign(block_idx: int, remaining: tuple[int, ...], acc: list[list[int]]):
        if block_idx == len(lam):
            if not remaining:
                canon = tuple(
                    sorted(
                        (tuple(sorted(g, reverse=True)) for g in acc),
                        key=lambda q: (-sum(q), tuple(-x for x in q)),
                    )
                )
                results.add(canon)
            return
        target = lam[block_idx]

        # choose a sub-multiset of remaining summing to target
        def pick(start: int, left: int, chosen: list[int]):
            if left == 0:
                rest = list(remaining)
                for c in chosen:
                    rest.remove(c)
                assign(block_idx + 1, tuple(rest), acc + [chosen])
                return
            prev = None
            for k in range(start, len(remaining)):
                v = remaining[k]
                if v == prev or v > left:
                    continue
                prev = v
                pick(k + 1, left - v, chosen + [v])

        pick(0, target, [])

    assign(0, tuple(sorted(parts)), [])
    return sorted(results)


def confluence_on_type(t: SpectralType, i: int, j: int) -> SpectralType:
    """Merge Fuchsian points i and j into one rank-1 point.

    Point i carries the coarser partition (the leading-matrix blocks), point j
    the refinement distributed into those blocks.  With several valid
    groupings the one giving the lexicographically smallest type is returned;
    the full list is available through :func:`confluence_groupings`.
    """
    if i == j:
        raise ShapeMismatch("confluence needs two distinct points")
    pi, pj = t.points[i], t.points[j]
    if not (_is_fuchsian_point(pi) and _is_fuchsian_point(pj)):
        raise Unsupported("only Fuchsian points can be merged")
    groupings = confluence_groupings(tuple(pi), tuple(pj))
    if not groupings:
        raise NotARefinement(f"{_point_str(pj)} does not refine {_point_str(pi)}")
    rest = [pt for k, pt in enumerate(t.points) if k not in (i, j)]
    images = [SpectralType.from_points(rest + [g]) for g in groupings]
    return min(images, key=str)


# ---------------------------------------------------------------------------
# equivalence classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceClass:
    canonical: SpectralType
    members: tuple[SpectralType, ...]
    witnesses: dict = field(hash=False, compare=False, default_factory=dict)
    truncated: bool = False

    def witness_path(self, member: SpectralType) -> list[TypeMove]:
        """Move sequence from the BFS seed to ``member``."""
        path: list[TypeMove] = []
        key = str(member)
        while self.witnesses.get(key) is not None:
            mv = self.witnesses[key]
            path.append(mv)
            key = str(mv.before)
        path.reverse()
        return path


def _laplace_images(t: SpectralType) -> list[TypeMove]:
    """All one-step Laplace images used for class exploration."""
    out: list[TypeMove] = []
    irr = t.irregular_indices()
    m = t.rank
    if len(irr) == 1:
        blocks = list(t.points[irr[0]])
        finite = [pt for i, pt in enumerate(t.points) if i != irr[0]]
        try:
            img = _laplace_of_shape(finite, blocks, m)
        except ShapeMismatch:
            return out
        out.append(TypeMove(MoveKind.LAPLACE, t, img))
        return out
    if irr:
        return out
    seen: set[str] = set()
    for i, pt in enumerate(t.points):
        finite = [p for j, p in enumerate(t.points) if j != i]
        try:
            img = _laplace_of_shape(finite, [tuple(pt)], m)
        except ShapeMismatch:
            continue
        if str(img) not in seen:
            seen.add(str(img))
            out.append(TypeMove(MoveKind.LAPLACE, t, img, detail=(f"infinity={_point_str(pt)}",)))
    return out


def equivalence_class(t: SpectralType, rank_cap: int = 64) -> EquivalenceClass:
    """Breadth-first closure under Laplace, point permutations and additions.

    Point permutations are absorbed by the canonical ordering.  Additions act
    at type level only by deleting removable single-part Fuchsian points.
    Laplace images explore every factored-shape designation of a Fuchsian
    member; nodes above ``rank_cap`` are kept as members but not expanded.

    The canonical representative is the lexicographically smallest Fuchsian
    member if one exists, else the smallest member.
    """
    start = t
    seen: dict[str, SpectralType] = {str(start): start}
    witness: dict[str, TypeMove | None] = {str(start): None}
    queue = [start]
    truncated = False
    while queue:
        node = queue.pop(0)
        if node.rank > rank_cap:
            truncated = True
            continue
        moves = _laplace_images(node)
        dropped, changed = drop_trivial_points(node)
        if changed:
            moves.append(TypeMove(MoveKind.ADDITION, node, dropped, detail=("drop scalar-residue point",)))
        for mv in moves:
            key = str(mv.after)
            if key not in seen:
                seen[key] = mv.after
                witness[key] = mv
                queue.append(mv.after)
    members = tuple(sorted(seen.values(), key=str))
    fuchsian = [x for x in members if x.is_fuchsian]
    canonical = min(fuchsian, key=str) if fuchsian else members[0]
    return EquivalenceClass(canonical=canonical, members=members, witnesses=witness, truncated=truncated)


# ---------------------------------------------------------------------------
# degeneration graph
# ---------------------------------------------------------------------------


@dataclass
class DegenerationGraph:
    """Directed graph on equivalence classes with confluence-move witnesses.

    Only arrows induced by confluences of singular points are discovered;
    degenerations of local normal forms (the second mechanism) are out of
    scope, which the ``mechanism_note`` records.  ``edges`` maps (src, dst)
    canonical strings to a witness description.
    """

    nodes: dict[str, EquivalenceClass] = field(default_factory=dict)
    edges: dict[tuple[str, str], dict] = field(default_factory=dict)
    mechanism_note: str = "confluence-induced arrows only; normal-form degenerations not explored"

    def transitive_reduction(self) -> set[tuple[str, str]]:
        """Edges not implied by chains of other edges (the graph is a finite DAG)."""
        adj: dict[str, set[str]] = {}
        for (a, b) in self.edges:
            adj.setdefault(a, set()).add(b)
        keep: set[tuple[str, str]] = set()
        for (a, b) in self.edges:
            # look for a path a -> ... -> b that does not take the direct hop
            stack = [x for x in adj.get(a, ()) if x != b]
            visited = set(stack)
            found = False
            while stack:
                cur = stack.pop()
                if cur == b:
                    found = True
                    break
                for nxt in adj.get(cur, ()):
                    if nxt not in visited:
                        visited.add(nxt)
                        stack.append(nxt)
            if not found:
                keep.add((a, b))
        return keep

    def unmatched(self, expected: list[tuple[str, str]]) -> list[tuple[str, str]]:
        """Expected arrows (given as type strings) that confluence alone did not produce."""
        missing = []
        for a, b in expected:
            ca = str(_canon(parse_spectral_type(a)))
            cb = str(_canon(parse_spectral_type(b)))
            if (ca, cb) not in self.edges:
                missing.append((a, b))
        return missing

    def to_json(self) -> str:
        payload = {
            "note": self.mechanism_note,
            "nodes": sorted(self.nodes.keys()),
            "edges": [
                {"src": a, "dst": b, "witness": w}
                for (a, b), w in sorted(self.edges.items())
            ],
            "reduced_edges": sorted(list(self.transitive_reduction())),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_dot(self, reduced: bool = True) -> str:
        shown = self.transitive_reduction() if reduced else set(self.edges.keys())
        lines = ["digraph degenerations {", '  rankdir="LR";']
        for n in sorted(self.nodes):
            lines.append(f'  "{n}";')
        for a, b in sorted(shown):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _canon(t: SpectralType, cache: dict | None = None, rank_cap: int = 64) -> SpectralType:
    if cache is None:
        return equivalence_class(t, rank_cap=rank_cap).canonical
    key = str(t)
    if key not in cache:
        cls = equivalence_class(t, rank_cap=rank_cap)
        for mem in cls.members:
            cache[str(mem)] = cls
        cache[key] = cls
    return cache[key].canonical


def degeneration_graph(seeds, rank_cap: int = 64) -> DegenerationGraph:
    """Explore confluence arrows between equivalence classes, transitively.

    Every member of a class is scanned for mergeable pairs of Fuchsian points;
    every valid grouping of each pair yields a candidate arrow to the class of
    the merged type.  Newly reached classes are explored in turn.
    """
    graph = DegenerationGraph()
    cache: dict[str, EquivalenceClass] = {}
    work: list[SpectralType] = []
    for s in seeds:
        t = s if isinstance(s, SpectralType) else parse_spectral_type(str(s))
        _canon(t, cache, rank_cap)
        cls = cache[str(t)]
        if str(cls.canonical) not in graph.nodes:
            graph.nodes[str(cls.canonical)] = cls
            work.append(cls.canonical)
    while work:
        node = work.pop(0)
        cls = cache[str(node)]
        src = str(cls.canonical)
        for member in cls.members:
            pts = member.points
            fidx = [k for k, pt in enumerate(pts) if _is_fuchsian_point(pt)]
            for a in fidx:
                for b in fidx:
                    if a == b:
                        continue
                    for grouping in confluence_groupings(tuple(pts[a]), tuple(pts[b])):
                        rest = [pt for k, pt in enumerate(pts) if k not in (a, b)]
                        merged = SpectralType.from_points(rest + [grouping])
                        target = _canon(merged, cache, rank_cap)
                        dst = str(target)
                        if dst == src:
                            continue
                        if dst not in graph.nodes:
                            graph.nodes[dst] = cache[str(merged)]
                            work.append(target)
                        graph.edges.setdefault(
                            (src, dst),
                            {
                                "member": str(member),
                                "merge": [_point_str(pts[a]), _point_str(pts[b])],
                                "result": str(merged),
                            },
                        )
    return graph


# ---------------------------------------------------------------------------
# reference data
# ---------------------------------------------------------------------------

#: the 13 Fuchsian spectral types with four accessory parameters (Oshima's list)
OSHIMA_4PARAM_TYPES = (
    "11,11,11,11,11",
    "21,21,111,111",
    "31,22,22,1111",
    "22,22,22,211",
    "211,1111,1111",
    "221,221,11111",
    "32,11111,11111",
    "222,222,2211",
    "33,2211,111111",
    "44,2222,22211",
    "44,332,11111111",
    "55,3331,22222",
    "66,444,2222211",
)

#: the nine three-point entries of that list
OSHIMA_3PT_TYPES = tuple(t for t in OSHIMA_4PARAM_TYPES if t.count(",") == 2)

#: Fuchsian types with two accessory parameters (Kostov's list)
KOSTOV_2PARAM_TYPES = (
    "11,11,11,11",
    "111,111,111",
    "22,1111,1111",
    "33,222,111111",
)

#: their three-point degeneration chain
KOSTOV_3PT_CHAIN = (
    ("33,222,111111", "22,1111,1111"),
    ("22,1111,1111", "111,111,111"),
)

#: degeneration arrows among the three-point four-parameter classes and their
#: four- and five-point targets, as established by direct confluence
DEGENERATION_ARROWS_3PT_4PARAM = (
    ("44,332,11111111", "32,11111,11111"),
    ("66,444,2222211", "44,2222,22211"),
    ("32,11111,11111", "211,1111,1111"),
    ("33,2211,111111", "221,221,11111"),
    ("33,2211,111111", "211,1111,1111"),
    ("44,2222,22211", "222,222,2211"),
    ("211,1111,1111", "11,11,11,11,11"),
    ("211,1111,1111", "21,21,111,111"),
    ("221,221,11111", "21,21,111,111"),
    ("221,221,11111", "31,22,22,1111"),
    ("222,222,2211", "22,22,22,211"),
)
