import bisect
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .node import LeafMeta, MmrNode, NodeFormat


class ProofStructureError(ValueError):
    """
    Raised when a proof's node set is not a cover of the unsampled leaves,
    as opposed to a cover whose hashes simply fail to match.
    """


class Span(NamedTuple):
    """
    A persistent node together with the leaf interval it covers.
    """

    index: int
    height: int
    first_leaf: int

    @property
    def leaf_count(self) -> int:
        return 1 << self.height

    @property
    def end_leaf(self) -> int:
        return self.first_leaf + (1 << self.height)

    def left(self) -> "Span":
        half = self.height - 1
        return Span(self.index - (1 << self.height), half, self.first_leaf)

    def right(self) -> "Span":
        half = self.height - 1
        return Span(self.index - 1, half, self.first_leaf + (1 << half))


def node_count(leaf_count: int) -> int:
    return 2 * leaf_count - bin(leaf_count).count("1")


def leaf_index(position: int) -> int:
    """
    Get the creation-order index of the leaf at a position.
    """
    return 2 * position - bin(position).count("1")


def peaks(leaf_count: int) -> List[Span]:
    """
    List the mountain roots of an MMR from left (tallest) to right.
    """
    res = []
    index = 0
    first_leaf = 0
    for height in reversed(range(leaf_count.bit_length())):
        if not leaf_count & (1 << height):
            continue
        size = (1 << (height + 1)) - 1
        res.append(Span(index + size - 1, height, first_leaf))
        index += size
        first_leaf += 1 << height
    return res


def cover(leaf_count: int, targets: Iterable[int]) -> List[Span]:
    """
    Compute the minimal set of persistent nodes covering every leaf except
    the targets, ordered by leaf position.
    """
    target_list = sorted(set(targets))
    for t in target_list:
        if not 0 <= t < leaf_count:
            raise ValueError(f"leaf {t} out of range for {leaf_count} leaves")
    res = []
    for peak in peaks(leaf_count):
        _cover_span(peak, target_list, res)
    return res


def _cover_span(span: Span, targets: List[int], out: List[Span]):
    if not _any_in(targets, span.first_leaf, span.end_leaf):
        out.append(span)
    elif span.height > 0:
        _cover_span(span.left(), targets, out)
        _cover_span(span.right(), targets, out)


def _any_in(sorted_values: List[int], start: int, end: int) -> bool:
    i = bisect.bisect_left(sorted_values, start)
    return i < len(sorted_values) and sorted_values[i] < end


def ancestry_proof_indices(leaf_count: int, target_leaf: int) -> List[int]:
    return sorted(s.index for s in cover(leaf_count, [target_leaf]))


def cumulative_proof_indices(leaf_count: int, targets: Iterable[int]) -> List[int]:
    targets = list(targets)
    if not targets:
        raise ValueError("cumulative proof needs at least one target leaf")
    return sorted(s.index for s in cover(leaf_count, targets))


@dataclass
class AncestryProof:
    node_indices: List[int]
    nodes: List[MmrNode]

    def node_map(self) -> Dict[int, MmrNode]:
        return dict(zip(self.node_indices, self.nodes))


class AncestryCheck(NamedTuple):
    """
    The outcome of verify_ancestry: whether the root matched, every internal
    node recomputed on the way, and the reconstructed root node.
    """

    valid: bool
    nodes: Dict[int, MmrNode]
    root: MmrNode


@dataclass
class Mmr:
    """
    An append-only Merkle Mountain Range over the headers of one consensus
    branch.

    Nodes are stored in creation order: each leaf is followed by the merge
    nodes it triggers. Generated nodes used to bag the peaks into a root
    are never stored.
    """

    node_format: NodeFormat
    branch_id: int = 0
    start_height: int = 0
    nodes: List[MmrNode] = field(default_factory=list)
    leaf_count: int = 0

    def append_leaf(self, digest: bytes, meta: LeafMeta) -> List[int]:
        assert (
            meta.height == self.start_height + self.leaf_count
        ), f"expected leaf at height {self.start_height + self.leaf_count}, got {meta.height}"
        new_indices = [len(self.nodes)]
        self.nodes.append(self.node_format.leaf(digest, meta, self.branch_id))

        # Every trailing one bit of the old leaf count is a mountain that
        # now merges with the new right neighbour.
        merges = self.leaf_count
        height = 0
        while merges & 1:
            right_index = len(self.nodes) - 1
            left_index = right_index - (1 << (height + 1)) + 1
            parent = self.node_format.combine(
                self.nodes[left_index], self.nodes[right_index]
            )
            new_indices.append(len(self.nodes))
            self.nodes.append(parent)
            merges >>= 1
            height += 1
        self.leaf_count += 1
        return new_indices

    def peak_indices(self) -> List[int]:
        return [s.index for s in peaks(self.leaf_count)]

    def root_node(self, leaf_count: Optional[int] = None) -> MmrNode:
        """
        Bag the peaks of the MMR (or of a prefix of it) into a root node.
        """
        if leaf_count is None:
            leaf_count = self.leaf_count
        if leaf_count == 0:
            raise ValueError("an empty MMR has no root")
        assert leaf_count <= self.leaf_count, "prefix longer than the MMR"
        return bag_peaks(
            self.node_format, [self.nodes[s.index] for s in peaks(leaf_count)]
        )

    def root(self, leaf_count: Optional[int] = None) -> bytes:
        return self.root_node(leaf_count).commitment

    def ancestry_proof(
        self, target_leaf: int, leaf_count: Optional[int] = None
    ) -> AncestryProof:
        if leaf_count is None:
            leaf_count = self.leaf_count
        indices = ancestry_proof_indices(leaf_count, target_leaf)
        return AncestryProof(indices, [self.nodes[i] for i in indices])

    def cumulative_proof(
        self, targets: Iterable[int], leaf_count: Optional[int] = None
    ) -> AncestryProof:
        if leaf_count is None:
            leaf_count = self.leaf_count
        indices = cumulative_proof_indices(leaf_count, targets)
        return AncestryProof(indices, [self.nodes[i] for i in indices])

    @classmethod
    def from_nodes(
        cls,
        node_format: NodeFormat,
        nodes: Sequence[MmrNode],
        branch_id: int = 0,
        start_height: int = 0,
        leaf_count: Optional[int] = None,
    ) -> "Mmr":
        """
        Restore an MMR from its stored nodes, replaying every append to
        check that leaves sit at consecutive heights and that each merge
        node is the combination of its children.

        :param leaf_count: the expected number of leaves. If None, it is
                           inferred from the node count.
        :raises ValueError: if the nodes are not exactly such an MMR.
        """
        if leaf_count is None:
            leaf_count = 0
            while node_count(leaf_count) < len(nodes):
                leaf_count += 1
        if node_count(leaf_count) != len(nodes):
            raise ValueError(f"{len(nodes)} nodes do not form an MMR of {leaf_count} leaves")
        res = cls(node_format=node_format, branch_id=branch_id, start_height=start_height)
        for position in range(leaf_count):
            leaf = nodes[leaf_index(position)]
            meta = LeafMeta(
                time=leaf.earliest_time, bits=leaf.earliest_bits, height=leaf.latest_height
            )
            if meta.height != start_height + position:
                raise ValueError(f"leaf {position} claims height {meta.height}")
            for index in res.append_leaf(leaf.commitment, meta):
                if res.nodes[index] != nodes[index]:
                    raise ValueError(f"node {index} does not match its recomputation")
        return res


def bag_peaks(node_format: NodeFormat, peak_nodes: List[MmrNode]) -> MmrNode:
    root = peak_nodes[-1]
    for peak in reversed(peak_nodes[:-1]):
        root = node_format.combine(peak, root)
    return root


def verify_ancestry(
    expected_root: bytes,
    sampled: Sequence[Tuple[int, bytes, LeafMeta]],
    proof: AncestryProof,
    leaf_count: int,
    node_format: NodeFormat,
    branch_id: int = 0,
) -> AncestryCheck:
    """
    Recombine sampled leaves with proof nodes and compare the bagged root.

    :param sampled: (leaf position, header digest, leaf metadata) triples.
    :return: an AncestryCheck whose nodes map holds every internal node that
             had to be recomputed, keyed by creation-order index.
    :raises ProofStructureError: if the proof nodes and sampled leaves do
                                 not partition the leaves exactly.
    """
    root, computed = reconstruct_root(sampled, proof, leaf_count, node_format, branch_id)
    return AncestryCheck(root.commitment == expected_root, computed, root)


def reconstruct_root(
    sampled: Sequence[Tuple[int, bytes, LeafMeta]],
    proof: AncestryProof,
    leaf_count: int,
    node_format: NodeFormat,
    branch_id: int = 0,
) -> Tuple[MmrNode, Dict[int, MmrNode]]:
    """
    Like verify_ancestry, but return the root node and the recomputed
    nodes without comparing against an expected root.
    """
    if leaf_count < 1:
        raise ProofStructureError("cannot prove ancestry in an empty MMR")
    leaves = {}
    for position, digest, meta in sampled:
        if not 0 <= position < leaf_count:
            raise ProofStructureError(f"sampled leaf {position} out of range")
        if position in leaves:
            raise ProofStructureError(f"leaf {position} sampled twice")
        leaves[position] = node_format.leaf(digest, meta, branch_id)
    if not leaves:
        raise ProofStructureError("no sampled leaves")
    proof_nodes = proof.node_map()
    if len(proof_nodes) != len(proof.node_indices):
        raise ProofStructureError("duplicate proof node indices")

    targets = sorted(leaves)
    used = set()
    computed = {}

    def rebuild(span: Span) -> MmrNode:
        if span.index in proof_nodes:
            if _any_in(targets, span.first_leaf, span.end_leaf):
                raise ProofStructureError(
                    f"proof node {span.index} overlaps a sampled leaf"
                )
            used.add(span.index)
            return proof_nodes[span.index]
        if span.height == 0:
            if span.first_leaf not in leaves:
                raise ProofStructureError(f"leaf {span.first_leaf} is not covered")
            return leaves[span.first_leaf]
        node = node_format.combine(rebuild(span.left()), rebuild(span.right()))
        computed[span.index] = node
        return node

    peak_nodes = [rebuild(span) for span in peaks(leaf_count)]
    unused = set(proof_nodes) - used
    if unused:
        raise ProofStructureError(f"unused proof nodes: {sorted(unused)}")
    return bag_peaks(node_format, peak_nodes), computed


def prefix_work(items: Iterable[Tuple[int, int]]) -> Dict[int, int]:
    """
    Given (first_leaf, work) pairs that partition a branch, map each
    first leaf to the cumulative work up to and including its item.
    """
    res = {}
    total = 0
    for first_leaf, work in sorted(items):
        total += work
        res[first_leaf] = total
    return res
