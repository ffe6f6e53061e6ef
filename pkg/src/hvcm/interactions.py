"""Structured interaction logs: data model, canonical labels, history replay.

An interaction is an ordered pair (sender multiset, receiver list) over two
constituent populations.  The log is the ordered sequence of interactions;
interaction order is meaningful (it is the statistical labeling), constituent
labels are not (two logs that differ only by a bijection of constituent names
describe the same network).
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Iterator, Sequence


class Vocabulary:
    """Bijection between constituent names and dense integer ids (0..V-1)."""

    __slots__ = ("_names", "_ids")

    def __init__(self, names: Iterable[Hashable] = ()):
        self._names: list = []
        self._ids: dict = {}
        for name in names:
            self.add(name)

    def add(self, name: Hashable) -> int:
        """Return the id of ``name``, registering it if unseen."""
        i = self._ids.get(name)
        if i is None:
            i = len(self._names)
            self._ids[name] = i
            self._names.append(name)
        return i

    def id_of(self, name: Hashable) -> int:
        return self._ids[name]

    def name_of(self, ident: int) -> Hashable:
        return self._names[ident]

    @property
    def names(self) -> tuple:
        return tuple(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: Hashable) -> bool:
        return name in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._names == other._names

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} names)"


@dataclass(frozen=True)
class Interaction:
    """One interaction: a sender multiset and an ordered receiver list.

    ``senders`` is stored as a sorted tuple (multiset encoding); ``receivers``
    keeps draw order because the sequential model produces receivers one at a
    time.  Equality and hashing use multiset semantics on both components, so
    two interactions whose receiver lists are permutations of each other
    compare equal.
    """

    senders: tuple[int, ...]
    receivers: tuple[int, ...]

    def __post_init__(self):
        if len(self.senders) == 0:
            raise ValueError("interaction needs at least one sender")
        if len(self.receivers) == 0:
            raise ValueError("interaction needs at least one receiver")
        srt = tuple(sorted(self.senders))
        if srt != self.senders:
            object.__setattr__(self, "senders", srt)

    @property
    def k1(self) -> int:
        return len(self.senders)

    @property
    def k2(self) -> int:
        return len(self.receivers)

    def canonical_key(self) -> tuple:
        return (self.senders, tuple(sorted(self.receivers)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Interaction):
            return NotImplemented
        return self.canonical_key() == other.canonical_key()

    def __hash__(self) -> int:
        return hash(self.canonical_key())


@dataclass
class InteractionLog:
    """Ordered sequence of interactions plus the name<->id vocabularies."""

    records: tuple[Interaction, ...]
    sender_vocab: Vocabulary
    receiver_vocab: Vocabulary
    senders_equal_receivers: bool = False

    def __post_init__(self):
        self.records = tuple(self.records)
        if self.senders_equal_receivers and self.sender_vocab is not self.receiver_vocab:
            raise ValueError("shared-population logs must share one vocabulary object")

    @classmethod
    def from_named(
        cls,
        named_records: Iterable[tuple[Sequence[Hashable], Sequence[Hashable]]],
        shared_population: bool = False,
    ) -> "InteractionLog":
        """Build a log from (sender names, receiver names) pairs.

        Ids are assigned densely in order of first appearance.
        """
        svocab = Vocabulary()
        rvocab = svocab if shared_population else Vocabulary()
        records = []
        for senders, receivers in named_records:
            s_ids = tuple(svocab.add(s) for s in senders)
            r_ids = tuple(rvocab.add(r) for r in receivers)
            records.append(Interaction(s_ids, r_ids))
        return cls(tuple(records), svocab, rvocab, shared_population)

    @property
    def n(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Interaction]:
        return iter(self.records)

    def __getitem__(self, i: int) -> Interaction:
        return self.records[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionLog):
            return NotImplemented
        return (
            self.records == other.records
            and self.sender_vocab == other.sender_vocab
            and self.receiver_vocab == other.receiver_vocab
            and self.senders_equal_receivers == other.senders_equal_receivers
        )

    def validate(self) -> None:
        """Raise ValueError if any record references an unregistered id."""
        ns, nr = len(self.sender_vocab), len(self.receiver_vocab)
        for i, rec in enumerate(self.records):
            for s in rec.senders:
                if not (0 <= s < ns):
                    raise ValueError(f"record {i}: sender id {s} not in vocabulary")
            for r in rec.receivers:
                if not (0 <= r < nr):
                    raise ValueError(f"record {i}: receiver id {r} not in vocabulary")

    def total_receiver_slots(self) -> int:
        return sum(rec.k2 for rec in self.records)

    def total_sender_slots(self) -> int:
        return sum(rec.k1 for rec in self.records)

    def max_k1(self) -> int:
        return max((rec.k1 for rec in self.records), default=0)


def _occurrence_signatures(records, components):
    """Label-free occurrence signature of every name.

    The signature of a name is the sorted tuple of
    (record index, component, multiplicity) triples where it occurs.  Two
    names with equal signatures are interchangeable (swapping them maps the
    log to itself), so signatures give a bijection-invariant tie-break for
    canonical id assignment.
    """
    occ: dict = defaultdict(list)
    for i, rec in enumerate(records):
        for comp in components:
            items = rec.senders if comp == 0 else rec.receivers
            for name, mult in sorted(Counter(items).items()):
                occ[name].append((i, comp, mult))
    return {name: tuple(sig) for name, sig in occ.items()}


def _canonical_mapping(records, components) -> dict[int, int]:
    occ = _occurrence_signatures(records, components)
    mapping: dict[int, int] = {}
    for rec in records:
        for comp in components:
            items = rec.senders if comp == 0 else rec.receivers
            fresh, seen_here = [], set()
            for name in items:
                if name not in mapping and name not in seen_here:
                    fresh.append(name)
                    seen_here.add(name)
            fresh.sort(key=occ.__getitem__)
            for name in fresh:
                mapping[name] = len(mapping)
    return mapping


def canonicalize_labels(log: InteractionLog) -> InteractionLog:
    """Relabel constituents to order of first appearance.

    The result is a canonical representative of the log's equivalence class:
    two logs are related by a constituent-name bijection iff their canonical
    forms are equal.  Within a record, new names are ordered by their full
    occurrence signature, which does not depend on the incoming labels; names
    in the output vocabularies are the canonical integers themselves.
    Interaction order and per-record receiver draw order are unchanged.
    """
    if log.senders_equal_receivers:
        mapping = _canonical_mapping(log.records, (0, 1))
        smap = rmap = mapping
        svocab = Vocabulary(range(len(mapping)))
        rvocab = svocab
    else:
        smap = _canonical_mapping(log.records, (0,))
        rmap = _canonical_mapping(log.records, (1,))
        svocab = Vocabulary(range(len(smap)))
        rvocab = Vocabulary(range(len(rmap)))
    records = tuple(
        Interaction(
            tuple(sorted(smap[s] for s in rec.senders)),
            tuple(rmap[r] for r in rec.receivers),
        )
        for rec in log.records
    )
    return InteractionLog(records, svocab, rvocab, log.senders_equal_receivers)


def restrict(log: InteractionLog, indices: Iterable[int]) -> InteractionLog:
    """Sub-log of the selected interactions (0-based, strictly increasing).

    Vocabularies are pruned to the ids referenced by the kept records, with
    ids reassigned densely in order of first use; original names are kept.
    ``restrict(log, range(len(log)))`` is the identity.
    """
    idx = list(indices)
    if any(not (0 <= i < log.n) for i in idx):
        raise IndexError(f"restriction index out of range 0..{log.n - 1}")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValueError("restriction indices must be strictly increasing")

    svocab = Vocabulary()
    rvocab = svocab if log.senders_equal_receivers else Vocabulary()
    records = []
    for i in idx:
        rec = log.records[i]
        s_ids = tuple(svocab.add(log.sender_vocab.name_of(s)) for s in rec.senders)
        r_ids = tuple(rvocab.add(log.receiver_vocab.name_of(r)) for r in rec.receivers)
        records.append(Interaction(s_ids, r_ids))
    return InteractionLog(tuple(records), svocab, rvocab, log.senders_equal_receivers)


@dataclass
class HistoryState:
    """Running statistics of an interaction prefix.

    Tracks sender outdegrees, per-sender receiver indegrees D(s, r), local
    totals m(s), and the seen-receiver set.  Local statistics are keyed by
    the sender an interaction is attributed to (the single sender, or the
    latent attribution for multi-sender interactions).
    """

    out_degree: dict = field(default_factory=dict)
    n_sender_slots: int = 0
    local_in_degree: dict = field(default_factory=dict)  # s -> {r: D(s, r)}
    local_total: dict = field(default_factory=dict)      # s -> m(s)
    seen_receivers: set = field(default_factory=set)
    n_receiver_slots: int = 0

    @property
    def seen_senders(self) -> set:
        return set(self.out_degree)

    @property
    def n_seen_receivers(self) -> int:
        return len(self.seen_receivers)

    def local_receivers(self, s: int) -> set:
        return set(self.local_in_degree.get(s, ()))

    def observe_sender(self, s: int) -> None:
        self.out_degree[s] = self.out_degree.get(s, 0) + 1
        self.n_sender_slots += 1

    def observe_receiver(self, s: int, r: int) -> None:
        bucket = self.local_in_degree.setdefault(s, {})
        bucket[r] = bucket.get(r, 0) + 1
        self.local_total[s] = self.local_total.get(s, 0) + 1
        self.seen_receivers.add(r)
        self.n_receiver_slots += 1

    def copy(self) -> "HistoryState":
        return HistoryState(
            out_degree=dict(self.out_degree),
            n_sender_slots=self.n_sender_slots,
            local_in_degree={s: dict(d) for s, d in self.local_in_degree.items()},
            local_total=dict(self.local_total),
            seen_receivers=set(self.seen_receivers),
            n_receiver_slots=self.n_receiver_slots,
        )

    def check_conservation(self) -> None:
        """Raise AssertionError if totals are inconsistent."""
        for s, total in self.local_total.items():
            if total != sum(self.local_in_degree.get(s, {}).values()):
                raise AssertionError(f"local total mismatch for sender {s}")
        if self.n_receiver_slots != sum(self.local_total.values()):
            raise AssertionError("receiver slot total mismatch")
        if self.n_sender_slots != sum(self.out_degree.values()):
            raise AssertionError("sender slot total mismatch")


def replay_history(
    log: InteractionLog,
    upto: int | None = None,
    within: int | None = None,
    attribution: Sequence[int] | None = None,
) -> HistoryState:
    """Exact history statistics of a log prefix.

    ``upto`` complete interactions are replayed (all of them when None).
    When ``within`` is given, the senders of interaction ``upto`` and its
    first ``within`` receivers are also counted, matching the mid-interaction
    states the sequential model conditions on.

    ``attribution`` assigns each interaction the sender its receivers count
    toward; it is required when the log has multi-sender interactions and
    defaults to the lone sender otherwise.
    """
    n = log.n if upto is None else upto
    if not (0 <= n <= log.n):
        raise IndexError("prefix length out of range")
    state = HistoryState()

    def attributed(i: int) -> int:
        rec = log.records[i]
        if attribution is not None:
            z = attribution[i]
            if z not in rec.senders:
                raise ValueError(f"attribution for record {i} is not one of its senders")
            return z
        if rec.k1 != 1:
            raise ValueError("multi-sender record needs an explicit attribution")
        return rec.senders[0]

    for i in range(n):
        rec = log.records[i]
        z = attributed(i)
        for s in rec.senders:
            state.observe_sender(s)
        for r in rec.receivers:
            state.observe_receiver(z, r)
    if within is not None:
        if n >= log.n:
            raise IndexError("no interaction at the partial position")
        rec = log.records[n]
        if not (0 <= within <= rec.k2):
            raise IndexError("partial receiver index out of range")
        z = attributed(n)
        for s in rec.senders:
            state.observe_sender(s)
        for r in rec.receivers[:within]:
            state.observe_receiver(z, r)
    return state
