"""Bounded tile cache with pluggable eviction and disk-operation counters."""

import logging
import math
import threading
import zlib
from abc import ABC, abstractmethod
from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field

from .errors import CacheCapacityError, OptionConflictError, PinError, UnknownBlockError
from .store import ITEM_BYTES, BaseTileStore, Tile
from .tasks import BlockId, Intent, TaskList

logger = logging.getLogger(__name__)

ASSOCIATIVE_SETS = 4


class CachePolicy(str, Enum):
    NONE = "none"
    LRU4 = "lru4"
    LRU = "lru"
    LFU = "lfu"


class CacheStats(BaseModel):
    """Disk traffic and residency counters."""

    disk_reads: int = Field(0, ge=0, description="Tiles read from disk")
    disk_writes: int = Field(0, ge=0, description="Tiles written back to disk")
    hits: int = Field(0, ge=0, description="Acquisitions served from memory")
    misses: int = Field(0, ge=0, description="Acquisitions that needed a disk read")

    model_config = {"frozen": True}

    @property
    def hit_ratio(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0

    def line(self) -> str:
        return f"reads={self.disk_reads} writes={self.disk_writes} hits={self.hits} misses={self.misses}"

    def __add__(self, other: "CacheStats") -> "CacheStats":
        return CacheStats(
            disk_reads=self.disk_reads + other.disk_reads,
            disk_writes=self.disk_writes + other.disk_writes,
            hits=self.hits + other.hits,
            misses=self.misses + other.misses,
        )

    def __sub__(self, other: "CacheStats") -> "CacheStats":
        return CacheStats(
            disk_reads=self.disk_reads - other.disk_reads,
            disk_writes=self.disk_writes - other.disk_writes,
            hits=self.hits - other.hits,
            misses=self.misses - other.misses,
        )


def set_index(block: BlockId) -> int:
    store, i, j = block
    return zlib.crc32(f"{store}:{i}:{j}".encode()) % ASSOCIATIVE_SETS


@dataclass
class _Entry:
    block: BlockId
    tile: Tile | None
    nbytes: int
    set_index: int | None = None
    dirty: bool = False
    loading: bool = False
    pins: int = 0
    last_use: int = 0


@dataclass
class CacheHandle:
    """A pinned resident tile returned by BlockCache.acquire."""

    block: BlockId
    tile: Tile
    intent: Intent
    was_dirty: bool = False
    released: bool = False

    @property
    def data(self) -> np.ndarray:
        return self.tile.data


class EvictionPolicy(ABC):
    """Base class for eviction strategies."""

    keeps_unpinned = True

    def charge(self, store: BaseTileStore, nbytes: int) -> int:
        """Bytes a tile of nbytes occupies in the cache."""
        return nbytes

    def set_of(self, block: BlockId) -> int | None:
        return None

    def fits(self, cache: "BlockCache", charge: int, set_index: int | None) -> bool:
        return cache.used_bytes + charge <= cache.capacity

    def ever_fits(self, capacity: int, charge: int) -> bool:
        return charge <= capacity

    @abstractmethod
    def rank(self, entry: _Entry, now: int, cache: "BlockCache") -> tuple:
        """Sort key; the candidate with the largest key is evicted."""

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"


class NoCache(EvictionPolicy):
    """Tiles leave memory as soon as their last pin is released."""

    keeps_unpinned = False

    def rank(self, entry: _Entry, now: int, cache: "BlockCache") -> tuple:
        return (-entry.last_use,)


class LruVariable(EvictionPolicy):
    """LRU over slots sized to each tile, placed anywhere."""

    def rank(self, entry: _Entry, now: int, cache: "BlockCache") -> tuple:
        return (-entry.last_use,)


class LruFixedAssoc(LruVariable):
    """LRU within one of four sets of fixed nb x nb slots."""

    def charge(self, store: BaseTileStore, nbytes: int) -> int:
        return store.nb * store.nb * ITEM_BYTES

    def set_of(self, block: BlockId) -> int | None:
        return set_index(block)

    def fits(self, cache: "BlockCache", charge: int, set_index: int | None) -> bool:
        slots = cache.capacity // charge // ASSOCIATIVE_SETS
        return cache.set_occupancy(set_index) < slots

    def ever_fits(self, capacity: int, charge: int) -> bool:
        return capacity // charge // ASSOCIATIVE_SETS >= 1


class LfuFuture(EvictionPolicy):
    """Evict the tile whose next scheduled use lies furthest ahead."""

    def rank(self, entry: _Entry, now: int, cache: "BlockCache") -> tuple:
        return (cache.next_use(entry.block, now), -entry.last_use)


def make_policy(policy: CachePolicy | str) -> EvictionPolicy:
    policy = CachePolicy(policy)
    if policy is CachePolicy.NONE:
        return NoCache()
    elif policy is CachePolicy.LRU4:
        return LruFixedAssoc()
    elif policy is CachePolicy.LRU:
        return LruVariable()
    elif policy is CachePolicy.LFU:
        return LfuFuture()
    else:
        raise ValueError(f"Unknown policy: {policy}")


class BlockCache:
    """In-memory tile cache shared by the executors.

    Blocks are addressed as (store name, i, j); stores are registered under the
    names used by task operands. Residency bookkeeping happens under one lock;
    tile reads and write-backs run outside it. A tile being loaded is pinned and
    marked loading, and a block being written back cannot be acquired until the
    write lands.
    """

    def __init__(self, capacity: int, policy: CachePolicy | str = CachePolicy.LFU, schedule: TaskList | None = None):
        if capacity <= 0:
            raise OptionConflictError(f"cache capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.policy_kind = CachePolicy(policy)
        self.policy = make_policy(self.policy_kind)
        self.stores: dict[str, BaseTileStore] = {}
        self._entries: dict[BlockId, _Entry] = {}
        self._writing: set[BlockId] = set()
        self._schedule: dict[BlockId, list[int]] | None = None
        self._lock = threading.RLock()
        self._changed = threading.Condition(self._lock)
        self._tick = 0
        self.used_bytes = 0
        self.release_count = 0
        self.disk_reads = 0
        self.disk_writes = 0
        self.hits = 0
        self.misses = 0
        if schedule is not None:
            self.set_schedule(schedule)

    def register(self, name: str, store: BaseTileStore) -> None:
        with self._lock:
            current = self.stores.get(name)
            if current is not None and current is not store:
                self.unregister(name)
            self.stores[name] = store

    def unregister(self, name: str) -> None:
        """Write back and drop every resident tile of the store."""
        with self._lock:
            entries = [e for b, e in self._entries.items() if b[0] == name]
            pinned = [e.block for e in entries if e.pins]
            if pinned:
                raise PinError(f"cannot unregister {name}: tile {pinned[0]} is pinned")
            pending = []
            for entry in entries:
                pending += self._detach(entry)
        self._write_back(pending)
        with self._lock:
            self.stores.pop(name, None)

    def set_schedule(self, tasks: TaskList) -> None:
        with self._lock:
            self._schedule = tasks.schedule()

    def next_use(self, block: BlockId, now: int) -> float:
        if self._schedule is None:
            raise OptionConflictError("lfu eviction needs the task schedule")
        uses = self._schedule.get(block, [])
        k = bisect_left(uses, now)
        return uses[k] if k < len(uses) else math.inf

    def set_occupancy(self, index: int | None) -> int:
        return sum(1 for e in self._entries.values() if e.set_index == index)

    @property
    def pinned_bytes(self) -> int:
        return sum(e.nbytes for e in self._entries.values() if e.pins)

    def resident(self, block: BlockId) -> bool:
        return block in self._entries

    def is_dirty(self, block: BlockId) -> bool:
        entry = self._entries.get(block)
        return entry is not None and entry.dirty

    def _store(self, block: BlockId) -> BaseTileStore:
        store = self.stores.get(block[0])
        if store is None:
            raise UnknownBlockError(f"no store registered as {block[0]!r}")
        store.check(block[1], block[2])
        return store

    def _candidates(self, set_index: int | None) -> list[_Entry]:
        return [
            e for e in self._entries.values() if e.pins == 0 and (set_index is None or e.set_index == set_index)
        ]

    def choose_victim(self, now: int = 0, set_index: int | None = None) -> BlockId:
        """
        Pick the unpinned tile the policy would evict next.

        Raises:
            CacheCapacityError: If every resident tile is pinned
        """
        with self._lock:
            candidates = self._candidates(set_index)
            if not candidates:
                raise CacheCapacityError("all resident tiles are pinned")
            return max(candidates, key=lambda e: self.policy.rank(e, now, self)).block

    def _detach(self, entry: _Entry) -> list[tuple[BaseTileStore, _Entry]]:
        """Drop entry from residency; a dirty one is returned for write-back."""
        del self._entries[entry.block]
        self.used_bytes -= entry.nbytes
        if not entry.dirty:
            return []
        self.disk_writes += 1
        self._writing.add(entry.block)
        return [(self.stores[entry.block[0]], entry)]

    def _write_back(self, pending: list[tuple[BaseTileStore, _Entry]]) -> None:
        """Write detached dirty tiles; called without the lock held."""
        try:
            for store, entry in pending:
                store.write_tile(entry.tile)
        finally:
            if pending:
                with self._changed:
                    self._writing.difference_update(entry.block for _, entry in pending)
                    self._changed.notify_all()

    def _make_room(self, block: BlockId, charge: int, now: int, pending: list[tuple[BaseTileStore, _Entry]]) -> None:
        set_index = self.policy.set_of(block)
        if not self.policy.ever_fits(self.capacity, charge):
            raise CacheCapacityError(f"tile {block} ({charge} bytes) cannot fit a {self.capacity}-byte cache")
        while not self.policy.fits(self, charge, set_index):
            if not self._candidates(set_index):
                raise CacheCapacityError(
                    f"no evictable tile for {block}: {self.pinned_bytes} of {self.capacity} bytes pinned"
                )
            pending += self._detach(self._entries[self.choose_victim(now, set_index)])

    def acquire(self, block: BlockId, intent: Intent | str = Intent.READ, now: int = 0) -> CacheHandle:
        """
        Make block resident and pin it.

        Raises:
            UnknownBlockError: If the block's store is not registered
            CacheCapacityError: If pinned tiles leave no room for the block
        """
        intent = Intent(intent)
        pending: list[tuple[BaseTileStore, _Entry]] = []
        try:
            with self._changed:
                store = self._store(block)
                self._tick += 1
                self._changed.wait_for(lambda: block not in self._writing)
                entry = self._entries.get(block)
                load = False
                if entry is None:
                    _, i, j = block
                    charge = self.policy.charge(store, store.tile_bytes(i, j))
                    self._make_room(block, charge, now, pending)
                    entry = _Entry(block, None, charge, self.policy.set_of(block))
                    if intent is Intent.WRITE:
                        entry.tile = Tile.zeros(*store.tile_shape(i, j), (i, j))
                    else:
                        entry.loading = load = True
                        self.disk_reads += 1
                        self.misses += 1
                    self._entries[block] = entry
                    self.used_bytes += charge
                elif intent is not Intent.WRITE:
                    self.hits += 1
                was_dirty = entry.dirty
                entry.pins += 1
                entry.last_use = self._tick
                if intent is not Intent.READ:
                    entry.dirty = True
        finally:
            self._write_back(pending)
        if load:
            self._load(store, entry)
        else:
            with self._changed:
                self._changed.wait_for(lambda: not entry.loading)
            if entry.tile is None:
                raise PinError(f"load of {block} failed while it was pinned")
        return CacheHandle(block, entry.tile, intent, was_dirty=was_dirty)

    def _load(self, store: BaseTileStore, entry: _Entry) -> None:
        _, i, j = entry.block
        try:
            tile = store.read_tile(i, j)
        except BaseException:
            with self._changed:
                self._entries.pop(entry.block, None)
                self.used_bytes -= entry.nbytes
                entry.loading = False
                self._changed.notify_all()
            raise
        with self._changed:
            entry.tile = tile
            entry.loading = False
            self._changed.notify_all()

    def acquire_many(self, requests: list[tuple[BlockId, Intent]], now: int = 0) -> list[CacheHandle]:
        """Pin all blocks of one task, resident ones first; all or nothing."""
        with self._lock:
            order = sorted(range(len(requests)), key=lambda k: requests[k][0] not in self._entries)
        handles: list[CacheHandle | None] = [None] * len(requests)
        try:
            for k in order:
                block, intent = requests[k]
                handles[k] = self.acquire(block, intent, now)
        except CacheCapacityError:
            pending = []
            with self._lock:
                for handle in handles:
                    if handle is not None:
                        pending += self._unpin(handle, restore=True)
            self._write_back(pending)
            raise
        return [h for h in handles if h is not None]

    def _unpin(self, handle: CacheHandle, restore: bool = False) -> list[tuple[BaseTileStore, _Entry]]:
        if handle.released:
            raise PinError(f"double release of {handle.block}")
        entry = self._entries.get(handle.block)
        if entry is None or entry.pins == 0:
            raise PinError(f"release of unpinned tile {handle.block}")
        handle.released = True
        if restore and entry.pins == 1:
            entry.dirty = handle.was_dirty
        entry.pins -= 1
        pending = []
        if entry.pins == 0 and not self.policy.keeps_unpinned:
            pending = self._detach(entry)
        self.release_count += 1
        self._changed.notify_all()
        return pending

    def release(self, handle: CacheHandle) -> None:
        """Unpin; a dirty tile stays dirty until evicted or flushed."""
        with self._lock:
            pending = self._unpin(handle)
        self._write_back(pending)

    def wait_for_release(self, seen: int, timeout: float = 0.05) -> None:
        """Block until some release happens after release_count == seen."""
        with self._changed:
            self._changed.wait_for(lambda: self.release_count != seen, timeout)

    @property
    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(
                disk_reads=self.disk_reads, disk_writes=self.disk_writes, hits=self.hits, misses=self.misses
            )

    def flush(self) -> CacheStats:
        """
        Write every dirty tile back; tiles stay resident and clean.

        Runs between executions, so the writes happen under the lock.

        Raises:
            PinError: If any tile is still pinned
        """
        with self._changed:
            pinned = [e.block for e in self._entries.values() if e.pins]
            if pinned:
                raise PinError(f"flush with pinned tiles {pinned[:4]}")
            self._changed.wait_for(lambda: not self._writing)
            for block in sorted(self._entries):
                entry = self._entries[block]
                if entry.dirty:
                    self.stores[block[0]].write_tile(entry.tile)
                    self.disk_writes += 1
                    entry.dirty = False
            logger.debug(f"cache flushed: {self.stats.line()}")
            return self.stats

    def __repr__(self) -> str:
        return (
            f"BlockCache(policy={self.policy_kind.value}, capacity={self.capacity}, "
            f"resident={len(self._entries)}, used={self.used_bytes})"
        )
