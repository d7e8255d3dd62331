"""Memory region discovery and page-granular allocation pools.

Regions are described with a small subset of device-tree source::

    bram@a0000000 {
        device_type = "memory";
        compatible = "mempool";
        reg = <0x0 0xa0000000 0x0 0x100000>;
    };

Only nodes whose ``compatible`` property is ``"mempool"`` become regions.
The four ``reg`` cells are the high/low halves of a 64-bit base address
followed by the high/low halves of a 64-bit size.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, NamedTuple, Optional

from .errors import AllocationError, ConfigSyntaxError, RegionError

log = logging.getLogger(__name__)

PAGE_SIZE = 4096
CACHE_LINE = 64
MEMPOOL_COMPATIBLE = "mempool"


@dataclass(frozen=True)
class MemoryRegionDescriptor:
    name: str
    base: int
    size: int
    compatible: str = MEMPOOL_COMPATIBLE

    @property
    def end(self):
        return self.base + self.size


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<word>[A-Za-z0-9_,.+\-#]+)
  | (?P<punct>[@{}<>;=])
    """,
    re.VERBOSE | re.DOTALL,
)


class _Tok(NamedTuple):
    kind: str
    text: str
    line: int


def _tokenize(text):
    pos, line = 0, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ConfigSyntaxError(f"unexpected character {text[pos]!r}", line)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
        elif kind == "bcomment":
            line += tok.count("\n")
        elif kind not in ("ws", "lcomment"):
            yield _Tok(kind, tok, line)
        pos = m.end()
    yield _Tok("eof", "", line)


def parse_number(text):
    """Parse a ``0x``-prefixed hex or plain decimal cell value."""
    t = text.lower()
    if t.startswith("0x"):
        return int(t[2:], 16)
    if not t.isdigit():
        raise ValueError(f"not a number: {text!r}")
    return int(t)


class _Parser:
    def __init__(self, text):
        self.toks = list(_tokenize(text))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok.text != text:
            found = tok.text or "end of document"
            raise ConfigSyntaxError(f"expected {text!r}, found {found!r}", tok.line)
        return tok

    def word(self, what):
        tok = self.take()
        if tok.kind != "word":
            found = tok.text or "end of document"
            raise ConfigSyntaxError(f"expected {what}, found {found!r}", tok.line)
        return tok

    def nodes(self):
        while self.peek().kind != "eof":
            yield self.node()

    def node(self):
        name = self.word("node name")
        self.expect("@")
        unit = self.word("unit address")
        try:
            int(unit.text[2:] if unit.text.lower().startswith("0x") else unit.text, 16)
        except ValueError:
            raise ConfigSyntaxError(f"bad unit address {unit.text!r}", unit.line) from None
        self.expect("{")
        props = {}
        while self.peek().text != "}":
            key, value = self.prop()
            props[key] = value
        self.expect("}")
        self.expect(";")
        return name, props

    def prop(self):
        key = self.word("property name")
        self.expect("=")
        tok = self.peek()
        if tok.kind == "string":
            self.take()
            value = tok.text[1:-1]
        elif tok.text == "<":
            self.take()
            cells = []
            while self.peek().text != ">":
                cell = self.word("cell value")
                try:
                    cells.append(parse_number(cell.text))
                except ValueError:
                    raise ConfigSyntaxError(f"bad cell value {cell.text!r}", cell.line) from None
            self.expect(">")
            value = (tuple(cells), key.line)
        else:
            found = tok.text or "end of document"
            raise ConfigSyntaxError(f"expected value for {key.text!r}, found {found!r}", tok.line)
        self.expect(";")
        return key.text, value


def parse_region_config(text, page_size=PAGE_SIZE, diagnostics=None):
    """Return one descriptor per ``mempool`` node of ``text``, in document order.

    Nodes with a different ``compatible`` value are skipped silently. Nodes
    that are compatible but malformed (wrong ``reg`` cell count, zero or
    unaligned size/base) are rejected; the reason is logged and appended to
    ``diagnostics`` when a list is supplied. Syntax errors raise
    :class:`ConfigSyntaxError` carrying the offending line number.
    """
    regions = []

    def reject(name, msg):
        text = f"node {name!r} rejected: {msg}"
        log.warning(text)
        if diagnostics is not None:
            diagnostics.append(text)

    for name_tok, props in _Parser(text).nodes():
        name = name_tok.text
        if props.get("compatible") != MEMPOOL_COMPATIBLE:
            continue
        reg = props.get("reg")
        if not isinstance(reg, tuple):
            reject(name, "missing reg property")
            continue
        cells, line = reg
        if len(cells) != 4:
            reject(name, f"reg has {len(cells)} cells, expected 4 (line {line})")
            continue
        if any(c >> 32 for c in cells):
            reject(name, f"reg cell exceeds 32 bits (line {line})")
            continue
        base = (cells[0] << 32) | cells[1]
        size = (cells[2] << 32) | cells[3]
        if size == 0:
            reject(name, "size is zero")
            continue
        if size % page_size or base % page_size:
            reject(name, f"base/size not aligned to {page_size}-byte pages")
            continue
        regions.append(MemoryRegionDescriptor(name, base, size, MEMPOOL_COMPATIBLE))
    return regions


def render_region_config(regions):
    """Render descriptors back into the region config grammar."""
    out = []
    for r in regions:
        out.append(
            f"{r.name}@{r.base:x} {{\n"
            f'    device_type = "memory";\n'
            f'    compatible = "{r.compatible}";\n'
            f"    reg = <{r.base >> 32:#x} {r.base & 0xFFFFFFFF:#x} "
            f"{r.size >> 32:#x} {r.size & 0xFFFFFFFF:#x}>;\n"
            f"}};\n"
        )
    return "\n".join(out)


# -- pools -------------------------------------------------------------------

@dataclass(eq=False)
class PoolBuffer:
    pool_id: int
    offset: int
    length: int
    backing: Any = None
    token: int = 0

    @property
    def lines(self):
        return self.length // CACHE_LINE


class PoolStatus(NamedTuple):
    id: int
    size: int
    base: int
    free: int

    def __str__(self):
        return f"id={self.id} size={self.size} base={self.base:#x} free={self.free}"


@dataclass(eq=False)
class MemoryPool:
    """First-fit page allocator over one region.

    Page occupancy lives in a bytearray (0 = free) so a first-fit search for
    ``n`` contiguous pages is a single ``find`` of ``n`` zero bytes.
    """

    id: int
    region: MemoryRegionDescriptor
    page_size: int = PAGE_SIZE
    storage: Optional[Callable[[int, int], Any]] = None
    allocations: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.region.size % self.page_size:
            raise RegionError(f"region {self.region.name!r} is not a whole number of pages")
        self._bitmap = bytearray(self.total_pages)
        self._next_token = 1
        self.free_pages = self.total_pages
        # set by the coordinator while a measured region is open
        self.locked = False

    @property
    def total_pages(self):
        return self.region.size // self.page_size

    @property
    def size(self):
        return self.region.size

    def alloc(self, length):
        if length <= 0:
            raise AllocationError(f"pool {self.id}: allocation length must be positive, got {length}")
        if self.locked:
            raise AllocationError(f"pool {self.id}: allocation inside a measured region")
        npages = -(-length // self.page_size)
        start = self._bitmap.find(bytes(npages)) if npages <= self.free_pages else -1
        if start < 0:
            raise AllocationError(
                f"pool {self.id}: cannot allocate {length} bytes "
                f"({npages} pages, {self.free_pages} free)"
            )
        self._bitmap[start:start + npages] = b"\x01" * npages
        self.free_pages -= npages
        offset = start * self.page_size
        token = self._next_token
        self._next_token += 1
        self.allocations[offset] = (npages * self.page_size, token)
        line_len = -(-length // CACHE_LINE) * CACHE_LINE
        backing = self.storage(offset, line_len) if self.storage else None
        return PoolBuffer(self.id, offset, line_len, backing, token)

    def free(self, buffer):
        if self.locked:
            raise AllocationError(f"pool {self.id}: free inside a measured region")
        entry = self.allocations.get(buffer.offset)
        if buffer.pool_id != self.id or entry is None or entry[1] != buffer.token:
            raise AllocationError(
                f"pool {self.id}: buffer at offset {buffer.offset:#x} is not allocated "
                "(double free or foreign buffer)"
            )
        nbytes, _ = self.allocations.pop(buffer.offset)
        start = buffer.offset // self.page_size
        npages = nbytes // self.page_size
        self._bitmap[start:start + npages] = bytes(npages)
        self.free_pages += npages
        buffer.backing = None
        return self

    def allocated_pages(self):
        return sum(n for n, _ in self.allocations.values()) // self.page_size

    def snapshot(self):
        return (self.free_pages, bytes(self._bitmap), tuple(sorted(self.allocations)))

    def status(self):
        return PoolStatus(self.id, self.size, self.region.base, self.free_pages)


def create_pools(regions, page_size=PAGE_SIZE):
    """One pool per region, ids 1..k in input order."""
    regions = list(regions)
    ordered = sorted(regions, key=lambda r: r.base)
    for a, b in zip(ordered, ordered[1:]):
        if b.base < a.end:
            raise RegionError(
                f"regions {a.name!r} [{a.base:#x}, {a.end:#x}) and "
                f"{b.name!r} [{b.base:#x}, {b.end:#x}) overlap"
            )
    return [MemoryPool(i, r, page_size) for i, r in enumerate(regions, start=1)]


def pool_status(pools):
    return [p.status() for p in pools]


def format_pool_status(pools):
    return "\n".join(str(s) for s in pool_status(pools))


class PoolManager:
    """Pools addressable by id; the owner of every allocation."""

    def __init__(self, pools: Iterable[MemoryPool]):
        self.pools = {p.id: p for p in pools}

    @classmethod
    def from_config(cls, text, page_size=PAGE_SIZE):
        return cls(create_pools(parse_region_config(text, page_size), page_size))

    def __iter__(self):
        return iter(self.pools.values())

    def __len__(self):
        return len(self.pools)

    def __contains__(self, pool_id):
        return pool_id in self.pools

    def __getitem__(self, pool_id):
        try:
            return self.pools[pool_id]
        except KeyError:
            raise AllocationError(f"no such pool: {pool_id}") from None

    def alloc(self, pool_id, length):
        return self[pool_id].alloc(length)

    def free(self, buffer):
        return self[buffer.pool_id].free(buffer)

    def status(self):
        return pool_status(self)

    def snapshot(self):
        return {pid: p.snapshot() for pid, p in self.pools.items()}

    def lock(self, locked=True):
        for p in self:
            p.locked = locked
