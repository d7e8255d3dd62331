import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memscope.errors import AllocationError, ConfigSyntaxError, RegionError
from memscope.pools import (
    PAGE_SIZE,
    MemoryPool,
    MemoryRegionDescriptor,
    PoolManager,
    create_pools,
    format_pool_status,
    parse_number,
    parse_region_config,
    render_region_config,
)

from .oracles import first_fit

TWO_NODES = """
/* comment */
bram@a0000000 {
    device_type = "memory";
    compatible = "mempool";
    reg = <0x0 0xa0000000 0x0 0x100000>;
};
// another comment
uart@ff000000 { compatible = "xlnx,uart"; reg = <0x0 0xff000000 0x0 0x1000>; };
dram@10000000 {
    device_type = "memory";
    compatible = "mempool";
    reg = <0x0 0x10000000 0x0 0x10000000>;
    status = "okay";
};
"""


def region(base, size, name="r"):
    return MemoryRegionDescriptor(name, base, size, "mempool")


def test_parse_keeps_only_mempool_nodes_in_order():
    regions = parse_region_config(TWO_NODES)
    assert [(r.name, r.base, r.size) for r in regions] == [
        ("bram", 0xA0000000, 0x100000),
        ("dram", 0x10000000, 0x10000000),
    ]


def test_high_cells_form_64_bit_values():
    text = 'x@0 { compatible = "mempool"; reg = <0x4 0x0 0x1 0x0>; };'
    (r,) = parse_region_config(text)
    assert r.base == 0x4_0000_0000 and r.size == 0x1_0000_0000


@pytest.mark.parametrize("reg, why", [
    ("<0x0 0x1000 0x0>", "cells"),
    ("<0x0 0x1000 0x0 0x0>", "zero"),
    ("<0x0 0x1001 0x0 0x1000>", "aligned"),
])
def test_malformed_nodes_are_rejected_with_diagnostics(reg, why):
    diags = []
    text = f'bad@0 {{ compatible = "mempool"; reg = {reg}; }};'
    assert parse_region_config(text, diagnostics=diags) == []
    assert len(diags) == 1 and why in diags[0]


def test_syntax_error_reports_line():
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_region_config('a@0 {\n compatible = "mempool"\n reg = <0 0 0 1>; };')
    assert exc.value.line == 3


def test_parse_number_forms():
    assert parse_number("0x10") == 16
    assert parse_number("42") == 42


def test_render_round_trip():
    regions = parse_region_config(TWO_NODES)
    assert parse_region_config(render_region_config(regions)) == regions


def test_overlapping_regions_name_both():
    with pytest.raises(RegionError, match="'a'.*'b'"):
        create_pools([region(0, 2 * PAGE_SIZE, "a"), region(PAGE_SIZE, PAGE_SIZE, "b")])


def test_pool_ids_follow_input_order():
    pools = create_pools([region(0x10000, PAGE_SIZE * 4, "hi"), region(0, PAGE_SIZE * 4, "lo")])
    assert [(p.id, p.region.name) for p in pools] == [(1, "hi"), (2, "lo")]


def test_status_line_format():
    pools = PoolManager.from_config(TWO_NODES)
    assert format_pool_status(pools).splitlines()[0] == "id=1 size=1048576 base=0xa0000000 free=256"


def test_alloc_rounds_and_reserves_pages():
    pool = MemoryPool(1, region(0, 16 * PAGE_SIZE))
    buf = pool.alloc(100)
    assert buf.length == 128 and buf.offset == 0
    assert pool.free_pages == 15
    buf2 = pool.alloc(PAGE_SIZE + 1)
    assert buf2.offset == PAGE_SIZE and pool.free_pages == 13


def test_exhaustion_and_double_free():
    pool = MemoryPool(1, region(0, 2 * PAGE_SIZE))
    buf = pool.alloc(2 * PAGE_SIZE)
    with pytest.raises(AllocationError):
        pool.alloc(1)
    pool.free(buf)
    with pytest.raises(AllocationError, match="double free"):
        pool.free(buf)


def test_stale_token_rejected_after_reuse():
    pool = MemoryPool(1, region(0, PAGE_SIZE))
    old = pool.alloc(64)
    pool.free(old)
    pool.alloc(64)
    with pytest.raises(AllocationError):
        pool.free(old)


def test_locked_pool_refuses():
    pools = PoolManager.from_config(TWO_NODES)
    buf = pools.alloc(1, 64)
    pools.lock()
    with pytest.raises(AllocationError, match="measured"):
        pools.alloc(1, 64)
    with pytest.raises(AllocationError, match="measured"):
        pools.free(buf)
    pools.lock(False)
    pools.free(buf)


def test_unknown_pool():
    with pytest.raises(AllocationError, match="no such pool: 9"):
        PoolManager.from_config(TWO_NODES)[9]


def test_storage_backs_buffers():
    import numpy as np

    mem = np.zeros(4 * PAGE_SIZE, dtype=np.uint8)
    pool = MemoryPool(1, region(0, 4 * PAGE_SIZE), storage=lambda o, n: mem[o:o + n])
    buf = pool.alloc(PAGE_SIZE)
    pool.alloc(64)
    later = pool.alloc(64)
    later.backing[:] = 7
    assert mem[2 * PAGE_SIZE] == 7 and buf.backing.sum() == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(1, 5 * PAGE_SIZE)), max_size=40))
def test_first_fit_and_page_conservation(ops):
    total = 32
    pool = MemoryPool(1, region(0, total * PAGE_SIZE))
    shadow = [False] * total
    live = []
    for is_alloc, length in ops:
        if is_alloc or not live:
            n = -(-length // PAGE_SIZE)
            expect = first_fit(shadow, n)
            if expect < 0:
                with pytest.raises(AllocationError):
                    pool.alloc(length)
                continue
            buf = pool.alloc(length)
            assert buf.offset == expect * PAGE_SIZE
            shadow[expect:expect + n] = [True] * n
            live.append((buf, n))
        else:
            buf, n = live.pop(len(live) // 2)
            pool.free(buf)
            start = buf.offset // PAGE_SIZE
            shadow[start:start + n] = [False] * n
        assert pool.free_pages == shadow.count(False)
        assert pool.free_pages + pool.allocated_pages() == total
    for buf, _ in live:
        pool.free(buf)
    assert pool.free_pages == total
