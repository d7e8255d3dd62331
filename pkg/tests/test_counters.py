from memscope.counters import EVENT_ALIASES, MAX_COUNTERS, NullCounterProvider, canonical_event, deltas


def test_aliases_resolve_to_canonical_names():
    assert canonical_event("CPU_CYCLE") == "cycles"
    assert canonical_event("L2D_CACHE") == "l2_access"
    assert canonical_event("L2D_CACHE_REFILL") == "l2_refill"
    assert canonical_event(" Weird_Event ") == "weird_event"
    for name, aliases in EVENT_ALIASES.items():
        assert all(canonical_event(a) == name for a in aliases)


def test_deltas_handle_missing_and_wrap():
    assert deltas({"a": 5, "b": None, "c": 9}, {"a": 12, "b": 3, "c": 2}) == {"a": 7, "b": None, "c": 0}


def test_null_provider():
    s = NullCounterProvider().open(["cycles"])
    assert s.read() == {"cycles": None}
    s.close()
    assert MAX_COUNTERS == 6
