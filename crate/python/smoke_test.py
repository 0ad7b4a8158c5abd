"""Smoke test for the Python bindings.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/cxl_ssd_sim_py-*.whl
"""

import csv
import io

import cxl_ssd_sim_py as sim


def main():
    cfg = sim.default_config()
    assert cfg["cache_capacity"] == 16 << 20 and cfg["policy"] == "lru"

    report = sim.run({"workload": "randlat", "op_count": 1000, "footprint": 1 << 20, "warmup": True})
    lat = report["metrics"]["latency_ns"]
    assert lat["min"] == lat["max"] == 100.0, lat
    print("cached randlat inside cache:", lat["mean"], "ns")

    dram = sim.run({"device": "dram", "workload": "randlat", "op_count": 500})
    assert dram["metrics"]["hit_rate"] == "na"

    try:
        sim.run({"device": "dram", "policy": "lru"})
    except ValueError as e:
        assert "policy" in str(e)
    else:
        raise AssertionError("policy on dram accepted")

    reports = sim.sweep({"workload": "kv", "op_count": 300}, "policy")
    rows = list(csv.DictReader(io.StringIO(sim.to_csv(reports))))
    assert [r["policy"] for r in rows] == ["direct", "lru", "fifo", "2q", "lfru"]
    print(sim.comparison_table(reports), end="")

    image = sim.encode_flit("M2SRwD", 0x1040, meta="Any", req_id=7, data=bytes(range(64)))
    assert len(image) == 128
    flit = sim.decode_flit(image)
    assert flit["txn"] == "M2SRwD" and flit["meta"] == "Any" and flit["data"] == bytes(range(64))

    cache = sim.PageCache(capacity=4 * 4096, ways=2, policy="fifo")
    pattern = [(0, True), (1, False), (0, False), (2, False), (4, False), (0, False)]
    hits = [cache.access(page * 4096, write=w) for page, w in pattern]
    assert hits == [False, False, True, False, False, False], hits
    assert cache.flush() == 0  # dirty page 0 was evicted, then refilled clean

    trace = sim.generate_trace({"workload": "stream", "footprint": 128, "stream_kernel": "copy"})
    assert len(trace.splitlines()) == 4
    print("smoke test passed")


if __name__ == "__main__":
    main()
