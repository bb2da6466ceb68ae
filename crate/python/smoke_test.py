"""Smoke test for the edgedis Python module.

Build and run:
    cargo build --release -p edgedis-py --features extension-module
    cp target/release/libedgedis.so python/edgedis.so
    python3 python/smoke_test.py
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import edgedis  # noqa: E402


def main():
    assert edgedis.partition(2**30, 2**19) == 2048
    assert edgedis.partition(2**30 + 1, 2**19) == 2049
    assert edgedis.majority(32) == 17
    assert edgedis.majority(1) == 1
    try:
        edgedis.majority(0)
        raise AssertionError("majority(0) should fail")
    except ValueError:
        pass
    assert edgedis.parse_size("64MB") == 64 * 2**20

    edges = edgedis.topology_edges(32, 1.4, seed=7)
    assert len(edges) == 45
    degree = {}
    for a, b in edges:
        degree[a] = degree.get(a, 0) + 1
        degree[b] = degree.get(b, 0) + 1
    assert set(degree.values()) <= {2, 3}

    cfg = edgedis.RunConfig(ds=edgedis.parse_size("16MB"), n=16)
    assert cfg.block_count() == 32
    fast = edgedis.run("edgedis", cfg)
    slow = edgedis.run("datasync", cfg)
    assert not fast.stalled and not slow.stalled
    assert slow.cost == 20.0 * 16
    assert abs(fast.cost - 36.0) <= 1.0
    assert fast.time_s < slow.time_s
    print("edgedis", fast)
    print("datasync", slow)

    csv = edgedis.sweep_csv("gossip", cfg, runs=2)
    assert csv.splitlines()[0].startswith("scheme,n,nd,r")
    assert len(csv.splitlines()) == 4

    passed, terms, report = edgedis.uniqueness_scenario()
    assert passed, report
    assert terms == [4, 5, 7, 8, 9]

    samples = edgedis.election_benchmark([8], runs=5)
    assert len(samples) == 5
    assert all(s[3] >= 250.0 for s in samples)

    try:
        edgedis.RunConfig(colour="red")
        raise AssertionError("unknown parameter accepted")
    except ValueError:
        pass
    print("smoke test passed")


if __name__ == "__main__":
    main()
