"""Optional matplotlib rendering of run telemetry next to the CSV output."""

from __future__ import annotations

import os
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_throughput(samples: List[dict], out_dir: str,
                      filename: str = "throughput.png") -> str:
    """Plot aggregate VM tx/rx over time; returns the written path."""
    agg: Dict[float, Tuple[float, float]] = {}
    for s in samples:
        if s["entity_type"] != "vm":
            continue
        tx, rx = agg.get(s["time_s"], (0.0, 0.0))
        agg[s["time_s"]] = (tx + s["tx_bps"], rx + s["rx_bps"])
    times = sorted(agg)
    tx_series = [agg[t][0] / 1e9 for t in times]
    rx_series = [agg[t][1] / 1e9 for t in times]

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(times, tx_series, label="aggregate VM tx", linewidth=1.2)
    ax.plot(times, rx_series, label="aggregate VM rx",
            linewidth=1.2, linestyle="--")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("throughput (Gbps)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    path = os.path.join(out_dir, filename)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
