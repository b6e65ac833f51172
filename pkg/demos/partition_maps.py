"""Partition maps of the reduced space for the two parameter sweeps.

Raising the pursuer's relative speed or the detection radius both grow the
Rotation region (golden). The counts printed below are the ones the
monotonicity check relies on.

    python3 demos/partition_maps.py [out_dir] [resolution]
"""

import sys
from pathlib import Path

from ddr_escape import GameParams, rasterize_partition
from ddr_escape.inverse import PartitionClass
from ddr_escape.io import render_partition_svg, write_partition_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
res = int(sys.argv[2]) if len(sys.argv) > 2 else 256
out.mkdir(exist_ok=True)

sweeps = {"rho_v": [(rv, 4.0) for rv in (0.2, 0.4, 0.6, 0.8)],
          "rho_l": [(0.0, rl) for rl in (2.0, 4.0, 6.0, 8.0)]}
for name, cases in sweeps.items():
    print(f"sweep over {name}:")
    for rv, rl in cases:
        pm = rasterize_partition(GameParams.from_ratios(rv, rl), res)
        stem = out / f"partition_rv{rv:g}_rl{rl:g}"
        write_partition_csv(pm, stem.with_suffix(".csv"))
        render_partition_svg(pm, stem.with_suffix(".svg"))
        print(f"  rho_v={rv:g} rho_l={rl:g}: rotation cells "
              f"{pm.count(PartitionClass.ROTATION):6d}, primary "
              f"{pm.count(PartitionClass.PRIMARY):6d}")
