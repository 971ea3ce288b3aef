"""Generate the bundled clear-sky irradiance and load-multiplier profile.

Irradiance follows ``A * cos(pi * (t - t_noon) / (2 * H)) ** p`` with the
exponent chosen so that an inverter with 1.2 DC/AC ratio clips between
10:45 and 13:08. Load is a piecewise-linear daytime shape peaking at 1.0.

    python scripts/make_profiles.py > src/gridcollab/data/clear_sky.csv
"""

import math
import sys

import numpy as np

PEAK_GHI = 1000.0
HALF_DAY = 6.5 * 3600
NOON = 11 * 3600 + 56 * 60 + 30
CLIP_START = 10 * 3600 + 45 * 60
DC_AC = 1800.0 / 1500.0

LOAD_POINTS = [
    ("06:00", 0.58), ("07:30", 0.66), ("09:00", 0.74), ("11:00", 0.80),
    ("13:00", 0.82), ("15:00", 0.86), ("16:30", 0.93), ("17:30", 1.00), ("18:00", 1.00),
]


def _sec(hhmm):
    h, m = hhmm.split(":")
    return int(h) * 3600 + int(m) * 60


def main(out=sys.stdout):
    # exponent so that ghi(CLIP_START) = 1000 / DC_AC
    x = math.cos(math.pi * (CLIP_START - NOON) / (2 * HALF_DAY))
    p = math.log(PEAK_GHI / DC_AC / PEAK_GHI) / math.log(x)
    times = np.arange(6 * 3600, 18 * 3600 + 1, 60)
    arg = np.clip(math.pi * (times - NOON) / (2 * HALF_DAY), -math.pi / 2, math.pi / 2)
    ghi = PEAK_GHI * np.cos(arg) ** p
    lt = [_sec(t) for t, _ in LOAD_POINTS]
    lv = [v for _, v in LOAD_POINTS]
    load = np.interp(times, lt, lv)
    out.write("# clear-sky day, 1-minute resolution, GHI in W/m^2\n")
    out.write("time,ghi,load_mult\n")
    for t, g, l in zip(times, ghi, load):
        out.write(f"{t // 3600:02d}:{t % 3600 // 60:02d},{g:.2f},{l:.4f}\n")


if __name__ == "__main__":
    main()
