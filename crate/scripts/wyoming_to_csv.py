#!/usr/bin/env python3
"""Convert a University of Wyoming upper-air sounding text dump into the
sounding CSV format consumed by `stationkeep synth`.

The Wyoming pages (weather.uwyo.edu/upperair/sounding.html) render a
fixed-width table with columns

    PRES  HGHT  TEMP  DWPT  RELH  MIXR  DRCT  SKNT  THTA  THTE  THTV

of which only HGHT (m), DRCT (deg) and SKNT (knots) matter here. Save the
page as text and run:

    python3 scripts/wyoming_to_csv.py dump.txt \
        --station ABQ --lat 35.04 --lon -106.62 \
        --launch 2023-08-23T12:00:00Z > ABQ_2023082312.csv
"""

import argparse
import re
import sys

KNOTS_TO_MS = 0.514444


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("dump", help="saved Wyoming sounding text page")
    ap.add_argument("--station", required=True)
    ap.add_argument("--lat", type=float, required=True)
    ap.add_argument("--lon", type=float, required=True)
    ap.add_argument("--launch", required=True, help="RFC 3339 UTC launch time")
    args = ap.parse_args()

    rows = []
    with open(args.dump, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            fields = line.split()
            # Data rows are all-numeric and at least 11 columns wide.
            if len(fields) < 11:
                continue
            if not all(re.fullmatch(r"-?\d+(\.\d+)?", f) for f in fields[:11]):
                continue
            hght, drct, sknt = float(fields[1]), float(fields[6]), float(fields[7])
            rows.append((hght, drct, sknt * KNOTS_TO_MS))

    if not rows:
        print("no data rows found in the dump", file=sys.stderr)
        return 1

    print(f"# station_id = {args.station}")
    print(f"# latitude = {args.lat}")
    print(f"# longitude = {args.lon}")
    print(f"# launch_time = {args.launch}")
    print("altitude_m,wind_dir_deg,wind_speed_ms")
    for hght, drct, speed in rows:
        print(f"{hght:.0f},{drct:.1f},{speed:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
