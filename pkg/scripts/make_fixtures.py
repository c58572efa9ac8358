"""Regenerate the committed test fixtures in tests/data.

* golden_tags.ptag / golden_hist.csv: a small two-channel tag file and its
  correlation histogram as written by ``gcsim correlate``. The histogram is
  checked against the all-pairs oracle before anything is written.
* lifetime.csv: a pulsed decay histogram (delay after the laser pulse,
  detector jitter and dark counts included) for the lifetime fit.
"""

import argparse
import os
import sys

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "tests"))

import oracles  # noqa: E402
from gcsim import cli  # noqa: E402
from gcsim import formats as fmt  # noqa: E402
from gcsim import rng as _rng  # noqa: E402
from gcsim.detection import DetectorParams, TagStream, detect_channels, merge_sorted  # noqa: E402
from gcsim.emitter import EmitterParams, PulseTrainParams, pulsed_emission_stream  # noqa: E402

SEED = 20240611
BIN_PS, MAX_PS = 500, 20_000


def golden_tags():
    g = _rng.substream(SEED, "fixture")
    # shared events seen by both channels plus uncorrelated background
    shared = np.sort(g.integers(0, 2_000_000, 250))
    a = np.sort(np.concatenate([shared + g.integers(-800, 800, 250), g.integers(0, 2_000_000, 150)]))
    b = np.sort(np.concatenate([shared + 3000 + g.integers(-800, 800, 250), g.integers(0, 2_000_000, 150)]))
    return merge_sorted([TagStream.from_times(a, 0), TagStream.from_times(b, 1)])


def lifetime_columns():
    e = EmitterParams()
    p = PulseTrainParams(n_pulses=3_000_000, extinction_dB=float("inf"))
    s = pulsed_emission_stream(e, p, SEED)
    d = DetectorParams(efficiency=0.6, jitter_sigma=252e-12, dark_rate=2000.0)
    tags = detect_channels([np.sort(s.emit_time)], [d], SEED, duration=2 * p.n_pulses * p.slot_ps / 1e12)
    delay = tags.timestamp % p.period_ps
    edges = np.arange(0, p.period_ps + 1, 100)
    counts, _ = np.histogram(delay, edges)
    return {"t_ps": edges[:-1] + 50, "counts": counts}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(HERE, "..", "tests", "data"))
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)

    tags = golden_tags()
    tag_path = os.path.join(args.out, "golden_tags.ptag")
    fmt.write_tagfile(tag_path, tags, seed=SEED, channel_count=2)
    hist_path = os.path.join(args.out, "golden_hist.csv")
    rc = cli.main(["correlate", tag_path, "--bin-width-ps", str(BIN_PS), "--max-delay-ps", str(MAX_PS),
                   "--normalize", "none", "--out", hist_path])
    if rc:
        sys.exit(rc)
    cols, _ = fmt.read_histogram_csv(hist_path)
    edges = np.concatenate([cols["lo_ps"], cols["hi_ps"][-1:]])
    ref = oracles.all_pairs_histogram(tags.on(0), tags.on(1), edges)
    if not np.array_equal(ref, cols["counts"].astype(np.int64)):
        os.unlink(hist_path)
        sys.exit("correlator disagrees with the all-pairs oracle; fixture not written")
    print(f"golden histogram verified against all-pairs counting ({int(ref.sum())} coincidences)")

    life = os.path.join(args.out, "lifetime.csv")
    fmt.write_data_csv(life, lifetime_columns(), {"generated-by": cli.GENERATED_BY, "seed": SEED, "T1-ns": 4.6})
    print(f"wrote {life}")


if __name__ == "__main__":
    main()
