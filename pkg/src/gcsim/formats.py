"""On-disk formats: binary time-tag files and comment-annotated CSV.

Tag file layout (little-endian)::

    header  56 bytes  '<4sHHIQQ32s'
            magic b"PTAG", version, channel_count, resolution_ps,
            seed, n_records, sha256 of the resolved config (raw bytes)
    records 9 bytes each: uint8 channel, int64 timestamp (ps)

Records must be sorted by timestamp; readers check this. CSV files start
with ``# key: value`` lines, the first being ``# generated-by: ...``.
"""

import csv
import io
import os
import struct
import tempfile
from contextlib import contextmanager

import numpy as np

from .correlator import CorrelationHistogram
from .detection import TagStream
from .diffusion import Profile
from .errors import FormatError

MAGIC = b"PTAG"
TAG_VERSION = 1
HISTOGRAM_CSV_VERSION = 1
PROFILE_CSV_VERSION = 1
GENERATOR = "gcsim"

HEADER = struct.Struct("<4sHHIQQ32s")
RECORD = np.dtype([("channel", "u1"), ("timestamp", "<i8")])  # packed, 9 bytes


@contextmanager
def atomic_open(path, mode="wb"):
    """Write to a temporary file next to ``path`` and rename on success."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"newline": ""})) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# tag files


def _hash_bytes(config_hash):
    if config_hash is None:
        return bytes(32)
    if isinstance(config_hash, bytes):
        b = config_hash
    else:
        b = bytes.fromhex(config_hash)
    if len(b) != 32:
        raise FormatError("config hash must be 32 bytes (sha256)")
    return b


def encode_tags(tags: TagStream, seed=0, config_hash=None, channel_count=None, resolution_ps=1):
    ch = np.asarray(tags.channel, dtype=np.uint8)
    ts = np.asarray(tags.timestamp, dtype=np.int64)
    if len(ts) > 1 and np.any(np.diff(ts) < 0):
        raise FormatError("tags must be sorted by timestamp")
    if channel_count is None:
        channel_count = int(ch.max()) + 1 if len(ch) else 0
    if len(ch) and ch.max() >= channel_count:
        raise FormatError(f"channel {int(ch.max())} exceeds channel_count {channel_count}")
    rec = np.empty(len(ts), dtype=RECORD)
    rec["channel"] = ch
    rec["timestamp"] = ts
    head = HEADER.pack(MAGIC, TAG_VERSION, channel_count, resolution_ps, int(seed), len(ts), _hash_bytes(config_hash))
    return head + rec.tobytes()


def write_tagfile(path, tags: TagStream, seed=0, config_hash=None, channel_count=None, resolution_ps=1):
    data = encode_tags(tags, seed, config_hash, channel_count, resolution_ps)
    with atomic_open(path, "wb") as f:
        f.write(data)


def decode_tags(buf):
    """Parse tag-file bytes into ``(TagStream, header_dict)``."""
    if len(buf) < HEADER.size:
        raise FormatError("file shorter than the tag-file header")
    magic, version, nch, res, seed, n, h = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != TAG_VERSION:
        raise FormatError(f"unsupported tag-file version {version}")
    body = memoryview(buf)[HEADER.size :]
    if len(body) != n * RECORD.itemsize:
        raise FormatError(f"header announces {n} records but the body holds {len(body) / RECORD.itemsize:g}")
    rec = np.frombuffer(body, dtype=RECORD, count=n)
    ch = rec["channel"].copy()
    ts = rec["timestamp"].copy()
    if n > 1 and np.any(np.diff(ts) < 0):
        raise FormatError("tag records are not sorted by timestamp")
    if n and ch.max() >= nch:
        raise FormatError(f"record channel {int(ch.max())} exceeds channel_count {nch}")
    header = {
        "version": version,
        "channel_count": nch,
        "resolution_ps": res,
        "seed": seed,
        "n_records": n,
        "config_hash": h.hex(),
    }
    return TagStream(ch, ts), header


def read_tagfile(path):
    with open(path, "rb") as f:
        return decode_tags(f.read())


# ---------------------------------------------------------------------------
# CSV


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _meta_lines(meta):
    meta = dict(meta or {})
    lines = [f"# generated-by: {meta.pop('generated-by', GENERATOR)}"]
    for k in sorted(meta):
        lines.append(f"# {k}: {meta[k]}")
    return lines


def _render(meta, header, rows):
    out = io.StringIO()
    for line in _meta_lines(meta):
        out.write(line + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return out.getvalue()


def _write_text(path, text):
    with atomic_open(path, "w") as f:
        f.write(text)


def parse_csv(text):
    """Split comment metadata from data. Returns ``(meta, header, rows)``."""
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                k, v = body.split(":", 1)
                meta[k.strip()] = v.strip()
        elif line.strip():
            lines.append(line)
    if not lines:
        raise FormatError("CSV has no header row")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    rows = [r for r in reader]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise FormatError(f"row {i + 1} has {len(r)} fields, expected {len(header)}")
    return meta, header, rows


def histogram_csv(h: CorrelationHistogram, meta=None):
    g2 = h.g2 if h.g2 is not None else np.full(h.n_bins, np.nan)
    sig = h.g2_sigma if h.g2_sigma is not None else np.full(h.n_bins, np.nan)
    m = {
        "format": f"histogram-v{HISTOGRAM_CSV_VERSION}",
        "channels": f"{h.channel_pair[0]},{h.channel_pair[1]}",
        "total-tags": f"{h.total_tags[0]},{h.total_tags[1]}",
        "span-ps": h.acquisition_span,
        "normalization": h.normalization,
    }
    m.update(meta or {})
    e = h.bin_edges
    int_edges = np.all(e == np.round(e))
    rows = []
    for i in range(h.n_bins):
        lo, hi = (int(e[i]), int(e[i + 1])) if int_edges else (e[i], e[i + 1])
        rows.append((h.bin_centers[i], lo, hi, int(h.counts[i]), g2[i], sig[i]))
    return _render(m, ["tau_ps", "lo_ps", "hi_ps", "counts", "g2", "g2_sigma"], rows)


def write_histogram_csv(path, h, meta=None):
    _write_text(path, histogram_csv(h, meta))


def read_histogram_csv(path):
    """Returns ``(columns_dict, meta)`` with float arrays per column."""
    with open(path, newline="") as f:
        meta, header, rows = parse_csv(f.read())
    need = {"tau_ps", "counts"}
    if not need <= set(header):
        raise FormatError(f"histogram CSV lacks columns {sorted(need - set(header))}")
    return _columns(header, rows), meta


def _columns(header, rows):
    try:
        arr = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise FormatError(f"non-numeric CSV field: {exc}") from None
    return {name: arr[:, i] for i, name in enumerate(header)}


def read_data_csv(path):
    """Generic numeric CSV (x, y[, sigma] or any named columns)."""
    with open(path, newline="") as f:
        meta, header, rows = parse_csv(f.read())
    return _columns(header, rows), meta


def write_data_csv(path, columns: dict, meta=None):
    names = list(columns)
    rows = zip(*(np.asarray(columns[n]) for n in names))
    _write_text(path, _render(meta, names, rows))


def write_profile_csv(path, profile, meta=None):
    m = {"format": f"profile-v{PROFILE_CSV_VERSION}", "dose-cm2": _fmt(profile.dose)}
    m.update(meta or {})
    rows = zip(profile.depth_grid, profile.concentration)
    _write_text(path, _render(m, ["depth_nm", "concentration_cm3"], rows))


def read_profile_csv(path):
    cols, meta = read_data_csv(path)
    if "depth_nm" not in cols or "concentration_cm3" not in cols:
        raise FormatError("profile CSV needs depth_nm and concentration_cm3 columns")
    p = Profile(cols["depth_nm"], cols["concentration_cm3"], float(meta.get("dose-cm2", "nan")))
    if not np.isfinite(p.dose):
        p = Profile(p.depth_grid, p.concentration, p.integral())
    return p, meta
