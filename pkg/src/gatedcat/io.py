"""File formats: CSV exports, density-matrix JSON, record binary layout.

Numeric CSV content is formatted with ``repr`` (shortest round-trip), so a
rerun with the same seed and configuration produces byte-identical files.

Record binary layout (all little-endian):
    magic   8 bytes  b"GCATREC1"
    u32     version (currently 1)
    u32     n_records
    u32     n_samples
    f64     t0_ns, dt_ns
    then per record: u64 event_id, f64 theta_rad, f64 shift_truth_ns,
    f64 samples[n_samples].
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .fock import FockDensity
from .modes import ModeFunction, TimeGrid
from .tomography import HomodyneRecord, QuadratureSampleSet, TomographyResult

RECORD_MAGIC = b"GCATREC1"
RECORD_VERSION = 1


def fmt(v) -> str:
    """Round-trip text for one CSV cell."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_modes_csv(path, named_modes: dict[str, ModeFunction]) -> None:
    """Columns t_ns then <name>_re, <name>_im per mode (common grid)."""
    grids = {m.grid for m in named_modes.values()}
    if len(grids) != 1:
        raise ValueError("modes must share one grid")
    grid = grids.pop()
    header = ["t_ns"]
    cols = [grid.times]
    for name, mode in named_modes.items():
        header += [f"{name}_re_per_sqrt_ns", f"{name}_im_per_sqrt_ns"]
        cols += [mode.values.real, mode.values.imag]
    write_csv(path, header, zip(*cols))


def write_spectrum_csv(path, spectrum: np.ndarray) -> None:
    write_csv(path, ["index", "eigenvalue"], ((i, s) for i, s in enumerate(spectrum)))


def write_kernel_csv(path, grid: TimeGrid, matrix: np.ndarray) -> None:
    t = grid.times
    rows = (
        (t[i], t[j], matrix[i, j].real, complex(matrix[i, j]).imag)
        for i in range(len(t))
        for j in range(len(t))
    )
    write_csv(path, ["t1_ns", "t2_ns", "re_per_ns", "im_per_ns"], rows)


# ---------------------------------------------------------------------------
# density matrices and tomography results


def density_to_json_dict(rho: FockDensity) -> dict:
    """Row-major [re, im] pairs with an n_cut header."""
    m = rho.matrix
    pairs = [[float(z.real), float(z.imag)] for z in m.ravel()]
    return {"n_cut": rho.n_cut, "layout": "row-major-complex-pairs", "matrix": pairs}


def density_from_json_dict(d: dict) -> FockDensity:
    n = int(d["n_cut"])
    pairs = np.asarray(d["matrix"], float)
    if pairs.shape != (n * n, 2):
        raise ValueError(f"expected {n * n} complex pairs, got shape {pairs.shape}")
    return FockDensity((pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n))


def tomography_result_to_json_dict(res: TomographyResult) -> dict:
    return {
        "rho": density_to_json_dict(res.rho_hat),
        "log_likelihood": [float(v) for v in res.log_likelihood],
        "converged": bool(res.converged),
        "n_iter": int(res.n_iter),
        "w_min": float(res.w_min),
        "w_min_location": [float(res.w_min_location[0]), float(res.w_min_location[1])],
        "pn_dist": [float(v) for v in res.pn_dist],
        "bootstrap_mean": None if res.bootstrap_mean is None else float(res.bootstrap_mean),
        "bootstrap_std": None if res.bootstrap_std is None else float(res.bootstrap_std),
    }


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# homodyne records and sample sets


def write_records_binary(path, records: Sequence[HomodyneRecord]) -> None:
    if not records:
        raise ValueError("refusing to write an empty record file")
    grid = records[0].grid
    with open(path, "wb") as fh:
        fh.write(RECORD_MAGIC)
        fh.write(struct.pack("<III", RECORD_VERSION, len(records), grid.n_samples))
        fh.write(struct.pack("<dd", grid.t0, grid.dt))
        for r in records:
            if r.grid != grid:
                raise ValueError("records live on different grids")
            fh.write(struct.pack("<Qdd", r.event_id, r.theta, r.shift_truth))
            fh.write(np.asarray(r.samples, "<f8").tobytes())


def read_records_binary(path) -> list[HomodyneRecord]:
    raw = Path(path).read_bytes()
    if raw[:8] != RECORD_MAGIC:
        raise ValueError("not a record file (bad magic)")
    version, n_records, n_samples = struct.unpack_from("<III", raw, 8)
    if version != RECORD_VERSION:
        raise ValueError(f"unsupported record file version {version}")
    t0, dt = struct.unpack_from("<dd", raw, 20)
    grid = TimeGrid(t0, dt, n_samples)
    off = 36
    rec_bytes = 24 + 8 * n_samples
    records = []
    for _ in range(n_records):
        event_id, theta, shift = struct.unpack_from("<Qdd", raw, off)
        samples = np.frombuffer(raw, "<f8", n_samples, off + 24)
        records.append(HomodyneRecord(event_id, theta, grid, samples.copy(), shift))
        off += rec_bytes
    return records


def write_records_csv(path, records: Sequence[HomodyneRecord]) -> None:
    """Long format, one row per (event, time sample)."""

    def rows():
        for r in records:
            t = r.grid.times
            for k in range(t.size):
                yield (r.event_id, r.theta, t[k], r.samples[k])

    write_csv(path, ["event_id", "theta_rad", "t_ns", "quadrature"], rows())


def write_samples_csv(path, samples: QuadratureSampleSet) -> None:
    rows = zip(samples.event_ids, samples.thetas, samples.values)
    write_csv(path, ["event_id", "theta_rad", "x"], rows)


def read_samples_csv(path) -> QuadratureSampleSet:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].split(",")[:3] != ["event_id", "theta_rad", "x"]:
        raise ValueError("not a quadrature-sample CSV")
    ids, thetas, values = [], [], []
    for line in lines[1:]:
        a, b, c = line.split(",")
        ids.append(int(a))
        thetas.append(float(b))
        values.append(float(c))
    return QuadratureSampleSet(
        np.asarray(thetas), np.asarray(values), np.asarray(ids, np.int64), "csv"
    )
