"""Persistence and ingestion: JSONL packet records, channel imports,
histogram/PER CSVs, AWGN reference CSVs and fit/calibration JSON."""

import csv
import json

import numpy as np

from eesm_kit.channel import ChannelRealization, svd_precoder
from eesm_kit.eesm import AwgnPerReference, EesmCalibration
from eesm_kit.pipeline import PacketRecord


class IngestError(ValueError):
    """Malformed persisted data; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# ---------------------------------------------------------------------------
# packet records (JSONL)
# ---------------------------------------------------------------------------

def record_to_dict(rec: PacketRecord) -> dict:
    return {
        "packet": rec.packet,
        "snr_db": rec.snr_db,
        "sigma_e2": rec.sigma_e2,
        "gamma": np.asarray(rec.gamma, dtype=float).tolist(),
        "error": rec.error,
        "gamma_eff": rec.gamma_eff,
        "flow": rec.flow,
    }


def write_records_jsonl(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def _parse_record(obj, line, expected_shape=None) -> PacketRecord:
    if not isinstance(obj, dict):
        raise IngestError("record must be a JSON object", line)
    try:
        gamma = np.asarray(obj["gamma"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"bad or missing gamma grid: {exc}", line) from exc
    if gamma.ndim != 2:
        raise IngestError(f"gamma must be 2-D, got shape {gamma.shape}", line)
    if expected_shape is not None and gamma.shape != tuple(expected_shape):
        raise IngestError(
            f"gamma shape {gamma.shape} does not match configured "
            f"{tuple(expected_shape)}", line,
        )
    if np.any(gamma <= 0) or not np.all(np.isfinite(gamma)):
        raise IngestError("gamma entries must be positive and finite", line)
    error = obj.get("error")
    if error not in (0, 1):
        raise IngestError(f"error state must be 0 or 1, got {error!r}", line)
    try:
        return PacketRecord(
            packet=int(obj.get("packet", line - 1)),
            snr_db=float(obj.get("snr_db", 0.0)),
            sigma_e2=float(obj.get("sigma_e2", 0.0)),
            gamma=gamma,
            error=int(error),
            gamma_eff=obj.get("gamma_eff"),
            flow=obj.get("flow", "simulation"),
        )
    except (TypeError, ValueError) as exc:
        raise IngestError(str(exc), line) from exc


def read_records_jsonl(path, expected_shape=None):
    """Read packet records; also the ingestion point for external
    {gamma grid, error state} traces (only gamma and error are
    required, other fields default)."""
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON: {exc}", line_no) from exc
            records.append(_parse_record(obj, line_no, expected_shape))
    if not records:
        raise IngestError(f"no records found in {path}")
    return records


# ---------------------------------------------------------------------------
# channel import/export (JSONL)
# ---------------------------------------------------------------------------

def _matrix_to_pairs(m):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def _pairs_to_matrix(rows, line):
    try:
        arr = np.asarray(rows, dtype=float)
    except ValueError as exc:
        raise IngestError(f"bad complex matrix: {exc}", line) from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise IngestError(
            f"complex matrix must be nested [re, im] pairs, got shape {arr.shape}",
            line,
        )
    return arr[..., 0] + 1j * arr[..., 1]


def write_channels_jsonl(realizations, path):
    with open(path, "w") as fh:
        for ch in realizations:
            obj = {
                "packet": ch.packet_index,
                "H": [_matrix_to_pairs(h_i) for h_i in ch.h],
                "F": [_matrix_to_pairs(f_i) for f_i in ch.f],
            }
            fh.write(json.dumps(obj) + "\n")


def read_channels_jsonl(path, n_s):
    """Ingest externally generated channels; missing precoders are
    rebuilt with the SVD precoder."""
    out = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON: {exc}", line_no) from exc
            if "H" not in obj:
                raise IngestError("missing H", line_no)
            h = np.stack([_pairs_to_matrix(m, line_no) for m in obj["H"]])
            if "F" in obj and obj["F"] is not None:
                f = np.stack([_pairs_to_matrix(m, line_no) for m in obj["F"]])
                if f.shape[-1] != n_s or f.shape[-2] != h.shape[-1]:
                    raise IngestError(
                        f"F shape {f.shape} inconsistent with H {h.shape} "
                        f"and n_s={n_s}", line_no,
                    )
            else:
                f = svd_precoder(h, n_s)
            out.append(ChannelRealization(
                h=h, f=f, packet_index=int(obj.get("packet", len(out))), seed=-1,
            ))
    if not out:
        raise IngestError(f"no channels found in {path}")
    return out


# ---------------------------------------------------------------------------
# CSV / JSON artifacts
# ---------------------------------------------------------------------------

def write_histogram_csv(samples, path, bins=50):
    density, edges = np.histogram(np.asarray(samples, dtype=float),
                                  bins=bins, density=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "density"])
        for left, right, d in zip(edges[:-1], edges[1:], density):
            writer.writerow([repr(float(left)), repr(float(right)),
                             repr(float(d))])


def write_per_vs_snr_csv(rows, path):
    """rows: iterable of (snr_db, per) pairs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snr_db", "per"])
        for snr_db, per in rows:
            writer.writerow([repr(float(snr_db)), repr(float(per))])


def load_awgn_reference_csv(path) -> AwgnPerReference:
    """Load a tabulated AWGN PER reference: header snr_db,per, ascending."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["snr_db", "per"]:
            raise IngestError(f"expected header 'snr_db,per', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (IndexError, ValueError) as exc:
                raise IngestError(f"bad row {row}: {exc}", line_no) from exc
    if not rows:
        raise IngestError(f"no data rows in {path}")
    return AwgnPerReference(table=np.asarray(rows))


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_gamma_eff_json(samples, path):
    write_json({"gamma_eff": [float(v) for v in samples]}, path)


def read_gamma_eff_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    return np.asarray(obj["gamma_eff"], dtype=float)


def calibration_to_dict(cal: EesmCalibration) -> dict:
    return {
        "beta": cal.beta,
        "alpha": cal.alpha,
        "objective_value": cal.objective_value,
        "search_range": list(cal.search_range),
        "degenerate": cal.degenerate,
        "n_records": cal.n_records,
        "objective_mode": cal.objective_mode,
    }
