"""Artifact serialization: Matrix Market, CSV, JSON, and config hashing.

Every writer embeds a provenance header (config hash plus run metadata) so
outputs are traceable and reruns with identical configs are byte-stable.
"""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
from scipy.io import mmwrite

__all__ = [
    "config_hash",
    "write_matrix_market",
    "write_spectrum_csv",
    "write_eigenvectors",
    "write_survival_csv",
    "write_json_report",
    "write_slice_csv",
]


def config_hash(config_dict):
    """Stable short hash of a JSON-serializable config."""
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _header_lines(header):
    return [f"{k}: {v}" for k, v in header.items()]


def write_matrix_market(path, matrix, header):
    """Sparse matrix in coordinate format with a provenance comment block."""
    comment = "\n".join(_header_lines(header))
    mmwrite(str(path), matrix, comment=comment)


def write_spectrum_csv(path, report, header):
    """Spectrum report rows: index, Re, Im, residual, companion link, |c|."""
    comp_of = {}
    comp_c = {}
    for (i, _k), info in report.companions.items():
        comp_of[i] = info["of"]
        comp_c[i] = info["corr"]
    with open(path, "w", newline="") as fh:
        for line in _header_lines(header):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["index", "re", "im", "residual", "converged", "companion_of", "abs_corr", "flags"])
        for i, p in enumerate(report.pairs):
            w.writerow([
                i, f"{p.eigenvalue.real:.12e}", f"{p.eigenvalue.imag:.12e}",
                f"{p.residual:.3e}", int(p.converged),
                comp_of.get(i, ""), f"{comp_c[i]:.4f}" if i in comp_c else "",
                "|".join(p.flags),
            ])


def write_eigenvectors(path, report, grid_info, header):
    """Eigenvectors as a complex ``.npy`` stack plus a JSON sidecar.

    The array is ``(n_pairs, n_slices, n_boxes)`` slice-major; the sidecar
    records the grid layout needed to interpret it.
    """
    path = Path(path)
    ns = grid_info["n_slices"]
    nb = grid_info["n_boxes"]
    stack = np.stack([p.vector.reshape(ns, nb) for p in report.pairs])
    np.save(path, stack)
    sidecar = dict(header)
    sidecar.update(grid_info)
    sidecar["eigenvalues"] = [[p.eigenvalue.real, p.eigenvalue.imag] for p in report.pairs]
    sidecar["residuals"] = [p.residual for p in report.pairs]
    sidecar["array_file"] = path.name if path.suffix == ".npy" else path.name + ".npy"
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)


def write_survival_csv(path, times, fractions, header):
    with open(path, "w", newline="") as fh:
        for line in _header_lines(header):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["t", "survivor_fraction"])
        for t, f in zip(times, fractions):
            w.writerow([f"{t:.10g}", f"{f:.10g}"])


def write_json_report(path, payload, header):
    doc = {"header": dict(header), **payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def write_slice_csv(path, partition, values, header):
    """Piecewise-constant box field as centroid rows ``(x..., value)``."""
    cents = partition.centroids()
    with open(path, "w", newline="") as fh:
        for line in _header_lines(header):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow([f"x{a}" for a in range(partition.dim)] + ["value"])
        for c, v in zip(cents, values):
            w.writerow([f"{x:.10g}" for x in c] + [f"{v:.12e}"])
