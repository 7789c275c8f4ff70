"""Policy checkpoints: a JSON manifest plus one flat little-endian float64 blob.

Layout of a checkpoint directory::

    manifest.json   format version, array names, shapes, byte offsets,
                    sha256 of arrays.bin, and scalar settings
    arrays.bin      concatenated arrays, C order, dtype '<f8'

Arrays are stored in float64 whatever the training precision; the manifest
records the original dtype and loading restores it.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .cpg import CpgParams
from .mlp import DenseParams
from .policy import MlpCpgPolicy, RunningNorm

FORMAT_VERSION = 1
BYTE_ORDER = "<f8"


class CheckpointError(ValueError):
    pass


def _policy_arrays(policy: MlpCpgPolicy) -> dict:
    arrays = {}
    for k, (w, b) in enumerate(zip(policy.mlp.weights, policy.mlp.biases)):
        arrays[f"mlp.w{k}"] = w
        arrays[f"mlp.b{k}"] = b
    cpg = policy.cpg
    arrays.update({"cpg.eps": cpg.eps, "cpg.phi": cpg.phi, "cpg.eta": cpg.eta,
                   "cpg.offset": cpg.offset, "norm.mean": policy.normalizer.mean,
                   "norm.var": policy.normalizer.var, "q_min": policy.q_min,
                   "q_max": policy.q_max})
    return arrays


def save_checkpoint(policy: MlpCpgPolicy, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries, blobs, offset = [], [], 0
    for name, arr in _policy_arrays(policy).items():
        data = np.ascontiguousarray(arr, dtype=BYTE_ORDER).tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset,
                        "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    blob = b"".join(blobs)
    manifest = {
        "format_version": FORMAT_VERSION,
        "byte_order": BYTE_ORDER,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "arrays": entries,
        "mlp_dtype": str(policy.mlp.weights[0].dtype),
        "n_layers": len(policy.mlp.weights),
        "fixed_f": policy.fixed_f,
        "cpg": {"gamma": policy.cpg.gamma, "dt": policy.cpg.dt,
                "symmetric": policy.cpg.symmetric},
        "normalizer": {"count": policy.normalizer.count, "enabled": policy.normalizer.enabled,
                       "clip": policy.normalizer.clip},
    }
    (path / "arrays.bin").write_bytes(blob)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_checkpoint(path) -> MlpCpgPolicy:
    path = Path(path)
    mpath, bpath = path / "manifest.json", path / "arrays.bin"
    if not mpath.is_file() or not bpath.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('format_version')}")
    blob = bpath.read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise CheckpointError("checkpoint content hash mismatch")
    arrays = {}
    for e in manifest["arrays"]:
        raw = np.frombuffer(blob, dtype=manifest["byte_order"], count=e["nbytes"] // 8,
                            offset=e["offset"])
        arrays[e["name"]] = raw.astype(np.float64).reshape(e["shape"])
    dtype = np.dtype(manifest["mlp_dtype"])
    n_layers = manifest["n_layers"]
    mlp = DenseParams([arrays[f"mlp.w{k}"].astype(dtype) for k in range(n_layers)],
                      [arrays[f"mlp.b{k}"].astype(dtype) for k in range(n_layers)])
    c = manifest["cpg"]
    cpg = CpgParams(eps=arrays["cpg.eps"], phi=arrays["cpg.phi"], eta=arrays["cpg.eta"],
                    offset=arrays["cpg.offset"], gamma=c["gamma"], dt=c["dt"],
                    symmetric=c["symmetric"])
    nm = manifest["normalizer"]
    norm = RunningNorm(mean=arrays["norm.mean"], var=arrays["norm.var"], count=nm["count"],
                       enabled=nm["enabled"], frozen=True, clip=nm["clip"])
    return MlpCpgPolicy(mlp=mlp, cpg=cpg, normalizer=norm, fixed_f=manifest["fixed_f"],
                        q_min=arrays["q_min"], q_max=arrays["q_max"])
