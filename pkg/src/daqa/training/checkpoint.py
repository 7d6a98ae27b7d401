"""Versioned checkpoint container: parameters, optimizer moments, vocab, rng.

Serialized as an npz archive written deterministically (fixed zip metadata)
so identical states produce identical bytes. Writes are atomic via a temp
file and rename.
"""

from __future__ import annotations

import io
import json
import os
import zipfile
from pathlib import Path

import numpy as np

from ..dataio.vocab import Vocabulary
from ..diffcore import Tensor
from ..model.config import EncoderConfig

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def _write_npz_deterministic(path: Path, arrays: dict[str, np.ndarray]) -> None:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            payload = io.BytesIO()
            np.lib.format.write_array(payload, np.ascontiguousarray(arr))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, payload.getvalue())
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


def save_checkpoint(path: str | Path, *, theta: dict[str, Tensor],
                    phi: dict[str, Tensor], config: EncoderConfig,
                    vocab: Vocabulary, step: int, epoch: int,
                    best_val_f1: float, rng_state: dict | None = None,
                    opt_theta_arrays: dict[str, np.ndarray] | None = None,
                    opt_phi_arrays: dict[str, np.ndarray] | None = None,
                    extra_meta: dict | None = None) -> None:
    path = Path(path)
    meta = {
        "format_version": FORMAT_VERSION,
        "encoder_config": config.to_dict(),
        "vocab_tokens": vocab.id_to_token[4:],
        "vocab_hash": vocab.content_hash(),
        "step": step,
        "epoch": epoch,
        "best_val_f1": best_val_f1,
        "rng_state": rng_state,
        "theta_names": list(theta),
        "phi_names": list(phi),
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays: dict[str, np.ndarray] = {
        "meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"),
                              dtype=np.uint8),
    }
    for name, t in theta.items():
        arrays[f"theta/{name}"] = t.data
    for name, t in phi.items():
        arrays[f"phi/{name}"] = t.data
    for prefix, opt in (("opt_theta", opt_theta_arrays), ("opt_phi", opt_phi_arrays)):
        if opt is not None:
            for name, arr in opt.items():
                arrays[f"{prefix}/{name}"] = arr
    _write_npz_deterministic(path, arrays)


class LoadedCheckpoint:
    def __init__(self, meta: dict, theta: dict[str, Tensor], phi: dict[str, Tensor],
                 opt_theta_arrays: dict[str, np.ndarray],
                 opt_phi_arrays: dict[str, np.ndarray]):
        self.meta = meta
        self.theta = theta
        self.phi = phi
        self.opt_theta_arrays = opt_theta_arrays
        self.opt_phi_arrays = opt_phi_arrays

    @property
    def config(self) -> EncoderConfig:
        return EncoderConfig.from_dict(self.meta["encoder_config"])

    @property
    def vocab(self) -> Vocabulary:
        return Vocabulary(self.meta["vocab_tokens"])


def load_checkpoint(path: str | Path,
                    expected_config: EncoderConfig | None = None) -> LoadedCheckpoint:
    """Load and validate; mismatched version/config or truncation raise."""
    path = Path(path)
    try:
        with np.load(path) as archive:
            data = {name: archive[name] for name in archive.files}
    except (OSError, ValueError, KeyError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if "meta" not in data:
        raise CheckpointError(f"{path} is not a checkpoint (no meta entry)")
    meta = json.loads(bytes(data["meta"]).decode("utf-8"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format {meta.get('format_version')} != {FORMAT_VERSION}")
    config = EncoderConfig.from_dict(meta["encoder_config"])
    if expected_config is not None and config != expected_config:
        raise CheckpointError("checkpoint encoder config does not match expectation")

    def collect(prefix: str, names: list[str]) -> dict[str, Tensor]:
        out = {}
        for name in names:
            key = f"{prefix}/{name}"
            if key not in data:
                raise CheckpointError(f"checkpoint missing tensor {key}")
            out[name] = Tensor(np.array(data[key]), requires_grad=True)
        return out

    theta = collect("theta", meta["theta_names"])
    phi = collect("phi", meta["phi_names"])
    opt_theta = {k.split("/", 1)[1]: np.array(v) for k, v in data.items()
                 if k.startswith("opt_theta/")}
    opt_phi = {k.split("/", 1)[1]: np.array(v) for k, v in data.items()
               if k.startswith("opt_phi/")}
    return LoadedCheckpoint(meta, theta, phi, opt_theta, opt_phi)
