"""Checkpoint container.

A checkpoint is an uncompressed ``.npz`` archive (a zip of ``.npy`` files, each
carrying its own dtype, byte order and shape header):

* ``param/<name>`` -- one little-endian float64 array per model parameter
* ``meta`` -- UTF-8 JSON, stored as a uint8 array, with keys ``format``,
  ``version``, ``config``, ``sizes`` (vocabulary sizes), ``vocab`` (optional
  vocabulary line lists) and ``extra`` (free-form)

Loading refuses archives with another format tag or a newer version, and
checks every parameter name and shape against a freshly built model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .data import Vocabularies
from .errors import ConfigurationError
from .model import Transducer

FORMAT = "hardmono-checkpoint"
VERSION = 1


def save_checkpoint(path, model: Transducer, vocab: Vocabularies | None = None, extra: dict | None = None) -> None:
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "sizes": [model.n_source, model.n_target, model.n_tags],
        "vocab": vocab.to_dict() if vocab is not None else None,
        "extra": extra or {},
    }
    arrays = {f"param/{name}": p.data.astype("<f8") for name, p in model.named_parameters().items()}
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def read_meta(path) -> dict:
    with np.load(path, allow_pickle=False) as archive:
        return _meta(archive)


def _meta(archive) -> dict:
    if "meta" not in archive.files:
        raise ConfigurationError("checkpoint has no metadata entry")
    meta = json.loads(archive["meta"].tobytes().decode("utf-8"))
    if meta.get("format") != FORMAT:
        raise ConfigurationError(f"unknown checkpoint format {meta.get('format')!r}")
    if int(meta.get("version", -1)) > VERSION:
        raise ConfigurationError(f"checkpoint version {meta['version']} is newer than supported {VERSION}")
    return meta


def load_checkpoint(path) -> tuple[Transducer, Vocabularies | None, dict]:
    with np.load(path, allow_pickle=False) as archive:
        meta = _meta(archive)
        config = ModelConfig.from_dict(meta["config"])
        model = Transducer(config, *meta["sizes"])
        params = model.named_parameters()
        stored = {k[len("param/"):] for k in archive.files if k.startswith("param/")}
        if stored != set(params):
            missing, unexpected = set(params) - stored, stored - set(params)
            raise ConfigurationError(f"checkpoint parameters mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            value = archive[f"param/{name}"]
            if value.shape != p.shape:
                raise ConfigurationError(f"parameter {name}: stored shape {value.shape}, model expects {p.shape}")
            p.data = value.astype(np.float64)
    vocab = Vocabularies.from_dict(meta["vocab"]) if meta.get("vocab") else None
    return model, vocab, meta.get("extra", {})
