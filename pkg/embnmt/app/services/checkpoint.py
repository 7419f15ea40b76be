"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Versioned ZIP checkpoints.

Members: ``manifest.json`` (dims, vocab sizes, name/shape/offset per tensor),
``params.bin`` (little-endian float64 in manifest order), ``vocab.src``,
``vocab.tgt`` and ``state.json`` (meta, strategy, config).
"""

import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from embnmt.app.core.errors import CheckpointIntegrityError
from embnmt.app.core.logger import logger
from embnmt.app.models.params import ModelParams, params_from_arrays, parameter_shapes
from embnmt.app.schemas.checkpoint import FORMAT_VERSION, CheckpointManifest, CheckpointState, TensorEntry
from embnmt.app.services.vocab import Vocabulary, format_vocab, parse_vocab

MEMBERS = ('manifest.json', 'params.bin', 'vocab.src', 'vocab.tgt', 'state.json')
# Fixed member timestamps keep identical runs byte-identical
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)
_ITEM_SIZE = np.dtype('<f8').itemsize


@dataclass
class LoadedCheckpoint:
    params: ModelParams
    vocab_src: Vocabulary
    vocab_tgt: Vocabulary
    state: CheckpointState
    manifest: CheckpointManifest


def _write_member(archive: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    archive.writestr(info, payload)


def save_checkpoint(path: str | Path, params: ModelParams, vocab_src: Vocabulary, vocab_tgt: Vocabulary, state: CheckpointState) -> Path:
    if vocab_src.size != params.src_vocab_size or vocab_tgt.size != params.tgt_vocab_size:
        raise CheckpointIntegrityError(
            f'vocabulary sizes {vocab_src.size}/{vocab_tgt.size} do not match parameters {params.src_vocab_size}/{params.tgt_vocab_size}'
        )
    entries, chunks, offset = [], [], 0
    for name, tensor in params.tensors.items():
        raw = np.ascontiguousarray(tensor.data, dtype='<f8').tobytes()
        entries.append(TensorEntry(name=name, shape=list(tensor.shape), offset=offset))
        chunks.append(raw)
        offset += len(raw)
    manifest = CheckpointManifest(
        source_vocab_size=vocab_src.size,
        target_vocab_size=vocab_tgt.size,
        hidden_dim=params.hidden_dim,
        embed_dim=params.embed_dim,
        tensors=entries,
    )

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + '.tmp')
    with zipfile.ZipFile(tmp_path, 'w') as archive:
        _write_member(archive, 'manifest.json', manifest.model_dump_json(indent=2).encode('utf-8'))
        _write_member(archive, 'params.bin', b''.join(chunks))
        _write_member(archive, 'vocab.src', format_vocab(vocab_src).encode('utf-8'))
        _write_member(archive, 'vocab.tgt', format_vocab(vocab_tgt).encode('utf-8'))
        _write_member(archive, 'state.json', state.model_dump_json(indent=2).encode('utf-8'))
    tmp_path.replace(path)
    logger.debug(f'Saved checkpoint {path} ({params.total_size} values)')
    return path


def load_checkpoint(path: str | Path) -> LoadedCheckpoint:
    try:
        with zipfile.ZipFile(path) as archive:
            missing = [name for name in MEMBERS if name not in archive.namelist()]
            if missing:
                raise CheckpointIntegrityError(f'{path}: missing members {missing}')
            payload = {name: archive.read(name) for name in MEMBERS}
    except zipfile.BadZipFile as e:
        raise CheckpointIntegrityError(f'{path}: not a checkpoint archive ({e})')

    try:
        header = json.loads(payload['manifest.json'])
        if header.get('format_version') != FORMAT_VERSION:
            raise CheckpointIntegrityError(f'{path}: unsupported format version {header.get("format_version")}')
        manifest = CheckpointManifest.model_validate(header)
        state = CheckpointState.model_validate_json(payload['state.json'])
    except (ValueError, ValidationError) as e:
        raise CheckpointIntegrityError(f'{path}: unreadable metadata ({e})')

    vocab_src = parse_vocab(payload['vocab.src'].decode('utf-8'))
    vocab_tgt = parse_vocab(payload['vocab.tgt'].decode('utf-8'))
    if (vocab_src.size, vocab_tgt.size) != (manifest.source_vocab_size, manifest.target_vocab_size):
        raise CheckpointIntegrityError(f'{path}: stored vocabularies disagree with the manifest')

    expected = parameter_shapes(vocab_src.size, vocab_tgt.size, manifest.hidden_dim, manifest.embed_dim)
    blob = payload['params.bin']
    arrays = {}
    for entry in manifest.tensors:
        shape = tuple(entry.shape)
        if expected.get(entry.name) != shape:
            raise CheckpointIntegrityError(f'{path}: tensor {entry.name} has shape {shape}, expected {expected.get(entry.name)}')
        count = int(np.prod(shape))
        end = entry.offset + count * _ITEM_SIZE
        if end > len(blob):
            raise CheckpointIntegrityError(f'{path}: params.bin truncated at {entry.name}')
        arrays[entry.name] = np.frombuffer(blob, dtype='<f8', count=count, offset=entry.offset).reshape(shape).astype(np.float64)
    if set(arrays) != set(expected):
        raise CheckpointIntegrityError(f'{path}: tensor set differs from the model layout')

    dtype = state.config.get('dtype', 'float64')
    params = params_from_arrays({name: arrays[name].astype(dtype) for name in expected}, seed=state.config.get('seed'))
    return LoadedCheckpoint(params, vocab_src, vocab_tgt, state, manifest)


def verify_vocabularies(checkpoint: LoadedCheckpoint, vocab_src: Vocabulary | None, vocab_tgt: Vocabulary | None) -> None:
    """Externally supplied vocabularies must equal the ones stored in the checkpoint."""
    if vocab_src is not None and vocab_src != checkpoint.vocab_src:
        raise CheckpointIntegrityError('source vocabulary does not match the checkpoint')
    if vocab_tgt is not None and vocab_tgt != checkpoint.vocab_tgt:
        raise CheckpointIntegrityError('target vocabulary does not match the checkpoint')
