"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Subcommand handlers. Each takes the merged RunConfig and does one job."""

from collections.abc import Callable
from pathlib import Path
from typing import Any

from embnmt.app.core.config_manager import settings
from embnmt.app.core.errors import ConfigurationError, UsageError
from embnmt.app.core.logger import logger
from embnmt.app.schemas.corpus import ParallelCorpus, ToyCorpusSpec
from embnmt.app.schemas.evaluation import EvalReport
from embnmt.app.schemas.run import RunConfig
from embnmt.app.schemas.training import StrategyKind, TrainConfig, TrainingStrategy
from embnmt.app.services.checkpoint import load_checkpoint, verify_vocabularies
from embnmt.app.services.corpus import filter_by_length, load_parallel, make_batches
from embnmt.app.services.embeddings import EmbeddingStore, align_to_vocab, load_text_embeddings, precompute_distances
from embnmt.app.services.evaluation import compare_reports, evaluate
from embnmt.app.services.inference import translate_corpus
from embnmt.app.services.toy_corpus import oov_truncated_vocab_size, write_toy_corpus
from embnmt.app.services.trainer import RunResult, TrainingData, run_strategy
from embnmt.app.services.vocab import Vocabulary, annotate_oov, build_vocab, load_vocab, save_vocab

STRATEGY_KEYS = {'strategy': 'kind', 'pretrain_termination': 'pretrain_termination', 'pretrain_epochs': 'pretrain_epochs'}
STRATEGY_KEYS |= {'emb_weight': 'emb_weight', 'allow_emb_from_scratch': 'allow_emb_from_scratch'}
FILE_KEYS = ('checkpoint', 'input', 'hypotheses', 'references', 'vocab_src', 'vocab_tgt')
PREFIX_KEYS = ('train', 'valid')
PATH_KEYS = (*FILE_KEYS, *PREFIX_KEYS, 'out', 'output', 'data', 'side_by_side')
COMPARISON_FILE = 'comparison.tsv'


def _split_list(value: Any, cast: Callable[[str], Any]) -> list:
    if isinstance(value, list | tuple):
        return [cast(v) for v in value]
    return [cast(part.strip()) for part in str(value).split(',') if part.strip()]


def _validate_paths(paths: dict[str, Path], embeddings: Path | None) -> None:
    for key in FILE_KEYS:
        if key in paths and not paths[key].is_file():
            raise UsageError(f'--{key.replace("_", "-")}: file not found: {paths[key]}')
    for key in PREFIX_KEYS:
        if key in paths:
            for suffix in ('.src', '.tgt'):
                candidate = paths[key].with_name(paths[key].name + suffix)
                if not candidate.is_file():
                    raise UsageError(f'--{key}: file not found: {candidate}')
    if 'data' in paths:
        for split in ('train', 'valid', 'test'):
            for suffix in ('.src', '.tgt'):
                if not (paths['data'] / f'{split}{suffix}').is_file():
                    raise UsageError(f'--data: {paths["data"] / (split + suffix)} not found')
    if embeddings is not None and not embeddings.is_file():
        raise UsageError(f'--embeddings: file not found: {embeddings}')


def build_run_config(command: str, options: dict[str, Any]) -> RunConfig:
    """Split merged options into the typed pieces the handlers need and validate input paths."""
    options = {key: value for key, value in options.items() if value is not None}
    toy = None
    if command == 'gen-toy':
        toy_values = {key: options.pop(key) for key in list(options) if key in ToyCorpusSpec.model_fields}
        if 'synonym_weights' in toy_values:
            toy_values['synonym_weights'] = _split_list(toy_values['synonym_weights'], float)
        toy = ToyCorpusSpec(**toy_values)

    train_overrides = {key: options.pop(key) for key in list(options) if key in TrainConfig.model_fields}
    train = TrainConfig.from_settings(settings, **train_overrides)

    strategy_values = {field: options.pop(key) for key, field in STRATEGY_KEYS.items() if key in options}
    strategy_values.setdefault('emb_weight', settings.EMB_WEIGHT)
    strategy = TrainingStrategy(**strategy_values) if command in ('train', 'compare') else None

    paths = {key: Path(options.pop(key)) for key in PATH_KEYS if key in options}
    embeddings = Path(options.pop('embeddings')) if 'embeddings' in options else None
    _validate_paths(paths, embeddings)
    return RunConfig(
        command=command,
        train=train,
        strategy=strategy,
        toy=toy,
        source_vocab_size=options.pop('source_vocab_size', settings.SOURCE_VOCAB_SIZE),
        target_vocab_size=options.pop('target_vocab_size', settings.TARGET_VOCAB_SIZE),
        max_tokens=options.pop('max_tokens', settings.MAX_TOKENS),
        embeddings=embeddings,
        oov_reference_vectors=bool(options.pop('oov_reference_vectors', False)),
        paths=paths,
        options=options,
    )


def _require(run: RunConfig, *keys: str) -> None:
    missing = [key for key in keys if key not in run.paths]
    if missing:
        raise UsageError(f'{run.command}: missing required option(s) ' + ', '.join(f'--{k.replace("_", "-")}' for k in missing))


def _read_sentences(path: Path) -> list[list[str]]:
    return [line.split() for line in path.read_text(encoding='utf-8').splitlines()]


def _load_store(run: RunConfig, vocab_tgt: Vocabulary) -> EmbeddingStore | None:
    if run.embeddings is None:
        return None
    raw = load_text_embeddings(run.embeddings)
    store = align_to_vocab(raw, vocab_tgt, run.train.seed, keep_oov=run.oov_reference_vectors, distance_dtype=settings.DISTANCE_DTYPE)
    if store.vocab_size <= settings.DISTANCE_CACHE_PRECOMPUTE_LIMIT:
        precompute_distances(store)
    return store


def cmd_gen_toy(run: RunConfig) -> list[Path]:
    _require(run, 'out')
    spec = run.toy or ToyCorpusSpec()
    written = write_toy_corpus(spec, run.train.seed, run.paths['out'])
    logger.info(f'Target vocabulary size {oov_truncated_vocab_size(spec)} leaves the rarest synonym of each cluster out of vocabulary')
    for path in written:
        print(path)
    return written


def cmd_build_vocab(run: RunConfig) -> Vocabulary:
    _require(run, 'input', 'out')
    max_size = int(run.options.get('max_size', run.target_vocab_size))
    vocab = build_vocab(_read_sentences(run.paths['input']), max_size)
    save_vocab(vocab, run.paths['out'])
    print(f'{run.paths["out"]}\t{vocab.size}')
    return vocab


def _train_once(
    run: RunConfig,
    train: ParallelCorpus,
    valid: ParallelCorpus,
    strategy: TrainingStrategy,
    config: TrainConfig,
    target_vocab_size: int,
    out_dir: Path,
) -> tuple[RunResult, Vocabulary, Vocabulary, EmbeddingStore | None]:
    vocab_src = load_vocab(run.paths['vocab_src']) if 'vocab_src' in run.paths else build_vocab(train.sources(), run.source_vocab_size)
    vocab_tgt = load_vocab(run.paths['vocab_tgt']) if 'vocab_tgt' in run.paths else build_vocab(train.targets(), target_vocab_size)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_vocab(vocab_src, out_dir / 'vocab.src')
    save_vocab(vocab_tgt, out_dir / 'vocab.tgt')

    store = _load_store(run, vocab_tgt)
    if strategy.requires_embeddings and store is None:
        raise UsageError(f'strategy {strategy.kind.value} needs --embeddings')
    reference_id = store.reference_id if store is not None and run.oov_reference_vectors else None
    data = TrainingData(
        train=make_batches(train, vocab_src, vocab_tgt, config.batch_size, shuffle_seed=config.seed, reference_id=reference_id),
        valid=make_batches(valid, vocab_src, vocab_tgt, config.batch_size, reference_id=reference_id),
        vocab_src=vocab_src,
        vocab_tgt=vocab_tgt,
    )
    header = {**run.echo(), 'target_vocab_size': str(target_vocab_size)}
    result = run_strategy(data, config, strategy, store, out_dir, log_header=header)
    return result, vocab_src, vocab_tgt, store


def cmd_train(run: RunConfig) -> RunResult:
    _require(run, 'train', 'valid', 'out')
    if run.strategy.requires_embeddings and run.embeddings is None:
        raise UsageError(f'strategy {run.strategy.kind.value} needs --embeddings')
    train = filter_by_length(load_parallel(f'{run.paths["train"]}.src', f'{run.paths["train"]}.tgt', 'train'), run.max_tokens)
    valid = filter_by_length(load_parallel(f'{run.paths["valid"]}.src', f'{run.paths["valid"]}.tgt', 'valid'), run.max_tokens)
    result, *_ = _train_once(run, train, valid, run.strategy, run.train, run.target_vocab_size, run.paths['out'])
    print(result.best.path)
    return result


def cmd_translate(run: RunConfig) -> list[list[str]]:
    _require(run, 'checkpoint', 'input', 'output')
    checkpoint = load_checkpoint(run.paths['checkpoint'])
    verify_vocabularies(
        checkpoint,
        load_vocab(run.paths['vocab_src']) if 'vocab_src' in run.paths else None,
        load_vocab(run.paths['vocab_tgt']) if 'vocab_tgt' in run.paths else None,
    )
    sentences = _read_sentences(run.paths['input'])
    outputs = translate_corpus(
        checkpoint.params,
        checkpoint.vocab_src,
        checkpoint.vocab_tgt,
        sentences,
        beam_width=int(run.options.get('beam', 1)),
        alpha=float(run.options.get('alpha', 0.0)),
        max_len=run.options.get('max_len'),
        threads=run.options.get('threads'),
    )
    output = run.paths['output']
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(''.join(' '.join(tokens) + '\n' for tokens in outputs), encoding='utf-8')
    return outputs


def _target_vocab(run: RunConfig, purpose: str) -> Vocabulary:
    if 'vocab_tgt' in run.paths:
        return load_vocab(run.paths['vocab_tgt'])
    if 'checkpoint' in run.paths:
        return load_checkpoint(run.paths['checkpoint']).vocab_tgt
    raise UsageError(f'{purpose} needs --vocab-tgt or --checkpoint')


def write_side_by_side(path: Path, hypotheses: list[list[str]], references: list[list[str]], vocab_tgt: Vocabulary) -> None:
    """One ``reference<TAB>hypothesis`` line per sentence; OOV reference words read ``<unk:word>``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [' '.join(annotate_oov(vocab_tgt, ref)) + '\t' + ' '.join(hyp) + '\n' for hyp, ref in zip(hypotheses, references, strict=True)]
    path.write_text(''.join(lines), encoding='utf-8')


def cmd_evaluate(run: RunConfig) -> EvalReport:
    _require(run, 'hypotheses', 'references')
    hypotheses = _read_sentences(run.paths['hypotheses'])
    references = _read_sentences(run.paths['references'])
    vocab_tgt = None
    store = None
    if run.embeddings is not None:
        vocab_tgt = _target_vocab(run, 'near-miss scoring')
        store = _load_store(run, vocab_tgt)
    report = evaluate(
        hypotheses,
        references,
        store=store,
        k=int(run.options.get('k', 5)),
        smooth=bool(run.options.get('smooth', False)),
        use_oov_vectors=run.oov_reference_vectors,
    )
    if 'side_by_side' in run.paths:
        write_side_by_side(run.paths['side_by_side'], hypotheses, references, vocab_tgt or _target_vocab(run, '--side-by-side'))
    print(report.to_record() if run.options.get('record') else report.to_text())
    return report


def cmd_compare(run: RunConfig) -> Path:
    """Train each strategy per (target vocabulary size, seed), score the test split, tabulate."""
    _require(run, 'data', 'out')
    if run.embeddings is None:
        raise UsageError('compare needs --embeddings')
    strategies = _split_list(run.options.get('strategies', 'ent,emb-after-ent'), StrategyKind)
    seeds = _split_list(run.options.get('seeds', str(run.train.seed)), int)
    vocab_sizes = _split_list(run.options.get('target_vocab_sizes', str(run.target_vocab_size)), int)
    if not strategies or not seeds or not vocab_sizes:
        raise ConfigurationError('compare needs at least one strategy, seed and target vocabulary size')

    data_dir, out_dir = run.paths['data'], run.paths['out']
    train = filter_by_length(load_parallel(data_dir / 'train.src', data_dir / 'train.tgt', 'train'), run.max_tokens)
    valid = filter_by_length(load_parallel(data_dir / 'valid.src', data_dir / 'valid.tgt', 'valid'), run.max_tokens)
    test = load_parallel(data_dir / 'test.src', data_dir / 'test.tgt', 'test')
    k = int(run.options.get('k', 3))

    rows = ['target_vocab\tstrategy\tseed\tbleu\tunk_rate\tnear_miss\tdelta_bleu']
    for vocab_size in vocab_sizes:
        for seed in seeds:
            config = run.train.model_copy(update={'seed': seed})
            reports: dict[StrategyKind, EvalReport] = {}
            for kind in strategies:
                strategy = TrainingStrategy(**{**run.strategy.model_dump(), 'kind': kind, 'phase_index': 0})
                run_dir = out_dir / f'vocab{vocab_size}' / f'seed{seed}' / kind.value
                result, vocab_src, vocab_tgt, store = _train_once(run, train, valid, strategy, config, vocab_size, run_dir)
                checkpoint = load_checkpoint(result.best.path)
                hypotheses = translate_corpus(checkpoint.params, vocab_src, vocab_tgt, test.sources())
                reports[kind] = evaluate(hypotheses, test.targets(), store=store, k=k, use_oov_vectors=run.oov_reference_vectors)
            baseline = reports.get(StrategyKind.ENT_ONLY)
            for kind, report in reports.items():
                delta = compare_reports(baseline, report).bleu if baseline is not None else 0.0
                near_miss = '' if report.near_miss_accuracy is None else f'{report.near_miss_accuracy:.4f}'
                rows.append(f'{vocab_size}\t{kind.value}\t{seed}\t{report.bleu:.2f}\t{report.unk_rate:.4f}\t{near_miss}\t{delta:+.2f}')

    out_dir.mkdir(parents=True, exist_ok=True)
    table = out_dir / COMPARISON_FILE
    table.write_text('\n'.join(rows) + '\n', encoding='utf-8')
    print(table)
    return table


HANDLERS: dict[str, Callable[[RunConfig], Any]] = {
    'gen-toy': cmd_gen_toy,
    'build-vocab': cmd_build_vocab,
    'train': cmd_train,
    'translate': cmd_translate,
    'evaluate': cmd_evaluate,
    'compare': cmd_compare,
}
