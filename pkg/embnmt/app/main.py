"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import argparse
import sys
from collections.abc import Sequence
from typing import Any

from pydantic import ValidationError

from embnmt.app.api.commands import HANDLERS, build_run_config
from embnmt.app.core.config_manager import load_config_file, settings
from embnmt.app.core.errors import ConfigurationError, EmbNmtError, UsageError
from embnmt.app.core.logger import logger
from embnmt.app.schemas.training import PretrainTermination, StrategyKind

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2
_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f'{self.prog}: {message}')


def _flag(parser: argparse.ArgumentParser, *names: str, **kwargs: Any) -> None:
    # Unset flags stay None so config-file values and settings can fill them
    kwargs.setdefault('default', None)
    parser.add_argument(*names, **kwargs)


def _training_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, '--strategy', choices=[kind.value for kind in StrategyKind], help='loss schedule (default ent)')
    _flag(parser, '--pretrain-termination', choices=[t.value for t in PretrainTermination])
    _flag(parser, '--pretrain-epochs', type=int)
    _flag(parser, '--emb-weight', type=float, help='weight of the embedding loss in ent+emb phases')
    _flag(parser, '--allow-emb-from-scratch', action='store_true')
    _flag(parser, '--embeddings', help='textual word2vec file for the target language')
    _flag(parser, '--oov-reference-vectors', action='store_true', help='use file vectors of OOV reference words')
    _flag(parser, '--source-vocab-size', type=int)
    _flag(parser, '--target-vocab-size', '--target-vocab', type=int)
    _flag(parser, '--vocab-src')
    _flag(parser, '--vocab-tgt')
    _flag(parser, '--max-tokens', type=int)
    _flag(parser, '--max-epochs', type=int)
    _flag(parser, '--batch-size', type=int)
    _flag(parser, '--hidden-dim', type=int)
    _flag(parser, '--embed-dim', type=int)
    _flag(parser, '--learning-rate', type=float)
    _flag(parser, '--dropout', type=float)
    _flag(parser, '--grad-clip', type=float)
    _flag(parser, '--weight-decay', type=float)
    _flag(parser, '--dtype', choices=['float64', 'float32'])


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog='embnmt', description='Neural machine translation with an embedding-distance loss.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {settings.VERSION}')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)
    commands = {}

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text)
        _flag(sub, '--config', help='flat key=value file; flags override it')
        _flag(sub, '--seed', type=int)
        commands[name] = sub
        return sub

    sub = add('gen-toy', 'write a synthetic synonym-cluster corpus and its embeddings')
    _flag(sub, '--out', help='output directory')
    _flag(sub, '--clusters', type=int)
    _flag(sub, '--cluster-size', type=int)
    _flag(sub, '--min-len', type=int)
    _flag(sub, '--max-len', type=int)
    _flag(sub, '--train-size', type=int)
    _flag(sub, '--valid-size', type=int)
    _flag(sub, '--test-size', type=int)
    _flag(sub, '--embed-dim', type=int)
    _flag(sub, '--synonym-weights', help='comma-separated relative synonym frequencies')

    sub = add('build-vocab', 'build a frequency-truncated vocabulary from one corpus side')
    _flag(sub, '--input')
    _flag(sub, '--out')
    _flag(sub, '--max-size', type=int)

    sub = add('train', 'train a model under one strategy')
    _flag(sub, '--train', help='path prefix of PREFIX.src / PREFIX.tgt')
    _flag(sub, '--valid', help='path prefix of PREFIX.src / PREFIX.tgt')
    _flag(sub, '--out', help='run directory for vocabularies, log and checkpoints')
    _training_flags(sub)

    sub = add('translate', 'decode a source file with a checkpoint')
    _flag(sub, '--checkpoint')
    _flag(sub, '--input')
    _flag(sub, '--output')
    _flag(sub, '--vocab-src')
    _flag(sub, '--vocab-tgt')
    _flag(sub, '--beam', type=int, help='beam width (default 1 = greedy)')
    _flag(sub, '--alpha', type=float, help='length normalization exponent')
    _flag(sub, '--max-len', type=int)
    _flag(sub, '--threads', '--parallel', type=int, help='decoding worker threads')

    sub = add('evaluate', 'score hypotheses against references')
    _flag(sub, '--hypotheses')
    _flag(sub, '--references')
    _flag(sub, '--embeddings')
    _flag(sub, '--vocab-tgt')
    _flag(sub, '--checkpoint')
    _flag(sub, '--k', type=int, help='neighborhood size of near-miss accuracy')
    _flag(sub, '--smooth', action='store_true')
    _flag(sub, '--oov-reference-vectors', action='store_true')
    _flag(sub, '--record', action='store_true', help='print one tab-separated line')
    _flag(sub, '--side-by-side', help='write reference and hypothesis pairs with OOV reference words marked')

    sub = add('compare', 'train strategies side by side and tabulate test scores')
    _flag(sub, '--data', help='directory holding train/valid/test .src/.tgt')
    _flag(sub, '--out')
    _flag(sub, '--strategies', help='comma-separated strategy kinds')
    _flag(sub, '--seeds', help='comma-separated seeds')
    _flag(sub, '--target-vocab-sizes', help='comma-separated target vocabulary sizes')
    _flag(sub, '--k', type=int)
    _training_flags(sub)
    return parser, commands


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigurationError(f'config key {key!r}: expected a boolean, got {value!r}')


def resolve_options(sub: argparse.ArgumentParser, args: argparse.Namespace) -> dict[str, Any]:
    """Merge config-file values under command-line flags; settings fill the rest later."""
    actions = {action.dest: action for action in sub._actions if action.dest not in ('help', 'config')}
    # Config keys may name any option string of a flag, e.g. target_vocab for --target-vocab-size
    aliases = {option.lstrip('-').replace('-', '_'): dest for dest, action in actions.items() for option in action.option_strings}
    merged: dict[str, Any] = {}
    if args.config:
        for name, raw in load_config_file(args.config).items():
            key = aliases.get(name, name)
            action = actions.get(key)
            if action is None:
                raise ConfigurationError(f'unknown config key {key!r} for {args.command}')
            try:
                if action.nargs == 0:
                    merged[key] = _parse_bool(key, raw)
                elif action.type is not None:
                    merged[key] = action.type(raw)
                else:
                    merged[key] = raw
            except ValueError as e:
                raise ConfigurationError(f'config key {key!r}: {e}')
            if action.choices is not None and merged[key] not in action.choices:
                raise ConfigurationError(f'config key {key!r}: {raw!r} not in {sorted(action.choices)}')
    merged.update({key: value for key, value in vars(args).items() if key in actions and value is not None})
    return merged


def main(argv: Sequence[str] | None = None) -> int:
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        options = resolve_options(commands[args.command], args)
        run = build_run_config(args.command, options)
        HANDLERS[args.command](run)
    except (UsageError, ConfigurationError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (EmbNmtError, ValidationError, OSError) as e:
        logger.error(f'{type(e).__name__}: {e}')
        return EXIT_DATA
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
