"""
cxverb command line: simulate | pretrain | train | enhance | evaluate | gradcheck | export-spec.

Every run resolves one RunConfig (preset, environment, config file, flags), writes it to resolved-config.yaml in
the output directory and lays its artifacts out underneath:

    <out>/data/         simulated WAVs and manifest.jsonl
    <out>/pretrain/     pretrain-loss.csv, checkpoints/, pretrain.ckpt
    <out>/gan/          gan-loss.csv, checkpoints/, gan.ckpt
    <out>/enhanced/     enhanced WAVs
    <out>/metrics.csv   evaluation report
    <out>/spectrograms/ CSV and PGM spectrogram exports

Exit codes: 0 success, 1 usage or configuration error, 2 data or format error, 3 non-finite training loss,
4 failed gradient check.
"""
import argparse
import logging
import os
import sys
from typing import Any, Dict, Optional, Sequence

import yaml
from pydantic import ValidationError

from cxverb import __version__
from cxverb.config import RunConfig, load_config, write_resolved_config
from cxverb.cli.gradcheck_suite import run_suite
from cxverb.cli.pipeline import Enhancer, oracle_estimators
from cxverb.dsp.export import write_csv, write_pgm
from cxverb.dsp.smoothing import SmootherState, optimal_smoothing, smoothed_input
from cxverb.dsp.stft import stft
from cxverb.dsp.wavio import wav_read
from cxverb.errors import ArgumentError, ConfigError, DataError, NonFiniteLossError, ShapeError
from cxverb.gan.checkpoint import load_checkpoint
from cxverb.gan.data import ChipDataset
from cxverb.gan.discriminator import Discriminator
from cxverb.gan.generator import Generator
from cxverb.gan.training import pretrain_generator, train_gan
from cxverb.metrics.report import EvaluationPair, evaluate_pairs, write_report_csv
from cxverb.simulate.dataset import MANIFEST_NAME, build_dataset, load_manifest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NON_FINITE = 3
EXIT_GRADCHECK = 4

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
EXIT_CODES_EPILOG = (f"exit codes: {EXIT_OK} success, {EXIT_USAGE} usage or configuration error, "
                     f"{EXIT_DATA} data or shape error, {EXIT_NON_FINITE} non-finite training loss, "
                     f"{EXIT_GRADCHECK} gradient check failure")


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors to the caller instead of exiting with status 2."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _t60_range(text: str):
    try:
        low, high = (float(v) for v in text.split(':'))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI seconds, got '{text}'")
    return low, high


def _snr(text: str) -> Optional[float]:
    if text.lower() in ('none', 'inf'):
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an SNR in dB or 'none', got '{text}'")


def _key_value(text: str):
    key, sep, value = text.partition('=')
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got '{text}'")
    return key.strip(), yaml.safe_load(value.strip()) if value.strip() else None


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument('--config', help="YAML or key=value configuration file")
    common.add_argument('--preset', choices=('paper', 'toy'), help="network and schedule preset")
    common.add_argument('--seed', type=int, help="run seed")
    common.add_argument('--out', help="output directory of the run")
    common.add_argument('--workers', type=int, help="worker threads for per-file stages")
    common.add_argument('--set', dest='overrides', action='append', type=_key_value, default=[],
                        metavar='KEY=VALUE', help="dotted configuration override, e.g. train.alpha=0.4")

    parser = CliParser(prog='cxverb', description="Complex-valued GAN speech dereverberation toolkit",
                       epilog=EXIT_CODES_EPILOG)
    parser.add_argument('--version', action='version', version=f"cxverb {__version__}")
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('simulate', parents=[common], help="simulate a reverberant dataset")
    p.add_argument('--n', type=int, default=0, help="synthetic speech-like sources to generate")
    p.add_argument('--source', action='append', default=[], help="dry 16 kHz mono WAV source (repeatable)")
    p.add_argument('--conditions', type=int, help="room conditions per source")
    p.add_argument('--t60', type=_t60_range, help="reverberation time range LO:HI in seconds")
    p.add_argument('--snr', type=_snr, default=argparse.SUPPRESS, help="additive noise SNR in dB, or 'none'")

    for name, text in (('pretrain', "pretrain the generator on L_RI+Mag"),
                       ('train', "adversarial training from a pretrained generator")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('--manifest', help="dataset manifest (default <out>/data/manifest.jsonl)")
        p.add_argument('--checkpoint', help="checkpoint to start from")

    p = sub.add_parser('enhance', parents=[common], help="dereverberate WAV files")
    p.add_argument('wavs', nargs='*', help="reverberant WAVs; the manifest is used when none are given")
    p.add_argument('--manifest', help="dataset manifest (default <out>/data/manifest.jsonl)")
    p.add_argument('--checkpoint', help="generator checkpoint (default <out>/gan/gan.ckpt)")
    mask = p.add_mutually_exclusive_group()
    mask.add_argument('--identity-mask', action='store_true', help="debug: M = 1")
    mask.add_argument('--oracle-mask', action='store_true', help="debug: M = X / Y from the manifest targets")

    p = sub.add_parser('evaluate', parents=[common], help="objective metrics of reverberant and enhanced speech")
    p.add_argument('--manifest', help="dataset manifest (default <out>/data/manifest.jsonl)")
    p.add_argument('--enhanced', help="directory of enhanced WAVs (default <out>/enhanced)")

    p = sub.add_parser('gradcheck', parents=[common], help="finite-difference gradient check suite")
    p.add_argument('--only', action='append', help="run only checks whose name starts with this prefix")

    p = sub.add_parser('export-spec', parents=[common], help="write CSV/PGM magnitude spectrograms")
    p.add_argument('wavs', nargs='+', help="WAV files to export")
    p.add_argument('--smoothed', action='store_true', help="also export the optimally smoothed network input")
    return parser


def configure_logging(level: Optional[str] = None) -> None:
    """Root logger level from the argument, else CXVERB_LOG, else info."""
    name = (level or os.getenv('CXVERB_LOG') or 'info').upper()
    value = getattr(logging, name, logging.INFO)
    logging.basicConfig(level=value, format=LOG_FORMAT)
    logging.getLogger().setLevel(value)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Configuration from the file and flags of a parsed command line."""
    overrides: Dict[str, Any] = {}
    for flag, key in (('preset', 'preset'), ('seed', 'seed'), ('out', 'out_dir'), ('workers', 'workers'),
                      ('conditions', 'sim.conditions')):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, 't60', None) is not None:
        overrides['sim.t60_min'], overrides['sim.t60_max'] = args.t60
    if 'snr' in vars(args):
        overrides['sim.snr_db'] = args.snr
    for key, value in args.overrides:
        overrides[key] = value
    return load_config(config_file=args.config, overrides=overrides)


def _dir(config: RunConfig, *parts: str) -> str:
    return os.path.join(config.out_dir, *parts)


def _manifest(config: RunConfig, args: argparse.Namespace):
    path = args.manifest or _dir(config, 'data', MANIFEST_NAME)
    if not os.path.exists(path):
        raise DataError(f"manifest not found: {path} (run 'cxverb simulate' first or pass --manifest)")
    return load_manifest(path)


def cmd_simulate(config: RunConfig, args: argparse.Namespace) -> int:
    records = build_dataset(args.source, config.sim, _dir(config, 'data'), n_synthetic=args.n,
                            workers=config.workers)
    print(f"Simulated {len(records)} utterances into {_dir(config, 'data')}")
    return EXIT_OK


def _dataset(config: RunConfig, args: argparse.Namespace) -> ChipDataset:
    return ChipDataset.from_records(_manifest(config, args), config.stft, config.generator.chip_frames,
                                    config.workers)


def cmd_pretrain(config: RunConfig, args: argparse.Namespace) -> int:
    dataset = _dataset(config, args)
    generator = Generator(config.generator, seed=config.seed)
    if args.checkpoint:
        load_checkpoint(args.checkpoint, generator)
    generator.astype(config.numpy_dtype)
    result = pretrain_generator(generator, dataset, config.train, _dir(config, 'pretrain'), config.numpy_dtype)
    print(f"Pretrained {result.steps} steps; checkpoint {result.checkpoint_path}")
    return EXIT_OK


def cmd_train(config: RunConfig, args: argparse.Namespace) -> int:
    dataset = _dataset(config, args)
    generator = Generator(config.generator, seed=config.seed)
    discriminator = Discriminator(config.discriminator, seed=config.seed + 1)
    checkpoint = args.checkpoint or _dir(config, 'pretrain', 'pretrain.ckpt')
    if os.path.exists(checkpoint):
        load_checkpoint(checkpoint, generator, discriminator)
    elif args.checkpoint:
        raise DataError(f"checkpoint not found: {checkpoint}")
    generator.astype(config.numpy_dtype)
    discriminator.astype(config.numpy_dtype)
    result = train_gan(generator, discriminator, dataset, config.train, _dir(config, 'gan'), config.numpy_dtype)
    print(f"Trained {result.steps} adversarial steps; checkpoint {result.checkpoint_path}")
    return EXIT_OK


def cmd_enhance(config: RunConfig, args: argparse.Namespace) -> int:
    out_dir = _dir(config, 'enhanced')
    estimators = {}
    if args.wavs:
        if args.oracle_mask:
            raise ArgumentError("--oracle-mask needs manifest targets; do not pass WAV paths")
        jobs = [(os.path.splitext(os.path.basename(w))[0], w,
                 os.path.join(out_dir, os.path.basename(w))) for w in args.wavs]
    else:
        records = _manifest(config, args)
        jobs = [(r.id, r.reverb_path, os.path.join(out_dir, f"{r.id}.wav")) for r in records]
        if args.oracle_mask:
            estimators = oracle_estimators(records, config)

    if args.identity_mask or args.oracle_mask:
        enhancer = Enhancer(config, identity=True)
    else:
        checkpoint = args.checkpoint or _dir(config, 'gan', 'gan.ckpt')
        if not os.path.exists(checkpoint):
            raise DataError(f"checkpoint not found: {checkpoint}")
        enhancer = Enhancer(config, checkpoint=checkpoint)

    result = enhancer.enhance_files(jobs, config.workers, estimators)
    print(f"Enhanced {len(result.outputs)} of {len(jobs)} files into {out_dir}")
    if result.result_status.is_error:
        raise DataError(result.result_status.message)
    return EXIT_OK


def cmd_evaluate(config: RunConfig, args: argparse.Namespace) -> int:
    records = _manifest(config, args)
    enhanced_dir = args.enhanced or _dir(config, 'enhanced')
    pairs = [EvaluationPair(r.id, 'reverberant', r.target_path, r.reverb_path) for r in records]
    enhanced = [EvaluationPair(r.id, 'enhanced', r.target_path, os.path.join(enhanced_dir, f"{r.id}.wav"))
                for r in records]
    pairs += [p for p in enhanced if os.path.exists(p.degraded_path)]
    if len(pairs) == len(records):
        logging.getLogger(__name__).warning("No enhanced files found in %s; evaluating reverberant speech only",
                                            enhanced_dir)
    report = evaluate_pairs(pairs, config.stft.sample_rate, config.workers)
    if report.result_status.is_error:
        raise DataError(report.result_status.message)
    write_report_csv(_dir(config, 'metrics.csv'), report)
    print(report.format_table())
    return EXIT_OK


def cmd_gradcheck(config: RunConfig, args: argparse.Namespace) -> int:
    suite = run_suite(config.seed, args.only)
    if not suite.reports:
        raise ArgumentError(f"no gradient check matches {args.only}")
    print(suite.format_table())
    return EXIT_OK if suite.passed else EXIT_GRADCHECK


def cmd_export_spec(config: RunConfig, args: argparse.Namespace) -> int:
    out_dir = _dir(config, 'spectrograms')
    for path in args.wavs:
        y, _ = wav_read(path, config.stft.sample_rate)
        stem = os.path.splitext(os.path.basename(path))[0]
        spec = stft(y, config.stft)
        outputs = {stem: spec}
        if args.smoothed:
            power, _ = optimal_smoothing(spec, SmootherState.from_config(config.stft))
            outputs[f"{stem}-smoothed"] = smoothed_input(spec, power)
        for name, s in outputs.items():
            write_csv(os.path.join(out_dir, f"{name}.csv"), s)
            write_pgm(os.path.join(out_dir, f"{name}.pgm"), s)
    print(f"Exported {len(args.wavs)} spectrogram(s) into {out_dir}")
    return EXIT_OK


HANDLERS = {
    'simulate': cmd_simulate,
    'pretrain': cmd_pretrain,
    'train': cmd_train,
    'enhance': cmd_enhance,
    'evaluate': cmd_evaluate,
    'gradcheck': cmd_gradcheck,
    'export-spec': cmd_export_spec,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one cxverb command.

    :param argv: Arguments without the program name; defaults to sys.argv[1:].
    :return: Process exit code.
    """
    configure_logging()
    logger = logging.getLogger(__name__)
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = resolve_config(args)
        if not os.getenv('CXVERB_LOG'):
            logging.getLogger().setLevel(config.log.upper())
        write_resolved_config(config)
        logger.info("cxverb %s %s (preset %s, seed %d, out %s)", __version__, args.command, config.preset,
                    config.seed, config.out_dir)
        return HANDLERS[args.command](config, args)
    except NonFiniteLossError as e:
        logger.error("Training aborted: %s", e)
        return EXIT_NON_FINITE
    except (DataError, ShapeError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    except (ConfigError, ArgumentError, ValidationError, FileNotFoundError, yaml.YAMLError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == '__main__':
    main()
