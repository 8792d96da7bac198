"""
Evaluation harness: runs every inversion method on generated and real targets, writes the
per-target sidecars, assembles the results tables and checks the expected properties.

Every table cell is recomputed from files written during the run (target WAVs,
reconstruction WAVs and their JSON sidecars), so a table can always be audited against the
sidecars it lists.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
import torch

from wavegan_inversion.audio import AudioClip, load_wav, mse_raw, save_wav, spectrogram, spectrogram_mae, ssim
from wavegan_inversion.checkpoints import parameters_hash, require_checkpoint
from wavegan_inversion.classifier import accuracy, inception_score, load_classifier
from wavegan_inversion.data import load_real_splits
from wavegan_inversion.exceptions import EmptyResults
from wavegan_inversion.figures import plot_comparison
from wavegan_inversion.generator import generate, load_generator, sample_latent, torch_rng
from wavegan_inversion.inversion import (
    invert_gd,
    invert_hybrid,
    invert_mapper,
    latent_recovery_mse,
    load_inverter,
    load_result,
    save_result
)
from wavegan_inversion.statuses import Component, Domain, InversionMethod

log = logging.getLogger(__name__)

RUN_FILE = 'run.json'
SUMMARY_FILE = 'summary.txt'
TARGET_WAV = 'target.wav'
TARGET_JSON = 'target.json'
FLOAT_FORMAT = '%.6g'
LATENT_BASELINE = 2.0 / 3.0
METRIC_COLUMNS = {
    'inception': ['inception_mean', 'inception_std'],
    'mse': ['mse_raw'],
    'ssim': ['ssim'],
    'accuracy': ['accuracy'],
}
ROW_NAMES = {
    Domain.FAKE: 'Fake',
    Domain.REAL: 'Real',
    InversionMethod.GRADIENT: 'Gradient-based',
    InversionMethod.INVERSE_MAPPER: 'Inverse mapper',
    InversionMethod.HYBRID: 'Hybrid',
}


class EvaluationModels(NamedTuple):
    generator: object
    classifier: object
    mapper: object


@dataclass(frozen=True, eq=False)
class EvaluationTarget:
    """
    One clip to invert, with its label (real audio) or true latent (generated audio).
    """
    domain: Domain
    index: int
    clip: AudioClip
    label: Optional[int] = None
    latent: Optional[torch.Tensor] = None


def load_evaluation_models(checkpoint_dir, purpose='evaluate'):
    """
    Load the generator, classifier and inverse mapper checkpoints under ``checkpoint_dir``.
    """
    paths = {component: os.path.join(checkpoint_dir, component.value) for component in Component}
    for component, path in paths.items():
        require_checkpoint(path, purpose, component.value)
    return EvaluationModels(
        generator=load_generator(paths[Component.GAN]),
        classifier=load_classifier(paths[Component.CLASSIFIER]),
        mapper=load_inverter(paths[Component.INVERTER]),
    )


def target_seed(seed, domain, index):
    """
    Seed for one target's random draws, independent of the order targets are processed in.
    """
    domain_code = 0 if Domain(domain) == Domain.FAKE else 1
    return int(np.random.SeedSequence([seed, domain_code, index]).generate_state(1)[0])


def target_directory(config, domain, index):
    return os.path.join(config.output_dir, Domain(domain).value, 'target_{:03d}'.format(index))


def fake_targets(generator, config):
    rng = torch_rng(config.seed)
    latents = sample_latent(rng, generator.latent_dim, config.evaluation.num_targets)
    return [
        EvaluationTarget(Domain.FAKE, index, generate(generator, z), latent=z)
        for index, z in enumerate(latents)
    ]


def real_targets(config):
    train, heldout = load_real_splits(config.data, config.seed, config.classifier.num_classes)
    pool = heldout if config.data.evaluate_on == 'heldout' else train
    order = np.random.default_rng(config.seed).permutation(len(pool))[:config.evaluation.num_targets]
    return [
        EvaluationTarget(Domain.REAL, index, pool[int(position)].clip, label=pool[int(position)].label)
        for index, position in enumerate(order)
    ]


def _non_increasing(trace):
    return all(later <= earlier for earlier, later in zip(trace, trace[1:]))


def run_method(method, target, models, config, rng):
    """
    Invert one target with one method.
    """
    method = InversionMethod(method)
    if method == InversionMethod.GRADIENT:
        return invert_gd(models.generator, target.clip, config.gradient, rng, spectrogram_config=config.audio)
    if method == InversionMethod.INVERSE_MAPPER:
        return invert_mapper(models.mapper, models.generator, target.clip, config.audio)
    return invert_hybrid(models.mapper, models.generator, target.clip, config.hybrid, rng, config.audio)


def evaluate_target(target, models, config):
    """
    Run every configured method on one target and write its sidecars.

    Errors are caught and reported in the returned outcome so that one bad target does not
    stop the run. OSError is re-raised: file system failures are retried by the task layer
    and abort a local run.
    """
    directory = target_directory(config, target.domain, target.index)
    outcome = {'domain': Domain(target.domain).value, 'index': target.index, 'label': target.label}
    try:
        save_wav(target.clip, os.path.join(directory, TARGET_WAV), encoding='float32')
        with open(os.path.join(directory, TARGET_JSON), 'w', encoding='utf-8') as target_file:
            json.dump({
                'domain': outcome['domain'],
                'index': target.index,
                'label': target.label,
                'latent': None if target.latent is None else [float(value) for value in target.latent.tolist()],
            }, target_file, indent=2, sort_keys=True)

        rng = torch_rng(target_seed(config.seed, target.domain, target.index))
        target_spec = spectrogram(target.clip, config.audio)
        records = {}
        for method in config.evaluation.methods:
            result = run_method(method, target, models, config, rng)
            reconstruction_spec = spectrogram(result.reconstruction, config.audio)
            metrics = {
                'mse_raw': mse_raw(target.clip, result.reconstruction),
                'ssim': ssim(target_spec, reconstruction_spec),
                'latent_mse': None,
            }
            if target.latent is not None:
                metrics['latent_mse'] = float(torch.mean((result.z_hat - target.latent) ** 2).item())
            save_result(result, directory, TARGET_WAV, config.hash, metrics)
            records[InversionMethod(method).value] = dict(
                metrics,
                spectrogram_mae=spectrogram_mae(target_spec, reconstruction_spec),
                objective=result.final_loss,
                initial_objective=result.initial_loss,
                steps_used=result.steps_used,
                steps_run=result.steps_run,
                trace_monotone=_non_increasing(result.loss_trace),
            )
        outcome.update(status='ok', methods=records)
        log.info('Evaluated {domain} target={index}: {summary}'.format(
            domain=outcome['domain'], index=target.index,
            summary=', '.join('{}={:.5f}'.format(name, record['spectrogram_mae']) for name, record in records.items()),
        ))
    except OSError:
        log.exception('Evaluation of {domain} target={index} hit a file system error'.format(
            domain=outcome['domain'], index=target.index,
        ))
        raise
    except Exception as exc:  # pylint: disable=broad-except
        log.exception('Evaluation of {domain} target={index} failed'.format(
            domain=outcome['domain'], index=target.index,
        ))
        outcome.update(status='failed', error='{name}: {error}'.format(name=type(exc).__name__, error=exc))
    return outcome


def dispatch_targets(targets, models, config, use_celery=False):
    """
    Evaluate targets in parallel; outcomes come back in target order.
    """
    if use_celery:
        # pylint: disable=import-outside-toplevel
        from celery import group

        from wavegan_inversion.tasks import invert_target_task

        config_data = config.to_dict()
        job = group([
            invert_target_task.s(
                Domain(target.domain).value, target.index, target.clip.samples.tolist(), target.label,
                None if target.latent is None else target.latent.tolist(), config_data,
            )
            for target in targets
        ])
        return list(job.apply_async().join())
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda target: evaluate_target(target, models, config), targets))


def _selected_columns(config, domain, has_labels):
    columns = ['row']
    for metric in config.evaluation.metrics:
        if metric == 'accuracy' and (Domain(domain) == Domain.FAKE or not has_labels):
            continue
        columns.extend(METRIC_COLUMNS[metric])
    return columns


def build_table(domain, outcomes, models, config):
    """
    Assemble the results table of one domain from the files written by ``evaluate_target``.

    Returns (DataFrame, list of sidecar directories) or (None, []) when no target succeeded.
    """
    domain = Domain(domain)
    succeeded = [outcome for outcome in outcomes if outcome['status'] == 'ok']
    if not succeeded:
        return None, []
    directories = [target_directory(config, domain, outcome['index']) for outcome in succeeded]
    labels = [outcome['label'] for outcome in succeeded]
    has_labels = all(label is not None for label in labels)
    splits = min(config.evaluation.inception_splits, len(succeeded))
    columns = _selected_columns(config, domain, has_labels)

    def row(name, clips, mse_values=None, ssim_values=None):
        values = {'row': name}
        if 'inception_mean' in columns:
            values['inception_mean'], values['inception_std'] = inception_score(
                models.classifier, clips, splits, config.audio,
            )
        if 'mse_raw' in columns:
            values['mse_raw'] = float(np.mean(mse_values)) if mse_values is not None else None
        if 'ssim' in columns:
            values['ssim'] = float(np.mean(ssim_values)) if ssim_values is not None else None
        if 'accuracy' in columns:
            values['accuracy'] = accuracy(models.classifier, list(zip(clips, labels)), config.audio)
        return values

    rows = [row(ROW_NAMES[domain], [load_wav(os.path.join(d, TARGET_WAV)) for d in directories])]
    for method in config.evaluation.methods:
        method = InversionMethod(method)
        loaded = [load_result(d, method) for d in directories]
        rows.append(row(
            ROW_NAMES[method],
            [result.reconstruction for result, _ in loaded],
            [document['mse_raw'] for _, document in loaded],
            [document['ssim'] for _, document in loaded],
        ))
    return pd.DataFrame(rows, columns=columns), directories


def write_table(table, directories, domain, config):
    base = os.path.join(config.output_dir, '{}_table'.format(Domain(domain).value))
    table.to_csv(base + '.csv', index=False, float_format=FLOAT_FORMAT)
    document = {
        'domain': Domain(domain).value,
        'config_hash': config.hash,
        'seed': config.seed,
        'columns': list(table.columns),
        'rows': [
            {key: (None if isinstance(value, float) and np.isnan(value) else value) for key, value in record.items()}
            for record in table.to_dict(orient='records')
        ],
        'sidecars': [os.path.relpath(directory, config.output_dir) for directory in directories],
    }
    with open(base + '.json', 'w', encoding='utf-8') as table_file:
        json.dump(document, table_file, indent=2, sort_keys=True)
    return base + '.csv'


def _records(outcomes, method):
    return [
        outcome['methods'][method.value] for outcome in outcomes
        if outcome['status'] == 'ok' and method.value in outcome['methods']
    ]


def acceptance_checks(outcomes_by_domain, tables, models, config):
    """
    Check the properties a healthy run should show; ``passed`` is None when not applicable.
    """
    every = [outcome for outcomes in outcomes_by_domain.values() for outcome in outcomes]
    checks = {}

    paired = [
        outcome['methods'] for outcome in every if outcome['status'] == 'ok'
        and {'hybrid', 'inverse_mapper'} <= set(outcome['methods'])
    ]
    violations = sum(
        1 for methods in paired
        if methods['hybrid']['spectrogram_mae'] > methods['inverse_mapper']['spectrogram_mae'] * (1 + 1e-9) + 1e-12
    )
    checks['hybrid_dominance'] = {'passed': violations == 0 if paired else None, 'violations': violations,
                                  'targets': len(paired)}

    gradient = _records(every, InversionMethod.GRADIENT)
    checks['gradient_monotone'] = {
        'passed': all(record['trace_monotone'] for record in gradient) if gradient else None,
        'targets': len(gradient),
    }

    fake_gradient = _records(outcomes_by_domain.get(Domain.FAKE, []), InversionMethod.GRADIENT)
    ratios = [record['objective'] / record['initial_objective'] for record in fake_gradient
              if record['initial_objective'] > 0]
    checks['gradient_mae_ratio'] = {
        'passed': all(ratio <= 0.1 for ratio in ratios) if ratios else None,
        'threshold': 0.1,
        'mean': float(np.mean(ratios)) if ratios else None,
        'max': float(np.max(ratios)) if ratios else None,
    }

    fake_mapper = _records(outcomes_by_domain.get(Domain.FAKE, []), InversionMethod.INVERSE_MAPPER)
    fresh = latent_recovery_mse(models.mapper, models.generator, torch_rng(config.seed + 1), 256, config.audio)
    checks['latent_mse'] = {
        'passed': fresh < LATENT_BASELINE / 2,
        'baseline': LATENT_BASELINE,
        'fresh_samples': 256,
        'fresh_mse': fresh,
        'target_mse': float(np.mean([record['latent_mse'] for record in fake_mapper])) if fake_mapper else None,
    }

    real_table = tables.get(Domain.REAL)
    trend = {'passed': None}
    if real_table is not None and 'accuracy' in real_table.columns:
        by_row = real_table.set_index('row')['accuracy']
        mapper_accuracy = by_row.get(ROW_NAMES[InversionMethod.INVERSE_MAPPER])
        gradient_accuracy = by_row.get(ROW_NAMES[InversionMethod.GRADIENT])
        if mapper_accuracy is not None:
            chance = 1.0 / models.classifier.num_classes
            beats_gradient = gradient_accuracy is None or mapper_accuracy > gradient_accuracy
            passed = bool(mapper_accuracy > 2 * chance and beats_gradient)
            trend = {
                'passed': passed,
                'chance': chance,
                'inverse_mapper': float(mapper_accuracy),
                'gradient': None if gradient_accuracy is None else float(gradient_accuracy),
            }
            if not passed:
                trend['diagnostics'] = (
                    'inverse mapper accuracy {mapper:.3f} does not exceed both twice chance ({twice:.3f}) and the '
                    'gradient-based accuracy {gradient}; check the inverter training log and latent_mse'.format(
                        mapper=mapper_accuracy, twice=2 * chance, gradient=gradient_accuracy,
                    )
                )
    checks['accuracy_trend'] = trend
    return checks


def _figures(domain, outcomes, config):
    paths = []
    succeeded = [outcome for outcome in outcomes if outcome['status'] == 'ok'][:config.evaluation.figures]
    for outcome in succeeded:
        directory = target_directory(config, domain, outcome['index'])
        reconstructions = {
            InversionMethod(method).value: load_result(directory, method)[0].reconstruction
            for method in config.evaluation.methods
        }
        title = '{domain} target {index}'.format(domain=ROW_NAMES[Domain(domain)], index=outcome['index'])
        if outcome['label'] is not None:
            title += ' (digit {})'.format(outcome['label'])
        name = '{}_target_{:03d}.png'.format(Domain(domain).value, outcome['index'])
        path = os.path.join(config.output_dir, 'figures', name)
        paths.append(plot_comparison(load_wav(os.path.join(directory, TARGET_WAV)), reconstructions, path,
                                     config.audio, title))
    return paths


def run_evaluation(config, use_celery=False):
    """
    Evaluate all configured domains and write tables, figures and ``run.json``.
    """
    models = load_evaluation_models(config.checkpoint_dir)
    os.makedirs(config.output_dir, exist_ok=True)
    outcomes_by_domain, tables, table_files, figures = {}, {}, {}, []
    for domain in config.evaluation.domains:
        domain = Domain(domain)
        targets = fake_targets(models.generator, config) if domain == Domain.FAKE else real_targets(config)
        log.info('Evaluating {count} {domain} targets with {workers} workers'.format(
            count=len(targets), domain=domain.value, workers=config.workers,
        ))
        outcomes = dispatch_targets(targets, models, config, use_celery)
        outcomes_by_domain[domain] = outcomes
        table, directories = build_table(domain, outcomes, models, config)
        if table is not None:
            tables[domain] = table
            table_path = write_table(table, directories, domain, config)
            table_files[domain.value] = os.path.relpath(table_path, config.output_dir)
        figures.extend(os.path.relpath(path, config.output_dir) for path in _figures(domain, outcomes, config))

    failures = [
        {'domain': outcome['domain'], 'index': outcome['index'], 'error': outcome['error']}
        for outcomes in outcomes_by_domain.values() for outcome in outcomes if outcome['status'] != 'ok'
    ]
    run = {
        'profile': config.profile.value,
        'seed': config.seed,
        'config_hash': config.hash,
        'checkpoints': {component.value: parameters_hash(config.checkpoint_path(component)) for component in Component},
        'targets': {domain.value: len(outcomes) for domain, outcomes in outcomes_by_domain.items()},
        'failure_counts': {
            domain.value: sum(1 for outcome in outcomes if outcome['status'] != 'ok')
            for domain, outcomes in outcomes_by_domain.items()
        },
        'failures': failures,
        'tables': table_files,
        'figures': figures,
        'acceptance': acceptance_checks(outcomes_by_domain, tables, models, config),
    }
    with open(os.path.join(config.output_dir, RUN_FILE), 'w', encoding='utf-8') as run_file:
        json.dump(run, run_file, indent=2, sort_keys=True)
    log.info('Evaluation finished: {tables} tables, {failures} failed targets, written to {out}'.format(
        tables=len(table_files), failures=len(failures), out=config.output_dir,
    ))
    return run


def collect_runs(results_dir):
    """
    Every ``run.json`` under ``results_dir``, in path order.
    """
    runs = []
    for directory, _, files in sorted(os.walk(results_dir)):
        if RUN_FILE in files:
            with open(os.path.join(directory, RUN_FILE), encoding='utf-8') as run_file:
                run = json.load(run_file)
            run['directory'] = directory
            runs.append(run)
    if not runs:
        raise EmptyResults('No evaluation runs found under {}.'.format(results_dir))
    return runs


def _run_tables(run):
    frames = []
    for domain, path in sorted(run.get('tables', {}).items()):
        frame = pd.read_csv(os.path.join(run['directory'], path))
        frame.insert(0, 'domain', domain)
        frames.append(frame)
    return frames


def render_report(results_dir):
    """
    Human-readable summary of every run under ``results_dir``; also written to summary.txt.
    """
    runs = collect_runs(results_dir)
    lines = []
    all_frames = []
    for run in runs:
        lines.append('Run {directory}: profile={profile} seed={seed} config={hash}'.format(
            directory=os.path.relpath(run['directory'], results_dir), profile=run['profile'], seed=run['seed'],
            hash=run['config_hash'][:12],
        ))
        for frame in _run_tables(run):
            lines.append('  {} audio'.format(frame['domain'].iloc[0]))
            lines.extend('    ' + line for line in frame.drop(columns='domain').to_string(index=False).splitlines())
            all_frames.append(frame.assign(seed=run['seed']))
        counts = ', '.join('{}={}'.format(domain, count) for domain, count in sorted(run['failure_counts'].items()))
        lines.append('  failed targets: {}'.format(counts or 'none'))
        for name, check in sorted(run['acceptance'].items()):
            flag = {True: 'PASS', False: 'FLAG', None: 'N/A'}[check.get('passed')]
            details = ', '.join(
                '{}={}'.format(key, value) for key, value in sorted(check.items())
                if key not in ('passed', 'diagnostics')
            )
            lines.append('  [{flag}] {name} {details}'.format(flag=flag, name=name, details=details).rstrip())
            if check.get('diagnostics'):
                lines.append('         {}'.format(check['diagnostics']))
        lines.append('')

    if len(runs) > 1 and all_frames:
        combined = pd.concat(all_frames, ignore_index=True)
        metrics = [column for column in combined.columns if column not in ('domain', 'row', 'seed')]
        spread = combined.groupby(['domain', 'row'], sort=False)[metrics].agg(['mean', 'std'])
        lines.append('Spread across {count} runs (seeds {seeds})'.format(
            count=len(runs), seeds=', '.join(str(run['seed']) for run in runs),
        ))
        spread_text = spread.to_string(float_format=lambda value: FLOAT_FORMAT % value)
        lines.extend('  ' + line for line in spread_text.splitlines())

    text = '\n'.join(lines).rstrip() + '\n'
    with open(os.path.join(results_dir, SUMMARY_FILE), 'w', encoding='utf-8') as summary_file:
        summary_file.write(text)
    return text
