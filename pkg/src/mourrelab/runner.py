"""Config-driven experiment runner.

A config is a JSON object. Unknown keys are rejected; every key has a
documented default except ``experiment``. Each run writes one data file
(CSV or JSON, fixed column order) and a ``<output>.manifest.json`` next to it.
The process exit status is 0 iff every check of the run passed.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ArgumentError, CapacityError
from .lattice import (Boundary, LatticeBox, build_conjugate_operator,
                      build_laplacian, build_shift, commutator, eigendecompose)
from .mourre import (build_cutoff, lambda_threshold_scan, lemma1_check,
                     mourre_check, symbol_operator, torus_scan)
from .potential import (CouplingDistribution, build_support, check_hypothesis,
                        make_bump_profile, sample_realization)
from .spectral import (conditioned_realization, density_of_states,
                       free_residual, make_weyl_vector, max_feasible_halfwidth,
                       predict_essential_spectrum, weyl_residual_check)

__all__ = ['EXPERIMENTS', 'ConfigError', 'ExperimentConfig', 'RunManifest',
           'validate', 'run', 'main']

EXPERIMENTS = ('torus-lemma', 'commutator-identity', 'hypothesis-check', 'lemma1',
               'mourre', 'lambda-scan', 'weyl', 'spectrum', 'dos')

DEFAULTS = {
    'experiment': None,
    'nu': 1,
    'L': 100,
    'boundary': 'dirichlet',
    'M': 8,
    'K': 3,
    'plateau_radius': 0.5,
    'distribution': {'kind': 'uniform', 'lo': -1.0, 'hi': 1.0},
    'lambda': 0.0,
    'lambda_grid': [0.001, 0.01, 0.1],
    'a': -0.5,
    'b': 0.5,
    'seeds': [0],
    'delta': [0.25, 0.5, 0.75],
    'grid': 256,
    'collar': 5,
    'collar_excess': 0.5,
    'samples': 100,
    'bins': 50,
    'energies': [-1.5, 0.0, 1.5],
    'halfwidths': None,
    'ell': 100,
    'residual_target': 0.15,
    'output_path': None,
    'format': 'csv',
}


class ConfigError(ValueError):
    """Itemized configuration problems, each prefixed with its key path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__('invalid config:\n' + '\n'.join(f'  {e}' for e in self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self):
        return self.values['experiment']

    def distribution(self):
        return CouplingDistribution.from_config(self.values['distribution'])

    def box(self, boundary=None):
        return LatticeBox(self['nu'], self['L'], Boundary(boundary or self['boundary']))

    def potential(self):
        return build_support(self['M'], self['K'], self['nu'],
                             make_bump_profile(self['plateau_radius']))

    def cutoff(self):
        return build_cutoff(self['a'], self['b'])

    def to_json(self):
        return json.dumps(self.values, sort_keys=True, indent=2)


@dataclass
class RunManifest:
    config: dict
    version: str
    seeds: list
    wall_time: float
    checks: dict
    data_files: dict
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_json(self):
        return json.dumps({
            'config': self.config, 'version': self.version, 'seeds': self.seeds,
            'wall_time': self.wall_time, 'checks': self.checks,
            'passed': self.passed, 'data_files': self.data_files,
            'extras': self.extras,
        }, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(config_text):
    """Strictly parse JSON config text (or a dict) into an :class:`ExperimentConfig`."""
    errors = []
    if isinstance(config_text, dict):
        raw = dict(config_text)
    else:
        try:
            raw = json.loads(config_text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<root>: not valid JSON ({exc})"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    for key in sorted(set(raw) - set(DEFAULTS)):
        errors.append(f"{key}: unknown key")
    if 'experiment' not in raw:
        errors.append("experiment: missing required field")
    values = {**DEFAULTS, **{k: v for k, v in raw.items() if k in DEFAULTS}}

    def need(key, ok, message):
        if not ok:
            errors.append(f"{key}: {message} (got {values[key]!r})")
            return False
        return True

    if 'experiment' in raw:
        need('experiment', values['experiment'] in EXPERIMENTS,
             f"must be one of {', '.join(EXPERIMENTS)}")
    need('nu', _is_int(values['nu']) and 1 <= values['nu'] <= 3, "integer in 1..3")
    need('L', _is_int(values['L']) and values['L'] >= 1, "positive integer")
    need('boundary', values['boundary'] in ('dirichlet', 'periodic'),
         "'dirichlet' or 'periodic'")
    need('M', _is_int(values['M']) and values['M'] >= 2 and values['M'] % 2 == 0,
         "even integer >= 2")
    need('K', _is_int(values['K']) and values['K'] >= 0, "non-negative integer")
    need('plateau_radius', _is_num(values['plateau_radius'])
         and 0 < values['plateau_radius'] < 1, "number in (0, 1)")
    mu = None
    try:
        mu = CouplingDistribution.from_config(values['distribution'])
    except (ArgumentError, KeyError, TypeError, AttributeError) as exc:
        errors.append(f"distribution: {exc}")
    need('lambda', _is_num(values['lambda']) and values['lambda'] >= 0,
         "non-negative number")
    grid = values['lambda_grid']
    if need('lambda_grid', isinstance(grid, list) and grid
            and all(_is_num(x) and x >= 0 for x in grid), "non-empty list of numbers >= 0"):
        need('lambda_grid', all(y > x for x, y in zip(grid, grid[1:])), "strictly ascending")
    if need('a', _is_num(values['a']), "number") and need('b', _is_num(values['b']), "number"):
        if not -2 < values['a'] < values['b'] < 2:
            errors.append(f"a, b: interval [{values['a']}, {values['b']}] is outside (-2, 2) "
                          "or empty")
    need('seeds', isinstance(values['seeds'], list) and values['seeds']
         and all(_is_int(s) and s >= 0 for s in values['seeds']),
         "non-empty list of non-negative integers")
    delta = values['delta']
    deltas = delta if isinstance(delta, list) else [delta]
    need('delta', deltas and all(_is_num(d) and 0 < d <= 1 for d in deltas),
         "number or list of numbers in (0, 1]")
    need('grid', _is_int(values['grid']) and values['grid'] >= 64, "integer >= 64")
    need('collar', _is_int(values['collar']) and values['collar'] >= 1, "positive integer")
    need('collar_excess', _is_num(values['collar_excess']) and values['collar_excess'] > 0,
         "positive number")
    need('samples', _is_int(values['samples']) and values['samples'] >= 1, "positive integer")
    need('bins', _is_int(values['bins']) and values['bins'] >= 10, "integer >= 10")
    need('energies', isinstance(values['energies'], list) and values['energies']
         and all(_is_num(e) for e in values['energies']), "non-empty list of numbers")
    hw = values['halfwidths']
    need('halfwidths', hw is None or (isinstance(hw, list) and hw
                                      and all(_is_int(j) and j >= 1 for j in hw)),
         "null or list of positive integers")
    need('ell', _is_int(values['ell']) and values['ell'] >= 1, "positive integer")
    need('residual_target', _is_num(values['residual_target'])
         and values['residual_target'] > 0, "positive number")
    need('output_path', values['output_path'] is None
         or isinstance(values['output_path'], str), "string path")
    need('format', values['format'] in ('csv', 'json'), "'csv' or 'json'")

    if mu is not None and values['experiment'] in ('mourre', 'lambda-scan'):
        lams = values['lambda_grid'] if values['experiment'] == 'lambda-scan' else [values['lambda']]
        if all(_is_num(x) for x in lams) and any(x * mu.E_infty >= 1 for x in lams):
            key = 'lambda_grid' if values['experiment'] == 'lambda-scan' else 'lambda'
            errors.append(f"{key}: lambda * E_inf must stay below 1 for the "
                          f"positive-commutator regime (E_inf = {mu.E_infty})")
    if errors:
        raise ConfigError(errors)
    if not isinstance(values['delta'], list):
        values['delta'] = [values['delta']]
    if values['output_path'] is None:
        values['output_path'] = f"{values['experiment']}.{values['format']}"
    return ExperimentConfig(values)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return 'true' if x else 'false'
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _render(rows, columns, fmt):
    if fmt == 'json':
        payload = [{c: r[c] for c in columns} for r in rows]
        return json.dumps(payload, indent=2, default=_jsonable) + '\n'
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


# --- experiments: each returns (rows, columns, checks, extras) ------------


def _torus(cfg):
    nu = cfg['nu']
    rows, checks = [], {}
    for delta in cfg['delta']:
        res = torus_scan(nu, delta, cfg['grid'])
        row = {'nu': nu, 'delta': delta, 'grid': cfg['grid'], 'min': res.min_value,
               'threshold': res.threshold, 'pass': res.passed}
        for i in range(nu):
            row[f'argmin_{i + 1}'] = res.argmin[i] if res.argmin else math.nan
        rows.append(row)
        checks[f'torus_min_delta_{delta}'] = res.passed
    columns = ['nu', 'delta', 'grid', 'min'] + [f'argmin_{i + 1}' for i in range(nu)] \
        + ['threshold', 'pass']
    return rows, columns, checks, {}


def _commutator_identity(cfg):
    nu, L = cfg['nu'], cfg['L']
    box = LatticeBox(nu, L)
    A, lap = build_conjugate_operator(box), build_laplacian(box)
    lhs = commutator(A, lap).matrix
    rhs = None
    for axis in range(1, nu + 1):
        T = build_shift(box, axis).matrix
        K = T - T.T
        rhs = K @ K if rhs is None else rhs + K @ K
    interior = np.flatnonzero(box.distance_to_boundary() >= 2)
    rng = np.random.default_rng(cfg['seeds'][0])
    err = 0.0
    for _ in range(cfg['samples']):
        u = np.zeros(box.n_sites)
        u[interior] = rng.standard_normal(len(interior))
        err = max(err, float(np.abs(lhs @ u + rhs @ u).max()))
    rows = [{'check': 'interior_identity', 'nu': nu, 'L': L, 'max_error': err,
             'tol': 1e-12, 'pass': err <= 1e-12}]
    pbox = LatticeBox(nu, min(L, 8), Boundary.PERIODIC)
    if pbox.n_sites <= 4096:
        w = np.linalg.eigvalsh(symbol_operator(pbox).toarray())
        theta = 2 * np.pi * np.arange(pbox.side) / pbox.side
        grids = np.meshgrid(*([4 * np.sin(theta) ** 2] * nu), indexing='ij')
        exact = np.sort(sum(grids).ravel())
        sym_err = float(np.abs(np.sort(w) - exact).max())
        rows.append({'check': 'fourier_symbol', 'nu': nu, 'L': pbox.half_side,
                     'max_error': sym_err, 'tol': 1e-10, 'pass': sym_err <= 1e-10})
    checks = {r['check']: r['pass'] for r in rows}
    return rows, ['check', 'nu', 'L', 'max_error', 'tol', 'pass'], checks, {}


def _hypothesis(cfg):
    spec = cfg.potential()
    box = cfg.box('dirichlet')
    rep = check_hypothesis(spec, box)
    nu = cfg['nu']
    rows = []
    for r in rep.rows:
        row = {'k': r['k'], 'r': r['r'], 'ratio': r['ratio'], 'value_ok': r['value_ok'],
               'plateau_ok': r['plateau_ok'], 'comm1': r['comm1'], 'comm2': r['comm2'],
               'comm2_bound': r['comm2_bound']}
        for i in range(nu):
            row[f'c{i + 1}'] = r['center'][i]
        rows.append(row)
    columns = ['k'] + [f'c{i + 1}' for i in range(nu)] + [
        'r', 'ratio', 'value_ok', 'plateau_ok', 'comm1', 'comm2', 'comm2_bound']
    checks = {'disjoint': rep.disjoint, 'values_in_unit_interval': rep.values_ok,
              'plateau': rep.plateau_ok, 'commutator_uniformity': rep.commutator_uniformity <= 4,
              'double_commutator_bound': rep.double_commutator_ok}
    extras = {'sup_commutator': rep.sup_commutator,
              'commutator_uniformity': rep.commutator_uniformity,
              'plateau_threshold_M': rep.plateau_threshold_M}
    return rows, columns, checks, extras


def _lemma1(cfg):
    box = cfg.box('dirichlet')
    psi = cfg.cutoff()
    out = lemma1_check(cfg.potential(), cfg.distribution(), cfg['lambda_grid'], psi, box,
                       cfg['seeds'])
    rows = [{'nu': r.nu, 'N': r.N, 'lambda': r.lam, 'seed': r.seed,
             'diff_norm': r.diff_norm, 'ratio': r.ratio, 'C': r.constant, 'pass': r.ok}
            for r in out]
    checks = {'ratio_below_constant': all(r.ok for r in out)}
    lams = sorted(set(r.lam for r in out if r.lam > 0))
    if len(lams) >= 2:
        small = {r.seed: r.ratio for r in out if r.lam == lams[0]}
        next_ = {r.seed: r.ratio for r in out if r.lam == lams[1]}
        spread = max(abs(small[s] - next_[s]) / next_[s] for s in small if next_[s] > 0)
        checks['linear_regime'] = spread <= 0.2
    return rows, ['nu', 'N', 'lambda', 'seed', 'diff_norm', 'ratio', 'C', 'pass'], checks, \
        {'fourier_integral': psi.fourier_integral}


MOURRE_COLUMNS = ['nu', 'N', 'a', 'b', 'delta', 'lambda', 'seed', 'rank_P', 'm',
                  'margin_2delta', 'margin_3delta', 'filtered_flag', 'm_unfiltered']


def _mourre_rows(rows):
    return [{'nu': r.nu, 'N': r.N, 'a': r.a, 'b': r.b, 'delta': r.delta, 'lambda': r.lam,
             'seed': r.seed, 'rank_P': r.rank_filtered, 'm': r.m,
             'margin_2delta': r.margin_2delta, 'margin_3delta': r.margin_3delta,
             'filtered_flag': r.filtered_flag, 'm_unfiltered': r.m_unfiltered}
            for r in rows]


def _mourre(cfg):
    box = cfg.box('dirichlet')
    psi = cfg.cutoff()
    report = lambda_threshold_scan(cfg.potential(), cfg.distribution(), psi,
                                   [cfg['lambda']], cfg['seeds'], box, cfg['collar'],
                                   cfg['collar_excess'])
    rows = _mourre_rows(report.rows)
    checks = {'margin_2delta_nonnegative': all(r.margin_2delta >= 0 for r in report.rows),
              'nondegenerate': not any(r.degenerate for r in report.rows)}
    return rows, MOURRE_COLUMNS, checks, {}


def _lambda_scan(cfg):
    box = cfg.box('dirichlet')
    psi = cfg.cutoff()
    report = lambda_threshold_scan(cfg.potential(), cfg.distribution(), psi,
                                   cfg['lambda_grid'], cfg['seeds'], box, cfg['collar'],
                                   cfg['collar_excess'])
    lam_I = report.lambda_threshold
    extras = {'lambda_I': lam_I, 'worst_margins': report.worst_margins().tolist(),
              'envelope': report.envelope().tolist(),
              'commutator_norms': {str(k): v for k, v in report.commutator_norms.items()}}
    checks = {'positive_lambda_I': lam_I is not None and lam_I > 0}
    return _mourre_rows(report.rows), MOURRE_COLUMNS, checks, extras


def _coupling_values(mu):
    out = []
    for lo, hi in mu.support():
        out.extend([lo] if lo == hi else [lo, 0.5 * (lo + hi), hi])
    return out


def _weyl(cfg):
    box = cfg.box('dirichlet')
    spec, mu = cfg.potential(), cfg.distribution()
    if not spec.n_centers:
        raise CapacityError("weyl needs at least one annulus (K >= 1)")
    # the outermost annulus has the widest plateau; use its +e_1 bump
    index = int(np.flatnonzero(spec.annulus == spec.annulus_count)[1])
    center = spec.centers[index]
    jmax = max_feasible_halfwidth(spec, index)
    if jmax < 1:
        raise CapacityError(f"plateau of bump {index} cannot host a window (j_max = {jmax})")
    halfwidths = cfg['halfwidths'] or sorted({max(1, jmax // 4), max(1, jmax // 2), jmax})
    lam, ell = cfg['lambda'], cfg['ell']
    rows = []
    lap = build_laplacian(box)
    for r in _coupling_values(mu):
        real = conditioned_realization(spec, mu, lam, cfg['seeds'][0], box, index, r, ell)
        omega = float(real.couplings[index])
        for E in cfg['energies']:
            for j in halfwidths:
                g = make_weyl_vector(E, j, center, box, spec=spec)
                free = free_residual(g, lap)
                res = weyl_residual_check(real, E, r, g, ell)
                rows.append({'E': E, 'r': r, 'omega': omega, 'j': j, 'free_residual': free,
                             'residual': res, 'bound': free + lam / ell,
                             'pass': res <= free + lam / ell})
    checks = {'triangle_bound': all(row['pass'] for row in rows)}
    top = max(halfwidths)
    checks['target_at_largest_window'] = all(
        row['residual'] <= cfg['residual_target'] for row in rows if row['j'] == top)
    mono = True
    for r in _coupling_values(mu):
        for E in cfg['energies']:
            seq = [row['residual'] for row in rows if row['r'] == r and row['E'] == E]
            mono &= all(b <= 1.1 * a for a, b in zip(seq, seq[1:]))
    checks['decreasing_in_window'] = mono
    columns = ['E', 'r', 'omega', 'j', 'free_residual', 'residual', 'bound', 'pass']
    return rows, columns, checks, {'max_feasible_halfwidth': jmax}


def _spectrum(cfg):
    box = cfg.box()
    mu, lam = cfg.distribution(), cfg['lambda']
    nu = cfg['nu']
    prediction = predict_essential_spectrum(nu, lam, mu)
    allowed = predict_essential_spectrum(nu, 0.0, mu).fattened(lam * mu.E_infty)
    lap = build_laplacian(box)
    spec = cfg.potential() if cfg['K'] and box.boundary is Boundary.DIRICHLET else None
    rows = []
    for seed in cfg['seeds']:
        if spec is None or lam == 0:
            H = lap
        else:
            H = sample_realization(spec, mu, lam, seed, box).hamiltonian(lap)
        w = eigendecompose(H).eigenvalues
        outside = int(np.count_nonzero(~allowed.contains(w, 1e-10)))
        rows.append({'seed': seed, 'lambda': lam, 'n_eigenvalues': len(w), 'min': w.min(),
                     'max': w.max(), 'outside': outside, 'pass': outside == 0})
    checks = {'containment': all(r['pass'] for r in rows)}
    extras = {'prediction': prediction.to_json(), 'allowed': allowed.to_json()}
    return rows, ['seed', 'lambda', 'n_eigenvalues', 'min', 'max', 'outside', 'pass'], \
        checks, extras


def _dos(cfg):
    box = cfg.box()
    mu, lam = cfg.distribution(), cfg['lambda']
    lap = build_laplacian(box)
    if cfg['K'] and lam and box.boundary is Boundary.DIRICHLET:
        H = sample_realization(cfg.potential(), mu, lam, cfg['seeds'][0], box).hamiltonian(lap)
    else:
        H = lap
    prediction = predict_essential_spectrum(cfg['nu'], lam, mu)
    dos = density_of_states(eigendecompose(H), cfg['bins'], prediction)
    rows = [{'bin_lo': lo, 'bin_hi': hi, 'density': d}
            for lo, hi, d in zip(dos.edges[:-1], dos.edges[1:], dos.density)]
    checks = {'normalized': bool(np.isclose(np.sum(dos.density * np.diff(dos.edges)), 1.0))}
    return rows, ['bin_lo', 'bin_hi', 'density'], checks, \
        {'outside_fraction': dos.outside_fraction}


DISPATCH = {
    'torus-lemma': _torus, 'commutator-identity': _commutator_identity,
    'hypothesis-check': _hypothesis, 'lemma1': _lemma1, 'mourre': _mourre,
    'lambda-scan': _lambda_scan, 'weyl': _weyl, 'spectrum': _spectrum, 'dos': _dos,
}


def run(config, output_dir=None):
    """Execute one experiment; write its data file and manifest."""
    if not isinstance(config, ExperimentConfig):
        config = validate(config)
    start = time.perf_counter()
    rows, columns, checks, extras = DISPATCH[config.experiment](config)
    text = _render(rows, columns, config['format'])
    path = config['output_path']
    if output_dir is not None:
        path = os.path.join(output_dir, path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        fh.write(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    manifest = RunManifest(
        config=config.values, version=__version__, seeds=list(config['seeds']),
        wall_time=time.perf_counter() - start, checks={k: bool(v) for k, v in checks.items()},
        data_files={os.path.basename(path): digest}, extras=extras)
    with open(path + '.manifest.json', 'w', encoding='utf-8') as fh:
        fh.write(manifest.to_json() + '\n')
    return manifest


def main(argv=None):
    parser = argparse.ArgumentParser(prog='mourrelab', description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest='command', required=True)
    for name in EXPERIMENTS + ('validate',):
        p = sub.add_parser(name)
        p.add_argument('config', help='JSON config file, or - for stdin')
        if name != 'validate':
            p.add_argument('-o', '--output', help='override output_path')
    args = parser.parse_args(argv)
    text = sys.stdin.read() if args.config == '-' else open(args.config).read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"<root>: not valid JSON ({exc})", file=sys.stderr)
        return 2
    if args.command != 'validate' and isinstance(raw, dict):
        if raw.setdefault('experiment', args.command) != args.command:
            print(f"experiment: config names {raw['experiment']!r}, "
                  f"subcommand is {args.command!r}", file=sys.stderr)
            return 2
        if args.output:
            raw['output_path'] = args.output
    try:
        cfg = validate(raw)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.command == 'validate':
        print(cfg.to_json())
        return 0
    try:
        manifest = run(cfg)
    except (CapacityError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for name, ok in manifest.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if manifest.passed else 1
