"""Command-line front end.

Usage::

    qmlp {embed,solve,project,verify,experiment} --config FILE [--seed N] [--out DIR] [--threads N]

The config is an INI file (sections ``[distribution]``, ``[embedding]``,
``[model_class]``, ``[experiment]``, plus ``[run]``, ``[solve]``,
``[project]`` and ``[verify]`` where needed) whose values are JSON
literals; bare words are read as strings.  Relative paths are resolved
against the config's directory.  Every command writes ``manifest.json``
next to its outputs, listing the fully resolved configuration.

Exit codes: 0 success, 2 config error, 3 numerical or runtime failure,
4 verification or bound failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .checks import prop1_check, prop3_bound_check
from .divergences import default_povm_family, measured_re, pinsker_gap, qre
from .embedding import (
    FeatureEmbedding,
    covariance_embed,
    embedding_rank,
    empirical_embed,
    make_embedding,
    perturbed_empirical,
    reduce_to_span,
    sample_iid,
)
from .experiments import (
    CenteredEmbedding,
    ExperimentConfig,
    ExperimentError,
    FixedMatrices,
    matrix_concentration_check,
    regret_comparison,
    run_concentration_experiment,
    run_rate_experiment,
    summary_csv,
    table_csv,
    tails_csv,
    trials_csv,
)
from .io import load_matrix, matrix_to_json, vectors_from_json
from .linalg import NumericalError, eig_hermitian, random_unitary
from .models import FiniteSet, FixedBasisDiagonal, Full, SpectralFloor, model_from_json
from .rng import stream
from .solve import ProjectionResult, diagonal_family, i_projection, pythagorean_residual, qmlp
from .states import as_density, computational_povm, pinch, random_density

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_CHECKS = ("prop1", "pythagorean", "prop3", "pinsker")


class ConfigError(ValueError):
    pass


class VerificationFailed(RuntimeError):
    pass


# config ----------------------------------------------------------------------


def _literal(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


class Config:
    """Parsed INI config with defaults recorded as they are read."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(self.path))
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        self.sha256 = hashlib.sha256(text.encode()).hexdigest()
        self.sections = {s: {k: _literal(v) for k, v in parser[s].items()} for s in parser.sections()}
        self.resolved: dict[str, dict] = {}

    def get(self, section: str, key: str, default=None, required: bool = False):
        sec = self.sections.get(section, {})
        if key in sec:
            value = sec[key]
        elif required:
            raise ConfigError(f"[{section}] {key} is required")
        else:
            value = default
        self.resolved.setdefault(section, {})[key] = value
        return value

    def path_of(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.path.parent / p


@dataclass
class Run:
    config: Config
    seed: int
    out: Path
    threads: int


def build_pmf(cfg: Config) -> np.ndarray:
    pmf = cfg.get("distribution", "pmf")
    if pmf is None:
        k = cfg.get("distribution", "uniform", required=True)
        if not isinstance(k, int) or k < 1:
            raise ConfigError("[distribution] uniform must be a positive integer")
        pmf = [1.0 / k] * k
    try:
        p = np.asarray(pmf, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[distribution] pmf is not a list of numbers: {exc}") from exc
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigError("[distribution] pmf must be non-negative and sum to one")
    return p


def build_embedding(cfg: Config, alphabet_size: int, seed: int) -> FeatureEmbedding:
    vectors_file = cfg.get("embedding", "vectors_file")
    if vectors_file is not None:
        return FeatureEmbedding.load(cfg.path_of(vectors_file))
    kind = cfg.get("embedding", "kind", "onehot")
    kwargs = {}
    if kind == "simplex_cap":
        kwargs["angle"] = float(cfg.get("embedding", "angle", required=True))
    if kind == "fourier":
        kwargs["bandwidth"] = float(cfg.get("embedding", "bandwidth", 1.0))
    return make_embedding(kind, alphabet_size, cfg.get("embedding", "dim"), seed=int(cfg.get("embedding", "seed", seed)), **kwargs)


def build_model(cfg: Config, dim: int, rho_p=None):
    model_file = cfg.get("model_class", "file")
    if model_file is not None:
        model = model_from_json(json.loads(cfg.path_of(model_file).read_text()))
    else:
        variant = cfg.get("model_class", "variant", "full")
        if variant == "full":
            model = Full(dim)
        elif variant == "spectral_floor":
            model = SpectralFloor(dim, float(cfg.get("model_class", "delta", required=True)))
        elif variant == "fixed_basis_diagonal":
            basis = cfg.get("model_class", "basis", "computational")
            if basis == "computational":
                v = np.eye(dim, dtype=complex)
            elif basis == "eigen_rho_p":
                if rho_p is None:
                    raise ConfigError("basis eigen_rho_p needs a distribution")
                v = eig_hermitian(rho_p).eigenvectors
            else:
                v = vectors_from_json(json.loads(cfg.path_of(basis).read_text()))
            model = FixedBasisDiagonal(v)
        else:
            raise ConfigError(f"[model_class] variant {variant!r} needs a model file (use file = ...)")
    if model.dim != dim:
        raise ConfigError(f"model class has dimension {model.dim}, the state space has {dim}")
    return model


def _source(cfg: Config, seed: int):
    """pmf, embedding (reduced to the supported span unless disabled) and rho_p."""
    p = build_pmf(cfg)
    emb = build_embedding(cfg, p.size, seed)
    if p.size != emb.alphabet_size:
        raise ConfigError("pmf and embedding alphabets differ")
    if cfg.get("embedding", "reduce_span", True):
        emb = reduce_to_span(emb, np.flatnonzero(p > 0))
    return p, emb, covariance_embed(p, emb)


# manifest ----------------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_path: str
    config_sha256: str
    tool_version: str
    master_seed: int
    command: str
    started: str
    finished: str = ""
    outputs: list = field(default_factory=list)
    resolved_config: dict = field(default_factory=dict)

    def add_output(self, path: Path) -> None:
        self.outputs.append({"path": path.name, "sha256": _sha256_file(path)})

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))

    def verify(self, base=None) -> bool:
        """Whether the config and every listed output still hash to the stored values."""
        cfg = Path(self.config_path)
        if not cfg.exists() or _sha256_file(cfg) != self.config_sha256:
            return False
        base = Path(base) if base is not None else cfg.parent
        return all((base / o["path"]).exists() and _sha256_file(base / o["path"]) == o["sha256"] for o in self.outputs)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write(out: Path, name: str, text: str, manifest: RunManifest) -> Path:
    path = out / name
    path.write_text(text)
    manifest.add_output(path)
    return path


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def result_to_json(res: ProjectionResult) -> dict:
    return {
        "optimizer": matrix_to_json(res.optimizer),
        "value": float(res.value) if np.isfinite(res.value) else None,
        "iterations": int(res.iterations),
        "kkt_residual": float(res.kkt_residual),
        "status": res.status,
        "dual_params": None if res.dual_params is None else [float(b) for b in res.dual_params],
    }


# commands ----------------------------------------------------------------------


def cmd_embed(run: Run, manifest: RunManifest) -> int:
    cfg = run.config
    p, emb, rho_p = _source(cfg, run.seed)
    _write(run.out, "rho_p.json", _json_text(matrix_to_json(rho_p)), manifest)
    lam = eig_hermitian(rho_p).eigenvalues
    print(f"dimension: {emb.dim}  embedding rank: {embedding_rank(emb)}")
    print("spectrum of rho_p: " + " ".join(f"{x:.10g}" for x in lam))
    print(f"min eigenvalue: {lam[-1]:.10g}")
    n = cfg.get("embed", "sample_n")
    if n is not None:
        sample = sample_iid(p, int(n), run.seed, "embed")
        rho_hat = empirical_embed(sample, emb)
        _write(run.out, "rho_hat.json", _json_text(matrix_to_json(rho_hat)), manifest)
        print(f"sample n = {n}: trace of rho_hat = {np.trace(rho_hat).real:.15g}")
    return EXIT_OK


def _solve_input(cfg: Config, seed: int):
    state_file = cfg.get("solve", "state_file")
    if state_file is not None:
        rho = as_density(load_matrix(cfg.path_of(state_file)))
        return rho, rho
    _, emb, rho_p = _source(cfg, seed)
    state = cfg.get("solve", "state", "rho_p")
    if state == "rho_p":
        return rho_p, rho_p
    p = build_pmf(cfg)
    n = int(cfg.get("solve", "n", required=True))
    rho_hat = empirical_embed(sample_iid(p, n, seed, "solve"), emb)
    if state == "rho_hat":
        return rho_hat, rho_p
    if state == "rho_n":
        return perturbed_empirical(rho_hat, n), rho_p
    raise ConfigError(f"[solve] state must be rho_p, rho_hat or rho_n, got {state!r}")


def cmd_solve(run: Run, manifest: RunManifest) -> int:
    rho, rho_p = _solve_input(run.config, run.seed)
    model = build_model(run.config, rho.shape[0], rho_p)
    res = qmlp(rho, model)
    if res.status == "not_converged":
        raise NumericalError("solver did not converge")
    _write(run.out, "solve_result.json", _json_text(result_to_json(res)), manifest)
    print(f"status: {res.status}  value: {res.value:.10g}  kkt residual: {res.kkt_residual:.3e}")
    return EXIT_OK


def cmd_project(run: Run, manifest: RunManifest) -> int:
    """I-projection of ``sigma`` onto the states diagonal in a basis."""
    cfg = run.config
    sigma_file = cfg.get("project", "sigma_file")
    rng = stream(run.seed, "project")
    if sigma_file is not None:
        sigma = as_density(load_matrix(cfg.path_of(sigma_file)))
    else:
        sigma = random_density(int(cfg.get("project", "dim", 2)), rng)
    d = sigma.shape[0]
    basis = cfg.get("project", "basis", "computational")
    if basis == "computational":
        v = np.eye(d, dtype=complex)
    elif basis == "random":
        v = random_unitary(d, rng)
    else:
        v = vectors_from_json(json.loads(cfg.path_of(basis).read_text()))
    fam = diagonal_family(v)
    res = i_projection(sigma, fam)
    if not res.converged:
        raise NumericalError(f"I-projection returned status {res.status}")
    out = result_to_json(res)
    out["sigma"] = matrix_to_json(sigma)
    out["pinch_trace_distance"] = float(np.abs(np.linalg.eigvalsh(res.optimizer - pinch(sigma, v))).sum())
    _write(run.out, "projection.json", _json_text(out), manifest)
    print(f"value: {res.value:.10g}  iterations: {res.iterations}  moment residual: {res.kkt_residual:.3e}")
    print(f"trace distance to the pinching of sigma: {out['pinch_trace_distance']:.3e}")
    return EXIT_OK


def _corrupted_pinch(sigma, basis):
    """Pinching in a slightly rotated basis (negative control for verify)."""
    v = np.asarray(basis, dtype=complex)
    d = v.shape[0]
    g = np.zeros((d, d))
    g[0, 1], g[1, 0] = 0.05, -0.05
    w, u = np.linalg.eigh(1j * g)
    rot = (u * np.exp(-1j * w)) @ u.conj().T
    return pinch(sigma, v @ rot)


def _check_prop1(cases, seed, delta, pinch_fn):
    """Each case checks a spectral floor, a fixed-basis and a finite class."""
    worst, failures = 0.0, 0
    for k in range(cases):
        rng = stream(seed, "prop1", k)
        d = 2 + k % 2
        rho = random_density(d, rng)
        v = eig_hermitian(rho).eigenvectors
        lam_states = [rng.dirichlet(np.ones(d)) for _ in range(3)]
        models = [
            SpectralFloor(d, min(delta, 1.0 / d)),
            FixedBasisDiagonal(v),
            FiniteSet(tuple((v * (0.5 * q + 0.5 / d)) @ v.conj().T for q in lam_states)),
        ]
        bad = False
        for model in models:
            try:
                rep = prop1_check(rho, model, pinch_fn)
            except ValueError:
                failed, worst = True, np.inf
            else:
                failed = not rep.holds
                worst = max(worst, abs(rep.gap))
            bad = bad or failed
        failures += bad
    return failures, worst


def _check_pythagorean(cases, seed):
    worst, failures = 0.0, 0
    for k in range(cases):
        rng = stream(seed, "pythagorean", k)
        d = 2 + k % 3
        v = random_unitary(d, rng)
        sigma = random_density(d, rng)
        rho = (v * rng.dirichlet(np.ones(d))) @ v.conj().T
        r = pythagorean_residual(rho, sigma, diagonal_family(v))
        worst = max(worst, abs(r))
        failures += abs(r) > 1e-7
    return failures, worst


def _check_prop3(cases, seed, delta):
    worst, failures = np.inf, 0
    for k in range(cases):
        rng = stream(seed, "prop3", k)
        d = 2 + k % 3
        rho = random_density(d, rng)
        rho_t = as_density(0.8 * rho + 0.2 * random_density(d, rng))
        model = [Full(d), SpectralFloor(d, min(delta, 1.0 / d)), FixedBasisDiagonal(random_unitary(d, rng))][k % 3]
        rep = prop3_bound_check(rho, rho_t, model)
        worst = min(worst, rep.slack1, rep.slack2)
        failures += not rep.holds
    return failures, worst


def _check_pinsker(cases, seed, n_random):
    worst, failures = np.inf, 0
    for k in range(cases):
        rng = stream(seed, "pinsker", k)
        d = 2 + k % 3
        rho, sigma = random_density(d, rng), random_density(d, rng)
        q = qre(rho, sigma)
        m = measured_re(rho, sigma, default_povm_family(rho, sigma, n_random=n_random, seed=k))
        g = pinsker_gap(rho, sigma)
        worst = min(worst, q - m, g)
        failures += (m > q + 1e-9) or (g < -1e-9)
    return failures, worst


def cmd_verify(run: Run, manifest: RunManifest) -> int:
    cfg = run.config
    checks = cfg.get("verify", "checks", list(DEFAULT_CHECKS))
    if not isinstance(checks, list) or not checks:
        raise ConfigError("[verify] checks must be a non-empty list")
    unknown = set(checks) - set(DEFAULT_CHECKS)
    if unknown:
        raise ConfigError(f"unknown checks: {sorted(unknown)}")
    cases = int(cfg.get("verify", "cases", 50))
    if cases < 1:
        raise ConfigError("[verify] cases must be positive")
    delta = float(cfg.get("verify", "delta", 0.3))
    fault = cfg.get("verify", "fault_injection")
    if fault not in (None, "pinch"):
        raise ConfigError(f"unknown fault injection {fault!r}")
    pinch_fn = _corrupted_pinch if fault == "pinch" else pinch
    report = {}
    for name in checks:
        if name == "prop1":
            failures, worst = _check_prop1(cases, run.seed, delta, pinch_fn)
            metric = "max |quantum - classical|"
        elif name == "pythagorean":
            failures, worst = _check_pythagorean(cases, run.seed)
            metric = "max |residual|"
        elif name == "prop3":
            failures, worst = _check_prop3(cases, run.seed, delta)
            metric = "min slack"
        else:
            n_random = int(cfg.get("verify", "povm_random_bases", 8))
            if n_random < 0:
                raise ConfigError("[verify] povm_random_bases must be non-negative")
            failures, worst = _check_pinsker(cases, run.seed, n_random)
            metric = "min of qre - measured and pinsker gap"
        report[name] = {"passed": failures == 0, "failures": int(failures), "cases": cases, metric: float(worst)}
        print(f"{'PASS' if failures == 0 else 'FAIL'} {name}: {failures} failures in {cases} cases, {metric} = {worst:.3e}")
    _write(run.out, "verify_report.json", _json_text(report), manifest)
    if not all(r["passed"] for r in report.values()):
        raise VerificationFailed("verification failed")
    return EXIT_OK


def _experiment_config(cfg: Config, seed: int, threads: int) -> ExperimentConfig:
    p, emb, rho_p = _source(cfg, seed)
    model = build_model(cfg, emb.dim, rho_p)
    trials = cfg.get("experiment", "trials", required=True)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("[experiment] trials must be a positive integer")
    try:
        return ExperimentConfig(
            p,
            emb,
            model,
            tuple(cfg.get("experiment", "n_grid", required=True)),
            trials,
            seed,
            tuple(cfg.get("experiment", "tail_thresholds", [])),
            cfg.get("experiment", "regime"),
            reduce_span=False,  # already applied by _source
            threads=threads,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _regret_povm(cfg: Config, ecfg):
    """Measurement for the regret table: ``[experiment] povm`` is
    ``eigen_rho_p`` (default) or ``computational``."""
    choice = cfg.get("experiment", "povm", "eigen_rho_p")
    if choice == "eigen_rho_p":
        return None
    if choice == "computational":
        return computational_povm(ecfg.working_embedding().dim)
    raise ConfigError(f"unknown povm {choice!r}; expected eigen_rho_p or computational")


def cmd_experiment(run: Run, manifest: RunManifest) -> int:
    cfg = run.config
    kind = cfg.get("experiment", "kind", "rate")
    holds = True
    if kind in ("rate", "concentration", "regret"):
        ecfg = _experiment_config(cfg, run.seed, run.threads)
        if kind == "rate":
            res = run_rate_experiment(ecfg)
            _write(run.out, "trials.csv", trials_csv(res.run_id, res.records), manifest)
            _write(run.out, "summary.csv", summary_csv(res.summary), manifest)
            _write(run.out, "bound_context.json", _json_text(res.context_json()), manifest)
            holds = res.holds
            print(f"log-log slope (top half of n_grid): {res.slope_top_half:.4f}  (all n: {res.slope_all:.4f})")
        elif kind == "concentration":
            res = run_concentration_experiment(ecfg)
            _write(run.out, "trials.csv", trials_csv(res.run_id, res.records), manifest)
            _write(run.out, "tails.csv", tails_csv(res.rows), manifest)
            ctx = {"contexts": [c.to_json() for _, c in sorted(res.contexts.items())],
                   "epsilon_as": {str(n): e for n, e in sorted(res.epsilon_as.items())}}
            _write(run.out, "bound_context.json", _json_text(ctx), manifest)
            holds = res.holds
        else:
            rows = regret_comparison(ecfg, _regret_povm(cfg, ecfg))
            _write(run.out, "regret.csv", table_csv(rows), manifest)
            holds = all(r["ordering_holds"] for r in rows)
    elif kind in ("hoeffding", "bernstein"):
        p, emb, rho_p = _source(cfg, run.seed)
        n = int(cfg.get("experiment", "n", required=True))
        trials = cfg.get("experiment", "trials", required=True)
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError("[experiment] trials must be a positive integer")
        t_grid = [float(t) for t in cfg.get("experiment", "tail_thresholds", required=True)]
        scale = float(cfg.get("experiment", "scale", 1.0 / n))
        if kind == "bernstein":
            source = CenteredEmbedding(p, emb, scale)
        else:
            sample = sample_iid(p, n, run.seed, "hoeffding-matrices")
            proj = np.einsum("xi,xj->xij", emb.vectors, emb.vectors.conj())
            source = FixedMatrices(scale * (proj[sample.symbols] - rho_p))
        res = matrix_concentration_check(kind, source, n, t_grid, trials, run.seed)
        _write(run.out, "matrix_tails.csv", tails_csv(res.rows), manifest)
        extra = {"kind": kind, "n": n, "d": res.d, "variance": res.v2, "M": res.m, "mean": res.mean}
        _write(run.out, "matrix_context.json", _json_text(extra), manifest)
        holds = res.holds
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    print(f"bounds hold: {holds}")
    if not holds:
        raise VerificationFailed("an empirical quantity exceeded its bound")
    return EXIT_OK


COMMANDS = {
    "embed": cmd_embed,
    "solve": cmd_solve,
    "project": cmd_project,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def _threads(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("QIP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QIP_THREADS must be an integer, got {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmlp", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).strip().split("\n")[0])
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, help="worker threads (default: QIP_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = Config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("run", "seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        cfg.resolved.setdefault("run", {})["seed"] = seed
        threads = _threads(args.threads)
        if threads < 1:
            raise ConfigError("threads must be positive")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(cfg, seed, out, threads)
    manifest = RunManifest(str(cfg.path.resolve()), cfg.sha256, __version__, seed, args.command, _now())
    code = EXIT_OK
    try:
        code = COMMANDS[args.command](run, manifest)
    except (ConfigError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except (NumericalError, ExperimentError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    except VerificationFailed as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        code = EXIT_VERIFY
    manifest.finished = _now()
    manifest.resolved_config = cfg.resolved
    manifest.write(out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
