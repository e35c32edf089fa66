"""Command line: ``mvpacda {gen,eval,certify,learn} --config run.json``.

Each invocation reads one JSON config; ``--set a.b=value`` overrides a
field (the value is parsed as JSON when possible). Every randomized command
requires an explicit ``seed``. Exit codes: 0 success, 2 config error,
3 missing input, 4 schema mismatch, 5 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import _jsonfmt
from . import bounds as B
from . import certify as C
from ._random import derive_seed
from .domains import (SchemaMismatchError, draw_sample, read_domain, read_sample_jsonl,
                      synth_shift_pair, write_domain, write_sample_jsonl)
from .learner import minimize_da_bound
from .risks import empirical_profile, lambda_rho
from .voters import (build_stump_grid, dumps_ensemble, gibbs_posterior_ensemble, read_ensemble,
                     uniform_ensemble)

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_SCHEMA, EXIT_CERT = 0, 2, 3, 4, 5


class ConfigError(Exception):
    pass


class MissingInput(Exception):
    pass


# -- config handling ----------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, value = assignment.split("=", 1)
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {part} is not an object")
    node[parts[-1]] = _parse_value(value)


def load_config(path: str | None, overrides) -> dict:
    cfg = {}
    if path is not None:
        if not os.path.exists(path):
            raise MissingInput(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    for a in overrides or ():
        apply_override(cfg, a)
    return cfg


def _get(cfg: dict, key: str, kind=None, default=...):
    if key not in cfg:
        if default is ...:
            raise ConfigError(f"missing config field {key!r}")
        return default
    value = cfg[key]
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool)):
        raise ConfigError(f"config field {key!r} has the wrong type")
    return value


def _seed(cfg: dict) -> int:
    # an unset seed is an error, never a fresh random value
    return _get(cfg, "seed", int)


def _input(path: str) -> str:
    if not os.path.exists(path):
        raise MissingInput(f"input file not found: {path}")
    return path


def _params(cfg: dict, **sizes) -> B.BoundParams:
    raw = dict(_get(cfg, "params", dict, {}))
    raw.update({k: v for k, v in sizes.items() if v is not None})
    try:
        return B.BoundParams(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def _bound_ids(cfg: dict) -> list[str]:
    ids = _get(cfg, "bounds", list)
    for b in ids:
        if b not in C.BOUNDS:
            raise ConfigError(f"unknown bound {b!r}; known: {', '.join(C.BOUNDS)}")
    return ids


# -- outputs -------------------------------------------------------------------

def _write(out_dir: Path, name: str, text: str) -> Path:
    path = out_dir / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _report_digests(paths) -> None:
    for p in paths:
        print(f"{_digest(p)}  {p.name}")


# -- commands --------------------------------------------------------------------

def cmd_gen(cfg: dict, out_dir: Path, threads=None) -> int:
    seed = _seed(cfg)
    dims = _get(cfg, "dims", list)
    n_views = _get(cfg, "n_views", int, len(dims))
    try:
        src, tgt = synth_shift_pair(n_views, dims, _get(cfg, "atoms", int),
                                    float(_get(cfg, "shift", (int, float))),
                                    noisy_views=tuple(_get(cfg, "noisy_views", list, [])),
                                    seed=seed, separation=float(_get(cfg, "separation", (int, float), 1.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid generator config: {exc}") from exc
    written = [out_dir / "source_domain.json", out_dir / "target_domain.json"]
    write_domain(src, written[0], "source")
    write_domain(tgt, written[1], "target")
    samples = _get(cfg, "samples", dict, None)
    if samples is not None:
        m = _get(samples, "m", int)
        n = _get(samples, "n", int, m)
        S = draw_sample(src, m, True, derive_seed(seed, 10))
        T = draw_sample(tgt, n, False, derive_seed(seed, 11))
        written += [out_dir / "source_sample.jsonl", out_dir / "target_sample.jsonl"]
        write_sample_jsonl(S, written[2])
        write_sample_jsonl(T, written[3])
    ens = _get(cfg, "ensemble", dict, None)
    if ens is not None:
        hset = build_stump_grid(src, _get(ens, "n_thresholds", int, 3))
        temperature = float(_get(ens, "temperature", (int, float), 0.0))
        E = gibbs_posterior_ensemble(hset, src, temperature) if temperature else uniform_ensemble(hset)
        written.append(_write(out_dir, "ensemble.json", dumps_ensemble(E)))
    _report_digests(written)
    return EXIT_OK


def cmd_eval(cfg: dict, out_dir: Path, threads=None) -> int:
    S = read_sample_jsonl(_input(_get(cfg, "source_sample", str)))
    T = read_sample_jsonl(_input(_get(cfg, "target_sample", str)))
    E = read_ensemble(_input(_get(cfg, "ensemble", str)))
    E.schema.check(S.schema)
    E.schema.check(T.schema)
    if not S.labeled:
        raise ConfigError("source_sample must be labeled")
    ids = _bound_ids(cfg)
    mode = _get(cfg, "mode", str, "literal")
    lam = _get(cfg, "lambda", (int, float), None)
    if lam is None and "source_domain" in cfg and "target_domain" in cfg:
        src = read_domain(_input(cfg["source_domain"]))
        tgt = read_domain(_input(cfg["target_domain"]))
        lam = lambda_rho(E, src, tgt, mode)
    if "thm9" in ids and lam is None:
        raise ConfigError("thm9 needs 'lambda' or both domain files")
    p = _params(cfg, m=S.m, n=T.m, kl_posterior=E.kl_posterior(), kl_hyper=E.kl_hyper())
    prof = empirical_profile(E, S, T, mode)
    emp = {"gibbs_risk": prof.gibbs_risk, "mv_disagreement": prof.mv_disagreement,
           "domain_disagreement": prof.domain_disagreement}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(B.CSV_COLUMNS)
    for b in ids:
        writer.writerow(C.evaluate_bound(b, emp, p, lam or 0.0).csv_row())
    path = _write(out_dir, "bounds.csv", buf.getvalue())
    _report_digests([path])
    return EXIT_OK


def cmd_certify(cfg: dict, out_dir: Path, threads=None) -> int:
    seed = _seed(cfg)
    src = read_domain(_input(_get(cfg, "source_domain", str)))
    tgt = read_domain(_input(_get(cfg, "target_domain", str)))
    E = read_ensemble(_input(_get(cfg, "ensemble", str)))
    E.schema.check(src.schema)
    E.schema.check(tgt.schema)
    ids = _bound_ids(cfg)
    readings = _get(cfg, "readings", list, ["per_sample", "expectation"])
    for r in readings:
        if r not in C.READINGS:
            raise ConfigError(f"unknown reading {r!r}")
    mode = _get(cfg, "mode", str, "literal")
    trials = _get(cfg, "trials", int)
    exp_trials = _get(cfg, "expectation_trials", int, 500)
    p = _params(cfg)
    reports = []
    for b in ids:
        for r in readings:
            n_trials = trials if r == "per_sample" else exp_trials
            res = C.certify_bound(b, E, src, tgt, p, n_trials, seed, reading=r, mode=mode,
                                  threads=threads)
            reports.append(res)
    text = "[\n" + ",\n".join(_jsonfmt.dumps(r.to_json()) for r in reports) + "\n]\n"
    path = _write(out_dir, "certification.json", text)
    _report_digests([path])
    for r in reports:
        print(f"{r.bound_id:6s} {r.reading:12s} violations={r.violations}/{r.trials} "
              f"{'PASS' if r.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CERT


def cmd_learn(cfg: dict, out_dir: Path, threads=None) -> int:
    seed = _seed(cfg)
    S = read_sample_jsonl(_input(_get(cfg, "source_sample", str)))
    T = read_sample_jsonl(_input(_get(cfg, "target_sample", str)))
    if not S.labeled:
        raise ConfigError("source_sample must be labeled")
    if "ensemble" in cfg:
        E0 = read_ensemble(_input(_get(cfg, "ensemble", str)))
    else:
        E0 = uniform_ensemble(build_stump_grid(S, _get(cfg, "n_thresholds", int, 3)))
    E0.schema.check(S.schema)
    E0.schema.check(T.schema)
    p = _params(cfg, m=S.m, n=T.m)
    trace = minimize_da_bound(E0, S, T.unlabeled(), p, _get(cfg, "max_iters", int, 100),
                              float(_get(cfg, "eta0", (int, float), 1.0)), seed,
                              mode=_get(cfg, "mode", str, "literal"))
    paths = [_write(out_dir, "trace.json", trace.dumps()),
             _write(out_dir, "learned_ensemble.json", dumps_ensemble(trace.ensemble))]
    _report_digests(paths)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "eval": cmd_eval, "certify": cmd_certify, "learn": cmd_learn}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvpacda",
                                     description="Multi-view domain adaptation PAC-Bayes experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field by dotted path (repeatable)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for certification (default: all cores)")
    parser.add_argument("--out-dir", default=".", help="directory for outputs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out_dir = Path(args.out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory: {exc}") from exc
        return COMMANDS[args.command](cfg, out_dir, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInput as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except SchemaMismatchError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (PermissionError, IsADirectoryError) as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
