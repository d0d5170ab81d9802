"""Command line entry point: ``pseudochain <command> [flags]``.

Every command accepts ``--config RUN.json``; keys match the long flag names
(with underscores) and explicit flags override them.  Outputs carry a header
naming the command and a hash of the resolved configuration, and nothing is
written when a command fails.  Exit codes: 0 ok, 2 invalid input, 3 size cap,
4 numerical or inference failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dynamics
from .blackbox import BlackBoxChain
from .errors import AmbiguousStructure, PseudoChainError, ValidationError
from .topology import PseudoChainSpec, effective_model, load_spec

log = logging.getLogger("pseudochain")

DEFAULTS = {
    "spec": None,
    "mode": "exact",
    "shots": 100_000,
    "seed": 0,
    "out": None,
    "tmax": 10.0,
    "points": 201,
    "order": 12,
    "size_bound": 4,
    "block": None,
    "prior": 0.5,
    "rounds": 10,
    "trapped": None,
}

AMBIGUOUS_EXIT = 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # defaults are None so that only explicit flags override the run file
    common.add_argument("--config", type=Path, help="JSON run file; flags win on conflict")
    common.add_argument("--spec", type=Path, default=None, help="pseudo-chain spec JSON")
    common.add_argument("--mode", choices=("exact", "sampled"), default=None)
    common.add_argument("--shots", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    common.add_argument("--tmax", type=float, default=None)
    common.add_argument("--points", type=int, default=None)
    common.add_argument("--order", type=int, default=None)
    common.add_argument("--size-bound", dest="size_bound", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pseudochain", description="xx pseudo-chain simulation and inference")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="end-site time series as CSV")
    sub.add_parser("tomography", parents=[common], help="effective chain from the survival amplitude")
    sub.add_parser("infer", parents=[common], help="block structure behind a hidden spec")
    flush = sub.add_parser("flush", parents=[common], help="trap-emptying protocol outcome log")
    flush.add_argument("--block", type=int, default=None, help="zero-based trap block (default: first oversized)")
    flush.add_argument("--prior", type=float, default=None, help="prior trap occupation probability")
    flush.add_argument("--rounds", type=int, default=None)
    flush.add_argument("--trapped", choices=("yes", "no"), default=None, help="fix the hidden branch")
    sub.add_parser("oracle", parents=[common], help="exact Taylor coefficients as JSON")
    sub.add_parser("calibrate", parents=[common], help="write the even-order calibration report")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                run = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read run file {args.config}: {exc}") from exc
        unknown = set(run) - set(DEFAULTS) - {"command"}
        if unknown:
            raise ValidationError(f"unknown run-file keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in run.items() if k != "command"})
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    for key in ("spec", "out"):
        if cfg[key] is not None:
            cfg[key] = str(cfg[key])
    if cfg["points"] < 1 or cfg["tmax"] < 0 or cfg["order"] < 0 or cfg["shots"] < 1:
        raise ValidationError("points, shots must be positive and tmax, order non-negative")
    if cfg["size_bound"] < 2:
        raise ValidationError("size bound must be at least 2")
    return cfg


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def _header(cfg: dict) -> str:
    return f"pseudochain {cfg['command']} config {config_hash(cfg)}"


def _spec(cfg: dict) -> PseudoChainSpec:
    if cfg["spec"] is None:
        raise ValidationError("--spec is required")
    try:
        return load_spec(cfg["spec"])
    except OSError as exc:
        raise ValidationError(f"cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec is not valid JSON: {exc}") from exc


def _box(cfg: dict, spec: PseudoChainSpec) -> BlackBoxChain:
    return BlackBoxChain(spec, mode=cfg["mode"], shots=cfg["shots"], seed=cfg["seed"])


def _json(cfg: dict, payload: dict) -> str:
    return json.dumps({"header": _header(cfg), **payload}, indent=2, sort_keys=False) + "\n"


def cmd_simulate(cfg: dict) -> str:
    spec = _spec(cfg)
    t = np.linspace(0.0, cfg["tmax"], cfg["points"])
    box = _box(cfg, spec)
    model = effective_model(spec)
    f = box.query_survival(t).values
    f_model = dynamics.survival_amplitude(model, t).values
    cols = {"survival_re": f.real, "survival_im": f.imag, "model_re": f_model.real, "model_im": f_model.imag}
    if spec.n_spins >= 2:
        cols["return_probability"] = box.query_two_excitation_return(t).values
    if spec.n_spins <= dynamics.TRACE_MAX_SPINS:
        cols["g_X"] = box.query_mixed_correlator("X", t).values
        cols["g_Y"] = box.query_mixed_correlator("Y", t).values
    buf = io.StringIO()
    buf.write(f"# {_header(cfg)}\n")
    buf.write(",".join(["t", *cols]) + "\n")
    for k, tk in enumerate(t):
        buf.write(",".join(f"{v:.17g}" for v in [tk, *(c[k] for c in cols.values())]) + "\n")
    return buf.getvalue()


def cmd_tomography(cfg: dict) -> str:
    from .tomography import run_tomography

    spec = _spec(cfg)
    box = _box(cfg, spec)
    # the grid flags set the first pass; later passes adapt it
    explicit = cfg["points"] != DEFAULTS["points"] or cfg["tmax"] != DEFAULTS["tmax"]
    kwargs = {}
    if explicit and cfg["points"] > 1:
        kwargs = {"dt": cfg["tmax"] / (cfg["points"] - 1), "n_points": cfg["points"]}
    report = run_tomography(box, **kwargs)
    return _json(cfg, report.to_dict())


def cmd_infer(cfg: dict) -> str:
    from .inference import iterate_structure

    spec = _spec(cfg)
    box = _box(cfg, spec)
    try:
        report = iterate_structure(box, size_bound=cfg["size_bound"])
    except AmbiguousStructure as exc:
        report = getattr(exc, "report", None)
        payload = {"status": "ambiguous", "message": str(exc)}
        if report is not None:
            payload.update(report.to_dict())
            payload["status"] = "ambiguous"
        raise _Ambiguous(_json(cfg, payload), str(exc)) from exc
    return _json(cfg, report.to_dict())


def cmd_flush(cfg: dict) -> str:
    from .traps import TrapScenario, find_discrimination_time, flush_protocol

    spec = _spec(cfg)
    block = cfg["block"]
    if block is None:
        oversized = [k for k, s in enumerate(spec.sizes) if s > 1]
        if not oversized:
            raise ValidationError("spec has no block that can hold a trapped excitation")
        block = oversized[0]
    rng = np.random.default_rng(cfg["seed"])
    scenario = TrapScenario.build(spec, int(block), float(cfg["prior"]), rng=rng)
    disc = find_discrimination_time(scenario)
    if disc is None:
        raise ValidationError("no discrimination time in the default window for this scenario")
    box = BlackBoxChain(spec, seed=cfg["seed"])
    trapped = None if cfg["trapped"] is None else cfg["trapped"] == "yes"
    result = flush_protocol(box, scenario, int(cfg["rounds"]), disc, trapped=trapped)
    buf = io.StringIO()
    buf.write(f"# {_header(cfg)}\n")
    buf.write(
        f"# t_star={disc.t:.17g} p_trapped={disc.p_trapped:.3e} p_untrapped={disc.p_untrapped:.6f} "
        f"trapped={'yes' if result.trapped else 'no'}\n"
    )
    buf.write("round,outcome,posterior\n")
    for r, o, q in result.rows():
        buf.write(f"{r},{o},{q:.17g}\n")
    return buf.getvalue()


def cmd_oracle(cfg: dict) -> str:
    from .modelchain import heisenberg_series

    spec = _spec(cfg)
    order = cfg["order"]
    model = effective_model(spec)
    payload = {"spec": spec.to_dict(), "model": model.to_dict(), "order": order}
    if spec.n_spins <= dynamics.TRACE_MAX_SPINS:
        gx, gy = dynamics.correlator_series(spec, order)
        payload["g_X"], payload["g_Y"] = gx.to_json(), gy.to_json()
    mx, my = heisenberg_series(model, order).correlators()
    payload["model_g_X"], payload["model_g_Y"] = mx.to_json(), my.to_json()
    if spec.n_spins >= 2:
        payload["return_probability"] = dynamics.return_probability_series(spec, order).to_json()
        payload["model_return_probability"] = dynamics.return_probability_series(
            model.as_pseudo_chain(), order
        ).to_json()
    return _json(cfg, payload)


def cmd_calibrate(cfg: dict) -> str:
    from .calibration import calibrate, render_report

    return render_report(calibrate(seed=cfg["seed"]))


COMMANDS = {
    "simulate": cmd_simulate,
    "tomography": cmd_tomography,
    "infer": cmd_infer,
    "flush": cmd_flush,
    "oracle": cmd_oracle,
    "calibrate": cmd_calibrate,
}


class _Ambiguous(Exception):
    def __init__(self, text: str, message: str):
        super().__init__(message)
        self.text = text


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        text = COMMANDS[cfg["command"]](cfg)
    except _Ambiguous as exc:
        # the partial report is the useful output of an ambiguous run
        _emit(exc.text, cfg["out"])
        print(f"pseudochain: ambiguous structure: {exc}", file=sys.stderr)
        return AMBIGUOUS_EXIT
    except PseudoChainError as exc:
        print(f"pseudochain: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    _emit(text, cfg["out"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
