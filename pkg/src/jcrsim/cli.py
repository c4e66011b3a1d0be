"""Command line driver.

    jcr-sim <ser|hitrate|track|rate|rdm-dump> [--config FILE]
            [--snr a:b:step] [--trials N] [--seed S]
            [--out PATH] [--format csv|json]
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .channel import synthesize_rx, write_tensor
from .scenario import PathKind, truth_params
from .waveform import FrameKind, Side, pack_bits, random_payload


def _parse_snr(spec: str) -> tuple[float, ...]:
    """'a:b:step' inclusive sweep, or a comma-separated list."""
    if ":" in spec:
        a, b, step = (float(x) for x in spec.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("snr step must be positive")
        out = []
        v = a
        while v <= b + 1e-9:
            out.append(round(v, 9))
            v += step
        return tuple(out)
    return tuple(float(x) for x in spec.split(","))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jcr-sim",
                                description="chirp DD-QAM joint communication "
                                            "and radar simulator")
    p.add_argument("mode", choices=["ser", "hitrate", "track", "rate", "rdm-dump"])
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--snr", type=_parse_snr, help="a:b:step or comma list, dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    return p


def _apply_overrides(cfg: harness.RunConfig, args) -> harness.RunConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.frames is not None:
        cfg = replace(cfg, n_frames=args.frames)
    sweep = cfg.sweep
    if args.snr is not None:
        sweep = replace(sweep, snr_db=args.snr)
    if args.trials is not None:
        sweep = replace(sweep, trials=args.trials)
    if sweep is not cfg.sweep:
        cfg = replace(cfg, sweep=sweep)
    if args.snr is not None:
        cfg = replace(cfg, rate=replace(cfg.rate, snr_db=args.snr))
    return cfg


def _dump_rdm(cfg: harness.RunConfig, path: str) -> None:
    params = cfg.params
    scene = cfg.scene()
    av = scene.the_av()
    truths = truth_params(scene, av.id, PathKind.ECHO, params)
    rng = np.random.default_rng([cfg.seed, 99])
    sym = pack_bits(random_payload(params, FrameKind.DDM, rng), params,
                    FrameKind.DDM)
    clean = synthesize_rx(params, truths, sym, FrameKind.DDM, Side.AV,
                          harness.tx_amplitude(cfg.tx_power_dbm))
    noise_power = harness.physical_noise_power(params, cfg.noise_psd_dbm_hz)
    from .channel import add_awgn
    write_tensor(add_awgn(clean, noise_power, rng), path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = harness.load_config(args.config) if args.config else harness.RunConfig()
    cfg = _apply_overrides(cfg, args)

    if args.mode == "rdm-dump":
        if args.out == "-":
            print("rdm-dump requires --out PATH", file=sys.stderr)
            return 2
        _dump_rdm(cfg, args.out)
        return 0

    if args.mode == "ser":
        rows = harness.run_ser_sweep(cfg)
    elif args.mode == "hitrate":
        rows = harness.run_hitrate_sweep(cfg)
    elif args.mode == "track":
        rows = harness.run_tracking(cfg)
    else:
        rows = harness.run_rate_sweep(cfg)

    if args.out == "-":
        import tempfile
        with tempfile.NamedTemporaryFile("r", suffix=f".{args.format}") as tmp:
            harness.emit(rows, args.format, tmp.name)
            with open(tmp.name) as fh:
                print(fh.read(), end="")
    else:
        harness.emit(rows, args.format, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
