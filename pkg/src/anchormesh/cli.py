"""Command-line driver: encode, decode, eval, sweep, synth.

Exit codes: 0 ok, 2 input/validation error, 3 payload error. Errors are
reported as one-line JSON on stderr; all file outputs are written atomically
(temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

from .config import CodecConfig, load_config
from .mesh import MeshError, TriangleMesh, load_mesh, save_mesh
from .metrics import RDCurve, bd_rate, distortion
from .payload import PayloadError, read_payload, write_payload
from .pipeline import decode_payload, encode_pair
from .synth import SequenceSpec, decimate_to_base, generate_sequence

ABLATION_CONFIGS = (
    ("nns", dict(motion_estimation=False, qem_refine=False, adaptive_quant=False)),
    ("nns_ms", dict(motion_estimation=True, qem_refine=False, adaptive_quant=False)),
    ("nns_ms_qem", dict(motion_estimation=True, qem_refine=True, adaptive_quant=False)),
    ("nns_ms_qem_aq", dict(motion_estimation=True, qem_refine=True, adaptive_quant=True)),
)


def _atomic_write(path, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-anchormesh-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_mesh_file(path) -> TriangleMesh:
    with open(path, "rb") as fh:
        return load_mesh(fh.read())


def _psnr_json(value: float):
    return "inf" if math.isinf(value) else value


def _report_json(report) -> dict:
    return {
        "d1_psnr": _psnr_json(report.d1_psnr),
        "d2_psnr": _psnr_json(report.d2_psnr),
        "mse_d1": report.mse_d1,
        "mse_d2": report.mse_d2,
        "peak": report.peak,
    }


def _config_from_args(args) -> CodecConfig:
    config = CodecConfig()
    if getattr(args, "config", None):
        config = load_config(args.config, config)
    overrides = {}
    for key in ("level", "alpha", "delta", "hbar", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "no_motion_est", False):
        overrides["motion_estimation"] = False
    if getattr(args, "no_qem", False):
        overrides["qem_refine"] = False
    if getattr(args, "no_adaptive_quant", False):
        overrides["adaptive_quant"] = False
    if getattr(args, "alphas", None):
        overrides["alpha_ladder"] = tuple(float(a) for a in args.alphas.split(","))
    if getattr(args, "base_fraction", None) is not None:
        overrides["base_fraction"] = args.base_fraction
    return config.override(**overrides)


def cmd_encode(args) -> int:
    config = _config_from_args(args)
    base = _read_mesh_file(args.base)
    target = _read_mesh_file(args.target)
    result = encode_pair(base, target, config)
    data = write_payload(result.payload)
    _atomic_write(args.out, data)
    stats = dict(result.stats)
    stats["payload_bits"] = len(data) * 8
    stats["out"] = args.out
    print(json.dumps(stats))
    return 0


def cmd_decode(args) -> int:
    base = _read_mesh_file(args.base)
    with open(args.payload, "rb") as fh:
        payload = read_payload(fh.read(), base.n_vertices)
    recon = decode_payload(payload, base)
    _atomic_write(args.out, save_mesh(recon))
    return 0


def cmd_eval(args) -> int:
    reference = _read_mesh_file(args.reference)
    test = _read_mesh_file(args.test)
    print(json.dumps(_report_json(distortion(reference, test))))
    return 0


def cmd_synth(args) -> int:
    spec = SequenceSpec(
        shape=args.shape,
        resolution=args.resolution,
        frames=args.frames,
        motion=args.motion,
        velocity=tuple(float(v) for v in args.velocity.split(",")),
        axis=tuple(float(v) for v in args.axis.split(",")),
        rate=args.rate,
        region=args.region,
        topology_jitter=args.jitter,
        seed=args.seed,
    )
    frames = generate_sequence(spec)
    os.makedirs(args.out, exist_ok=True)
    for t, mesh in enumerate(frames):
        _atomic_write(os.path.join(args.out, f"frame_{t:04d}.obj"), save_mesh(mesh))
    print(json.dumps({"frames": len(frames), "out": args.out}))
    return 0


def _sweep_job(job):
    """One (config, alpha, frame pair) encode/decode/eval; module-level so a
    process pool can pickle it."""
    label, overrides, alpha, pair_index, base_bytes, target_bytes = job
    base = load_mesh(base_bytes)
    target = load_mesh(target_bytes)
    config = CodecConfig().override(alpha=alpha, **overrides)
    result = encode_pair(base, target, config)
    data = write_payload(result.payload)
    recon = decode_payload(read_payload(data, base.n_vertices), base)
    report = distortion(target, recon)
    return (label, alpha, pair_index, len(data) * 8, report.d1_psnr, report.d2_psnr)


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    frame_paths = sorted(
        os.path.join(args.sequence_dir, name)
        for name in os.listdir(args.sequence_dir)
        if name.endswith(".obj")
    )
    if len(frame_paths) < 2:
        raise MeshError("sweep needs a sequence of >= 2 frames")
    frames = [_read_mesh_file(p) for p in frame_paths]
    os.makedirs(args.out, exist_ok=True)

    bases = []
    for mesh in frames[:-1]:
        target_count = max(4, round(config.base_fraction * mesh.n_vertices))
        bases.append(decimate_to_base(mesh, target_count))

    jobs = []
    for label, overrides in ABLATION_CONFIGS:
        merged = dict(overrides)
        merged["level"] = config.level
        merged["hbar"] = config.hbar
        for alpha in config.alpha_ladder:
            for pair_index in range(len(frames) - 1):
                jobs.append((label, merged, alpha, pair_index,
                             save_mesh(bases[pair_index]),
                             save_mesh(frames[pair_index + 1])))
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_sweep_job, jobs, chunksize=1))
    else:
        results = [_sweep_job(job) for job in jobs]

    by_config = {label: [] for label, _ in ABLATION_CONFIGS}
    for row in results:
        by_config[row[0]].append(row[1:])

    curves = {}
    warnings = []
    for label, rows in by_config.items():
        rows.sort()
        csv_path = os.path.join(args.out, f"rd_{label}.csv")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "alpha", "bits", "d1_psnr", "d2_psnr"])
            for alpha, pair_index, bits, d1, d2 in rows:
                writer.writerow([pair_index + 1, alpha, bits,
                                 _psnr_json(d1), _psnr_json(d2)])
        points_d1 = []
        points_d2 = []
        for alpha in sorted({r[0] for r in rows}):
            sub = [r for r in rows if r[0] == alpha]
            bits = sum(r[2] for r in sub)
            d1 = [r[3] for r in sub if math.isfinite(r[3])]
            d2 = [r[4] for r in sub if math.isfinite(r[4])]
            if not d1 or not d2:
                warnings.append(f"{label}: alpha {alpha} has only infinite PSNR; skipped")
                continue
            points_d1.append((bits, sum(d1) / len(d1)))
            points_d2.append((bits, sum(d2) / len(d2)))
        curves[label] = (points_d1, points_d2)

    comparisons = {}
    baseline_label = ABLATION_CONFIGS[0][0]
    for label, _ in ABLATION_CONFIGS[1:]:
        entry = {}
        for which, idx in (("d1", 0), ("d2", 1)):
            try:
                anchor_curve = RDCurve(tuple(curves[baseline_label][idx]))
                test_curve = RDCurve(tuple(curves[label][idx]))
                entry[which] = bd_rate(anchor_curve, test_curve)
            except ValueError as exc:
                entry[which] = None
                warnings.append(f"BD-rate {baseline_label} vs {label} ({which}): {exc}")
        comparisons[label] = entry
    summary = {"baseline": baseline_label, "bd_rate_pct": comparisons,
               "warnings": warnings}
    _atomic_write(os.path.join(args.out, "bd_rates.json"),
                  json.dumps(summary, indent=2).encode())
    print(json.dumps(summary))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchormesh",
        description="Inter-frame dynamic mesh coding kernel (anchor mesh + displacements)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_codec_flags(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--level", type=int, help="subdivision levels")
        p.add_argument("--alpha", type=float, help="quantization scale")
        p.add_argument("--delta", type=float, help="quantization offset")
        p.add_argument("--hbar", type=float, help="valence normalizer")
        p.add_argument("--no-motion-est", action="store_true",
                       help="disable motion estimation (ablation)")
        p.add_argument("--no-qem", action="store_true",
                       help="disable QEM refinement (ablation)")
        p.add_argument("--no-adaptive-quant", action="store_true",
                       help="disable adaptive quantization (ablation)")
        p.add_argument("--threads", type=int, help="worker processes")

    p = sub.add_parser("encode", help="encode a frame pair to a payload")
    p.add_argument("base")
    p.add_argument("target")
    p.add_argument("out")
    add_codec_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct a frame from a payload")
    p.add_argument("payload")
    p.add_argument("base")
    p.add_argument("out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="D1/D2 distortion report")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="rate sweep + ablation BD-rates over a sequence")
    p.add_argument("sequence_dir")
    p.add_argument("out")
    p.add_argument("--alphas", help="comma-separated rate ladder")
    p.add_argument("--base-fraction", type=float, help="base mesh decimation ratio")
    add_codec_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic sequence of OBJ frames")
    p.add_argument("out")
    p.add_argument("--shape", default="sphere", choices=["sphere", "grid", "cube"])
    p.add_argument("--resolution", type=int, default=2)
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--motion", default="static",
                   choices=["static", "translate", "rotate", "bend"])
    p.add_argument("--velocity", default="0,0,0")
    p.add_argument("--axis", default="0,0,1")
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--region", type=float, default=0.5)
    p.add_argument("--jitter", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PayloadError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except (MeshError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
