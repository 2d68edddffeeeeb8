"""Command-line entry point: kernel generation, PCA fitting, degradation,
blind solving, toy training, benchmarking and comparison grids.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  Flags beat
values from an optional key=value config file (--config), which beat
built-in defaults.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: _Parser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: BLINDSR_THREADS or 1)")
    p.add_argument("--verbose", action="store_true", help="progress output on stderr")
    p.add_argument("--config", default=None, help="key=value config file (flags take precedence)")


def build_parser() -> _Parser:
    parser = _Parser(prog="blindsr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-kernel", parents=[], help="write a blur kernel file")
    p.add_argument("--setting", type=int, choices=(1, 2), required=True)
    p.add_argument("--width", type=float, help="isotropic width (setting 1)")
    p.add_argument("--sig1", type=float, help="first axis width (setting 2)")
    p.add_argument("--sig2", type=float, help="second axis width (setting 2)")
    p.add_argument("--theta", type=float, default=0.0, help="rotation in radians (setting 2)")
    p.add_argument("--noise-frac", type=float, default=0.0, help="multiplicative noise (setting 2)")
    p.add_argument("--side", type=int, default=None, help="kernel side (default 21/11 per setting)")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_gen_kernel)

    p = sub.add_parser("pca-fit", help="fit and write a PCA kernel basis")
    p.add_argument("--setting", type=int, choices=(1, 2), required=True)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--n", type=int, default=10000, help="number of sampled kernels")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_pca_fit)

    p = sub.add_parser("degrade", help="blur, downsample and add noise")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.0, help="AWGN stddev on the 0-255 scale")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("solve", help="blind super-resolve an LR image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--solver", choices=("classical", "neural", "bicubic"), default="classical")
    p.add_argument("--ckpt", help="checkpoint for --solver neural")
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="restorer gradient prior weight")
    p.add_argument("--ridge", type=float, default=1.0, help="estimator coefficient ridge")
    p.add_argument("--cg-iters", type=int, default=400)
    p.add_argument("--cg-tol", type=float, default=1e-10)
    p.add_argument("--estimator-first", action="store_true", help="run the estimator before the restorer")
    p.add_argument("--trace", help="write per-iteration CSV here")
    p.add_argument("--out", required=True)
    p.add_argument("--out-kernel", help="write the recovered kernel here")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train-toy", help="train the toy neural model")
    p.add_argument("--data", required=True, help="directory of HR images")
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--setting", type=int, choices=(1, 2), default=1)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--crop", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--kernel-loss-weight", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0, help="training AWGN stddev (0-255 scale)")
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    p.add_argument("--basis", help="reuse an existing basis file")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-curve", help="write the per-step loss CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("bench", help="run the benchmark over a HR image directory")
    p.add_argument("--hr", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--kernels", default="gaussian8", help="'gaussian8' or a directory of kernel files")
    p.add_argument("--solver", choices=("classical", "neural", "bicubic"), default="classical")
    p.add_argument("--ckpt")
    p.add_argument("--basis", required=True)
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--ridge", type=float, default=1.0)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--json", help="aggregate JSON path")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="write a labeled side-by-side grid")
    p.add_argument("panels", nargs="+", help="label=image.png entries (2 or more)")
    p.add_argument("--align", action="store_true", help="bicubically resize panels to the first image's dims")
    p.add_argument("--inset", help="top,left,height,width zoom rectangle")
    p.add_argument("--zoom", type=int, default=2)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("make-toy-data", help="write synthetic textured HR images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--channels", type=int, choices=(1, 3), default=1)
    _add_common(p)
    p.set_defaults(func=cmd_make_toy_data)

    return parser


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("BLINDSR_THREADS")
    return max(1, int(env)) if env else 1


def _apply_config_file(argv: list[str]) -> list[str]:
    """Splice key=value pairs from --config in after the subcommand.

    Earlier arguments lose to later ones in argparse, so explicit flags
    keep precedence over config-file values.
    """
    if "--config" not in [a.split("=")[0] for a in argv]:
        return argv
    path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif arg.startswith("--config="):
            path = arg.split("=", 1)[1]
    if path is None:
        return argv
    extra = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {line!r} is not key=value")
            key, value = line.split("=", 1)
            extra.append(f"--{key.strip().replace('_', '-')}={value.strip()}")
    return argv[:1] + extra + argv[1:]


def cmd_gen_kernel(args) -> None:
    from . import degradation as dg

    if args.setting == 1:
        if args.width is None:
            raise ValueError("--width is required for setting 1")
        side = args.side or dg.SETTING1_SIDE
        kernel = dg.gaussian_isotropic(side, args.width)
    else:
        if args.sig1 is None or args.sig2 is None:
            raise ValueError("--sig1 and --sig2 are required for setting 2")
        side = args.side or dg.SETTING2_SIDE
        kernel = dg.gaussian_anisotropic(
            side, args.sig1, args.sig2, args.theta, noise_frac=args.noise_frac, seed=args.seed
        )
    dg.save_kernel(kernel, args.out)
    if args.verbose:
        print(f"wrote {side}x{side} kernel to {args.out}", file=sys.stderr)


def cmd_pca_fit(args) -> None:
    from .kernel_space import fit_default_basis, save_basis

    basis = fit_default_basis(args.setting, args.scale, m=args.m, n_samples=args.n, seed=args.seed)
    save_basis(basis, args.out)
    if args.verbose:
        print(f"fit m={args.m} basis on {args.n} kernels -> {args.out}", file=sys.stderr)


def cmd_degrade(args) -> None:
    from . import degradation as dg
    from .image import load_image, modcrop, save_image

    img = modcrop(load_image(args.input), args.scale)
    kernel = dg.load_kernel(args.kernel)
    cfg = dg.DegradationConfig(scale=args.scale, noise_sigma=args.sigma, seed=args.seed)
    save_image(dg.degrade(img, kernel, cfg), args.out)


def cmd_solve(args) -> None:
    from .bench import solver_contracts
    from .degradation import save_kernel
    from .engine import run_alternation, write_trace_csv
    from .image import load_image, save_image
    from .kernel_space import load_basis, reconstruct

    lr = load_image(args.input)
    basis = load_basis(args.basis)
    contracts = solver_contracts(
        args.solver,
        ckpt=args.ckpt,
        ridge=args.ridge,
        lam=args.lam,
        cg_iters=args.cg_iters,
        cg_tol=args.cg_tol,
    )
    trace = run_alternation(
        lr, basis, *contracts, args.scale, args.iters, restorer_first=not args.estimator_first
    )
    save_image(trace.images[-1], args.out)
    if args.out_kernel:
        save_kernel(reconstruct(basis, trace.kernels[-1]), args.out_kernel)
    if args.trace:
        write_trace_csv(trace, args.trace)
    if args.verbose:
        print(f"final data residual {trace.residuals[-1]:.3e}", file=sys.stderr)


def cmd_train_toy(args) -> None:
    from .bench import list_hr_images
    from .image import load_image
    from .kernel_space import fit_default_basis, load_basis
    from .nn import DanConfig, TrainConfig, save_checkpoint, train_toy

    images = [load_image(os.path.join(args.data, f)) for f in list_hr_images(args.data)]
    cfg = DanConfig.toy(scale=args.scale, img_channels=args.channels)
    hyper = TrainConfig(
        steps=args.steps,
        batch=args.batch,
        crop=args.crop,
        lr=args.lr,
        kernel_loss_weight=args.kernel_loss_weight,
        setting=args.setting,
        noise_sigma=args.sigma,
        seed=args.seed,
    )
    basis = load_basis(args.basis) if args.basis else fit_default_basis(args.setting, args.scale, m=cfg.m)
    dan, losses = train_toy(
        images, cfg, hyper, basis=basis, log_every=100 if args.verbose else 0
    )
    save_checkpoint(dan, args.out)
    if args.loss_curve:
        with open(args.loss_curve, "w") as fh:
            fh.write("step,loss\n")
            fh.writelines(f"{i},{v!r}\n" for i, v in enumerate(losses))


def cmd_bench(args) -> None:
    from . import degradation as dg
    from .bench import run_benchmark, solver_contracts, write_report_csv, write_report_json
    from .kernel_space import load_basis
    from .metrics import gaussian8

    basis = load_basis(args.basis)
    if args.kernels == "gaussian8":
        kernels = gaussian8(args.scale)
    else:
        names = sorted(f for f in os.listdir(args.kernels) if f.endswith(".txt"))
        if not names:
            raise ValueError(f"no kernel .txt files in {args.kernels!r}")
        kernels = [dg.load_kernel(os.path.join(args.kernels, f)) for f in names]
    contracts = solver_contracts(
        args.solver, ckpt=args.ckpt, ridge=args.ridge, lam=args.lam
    )
    report = run_benchmark(
        args.hr,
        args.scale,
        kernels,
        contracts,
        basis,
        iterations=args.iters,
        noise_sigma=args.sigma,
        seed=args.seed,
        threads=_threads(args),
    )
    write_report_csv(report, args.out)
    if args.json:
        write_report_json(report, args.json)
    if args.verbose and report.means:
        print(
            f"mean psnr {report.means['psnr_db']:.2f} dB, ssim {report.means['ssim']:.4f}",
            file=sys.stderr,
        )


def cmd_compare(args) -> None:
    from .compare import emit_comparison
    from .image import load_image

    panels = []
    for entry in args.panels:
        if "=" not in entry:
            raise ValueError(f"panel {entry!r} must be label=path")
        label, path = entry.split("=", 1)
        panels.append((label, load_image(path)))
    inset = None
    if args.inset:
        parts = args.inset.split(",")
        if len(parts) != 4:
            raise ValueError(f"--inset needs top,left,height,width, got {args.inset!r}")
        inset = tuple(int(v) for v in parts)
    emit_comparison(panels, args.out, align=args.align, inset=inset, zoom=args.zoom)


def cmd_make_toy_data(args) -> None:
    from .toydata import write_toy_dataset

    paths = write_toy_dataset(args.out, args.n, args.size, args.seed, channels=args.channels)
    if args.verbose:
        print(f"wrote {len(paths)} images to {args.out}", file=sys.stderr)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:
        print(f"blindsr: error: {exc}", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except Exception as exc:
        print(f"blindsr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
