"""Command-line entry point.

Subcommands: gen-data, pretrain, evaluate, adapt, ablate, scenario, serve.
Every command takes --seed, --out, and --config <json>; command-line flags
override config-file values which override defaults. Exit codes: 0 success,
2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .core import AdaptationConfig
from .errors import ClickAdaptError, ConfigError
from .synthetic import ShiftTransform, SyntheticDomainSpec

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(AdaptationConfig)}

ABLATION_ROWS: list[tuple[str, dict]] = [
    ("all_on", dict(dfl_mi=True, ccgl_mi=True, dfl_pi=True, ccgl_pi=True, s1_pi=True)),
    ("no_dfl_mi", dict(dfl_mi=False, ccgl_mi=True, dfl_pi=True, ccgl_pi=True, s1_pi=True)),
    ("no_ccgl_mi", dict(dfl_mi=True, ccgl_mi=False, dfl_pi=True, ccgl_pi=True, s1_pi=True)),
    ("pi_only", dict(dfl_mi=False, ccgl_mi=False, dfl_pi=True, ccgl_pi=True, s1_pi=True)),
    ("pi_dfl_only", dict(dfl_mi=False, ccgl_mi=False, dfl_pi=True, ccgl_pi=False, s1_pi=True)),
    ("pi_ccgl_only", dict(dfl_mi=False, ccgl_mi=False, dfl_pi=False, ccgl_pi=True, s1_pi=True)),
    ("s1_only", dict(dfl_mi=False, ccgl_mi=False, dfl_pi=False, ccgl_pi=False, s1_pi=True)),
    ("frozen", dict(dfl_mi=False, ccgl_mi=False, dfl_pi=False, ccgl_pi=False, s1_pi=False)),
]


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _merge(cli_value, file_cfg: dict, key: str, default):
    if cli_value is not None:
        return cli_value
    if key in file_cfg:
        return file_cfg[key]
    return default


def _build_adaptation_config(args, file_cfg: dict) -> AdaptationConfig:
    values = {}
    for name in _CONFIG_FIELDS:
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            values[name] = cli_value
        elif name in file_cfg:
            values[name] = file_cfg[name]
    try:
        return AdaptationConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, dest="rng_seed",
                        help="master RNG seed")
    parser.add_argument("--out", type=str, default=None, help="output path")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON config file; flags override its values")


def _add_adaptation_flags(parser: argparse.ArgumentParser, toggles=True) -> None:
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--sigma", type=float, default=None)
    parser.add_argument("--guidance-sigma", type=float, default=None, dest="guidance_sigma")
    parser.add_argument("--focal-gamma", type=float, default=None, dest="focal_gamma")
    parser.add_argument("--lr-pretrain", type=float, default=None, dest="lr_pretrain")
    parser.add_argument("--lr-mi", type=float, default=None, dest="lr_mi")
    parser.add_argument("--lr-pi", type=float, default=None, dest="lr_pi")
    parser.add_argument("--clicks", type=int, default=None, dest="click_budget",
                        help="click budget T per image")
    if toggles:
        for name in ("dfl_mi", "ccgl_mi", "dfl_pi", "ccgl_pi", "s1_pi"):
            parser.add_argument(
                f"--{name.replace('_', '-')}",
                action=argparse.BooleanOptionalAction,
                default=None,
                dest=name,
            )


def _parse_shift(tokens: list[str]) -> tuple[ShiftTransform, ...]:
    out = []
    for token in tokens or []:
        if ":" in token:
            kind, amount = token.split(":", 1)
            try:
                out.append(ShiftTransform(kind=kind, amount=float(amount)))
            except ValueError:
                raise ConfigError(f"bad shift amount in {token!r}")
        else:
            out.append(ShiftTransform(kind=token))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clickadapt",
        description="Online-adaptive interactive segmentation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--family", choices=("ellipses", "polygons", "multi-blob"), default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--size", type=int, default=None, help="square image side")
    p.add_argument("--classes", type=int, default=None, dest="num_classes")
    p.add_argument("--domain-tag", type=str, default=None, dest="domain_tag")
    p.add_argument("--noise-std", type=float, default=None, dest="noise_std")
    p.add_argument("--shift", action="append", default=None,
                   help="shift transform kind[:amount]; repeatable")

    p = sub.add_parser("pretrain", help="train a model on a source dataset")
    _add_common(p)
    _add_adaptation_flags(p, toggles=False)
    p.add_argument("--data", type=str, default=None, help="source dataset dir")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None, dest="base_channels")

    for name, help_text in (
        ("evaluate", "frozen-model stream (no adaptation)"),
        ("adapt", "adaptive stream (PI+MI by default)"),
        ("ablate", "run the loss-term toggle grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_adaptation_flags(p)
        p.add_argument("--data", type=str, default=None, help="target dataset dir")
        p.add_argument("--checkpoint", type=str, default=None)
        if name == "adapt":
            p.add_argument("--save-params", type=str, default=None, dest="save_params",
                           help="write the adapted checkpoint here")

    p = sub.add_parser("scenario", help="robustness scenario runner")
    _add_common(p)
    _add_adaptation_flags(p)
    p.add_argument("--kind", required=True,
                   choices=("standard", "worst-first", "mixed-domains",
                            "noisy-clicks", "budget-k"))
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--domains", action="append", default=None,
                   help="dataset dir for mixed-domains; repeatable")
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--noise-kind", default=None,
                   choices=("fraction", "first_n", "image_fraction"), dest="noise_kind")
    p.add_argument("--noise-value", type=float, default=None, dest="noise_value")
    p.add_argument("--budget", type=int, default=None)

    p = sub.add_parser("serve", help="run the interactive session service")
    _add_common(p)
    _add_adaptation_flags(p)
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--data", type=str, default=None,
                   help="dataset dir for dataset-backed sessions / eval mode")
    p.add_argument("--host", type=str, default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ui", type=str, default=None, help="static UI dist dir")

    return parser


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"missing required option: {name}")
    return value


def _cmd_gen_data(args, file_cfg) -> int:
    domain_cfg = dict(file_cfg.get("domain", {}))
    spec_kwargs = {
        "family": _merge(args.family, domain_cfg, "family", "ellipses"),
        "count": _merge(args.count, domain_cfg, "count", 50),
        "num_classes": _merge(args.num_classes, domain_cfg, "num_classes", 2),
        "domain_tag": _merge(args.domain_tag, domain_cfg, "domain_tag", "source"),
        "noise_std": _merge(args.noise_std, domain_cfg, "noise_std", 0.02),
        "seed": _merge(args.rng_seed, domain_cfg, "seed", 0),
    }
    size = _merge(args.size, domain_cfg, "size", 64)
    spec_kwargs["height"] = spec_kwargs["width"] = int(size)
    shift = _parse_shift(args.shift) if args.shift else tuple(
        ShiftTransform(**t) for t in domain_cfg.get("shift", [])
    )
    spec = SyntheticDomainSpec(shift=shift, **spec_kwargs)
    out = Path(_require(_merge(args.out, file_cfg, "out", None), "--out"))
    from .dataio import save_dataset
    from .synthetic import generate_domain

    samples = generate_domain(spec)
    save_dataset(samples, out, spec.num_classes, spec.domain_tag, spec.spec_hash())
    print(f"wrote {len(samples)} samples to {out}")
    return 0


def _load_model_and_data(args, file_cfg):
    from .dataio import load_dataset
    from .model import load_checkpoint

    data_dir = _require(_merge(args.data, file_cfg, "data", None), "--data")
    ckpt = _require(_merge(args.checkpoint, file_cfg, "checkpoint", None), "--checkpoint")
    if not Path(ckpt).exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    samples, manifest = load_dataset(data_dir)
    model = load_checkpoint(ckpt)
    if manifest["num_classes"] != model.spec.num_classes:
        raise ConfigError(
            f"dataset has K={manifest['num_classes']} but model expects "
            f"K={model.spec.num_classes}"
        )
    if manifest.get("image_channels", 1) != model.spec.image_channels:
        raise ConfigError("dataset channel count does not match the model")
    return samples, manifest, model, Path(ckpt)


def _cmd_pretrain(args, file_cfg) -> int:
    from .dataio import load_dataset
    from .engine import pretrain
    from .model import ModelSpec, save_checkpoint

    cfg = _build_adaptation_config(args, file_cfg)
    data_dir = _require(_merge(args.data, file_cfg, "data", None), "--data")
    out = Path(_require(_merge(args.out, file_cfg, "out", None), "--out"))
    epochs = int(_merge(args.epochs, file_cfg, "epochs", 20))
    samples, manifest = load_dataset(data_dir)
    spec = ModelSpec(
        depth=int(_merge(args.depth, file_cfg, "depth", 2)),
        base_channels=int(_merge(args.base_channels, file_cfg, "base_channels", 8)),
        image_channels=int(manifest.get("image_channels", 1)),
        num_classes=int(manifest["num_classes"]),
        guidance_sigma=cfg.guidance_sigma,
    )
    model = pretrain(
        samples, spec, cfg, epochs,
        on_epoch=lambda e, loss: print(f"epoch {e + 1}/{epochs}  loss {loss:.5f}"),
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out)
    print(f"saved checkpoint (version {model.version}) to {out}")
    return 0


def _cmd_stream(args, file_cfg, frozen: bool) -> int:
    from .reporting import write_report
    from .scenarios import scenario_run

    cfg = _build_adaptation_config(args, file_cfg)
    if frozen:
        cfg = cfg.frozen()
    samples, _, model, _ = _load_model_and_data(args, file_cfg)
    out = _require(_merge(args.out, file_cfg, "out", None), "--out")
    report = scenario_run("standard", samples, model, cfg, seed=cfg.rng_seed)
    csv_path, json_path = write_report(report, out)
    print(f"wrote {csv_path} and {json_path}")
    if not frozen:
        save_params = _merge(getattr(args, "save_params", None), file_cfg, "save_params", None)
        if save_params:
            from .model import save_checkpoint

            save_checkpoint(model, save_params)
            print(f"saved adapted checkpoint to {save_params}")
    return 0


def _cmd_ablate(args, file_cfg) -> int:
    from .model import load_checkpoint
    from .reporting import build_summary, report_rows, write_summary_json
    from .scenarios import scenario_run

    cfg = _build_adaptation_config(args, file_cfg)
    samples, _, _, ckpt_path = _load_model_and_data(args, file_cfg)
    out = Path(_require(_merge(args.out, file_cfg, "out", None), "--out"))
    out.mkdir(parents=True, exist_ok=True)
    all_lines: list[str] = []
    header_done = False
    summaries = {}
    for name, toggles in ABLATION_ROWS:
        model = load_checkpoint(ckpt_path)
        row_cfg = cfg.replace(**toggles)
        report = scenario_run(
            "standard", samples, model, row_cfg, seed=cfg.rng_seed,
            tag=f"ablate:{name}",
        )
        header, rows = report_rows(report)
        if not header_done:
            all_lines.append(",".join(header))
            header_done = True
        all_lines.extend(",".join(r) for r in rows)
        summaries[name] = build_summary(report)
        print(f"{name}: dice@T {summaries[name]['mean_dice_at_t'][str(report.click_budget)]:.4f}  "
              f"updates {summaries[name]['updates']['total']}")
    (out / "report.csv").write_text("\n".join(all_lines) + "\n", newline="\n")
    write_summary_json({"v": 1, "rows": summaries}, out / "summary.json")
    print(f"wrote {out / 'report.csv'} and {out / 'summary.json'}")
    return 0


def _cmd_scenario(args, file_cfg) -> int:
    from .dataio import load_dataset
    from .model import load_checkpoint
    from .reporting import write_report
    from .scenarios import scenario_run
    from .simulator import CorruptionMode

    cfg = _build_adaptation_config(args, file_cfg)
    out = _require(_merge(args.out, file_cfg, "out", None), "--out")
    ckpt = _require(_merge(args.checkpoint, file_cfg, "checkpoint", None), "--checkpoint")
    if not Path(ckpt).exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    model = load_checkpoint(ckpt)
    kind = args.kind
    if kind == "mixed-domains":
        dirs = _merge(args.domains, file_cfg, "domains", None)
        if not dirs or len(dirs) < 2:
            raise ConfigError("mixed-domains needs at least two --domains")
        domains = [load_dataset(d)[0] for d in dirs]
        samples: object = domains
    else:
        data_dir = _require(_merge(args.data, file_cfg, "data", None), "--data")
        samples = load_dataset(data_dir)[0]
    noise_mode = None
    if kind == "noisy-clicks":
        noise_kind = _merge(args.noise_kind, file_cfg, "noise_kind", "fraction")
        noise_value = _merge(args.noise_value, file_cfg, "noise_value", 0.4)
        noise_mode = CorruptionMode(kind=noise_kind, value=float(noise_value))
    budget = _merge(args.budget, file_cfg, "budget", None)
    report = scenario_run(
        kind, samples, model, cfg, seed=cfg.rng_seed,
        noise_mode=noise_mode, budget=budget,
    )
    csv_path, json_path = write_report(report, out)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_serve(args, file_cfg) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    cfg = _build_adaptation_config(args, file_cfg)
    host = _merge(args.host, file_cfg, "host", os.environ.get("CLICKADAPT_HOST", "127.0.0.1"))
    port = int(_merge(args.port, file_cfg, "port", os.environ.get("CLICKADAPT_PORT", "8008")))
    settings = ServiceSettings(
        checkpoint=_merge(args.checkpoint, file_cfg, "checkpoint", None),
        dataset=_merge(args.data, file_cfg, "data", None),
        config=cfg,
        ui_dir=_merge(args.ui, file_cfg, "ui", None),
    )
    app = create_app(settings)
    print(f"serving on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    import torch

    torch.set_num_threads(1)  # tiny tensors: single thread is faster and stable
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        file_cfg = _load_config_file(args.config)
        if args.command == "gen-data":
            return _cmd_gen_data(args, file_cfg)
        if args.command == "pretrain":
            return _cmd_pretrain(args, file_cfg)
        if args.command == "evaluate":
            return _cmd_stream(args, file_cfg, frozen=True)
        if args.command == "adapt":
            return _cmd_stream(args, file_cfg, frozen=False)
        if args.command == "ablate":
            return _cmd_ablate(args, file_cfg)
        if args.command == "scenario":
            return _cmd_scenario(args, file_cfg)
        if args.command == "serve":
            return _cmd_serve(args, file_cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ClickAdaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
