"""Command line entry point.

    dispatch-agent train --scenario synth-S --endpoint tcp:7711 \
        --config run.cfg --out runs/synth-s

The optional config file holds `key = value` lines with `#` comments.
Bare keys set training options; dotted keys reach the nested blocks,
as in `model.hidden_size = 64`, `ppo.gamma = 0.98` or
`prior.defer_weight = 0.05`.  Exit code 2 flags a bad invocation or
config, 3 a failure while training.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .model import ModelConfig
from .obs import ProtocolError
from .ppo import PPOConfig, TrainingError
from .priors import PriorConfig
from .trainer import ConfigError, TrainConfig, train

_SECTIONS = ("train", "model", "ppo", "prior")
_NESTED = ("model", "ppo", "prior")


def _coerce(text: str, current, key: str):
    """Parse `text` into the type of the option's current value."""
    if isinstance(current, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if current is None:
        if text.lower() in ("none", "null"):
            return None
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer or none, got {text!r}") from None
    return text


def load_config_file(path: str) -> dict[str, dict[str, str]]:
    """Read `key = value` lines into per-section string maps."""
    sections: dict[str, dict[str, str]] = {name: {} for name in _SECTIONS}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." in key:
            section, name = key.split(".", 1)
        else:
            section, name = "train", key
        if section not in sections or not name:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        sections[section][name] = value
    return sections


def build_train_config(
    sections: dict[str, dict[str, str]], seed: int | None = None
) -> TrainConfig:
    def build(cls, text_map, label):
        defaults = cls()
        kwargs = {}
        for name, text in text_map.items():
            if label == "train" and name in _NESTED:
                raise ConfigError(f"set {name} options with a {name}. prefix")
            if not hasattr(defaults, name):
                raise ConfigError(f"unknown {label} option {name!r}")
            kwargs[name] = _coerce(text, getattr(defaults, name), f"{label}.{name}")
        return kwargs

    try:
        model = ModelConfig(**build(ModelConfig, sections.get("model", {}), "model"))
        ppo = PPOConfig(**build(PPOConfig, sections.get("ppo", {}), "ppo"))
        prior = PriorConfig(**build(PriorConfig, sections.get("prior", {}), "prior"))
        config = TrainConfig(
            **build(TrainConfig, sections.get("train", {}), "train"),
            model=model,
            ppo=ppo,
            prior=prior,
        )
        if seed is not None:
            config = replace(config, seed=seed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dispatch-agent",
        description="train a dispatch policy against an environment server",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    tr = sub.add_parser("train", help="run the PPO training loop")
    tr.add_argument("--scenario", required=True, help="scenario preset name")
    tr.add_argument("--endpoint", default="stdio", help='server endpoint: "stdio" or "tcp:PORT"')
    tr.add_argument("--config", help="config file with key = value lines")
    tr.add_argument("--out", required=True, help="directory for metrics.csv and checkpoints")
    tr.add_argument("--resume", action="store_true", help="continue from last.pt under --out")
    tr.add_argument("--seed", type=int, help="master seed, overriding the config file")
    tr.add_argument("--server-command", help="command spawned for stdio endpoints")
    args = parser.parse_args(argv)

    try:
        sections = (
            load_config_file(args.config)
            if args.config
            else {name: {} for name in _SECTIONS}
        )
        config = build_train_config(sections, args.seed)
        summary = train(
            config,
            args.scenario,
            endpoint=args.endpoint,
            out_dir=args.out,
            resume=args.resume,
            server_command=args.server_command,
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ProtocolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        f"trained {summary['iterations']} iterations over {summary['env_steps']} env steps; "
        f"best validation objective {summary['best_objective']:.3f}; "
        f"metrics at {summary['metrics']}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
