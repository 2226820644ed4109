"""Command line entry point: ``train``, ``simulate`` and ``compare``.

Every output file starts with ``# config_hash=<hex> seed=<n>`` and then a
column header (CSV) or the payload. Files are written to a temporary name
and renamed once complete, so a crashed run never leaves half a file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from .baselines import KINDS, make_policy
from .config import SimConfig, config_hash, parse_config
from .errors import ConfigError, DivergedLoss, EdgeSenseError, MissingParams, ParseError, ValidationError
from .marl.env import MarlEnv
from .marl.train import PolicyParams, TrainLog, Trainer
from .netmodel import build_topology
from .sim import EdgeSim, EpisodeLog, run_episode, summarize

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_OTHER = 0, 2, 3, 1
SLOT_COLUMNS = ["slot", "policy", "total_J", "sensing_J", "tran1_J", "comp_J", "tran2_J", "tran3_J",
                "coverage", "dup_rate_device", "dup_rate_server"]
TRAIN_COLUMNS = ["episode", "mean_reward", "loss_actor", "loss_critic"]


def _num(x: float) -> str:
    return repr(float(x))


def provenance(cfg: SimConfig) -> str:
    return f"# config_hash={config_hash(cfg)} seed={cfg.seed}\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(cfg: SimConfig, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(provenance(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def slot_rows(episode: EpisodeLog):
    for m in episode.slots:
        b = m.breakdown
        yield ([m.slot, episode.policy, _num(b.total_J), *(_num(v) for v in b.as_tuple()),
                _num(m.coverage), _num(m.dup_rate_device), _num(m.dup_rate_server)]
               + [_num(s) for s in m.soc])


def episode_csv(cfg: SimConfig, episode: EpisodeLog) -> str:
    header = SLOT_COLUMNS + [f"soc_{i}" for i in range(cfg.topology.n_devices)]
    return _csv(cfg, header, slot_rows(episode))


def train_csv(cfg: SimConfig, train_log: TrainLog) -> str:
    rows = ([e.episode, _num(e.mean_reward), _num(e.loss_actor), _num(e.loss_critic)]
            for e in train_log.episodes)
    return _csv(cfg, TRAIN_COLUMNS, rows)


def summary_json(cfg: SimConfig, summaries: dict) -> str:
    payload = {"config_hash": config_hash(cfg), "seed": cfg.seed, "horizon": cfg.horizon,
               "policies": summaries}
    return provenance(cfg) + json.dumps(payload, sort_keys=True, indent=2) + "\n"


def load_summary(path: str | Path) -> dict:
    """Read a summary file written by ``simulate`` or ``compare``."""
    text = Path(path).read_text()
    return json.loads("".join(ln for ln in text.splitlines(True) if not ln.startswith("#")))


def _sim(cfg: SimConfig) -> EdgeSim:
    return EdgeSim(build_topology(cfg, cfg.seed), cfg)


def _load_params(path: str | None) -> PolicyParams | None:
    if path is None:
        return None
    return PolicyParams.from_text(Path(path).read_text())


def cmd_train(cfg: SimConfig, out: Path) -> tuple[PolicyParams, TrainLog]:
    sim = _sim(cfg)
    env = MarlEnv(sim, horizon=cfg.episode_len)
    params, train_log = Trainer(env, cfg.marl, cfg.seed).train()
    write_atomic(out / "params.txt", provenance(cfg) + params.to_text())
    write_atomic(out / "train.csv", train_csv(cfg, train_log))
    return params, train_log


def _run(cfg: SimConfig, kinds: list[str], params: PolicyParams | None, out: Path) -> dict:
    sim = _sim(cfg)
    logs = {}
    for kind in kinds:
        if kind in ("senses", "senses-re") and params is None:
            raise MissingParams(f"policy {kind!r} needs --params (run `train` first)")
        logs[kind] = run_episode(make_policy(kind, params), sim, cfg.horizon, cfg.seed)
    # energies are compared over the slots every policy survived
    window = min(len(lg.slots) for lg in logs.values())
    summaries = {}
    for kind, lg in logs.items():
        write_atomic(out / f"slots_{kind}.csv", episode_csv(cfg, lg))
        s = summarize(lg, slot_s=cfg.energy.slot_s).to_dict()
        s["common_window"] = window
        s["device_J_common"] = summarize(lg, slot_s=cfg.energy.slot_s, window=window).device_J
        summaries[kind] = s
    return summaries


def cmd_simulate(cfg: SimConfig, kind: str, params: PolicyParams | None, out: Path) -> dict:
    summaries = _run(cfg, [kind], params, out)
    write_atomic(out / f"summary_{kind}.json", summary_json(cfg, summaries))
    return summaries


def cmd_compare(cfg: SimConfig, kinds: list[str], params: PolicyParams | None, out: Path) -> dict:
    summaries = _run(cfg, kinds, params, out)
    write_atomic(out / "compare.json", summary_json(cfg, summaries))
    return summaries


def _policy_list(text: str) -> list[str]:
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise ValidationError("policy", f"unknown policy {bad or text!r}; choose from {', '.join(KINDS)}")
    return kinds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgesense", description="Edge sensing energy simulator and trainer.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("train", "train the radius-control agents"),
                        ("simulate", "run one policy and write its per-slot CSV"),
                        ("compare", "run several policies on the same topology")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
        if name != "train":
            sp.add_argument("--policy", help="policy kind (compare: comma list, default all)")
            sp.add_argument("--params", help="trained parameter file from `train`")
    return p


def load_config(args) -> SimConfig:
    overrides: dict[str, str] = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParseError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.horizon is not None:
        overrides["horizon"] = str(args.horizon)
    if getattr(args, "policy", None) and args.command == "simulate":
        overrides["policy"] = args.policy
    return parse_config(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        out = Path(args.out)
        if args.command == "train":
            _, train_log = cmd_train(cfg, out)
            r = train_log.rewards
            print(f"trained {len(r)} episodes; final reward {r[-1]:.4f}" if len(r) else "no episodes run")
        elif args.command == "simulate":
            s = cmd_simulate(cfg, cfg.policy, _load_params(args.params), out)[cfg.policy]
            print(f"{cfg.policy}: {s['slots']} slots, device energy {s['device_J']:.1f} J, {s['end_reason']}")
        else:
            kinds = _policy_list(args.policy) if args.policy else list(KINDS)
            for kind, s in cmd_compare(cfg, kinds, _load_params(args.params), out).items():
                print(f"{kind:10s} duration {s['max_operational_duration']:4d}  "
                      f"device energy (common window) {s['device_J_common']:.1f} J")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedLoss as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except EdgeSenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OK
