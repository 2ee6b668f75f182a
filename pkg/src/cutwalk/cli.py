"""Command-line interface: ``cutwalk {simulate,detect,hit,experiment,classify}``.

Every subcommand reads a JSON config (``--config``), takes ``--seed`` and
``--out``, and writes CSV tables plus ``manifest.json`` (config echo,
library versions, wall-clock) into the output directory.
"""
import argparse
import csv
import io
import json
import sys
import time

from ._validation import check_seed
from .cuts import detect_cut_annuli, detect_cut_intervals, detect_cutpoints
from .experiments import EXPERIMENTS, ExperimentConfig, write_outputs
from .generators import make_spec
from .hitting import mc_escape_forever, mc_race, write_hit_csv
from .process import classify_profile, simulate
from .trajectory import VectorTrajectory, load_trajectory, trajectory_to_csv


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    return cfg


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_simulate(cfg, seed):
    """``{"generator": {...}, "x0": 0, "steps": N, "replicas": 1}`` -> trajectory CSVs."""
    spec = make_spec(cfg["generator"])
    steps = int(cfg.get("steps", 1000))
    out = {}
    for r in range(int(cfg.get("replicas", 1))):
        traj = simulate(spec, cfg.get("x0", 0), steps, seed, replica=r)
        out[f"trajectory_{r}"] = trajectory_to_csv(traj)
    return out


def cmd_detect(cfg, seed):
    """Detect cut structures on ``cfg["input"]`` (a .csv/.cutl path) or a simulated path."""
    if "input" in cfg:
        traj = load_trajectory(cfg["input"])
    else:
        spec = make_spec(cfg["generator"])
        traj = simulate(spec, cfg.get("x0", 0), int(cfg.get("steps", 1000)), seed,
                        replica=int(cfg.get("replica", 0)))
    W = cfg.get("W")
    h, k = float(cfg.get("h", 1.0)), int(cfg.get("k", 1))
    out = {}
    if isinstance(traj, VectorTrajectory):
        ann = detect_cut_annuli(traj, h, k, W, disjoint=bool(cfg.get("disjoint", False)))
        out["annuli"] = _csv(["l", "r", "entry_time", "visits", "status"],
                             [[repr(a.l), repr(a.r), a.entry_time, a.visits, a.status]
                              for a in ann])
        traj = traj.norms()
    rep = detect_cutpoints(traj, W)
    out["cutpoints"] = rep.to_csv()
    ts, conf = rep.cut_times, rep.cut_times_confirmed
    out["cut_times"] = _csv(["n", "status"], [[int(t), "CONFIRMED" if c else "CANDIDATE"]
                                              for t, c in zip(ts, conf)])
    S = rep.separating
    out["separating"] = _csv(["lo", "hi", "status"],
                             [[repr(a), repr(b), "CONFIRMED" if b <= S.top - S.W else "CANDIDATE"]
                              for a, b in S.intervals()])
    ivs = detect_cut_intervals(traj, h, k, W, disjoint=bool(cfg.get("disjoint", False)))
    out["cut_intervals"] = _csv(["l", "r", "k_obs", "status"],
                                [[repr(c.l), repr(c.r), c.k_obs, c.status] for c in ivs])
    return out


def cmd_hit(cfg, seed):
    """Races (``"mode": "race"`` with ``pairs`` ``[[x, y], ...]``) or escape probabilities.

    Escape mode (``"mode": "escape"``) takes ``"x": [...]`` and starts each run
    at ``x + 1`` unless ``"start_offset"`` is given; ``y`` in the CSV is the cap.
    """
    spec = make_spec(cfg["generator"])
    R = int(cfg.get("replicas", 10_000))
    mode = cfg.get("mode", "race")
    rows = []
    if mode == "race":
        for x, y in cfg["pairs"]:
            start = cfg.get("start", x + 1)
            rows.append((x, y, mc_race(spec, start, x, y, R, seed)))
    elif mode == "escape":
        mult = float(cfg.get("y_cap_mult", 50.0))
        method = cfg.get("method", "race")
        for x in cfg["x"]:
            est = mc_escape_forever(spec, x + cfg.get("start_offset", 1), x, R, seed,
                                    y_cap_mult=mult, method=method)
            rows.append((x, mult * x if method == "race" else float("inf"), est))
    else:
        raise ValueError("mode must be 'race' or 'escape'")
    buf = io.StringIO()
    write_hit_csv(rows, buf)
    return {"hit": buf.getvalue()}


def cmd_experiment(cfg, seed, exploratory=False):
    """``{"experiment": name, ...ExperimentConfig fields}``."""
    cfg = dict(cfg)
    name = cfg.pop("experiment", None)
    if name not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {sorted(EXPERIMENTS)}")
    cfg["seed"] = seed
    if exploratory:
        cfg["exploratory"] = True
    conf = ExperimentConfig.from_dict(cfg)
    res = EXPERIMENTS[name](conf)
    fits = [[k, v["model"], repr(v["slope"]), repr(v["intercept"]), repr(v["r2"]),
             repr(v["ci"][0]), repr(v["ci"][1])] for k, v in res.fits.items()]
    out = {res.name: res.to_csv(),
           "fits": _csv(["fit", "model", "slope", "intercept", "r2", "ci_lo", "ci_hi"], fits)}
    return out, {"fits": res.fits, "diagnostics": res.diagnostics}


def cmd_classify(cfg, seed):
    """Analytic tag and grid heuristic for each ``generators`` entry (or ``generator``)."""
    gens = cfg.get("generators") or [cfg["generator"]]
    rows = []
    for g in gens:
        spec = make_spec(g)
        c = classify_profile(spec.profile)
        rows.append([spec.spec_id, spec.regime_tag, c.tag, repr(c.lower_gap),
                     repr(c.upper_gap_log), repr(c.theta)])
    return {"classify": _csv(["spec", "tag", "heuristic_tag", "lower_gap", "upper_gap_log",
                              "theta"], rows)}


def build_parser():
    p = argparse.ArgumentParser(prog="cutwalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("simulate", "simulate trajectories"),
                      ("detect", "detect cut structures"),
                      ("hit", "hitting / escape probabilities"),
                      ("experiment", "run a batch experiment"),
                      ("classify", "regime tag of a generator profile")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=(name != "detect"),
                       help="JSON config file")
        s.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides config)")
        s.add_argument("--out", default="out", help="output directory")
        if name == "detect":
            s.add_argument("--input", help="trajectory file (.csv or .cutl)")
        if name == "experiment":
            s.add_argument("--exploratory", action="store_true",
                           help="allow generators the experiment would refuse")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = _load_config(args.config)
        if getattr(args, "input", None):
            cfg["input"] = args.input
        seed = check_seed(args.seed if args.seed is not None else cfg.get("seed", 12345))
        extra = {}
        if args.command == "experiment":
            tables, extra = cmd_experiment(cfg, seed, args.exploratory)
        else:
            tables = {"simulate": cmd_simulate, "detect": cmd_detect, "hit": cmd_hit,
                      "classify": cmd_classify}[args.command](cfg, seed)
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"cutwalk {args.command}: error: {exc}", file=sys.stderr)
        return 2
    echo = dict(cfg, seed=seed)
    manifest = write_outputs(args.out, tables, echo, started, args.command, extra)
    print(f"wrote {', '.join(manifest['files'])} and manifest.json to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
