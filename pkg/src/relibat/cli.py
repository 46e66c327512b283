"""relibat command line: exact | estimate | generate | train | predict | replay.

Every command writes ``<command>.manifest.json`` into ``--out``. A manifest
holds the resolved parameters, input digests and output digests; ``relibat
replay`` re-executes it and checks the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .batmcs import (
    EXACT_MAX_ARCS,
    STRATA_COLUMNS,
    BatMcsConfig,
    bat_mcs_estimate,
    exact_reliability,
)
from .bat import MAX_WIDTH
from .dataset import (
    DEFAULT_RATE,
    DEFAULT_STEP,
    MIN_HORIZON,
    DecaySpec,
    NormStats,
    build_distribution,
    dataset_csv,
    label_dataset,
    make_windows,
    normalized_csv,
    read_dataset_csv,
    sample_initial_probs,
    train_count,
    window_split,
)
from .lstm import TrainConfig, loss, model_from_json, model_to_json, predict, train
from .montecarlo import McsConfig, mcs_estimate, required_simulations
from .network import Network, parse_network
from .streams import resolve_seed

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

ESTIMATE_NSIM = 1 << 20
ESTIMATE_NRUN = 30
GENERATE_NSIM = 1 << 14
GENERATE_NRUN = 5
DEFAULT_DELTA_CAP = 16


class UsageError(Exception):
    pass


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Outputs:
    """Collects files written by a command so the manifest can digest them."""

    def __init__(self, out: Path):
        self.dir = out
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        data = text.encode()
        path.write_bytes(data)
        self.files[name] = _sha256(data)
        return path


def _read_input(path: str, inputs: dict) -> str:
    p = Path(path)
    data = p.read_bytes()
    inputs[str(p.resolve())] = _sha256(data)
    return data.decode()


def _load_network(path: str, inputs: dict, arc_order: str | None = None) -> Network:
    net = parse_network(_read_input(path, inputs))
    if arc_order:
        try:
            order = [int(v) for v in arc_order.split(",")]
        except ValueError:
            raise UsageError("--arc-order must be a comma separated list of arc numbers") from None
        if sorted(order) != list(range(1, net.m + 1)):
            raise UsageError(f"--arc-order must be a permutation of 1..{net.m}")
        probs = None
        if net.initial_probs is not None:
            probs = tuple(net.initial_probs[i - 1] for i in order)
        net = Network(net.n, tuple(net.arcs[i - 1] for i in order), probs)
    return net


def _probs(net: Network) -> np.ndarray:
    if net.initial_probs is None:
        raise UsageError("the network file must give a reliability p0 on every arc line")
    return np.asarray(net.initial_probs, dtype=float)


def _default_delta(net: Network) -> int:
    return min(net.n, net.m, DEFAULT_DELTA_CAP)


def _check_delta(delta: int, net: Network) -> None:
    if not 1 <= delta <= min(net.m, MAX_WIDTH):
        raise UsageError(f"--delta must be in 1..{min(net.m, MAX_WIDTH)} for this network (m={net.m})")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# -- commands ---------------------------------------------------------------


def cmd_exact(args, outputs: Outputs, inputs: dict, echo) -> dict:
    net = _load_network(args.network, inputs, args.arc_order)
    probs = _probs(net)
    if net.m > EXACT_MAX_ARCS:
        raise RuntimeError(
            f"exact enumeration is limited to {EXACT_MAX_ARCS} arcs (network has {net.m}); "
            "use 'relibat estimate --method batmcs'"
        )
    r = exact_reliability(net, probs)
    echo(_fmt(r))
    return {"reliability": repr(r)}


def cmd_estimate(args, outputs: Outputs, inputs: dict, echo) -> dict:
    net = _load_network(args.network, inputs, args.arc_order)
    probs = _probs(net)
    nsim = args.nsim
    if args.epsilon is not None:
        if args.epsilon <= 0 or args.z <= 0:
            raise UsageError("--epsilon and --z must be positive")
        nsim = required_simulations(args.epsilon, args.z)
    if nsim < 1:
        raise UsageError("--nsim must be at least 1")
    if args.nrun < 1:
        raise UsageError("--nrun must be at least 1")
    runs: list[float] = []
    strata_rows: list[list] = []
    if args.method == "mcs":
        cfg = McsConfig(nsim, args.seed, args.z)
        for r in range(args.nrun):
            runs.append(mcs_estimate(net, probs, cfg, key=(r,), workers=args.workers).estimate)
        delta = None
    else:
        delta = args.delta if args.delta is not None else _default_delta(net)
        _check_delta(delta, net)
        cfg = BatMcsConfig(delta, nsim, args.nrun, args.seed)
        for r in range(args.nrun):
            res = bat_mcs_estimate(net, probs, cfg, key=(r,), workers=args.workers, report=True)
            runs.append(res.estimate)
            for s in res.strata:
                strata_rows.append([r, s.ordinal, "".join(map(str, s.supervector)), repr(s.probability),
                                    s.status, s.allocation, s.passes, repr(s.contribution)])
    mean = math.fsum(runs) / len(runs)
    std = float(np.std(runs, ddof=1)) if len(runs) > 1 else 0.0

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "estimate"])
    for r, v in enumerate(runs):
        w.writerow([r, repr(v)])
    outputs.write("runs.csv", buf.getvalue())
    if strata_rows:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run"] + STRATA_COLUMNS)
        w.writerows(strata_rows)
        outputs.write("strata.csv", buf.getvalue())

    echo(f"method  {args.method}")
    if delta is not None:
        echo(f"delta   {delta}")
    echo(f"nsim    {nsim}")
    echo(f"nrun    {args.nrun}")
    echo(f"mean    {_fmt(mean)}")
    echo(f"std     {_fmt(std)}")
    return {"nsim": nsim, "delta": delta, "mean": repr(mean), "std": repr(std),
            "runs": [repr(v) for v in runs]}


def cmd_generate(args, outputs: Outputs, inputs: dict, echo) -> dict:
    net = _load_network(args.network, inputs, args.arc_order)
    if args.nterm < MIN_HORIZON:
        raise UsageError(f"--nterm must be at least {MIN_HORIZON} to give one window")
    if args.nsim < 1 or args.nrun < 1:
        raise UsageError("--nsim and --nrun must be at least 1")
    delta = args.delta if args.delta is not None else _default_delta(net)
    _check_delta(delta, net)
    try:
        spec = DecaySpec(args.decay, args.nterm, step=args.step, rate=args.rate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.p0 == "file":
        if net.initial_probs is None:
            raise UsageError("--p0 file needs p0 values on every arc line")
        p0 = net.initial_probs
    else:
        p0 = sample_initial_probs(net.m, args.seed)
    dist = build_distribution(net, spec, p0=p0, seed=args.seed)
    cfg = BatMcsConfig(delta, args.nsim, args.nrun, args.seed)
    ds = label_dataset(net, dist, cfg, workers=args.workers)
    outputs.write("dataset.csv", dataset_csv(ds))
    outputs.write("dataset.norm.csv", normalized_csv(ds))
    echo(f"wrote {ds.n_term} rows x {ds.m + 1} features (delta={delta}, nsim={args.nsim}, nrun={args.nrun})")
    return {"delta": delta, "p0": args.p0, "p0_values": [repr(v) for v in dist.table[0].tolist()]}


def _history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "test_loss"])
    for e, tr, te in history:
        w.writerow([e, repr(tr), repr(te)])
    return buf.getvalue()


def cmd_train(args, outputs: Outputs, inputs: dict, echo) -> dict:
    ds = read_dataset_csv(_read_input(args.dataset, inputs))
    if ds.n_term < args.window + 2:
        raise UsageError(f"dataset has {ds.n_term} rows; window {args.window} needs at least {args.window + 2}")
    try:
        cfg = TrainConfig(hidden=args.hidden, epochs=args.epochs, batch=args.batch, seed=args.seed,
                          lr=args.lr, beta1=args.beta1, beta2=args.beta2, eps=args.adam_eps)
        split = window_split(ds.normalized, args.window, args.train_frac)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = train(split.train_x, split.train_y, cfg, split.test_x, split.test_y)
    extra = {"train_frac": args.train_frac, "train_blocks": int(split.train_x.shape[0]),
             "test_blocks": int(split.test_x.shape[0])}
    outputs.write("model.json", model_to_json(result.params, adam=result.adam,
                                              stats=ds.stats.to_dict(), window=args.window, extra=extra))
    outputs.write("loss_history.csv", _history_csv(result.history))
    echo(f"blocks        {split.n_blocks} (train {split.train_x.shape[0]}, test {split.test_x.shape[0]})")
    echo(f"epochs        {len(result.history)}")
    echo(f"train_mse     {result.final_train_loss!r}")
    echo(f"test_mse      {result.final_test_loss!r}")
    echo(f"seconds       {result.seconds:.3f}")
    return {"epochs_run": len(result.history), "train_mse": repr(result.final_train_loss),
            "test_mse": repr(result.final_test_loss)}


def cmd_predict(args, outputs: Outputs, inputs: dict, echo) -> dict:
    model = model_from_json(_read_input(args.model, inputs))
    ds = read_dataset_csv(_read_input(args.dataset, inputs))
    eta = model.params.input_dim
    if eta != ds.m + 1:
        raise RuntimeError(
            f"dimension mismatch: model expects {eta} features per row, dataset has {ds.m + 1} (m={ds.m})"
        )
    stats = NormStats.from_dict(model.stats) if model.stats else ds.stats
    x, y, rows = make_windows(stats.normalize(ds.features), model.window)
    pred = predict(model.params, x)
    pred_raw = stats.denormalize(pred)
    target_raw = ds.features[rows, -1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "r_star", "r_predict", "abs_error"])
    for t, r, p in zip(ds.times[rows].tolist(), target_raw.tolist(), pred_raw.tolist()):
        w.writerow([t, repr(r), repr(p), repr(abs(p - r))])
    outputs.write("predictions.csv", buf.getvalue())
    echo(f"predictions   {len(rows)}")
    summary: dict = {"blocks": len(rows)}
    if args.compare:
        k = train_count(len(rows), model.extra.get("train_frac", 0.9))
        summary["train_mse"] = loss(model.params, x[:k], y[:k])
        summary["test_mse"] = loss(model.params, x[k:], y[k:]) if k < len(rows) else float("nan")
        summary["all_mse"] = loss(model.params, x, y)
        summary["raw_mse"] = float(np.mean((pred_raw - target_raw) ** 2))
        for name in ("train_mse", "test_mse", "all_mse", "raw_mse"):
            echo(f"{name:<13} {summary[name]!r}")
        summary = {k: (repr(v) if isinstance(v, float) else v) for k, v in summary.items()}
    return summary


COMMANDS = {
    "exact": cmd_exact,
    "estimate": cmd_estimate,
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
}

# parameters that never change outputs; left out of replay comparisons
_VOLATILE = {"workers", "out"}


# -- parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed=True):
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--workers", type=int, default=1, help="parallel workers; outputs do not depend on it")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default: $RELIBAT_SEED or a fixed constant)")


def _estimation_flags(p, nsim, nrun):
    p.add_argument("--delta", type=int, default=None,
                   help=f"supervector width (default: min(n, m, {DEFAULT_DELTA_CAP}))")
    p.add_argument("--nsim", type=int, default=nsim, help=f"simulation budget per run (default {nsim})")
    p.add_argument("--nrun", type=int, default=nrun, help=f"independent runs to average (default {nrun})")
    p.add_argument("--arc-order", default=None,
                   help="comma separated arc permutation (1-based) applied before estimation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relibat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"relibat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact two-terminal reliability by full enumeration")
    p.add_argument("network")
    p.add_argument("--arc-order", default=None)
    _common(p, seed=False)

    p = sub.add_parser("estimate", help="MCS or BAT-MCS reliability estimate")
    p.add_argument("network")
    p.add_argument("--method", choices=["mcs", "batmcs"], default="batmcs")
    _estimation_flags(p, ESTIMATE_NSIM, ESTIMATE_NRUN)
    p.add_argument("--epsilon", type=float, default=None,
                   help="relative error; sets --nsim to ceil(z^2 / (4 epsilon^2))")
    p.add_argument("--z", type=float, default=1.96, help="standard normal quantile (default 1.96)")
    _common(p)

    p = sub.add_parser("generate", help="build and label a time-dependent reliability dataset")
    p.add_argument("network")
    p.add_argument("--decay", choices=["linear", "exp", "second"], default="linear")
    p.add_argument("--step", type=float, default=DEFAULT_STEP, help="linear decay per time step")
    p.add_argument("--rate", type=float, default=DEFAULT_RATE, help="exponential decay rate")
    p.add_argument("--nterm", type=int, default=256, help="number of time steps")
    p.add_argument("--p0", choices=["file", "sample"], default=None,
                   help="initial arc reliabilities: from the file, or uniform on [0.9, 1] "
                        "(default: file when present)")
    _estimation_flags(p, GENERATE_NSIM, GENERATE_NRUN)
    _common(p)

    p = sub.add_parser("train", help="train the LSTM on a dataset CSV")
    p.add_argument("dataset")
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--adam-eps", type=float, default=1e-8)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--train-frac", type=float, default=0.9)
    _common(p)

    p = sub.add_parser("predict", help="predict reliability for every window of a dataset")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--compare", action="store_true", help="also report MSE against R*")
    _common(p, seed=False)

    p = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="directory for the re-run outputs")
    p.add_argument("--workers", type=int, default=None, help="override the recorded worker count")
    return parser


# -- driver -----------------------------------------------------------------


def run_command(command: str, params: dict, out: Path, echo=print) -> dict:
    """Execute one command from resolved parameters and write its manifest."""
    args = argparse.Namespace(**params)
    if getattr(args, "workers", 1) < 1:
        raise UsageError("--workers must be at least 1")
    outputs = Outputs(out)
    inputs: dict[str, str] = {}
    result = COMMANDS[command](args, outputs, inputs, echo)
    manifest = {
        "tool": "relibat",
        "version": __version__,
        "command": command,
        "params": params,
        "inputs": inputs,
        "outputs": dict(sorted(outputs.files.items())),
        "result": result,
    }
    outputs.dir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    (outputs.dir / f"{command}.manifest.json").write_text(text)
    return manifest


def _resolve(args: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
    if "seed" in params:
        params["seed"] = resolve_seed(params["seed"])
    for key in ("network", "dataset", "model"):
        if key in params:
            params[key] = str(Path(params[key]).resolve())
    if args.command == "generate" and params.get("p0") is None:
        # decided here so the manifest records it
        text = Path(params["network"]).read_text()
        params["p0"] = "file" if parse_network(text).initial_probs is not None else "sample"
    return params


def replay(manifest_path: str, out: Path, workers: int | None = None, echo=print) -> bool:
    doc = json.loads(Path(manifest_path).read_text())
    params = dict(doc["params"])
    if workers is not None:
        params["workers"] = workers
    for path, digest in doc["inputs"].items():
        if _sha256(Path(path).read_bytes()) != digest:
            raise RuntimeError(f"input {path} changed since the manifest was written")
    again = run_command(doc["command"], params, out, echo=lambda *_: None)
    same = again["outputs"] == doc["outputs"] and again["result"] == doc["result"]
    for name, digest in doc["outputs"].items():
        status = "ok" if again["outputs"].get(name) == digest else "DIFFERS"
        echo(f"{name:<24} {status}")
    echo(f"{'result':<24} {'ok' if again['result'] == doc['result'] else 'DIFFERS'}")
    return same


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            ok = replay(args.manifest, Path(args.out), args.workers)
            return EXIT_OK if ok else EXIT_FAIL
        params = _resolve(args)
        run_command(args.command, params, Path(args.out))
        return EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"relibat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError, FloatingPointError, KeyError) as exc:
        print(f"relibat {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
