"""Command-line entry point.

Exit codes: 0 success or PASS, 1 verifier FAIL, 2 usage error, 3 register
exceeds the qubit cap, 4 output directory or file I/O error.

Settings come from built-in defaults, then an INI file (``--config``), then
flags.  INI sections are named after the command, e.g. ``[neuron]``,
``[train-checkerboard]`` or ``[verify-theorem1]``; keys are the long flag
names with dashes or underscores.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import experiments as ex
from . import neuron as nr
from . import qnn
from . import reports as rp
from . import statesim as ss
from . import swaptest as st
from . import train as tr

log = logging.getLogger("qswapnet")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAPACITY, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------

def _angles(text: str) -> list[tuple[float, float, float]]:
    """``"b,g,d;b,g,d"`` -> per-qubit ``(beta, gamma, delta)`` triples."""
    try:
        out = []
        for chunk in text.split(";"):
            vals = [float(v) for v in chunk.split(",")]
            if len(vals) != 3:
                raise ValueError
            out.append(tuple(vals))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'beta,gamma,delta[;...]', got {text!r}")


def _widths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (drawn and printed if omitted)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--workers", type=_positive_int, default=1, help="processes for independent trials")
    p.add_argument("--config", type=Path, default=None, help="INI file with per-command defaults")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qswapnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("neuron", help="one neuron through the full circuit")
    _common(p)
    p.add_argument("--n", type=_positive_int, default=2, help="input qubits")
    p.add_argument("--t", type=_positive_int, default=5, help="phase register qubits")
    p.add_argument("--x", type=_angles, default=None, help="input angles, random if omitted")
    p.add_argument("--w", type=_angles, default=None, help="weight angles, random if omitted")
    p.set_defaults(handler=cmd_neuron, section="neuron")

    p = sub.add_parser("inner", help="swap-test estimate of <x|w>")
    _common(p)
    p.add_argument("--n", type=_positive_int, default=1)
    p.add_argument("--t", type=_positive_int, default=7)
    p.add_argument("--x", type=_angles, default=None)
    p.add_argument("--w", type=_angles, default=None)
    p.add_argument("--shots", type=int, default=0, help="0 reads the modal outcome (no sampling)")
    p.set_defaults(handler=cmd_inner, section="inner")

    p = sub.add_parser("train-checkerboard", help="train the 2-8-8-1 classifier")
    _common(p)
    defaults = tr.TrainConfig()
    p.add_argument("--train-size", type=_positive_int, default=ex.CheckerConfig.train_size)
    p.add_argument("--test-size", type=_positive_int, default=ex.CheckerConfig.test_size)
    p.add_argument("--full-scale", action="store_true", help="100000 train / 10000 test")
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--lr", type=float, default=defaults.lr)
    p.add_argument("--batch-size", type=_positive_int, default=defaults.batch_size)
    p.add_argument("--decay", type=float, default=defaults.decay)
    p.add_argument("--decay-every", type=int, default=defaults.decay_every)
    p.add_argument("--init-trials", type=_positive_int, default=defaults.init_trials)
    p.add_argument("--fd-step", type=float, default=defaults.fd_step)
    p.set_defaults(handler=cmd_train, section="train-checkerboard")

    p = sub.add_parser("eval", help="score a saved checkerboard model on fresh samples")
    _common(p)
    p.add_argument("--model", type=Path, default=None, help="model file written by train-checkerboard")
    p.add_argument("--test-size", type=_positive_int, default=ex.CheckerConfig.test_size)
    p.set_defaults(handler=cmd_eval, section="eval")

    p = sub.add_parser("verify", help="numerical checks of the error bounds")
    vsub = p.add_subparsers(dest="check", metavar="CHECK", required=True)
    v = vsub.add_parser("theorem1", help="single-neuron precision bound")
    _common(v)
    v.add_argument("--n", type=_positive_int, default=2)
    v.add_argument("--m", type=_positive_int, default=3)
    v.add_argument("--sigma", type=float, default=0.5)
    v.add_argument("--trials", type=_positive_int, default=300)
    v.set_defaults(handler=cmd_theorem1, section="verify-theorem1")
    v = vsub.add_parser("lemma3", help="perturbation bounds")
    _common(v)
    v.add_argument("--trials", type=_positive_int, default=10_000)
    v.set_defaults(handler=cmd_lemma3, section="verify-lemma3")
    v = vsub.add_parser("recursion", help="layer-by-layer error propagation")
    _common(v)
    v.add_argument("--widths", type=_widths, default=(2, 2, 1))
    v.add_argument("--m", type=_positive_int, default=8)
    v.add_argument("--trials", type=_positive_int, default=100)
    v.set_defaults(handler=cmd_recursion, section="verify-recursion")
    v = vsub.add_parser("concentration", help="phase-estimation mass near each branch")
    _common(v)
    v.add_argument("--cases", type=_positive_int, default=20)
    v.add_argument("--n", type=_positive_int, default=1)
    v.add_argument("--m", type=_positive_int, default=3)
    v.add_argument("--sigma", type=float, default=0.25)
    v.set_defaults(handler=cmd_concentration, section="verify-concentration")

    p = sub.add_parser("circuit-221", help="2-2-1 network as one deferred-measurement circuit")
    _common(p)
    p.add_argument("--t", type=_positive_int, default=2)
    p.add_argument("--x", type=_angles, default=None, help="two input angle triples")
    p.add_argument("--model", type=Path, default=None, help="2-2-1 model file, random if omitted")
    p.set_defaults(handler=cmd_circuit_221, section="circuit-221")
    return parser


def _leaf_parser(parser: argparse.ArgumentParser, argv: Sequence[str]) -> Optional[argparse.ArgumentParser]:
    """Subparser that handles ``argv``'s command, found by walking the subcommand words."""
    current = parser
    for word in argv:
        subs = [a for a in current._actions if isinstance(a, argparse._SubParsersAction)]
        if not subs:
            break
        if word in subs[0].choices:
            current = subs[0].choices[word]
    return current if current is not parser else None


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], path: Path, section: str) -> None:
    leaf = _leaf_parser(parser, argv)
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}")
    known = {a.dest: a for a in leaf._actions if a.option_strings and a.dest not in ("help", "config")}
    for name in cp.sections():
        if name != section:
            continue
        values = {}
        for key, raw in cp.items(name):
            dest = key.replace("-", "_")
            if dest not in known:
                raise UsageError(f"unknown key {key!r} in [{name}] of {path}")
            action = known[dest]
            if isinstance(action, argparse._StoreTrueAction):
                values[dest] = cp.getboolean(name, key)
            else:
                values[dest] = raw  # argparse runs ``type`` on string defaults
        leaf.set_defaults(**values)
    unknown = [s for s in cp.sections() if s not in _SECTIONS]
    if unknown:
        raise UsageError(f"unknown section(s) {unknown} in {path}")


_SECTIONS = {"neuron", "inner", "train-checkerboard", "eval", "verify-theorem1", "verify-lemma3",
             "verify-recursion", "verify-concentration", "circuit-221"}


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

class Run:
    """Seeded RNG and output directory for one command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        if args.seed is None:
            args.seed = int(np.random.SeedSequence().entropy % (1 << 63))
            print(f"seed: {args.seed}", file=sys.stderr)
        self.seed = int(args.seed)
        self.rng = np.random.default_rng(self.seed)
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {self.out}: {exc}") from exc
        if not os.access(self.out, os.W_OK):
            raise OSError(f"output directory {self.out} is not writable")
        self.figures = not args.no_figures

    def path(self, name: str) -> Path:
        return self.out / name

    def figure(self, fn: Callable, name: str, *a) -> None:
        if self.figures:
            from . import plotting
            getattr(plotting, fn)(self.path(name), *a)


def _prep(angles, n: int, rng: np.random.Generator, what: str) -> st.StatePrep:
    if angles is None:
        return ex.random_product(n, rng)
    if len(angles) != n:
        raise UsageError(f"--{what} has {len(angles)} qubits, expected {n}")
    return st.StatePrep.from_angles(angles)


def _cplx(v) -> list[list[float]]:
    return [[float(np.real(c)), float(np.imag(c))] for c in np.asarray(v).ravel()]


def _verdict(name: str, passed: bool) -> int:
    print(f"{name}: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_neuron(args) -> int:
    qubits = 2 * args.t + 2 * args.n + 3
    if qubits > ss.MAX_QUBITS:
        raise ss.CapacityError(f"neuron circuit needs {qubits} qubits (2t+2n+3), cap is {ss.MAX_QUBITS}")
    run = Run(args)
    x = _prep(args.x, args.n, run.rng, "x")
    if args.w is None:
        w_angles = [st.ket_angles(ex.haar_ket(run.rng)) for _ in range(args.n)]
    elif len(args.w) != args.n:
        raise UsageError(f"--w has {len(args.w)} qubits, expected {args.n}")
    else:
        w_angles = args.w
    spec = nr.NeuronSpec(args.n, args.t, w_angles)
    tx = nr.neuron_forward_circuit(x, spec, run.rng)
    exact = nr.neuron_forward_exact(x.state(), spec)
    a = st.exact_inner(x.state(), spec.weight_state())
    dist = ss.norm_dist(tx.output, exact)
    report = {
        "seed": run.seed, "n": args.n, "t": args.t, "qubits": qubits,
        "inner_product": [a.real, a.imag],
        "y_real": tx.y_r, "y_imag": tx.y_i, "p_real": tx.p_r, "p_imag": tx.p_i,
        "output": _cplx(tx.output), "exact_output": _cplx(exact),
        "distance": dist, "purity": tx.purity,
    }
    rp.write_json(run.path("neuron.json"), report)
    print(rp.text_table([
        ("y_real", tx.y_r), ("y_imag", tx.y_i),
        ("output", " ".join(f"{c.real:.6f}{c.imag:+.6f}i" for c in tx.output)),
        ("exact", " ".join(f"{c.real:.6f}{c.imag:+.6f}i" for c in exact)),
        ("distance", dist), ("purity", tx.purity)]))
    return EXIT_OK


def cmd_inner(args) -> int:
    if args.t + args.n + 1 > ss.MAX_QUBITS:
        raise ss.CapacityError(f"phase estimation needs {args.t + args.n + 1} qubits")
    if args.shots < 0:
        raise UsageError("--shots must be >= 0")
    run = Run(args)
    x = _prep(args.x, args.n, run.rng, "x")
    w = _prep(args.w, args.n, run.rng, "w")
    est = st.estimate_inner(x, w, args.t, args.shots or None, run.rng)
    exact = st.exact_inner(x.state(), w.state())
    report = {
        "seed": run.seed, "n": args.n, "t": args.t, "shots": args.shots,
        "estimate": [est.re, est.im], "exact": [exact.real, exact.imag],
        "modal_y_real": est.dist_r.modal_y, "modal_y_imag": est.dist_i.modal_y,
        "error_real": abs(est.re - exact.real), "error_imag": abs(est.im - exact.imag),
    }
    rp.write_json(run.path("inner.json"), report)
    rp.write_csv(run.path("inner_distribution.csv"), ["y", "p_real", "p_imag"],
                 zip(range(len(est.dist_r.probs)), est.dist_r.probs, est.dist_i.probs))
    run.figure("phase_distributions", "inner_distribution.png",
               [est.dist_r.probs, est.dist_i.probs], ["real part", "imaginary part"])
    print(rp.text_table([("estimate", f"{est.re:.6f}{est.im:+.6f}i"),
                         ("exact", f"{exact.real:.6f}{exact.imag:+.6f}i")]))
    return EXIT_OK


def _write_scatter(run: Run, test: ex.CheckerSet, pred: np.ndarray, name: str) -> None:
    correct = (pred == test.labels).astype(int)
    rp.write_csv(run.path(f"{name}.csv"), ["theta1", "theta2", "predicted", "correct"],
                 ((a, b, int(p), int(c)) for (a, b), p, c in zip(test.thetas, pred, correct)))
    run.figure("test_scatter", f"{name}.png", test.thetas, pred, correct)


def cmd_train(args) -> int:
    try:
        cfg = tr.TrainConfig(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                             decay=args.decay, decay_every=args.decay_every,
                             init_trials=args.init_trials, fd_step=args.fd_step)
    except ss.ValidationError as exc:
        raise UsageError(str(exc))
    sizes = (100_000, 10_000) if args.full_scale else (args.train_size, args.test_size)
    run = Run(args)
    t0 = time.perf_counter()
    res = ex.run_checkerboard(ex.CheckerConfig(sizes[0], sizes[1], cfg), run.rng)
    log.info("training finished in %.1f s", time.perf_counter() - t0)
    qnn.save_model(run.path("model.txt"), res.weights)
    rp.write_csv(run.path("curve.csv"), ["epoch", "train_loss", "val_loss", "val_accuracy"],
                 ((p.epoch, p.train_loss, p.val_loss, p.val_accuracy) for p in res.curve))
    _write_scatter(run, res.test, res.predicted, "scatter")
    run.figure("learning_curve", "curve.png", [p.epoch for p in res.curve],
               [p.train_loss for p in res.curve], [p.val_loss for p in res.curve],
               [p.val_accuracy for p in res.curve])
    summary = {
        "seed": run.seed, "widths": list(ex.CHECKER_WIDTHS),
        "train_size": sizes[0], "test_size": sizes[1],
        "lr": cfg.lr, "epochs": cfg.epochs, "batch_size": cfg.batch_size, "decay": cfg.decay,
        "decay_every": cfg.decay_every, "init_trials": cfg.init_trials, "fd_step": cfg.fd_step,
        "final_loss": res.final_loss, "test_loss": res.curve[-1].val_loss,
        "accuracy": res.accuracy, "accuracy_ci95": list(res.interval),
    }
    rp.write_json(run.path("summary.json"), summary)
    print(rp.text_table([("final loss", res.final_loss), ("test accuracy", res.accuracy),
                         ("95% interval", f"[{res.interval[0]:.4f}, {res.interval[1]:.4f}]")]))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.model is None:
        raise UsageError("--model is required")
    run = Run(args)
    weights = qnn.load_model(args.model)
    if weights.net.widths[0] != 2 or weights.net.widths[-1] != 1:
        raise UsageError(f"model widths {weights.net.widths} do not fit the checkerboard task")
    test = ex.gen_checkerboard(args.test_size, run.rng)
    pred, acc, ci = ex.evaluate_checkerboard(weights, test)
    loss = float(tr.loss_values(weights.net, weights.theta, test.dataset()))
    rp.write_json(run.path("eval.json"), {"seed": run.seed, "test_size": args.test_size,
                                          "widths": list(weights.net.widths), "loss": loss,
                                          "accuracy": acc, "accuracy_ci95": list(ci)})
    _write_scatter(run, test, pred, "eval_scatter")
    print(rp.text_table([("loss", loss), ("accuracy", acc)]))
    return EXIT_OK


def cmd_theorem1(args) -> int:
    if not 0 < args.sigma < 1:
        raise UsageError("--sigma must lie in (0, 1)")
    qubits = 2 * ex.precision_qubits(args.m, args.sigma) + 2 * args.n + 3
    if qubits > ss.MAX_QUBITS:
        raise ss.CapacityError(f"neuron circuit needs {qubits} qubits (2t+2n+3), cap is {ss.MAX_QUBITS}")
    run = Run(args)
    rep = ex.verify_theorem1(args.n, args.m, args.sigma, args.trials, run.rng, args.workers)
    body = {k: v for k, v in vars(rep).items() if k != "distances"}
    rp.write_json(run.path("theorem1.json"), {"seed": run.seed, **body})
    rp.write_csv(run.path("theorem1_distances.csv"), ["trial", "distance"], enumerate(rep.distances))
    run.figure("distance_histogram", "theorem1_distances.png", rep.distances, rep.bound)
    print(rp.text_table([("t", rep.t), ("frequency", rep.frequency), ("threshold", rep.threshold),
                         ("max distance", rep.max_distance), ("bound", rep.bound)]))
    return _verdict("theorem1", rep.passed)


def cmd_lemma3(args) -> int:
    run = Run(args)
    rep = ex.verify_lemma3(args.trials, run.rng, args.workers)
    rp.write_json(run.path("lemma3.json"), {"seed": run.seed, **vars(rep)})
    print(rp.text_table([(f"violations {k}", v) for k, v in rep.violations.items()]
                        + [(f"worst ratio {k}", v) for k, v in rep.worst_ratio.items()]))
    return _verdict("lemma3", rep.passed)


def cmd_recursion(args) -> int:
    run = Run(args)
    rep = ex.verify_error_recursion(args.widths, args.m, args.trials, run.rng, args.workers)
    body = {k: v for k, v in vars(rep).items() if k not in ("predicted", "observed", "observed_qubit")}
    rp.write_json(run.path("recursion.json"), {"seed": run.seed, **body})
    layers = len(rep.widths) - 1
    rows = []
    for i in range(rep.trials):
        for k in range(layers):
            rows.append((i, k + 1, rep.observed[i][k], rep.observed_qubit[i][k], rep.predicted[i][k]))
    rp.write_csv(run.path("recursion.csv"), ["trial", "layer", "observed", "observed_max_neuron",
                                              "predicted"], rows)
    ratio = max(o / p for oo, pp in zip(rep.observed, rep.predicted) for o, p in zip(oo, pp))
    print(rp.text_table([("violations", rep.violations), ("largest observed/predicted", ratio)]))
    return _verdict("recursion", rep.passed)


def cmd_concentration(args) -> int:
    if not 0 < args.sigma < 1:
        raise UsageError("--sigma must lie in (0, 1)")
    qubits = ex.concentration_qubits(args.m, args.sigma) + args.n + 1
    if qubits > ss.MAX_QUBITS:
        raise ss.CapacityError(f"phase estimation needs {qubits} qubits, cap is {ss.MAX_QUBITS}")
    run = Run(args)
    cases = ex.random_concentration_cases(args.cases, run.rng, args.m, args.sigma, args.n)
    rep = ex.verify_phase_concentration(cases)
    rows = [(i, r.t, r.window, r.centres[0], r.centres[1], r.branch_mass[0], r.branch_mass[1], r.floor,
             int(r.passed)) for i, r in enumerate(rep.cases)]
    rp.write_csv(run.path("concentration.csv"), ["case", "t", "window", "centre_plus", "centre_minus",
                                                  "mass_plus", "mass_minus", "floor", "passed"], rows)
    rp.write_json(run.path("concentration.json"), {
        "seed": run.seed, "cases": args.cases, "n": args.n, "m": args.m, "sigma": args.sigma,
        "min_branch_mass": min(min(r.branch_mass) for r in rep.cases),
        "floor": rep.cases[0].floor, "passed": rep.passed})
    if run.figures:
        first = cases[0]
        _, dist = st.phase_estimate(st.StatePrep.from_kets(list(first.x)),
                                    st.StatePrep.from_kets(list(first.w)), st.REAL, rep.cases[0].t)
        run.figure("phase_distributions", "concentration_case0.png", [dist.probs], ["case 0"])
    print(rp.text_table([("cases", args.cases), ("min branch mass", min(min(r.branch_mass) for r in rep.cases)),
                         ("floor", rep.cases[0].floor)]))
    return _verdict("concentration", rep.passed)


def cmd_circuit_221(args) -> int:
    q = qnn.circuit_221_qubits(args.t)
    if q > ss.MAX_QUBITS:
        raise ss.CapacityError(f"2-2-1 circuit needs {q} qubits (6t+11), cap is {ss.MAX_QUBITS}")
    run = Run(args)
    net = qnn.NetworkSpec((2, 2, 1), t=args.t)
    if args.model is not None:
        weights = qnn.load_model(args.model)
        if weights.net.widths != (2, 2, 1):
            raise UsageError(f"model widths {weights.net.widths} are not 2-2-1")
    else:
        weights = qnn.WeightParams.random(net, run.rng)
    if args.x is not None and len(args.x) != 2:
        raise UsageError("--x needs two angle triples")
    kets = ([st.product_ket(*a) for a in args.x] if args.x is not None
            else [ex.haar_ket(run.rng) for _ in range(2)])
    preps = [st.StatePrep.from_kets([k]) for k in kets]
    res = qnn.forward_circuit_221(weights, preps, args.t, run.rng)
    exact = qnn.forward_exact(weights.net, weights, np.array(kets))[-1][0]
    dist = ss.norm_dist(res.output, exact)
    rp.write_json(run.path("circuit221.json"), {
        "seed": run.seed, "t": args.t, "qubits": q, "output": _cplx(res.output),
        "exact_output": _cplx(exact), "distance": dist, "purity": res.purity,
        "transcript": [{"register": n, "y": y, "p": p} for n, y, p in res.transcript]})
    print(rp.text_table([(n, y) for n, y, _ in res.transcript]
                        + [("distance", dist), ("purity", res.purity)]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.config is not None:
            _apply_config(parser, argv, args.config, args.section)
            try:
                args = parser.parse_args(argv)
            except SystemExit as exc:
                return int(exc.code or 0)
        return args.handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ss.CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ss.ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
