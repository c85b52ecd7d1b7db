"""Scenario runner: ``qnlqc run scenario.ini --out-dir out/``.

A scenario is an INI file with a single ``[scenario]`` section::

    [scenario]
    name = smooth-load
    potential = lj                      ; lj | lj-cutoff(3.2) | morse(4.0)
    N = 32, 64, 128                     ; one value or a strictly increasing sweep
    F = 1.05
    partition = atomistic_fraction(0.375, 0.625)
    load = sine(0.1, 1)                 ; zero | sine(a, k) | random(a) | file(path)
    tasks = solve-atomistic, solve-qnl, apriori-cert
    seed = 0

Partitions are ``full``, ``empty``, ``atomistic_interval(start, end)`` with
1-based atom indices, or ``atomistic_fraction(a, b)`` selecting the atoms
with ``a < xi/N <= b`` (convenient for sweeps).

Each task writes ``<task>_N<N>.json``; sweeps also write ``sweep.csv``.
Reports are deterministic; wall-clock data goes to ``metadata.json``.
Exit codes: 0 all tasks passed, 2 a task failed, 3 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import platform
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import bond_form_to_load
from .certify import apost_certificate, apriori_certificate, check_soundness, to_jsonable
from .chain import ChainConfig, Deformation
from .estimate import (
    apost_stability_report,
    consistency_report,
    crack_demo,
    uniform_constants,
    uniform_spectrum,
)
from .potentials import Potential, potential_from_spec
from .qc import RegionPartition, empty_partition, full_partition, grad_qnl, interval_partition, make_partition
from .solve import newton_solve, stability_constant

log = logging.getLogger("qnlqc")

TASKS = (
    "solve-atomistic",
    "solve-qnl",
    "consistency",
    "stability",
    "spectrum",
    "crack",
    "apriori-cert",
    "apost-cert",
)
NEEDS = {
    "consistency": ("solve-atomistic",),
    "stability": ("solve-atomistic", "solve-qnl"),
    "apriori-cert": ("solve-atomistic",),
    "apost-cert": ("solve-qnl",),
}
SWEEP_COLUMNS = ("N", "eps", "error_l2strain", "eta", "bound", "c_qc", "c_atom", "contraction", "certified")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    potential: str
    N: tuple
    F: float
    partition: str
    load: str
    tasks: tuple
    seed: int | None
    base_dir: Path

    def resolved(self) -> dict:
        return {
            "name": self.name,
            "potential": self.potential,
            "N": list(self.N),
            "F": self.F,
            "partition": self.partition,
            "load": self.load,
            "tasks": list(self.tasks),
            "seed": self.seed,
        }


_CALL = re.compile(r"^\s*([a-z_\-]+)\s*(?:\((.*)\))?\s*$")


def _parse_call(text: str) -> tuple[str, list[str]]:
    m = _CALL.match(text.strip().lower() if "file(" not in text else text.strip())
    if not m:
        raise ConfigError(f"cannot parse {text!r}")
    args = [a.strip() for a in m.group(2).split(",")] if m.group(2) else []
    return m.group(1).lower(), args


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as e:
        raise ConfigError(str(e)) from e
    if "scenario" not in cp:
        raise ConfigError("missing [scenario] section")
    sec = cp["scenario"]
    known = {"name", "potential", "n", "f", "partition", "load", "tasks", "seed"}
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    try:
        Ns = tuple(int(v) for v in sec.get("N", "").split(",") if v.strip())
        F = float(sec.get("F", "1.0"))
        cfg_seed = int(sec["seed"]) if "seed" in sec else None
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if not Ns:
        raise ConfigError("N is required")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ConfigError("sweep list N must be strictly increasing")
    tasks = tuple(t.strip() for t in sec.get("tasks", "").split(",") if t.strip())
    bad = [t for t in tasks if t not in TASKS]
    if bad or not tasks:
        raise ConfigError(f"tasks must be a nonempty subset of {TASKS}; got unknown {bad}")
    sc = Scenario(
        name=sec.get("name", path.stem),
        potential=sec.get("potential", "lj"),
        N=Ns,
        F=F,
        partition=sec.get("partition", "empty"),
        load=sec.get("load", "zero"),
        tasks=tasks,
        seed=seed if seed is not None else cfg_seed,
        base_dir=path.parent,
    )
    # validate specs eagerly so errors surface as config errors
    try:
        potential_from_spec(sc.potential)
        for N in sc.N:
            ChainConfig(N, sc.F)
            build_partition(sc.partition, N)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    kind, args = _parse_call(sc.load)
    arity = {"zero": 0, "sine": 2, "random": 1, "file": 1}
    if arity.get(kind) != len(args):
        raise ConfigError(f"unknown load spec {sc.load!r}")
    if kind == "random" and sc.seed is None:
        raise ConfigError("random loads need a seed (config key or --seed)")
    return sc


def build_partition(spec: str, N: int) -> RegionPartition:
    kind, args = _parse_call(spec)
    if kind == "full":
        return full_partition(N)
    if kind == "empty":
        return empty_partition(N)
    if kind == "atomistic_interval" and len(args) == 2:
        return interval_partition(N, int(args[0]), int(args[1]))
    if kind == "atomistic_fraction" and len(args) == 2:
        a, b = float(args[0]), float(args[1])
        return make_partition(N, [xi for xi in range(1, N + 1) if a < xi / N <= b])
    raise ConfigError(f"unknown partition spec {spec!r}")


def project_load(raw, N: int) -> tuple[np.ndarray, float]:
    """Subtract the mean; returns the projected load and the removed constant."""
    f = np.asarray(raw, dtype=float).reshape(-1)
    if f.size != N:
        raise ValueError(f"load has length {f.size}, expected {N}")
    mean = float(f.mean())
    return f - mean, mean


def build_load(sc: Scenario, N: int) -> tuple[np.ndarray | None, float]:
    kind, args = _parse_call(sc.load)
    xi = np.arange(1, N + 1)
    if kind == "zero":
        return None, 0.0
    if kind == "sine" and len(args) == 2:
        raw = float(args[0]) * np.sin(2 * np.pi * float(args[1]) * xi / N)
    elif kind == "random" and len(args) == 1:
        rng = np.random.default_rng([sc.seed, N])
        raw = float(args[0]) * rng.standard_normal(N)
    elif kind == "file" and len(args) == 1:
        p = Path(args[0])
        p = p if p.is_absolute() else sc.base_dir / p
        if not p.is_file():
            raise ConfigError(f"load file {p} not found")
        raw = np.loadtxt(p, delimiter=",", ndmin=1)
    else:
        raise ConfigError(f"unknown load spec {sc.load!r}")
    return project_load(raw, N)


def _ordered_tasks(tasks) -> list[str]:
    wanted = set(tasks)
    for t in tasks:
        wanted.update(NEEDS.get(t, ()))
    return [t for t in TASKS if t in wanted]


class _Run:
    """Task execution for one N; shares solves between tasks."""

    def __init__(self, sc: Scenario, N: int):
        self.sc = sc
        self.N = N
        self.pot: Potential = potential_from_spec(sc.potential)
        self.part = build_partition(sc.partition, N)
        self.f, self.load_mean = build_load(sc, N)
        self.cfg = ChainConfig(N, sc.F)
        self.y0 = Deformation.uniform(self.cfg)
        self.sol: dict[str, Deformation] = {}
        self.row: dict = {"N": N, "eps": 1.0 / N}

    def solve(self, model: str) -> dict:
        part = self.part if model == "qnl" else None
        res = newton_solve(model, self.y0, self.pot, self.f, part)
        self.sol[model] = res.y
        return {
            "result": {
                "iterations": res.iterations,
                "residual": res.residual,
                "min_strain": float(res.y.strain.min()),
                "max_strain": float(res.y.strain.max()),
                "strain": res.y.strain.tolist(),
            },
            "checks": {"converged": True},
        }

    def task_solve_atomistic(self):
        return self.solve("atomistic")

    def task_solve_qnl(self):
        return self.solve("qnl")

    def task_consistency(self):
        y = self.sol["atomistic"]
        reps = {str(p): consistency_report(y, self.pot, self.part, p).to_dict() for p in (1, 2, math.inf)}
        return {"result": reps, "checks": {f"measured_le_bound_p{p}": r["holds"] for p, r in reps.items()}}

    def task_stability(self):
        rep = apost_stability_report(self.sol["qnl"], self.pot, self.part)
        c_atom = stability_constant("atomistic", self.sol["atomistic"], self.pot).constant
        self.row["c_atom"] = c_atom
        self.row["c_qc"] = rep.c_qc
        return {
            "result": {"at_qnl_solution": rep.to_dict(), "c_atomistic_at_atomistic_solution": c_atom},
            "checks": {"apost_stability_bound": rep.holds},
        }

    def task_spectrum(self):
        y = Deformation.uniform(self.cfg)
        num = np.sort(stability_constant("atomistic", y, self.pot, full_spectrum=True).spectrum)
        ana = uniform_spectrum(self.sc.F, self.pot, self.N)
        A, B = uniform_constants(self.sc.F, self.pot)
        c_pred = A + 4 * B * math.sin(math.pi / self.N) ** 2
        dev = float(np.abs(num - ana).max())
        return {
            "result": {
                "A": A,
                "B": B,
                "numeric": num.tolist(),
                "analytic": ana.tolist(),
                "max_deviation": dev,
                "c_uniform": float(num[0]),
                "c_uniform_predicted": c_pred,
            },
            "checks": {"spectrum_match": dev < 1e-9, "c_uniform_match": abs(num[0] - c_pred) < 1e-10},
        }

    def task_crack(self):
        d = crack_demo(self.sc.F, self.pot, self.N, part=self.part)
        f = bond_form_to_load(grad_qnl(d.y, self.pot, self.part))
        cert = apost_certificate(d.y, self.pot, self.part, f)
        slack = 1e-12 * d.eps_A_hat
        return {
            "result": {"demo": d.to_dict(), "apost_certificate": cert.to_dict()},
            "checks": {
                "quotient_le_eps_A_hat": d.quotient <= d.eps_A_hat + slack,
                "c_atomistic_le_eps_A_hat": d.c_atomistic <= d.eps_A_hat + slack,
                "c_qc_le_eps_A_hat": d.c_qc <= d.eps_A_hat + slack,
                "apost_refused": not cert.certified,
            },
        }

    def _cert(self, kind: str):
        if kind == "apriori":
            y = self.sol["atomistic"]
            cert = apriori_certificate(y, self.pot, self.part, self.f)
        else:
            y = self.sol["qnl"]
            cert = apost_certificate(y, self.pot, self.part, self.f)
        out = {"certificate": cert.to_dict()}
        checks = {}
        if cert.certified:
            snd = check_soundness(cert, y, self.pot, self.part, self.f)
            out["soundness"] = snd.to_dict()
            checks["counterpart_within_bound"] = snd.within
            checks["counterpart_stable"] = bool(snd.counterpart_stability and snd.counterpart_stability > 0)
            error = snd.error
        else:
            error = None
        if "cert" not in self.row or kind == "apriori":
            self.row.update(
                cert=kind,
                eta=cert.eta,
                bound=cert.error_bound,
                contraction=cert.contraction,
                certified=cert.certified,
            )
            if error is not None:
                self.row["error_l2strain"] = error
        return {"result": out, "checks": checks}

    def task_apriori_cert(self):
        return self._cert("apriori")

    def task_apost_cert(self):
        return self._cert("apost")

    def run(self, task: str) -> dict:
        fn = getattr(self, "task_" + task.replace("-", "_"))
        body = fn()
        checks = {k: bool(v) for k, v in body.get("checks", {}).items()}
        return {
            "task": task,
            "N": self.N,
            "status": "passed" if all(checks.values()) else "failed",
            "checks": checks,
            "config": self.sc.resolved(),
            "load_mean_removed": self.load_mean,
            "result": body["result"],
        }


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_scenario(sc: Scenario, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = []
    failed = []
    tasks = _ordered_tasks(sc.tasks)
    for N in sc.N:
        try:
            r = _Run(sc, N)
        except (ConfigError, ValueError) as e:
            _write_json(out_dir / "error.json", {"error": type(e).__name__, "message": str(e), "N": N, "task": None})
            return 3
        for task in tasks:
            log.info("N=%d task %s", N, task)
            try:
                report = r.run(task)
            except Exception as e:  # task failure is reported, remaining artifacts kept
                log.error("N=%d task %s failed: %s", N, task, e)
                _write_json(out_dir / "error.json", {"error": type(e).__name__, "message": str(e), "N": N, "task": task})
                _write_meta(out_dir, sc, started)
                _write_sweep(out_dir, rows, sc)
                return 2
            _write_json(out_dir / f"{task}_N{N}.json", report)
            if report["status"] != "passed":
                failed.append(f"{task}_N{N}")
        rows.append(r.row)
    _write_sweep(out_dir, rows, sc)
    _write_meta(out_dir, sc, started, failed)
    if failed:
        log.warning("failed checks in: %s", ", ".join(failed))
        return 2
    return 0


def _write_sweep(out_dir: Path, rows, sc: Scenario) -> None:
    if len(sc.N) < 2 or not rows:
        return
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in SWEEP_COLUMNS])


def _write_meta(out_dir: Path, sc: Scenario, started: float, failed=()) -> None:
    _write_json(
        out_dir / "metadata.json",
        {
            "scenario": sc.name,
            "started_unix": started,
            "elapsed_s": time.time() - started,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "package_version": __version__,
            "failed": list(failed),
        },
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qnlqc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("config")
    p_run.add_argument("--out-dir", default="qnlqc-out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--verbose", "-v", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_dir = Path(args.out_dir)
    try:
        sc = load_scenario(args.config, args.seed)
    except ConfigError as e:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "error.json", {"error": "ConfigError", "message": str(e)})
        print(f"config error: {e}", file=sys.stderr)
        return 3
    return run_scenario(sc, out_dir)


if __name__ == "__main__":
    sys.exit(main())
