"""Command-line scenario runner.

``emheat run scenario.json --out-dir out`` executes the scenario's tasks in
dependency order and writes CSV/JSON/plot-data files. Exit codes: 0 all
assertions pass, 1 an assertion failed, 2 configuration error, 3 numerical
failure. Nothing is written unless every task ran to completion.
"""

from __future__ import annotations

import argparse
import json
import math
import shutil
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import almgren, heat_kernel, inequalities, reference
from .angular import angular_spectrum, check_hardy_condition, write_eigenpairs_csv
from .fields import SelfSimilarField
from .heat_kernel import KernelConfig
from .ou import eigenspace_basis, mode_table, truncation_may_hide_modes, write_spectrum_csv
from .problem import ConfigurationError, HardyConditionError, NumericalError
from .quadrature import RadialQuadrature
from .scenario import Scenario, build_datum, load_scenario

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def emit_plot_data(path, columns: dict, header_lines=()) -> None:
    """Whitespace-separated columns with ``#`` comment headers."""
    if not columns or any(len(np.atleast_1d(v)) == 0 for v in columns.values()):
        raise ConfigurationError("nothing to emit: empty trace")
    arrs = [np.asarray(v, dtype=float) for v in columns.values()]
    n = len(arrs[0])
    if any(len(a) != n for a in arrs):
        raise ConfigurationError("columns have different lengths")
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("# " + " ".join(columns) + "\n")
        for i in range(n):
            fh.write(" ".join(f"{a[i]:.16e}" for a in arrs) + "\n")


def _is_free(problem) -> bool:
    pot = problem.potential
    if pot.kind == "aharonov_bohm":
        return pot.phi == 0.0
    if pot.kind == "sphere_constant":
        return pot.a_const == 0.0
    return not np.any(pot.a_coeffs) and not np.any(pot.A_coeffs)


class Runner:
    def __init__(self, sc: Scenario, sha: str, out: Path, seed: int = 0, jobs: int = 1, base_dir="."):
        self.sc, self.sha, self.out, self.seed = sc, sha, out, seed
        self.jobs = jobs
        self.pool = ThreadPoolExecutor(jobs) if jobs > 1 else None
        self.jobs_map = self.pool.map if self.pool else map
        self.problem = sc.problem.build()
        self.quad = RadialQuadrature(sc.truncation.quad_order)
        self.base_dir = base_dir
        self.results: dict = {}
        self.pairs = None
        self.datum = None

    @property
    def header(self):
        return [f"scenario_sha256={self.sha}", f"scenario={self.sc.name}"]

    def _record(self, task, **assertions):
        ok = all(bool(v) for v in assertions.values())
        self.results[task] = {"passed": ok, "assertions": {k: bool(v) for k, v in assertions.items()}}

    def _need_unperturbed(self, task):
        if not self.problem.unperturbed:
            raise ConfigurationError(f"task {task!r} uses the representation formula and needs h = 0")

    # tasks -----------------------------------------------------------------

    def spectrum(self):
        tr = self.sc.truncation
        N = self.problem.N
        self.pairs = angular_spectrum(self.problem, tr.k_max)
        hc = check_hardy_condition(self.pairs, N)
        if not hc.ok:
            raise HardyConditionError(hc.margin)
        modes = mode_table(self.pairs, N, tr.m_max)
        write_spectrum_csv(modes, self.out / "spectrum.csv", self.header)
        write_eigenpairs_csv(self.pairs, self.out / "eigenpairs.csv", self.header)
        if self.sc.datum is not None:
            self.datum = build_datum(self.sc.datum, self.problem, self.pairs, self.base_dir)
        self._record("spectrum", hardy_condition=hc.ok)

    def kernel(self):
        self._need_unperturbed("kernel")
        opt = self.sc.options.kernel
        N = self.problem.N
        kpairs = angular_spectrum(self.problem, self.sc.truncation.kernel_k_max)
        y = np.zeros(N)
        y[0] = 1.0
        if opt.y is not None:
            y = np.asarray(opt.y, float)
            if y.shape != (N,):
                raise ConfigurationError("kernel.y must have N coordinates")
        e = np.zeros(N)
        e[1] = 1.0
        d = np.asarray(opt.distances, float)
        x = y[None, :] + d[:, None] * e[None, :]
        K, tail = heat_kernel.kernel_K(x, np.broadcast_to(y, x.shape), kpairs, N,
                                       KernelConfig(k_max=len(kpairs), tail_tol=opt.tail_tol), return_tail=True)
        with open(self.out / "kernel_slice.csv", "w") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            fh.write("distance,re_K,im_K,abs_K,tail_estimate\n")
            for di, k, tl in zip(d, K, tail):
                fh.write(f"{di:.16g},{k.real:.16g},{k.imag:.16g},{abs(k):.16g},{tl:.3g}\n")
        emit_plot_data(self.out / "kernel_slice.dat", {"distance": d, "abs_K": np.abs(K)}, self.header)
        checks = {"tail_within_tolerance": bool(np.all(tail <= opt.tail_tol))}
        if _is_free(self.problem):
            exact = (4 * math.pi) ** (-N / 2) * np.exp(-d**2 / 4)
            checks["free_gaussian_1e-8"] = bool(np.max(np.abs(K - exact)) <= 1e-8)
        self._record("kernel", **checks)

    def evolve(self):
        opt = self.sc.options.evolve
        N = self.problem.N
        r = np.asarray(opt.radii, float)
        pts = np.zeros((len(r), N))
        pts[:, 0] = r
        rows = []
        if self.problem.unperturbed:
            state = heat_kernel.expand_datum(self.datum, self.pairs, N, self.sc.truncation.m_max, quad=self.quad)
            sol = heat_kernel.solution_field(state)
            for t in opt.t_eval:
                rows.append((t, sol.at(t)(pts)))
            tail = heat_kernel.spectral_tail(state, max(opt.t_eval))
        else:
            cn = reference.evolve(self.problem, self.datum, opt.t_eval, self.pairs, grid=None, dt=opt.dt,
                                  jobs_map=self.jobs_map)
            for t in sorted(cn):
                rows.append((t, cn[t](pts)))
                reference.write_snapshot_csv(self.out / f"cn_snapshot_t{t:g}.csv", cn[t], t, self.header)
            tail = 0.0
        with open(self.out / "evolve_samples.csv", "w") as fh:
            for line in self.header:
                fh.write(f"# {line}\n")
            fh.write("t,r,re_u,im_u\n")
            for t, vals in rows:
                for rv, v in zip(r, vals):
                    fh.write(f"{t:.16g},{rv:.16g},{v.real:.16g},{v.imag:.16g}\n")
        for t, vals in rows:
            emit_plot_data(self.out / f"profile_t{t:g}.dat", {"r": r, "abs_u": np.abs(vals)}, self.header)
        self._record("evolve", finite=bool(all(np.all(np.isfinite(v)) for _, v in rows)), spectral_tail_small=tail <= 1e-6)

    def frequency(self):
        opt = self.sc.options.frequency
        N = self.problem.N
        state = heat_kernel.expand_datum(self.datum, self.pairs, N, self.sc.truncation.m_max, quad=self.quad)
        field = SelfSimilarField(N, self.pairs, state.coeffs, "backward")
        ts = np.sort(opt.t0 * opt.ratio ** np.arange(opt.rungs))
        trace = almgren.frequency(field, ts, self.problem, self.sc.truncation.m_max, self.quad, jobs_map=self.jobs_map)
        almgren.write_trace_csv(trace, self.out / "frequency_trace.csv", self.header)
        emit_plot_data(self.out / "frequency_trace.dat", {"t": trace.t, "N": trace.N}, self.header)
        mono = almgren.monotone_H_check(field, ts, 0.0, self.problem, self.quad) if self.problem.unperturbed else None
        if trace.diagnostics.get("unmatched"):
            warnings.warn(f"frequency limit {trace.gamma_fit:.6g} matches no eigenvalue within the truncation")
        if truncation_may_hide_modes(trace.gamma_fit, self.pairs, N):
            warnings.warn("angular truncation may hide modes at this eigenvalue")
        betas, rows = None, None
        if trace.matched_modes:
            modes = eigenspace_basis(trace.matched_modes[0].gamma, self.pairs, N, self.sc.truncation.m_max)
            betas = almgren.beta_coefficients(field, modes, opt.lambdas, self.problem, self.quad)
            nz = {k: v for k, v in betas.betas.items() if abs(v) > 0}
            if nz:
                rows = almgren.blowup_distance(field, betas.gamma, nz, opt.lambdas, quad=self.quad)
                emit_plot_data(self.out / "blowup_ladder.dat", {"lambda": rows[:, 0], "error": rows[:, 1]}, self.header)
        rep = almgren.blowup_report(trace, betas, rows, {"scenario_sha256": self.sha})
        almgren.write_report_json(rep, self.out / "blowup_report.json")
        checks = {"matched_eigenvalue": bool(trace.matched_modes)}
        if mono is not None:
            checks["frequency_monotone"] = bool(mono)
        if betas is not None:
            checks["beta_lambda_independent"] = betas.spread <= 1e-6
        self._record("frequency", **checks)

    def inequalities(self):
        opt = self.sc.options.inequalities
        rep = inequalities.run_suite(self.problem, opt.n_fields, tuple(opt.t_values), seed=self.seed,
                                     name=self.sc.name, k_max=self.sc.truncation.k_max)
        probe = None
        if self.problem.potential.kind == "aharonov_bohm":
            p, qv, mu1 = inequalities.best_constant_probe(self.problem.potential.phi)
            probe = {"p": p.tolist(), "quotient": qv.tolist(), "mu1": mu1,
                     "relative_excess": float(qv[-1] / mu1 - 1) if mu1 > 0 else None}
        inequalities.write_report_json(self.out / "inequalities.json", [rep], probe)
        self._record("inequalities", margins_nonnegative=rep.passed())

    def crosscheck(self):
        self._need_unperturbed("crosscheck")
        opt = self.sc.options.crosscheck
        pairs = self.pairs
        if opt.method == "kernel":
            pairs = angular_spectrum(self.problem, self.sc.truncation.kernel_k_max)
        rep = reference.compare_with_spectral(self.problem, self.datum, opt.t_eval, opt.tolerance, opt.method,
                                              m_max=self.sc.truncation.m_max, dt=opt.dt, pairs=pairs,
                                              kernel_config=KernelConfig(k_max=len(pairs)), jobs_map=self.jobs_map)
        if rep.details.get("low_confidence"):
            warnings.warn("Bessel order of the lowest mode is below 0.05: CN near-origin accuracy is low")
        with open(self.out / "crosscheck.json", "w") as fh:
            json.dump({"t": rep.t, "rel_error": rep.rel_error, "tolerance": rep.tolerance, "method": rep.method,
                       "passed": rep.passed, "scenario_sha256": self.sha}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._record("crosscheck", rel_error_within_tolerance=rep.passed)

    def run(self) -> dict:
        try:
            for task in ["spectrum"] + [t for t in self.sc.ordered_tasks() if t != "spectrum"]:
                getattr(self, task)()
        finally:
            if self.pool:
                self.pool.shutdown()
        return self.results


def run_scenario(path, out_dir, seed: int = 0, jobs: int = 1, strict: bool = False, stream=sys.stderr) -> int:
    try:
        sc, sha = load_scenario(path)
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            print(f"scenario error at {loc}: {err['msg']}", file=stream)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"cannot read scenario: {exc}", file=stream)
        return EXIT_CONFIG

    out = Path(out_dir)
    fresh = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))

    def discard():
        shutil.rmtree(stage, ignore_errors=True)
        if fresh and not any(out.iterdir()):
            out.rmdir()

    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            runner = Runner(sc, sha, stage, seed, jobs, base_dir=Path(path).parent)
            results = runner.run()
        warn_msgs = sorted({str(w.message) for w in caught if issubclass(w.category, UserWarning)})
    except HardyConditionError as exc:
        discard()
        print(f"Hardy condition fails: mu_1 + ((N-2)/2)^2 = {exc.margin:.6g} <= 0", file=stream)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        discard()
        print(f"configuration error: {exc}", file=stream)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        discard()
        print(f"numerical failure: {exc}", file=stream)
        return EXIT_NUMERIC
    except BaseException:
        discard()
        raise

    passed = all(r["passed"] for r in results.values())
    code = EXIT_OK if passed and not (strict and warn_msgs) else EXIT_ASSERT
    summary = {"scenario": sc.name, "scenario_sha256": sha, "seed": seed, "tasks": results,
               "warnings": warn_msgs, "strict": strict, "exit_code": code}
    with open(stage / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for f in sorted(stage.iterdir()):
        shutil.move(str(f), str(out / f.name))
    stage.rmdir()
    for task, r in results.items():
        print(f"{task}: {'ok' if r['passed'] else 'FAILED'}", file=stream)
    for w in warn_msgs:
        print(f"warning: {w}", file=stream)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="emheat", description="Electromagnetic heat equation toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a JSON scenario")
    run.add_argument("scenario")
    run.add_argument("--out-dir", default="emheat-out")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--strict", action="store_true", help="treat warnings as failures")
    args = ap.parse_args(argv)
    if args.jobs < 1:
        ap.error("--jobs must be >= 1")
    return run_scenario(args.scenario, args.out_dir, args.seed, args.jobs, args.strict)


if __name__ == "__main__":
    sys.exit(main())
