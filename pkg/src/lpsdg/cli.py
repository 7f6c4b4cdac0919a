"""Command line driver: configure a study, run it, emit CSV and EOC tables.

Exit codes: 0 success, 2 usage error, 3 solver failure.  The CSV starts with
'#'-prefixed metadata comments (config echo and solver tolerances) and holds
one row per (level, tau) combination; a companion .eoc.txt table is written
next to it.  Output is byte-identical across reruns of the same config.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from .assembly import SolverFailure
from .cases import CASE_NAMES, get_case
from .slab import NewtonConfig, StepFailure, advance, build_problem, postprocess
from .temporal import uniform_partition
from .verification import compute_errors, eoc

CSV_COLUMNS = (
    "case,k,r,nu,mu,level,h,tau,err_L2L2_u,err_Snorm,err_L2L2_p,"
    "err_final_u,err_jump,err_L2L2_u_postproc"
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3

SPACE_STUDY_DEFAULT_TAU = 1.0 / 800.0


@dataclass
class StudyConfig:
    case: str = "space_dominant"
    k: int = 1
    r: int = 2
    enriched: bool = True
    nu: float = 1e-6
    mu: float = 0.1
    final_time: float = 1.0
    levels: list[int] = field(default_factory=lambda: [1, 2, 3])
    taus: list[float] = field(default_factory=list)
    postprocess: bool = False
    output: str = "study.csv"
    threads: int = 1
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.case not in CASE_NAMES:
            raise ValueError(f"unknown case {self.case!r}")
        if not 0 <= self.k <= 5:
            raise ValueError("k must lie in [0, 5]")
        if self.r < 2:
            raise ValueError("r must be >= 2 for the mixed pair")
        if not self.levels:
            raise ValueError("need at least one mesh level")
        if any(t <= 0 for t in self.taus):
            raise ValueError("time step lengths must be positive")
        if self.threads < 1:
            raise ValueError("thread count must be >= 1")
        if not self.taus:
            self.taus = [SPACE_STUDY_DEFAULT_TAU]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpsdg",
        description="Convergence studies for the stabilized transient flow solver",
    )
    parser.add_argument("--case", choices=CASE_NAMES, default="space_dominant")
    parser.add_argument("--k", type=int, default=1, help="temporal polynomial degree")
    parser.add_argument("--r", type=int, default=2, help="spatial velocity order")
    enrich = parser.add_mutually_exclusive_group()
    enrich.add_argument("--enrich", dest="enriched", action="store_true", default=True)
    enrich.add_argument("--no-enrich", dest="enriched", action="store_false")
    parser.add_argument("--nu", type=float, default=1e-6, help="viscosity")
    parser.add_argument("--mu", type=float, default=0.1, help="stabilization weight")
    parser.add_argument("--final-time", type=float, default=1.0)
    parser.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3])
    taus = parser.add_mutually_exclusive_group()
    taus.add_argument("--tau", type=float, nargs="+", default=None)
    taus.add_argument(
        "--tau-halvings",
        type=int,
        default=None,
        metavar="N",
        help="use the sequence 0.1 * 2^-i, i = 0..N-1",
    )
    parser.add_argument("--postprocess", action="store_true")
    parser.add_argument(
        "--reuse-jacobian",
        action="store_true",
        help="cache the stage-system factorization across Newton steps and slabs "
        "(same converged tolerances, fewer factorizations)",
    )
    parser.add_argument("--output", default="study.csv")
    parser.add_argument("--threads", type=int, default=1)
    return parser


def parse_config(argv=None) -> StudyConfig:
    """Parse CLI arguments; argparse exits with code 2 on usage errors."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.tau is not None:
        taus = list(args.tau)
    elif args.tau_halvings is not None:
        if args.tau_halvings < 1:
            parser.error("--tau-halvings must be >= 1")
        taus = [0.1 * 2.0**-i for i in range(args.tau_halvings)]
    else:
        taus = []
    try:
        return StudyConfig(
            case=args.case,
            k=args.k,
            r=args.r,
            enriched=args.enriched,
            nu=args.nu,
            mu=args.mu,
            final_time=args.final_time,
            levels=list(args.levels),
            taus=taus,
            postprocess=args.postprocess,
            output=args.output,
            threads=args.threads,
            newton=NewtonConfig(reuse_jacobian=args.reuse_jacobian),
        )
    except ValueError as exc:
        parser.error(str(exc))


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.12e}"


@dataclass
class StudyRow:
    level: int
    h: float
    tau: float
    report: object

    def csv(self, config: StudyConfig) -> str:
        rep = self.report
        fields = [
            config.case,
            str(config.k),
            str(config.r),
            repr(config.nu),
            repr(config.mu),
            str(self.level),
            _fmt(self.h),
            _fmt(self.tau),
            _fmt(rep.l2l2_velocity),
            _fmt(rep.snorm),
            _fmt(rep.l2l2_pressure),
            _fmt(rep.final_velocity),
            _fmt(rep.jump),
            _fmt(rep.l2l2_velocity_postprocessed),
        ]
        return ",".join(fields)


def run_rows(config: StudyConfig):
    """Run every (level, tau) combination, yielding rows as they finish."""
    if config.threads > 1:
        try:
            import numba

            numba.set_num_threads(min(config.threads, numba.config.NUMBA_NUM_THREADS))
        except ImportError:
            pass
    case = get_case(config.case, config.nu)
    for level in config.levels:
        problem = build_problem(
            case,
            level=level,
            k=config.k,
            r=config.r,
            enriched=config.enriched,
            mu=config.mu,
            newton=config.newton,
        )
        for tau in config.taus:
            n_slabs = max(1, round(config.final_time / tau))
            partition = uniform_partition(config.final_time, n_slabs)
            trajectory = advance(problem, partition)
            pp = postprocess(trajectory) if config.postprocess else None
            report = compute_errors(problem, trajectory, pp)
            yield StudyRow(level, problem.mesh.edge_length, tau, report)


def _metadata_lines(config: StudyConfig):
    n = config.newton
    return [
        "# lpsdg convergence study",
        (
            f"# case={config.case} k={config.k} r={config.r} "
            f"enriched={int(config.enriched)} nu={config.nu!r} mu={config.mu!r} "
            f"T={config.final_time!r} postprocess={int(config.postprocess)} "
            f"threads={config.threads}"
        ),
        f"# levels={','.join(map(str, config.levels))} taus={','.join(repr(t) for t in config.taus)}",
        (
            f"# newton_rtol={n.rtol!r} newton_atol={n.atol!r} "
            f"newton_max_iter={n.max_iter} reuse_jacobian={int(n.reuse_jacobian)}"
        ),
        "# pressure errors compare mean-shifted exact pressure with the mean-zero discrete pressure",
    ]


def _eoc_text(config: StudyConfig, rows) -> str:
    """Companion text table; orders follow the axis the study refines."""
    lines = []

    def table(title, params, reports):
        values = {
            "err_L2L2_u": [r.l2l2_velocity for r in reports],
            "err_Snorm": [r.snorm for r in reports],
            "err_L2L2_p": [r.l2l2_pressure for r in reports],
            "err_final_u": [r.final_velocity for r in reports],
            "err_jump": [r.jump for r in reports],
        }
        if any(r.l2l2_velocity_postprocessed is not None for r in reports):
            values["err_L2L2_u_postproc"] = [
                r.l2l2_velocity_postprocessed for r in reports
            ]
        lines.append(title)
        header = f"{'param':>12}" + "".join(f"{name:>22} {'eoc':>6}" for name in values)
        lines.append(header)
        tables = {name: eoc(vals, params) for name, vals in values.items() if all(
            v is not None for v in vals
        )}
        for i, p in enumerate(params):
            row = f"{p:>12.6g}"
            for name in values:
                tab = tables.get(name)
                if tab is None:
                    row += f"{'':>22} {'':>6}"
                    continue
                order = tab.rows()[i][2]
                order_txt = f"{order:6.2f}" if order is not None else "     -"
                row += f"{tab.errors[i]:>22.6e} {order_txt}"
            lines.append(row)
        lines.append("")

    if len(config.taus) > 1:
        for level in sorted({row.level for row in rows}):
            group = [row for row in rows if row.level == level]
            table(
                f"temporal refinement, level {level} (orders vs tau)",
                [row.tau for row in group],
                [row.report for row in group],
            )
    if len(config.levels) > 1:
        for tau in config.taus:
            group = [row for row in rows if row.tau == tau]
            if len(group) > 1:
                table(
                    f"spatial refinement, tau {tau:.6g} (orders vs h)",
                    [row.h for row in group],
                    [row.report for row in group],
                )
    if not lines:
        lines.append("single run, no refinement axis; no orders computed")
        lines.append("")
    return "\n".join(lines) + "\n"


def run_study(config: StudyConfig) -> int:
    """Execute the study, streaming rows into the CSV; returns the exit code."""
    rows = []
    with open(config.output, "w", encoding="utf-8") as fh:
        for line in _metadata_lines(config):
            fh.write(line + "\n")
        fh.write(CSV_COLUMNS + "\n")
        fh.flush()
        try:
            for row in run_rows(config):
                rows.append(row)
                fh.write(row.csv(config) + "\n")
                fh.flush()
        except (StepFailure, SolverFailure) as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    text = _eoc_text(config, rows)
    eoc_path = config.output + ".eoc.txt" if not config.output.endswith(".csv") else (
        config.output[:-4] + ".eoc.txt"
    )
    with open(eoc_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    config = parse_config(argv)
    return run_study(config)


if __name__ == "__main__":
    sys.exit(main())
