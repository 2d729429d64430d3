"""
命令实现模块：verify、codesign、simulate、compare。

每个命令读取场景与选项，把结果写入输出目录并返回退出码：
0 表示成功（verify 还要求全部安全条件满足），1 表示存在不满足的安全条件。
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sddc.analysis.lyapunov import MlfCertificate, safety_threshold
from sddc.analysis.safety import (
    ASAS,
    ASE,
    ase_envelope,
    check_ase,
    check_asas,
    check_psp,
    corollary_consistency,
)
from sddc.cli.scenario import Scenario, load_policy
from sddc.cli.writers import dumps, write_csv, write_json
from sddc.config import SddcConfig
from sddc.exceptions import SchemaError, SolverError
from sddc.model.mdp import (
    JointPolicy,
    PowerConditioning,
    initial_joint_distribution,
    joint_chain,
    stationary_distribution,
)
from sddc.optimization.codesign import build_lp, build_qp, solve_codesign
from sddc.optimization.programs import dump_program
from sddc.optimization.separation import (
    DOMINANCE_TOL,
    baseline_conditioning,
    baseline_safety,
    dominance_gap,
    separation_baseline,
)
from sddc.optimization.sweep import reference_grid, sweep
from sddc.simulation.montecarlo import ScenarioRun, empirical_vs_envelope, run_paths

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_ERROR = 2


@dataclass
class CommandOptions:
    """命令行选项

    属性说明：
        out_dir (Path): 输出目录
        seed (Optional[int]): 覆盖场景中的蒙特卡洛种子
        eta (Optional[float]): 覆盖场景中的收敛率
        lambda_weight (Optional[float]): 覆盖场景中的 λ
        method (str): "lp" 或 "qp"
        sweep (Dict[str, List[float]]): 扫描网格，键为 eta、theta、lambda
        cell (Tuple[str, str]): θ 扫描的 (状态, 功率等级)
        dump_lp (Optional[Path]): 线性规划导出路径
        dump_qp (Optional[Path]): 二次约束规划导出路径
        policy (Optional[Path]): 策略文件
        envelope (bool): simulate 是否附加理论包络
        plot (Optional[str]): 图形格式（pdf 或 png），None 表示不绘图
        conditioning (Optional[PowerConditioning]): 覆盖场景中的功率条件变量
        reference_grid (bool): compare 是否运行完整对比表
        config (SddcConfig): 求解器与运行时配置
    """
    out_dir: Path = Path("out")
    seed: Optional[int] = None
    eta: Optional[float] = None
    lambda_weight: Optional[float] = None
    method: str = "lp"
    sweep: Dict[str, List[float]] = field(default_factory=dict)
    cell: Tuple[str, str] = ("s1", "L")
    dump_lp: Optional[Path] = None
    dump_qp: Optional[Path] = None
    policy: Optional[Path] = None
    envelope: bool = False
    plot: Optional[str] = None
    conditioning: Optional[PowerConditioning] = None
    reference_grid: bool = False
    config: SddcConfig = field(default_factory=SddcConfig)

    @property
    def threads(self) -> int:
        return self.config.runtime.threads


def _emit(data: Dict[str, Any], path: Path) -> None:
    """写出JSON并在标准输出打印同样的内容"""
    write_json(data, path)
    print(dumps(data), end="")


def _eta(scenario: Scenario, options: CommandOptions) -> Optional[float]:
    return options.eta if options.eta is not None else scenario.safety.eta


def _lambda(scenario: Scenario, options: CommandOptions) -> float:
    return options.lambda_weight if options.lambda_weight is not None else scenario.lambda_weight


def _conditioning(scenario: Scenario, options: CommandOptions) -> PowerConditioning:
    return options.conditioning or scenario.safety.conditioning


def _policy(scenario: Scenario, options: CommandOptions) -> JointPolicy:
    if options.policy is not None:
        return load_policy(options.policy, scenario.mdp, scenario.channel)
    if scenario.policy is None:
        raise SchemaError("该命令需要策略：在场景中给出 policy 或使用 --policy", path="$.policy")
    return scenario.policy


def _certificate(scenario: Scenario) -> Tuple[MlfCertificate, Dict[str, Any]]:
    cert, comparison = scenario.resolve_certificate()
    info = {"certificate": {**cert.to_mapping(), "source": cert.source}}
    if comparison is not None:
        info["reference_comparison"] = comparison
    return cert, info


def cmd_verify(scenario: Scenario, options: CommandOptions) -> int:
    """验证证书并检查场景要求的安全条件

    Returns:
        int: 全部条件满足时为0，否则为1
    """
    cert, info = _certificate(scenario)
    eta = _eta(scenario, options)
    conditioning = _conditioning(scenario, options)
    policy = _policy(scenario, options)
    mdp, channel = scenario.mdp, scenario.channel
    reports = []
    for kind in scenario.safety.kinds:
        if kind == ASE:
            pi_bar = stationary_distribution(joint_chain(mdp, channel, policy, conditioning),
                                             config=options.config.chain)
            report = check_ase(channel.theta_vector(), pi_bar, cert, eta)
        elif kind == ASAS:
            report = check_asas(mdp, channel, policy, cert, eta, conditioning)
        else:
            report = check_psp(mdp, channel, policy, cert, eta, scenario.safety.delta,
                               scenario.safety.epsilon, scenario.plant.disturbance_bound, conditioning)
        reports.append(report)
    satisfied = all(r.satisfied for r in reports)
    result = {
        "command": "verify",
        "scenario": scenario.name,
        **info,
        "threshold": safety_threshold(cert, eta),
        "eta": eta,
        "reports": [r.to_dict() for r in reports],
        "satisfied": satisfied,
        "asas_implies_ase": corollary_consistency(mdp, channel, policy, cert, eta, conditioning),
    }
    _emit(result, options.out_dir / "verify.json")
    return EXIT_OK if satisfied else EXIT_UNSATISFIED


def cmd_codesign(scenario: Scenario, options: CommandOptions) -> int:
    """求解协同设计；给出扫描网格时输出扫描CSV"""
    cert, info = _certificate(scenario)
    mdp, channel = scenario.mdp, scenario.channel
    eta, lam = _eta(scenario, options), _lambda(scenario, options)
    solver = options.config.solver

    if options.dump_lp is not None:
        dump_program(build_lp(mdp, channel, cert, lam, eta, slack=solver.strict_slack), options.dump_lp)
    if options.dump_qp is not None:
        dump_program(build_qp(mdp, channel, cert, lam, eta, solver.strict_slack), options.dump_qp)

    if options.sweep:
        frame = sweep(
            mdp, channel, cert,
            etas=options.sweep.get("eta", [eta]),
            thetas=options.sweep.get("theta"),
            cell=options.cell,
            lambdas=options.sweep.get("lambda", [lam]),
            method=options.method,
            conditioning=_conditioning(scenario, options),
            config=solver,
            threads=options.threads,
        )
        path = write_csv(frame, options.out_dir / "sweep.csv")
        if options.plot:
            _plot_sweep(frame, options)
        print(path)
        return EXIT_OK

    seeds = []
    if options.method == "qp":
        conditioning = baseline_conditioning(options.method, _conditioning(scenario, options))
        sep = separation_baseline(mdp, channel, cert, lam, eta, baseline_safety(options.method), conditioning,
                                  solver)
        seeds = [sep.policy] if sep.feasible else []
    result = solve_codesign(mdp, channel, cert, lam, eta, options.method, solver, threads=options.threads,
                            seeds=seeds)
    _emit({"command": "codesign", "scenario": scenario.name, **info, **result.to_dict(mdp, channel)},
          options.out_dir / "codesign.json")
    return EXIT_OK


def cmd_simulate(scenario: Scenario, options: CommandOptions) -> int:
    """蒙特卡洛仿真，输出逐步统计CSV与汇总JSON"""
    cert, info = _certificate(scenario)
    policy = _policy(scenario, options)
    mc = scenario.montecarlo
    conditioning = _conditioning(scenario, options)
    run = ScenarioRun(
        seed=options.seed if options.seed is not None else mc.seed,
        horizon=mc.horizon,
        paths=mc.paths,
        x0_scale=mc.x0_scale,
        x0=mc.x0,
        s0=mc.s0,
        conditioning=conditioning,
        lyapunov_matrix=cert.P1,
        burn_in=mc.burn_in,
        lambda_weight=_lambda(scenario, options),
        threads=options.threads,
    )
    stats = run_paths(run, scenario.mdp, scenario.channel, policy, scenario.plant)

    envelope = None
    summary = {"command": "simulate", "scenario": scenario.name, **info, **stats.summary()}
    if options.envelope:
        envelope = _envelope(scenario, cert, policy, run, conditioning)
        summary["envelope"] = empirical_vs_envelope(stats, envelope, "V").to_dict()
    frame = stats.to_frame(envelope)
    write_csv(frame, options.out_dir / "simulate.csv")
    if options.plot:
        _plot_trajectory(frame, options)
    _emit(summary, options.out_dir / "simulate.json")
    return EXIT_OK


def cmd_compare(scenario: Scenario, options: CommandOptions) -> int:
    """协同设计与分离设计对比；--reference-grid 时运行完整对比表"""
    cert, info = _certificate(scenario)
    mdp, channel = scenario.mdp, scenario.channel
    solver = options.config.solver

    if options.reference_grid:
        report = reference_grid(mdp, channel, cert, method=options.method, config=solver,
                                     threads=options.threads)
        frame = report.frame()
        write_csv(frame, options.out_dir / "reference_grid.csv")
        if options.plot:
            _plot_sweep(report.best.frame, options)
        _emit({"command": "compare", "scenario": scenario.name, **info, "reference_grid": report.to_dict()},
              options.out_dir / "reference_grid.json")
        return EXIT_OK

    eta, lam = _eta(scenario, options), _lambda(scenario, options)
    conditioning = baseline_conditioning(options.method, _conditioning(scenario, options))
    sep = separation_baseline(mdp, channel, cert, lam, eta, baseline_safety(options.method), conditioning, solver)
    co = solve_codesign(mdp, channel, cert, lam, eta, options.method, solver, threads=options.threads,
                        seeds=[sep.policy] if sep.feasible else [])
    gap = dominance_gap(co, sep)
    if gap is not None and gap < -DOMINANCE_TOL:
        raise SolverError("co-design cost exceeds the separation baseline", gap=gap,
                          codesign=co.optimal_cost, separation=sep.optimal_cost, method=options.method)
    _emit({
        "command": "compare",
        "scenario": scenario.name,
        **info,
        "codesign": co.to_dict(mdp, channel),
        "separation": sep.to_dict(mdp, channel),
        "conditioning": conditioning.value,
        "gap": gap,
    }, options.out_dir / "compare.json")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "codesign": cmd_codesign,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def _envelope(scenario: Scenario, cert: MlfCertificate, policy: JointPolicy, run: ScenarioRun,
              conditioning: PowerConditioning) -> np.ndarray:
    mdp = scenario.mdp
    s0 = None
    if run.s0 is not None:
        s0 = np.zeros(mdp.n_states)
        s0[mdp.state_index(run.s0)] = 1.0
    xi0 = initial_joint_distribution(policy, s0)
    x0_bound = float(np.max(np.abs(run.x0))) if run.x0 is not None else run.x0_scale
    chain = joint_chain(mdp, scenario.channel, policy, conditioning)
    return ase_envelope(cert, scenario.channel.theta_vector(), xi0, run.horizon, x0_bound, chain)


def _plot_trajectory(frame, options: CommandOptions) -> None:
    from static_plot.trajectory_plot.trajectory_plotter import TrajectoryPlotter

    with TrajectoryPlotter(frame) as plotter:
        plotter.plot()
        plotter.save(options.out_dir / f"simulate.{options.plot}")


def _plot_sweep(frame, options: CommandOptions) -> None:
    from static_plot.sweep_plot.sweep_plotter import SweepPlotter

    axis = "theta" if frame["theta"].nunique() > 1 and frame["eta"].nunique() == 1 else "eta"
    with SweepPlotter(frame, x=axis) as plotter:
        plotter.plot()
        plotter.save(options.out_dir / f"sweep.{options.plot}")


def parse_sweep(items: Sequence[str]) -> Dict[str, List[float]]:
    """解析 KEY=V1,V2,... 或 KEY=START:STOP:STEP 形式的扫描网格

    Raises:
        SchemaError: 键未知或取值无法解析时抛出
    """
    grid: Dict[str, List[float]] = {}
    for item in items:
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in ("eta", "theta", "lambda") or not raw:
            raise SchemaError("扫描参数必须为 eta=…、theta=… 或 lambda=…", path="--sweep", actual=item)
        try:
            if ":" in raw:
                start, stop, step = (float(v) for v in raw.split(":"))
                count = int(round((stop - start) / step)) + 1
                values = [round(start + i * step, 12) for i in range(count)]
            else:
                values = [float(v) for v in raw.split(",")]
        except ValueError as exc:
            raise SchemaError("扫描取值无法解析", path="--sweep", actual=item) from exc
        grid[key] = values
    return grid
