"""
命令行入口。

用法：
    python -m sddc verify scenarios/dc_motor_tables.json
    python -m sddc codesign scenarios/dc_motor_tables.json --method qp --eta 0.7
    python -m sddc codesign scenarios/dc_motor_tables.json --sweep eta=0.4:0.9:0.1
    python -m sddc simulate scenarios/dc_motor_tables.json --seed 7 --envelope --plot pdf
    python -m sddc compare scenarios/dc_motor_tables.json --reference-grid

退出码：0 成功，1 存在不满足的安全条件，2 场景或参数错误（标准错误输出JSON错误对象）。
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from sddc.cli.commands import COMMANDS, EXIT_ERROR, CommandOptions, parse_sweep
from sddc.cli.scenario import load_scenario
from sddc.config import SddcConfig
from sddc.exceptions import SchemaError, SddcError, error_payload
from sddc.model.mdp import PowerConditioning

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sddc",
        description="状态相关丢包信道下网络化控制系统的安全验证、协同设计与蒙特卡洛仿真",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="要执行的命令")
    parser.add_argument("scenario", type=Path, help="场景JSON文件")
    parser.add_argument("--seed", type=int, help="覆盖场景中的蒙特卡洛种子")
    parser.add_argument("--eta", type=float, help="收敛率 η")
    parser.add_argument("--lambda", dest="lambda_weight", type=float, help="功率代价权重 λ")
    parser.add_argument("--method", choices=("lp", "qp"), default="lp", help="协同设计方法")
    parser.add_argument("--sweep", action="append", default=[], metavar="KEY=VALUES",
                        help="扫描网格，例如 eta=0.4:0.9:0.1 或 theta=0.65,0.75（可重复）")
    parser.add_argument("--cell", default="s1,L", help="θ 扫描的单元 '状态,功率等级'")
    parser.add_argument("--out-dir", type=Path, default=Path("out"), help="输出目录")
    parser.add_argument("--dump-lp", nargs="?", const="", help="导出线性规划")
    parser.add_argument("--dump-qp", nargs="?", const="", help="导出二次约束规划")
    parser.add_argument("--policy", type=Path, help="策略文件（协同设计结果或策略表）")
    parser.add_argument("--envelope", action="store_true", help="simulate 附加理论包络列")
    parser.add_argument("--plot", choices=("pdf", "png"), help="输出静态图形")
    parser.add_argument("--conditioning", choices=[c.value for c in PowerConditioning],
                        help="功率策略的条件变量")
    parser.add_argument("--reference-grid", action="store_true", help="compare 运行完整对比表")
    parser.add_argument("--threads", type=int, help="工作线程数（缺省读取 SDDC_THREADS）")
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="日志级别")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """命令行主函数

    Returns:
        int: 退出码
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = SddcConfig()
        if args.threads is not None:
            config.update({"runtime.threads": args.threads})
        cell = tuple(part.strip() for part in args.cell.split(","))
        if len(cell) != 2:
            raise SchemaError("必须是 '状态,功率等级'", path="--cell", actual=args.cell)
        options = CommandOptions(
            out_dir=args.out_dir,
            seed=args.seed,
            eta=args.eta,
            lambda_weight=args.lambda_weight,
            method=args.method,
            sweep=parse_sweep(args.sweep),
            cell=cell,
            dump_lp=_dump_path(args.out_dir, args.dump_lp, "lp.json"),
            dump_qp=_dump_path(args.out_dir, args.dump_qp, "qp.json"),
            policy=args.policy,
            envelope=args.envelope,
            plot=args.plot,
            conditioning=PowerConditioning(args.conditioning) if args.conditioning else None,
            reference_grid=args.reference_grid,
            config=config,
        )
        scenario = load_scenario(args.scenario)
        return COMMANDS[args.command](scenario, options)
    except SddcError as exc:
        print(json.dumps(error_payload(exc), ensure_ascii=False, sort_keys=True), file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        payload = error_payload(exc, str(exc.filename) if exc.filename else None)
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True), file=sys.stderr)
        return EXIT_ERROR


def _dump_path(out_dir: Path, value: Optional[str], default: str) -> Optional[Path]:
    # 只给出开关时写到输出目录下的默认文件名
    if value is None:
        return None
    return Path(value) if value else out_dir / default


if __name__ == "__main__":
    sys.exit(main())
