"""
MEC Offload - решатель совместной выгрузки вычислений и распределения ресурсов
в гетерогенных сетях с MEC серверами, с базовыми схемами и экспериментами
"""
import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import config
from src.channel_scenario import ConfigError, ScenarioConfig, export_scenario_csv, generate
from src.database import db
from src.exp_harness import (
    REFERENCE_EXPERIMENTS,
    SCHEME_RUNNERS,
    SweepSpec,
    default_expectations,
    emit_csv,
    parse_csv,
    reference_sweep,
    run_sweep,
    trend_check,
)
from src.jcorams_solver import SolverParams, write_solution_csv, write_summary_csv
from src.report import formatter


FILE_LOG_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)-7s [%(threadName)s] %(name)s: %(message)s"
CONSOLE_LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"


def setup_logging():
    """
    Настроить логирование: подробный файл и краткая консоль

    В файл пишется имя потока, чтобы различать воркеры sweep.
    """
    log_file = Path(config.BASE_DIR / config.LOG_FILE)
    log_file.parent.mkdir(parents=True, exist_ok=True)

    root = logging.getLogger()
    root.setLevel(config.LOG_LEVEL)

    file_handler = logging.FileHandler(log_file, encoding="utf-8")
    file_handler.setFormatter(logging.Formatter(FILE_LOG_FORMAT, "%Y-%m-%d %H:%M:%S"))

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(logging.Formatter(CONSOLE_LOG_FORMAT, "%H:%M:%S"))

    for handler in (file_handler, console_handler):
        handler.setLevel(config.LOG_LEVEL)
        root.addHandler(handler)
    return root


logger = setup_logging()


def init_database_with_health_check() -> bool:
    """
    Инициализировать БД истории запусков с проверкой здоровья

    Returns:
        bool: True если БД готова к работе (healthy или degraded)
    """
    if not db.init_db():
        logger.error("❌ Не удалось инициализировать базу данных")
        return False

    health = db.health_check()
    if health['status'] == 'healthy':
        return True
    elif health['status'] == 'degraded':
        logger.warning(f"⚠️ БД в деградированном состоянии: {health['details']}")
        return True
    else:
        logger.error(f"❌ БД нездорова и не может использоваться: {health['details']}")
        return False


def parse_schemes(raw: Optional[str], default=config.DEFAULT_SCHEMES) -> tuple:
    if not raw:
        return tuple(default)
    schemes = tuple(s.strip().lower() for s in raw.split(",") if s.strip())
    unknown = [s for s in schemes if s not in SCHEME_RUNNERS]
    if unknown:
        raise ConfigError(f"Неизвестные схемы: {', '.join(unknown)} (допустимо: {', '.join(config.SCHEMES)})")
    return schemes


def load_scenario_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_file(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def build_sweep_specs(args) -> List[SweepSpec]:
    """SweepSpec из файла (--config) или из эталонных экспериментов (--experiment)"""
    if args.config:
        specs = [SweepSpec.from_file(args.config)]
    else:
        names = list(REFERENCE_EXPERIMENTS) if args.experiment == "all" else [args.experiment]
        specs = [reference_sweep(name) for name in names]

    result = []
    for spec in specs:
        if args.realizations is not None:
            realizations = args.realizations
        elif args.paper_mode:
            realizations = config.FULL_REALIZATIONS
        elif args.config:
            realizations = spec.realizations
        else:
            realizations = config.DEFAULT_REALIZATIONS
        base = replace(spec.base, seed=args.seed) if args.seed is not None else spec.base
        result.append(replace(
            spec,
            base=base,
            realizations=realizations,
            schemes=parse_schemes(args.schemes, spec.schemes),
            interference_free=args.interference_free_scoring,
        ))
    return result


def handle_run(args) -> int:
    """Решить один сценарий всеми выбранными схемами"""
    cfg = load_scenario_config(args)
    scn = generate(cfg)
    params = SolverParams(interference_free=args.interference_free_scoring)
    schemes = parse_schemes(args.schemes)

    solutions = []
    for scheme in schemes:
        started = time.perf_counter()
        solutions.append(SCHEME_RUNNERS[scheme](scn, params))
        logger.info(f"✅ {scheme}: Z={solutions[-1].total_overhead:.6g} "
                    f"за {time.perf_counter() - started:.2f} с")

    print(formatter.format_run(solutions, seed=cfg.seed))

    if args.out_dir:
        out_dir = Path(args.out_dir)
        write_summary_csv([s.summary_row(cfg.seed) for s in solutions], out_dir / "summary.csv")
        for sol in solutions:
            write_solution_csv(scn, sol, out_dir / f"solution_{sol.scheme}.csv")
        logger.info(f"📊 Решения записаны в {out_dir}")
    return 0


def run_specs(args, specs: List[SweepSpec]):
    """Выполнить sweep'ы, записать CSV и историю; вернуть [(spec, rows)]"""
    out_dir = Path(args.out_dir or config.RESULTS_DIR)
    use_db = not args.no_db and init_database_with_health_check()
    if not args.no_db and not use_db:
        logger.warning("⚠️ История запусков не будет сохранена")

    results = []
    for spec in specs:
        started = time.perf_counter()
        rows = run_sweep(spec)
        wall = time.perf_counter() - started
        csv_path = emit_csv(rows, out_dir / f"sweep_{spec.axis}.csv", timing=args.timing)
        if use_db:
            db.save_sweep(spec, rows, csv_path, wall, paper_mode=args.paper_mode)
        results.append((spec, rows))
    return results


def handle_sweep(args) -> int:
    """Выполнить sweep и записать CSV по каждой оси"""
    for spec, rows in run_specs(args, build_sweep_specs(args)):
        print(formatter.format_rows(rows))
        print()
    return 0


def handle_check(args) -> int:
    """Проверить качественные тренды на свежем sweep или на готовом CSV"""
    if args.csv:
        rows = parse_csv(args.csv)
        if not rows:
            logger.error(f"❌ CSV пуст: {args.csv}")
            return 1
        batches = [(rows[0].axis, sorted({r.scheme for r in rows}), rows, ScenarioConfig())]
    else:
        batches = [(spec.axis, spec.schemes, rows, spec.base)
                   for spec, rows in run_specs(args, build_sweep_specs(args))]

    all_passed = True
    for axis, schemes, rows, base in batches:
        report = trend_check(rows, default_expectations(axis, schemes, base))
        print(formatter.format_trend_report(report, title=axis))
        print()
        all_passed = all_passed and report.passed
    return 0 if all_passed else 1


def handle_history(args) -> int:
    """Показать последние запуски sweep"""
    if not init_database_with_health_check():
        return 1
    print(formatter.format_history(db.get_recent_runs(limit=args.number)))
    return 0


def handle_export_scenario(args) -> int:
    """Выгрузить сгенерированный сценарий в CSV"""
    cfg = load_scenario_config(args)
    paths = export_scenario_csv(generate(cfg), Path(args.out_dir or config.RESULTS_DIR) / f"scenario_{cfg.seed}")
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="MEC Offload - совместная выгрузка вычислений и распределение ресурсов",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:
  # Один сценарий
  %(prog)s run --seed 7                                # Все схемы по умолчанию
  %(prog)s run --config scenario.env --schemes jcorams,hjtora --out-dir out/

  # Эксперименты
  %(prog)s sweep --experiment users                    # N = 10..50, шаг 4
  %(prog)s sweep --experiment all --paper-mode         # Шесть экспериментов, 100 реализаций
  %(prog)s sweep --config sweep.env --no-db            # Sweep из файла

  # Проверка трендов
  %(prog)s check --experiment power                    # Насыщение по p_max
  %(prog)s check --csv results/sweep_N.csv             # Проверить готовый CSV

  # Прочее
  %(prog)s history -n 5                                # Последние запуски
  %(prog)s export-scenario --seed 7 --out-dir out/     # Сценарий в CSV
        """
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, metavar="FILE",
                        help="Файл KEY=VALUE со сценарием (run, export-scenario) или sweep (sweep, check)")
    common.add_argument("--seed", type=int, help="Базовый seed")
    common.add_argument("--schemes", type=str,
                        help=f"Схемы через запятую (допустимо: {', '.join(config.SCHEMES)})")
    common.add_argument("--out-dir", type=str, help=f"Каталог результатов (по умолчанию: {config.RESULTS_DIR})")
    common.add_argument("--interference-free-scoring", action="store_true",
                        help="Считать итоговое Z без межсотовой помехи")

    sweep_common = argparse.ArgumentParser(add_help=False)
    sweep_common.add_argument("--experiment", type=str, default="users",
                              choices=list(REFERENCE_EXPERIMENTS) + ["all"],
                              help="Эталонный эксперимент (если не задан --config)")
    sweep_common.add_argument("--realizations", type=int,
                              help=f"Реализаций на точку (по умолчанию: {config.DEFAULT_REALIZATIONS})")
    sweep_common.add_argument("--paper-mode", action="store_true",
                              help=f"{config.FULL_REALIZATIONS} реализаций на точку")
    sweep_common.add_argument("--timing", action="store_true",
                              help="Добавить в CSV среднее время выполнения")
    sweep_common.add_argument("--no-db", action="store_true", help="Не сохранять историю в БД")

    subparsers.add_parser("run", parents=[common], help="Решить один сценарий")
    subparsers.add_parser("sweep", parents=[common, sweep_common], help="Выполнить sweep")
    check = subparsers.add_parser("check", parents=[common, sweep_common], help="Проверить тренды")
    check.add_argument("--csv", type=str, metavar="FILE", help="Проверить готовый CSV вместо нового sweep")
    history = subparsers.add_parser("history", help="Показать последние запуски sweep")
    history.add_argument("-n", "--number", type=int, default=10,
                         help="Количество записей для отображения (по умолчанию: 10)")
    subparsers.add_parser("export-scenario", parents=[common], help="Выгрузить сценарий в CSV")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Главная функция"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            return handle_run(args)
        elif args.command == "sweep":
            return handle_sweep(args)
        elif args.command == "check":
            return handle_check(args)
        elif args.command == "history":
            return handle_history(args)
        elif args.command == "export-scenario":
            return handle_export_scenario(args)
        parser.error(f"Неизвестная команда: {args.command}")
    except ConfigError as e:
        logger.error(f"❌ Ошибка конфигурации: {e}")
        return 1
    except Exception as e:
        logger.error(f"❌ Ошибка выполнения {args.command}: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
