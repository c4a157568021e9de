"""
Модуль текстовых отчётов для CLI
"""
import logging
from typing import List, Optional, Sequence

from src.exp_harness import ResultRow, TrendReport
from src.jcorams_solver import Solution

logger = logging.getLogger(__name__)


class ReportFormatter:
    """Форматирование результатов для вывода в консоль"""

    SCHEME_TITLES = {
        'jcorams': 'JCORAMS',
        'local': 'Local only',
        'offload': 'Offloading only',
        'hoda': 'HODA',
        'hjtora': 'hJTORA',
    }

    def format_run(self, solutions: Sequence[Solution], seed: Optional[int] = None) -> str:
        """
        Сводка решения одного сценария разными схемами

        Args:
            solutions: решения (по одному на схему)
            seed: seed сценария

        Returns:
            Форматированный текст
        """
        if not solutions:
            return "📭 Нет решений"

        N, M, S = solutions[0].assignment.shape
        lines = [
            f"📊 Сценарий: N={N}, M={M}, S={S}" + (f", seed={seed}" if seed is not None else ""),
            "=" * 80,
            f"{'Схема':<18}{'Выгружают':>12}{'Доля':>10}{'Z':>14}{'Итераций':>12}  Стабильность",
            "-" * 80,
        ]
        for sol in solutions:
            lines.append(
                f"{self.SCHEME_TITLES.get(sol.scheme, sol.scheme):<18}"
                f"{sol.offloader_count:>12}"
                f"{sol.offload_ratio:>10.1%}"
                f"{sol.total_overhead:>14.6g}"
                f"{sol.iterations:>12}  "
                f"{self.format_stability(sol)}"
            )
        return "\n".join(lines)

    def format_stability(self, solution: Solution) -> str:
        """Вердикт проверки блокирующих пар (только для схем с matching)"""
        diag = solution.diagnostics
        if not diag:
            return "-"
        assoc = diag.get('association_blocking_pair')
        subch = diag.get('subchannel_blocking_pair')
        moves = diag.get('polish_moves') or 0
        suffix = f" (доводка: {moves})" if moves else ""
        if assoc is None and subch is None:
            return "✅ стабильно" + suffix
        parts = []
        if assoc is not None:
            parts.append(f"ассоциация {assoc}")
        if subch is not None:
            parts.append(f"подканал {subch}")
        return "❌ блокирующая пара: " + ", ".join(parts) + suffix

    def format_rows(self, rows: Sequence[ResultRow]) -> str:
        """Таблица результатов sweep"""
        if not rows:
            return "📭 Нет строк"
        lines = [
            f"{'Схема':<12}{rows[0].axis:>12}{'Доля':>10}{'±':>8}{'Z':>12}{'±':>10}{'Итер.':>8}",
            "-" * 72,
        ]
        for row in rows:
            lines.append(
                f"{row.scheme:<12}{row.axis_value:>12.6g}{row.offload_pct_mean:>10.1%}"
                f"{row.offload_pct_std:>8.1%}{row.overhead_mean:>12.6g}{row.overhead_std:>10.3g}"
                f"{row.iterations_mean:>8.2f}"
            )
        return "\n".join(lines)

    def format_trend_report(self, report: TrendReport, title: str = "") -> str:
        """Отчёт о проверке трендов"""
        lines: List[str] = [f"🔍 Проверка трендов{': ' + title if title else ''}", "=" * 80]
        if not report.results:
            lines.append("ℹ️ Нет ожиданий для проверки")
            return "\n".join(lines)
        for exp, ok, message in report.results:
            icon = "✅" if ok else "❌"
            lines.append(f"{icon} {exp.describe()}: {message}")
        lines.append("-" * 80)
        passed = sum(1 for _, ok, _ in report.results if ok)
        lines.append(f"Итого: {passed}/{len(report.results)} выполнено")
        return "\n".join(lines)

    def format_history(self, runs: Sequence) -> str:
        """
        Список последних запусков sweep

        Args:
            runs: объекты SweepRun
        """
        if not runs:
            return "📭 Запусков пока нет"
        lines = [f"📋 Последние запуски ({len(runs)}):", "=" * 80]
        for run in runs:
            timestamp = run.created_at.strftime("%Y-%m-%d %H:%M:%S") if run.created_at else "N/A"
            mode = " [full]" if run.paper_mode else ""
            wall = f", {run.wall_seconds:.1f} с" if run.wall_seconds is not None else ""
            lines.extend([
                f"#{run.id} {timestamp}{mode}",
                f"   Ось: {run.axis} = {run.values_text}",
                f"   Реализаций: {run.realizations}, seed: {run.base_seed}{wall}",
                f"   Схемы: {run.schemes}",
                f"   CSV: {run.csv_path or 'N/A'}",
                "",
            ])
        return "\n".join(lines)


# Глобальный экземпляр форматтера
formatter = ReportFormatter()
