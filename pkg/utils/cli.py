import logging
import shutil
import sys
import threading
import time
from datetime import datetime
from typing import Any, Dict, List, Optional

# colorama for plain-terminal colours
try:
    from colorama import init, Fore, Style
    init()
    HAS_COLOR = True
except ImportError:
    class _NoColor:
        def __getattr__(self, name):
            return ""

    Fore = _NoColor()
    Style = _NoColor()
    HAS_COLOR = False

# rich for panels, progress bars and tables
try:
    from rich.console import Console
    from rich.panel import Panel
    from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn, TimeRemainingColumn
    from rich.table import Table
    HAS_RICH = True
    console = Console()
except ImportError:
    HAS_RICH = False

logger = logging.getLogger("cli")

DEFAULT_VERBOSITY = 1  # 0=quiet, 1=normal, 2=verbose, 3=debug

_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO}
_NOISY_LOGGERS = ("numba", "matplotlib", "PIL")


def _width() -> int:
    return min(shutil.get_terminal_size((80, 20)).columns, 80)


class CLI:
    """Console output for the sampler harness."""

    def __init__(self, verbosity: int = DEFAULT_VERBOSITY):
        """
        Args:
            verbosity: 0 = errors only, 1 = normal, 2 = verbose (INFO logs), 3 = debug
        """
        self.verbosity = verbosity
        self.start_time = time.time()
        self.active_progress: Dict[str, Dict[str, Any]] = {}
        self.progress_lock = threading.Lock()
        self._setup_logging()

    def _setup_logging(self):
        """Route log records to stdout at the level implied by the verbosity."""
        level = _LEVELS.get(self.verbosity, logging.DEBUG)
        root_logger = logging.getLogger()
        root_logger.setLevel(level)

        for handler in root_logger.handlers[:]:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                root_logger.removeHandler(handler)

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(level)
        console_handler.setFormatter(CLIFormatter())
        root_logger.addHandler(console_handler)

        # numba's compiler logs at DEBUG
        for name in _NOISY_LOGGERS:
            logging.getLogger(name).setLevel(logging.WARNING)

    def header(self, text: str):
        if self.verbosity == 0:
            return
        title = f" {text} "
        if HAS_RICH:
            console.print(Panel(title, style="bold blue"))
        else:
            padding = max(_width() - len(title), 0)
            left = padding // 2
            print()
            print(f"{Fore.BLUE}{Style.BRIGHT}{'-' * left}{title}{'-' * (padding - left)}{Style.RESET_ALL}")
            print()

    def subheader(self, text: str):
        if self.verbosity == 0:
            return
        if HAS_RICH:
            console.print(f"[bold cyan]{text}[/bold cyan]")
        else:
            print(f"{Fore.CYAN}{Style.BRIGHT}{text}{Style.RESET_ALL}")

    def info(self, text: str):
        if self.verbosity < 1:
            return
        if HAS_RICH:
            console.print(f"[green]•[/green] {text}")
        else:
            print(f"{Fore.GREEN}•{Style.RESET_ALL} {text}")

    def warning(self, text: str):
        if self.verbosity < 1:
            return
        if HAS_RICH:
            console.print(f"[yellow]⚠[/yellow] {text}")
        else:
            print(f"{Fore.YELLOW}⚠{Style.RESET_ALL} {text}")

    def error(self, text: str):
        """Always shown, on stderr."""
        if HAS_RICH:
            Console(stderr=True).print(f"[bold red]✘[/bold red] {text}")
        else:
            print(f"{Fore.RED}{Style.BRIGHT}✘{Style.RESET_ALL} {text}", file=sys.stderr)

    def success(self, text: str):
        if self.verbosity < 1:
            return
        if HAS_RICH:
            console.print(f"[bold green]✓[/bold green] {text}")
        else:
            print(f"{Fore.GREEN}{Style.BRIGHT}✓{Style.RESET_ALL} {text}")

    def verbose(self, text: str):
        if self.verbosity < 2:
            return
        if HAS_RICH:
            console.print(f"[dim]{text}[/dim]")
        else:
            print(f"{Style.DIM}{text}{Style.RESET_ALL}")

    def debug(self, text: str):
        if self.verbosity < 3:
            return
        if HAS_RICH:
            console.print(f"[dim blue][DEBUG][/dim blue] {text}")
        else:
            print(f"{Style.DIM}{Fore.BLUE}[DEBUG]{Style.RESET_ALL} {text}")

    def divider(self):
        if self.verbosity == 0:
            return
        if HAS_RICH:
            console.print(f"[dim]{'-' * _width()}[/dim]")
        else:
            print(f"{Style.DIM}{'-' * _width()}{Style.RESET_ALL}")

    # --- progress ---

    def start_progress(self, task_id: str, description: str, total: Optional[int] = None):
        """Start a progress bar (spinner when ``total`` is unknown)."""
        if self.verbosity == 0:
            return
        with self.progress_lock:
            if HAS_RICH:
                columns = [SpinnerColumn(), TextColumn("[bold blue]{task.description}")]
                if total is not None:
                    columns += [BarColumn(complete_style="green"),
                                TextColumn("[cyan]{task.completed}/{task.total}"),
                                TimeRemainingColumn()]
                columns.append(TimeElapsedColumn())
                progress = Progress(*columns, transient=False)
                task = progress.add_task(description, total=total)
                self.active_progress[task_id] = {"progress": progress, "task": task}
                progress.start()
            else:
                self.active_progress[task_id] = {"total": total, "last": 0}
                print(f"{Fore.BLUE}→ {description}...{Style.RESET_ALL}")

    def update_progress(self, task_id: str, advance: int = 1, completed: Optional[int] = None,
                        message: Optional[str] = None):
        if self.verbosity == 0 or task_id not in self.active_progress:
            return
        with self.progress_lock:
            data = self.active_progress[task_id]
            if HAS_RICH:
                if message:
                    data["progress"].console.print(f"  {message}")
                if completed is not None:
                    data["progress"].update(data["task"], completed=completed)
                else:
                    data["progress"].update(data["task"], advance=advance)
            elif message and self.verbosity >= 2:
                print(f"  {Fore.CYAN}→{Style.RESET_ALL} {message}")

    def stop_progress(self, task_id: str, success: bool = True, message: Optional[str] = None):
        if self.verbosity == 0 or task_id not in self.active_progress:
            return
        with self.progress_lock:
            data = self.active_progress.pop(task_id)
            if HAS_RICH:
                data["progress"].stop()
        if message:
            (self.success if success else self.error)(message)

    # --- tables ---

    def display_results_table(self, headers: List[str], rows: List[List[Any]], title: Optional[str] = None):
        if self.verbosity == 0:
            return
        cells = [[_fmt(c) for c in row] for row in rows]
        if HAS_RICH:
            table = Table(title=title)
            for h in headers:
                table.add_column(h, justify="right" if h not in ("sampler", "parameter", "file") else "left")
            for row in cells:
                table.add_row(*row)
            console.print(table)
            return

        if title:
            print(f"\n{Style.BRIGHT}{title}{Style.RESET_ALL}")
        widths = [len(h) for h in headers]
        for row in cells:
            for i, c in enumerate(row):
                widths[i] = max(widths[i], len(c))
        header_row = " | ".join(f"{h:{w}s}" for h, w in zip(headers, widths))
        print(f"\n{Style.BRIGHT}{header_row}{Style.RESET_ALL}")
        print("-" * len(header_row))
        for row in cells:
            print(" | ".join(f"{c:{w}s}" for c, w in zip(row, widths)))
        print()

    def display_run_summary(self, title: str, duration: Optional[float] = None,
                            details: Optional[Dict[str, Any]] = None, outputs: Optional[List[str]] = None):
        """Closing panel of a sub-command: key facts and the files written."""
        if self.verbosity == 0:
            return
        if duration is None:
            duration = time.time() - self.start_time
        lines = [f"Duration: {_duration(duration)}"]
        for key, value in (details or {}).items():
            lines.append(f"{key}: {_fmt(value)}")
        if outputs:
            lines.append("\nFiles written:")
            lines += [f"• {path}" for path in outputs]
        text = "\n".join(lines)
        if HAS_RICH:
            console.print(Panel(text, title=f"[bold green]{title}[/bold green]", border_style="green"))
        else:
            self.divider()
            print(f"{Fore.GREEN}{Style.BRIGHT}{title}{Style.RESET_ALL}\n\n{text}\n")
            self.divider()


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def _duration(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f} seconds"
    if seconds < 3600:
        return f"{int(seconds // 60)} min {int(seconds % 60)} sec"
    return f"{int(seconds // 3600)} hr {int((seconds % 3600) // 60)} min"


class CLIFormatter(logging.Formatter):
    """Compact, coloured log lines for the console."""

    def __init__(self):
        super().__init__("%(message)s")
        self.level_colors = {
            logging.DEBUG: Fore.BLUE + Style.DIM,
            logging.INFO: Fore.GREEN,
            logging.WARNING: Fore.YELLOW,
            logging.ERROR: Fore.RED,
            logging.CRITICAL: Fore.RED + Style.BRIGHT,
        }

    def format(self, record):
        message = super().format(record)
        timestamp = datetime.now().strftime("%H:%M:%S")
        if not HAS_COLOR:
            return f"{timestamp} - {record.levelname.lower()}: {message}"
        reset = Style.RESET_ALL
        if record.levelno == logging.DEBUG:
            return f"{Style.DIM}{timestamp} - DEBUG:{reset} {message}"
        if record.levelno == logging.INFO:
            module = record.name.split('.')[-1]
            return f"{timestamp} - {Fore.CYAN}{module}{reset}: {message}"
        return f"{self.level_colors.get(record.levelno, '')}{timestamp} - {record.levelname}{reset}: {message}"


cli = CLI(DEFAULT_VERBOSITY)


def set_verbosity(level: int) -> CLI:
    """Replace the global CLI with one at ``level`` and return it."""
    global cli
    cli = CLI(level)
    return cli
