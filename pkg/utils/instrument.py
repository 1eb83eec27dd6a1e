import functools
import logging
import time
from typing import Any, Callable, Optional

logger = logging.getLogger(__name__)


def _describe(value: Any) -> str:
    """Short, log-friendly rendering of an argument (arrays by shape, not content)."""
    shape = getattr(value, "shape", None)
    if shape is not None:
        return f"<{type(value).__name__} shape={tuple(shape)}>"
    text = repr(value)
    return text if len(text) <= 60 else text[:57] + "..."


def timed_operation(_func: Optional[Callable] = None, *, level: int = logging.INFO) -> Callable:
    """
    Decorator for expensive operations: logs the call, its duration and any failure.

    Exceptions are logged and re-raised unchanged.
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            op_name = func.__name__
            start_time = time.perf_counter()
            arg_str = ", ".join([_describe(a) for a in args] + [f"{k}={_describe(v)}" for k, v in kwargs.items()])
            logger.log(level, f"Executing {op_name}({arg_str})")
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                duration = time.perf_counter() - start_time
                logger.error(f"{op_name} failed after {duration:.2f}s: {e}")
                raise
            duration = time.perf_counter() - start_time
            logger.log(level, f"{op_name} completed in {duration:.2f}s")
            return result

        return wrapper

    # Support both @timed_operation and @timed_operation(...)
    if _func:
        return decorator(_func)
    return decorator
