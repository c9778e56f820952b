"""
Observability module: logging setup and OpenTelemetry tracing.
Provides a global tracer, span decorator for KPI operations, and flushing.
"""
import functools
import logging
import os
from typing import Any, Callable, Optional

from dotenv import load_dotenv
from opentelemetry import trace
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import ConsoleSpanExporter, SimpleSpanProcessor

# Load environment variables
load_dotenv()

# Module-level logger
logger = logging.getLogger(__name__)

SERVICE_NAME = "mcs-kpi-engine"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Global tracer provider instance
_tracer_provider: Optional[TracerProvider] = None


def configure_logging(level: str = "INFO") -> None:
    """
    Install a single stream handler on the root logger.

    Args:
        level: Logging level name (DEBUG, INFO, WARNING, ...)
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_mcs_kpi", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._mcs_kpi = True
    root.addHandler(handler)
    root.setLevel(level.upper())


def init_tracer_provider(exporter: Optional[str] = None) -> TracerProvider:
    """
    Initialize the OpenTelemetry tracer provider.

    Args:
        exporter: "console" to print spans, "none" (default) to record nothing.
            Falls back to the MCS_KPI_TRACE_EXPORTER environment variable.

    Returns:
        TracerProvider: The configured provider

    Raises:
        ValueError: If the exporter name is not recognised
    """
    global _tracer_provider

    exporter = (exporter or os.getenv("MCS_KPI_TRACE_EXPORTER", "none")).lower()
    provider = TracerProvider(resource=Resource.create({"service.name": SERVICE_NAME}))

    if exporter == "console":
        provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter()))
    elif exporter != "none":
        raise ValueError(f"Unknown trace exporter: {exporter}")

    logger.info(f"Initialized tracer provider with exporter: {exporter}")
    _tracer_provider = provider
    return provider


def get_tracer_provider() -> TracerProvider:
    """Get or create the global tracer provider."""
    global _tracer_provider

    if _tracer_provider is None:
        _tracer_provider = init_tracer_provider()

    return _tracer_provider


def get_tracer() -> trace.Tracer:
    return get_tracer_provider().get_tracer(__name__)


def observe(name: Optional[str] = None, kpi_id: Optional[str] = None) -> Callable:
    """
    Decorator wrapping a KPI operation in a span.

    The span records the KPI id and, when the result exposes `is_defined`,
    whether the KPI came out defined.

    Usage:
        @observe(kpi_id="K9")
        def availability_by_connector(...):
            ...
    """
    def decorator(func: Callable) -> Callable:
        span_name = name or func.__name__

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            with get_tracer().start_as_current_span(span_name) as span:
                if kpi_id:
                    span.set_attribute("kpi.id", kpi_id)
                result = func(*args, **kwargs)
                defined = getattr(result, "is_defined", None)
                if isinstance(defined, bool):
                    span.set_attribute("kpi.defined", defined)
                return result

        return wrapper

    return decorator


def flush_traces() -> None:
    """
    Flush pending spans.
    Call this before application exit so console spans are written.
    """
    provider = get_tracer_provider()
    provider.force_flush()
    logger.debug("Flushed pending spans")
