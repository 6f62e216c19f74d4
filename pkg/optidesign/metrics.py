"""Prometheus counters for fits, criterion evaluations and simulations."""

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

registry = CollectorRegistry()

fits_total = Counter(
    'optidesign_fits_total', 'Least-squares fits by outcome', ['outcome'],
    registry=registry,
)
fit_duration = Histogram(
    'optidesign_fit_duration_seconds', 'Time spent in least-squares fits',
    registry=registry,
)
criterion_evaluations = Counter(
    'optidesign_criterion_evaluations_total', 'Design criterion evaluations', ['criterion'],
    registry=registry,
)
simulations_total = Counter(
    'optidesign_simulations_total', 'Monte-Carlo refits by outcome', ['outcome'],
    registry=registry,
)


def write_metrics(path: str) -> None:
    """Write the registry in Prometheus text format."""
    write_to_textfile(path, registry)
