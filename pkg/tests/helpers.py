"""Small builders shared by the geometry and section tests."""

import numpy as np

from chernforms.currents import fs_metric, trivial_metric
from chernforms.geometry import MetricField, chern_connection
from chernforms.jets import Chart
from chernforms.section import SectionField

ORDER = 4


def field(points, section, metric=None, order=ORDER, m=None):
    """SectionField for ``section(chart) -> list of jets`` at ``points``."""
    chart = Chart(np.atleast_2d(np.asarray(points, dtype=complex)), order)
    comps = section(chart)
    metric = metric or trivial_metric(len(comps))
    geom = chern_connection(MetricField.from_matrix(chart, metric(chart)))
    return SectionField(geom, comps)


def coordinates(chart):
    return [chart.z(a) for a in range(chart.n)]


def fs(degrees):
    return fs_metric(degrees)


ACCEPTANCE = []


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    """Remember one acceptance verdict; conftest prints them after the run."""
    ACCEPTANCE.append((number, title, bool(ok), detail))
    return ok
