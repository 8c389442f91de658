import xml.etree.ElementTree as ET

import numpy as np

from carfollow import svg


def _parse(text):
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    return root


def test_charts_are_well_formed():
    x = np.linspace(0, 10, 50)
    y = np.sin(x)
    y_nan = y.copy()
    y_nan[10] = np.nan
    _parse(svg.line_chart([x, x], [y, y_nan], labels=["a", "b <&>"], title="t & u"))
    _parse(svg.scatter_chart([x], [y], colors=[svg.speed_color(v, 1.0) for v in y], curve=(x, y)))
    labels = np.array([["stable", "string_unstable"], ["locally_unstable", "stable"]], dtype=object)
    root = _parse(svg.heatmap_chart([0, 1], [0, 1], labels, {"stable": "#2ca02c", "string_unstable": "#d62728"}))
    assert len(root.findall("{http://www.w3.org/2000/svg}rect")) >= 4


def test_constant_and_empty_series():
    _parse(svg.line_chart([np.zeros(3)], [np.ones(3)]))
    _parse(svg.line_chart([np.array([np.nan])], [np.array([np.nan])]))
