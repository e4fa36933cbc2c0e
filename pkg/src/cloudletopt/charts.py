'''
Static SVG charts of experiment statistics.
'''

import io

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from matplotlib.ticker import LogLocator

# kind -> (metric in the statistics table, ordinate label)
CHART_KINDS = {
    'runtime-log': ('wall_ms', 'Mean wall time [ms]'),
    'cost-ratio': ('cost_ratio', 'Cost ratio to optimum'),
}

AXIS_LABELS = {
    'time-slots': 'Number of time slots',
    'locations': 'Number of locations',
}

# Fixed so that equal statistics give equal bytes
_RC = {'svg.hashsalt': 'cloudletopt', 'svg.fonttype': 'none'}


def chart_figure(stats, kind, axis=None):
    """Plot one metric of a statistics table from :func:`cloudletopt.harness.summarize`.

    One series per solver: the mean with its 95% confidence interval as
    error bars. The runtime chart uses a base-10 logarithmic ordinate.
    """
    if kind not in CHART_KINDS:
        raise ValueError('Unknown chart kind {!r}; expected one of {}'.format(kind, ', '.join(CHART_KINDS)))
    metric, label = CHART_KINDS[kind]
    data = stats[stats['metric'] == metric]
    if data.empty:
        raise ValueError('No {} statistics to plot'.format(metric))
    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    for solver, group in data.groupby('solver', sort=True):
        mean = group['mean'].to_numpy(dtype=float)
        half = (group['ci_high'] - group['mean']).fillna(0).to_numpy(dtype=float)
        below = np.minimum(half, mean * 0.999) if kind == 'runtime-log' else half
        ax.errorbar(group['axis'].to_numpy(), mean, yerr=[below, half], marker='o', capsize=3, label=solver)
    if kind == 'runtime-log':
        ax.set_yscale('log')
        ax.yaxis.set_major_locator(LogLocator(base=10))
    ax.set_xlabel(AXIS_LABELS.get(axis, 'Axis value'))
    ax.set_ylabel(label)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def emit_chart(stats, kind, axis=None):
    """Render :func:`chart_figure` as a standalone SVG document (bytes)."""
    with matplotlib.rc_context(_RC):
        fig = chart_figure(stats, kind, axis)
        buffer = io.BytesIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    return buffer.getvalue()
