"""Quick-look PNGs of CSV tables; needs the optional matplotlib extra."""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def plot_table(columns: dict, path, title: str = "") -> Path:
    """One panel per non-abscissa column, all against the first column."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("--plot needs matplotlib (pip install weakkamlab[plot])") from None
    names = list(columns)
    xkey, ykeys = names[0], names[1:]
    fig, axes = plt.subplots(len(ykeys), 1, figsize=(6, 1.8 * len(ykeys) + 0.6), sharex=True, squeeze=False)
    for ax, k in zip(axes[:, 0], ykeys):
        ax.plot(columns[xkey], columns[k], lw=1)
        ax.set_ylabel(k)
        ax.grid(alpha=0.3)
    axes[-1, 0].set_xlabel(xkey)
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
