#!/usr/bin/env python3
"""
Figures for mfspec outputs

From an `mc` output directory:
1. Mean spectra (classical and envelope) with 95% bands vs theory
2. RMSE(h) per estimator
3. Logscale diagrams log2 S_g(q, j) with fitted lines (first realization)

From an `analyze` output directory:
4. Classical spectrum, envelope and the per-(gamma, delta) members
"""

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

plt.rcParams.update({
    'font.family': 'serif',
    'font.size': 10,
    'axes.labelsize': 11,
    'axes.titlesize': 12,
    'legend.fontsize': 9,
    'figure.dpi': 300,
    'savefig.dpi': 300,
    'savefig.bbox': 'tight',
    'savefig.pad_inches': 0.1,
    'lines.linewidth': 1.5,
})

COLORS = {
    'theory': '#000000',
    'legendre': '#377eb8',
    'envelope': '#e41a1c',
}

LABELS = {
    'theory': r'$\mathcal{D}(h)$',
    'legendre': r'$\mathcal{L}(h)$',
    'envelope': r'$\mathcal{L}_\Upsilon(h)$',
}


def set_figure_size(width_cm=17.8, height_cm=8):
    """Set figure size in cm (for two-column layout)"""
    return (width_cm / 2.54, height_cm / 2.54)


def save_figure(fig, output_path, formats=('pdf', 'png')):
    """Save figure in multiple formats"""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        save_path = output_path.with_suffix(f'.{fmt}')
        fig.savefig(save_path, format=fmt, bbox_inches='tight')
        print(f"✅ Saved: {save_path}")


def _floor_at_zero(ax):
    lo, hi = ax.get_ylim()
    ax.set_ylim(max(lo, -0.1), hi)


def fig_mean_spectra(run_dir: Path, output_dir: Path, title: str):
    fig, ax = plt.subplots(figsize=set_figure_size(12, 8))
    theory_drawn = False
    for estimator in ('legendre', 'envelope'):
        path = run_dir / f'{estimator}_spectrum.csv'
        if not path.exists():
            continue
        df = pd.read_csv(path).replace([np.inf, -np.inf], np.nan)
        if not theory_drawn:
            ax.plot(df['h'], df['theory'], color=COLORS['theory'], ls='--', label=LABELS['theory'])
            theory_drawn = True
        ax.plot(df['h'], df['mean'], color=COLORS[estimator], label=LABELS[estimator])
        ax.fill_between(df['h'], df['band_low'], df['band_high'], color=COLORS[estimator], alpha=0.2, lw=0)

    ax.set_xlabel('$h$')
    ax.set_ylabel('$D$')
    ax.set_title(title)
    _floor_at_zero(ax)
    ax.legend(loc='best')
    plt.tight_layout()
    save_figure(fig, output_dir / 'mean_spectra')
    plt.close()


def fig_rmse(run_dir: Path, output_dir: Path, title: str):
    fig, ax = plt.subplots(figsize=set_figure_size(12, 6))
    for estimator in ('legendre', 'envelope'):
        path = run_dir / f'{estimator}_spectrum.csv'
        if not path.exists():
            continue
        df = pd.read_csv(path)
        ax.plot(df['h'], df['rmse'], color=COLORS[estimator], label=LABELS[estimator])
    ax.set_xlabel('$h$')
    ax.set_ylabel('RMSE')
    ax.set_title(title)
    ax.legend(loc='best')
    plt.tight_layout()
    save_figure(fig, output_dir / 'rmse')
    plt.close()


def fig_logscale(logscale_csv: Path, output_dir: Path, q_values=(-2.0, 0.0, 2.0)):
    """One panel per gamma; the delta closest to the grid middle is shown"""
    df = pd.read_csv(logscale_csv)
    if 'realization' in df.columns:
        df = df[df['realization'] == df['realization'].min()]
    df = df[df['q'].round(6).isin([round(q, 6) for q in q_values])]
    if df.empty:
        print(f"⚠️  No rows for q in {q_values} in {logscale_csv}")
        return

    gammas = sorted(df['gamma'].unique())
    deltas = np.sort(df['delta'].unique())
    delta = deltas[len(deltas) // 2]
    palette = sns.color_palette('colorblind', len(q_values))

    fig, axes = plt.subplots(1, len(gammas), figsize=set_figure_size(5 * len(gammas), 6), squeeze=False)
    for ax, gamma in zip(axes[0], gammas):
        sub = df[df['gamma'] == gamma]
        if gamma != 0:
            sub = sub[np.isclose(sub['delta'], delta)]
        for color, q in zip(palette, q_values):
            rows = sub[np.isclose(sub['q'], q)].sort_values('j')
            if rows.empty:
                continue
            ax.plot(rows['j'], rows['log2_S'], 'o', ms=3, color=color, label=f'q={q:g}')
            fit = rows.dropna(subset=['fit'])
            ax.plot(fit['j'], fit['fit'], '-', color=color, lw=1)
        ax.set_title(rf'$\gamma={gamma:g}$' + ('' if gamma == 0 else rf', $\delta={delta:.2f}$'))
        ax.set_xlabel('$j$')
    axes[0][0].set_ylabel(r'$\log_2 S_g(q, j)$')
    axes[0][0].legend(loc='best')
    plt.tight_layout()
    save_figure(fig, output_dir / 'logscale')
    plt.close()


def fig_analysis(spectra_json: Path, output_dir: Path):
    payload = json.loads(spectra_json.read_text())

    def series(curve):
        return np.asarray(curve['h']), np.array([np.nan if v is None else v for v in curve['D']])

    fig, ax = plt.subplots(figsize=set_figure_size(12, 8))
    for member in payload.get('members', []):
        h, D = series(member)
        ax.plot(h, D, color='#999999', lw=0.4, alpha=0.5)
    for estimator in ('legendre', 'envelope'):
        h, D = series(payload[estimator])
        ax.plot(h, D, color=COLORS[estimator], label=LABELS[estimator])
    ax.set_xlabel('$h$')
    ax.set_ylabel('$D$')
    _floor_at_zero(ax)
    ax.legend(loc='best')
    plt.tight_layout()
    save_figure(fig, output_dir / 'analysis_spectra')
    plt.close()


def main():
    parser = argparse.ArgumentParser(description="Plot mfspec spectra")
    parser.add_argument("--run-dir", type=Path, required=True, help="Output directory of `mc` or `analyze`")
    parser.add_argument("--output-dir", type=Path, help="Figure directory (default: <run-dir>/figures)")
    parser.add_argument("--title", default=None)

    args = parser.parse_args()
    output_dir = args.output_dir or args.run_dir / 'figures'
    title = args.title or args.run_dir.name
    sns.set_theme(style='whitegrid', font='serif')

    print(f"📊 Generating figures for {args.run_dir}...")
    if (args.run_dir / 'spectra.json').exists():
        fig_analysis(args.run_dir / 'spectra.json', output_dir)
    elif (args.run_dir / 'envelope_spectrum.csv').exists():
        fig_mean_spectra(args.run_dir, output_dir, title)
        fig_rmse(args.run_dir, output_dir, title)
    else:
        print(f"❌ No spectra found in {args.run_dir}")
        sys.exit(1)

    if (args.run_dir / 'logscale.csv').exists():
        fig_logscale(args.run_dir / 'logscale.csv', output_dir)


if __name__ == "__main__":
    main()
