#!/usr/bin/env python3
"""
Preset Runner for mfspec

Runs every experiment preset in configs/ through `mf_cli.py mc`, one
output directory per preset.
"""

import argparse
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from mf_cli import EXIT_OK, main as cli_main  # noqa: E402
from mf_config import load_experiment  # noqa: E402
from mf_errors import ConfigError  # noqa: E402


def list_presets(config_dir: Path, only=None):
    """Sorted preset files, optionally restricted to the given names"""
    presets = sorted(config_dir.glob("*.yaml"))
    if only:
        wanted = set(only)
        presets = [p for p in presets if p.stem in wanted]
        missing = wanted - {p.stem for p in presets}
        if missing:
            raise ValueError(f"Unknown preset(s): {', '.join(sorted(missing))}")
    return presets


def describe(path: Path) -> str:
    try:
        config = load_experiment(path)
    except ConfigError as e:
        return f"{path.stem}: INVALID ({e})"
    return (f"{config.name}: {config.process.kind}, d={config.process.dim}, "
            f"N_MC={config.n_realizations}, seed={config.seed}")


def main():
    parser = argparse.ArgumentParser(description="Run the mfspec experiment presets")
    parser.add_argument(
        "--config-dir",
        type=Path,
        default=ROOT / "configs",
        help="Directory holding the preset YAML files"
    )
    parser.add_argument(
        "--results-dir",
        type=Path,
        default=ROOT / "results",
        help="Directory to save results (one subdirectory per preset)"
    )
    parser.add_argument(
        "--only",
        nargs="+",
        help="Run only these presets (file stems)"
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="Worker cap passed to each run"
    )
    parser.add_argument(
        "--dry-run",
        action="store_true",
        help="Print preset list without running"
    )
    parser.add_argument(
        "--resume-from",
        type=int,
        default=0,
        help="Resume from preset number (0-indexed)"
    )

    args = parser.parse_args()

    presets = list_presets(args.config_dir, args.only)
    print(f"📊 Total presets: {len(presets)}")
    print(f"📁 Results directory: {args.results_dir}")

    if args.dry_run:
        print("\n🔍 Dry run - preset list:")
        for i, path in enumerate(presets):
            print(f"  {i}: {describe(path)}")
        sys.exit(0)

    args.results_dir.mkdir(parents=True, exist_ok=True)
    success_count = 0
    fail_count = 0

    for i, path in enumerate(presets):
        if i < args.resume_from:
            print(f"⏭️  Skipping preset {i} (resume point)")
            continue

        print(f"\n📊 Preset {i+1}/{len(presets)}: {path.stem}")
        argv = ["mc", str(path), "--out", str(args.results_dir / path.stem), "--no-progress"]
        if args.threads:
            argv += ["--threads", str(args.threads)]

        start = time.time()
        code = cli_main(argv)
        duration = time.time() - start
        if code == EXIT_OK:
            success_count += 1
            print(f"✅ {path.stem} done in {duration:.1f}s")
        else:
            fail_count += 1
            print(f"❌ {path.stem} failed (exit {code})")

    print(f"\n📊 Summary: {success_count} succeeded, {fail_count} failed")
    if fail_count > 0:
        sys.exit(1)


if __name__ == "__main__":
    main()
