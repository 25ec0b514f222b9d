from pathlib import Path

from sslprobe.errors import ConfigError
from sslprobe.experiment import generate_synthetic, run_dir
from sslprobe.settings import ExperimentConfig


def synth_command(config: ExperimentConfig, force: bool = False, verbose: bool = False) -> Path:
    """Generate the synthetic train/test/pool manifests."""
    if config.dataset.source != "synthetic":
        raise ConfigError(f"dataset.source: synth needs 'synthetic', got {config.dataset.source!r}")
    directory = run_dir(config, "synthetic", force=force)
    for path in generate_synthetic(config, directory).values():
        print(f"Saved {path}")
    return directory
