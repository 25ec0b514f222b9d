from pathlib import Path

import pytest

from sslprobe.data import FULL_N_VALUES, TINY_CLASSES, TINY_N_VALUES, VOC_CLASSES
from sslprobe.errors import ConfigError
from sslprobe.settings import SNAPSHOT_NAME, load_config

CONFIGS = Path(__file__).parents[1] / "configs"


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults() -> None:
    config = load_config()
    assert config.backbone == "efficientnet-b1"
    assert config.ssl.tau == 0.5
    assert config.ssl.learning_rate == 0.0005
    assert config.detector.alpha == 0.5
    assert config.detector.learning_rate == 0.001
    assert config.dataset.train_fraction == 0.8
    assert config.dataset.class_list == ("blue-square", "red-disc")
    assert config.dataset.n_list == (32,)
    assert config.eval.thresholds == [0.5, 0.7]


def test_bundled_configs() -> None:
    ci = load_config(CONFIGS / "ci.toml")
    assert ci.backbone == "tiny-cnn"
    assert ci.detector.augment.is_empty
    assert not ci.ssl.augment.is_empty
    assert [t.kind for t in ci.ssl.augment.transforms] == ["crop", "color", "grayscale", "blur"]
    ci.ssl.augment.validate_ssl()
    assert ci.dataset.n_list == (32,)
    assert ci.detector.selection == "val_mean_iou"

    tiny = load_config(CONFIGS / "tiny.toml")
    assert tiny.dataset.class_list == TINY_CLASSES
    assert tiny.dataset.n_list == TINY_N_VALUES

    full = load_config(CONFIGS / "full.toml")
    assert full.dataset.class_list == VOC_CLASSES
    assert full.dataset.n_list == FULL_N_VALUES


def test_unknown_key_names_field(tmp_path) -> None:
    with pytest.raises(ConfigError, match="learning_rat"):
        load_config(_write(tmp_path, "[ssl]\nlearning_rat = 0.1\n"))


def test_out_of_range_value(tmp_path) -> None:
    with pytest.raises(ConfigError, match="tau"):
        load_config(_write(tmp_path, "[ssl]\ntau = 0.0\n"))


def test_missing_and_malformed_files(tmp_path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(_write(tmp_path, "[ssl\nmax_epochs = 3\n"))


@pytest.mark.parametrize(
    "text",
    [
        '[dataset]\nsource = "voc"\n',
        '[dataset]\nsource = "voc"\nregime = "TINY"\nn_values = [7]\n',
        '[dataset]\nsynthetic_classes = ["red-disc", "plaid-hexagon"]\n',
        '[dataset]\nsource = "voc"\nregime = "FULL"\nclasses = ["cat", "airplane"]\n',
    ],
)
def test_inconsistent_dataset(tmp_path, text) -> None:
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_augment_policy_from_toml(tmp_path) -> None:
    text = '[[detector.augment.transforms]]\nkind = "grayscale"\np = 1.0\n'
    config = load_config(_write(tmp_path, text))
    assert [t.kind for t in config.detector.augment.transforms] == ["grayscale"]
    assert config.detector.augment.transforms[0].p == 1.0


def test_overrides(tmp_path) -> None:
    config = load_config(CONFIGS / "ci.toml")
    changed = config.with_overrides(output_dir=tmp_path / "out", seed=5)
    assert changed.output_dir == tmp_path / "out"
    assert (changed.dataset.seed, changed.ssl.seed, changed.detector.seed) == (5, 5, 5)
    assert changed.digest() != config.digest()
    assert config.with_overrides().digest() == config.digest()


def test_snapshot(tmp_path) -> None:
    config = load_config(CONFIGS / "ci.toml")
    path = config.write_snapshot(tmp_path)
    assert path.name == SNAPSHOT_NAME
    snapshot = path.read_text(encoding="utf-8")
    assert '"backbone": "tiny-cnn"' in snapshot
    assert '"tau": 0.5' in snapshot
