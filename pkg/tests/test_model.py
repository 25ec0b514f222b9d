import json

import pytest
import torch
from torch import nn

from sslprobe.errors import (
    CheckpointDigestError,
    CheckpointVersionError,
    ContractError,
    CorruptCheckpointError,
    IncompatibleCheckpointError,
    MissingArtifactError,
)
from sslprobe.model import (
    BackboneFactory,
    DetectionHeads,
    Detector,
    ProjectionHead,
    backbone_from_checkpoint,
    checkpoint_from_backbone,
    detect,
    encode,
    freeze,
    import_torchvision_baseline,
    is_frozen,
    load_checkpoint,
    load_detector,
    project,
    random_checkpoint,
    save_checkpoint,
    save_detector,
)
from sslprobe.model.backbones import coordinate_planes
from sslprobe.model.checkpoint import _PREAMBLE, MAGIC


def test_encode_zeros_is_finite(backbone) -> None:
    fmap, pooled = encode(backbone, torch.zeros(2, 3, 32, 32))
    assert fmap.shape == (2, backbone.out_channels, 2, 2)
    assert pooled.shape == (2, backbone.out_channels)
    assert torch.isfinite(fmap).all() and torch.isfinite(pooled).all()


def test_pooled_is_spatial_mean(backbone) -> None:
    fmap, pooled = encode(backbone, torch.randn(3, 3, 64, 64))
    assert torch.allclose(pooled, fmap.mean(dim=(2, 3)))


def test_identical_images_identical_rows(backbone) -> None:
    backbone.eval()
    image = torch.randn(1, 3, 32, 32)
    _, pooled = encode(backbone, image.repeat(4, 1, 1, 1))
    for row in pooled[1:]:
        assert torch.equal(row, pooled[0])


@pytest.mark.parametrize("shape", [(2, 1, 32, 32), (3, 32, 32), (2, 4, 32, 32)])
def test_encode_rejects_bad_batch(backbone, shape) -> None:
    with pytest.raises(ContractError):
        encode(backbone, torch.zeros(shape))


def test_project_zero_weights() -> None:
    head = ProjectionHead(8, out_dim=4)
    for p in head.parameters():
        nn.init.zeros_(p)
    assert torch.equal(project(head, torch.randn(5, 8)), torch.zeros(5, 4))


def test_project_identity_weights() -> None:
    head = ProjectionHead(6, out_dim=6)
    with torch.no_grad():
        for layer in (head.net[0], head.net[2]):
            layer.weight.copy_(torch.eye(6))
            layer.bias.zero_()
    pooled = torch.rand(3, 6)
    assert torch.allclose(project(head, pooled), pooled)


def test_project_dimension_mismatch() -> None:
    with pytest.raises(ContractError):
        project(ProjectionHead(8), torch.zeros(2, 9))


def test_detect_zero_weights() -> None:
    heads = DetectionHeads(16, 5)
    for p in heads.parameters():
        nn.init.zeros_(p)
    logits, boxes = detect(heads, torch.randn(4, 16))
    assert torch.equal(logits, torch.zeros(4, 5))
    assert torch.equal(boxes, torch.full((4, 4), 0.5))


def test_detect_boxes_open_interval() -> None:
    pooled = torch.randn(64, 32)
    for seed in range(20):
        _, boxes = detect(DetectionHeads(32, 3, seed=seed), pooled)
        assert boxes.shape == (64, 4)
        assert (boxes > 0).all() and (boxes < 1).all()


def test_detect_dimension_mismatch() -> None:
    with pytest.raises(ContractError):
        detect(DetectionHeads(16, 2), torch.zeros(1, 15))
    with pytest.raises(ContractError):
        DetectionHeads(16, 0)


def test_freeze_is_permanent(backbone) -> None:
    frozen = freeze(backbone)
    assert is_frozen(frozen)
    assert not any(p.requires_grad for p in frozen.parameters())
    frozen.train()
    assert not frozen.training
    assert all(not m.training for m in frozen.modules())
    assert not hasattr(frozen, "unfreeze")


def test_tiny_cnn_size(backbone) -> None:
    assert 90_000 < sum(p.numel() for p in backbone.parameters()) < 110_000


def test_coordinate_planes() -> None:
    planes = coordinate_planes(torch.zeros(2, 7, 4, 5))
    assert planes.shape == (2, 2, 4, 5)
    assert torch.equal(planes[0], planes[1])
    assert planes[0, 0, 0].tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert planes[0, 1, :, 0].tolist() == pytest.approx([-1.0, -1 / 3, 1 / 3, 1.0])
    assert torch.equal(planes[0, 0, 3], planes[0, 0, 0])


def test_pooled_vector_encodes_position() -> None:
    backbone = freeze(BackboneFactory.create("tiny-cnn", seed=0))
    image = torch.full((1, 3, 64, 64), 0.1)
    left, right = image.clone(), image.clone()
    left[:, 0, 24:40, 8:24] = 0.9
    right[:, 0, 24:40, 40:56] = 0.9
    with torch.no_grad():
        _, a = encode(backbone, left)
        _, b = encode(backbone, right)
    assert not torch.allclose(a, b)


def test_seeded_backbones() -> None:
    a = BackboneFactory.create("tiny-cnn", seed=3).state_dict()
    b = BackboneFactory.create("tiny-cnn", seed=3).state_dict()
    c = BackboneFactory.create("tiny-cnn", seed=4).state_dict()
    assert all(torch.equal(a[k], b[k]) for k in a)
    assert not all(torch.equal(a[k], c[k]) for k in a)


def test_backbone_factory_rejects_unknown() -> None:
    with pytest.raises(ValueError, match="Invalid backbone architecture"):
        BackboneFactory.create("resnet-9000")


def test_efficientnet_output_width() -> None:
    backbone = freeze(BackboneFactory.create("efficientnet-b1", seed=0))
    assert backbone.out_channels == 1280
    with torch.no_grad():
        _, pooled = encode(backbone, torch.zeros(1, 3, 64, 64))
    assert pooled.shape == (1, 1280)


def _saved(tmp_path, backbone, **kwargs):
    ckpt = checkpoint_from_backbone(backbone, "ssl-pretrained", config_digest="abc", extra={"tau": 0.5}, **kwargs)
    return ckpt, save_checkpoint(ckpt, tmp_path / "backbone.ckpt")


def test_checkpoint_round_trip(tmp_path, backbone) -> None:
    ckpt, path = _saved(tmp_path, backbone)
    loaded = load_checkpoint(path)
    assert (loaded.arch, loaded.provenance, loaded.config_digest) == ("tiny-cnn", "ssl-pretrained", "abc")
    assert loaded.extra == {"tau": 0.5}
    assert loaded.method == "ssl"
    assert set(loaded.tensors) == set(ckpt.tensors)
    for name, tensor in ckpt.tensors.items():
        assert loaded.tensors[name].dtype == tensor.dtype
        assert torch.equal(loaded.tensors[name], tensor)

    rebuilt = backbone_from_checkpoint(loaded, expected_arch="tiny-cnn")
    backbone.eval()
    rebuilt.eval()
    x = torch.randn(2, 3, 32, 32)
    assert torch.equal(encode(rebuilt, x)[1], encode(backbone, x)[1])


def test_checkpoint_truncated(tmp_path, backbone) -> None:
    _, path = _saved(tmp_path, backbone)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)
    path.write_bytes(b"SSLP")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_checkpoint_bad_magic(tmp_path, backbone) -> None:
    _, path = _saved(tmp_path, backbone)
    data = bytearray(path.read_bytes())
    data[:8] = b"NOTACKPT"
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_checkpoint_flipped_payload_byte(tmp_path, backbone) -> None:
    _, path = _saved(tmp_path, backbone)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointDigestError):
        load_checkpoint(path)


def test_checkpoint_other_version(tmp_path, backbone) -> None:
    _, path = _saved(tmp_path, backbone)
    data = path.read_bytes()
    _, _, header_len = _PREAMBLE.unpack_from(data)
    path.write_bytes(_PREAMBLE.pack(MAGIC, 2, header_len) + data[_PREAMBLE.size :])
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


@pytest.mark.parametrize("dropped", ["arch", "payload_sha256", "tensors"])
def test_checkpoint_incomplete_header(tmp_path, backbone, dropped) -> None:
    _, path = _saved(tmp_path, backbone)
    data = path.read_bytes()
    _, version, header_len = _PREAMBLE.unpack_from(data)
    start = _PREAMBLE.size
    header = json.loads(data[start : start + header_len])
    del header[dropped]
    header_bytes = json.dumps(header).encode("utf-8")
    path.write_bytes(_PREAMBLE.pack(MAGIC, version, len(header_bytes)) + header_bytes + data[start + header_len :])
    with pytest.raises(CorruptCheckpointError, match=dropped):
        load_checkpoint(path)


def test_checkpoint_architecture_mismatch(tmp_path, backbone) -> None:
    _, path = _saved(tmp_path, backbone)
    with pytest.raises(IncompatibleCheckpointError) as info:
        backbone_from_checkpoint(load_checkpoint(path), expected_arch="efficientnet-b1")
    assert info.value.expected == "efficientnet-b1"
    assert info.value.found == "tiny-cnn"


def test_checkpoint_missing(tmp_path) -> None:
    with pytest.raises(MissingArtifactError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_random_checkpoint_provenance() -> None:
    ckpt = random_checkpoint("tiny-cnn", seed=5)
    assert ckpt.provenance == "random"
    assert ckpt.method == "random"
    assert ckpt.extra["init_seed"] == 5


def test_baseline_import_rejects_other_arch() -> None:
    with pytest.raises(ValueError):
        import_torchvision_baseline("tiny-cnn")


def test_detector_round_trip(tmp_path, backbone) -> None:
    source = checkpoint_from_backbone(backbone, "random")
    detector = Detector(freeze(backbone), DetectionHeads(backbone.out_channels, 3, seed=1), ("a", "b", "c"))
    detector.eval()
    path = save_detector(detector, source, tmp_path / "detector.ckpt", extra={"n_per_class": 10})

    loaded, ckpt = load_detector(path)
    assert ckpt.kind == "detector"
    assert ckpt.extra["n_per_class"] == 10
    assert loaded.class_names == ("a", "b", "c")
    assert is_frozen(loaded.backbone)
    x = torch.randn(2, 3, 32, 32)
    with torch.no_grad():
        for got, want in zip(loaded(x), detector(x)):
            assert torch.allclose(got, want)

    # The backbone of a detector checkpoint can seed another detector.
    rebuilt = backbone_from_checkpoint(ckpt, expected_arch="tiny-cnn")
    assert all(torch.equal(v, backbone.state_dict()[k]) for k, v in rebuilt.state_dict().items())


def test_load_detector_rejects_backbone(tmp_path, backbone) -> None:
    _, path = _saved(tmp_path, backbone)
    with pytest.raises(IncompatibleCheckpointError):
        load_detector(path)


def test_forward_with_features_matches_forward(backbone) -> None:
    detector = Detector(freeze(backbone), DetectionHeads(backbone.out_channels, 2), ("a", "b"))
    x = torch.randn(1, 3, 32, 32)
    fmap, logits, boxes = detector.forward_with_features(x)
    assert fmap.requires_grad
    with torch.no_grad():
        ref_logits, ref_boxes = detector(x)
    assert torch.allclose(logits, ref_logits)
    assert torch.allclose(boxes, ref_boxes)
