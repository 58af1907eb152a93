import hashlib
from pathlib import Path

import pytest

from tumorkit.dataset import ClassLabel, load_manifest, load_sample
from tumorkit.errors import ConfigError
from tumorkit.synth import generate_corpus


def corpus_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(path.relative_to(root).as_posix().encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def test_four_samples_two_per_label(tmp_path):
    manifest_path = generate_corpus(tmp_path, 4, 32, seed=0)
    manifest = load_manifest(manifest_path)
    assert len(manifest) == 4
    labels = [entry.label for entry in manifest.entries]
    assert labels.count(ClassLabel.GLIOMA) == 2
    assert labels.count(ClassLabel.NEGATIVE) == 2


def test_positive_masks_nonempty_negative_mask_fields_empty(tmp_path):
    manifest = load_manifest(generate_corpus(tmp_path, 6, 32, seed=1))
    for entry in manifest.entries:
        if entry.label is ClassLabel.GLIOMA:
            sample = load_sample(manifest, entry.id)
            assert sample.mask is not None and sample.mask.any()
        else:
            assert entry.mask_path is None


def test_corpus_bit_identical_for_fixed_seed(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate_corpus(a, 8, 32, seed=7)
    generate_corpus(b, 8, 32, seed=7)
    assert corpus_digest(a) == corpus_digest(b)


def test_corpus_changes_with_seed(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    generate_corpus(a, 4, 32, seed=1)
    generate_corpus(b, 4, 32, seed=2)
    assert corpus_digest(a) != corpus_digest(b)


def test_rejects_odd_or_tiny_counts(tmp_path):
    with pytest.raises(ConfigError):
        generate_corpus(tmp_path, 5, 32, seed=0)
    with pytest.raises(ConfigError):
        generate_corpus(tmp_path, 0, 32, seed=0)


def test_images_normalized_and_masks_match_dimensions(tmp_path):
    manifest = load_manifest(generate_corpus(tmp_path, 4, 48, seed=3))
    for entry in manifest.entries:
        sample = load_sample(manifest, entry.id)
        assert sample.image.shape == (48, 48)
        assert 0.0 <= sample.image.min() and sample.image.max() <= 1.0
        if sample.mask is not None:
            assert sample.mask.shape == sample.image.shape
