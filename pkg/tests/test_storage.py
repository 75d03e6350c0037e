#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Tests for the matrix file format and the on-disk layouts.
"""

import os
import sys
import json
import struct
import unittest

import numpy as np

# Add parent directory to path for importing L2T modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import L2T.kernels as kernels
import L2T.factors as factors
import L2T.pipeline as pipeline
import L2T.reflection as reflection
import L2T.storage as storage
from tests.test_base import L2TTestCase


def tree_bytes(root):
    """Relative path -> file content for every file below root"""
    contents = {}
    for directory, _dirs, files in os.walk(root):
        for name in files:
            path = os.path.join(directory, name)
            with open(path, "rb") as stream:
                contents[os.path.relpath(path, root)] = stream.read()
    return contents


class MatrixFileTests(L2TTestCase):
    """Test cases for write_matrix and read_matrix"""

    def test_layout(self):
        path = self.path("m.l2tm")
        storage.write_matrix(path, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        with open(path, "rb") as stream:
            data = stream.read()
        self.assertEqual(data[:4], b"L2TM")
        self.assertEqual(struct.unpack("<IQQ", data[4:24]), (1, 2, 3))
        self.assertEqual(np.frombuffer(data[24:], dtype="<f8").tolist(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        self.assertEqual(storage.read_matrix(path).tolist(), [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])

    def test_empty_matrix(self):
        path = self.path("empty.l2tm")
        storage.write_matrix(path, np.zeros((0, 4)))
        self.assertEqual(storage.read_matrix(path).shape, (0, 4))

    def test_truncated(self):
        path = self.path("m.l2tm")
        storage.write_matrix(path, self.random_matrix(3, 3))
        with open(path, "r+b") as stream:
            stream.truncate(24 + 8 * 8)
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.read_matrix(path)
        self.assertEqual(context.exception.field, "dims")
        self.assertEqual(context.exception.path, path)

    def test_short_header(self):
        path = self.path("m.l2tm")
        with open(path, "wb") as stream:
            stream.write(b"L2TM\x01")
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.read_matrix(path)
        self.assertEqual(context.exception.field, "header")

    def test_bad_magic(self):
        path = self.path("m.l2tm")
        with open(path, "wb") as stream:
            stream.write(struct.pack("<4sIQQ", b"NOPE", 1, 0, 0))
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.read_matrix(path)
        self.assertEqual(context.exception.field, "magic")

    def test_bad_version(self):
        path = self.path("m.l2tm")
        with open(path, "wb") as stream:
            stream.write(struct.pack("<4sIQQ", b"L2TM", 2, 0, 0))
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.read_matrix(path)
        self.assertEqual(context.exception.field, "version")

    def test_missing_file(self):
        with self.assertRaises(storage.StoreFormatError):
            storage.read_matrix(self.path("missing.l2tm"))

    def test_rejects_vectors(self):
        with self.assertRaises(ValueError):
            storage.write_matrix(self.path("v.l2tm"), np.ones(3))


class StoreLayoutTests(L2TTestCase):
    """Test cases for experience stores"""

    def setUp(self):
        super().setUp()
        self.store = pipeline.generate_experiences(
            3, ["joint_pca", "random_proj", "target_pca"], self.small_synth(), [3, 4], seed=5)

    def test_reload_preserves_fields(self):
        storage.save_store(self.store, self.path("store"))
        loaded = storage.load_store(self.path("store"))
        self.assertEqual(loaded.count, 3)
        self.assertEqual(loaded.exponents, self.store.exponents)
        for original, copy in zip(self.store.experiences, loaded.experiences):
            self.assertEqual(copy.extractor, original.extractor)
            self.assertEqual(copy.n_labeled, original.n_labeled)
            self.assertEqual(copy.ratio, original.ratio)
            self.assertEqual(copy.seed, original.seed)
            self.assertEqual(copy.floored, original.floored)
            self.assertEqual(copy.w.entries.tobytes(), original.w.entries.tobytes())
            self.assertEqual(copy.source.features.tobytes(), original.source.features.tobytes())
            self.assertEqual(copy.target.labels.tolist(), original.target.labels.tolist())
            self.assertEqual(copy.target.name, original.target.name)

    def test_resave_is_byte_identical(self):
        storage.save_store(self.store, self.path("first"))
        storage.save_store(storage.load_store(self.path("first")), self.path("second"))
        self.assertEqual(tree_bytes(self.path("first")), tree_bytes(self.path("second")))

    def test_manifest(self):
        storage.save_store(self.store, self.path("store"))
        with open(self.path("store", "manifest.json"), encoding="utf-8") as stream:
            text = stream.read()
        self.assertTrue(text.endswith("}\n"))
        manifest = json.loads(text)
        self.assertEqual(manifest["format"], "l2t-store")
        self.assertEqual(manifest["counts"], {"experiences": 3, "extractors": 3})
        self.assertEqual([entry["id"] for entry in manifest["experiences"]], ["e00000", "e00001", "e00002"])
        self.assertTrue(os.path.isfile(self.path("store", "e00001", "w.l2tm")))

    def test_empty_store(self):
        storage.save_store(pipeline.ExperienceStore(), self.path("store"))
        self.assertEqual(storage.load_store(self.path("store")).count, 0)

    def test_corrupt_matrix_names_file(self):
        storage.save_store(self.store, self.path("store"))
        path = self.path("store", "e00002", "w.l2tm")
        with open(path, "r+b") as stream:
            stream.truncate(30)
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.load_store(self.path("store"))
        self.assertEqual(context.exception.path, path)

    def test_wrong_format(self):
        storage.save_store(self.store, self.path("store"))
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.load_model(self.path("store"))
        self.assertEqual(context.exception.field, "format")

    def test_missing_field(self):
        storage.save_store(self.store, self.path("store"))
        manifest_path = self.path("store", "manifest.json")
        with open(manifest_path, encoding="utf-8") as stream:
            manifest = json.load(stream)
        del manifest["experiences"][0]["ratio"]
        with open(manifest_path, "w", encoding="utf-8") as stream:
            json.dump(manifest, stream)
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.load_store(self.path("store"))
        self.assertEqual(context.exception.field, "ratio")


class FeatureAndModelLayoutTests(L2TTestCase):
    """Test cases for feature sets, models and domain pairs"""

    def test_features(self):
        store = pipeline.generate_experiences(2, ["joint_pca"], self.small_synth(), [3], seed=1)
        features = pipeline.featurize_store(store, r=3)
        correction = reflection.CorrectionConfig(p=3, q=15, enabled=True)
        storage.save_features(features, self.path("features"), r=3, correction=correction)
        loaded, loaded_correction = storage.load_features(self.path("features"))
        self.assertEqual(loaded_correction, correction)
        for original, copy in zip(features, loaded):
            self.assertEqual(copy.variance.tobytes(), original.variance.tobytes())
            self.assertEqual(copy.discriminant.tobytes(), original.discriminant.tobytes())
            self.assertEqual(copy.bank, original.bank)
            self.assertEqual(copy.inverse_ratio_target, original.inverse_ratio_target)
            self.assertEqual(copy.n_labeled, 3)
        storage.save_features(loaded, self.path("again"), r=3, correction=loaded_correction)
        self.assertEqual(tree_bytes(self.path("features")), tree_bytes(self.path("again")))

    def test_model(self):
        model = reflection.ReflectionModel(np.linspace(0.0, 1.0, 5), 0.0, 0.0, -0.25,
                                           kernels.KernelBank(1.0, (-1.0, -0.5, 0.0, 0.5, 1.0)),
                                           components=("mmd",), b_corr=7.0)
        storage.save_model(model, self.path("model"))
        loaded = storage.load_model(self.path("model"))
        self.assertEqual(loaded.beta.tolist(), model.beta.tolist())
        self.assertEqual((loaded.lam, loaded.mu, loaded.bias, loaded.b_corr), (0.0, 0.0, -0.25, 7.0))
        self.assertEqual(loaded.exponents, model.exponents)
        self.assertEqual(loaded.components, ("mmd",))

    def test_model_kernel_count_mismatch(self):
        storage.save_model(self.random_model(), self.path("model"))
        storage.write_matrix(self.path("model", "beta.l2tm"), np.ones((1, 4)))
        with self.assertRaises(storage.StoreFormatError) as context:
            storage.load_model(self.path("model"))
        self.assertEqual(context.exception.field, "dims")

    def test_pairs(self):
        pairs = pipeline.generate_pairs(2, self.small_synth(), seed=8)
        storage.save_pairs(pairs, self.path("pairs"))
        loaded = storage.load_pairs(self.path("pairs"))
        self.assertEqual(len(loaded), 2)
        for (source, target), (copy_source, copy_target) in zip(pairs, loaded):
            self.assertEqual(copy_source.features.tobytes(), source.features.tobytes())
            self.assertEqual(copy_target.labels.tolist(), target.labels.tolist())

    def test_unlabeled_pair(self):
        source = pipeline.Domain(self.random_matrix(4, 3), name="source")
        target = pipeline.Domain(self.random_matrix(5, 3), name="target")
        storage.save_pair(source, target, self.path("pair"))
        copy_source, copy_target = storage.load_pair(self.path("pair"))
        self.assertIsNone(copy_source.labels)
        self.assertIsNone(copy_target.labels)
        self.assertFalse(os.path.exists(self.path("pair", "source_y.l2tm")))

    def test_report(self):
        report = pipeline.EvaluationReport(3, [pipeline.ReportRow(0, "l2t", 1.5), pipeline.ReportRow(0, "joint_pca", 1.0)])
        storage.write_report(report, self.path("out", "report.json"))
        with open(self.path("out", "report.json"), encoding="utf-8") as stream:
            content = json.load(stream)
        self.assertEqual(content["means"], {"l2t": 1.5, "joint_pca": 1.0})
        self.assertEqual(len(content["rows"]), 2)


if __name__ == '__main__':
    unittest.main()
