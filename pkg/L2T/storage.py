#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
On-disk layout of experience stores, feature sets, models, domain pairs
and evaluation reports.

Matrices use a small binary format: magic "L2TM", uint32 version, uint64 row
and column counts (little-endian), then row-major little-endian float64
values. Every directory carries a manifest.json written with sorted keys so
that saving an unchanged object reproduces its files byte for byte.
"""

import json
import os
import struct

import numpy as np

import L2T.kernels as kernels
import L2T.stats as stats
import L2T.pipeline as pipeline
import L2T.reflection as reflection
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

MAGIC = b"L2TM"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIQQ")
MANIFEST = "manifest.json"
MATRIX_SUFFIX = ".l2tm"


class StoreFormatError(ValueError):
    """Corrupt or inconsistent file, naming the file and the offending field"""

    def __init__(self, path, field, detail):
        self.path = path
        self.field = field
        super().__init__(_("{0}: invalid {1}: {2}").format(path, field, detail))


def write_matrix(path, matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(_("Only 2-D matrices can be written, got shape {0}").format(matrix.shape))
    rows, cols = matrix.shape
    with open(path, "wb") as stream:
        stream.write(HEADER.pack(MAGIC, FORMAT_VERSION, rows, cols))
        stream.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def read_matrix(path):
    """
    Read a matrix file

    Raises:
        StoreFormatError: On bad magic, version or dimensions
    """
    try:
        with open(path, "rb") as stream:
            data = stream.read()
    except OSError as error:
        raise StoreFormatError(path, "file", error.strerror or str(error))
    if len(data) < HEADER.size:
        raise StoreFormatError(path, "header", _("{0} bytes, expected at least {1}").format(len(data), HEADER.size))
    magic, version, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StoreFormatError(path, "magic", repr(magic))
    if version != FORMAT_VERSION:
        raise StoreFormatError(path, "version", _("{0}, expected {1}").format(version, FORMAT_VERSION))
    expected = rows * cols * 8
    if len(data) - HEADER.size != expected:
        raise StoreFormatError(path, "dims", _("{0}x{1} needs {2} payload bytes, found {3}").format(
            rows, cols, expected, len(data) - HEADER.size))
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size, count=rows * cols)
    return values.astype(np.float64).reshape(rows, cols)


def write_manifest(directory, content):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8") as stream:
        stream.write(json.dumps(content, sort_keys=True, indent=2) + "\n")


def read_manifest(directory, kind):
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path, encoding="utf-8") as stream:
            content = json.load(stream)
    except OSError as error:
        raise StoreFormatError(path, "file", error.strerror or str(error))
    except json.JSONDecodeError as error:
        raise StoreFormatError(path, "json", str(error))
    if not isinstance(content, dict):
        raise StoreFormatError(path, "manifest", _("expected an object"))
    if content.get("format") != kind:
        raise StoreFormatError(path, "format", _("{0!r}, expected {1!r}").format(content.get("format"), kind))
    if content.get("version") != FORMAT_VERSION:
        raise StoreFormatError(path, "version", _("{0!r}, expected {1}").format(content.get("version"), FORMAT_VERSION))
    return _Manifest(path, content)


class _Manifest:
    """Field access raising StoreFormatError for missing keys"""

    def __init__(self, path, content):
        self.path = path
        self.content = content

    def __getitem__(self, key):
        try:
            return self.content[key]
        except KeyError:
            raise StoreFormatError(self.path, key, _("missing field"))

    def get(self, key, default=None):
        return self.content.get(key, default)

    def entry(self, entry, key):
        try:
            return entry[key]
        except (KeyError, TypeError):
            raise StoreFormatError(self.path, key, _("missing field in {0!r}").format(entry))


def _matrix_path(directory, name):
    return os.path.join(directory, name + MATRIX_SUFFIX)


def _write_domain(directory, prefix, domain):
    write_matrix(_matrix_path(directory, prefix + "_X"), domain.features)
    if domain.labels is not None:
        write_matrix(_matrix_path(directory, prefix + "_y"), domain.labels.reshape(-1, 1))


def _read_domain(directory, prefix, name, has_labels):
    features = read_matrix(_matrix_path(directory, prefix + "_X"))
    labels = None
    if has_labels:
        path = _matrix_path(directory, prefix + "_y")
        column = read_matrix(path)
        if column.shape != (features.shape[0], 1):
            raise StoreFormatError(path, "dims", _("expected {0}x1 labels, got {1}x{2}").format(
                features.shape[0], *column.shape))
        labels = column[:, 0].astype(np.int64)
    return pipeline.Domain(features, labels, name)


def _domain_fields(prefix, domain):
    return {prefix + "_name": domain.name, prefix + "_labels": domain.labels is not None}


def save_store(store, path):
    """
    Write an experience store directory

    Layout: manifest.json plus one eNNNNN directory per experience holding
    source_X, source_y, target_X, target_y and w matrices.
    """
    entries = []
    for index, experience in enumerate(store.experiences):
        name = "e{0:05d}".format(index)
        directory = os.path.join(path, name)
        os.makedirs(directory, exist_ok=True)
        _write_domain(directory, "source", experience.source)
        _write_domain(directory, "target", experience.target)
        write_matrix(_matrix_path(directory, "w"), experience.w.entries)
        entry = {
            "id": name,
            "extractor": experience.extractor.value,
            "n_labeled": int(experience.n_labeled),
            "ratio": float(experience.ratio),
            "seed": int(experience.seed),
            "floored": bool(experience.floored),
        }
        entry.update(_domain_fields("source", experience.source))
        entry.update(_domain_fields("target", experience.target))
        entries.append(entry)
    write_manifest(path, {
        "format": "l2t-store",
        "version": FORMAT_VERSION,
        "exponents": list(store.exponents),
        "counts": {"experiences": store.count, "extractors": store.extractor_count},
        "experiences": entries,
    })


def load_store(path):
    manifest = read_manifest(path, "l2t-store")
    experiences = []
    for entry in manifest["experiences"]:
        directory = os.path.join(path, manifest.entry(entry, "id"))
        source = _read_domain(directory, "source", manifest.entry(entry, "source_name"),
                              manifest.entry(entry, "source_labels"))
        target = _read_domain(directory, "target", manifest.entry(entry, "target_name"),
                              manifest.entry(entry, "target_labels"))
        try:
            experiences.append(pipeline.Experience(
                source=source,
                target=target,
                extractor=manifest.entry(entry, "extractor"),
                w=read_matrix(_matrix_path(directory, "w")),
                n_labeled=manifest.entry(entry, "n_labeled"),
                ratio=manifest.entry(entry, "ratio"),
                seed=manifest.entry(entry, "seed"),
                floored=manifest.entry(entry, "floored"),
            ))
        except ValueError as error:
            if isinstance(error, StoreFormatError):
                raise
            raise StoreFormatError(directory, "experience", str(error))
    counts = manifest["counts"]
    if manifest.entry(counts, "experiences") != len(experiences):
        raise StoreFormatError(manifest.path, "counts", _("experience count does not match the entries"))
    return pipeline.ExperienceStore(experiences, tuple(manifest["exponents"]))


def save_features(features, path, r=stats.DEFAULT_NEIGHBORS, correction=None):
    """
    Write a feature set: per experience fNNNNN/{mmd, variance, discriminant}
    """
    correction = correction or reflection.CorrectionConfig()
    exponents = features[0].bank.exponents if features else kernels.DEFAULT_EXPONENTS
    entries = []
    for index, feats in enumerate(features):
        name = "f{0:05d}".format(index)
        directory = os.path.join(path, name)
        os.makedirs(directory, exist_ok=True)
        write_matrix(_matrix_path(directory, "mmd"), feats.mmd.reshape(1, -1))
        write_matrix(_matrix_path(directory, "variance"), feats.variance)
        write_matrix(_matrix_path(directory, "discriminant"), feats.discriminant.reshape(1, -1))
        entries.append({
            "id": name,
            "eta": feats.bank.eta,
            "ratio": feats.ratio,
            "n_labeled": feats.n_labeled,
            "inverse_ratio_target": feats.inverse_ratio_target,
        })
    write_manifest(path, {
        "format": "l2t-features",
        "version": FORMAT_VERSION,
        "exponents": list(exponents),
        "r": int(r),
        "correction": {"enabled": bool(correction.enabled), "p": int(correction.p), "q": int(correction.q),
                       "b_corr": float(correction.b_corr)},
        "features": entries,
    })


def load_features(path):
    """
    Read a feature set

    Returns:
        tuple: (list of ExperienceFeatures, CorrectionConfig)
    """
    manifest = read_manifest(path, "l2t-features")
    exponents = tuple(manifest["exponents"])
    features = []
    for entry in manifest["features"]:
        directory = os.path.join(path, manifest.entry(entry, "id"))
        try:
            features.append(stats.ExperienceFeatures(
                mmd=read_matrix(_matrix_path(directory, "mmd")),
                variance=read_matrix(_matrix_path(directory, "variance")),
                discriminant=read_matrix(_matrix_path(directory, "discriminant")),
                inverse_ratio_target=manifest.entry(entry, "inverse_ratio_target"),
                bank=kernels.KernelBank(manifest.entry(entry, "eta"), exponents),
                ratio=manifest.entry(entry, "ratio"),
                n_labeled=manifest.entry(entry, "n_labeled"),
            ))
        except ValueError as error:
            if isinstance(error, StoreFormatError):
                raise
            raise StoreFormatError(directory, "features", str(error))
    correction = manifest["correction"]
    try:
        config = reflection.CorrectionConfig(
            p=manifest.entry(correction, "p"),
            q=manifest.entry(correction, "q"),
            b_corr=manifest.entry(correction, "b_corr"),
            enabled=manifest.entry(correction, "enabled"),
        )
    except ValueError as error:
        if isinstance(error, StoreFormatError):
            raise
        raise StoreFormatError(manifest.path, "correction", str(error))
    return features, config


def save_model(model, path):
    os.makedirs(path, exist_ok=True)
    write_matrix(_matrix_path(path, "beta"), model.beta.reshape(1, -1))
    write_manifest(path, {
        "format": "l2t-model",
        "version": FORMAT_VERSION,
        "lambda": model.lam,
        "mu": model.mu,
        "bias": model.bias,
        "b_corr": model.b_corr,
        "kernel_count": model.kernel_count,
        "exponents": list(model.exponents),
        "components": list(model.components),
    })


def load_model(path):
    manifest = read_manifest(path, "l2t-model")
    beta_path = _matrix_path(path, "beta")
    beta = read_matrix(beta_path)
    if beta.shape != (1, manifest["kernel_count"]):
        raise StoreFormatError(beta_path, "dims", _("expected 1x{0}, got {1}x{2}").format(
            manifest["kernel_count"], *beta.shape))
    try:
        return reflection.ReflectionModel(
            beta=beta[0],
            lam=manifest["lambda"],
            mu=manifest["mu"],
            bias=manifest["bias"],
            bank=kernels.KernelBank(1.0, tuple(manifest["exponents"])),
            components=tuple(manifest["components"]),
            b_corr=manifest["b_corr"],
        )
    except ValueError as error:
        if isinstance(error, StoreFormatError):
            raise
        raise StoreFormatError(manifest.path, "model", str(error))


def save_pair(source, target, path):
    os.makedirs(path, exist_ok=True)
    _write_domain(path, "source", source)
    _write_domain(path, "target", target)
    content = {"format": "l2t-pair", "version": FORMAT_VERSION}
    content.update(_domain_fields("source", source))
    content.update(_domain_fields("target", target))
    write_manifest(path, content)


def load_pair(path):
    manifest = read_manifest(path, "l2t-pair")
    source = _read_domain(path, "source", manifest["source_name"], manifest["source_labels"])
    target = _read_domain(path, "target", manifest["target_name"], manifest["target_labels"])
    if source.m != target.m:
        raise StoreFormatError(path, "dims", _("source has {0} features, target {1}").format(source.m, target.m))
    return source, target


def save_pairs(pairs, path):
    names = []
    for index, (source, target) in enumerate(pairs):
        name = "p{0:05d}".format(index)
        save_pair(source, target, os.path.join(path, name))
        names.append(name)
    write_manifest(path, {"format": "l2t-pairs", "version": FORMAT_VERSION, "pairs": names})


def load_pairs(path):
    manifest = read_manifest(path, "l2t-pairs")
    return [load_pair(os.path.join(path, name)) for name in manifest["pairs"]]


def write_report(report, path):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
