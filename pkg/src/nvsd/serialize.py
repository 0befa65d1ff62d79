"""JSON persistence for fitted models.

The document stores everything prediction needs: kernel hyperparameters,
normalization constants, training inputs and coefficients. Floats go
through Python's shortest-round-trip repr, so a saved and reloaded model
reproduces predictions bit for bit. Variable indices (support, groups,
selected features) are 1-based in the file, matching all other
user-facing formats.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .estimators import KRLSRegressor, NVSDRegressor
from .kernels import KernelSpec
from .prox import ElasticNet, GroupLasso, GroupStructure, Lasso

FORMAT_NAME = "nvsd-model"
FORMAT_VERSION = 1


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file and rename, so readers never see a torn file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _kernel_to_dict(spec: KernelSpec) -> dict:
    return {
        "family": spec.family,
        "degree": int(spec.degree),
        "offset": float(spec.offset),
        "width": float(spec.width),
    }


def _kernel_from_dict(data: dict) -> KernelSpec:
    return KernelSpec(
        family=data["family"],
        degree=int(data["degree"]),
        offset=float(data["offset"]),
        width=float(data["width"]),
    )


def model_to_dict(model) -> dict:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "normalize": bool(model.normalize),
        "x_offset": model.x_offset_.tolist(),
        "x_scale": model.x_scale_.tolist(),
        "y_offset": float(model.y_offset_),
        "n_features": int(model.n_features_in_),
    }
    if isinstance(model, NVSDRegressor):
        reg = model.regularizer_
        if isinstance(reg, Lasso):
            reg_doc = {"kind": "lasso"}
        elif isinstance(reg, GroupLasso):
            reg_doc = {
                "kind": "group_lasso",
                "groups": [[a + 1 for a in g] for g in reg.groups.groups],
            }
        elif isinstance(reg, ElasticNet):
            reg_doc = {"kind": "elastic_net", "mu": float(reg.mu)}
        else:
            raise TypeError(f"cannot serialize regularizer {reg!r}")
        doc.update(
            {
                "type": "nvsd",
                "kernel": _kernel_to_dict(model.kernel_spec_),
                "x_train": model.X_fit_.tolist(),
                "alpha": model.alpha_.tolist(),
                "beta": model.beta_.tolist(),
                "support": [int(a) + 1 for a in model.support_],
                "derivative_norms": model.derivative_norms_.tolist(),
                "regularizer": reg_doc,
                "tau": float(model.tau),
                "nu": float(model.nu),
            }
        )
        return doc
    if isinstance(model, KRLSRegressor):
        doc.update(
            {
                "type": "krls",
                "nu": float(model.nu),
                "feature_indices": [int(a) + 1 for a in model.feature_indices_],
                "support": [int(a) + 1 for a in model.support_],
            }
        )
        if model.feature_indices_.size == 0:
            doc["constant"] = float(model.constant_)
        else:
            doc.update(
                {
                    "kernel": _kernel_to_dict(model.kernel_spec_),
                    "x_train": model.X_fit_.tolist(),
                    "alpha": model.alpha_.tolist(),
                }
            )
        return doc
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT_NAME:
        raise ValueError("not a model document")
    kind = doc.get("type")
    n_features = int(doc["n_features"])
    if kind == "nvsd":
        reg_doc = doc["regularizer"]
        if reg_doc["kind"] == "lasso":
            reg = Lasso()
            groups_param = None
        elif reg_doc["kind"] == "group_lasso":
            groups0 = [[a - 1 for a in g] for g in reg_doc["groups"]]
            reg = GroupLasso(GroupStructure.from_lists(groups0, n_features))
            groups_param = groups0
        elif reg_doc["kind"] == "elastic_net":
            reg = ElasticNet(float(reg_doc["mu"]))
            groups_param = None
        else:
            raise ValueError(f"unknown regularizer kind {reg_doc['kind']!r}")
        spec = _kernel_from_dict(doc["kernel"])
        model = NVSDRegressor(
            kernel=spec.family,
            width=spec.width,
            degree=spec.degree,
            offset=spec.offset,
            regularizer=reg_doc["kind"],
            groups=groups_param,
            mu=reg_doc.get("mu", 0.5),
            tau=float(doc["tau"]),
            nu=float(doc["nu"]),
            normalize=bool(doc["normalize"]),
        )
        model.n_features_in_ = n_features
        model.X_fit_ = np.asarray(doc["x_train"], dtype=float).reshape(-1, n_features)
        model.kernel_spec_ = spec
        model.width_ = spec.width if spec.family == "gaussian" else None
        model.regularizer_ = reg
        model.x_offset_ = np.asarray(doc["x_offset"], dtype=float)
        model.x_scale_ = np.asarray(doc["x_scale"], dtype=float)
        model.y_offset_ = float(doc["y_offset"])
        model.alpha_ = np.asarray(doc["alpha"], dtype=float)
        model.beta_ = np.asarray(doc["beta"], dtype=float)
        model.support_ = np.asarray([a - 1 for a in doc["support"]], dtype=int)
        model.derivative_norms_ = np.asarray(doc["derivative_norms"], dtype=float)
        return model
    if kind == "krls":
        idx = np.asarray([a - 1 for a in doc["feature_indices"]], dtype=int)
        model = KRLSRegressor(nu=float(doc["nu"]), normalize=bool(doc["normalize"]))
        model.n_features_in_ = n_features
        model.feature_indices_ = idx
        model.support_ = idx.copy()
        model.x_offset_ = np.asarray(doc["x_offset"], dtype=float)
        model.x_scale_ = np.asarray(doc["x_scale"], dtype=float)
        model.y_offset_ = float(doc["y_offset"])
        if idx.size == 0:
            model.constant_ = float(doc["constant"])
            model.alpha_ = np.zeros(0)
            model.X_fit_ = np.zeros((0, 0))
            model.kernel_spec_ = None
            return model
        spec = _kernel_from_dict(doc["kernel"])
        model.kernel_spec_ = spec
        model.kernel = spec.family
        model.width = spec.width
        model.degree = spec.degree
        model.offset = spec.offset
        model.constant_ = None
        model.X_fit_ = np.asarray(doc["x_train"], dtype=float).reshape(-1, idx.size)
        model.alpha_ = np.asarray(doc["alpha"], dtype=float)
        return model
    raise ValueError(f"unknown model type {kind!r}")


def save_model(model, path: str) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model)))


def load_model(path: str):
    with open(path) as handle:
        return model_from_dict(json.load(handle))
