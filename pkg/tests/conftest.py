"""Shared fixtures: criterion reporting and cached trained surrogates.

Trained surrogates are cached in the pytest cache directory keyed by their
full recipe and the training code, so reruns skip training;
``pytest --cache-clear`` forces a retrain.
"""

import hashlib
import inspect
import json

import pytest

from fracdd import neural
from fracdd.channel import make_rng
from fracdd.modelio import load_model, save_model
from fracdd.neural import NormalizationSpec, TrainHistory, generate_dataset, train_pair
from fracdd.presets import get_preset

_CRITERIA = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if call.excinfo is not None:
        ok = False
        if not detail:
            detail = call.excinfo.exconly().splitlines()[0][:160]
    elif call.when == "call":
        ok = True
    else:
        return
    _CRITERIA[number] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}")


@pytest.fixture
def detail(record_property):
    """Record the one-line measurement shown next to a criterion's verdict."""

    def _set(text):
        record_property("detail", text)

    return _set


def _cached_pair(cache, preset_name):
    """Train (or load) the named preset's network pair and its loss histories."""
    preset = get_preset(preset_name)
    recipe = {"preset": preset.name, "M": preset.M, "N": preset.N, "L1": preset.L1, "L2": preset.L2, **vars(preset.train)}
    # Any change to the training code invalidates cached models.
    recipe["code"] = hashlib.sha256(inspect.getsource(neural).encode()).hexdigest()
    key = hashlib.sha256(json.dumps(recipe, sort_keys=True).encode()).hexdigest()[:16]
    root = cache.mkdir("fracdd-models")
    model_path, hist_path = root / f"{preset.name}-{key}.fnn", root / f"{preset.name}-{key}.json"
    if model_path.exists() and hist_path.exists():
        hist = {k: TrainHistory(**v) for k, v in json.loads(hist_path.read_text()).items()}
        return load_model(model_path, expected_cfg=preset.otfs), hist, model_path
    cfg, tc = preset.otfs, preset.train
    X, Y = generate_dataset(cfg, NormalizationSpec.for_config(cfg), tc.num_samples, make_rng(tc.seed, 2))
    pair, hist = train_pair(cfg, (preset.L1, preset.L2), X, Y, tc, make_rng(tc.seed, 3))
    save_model(pair, model_path)
    hist_path.write_text(json.dumps({k: vars(h) for k, h in hist.items()}))
    return pair, hist, model_path


@pytest.fixture(scope="session")
def desk_pair(request):
    return _cached_pair(request.config.cache, "desk")


@pytest.fixture(scope="session")
def desk_wide_pair(request):
    return _cached_pair(request.config.cache, "desk-wide")
