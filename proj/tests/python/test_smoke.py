"""End-to-end smoke tests for the python bindings."""

import numpy as np
import pytest

import canbnn


@pytest.fixture(scope="module")
def scenario():
    csv = canbnn.generate_csv(preset="flooding", seed=5)
    cfg = canbnn.fit_featurizer(csv, bit_width=6)
    x, y = canbnn.featurize(csv, cfg)
    return csv, cfg, x, y


def test_generate_shape(scenario):
    csv, _, x, y = scenario
    assert csv.startswith("timestamp,can_id,dlc,payload,label")
    assert x.ndim == 2 and x.shape[1] == 73
    assert x.dtype == np.uint8
    assert set(np.unique(x)) <= {0, 1}
    assert x.shape[0] == y.shape[0] > 10000
    assert set(np.unique(y)) == {0, 1}


def test_generate_deterministic():
    a = canbnn.generate_csv(preset="fuzzing", seed=9)
    b = canbnn.generate_csv(preset="fuzzing", seed=9)
    assert a == b
    assert a != canbnn.generate_csv(preset="fuzzing", seed=10)


def test_train_pack_infer(scenario):
    _, _, x, y = scenario
    res = canbnn.train(x, y, mode="binary", hidden=[16, 16], epochs=3, seed=3)
    assert res["best_epoch"] >= 1
    assert len(res["log"]) >= 1
    assert res["log"][0]["epoch"] == 1

    model = canbnn.Model.from_bytes(res["checkpoint"])
    assert model.topology == [73, 16, 16, 1]
    assert model.mode == "binary"

    packed = canbnn.PackedModel.pack(model)
    assert packed.byte_size < 16384

    test_idx = np.asarray(res["test_indices"])
    xt, yt = x[test_idx], y[test_idx]
    ref = model.predict_proba(xt)
    fast = packed.predict_proba(xt)
    assert ref.shape == fast.shape == (len(test_idx), 1)
    np.testing.assert_allclose(fast, ref, rtol=0, atol=1e-12)

    pred = (fast[:, 0] >= 0.5).astype(np.int32)
    metrics = canbnn.evaluate_metrics(pred, yt.astype(np.int32), 2)
    assert metrics["f1"] > 0.9
    assert sum(sum(row) for row in metrics["confusion"]) == len(test_idx)


def test_packed_round_trip(tmp_path, scenario):
    _, _, x, y = scenario
    res = canbnn.train(x[:2000], y[:2000], hidden=[8], epochs=1, seed=1)
    packed = canbnn.PackedModel.pack(canbnn.Model.from_bytes(res["checkpoint"]))
    path = tmp_path / "m.cbnp"
    packed.save(str(path))
    again = canbnn.PackedModel.from_file(str(path))
    assert again.to_bytes() == packed.to_bytes()
    np.testing.assert_array_equal(again.predict_proba(x[:64]), packed.predict_proba(x[:64]))


def test_errors():
    with pytest.raises(ValueError):
        canbnn.generate_csv(preset="rush_hour")
    with pytest.raises(ValueError):
        canbnn.generate_csv()  # neither preset nor config_text
    with pytest.raises(ValueError):
        canbnn.fit_featurizer("timestamp,can_id,dlc,payload,label\n")
