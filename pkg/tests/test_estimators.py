import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from activepoly import phantom
from activepoly.errors import ValidationError
from activepoly.estimators import (FEATURE_NAMES, ActivePolynomialTransformer, MIDetector,
                                   RidgePolynomialRegressor)


def test_regressor_params_and_clone():
    est = RidgePolynomialRegressor(order=3, lam=0.5, method="svd")
    assert est.get_params() == {"order": 3, "lam": 0.5, "method": "svd"}
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est


@pytest.mark.parametrize("method", ["normal", "svd"])
def test_regressor_fits_quartic(method):
    x = np.linspace(-1, 1, 30)
    y = 1 - 2 * x + 0.5 * x ** 4
    est = RidgePolynomialRegressor(lam=0.0, method=method).fit(x[:, None], y)
    np.testing.assert_allclose(est.coef_, [1, -2, 0, 0, 0.5], atol=1e-9)
    np.testing.assert_allclose(est.predict(x[:, None]), y, atol=1e-9)
    assert est.score(x[:, None], y) == pytest.approx(1.0)


def test_regressor_rejects_bad_input():
    with pytest.raises(ValidationError):
        RidgePolynomialRegressor().fit(np.ones((5, 2)), np.ones(5))
    with pytest.raises(ValidationError):
        RidgePolynomialRegressor(method="qr").fit(np.ones((5, 1)), np.ones(5))


def rows():
    X = np.array([
        [0.40, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3],
        [0.35, 0.3, 0.1, 0.3, 0.3, 0.3, 0.3],
        [0.60, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.10, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9],
        [0.30, 0.3, np.nan, 0.3, 0.3, 0.3, 0.3],
    ])
    y = np.array(["normal", "MI", "normal", "MI", "normal"], dtype=object)
    return X, y


def test_detector_gates_and_threshold():
    X, y = rows()
    det = MIDetector().fit(X, y)
    assert list(det.classes_) == ["MI", "normal"] and det.threshold_ == 0.19
    assert list(det.predict(X)) == list(y)
    seg = det.predict_segments(X)
    assert seg.shape == (5, 6) and seg[1].tolist() == [False, True, False, False, False, False]
    assert seg[3].all() and not seg[2].any()
    assert det.score(X, y) == 1.0


def test_detector_auto_threshold():
    X, y = rows()
    X[0, 1] = 0.22  # a normal echo just above the default threshold
    y = y.copy()
    y[0] = "MI"
    det = MIDetector(threshold="auto").fit(X, y)
    assert det.threshold_ > 0.22
    assert det.score(X, y) == 1.0


def test_detector_validation():
    X, y = rows()
    with pytest.raises(ValidationError):
        MIDetector().fit(X[:, :3], y)
    with pytest.raises(ValidationError):
        MIDetector().fit(X, np.array(["x"] * 5))
    with pytest.raises(ValidationError):
        MIDetector(threshold=1.5).fit(X, y)
    with pytest.raises(ValidationError):
        MIDetector(lvef_low=0.6).fit(X, y)
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        MIDetector().predict(X)


def test_transformer_pipeline_on_phantoms():
    seqs = [phantom.generate_phantom(phantom.PhantomConfig(
        frames=4, contraction_amplitude=0.4, per_segment_motion_scale=s))[0]
        for s in ((1, 1, 1, 1, 1, 1), (0, 1, 1, 1, 1, 1))]
    tr = ActivePolynomialTransformer(config={"smooth_sigma": 1.0})
    feats = tr.fit_transform(seqs)
    assert feats.shape == (2, len(FEATURE_NAMES))
    assert list(tr.get_feature_names_out()) == list(FEATURE_NAMES)
    assert feats[1, 1] < 0.19 < feats[0, 1]
    model = make_pipeline(ActivePolynomialTransformer(), MIDetector())
    model.fit(seqs, ["normal", "MI"])
    assert list(model.predict(seqs)) == ["normal", "MI"]
    with pytest.raises(ValidationError):
        tr.transform([np.zeros((3, 3))])
