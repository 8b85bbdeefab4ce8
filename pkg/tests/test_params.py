import math

import pytest

from toadwave.params import ModelParams, max_workers


def test_defaults_and_kpp_speed():
    p = ModelParams()
    assert p.as_dict() == {"alpha": 1.0, "r": 1.0, "theta_min": 1.0, "theta_max": 2.0}
    assert ModelParams(r=2.0, theta_min=3.0, theta_max=4.0).kpp_speed == pytest.approx(2 * math.sqrt(6.0))


@pytest.mark.parametrize("kw", [{"alpha": 0.0}, {"r": -1.0}, {"theta_min": 0.0}, {"theta_max": 1.0}])
def test_invalid_parameters(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("TOADWAVE_THREADS", "3")
    assert max_workers() == 3
    monkeypatch.setenv("TOADWAVE_THREADS", "junk")
    assert max_workers() == 1
