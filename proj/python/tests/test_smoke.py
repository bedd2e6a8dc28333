import math
import os

import pytest

import infmix
from infmix import _infmix

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def test_two_point_renewal():
    u = infmix.renewal_sequence([0.5, 0.5], 100)
    assert u[:4] == pytest.approx([1.0, 0.5, 0.75, 0.625], abs=1e-15)
    assert abs(u[100] - 2 / 3) <= 1e-6


def test_a_seq_half():
    # a_n = pi sqrt(n) for P(phi > n) = n^-1/2
    a = infmix.a_seq(0.5, 1.0, 100)
    assert a[100] == pytest.approx(10 * math.pi, rel=1e-12)


def test_lsv_return_time():
    assert infmix.lsv_return_time(1.0, 0.8) == 1
    assert infmix.lsv_return_time(1.0, 0.7) == 2


def test_operator_matches_renewal():
    p = [0.2, 0.3, 0.1, 0.4]
    T = infmix.synthetic_T_mean(p, 4, 50)
    u = infmix.renewal_sequence(p, 50)
    assert T == pytest.approx(u, abs=1e-12)


def test_lsv_correlation_decreasing():
    s = infmix.correlation_operator(1.25, 16, 2000, [100, 1000])
    dev = [abs(x - s["target"]) for x in s["normalized"]]
    assert dev[1] < dev[0]


def test_fit_rate_exact_power():
    n = [int(round(100 * 10 ** (k / 5))) for k in range(11)]
    norm = [1 + 2 * m ** -0.3 for m in n]
    r = infmix.fit_rate(n, norm, 1.0, 0.75)
    assert r["tau"] == pytest.approx(0.3, abs=1e-6)


def test_toml_and_errors():
    assert infmix.parse_toml("[a]\nx = 1_000\n") == {"a": {"x": 1000}}
    with pytest.raises(_infmix.ConfigError):
        infmix.parse_toml("x = \n")


def test_run_and_verify(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(
        "[system]\nkind = \"synthetic\"\nbeta = 0.75\nN = 2000\n"
        "[tails]\nsamples = 20000\n[tower]\nh_max = 2000\nbins = 4\ndiag_h_max = 100\n"
        "[operators]\nN = 2000\nfamily_random = 2\n[mixing]\nn_min = 10\nn_max = 1000\n"
    )
    m = infmix.run(str(cfg), str(tmp_path / "out"))
    assert len(m["artifacts"]) > 0
    assert infmix.verify(str(tmp_path / "out")) == []
