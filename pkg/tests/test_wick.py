import numpy as np
import pytest

from tensorpca.errors import InvalidArgument, SizeError
from tensorpca.experiments import wick_networks
from tensorpca.wick import (TensorNetwork, Vertex, contract, doubled, enumerate_pairings, expected_H2_scalar,
                            expected_value, mc_estimate, pairing_value)


def _norm_net(N, p=2, ensemble="real"):
    other = "G" if ensemble == "real" else "Gbar"
    return TensorNetwork([Vertex("G", p), Vertex(other, p)], [((0, i), (1, i)) for i in range(p)], N, ensemble)


def test_pairing_counts():
    assert len(enumerate_pairings(_norm_net(3))) == 1
    nets = wick_networks(3)
    assert len(enumerate_pairings(nets["ring4"])) == 3
    assert len(enumerate_pairings(nets["tetrahedron"])) == 2
    six = TensorNetwork([Vertex("G", 2)] * 6, [((i, 1), ((i + 1) % 6, 0)) for i in range(6)], 3)
    assert len(enumerate_pairings(six)) == 15


def test_zero_expectation_flags():
    odd = TensorNetwork([Vertex("G", 2)] * 3, [((0, 1), (1, 0)), ((1, 1), (2, 0)), ((2, 1), (0, 0))], 3)
    assert enumerate_pairings(odd).zero_expectation and expected_value(odd) == 0
    imbalanced = TensorNetwork([Vertex("G", 2), Vertex("G", 2)], [((0, 0), (1, 1)), ((0, 1), (1, 0))], 3, "complex")
    assert enumerate_pairings(imbalanced).zero_expectation


def test_pairing_values():
    for N in (3, 5):
        net = _norm_net(N)
        (pr,) = enumerate_pairings(net)
        assert pr.n_loop == 2 and pairing_value(net, pr) == N**2
    for p in (2, 3, 4):
        assert expected_value(_norm_net(3, p, "complex")) == 3**p


def test_monte_carlo_agreement_on_topologies():
    for name, net in wick_networks(3).items():
        mean, err = mc_estimate(net, 100_000, seed=hash(name) % 1000)
        assert abs(mean - expected_value(net)) <= 3 * err, name


def test_trace_of_hermitian_part_squared():
    # E[Tr(((G+G^H)/2)^2)] = 1/4 (E Tr GG + 2 E Tr G G^H + E Tr G^H G^H), complex p=2, N=4
    N = 4
    gg = TensorNetwork([Vertex("G", 2)] * 2, [((0, 1), (1, 0)), ((1, 1), (0, 0))], N, "complex")
    ggh = TensorNetwork([Vertex("G", 2), Vertex("Gbar", 2)], [((0, 1), (1, 1)), ((1, 0), (0, 0))], N, "complex")
    exact = 0.25 * (2 * expected_value(gg) + 2 * expected_value(ggh))
    rng = np.random.default_rng(0)
    vals = []
    for _ in range(100_000 // 1000):
        G = (rng.standard_normal((1000, N, N)) + 1j * rng.standard_normal((1000, N, N))) / np.sqrt(2)
        Hm = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
        vals.append(np.einsum("bij,bji->b", Hm, Hm).real)
    vals = np.concatenate(vals)
    assert abs(vals.mean() - exact) <= 3 * vals.std() / np.sqrt(vals.size)
    assert exact == N**2 / 2


def test_deterministic_network_and_seeds():
    sig = TensorNetwork([Vertex("signal", 2)] * 2, [((0, 0), (1, 1)), ((0, 1), (1, 0))], 3, lam=0.5)
    mean, err = mc_estimate(sig, 10)
    assert err == 0 and np.isclose(mean, 0.5**2 * 3**2)
    net = _norm_net(3)
    assert mc_estimate(net, 1000, 5) == mc_estimate(net, 1000, 5)
    m, e = mc_estimate(net, 10_000, 1)
    assert abs(m - 9) <= 3 * e
    with pytest.raises(InvalidArgument):
        mc_estimate(net, 1)


def test_second_moment_inequality():
    for name, net in wick_networks(3).items():
        if net.n_signal:
            continue
        assert expected_value(doubled(net)) >= float(net.N) ** net.n_edges, name


def test_scaling_homogeneity():
    net = wick_networks(3)["ring4"]
    # G -> sG multiplies a four-vertex network by s^4
    s = 1.7
    rng = np.random.default_rng(3)
    G = rng.standard_normal((20_000, 3, 3))
    base = contract(net, G).real.mean()
    scaled = contract(net, s * G).real.mean()
    assert np.isclose(scaled, s**4 * base, rtol=1e-12)
    assert abs(base - expected_value(net)) < 0.1 * expected_value(net)


def test_symmetrized_norm_value():
    net = wick_networks(3)["symmetrized-norm"]
    # E|sym G|^2 = sum over index tuples of (number of fixing permutations)/p!
    N = 3
    expected = N * (N - 1) * (N - 2) / 6 + 3 * N * (N - 1) * 2 / 6 + N
    assert np.isclose(expected_value(net), expected)


def test_validation_and_caps():
    with pytest.raises(InvalidArgument):
        TensorNetwork([Vertex("G", 2)], [], 3)
    with pytest.raises(InvalidArgument):
        Vertex("H", 2)
    big = TensorNetwork([Vertex("G", 2)] * 14, [((i, 1), ((i + 1) % 14, 0)) for i in range(14)], 2)
    with pytest.raises(SizeError):
        enumerate_pairings(big)


def test_json_roundtrip():
    net = wick_networks(4)["tetrahedron"]
    back = TensorNetwork.from_json(net.to_json())
    assert back.vertices == net.vertices and back.edges == net.edges and back.ensemble == net.ensemble


def test_H2_closed_form_and_exact_value():
    r = expected_H2_scalar(4, 12, 2, "real")
    c = expected_H2_scalar(4, 12, 2, "complex")
    assert r.closed_form == 288 and c.closed_form == 2 * r.closed_form
    assert np.isclose(r.exact, 158.0) and np.isclose(c.exact, 156.0)
    small = expected_H2_scalar(2, 6, 1, "real", trials=400, seed=1)
    assert np.isclose(small.exact, 3.5)
    assert abs(small.mc_mean - small.exact) <= 4 * small.mc_stderr
    with pytest.raises(InvalidArgument):
        expected_H2_scalar(3, 6, 2)
