import numpy as np
import pytest

from qloss.loss_model import (
    DesignKind,
    LossModel,
    compose_lossy,
    dilate,
    eta_from_db,
    gamma_for,
    gamma_rectangular,
    gamma_triangular,
    triangular_port_amps,
)
from qloss.numerics import haar_unitary, is_unitary


def test_rectangular_gamma_is_uniform():
    g = gamma_rectangular(5, 0.9).gamma
    assert np.allclose(g, 0.9 ** 2.5)


def test_triangular_gamma_formula():
    m, eta = 6, 0.8
    g = gamma_triangular(m, eta).gamma
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            ii, jj = max(i, 2), max(j, 2)
            assert g[i - 1, j - 1] == pytest.approx(eta ** ((1 + 2 * m - ii - jj) / 2))
    # last row/column pair is the least lossy
    assert g[-1, -1] == pytest.approx(np.sqrt(eta))
    assert g[0, 0] == g[1, 1]


def test_triangular_is_separable():
    lm = gamma_triangular(7, 0.7)
    a = triangular_port_amps(7, 0.7)
    assert lm.is_separable
    assert np.allclose(np.outer(a, a), lm.gamma)


def test_design_parse():
    assert DesignKind.parse("clements") is DesignKind.RECTANGULAR
    assert DesignKind.parse("Reck") is DesignKind.TRIANGULAR
    with pytest.raises(ValueError):
        DesignKind.parse("hex")


def test_eta_from_db():
    assert eta_from_db(0) == 1
    assert eta_from_db(10) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        eta_from_db(-1)


def test_compose_and_dilate():
    u = haar_unitary(4, 3)
    tr = compose_lossy(u, gamma_for("tri", 4, 0.6))
    big = dilate(tr)
    assert big.shape == (12, 12)
    assert is_unitary(big, 1e-12)
    assert np.allclose(big[:4, :4], tr.t)


def test_custom_gamma_checks():
    with pytest.raises(ValueError):
        LossModel.custom([[1.2, 0], [0, 1]])
    lm = LossModel.custom([[1.0, 0.5], [0.2, 1.0]])
    assert not lm.is_separable
    tr = compose_lossy(np.eye(2), lm)
    with pytest.raises(ValueError):
        dilate(tr)


def test_compose_rejects_nonunitary():
    with pytest.raises(ValueError):
        compose_lossy(np.ones((3, 3)), gamma_for("rect", 3, 0.9))


@pytest.mark.parametrize("eta", [1.2, -0.1])
def test_eta_range(eta):
    with pytest.raises(ValueError):
        gamma_for("rect", 3, eta)
