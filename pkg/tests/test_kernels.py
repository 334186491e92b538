"""Backend equivalence: the compiled kernels and the numpy fallback must be
interchangeable bit for bit, and the environment override must select the
fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from npamp import _kernels_py
from npamp import kernels

compiled = pytest.importorskip(
    "npamp._kernels", reason="compiled extension not built")


def grids(seed):
    rng = np.random.default_rng(seed)
    z = np.ascontiguousarray(5.0 * rng.standard_normal(4001))
    params = [(tau, u, b)
              for tau in (0.2, 0.5, 0.8, 0.97)
              for u in (-1.3, 0.0, 0.42)
              for b in (1e-4, 0.3, 1.0, 50.0)]
    return z, params


def test_count_le_identical():
    z, params = grids(31)
    for _, u, _b in params:
        assert compiled.count_le(z, u) == _kernels_py.count_le(z, u)


def test_score_into_bit_identical():
    z, params = grids(32)
    for tau, u, b in params:
        for scale in (1.0, 7.874015748031496):
            a = np.empty_like(z)
            b_out = np.empty_like(z)
            compiled.score_into(z, tau, u, b, scale, a)
            _kernels_py.score_into(z, tau, u, b, scale, b_out)
            assert np.array_equal(a, b_out), (tau, u, b, scale)


def test_prox_into_bit_identical():
    z, params = grids(33)
    for tau, u, b in params:
        a = np.empty_like(z)
        b_out = np.empty_like(z)
        compiled.prox_into(z, tau, u, b, a)
        _kernels_py.prox_into(z, tau, u, b, b_out)
        assert np.array_equal(a, b_out), (tau, u, b)


def test_soft_threshold_into_bit_identical():
    z, _ = grids(34)
    for theta in (0.0, 0.2, 1.7, 30.0):
        a = np.empty_like(z)
        b_out = np.empty_like(z)
        na = compiled.soft_threshold_into(z, theta, a)
        nb = _kernels_py.soft_threshold_into(z, theta, b_out)
        assert na == nb
        assert np.array_equal(a, b_out)


def test_soft_threshold_support_count():
    x = np.array([-2.0, -1.0, 0.0, 0.5, 3.0])
    out = np.empty_like(x)
    assert kernels.soft_threshold_into(x, 1.0, out) == 2
    np.testing.assert_array_equal(out, [-1.0, 0.0, 0.0, 0.0, 2.0])


def test_active_backend_is_compiled():
    # This repo builds the extension; the selector must prefer it.
    assert kernels.BACKEND == "compiled"


def test_env_override_selects_python_backend():
    env = dict(os.environ, NPAMP_PURE_PYTHON="1")
    code = "from npamp import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backends_agree_through_public_api():
    """A full fit must not depend on the backend (end-to-end bit equality)."""
    env = dict(os.environ, NPAMP_PURE_PYTHON="1")
    code = (
        "import numpy as np\n"
        "from tests.conftest import make_sparse_instance\n"
        "from npamp.amp import SolverSettings\n"
        "from npamp.expectile import ExpectileSpec\n"
        "data, _ = make_sparse_instance(50, 100, 3, seed=77)\n"
        "fit = SolverSettings().run(data, ExpectileSpec(0.8, 0.1))\n"
        "print(repr(fit.beta_hat.tobytes().hex()))\n"
        "print(repr(fit.state.b), repr(fit.state.zeta_emp))\n"
    )
    runs = {}
    for name, run_env in (("compiled", os.environ.copy()), ("python", env)):
        out = subprocess.run([sys.executable, "-c", code], env=run_env,
                             capture_output=True, text=True, check=True,
                             cwd=os.path.dirname(os.path.dirname(__file__)))
        runs[name] = out.stdout
    assert runs["compiled"] == runs["python"]
