"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""
import numpy as np
from scipy import integrate


def mp_stieltjes(z, c):
    """Herglotz root of ``c z s^2 + (z + c - 1) s + 1 = 0``."""
    z = complex(z)
    roots = np.roots([c * z, z + c - 1, 1.0])
    return complex(max(roots, key=lambda r: r.imag))


def mp_edges(c):
    return (1 - np.sqrt(c)) ** 2, (1 + np.sqrt(c)) ** 2


def mp_density(x, c):
    a, b = mp_edges(c)
    x = np.asarray(x, dtype=float)
    inside = (x > a) & (x < b)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((b - xi) * (xi - a)) / (2 * np.pi * c * xi)
    return out


def mp_cdf(x, c):
    """Continuous MP CDF by adaptive quadrature (plus the atom at 0 when c > 1)."""
    a, b = mp_edges(c)
    atom = max(0.0, 1 - 1 / c)
    out = []
    for xi in np.atleast_1d(x):
        if xi < 0:
            out.append(0.0)
            continue
        hi = min(max(xi, a), b)
        val = integrate.quad(lambda t: mp_density(np.array([t]), c)[0], a, hi, limit=200)[0] if hi > a else 0.0
        out.append(atom + val)
    return np.array(out)


def ma1_h(lam, nu):
    return 1 + 2 * np.cos(nu) * lam + lam ** 2


def brute_autocov(x, tau):
    """``(1/2n) sum_t (X_t X_{t+tau}^* + X_{t+tau} X_t^*)`` term by term."""
    p, n = x.shape
    out = np.zeros((p, p), dtype=complex)
    for t in range(n - tau):
        a, b = x[:, t], x[:, t + tau]
        out += np.outer(a, b.conj()) + np.outer(b, a.conj())
    return out / (2 * n)


def kernel_fixed_point(h, weights, w, c, z, iters=20000, damping=0.5, tol=1e-12):
    """Plain damped iteration of the discretized kernel equation at one ``z``.

    ``h`` has shape (atoms, N) on an equally weighted grid.  Starts from
    ``i m / Im z``, which is the large-height asymptote.
    """
    m = weights @ h
    k = 1j * m / z.imag
    for _ in range(iters):
        u = np.array([np.mean(w * ha / (1 + c * w * k)) for ha in h])
        new = sum(pa * ha / (ua - z) for pa, ha, ua in zip(weights, h, u))
        if np.max(np.abs(new - k)) < tol:
            k = new
            break
        k = (1 - damping) * k + damping * new
    u = np.array([np.mean(w * ha / (1 + c * w * k)) for ha in h])
    s = sum(pa / (ua - z) for pa, ua in zip(weights, u))
    return k, s


def kernel_by_descent(h, weights, w, c, z, v_top=20.0, factor=0.8):
    """Fixed-point oracle tracked from ``Im z = v_top`` down to ``Im z``."""
    v = v_top
    k = None
    while True:
        zz = complex(z.real, max(v, z.imag))
        if k is None:
            k, s = kernel_fixed_point(h, weights, w, c, zz)
        else:
            k, s = _iterate_from(h, weights, w, c, zz, k)
        if v <= z.imag:
            return k, s
        v *= factor


def _iterate_from(h, weights, w, c, z, k, iters=20000, damping=0.5, tol=1e-12):
    for _ in range(iters):
        u = np.array([np.mean(w * ha / (1 + c * w * k)) for ha in h])
        new = sum(pa * ha / (ua - z) for pa, ha, ua in zip(weights, h, u))
        if np.max(np.abs(new - k)) < tol:
            k = new
            break
        k = (1 - damping) * k + damping * new
    u = np.array([np.mean(w * ha / (1 + c * w * k)) for ha in h])
    return k, sum(pa / (ua - z) for pa, ua in zip(weights, u))
