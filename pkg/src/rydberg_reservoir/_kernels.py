"""Compiled inner loops for the scalar mean-field ODE/SDE."""

import math

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _f(n, om2, delta, gamma, big_gamma, v):
    det = delta - n * v
    return -om2 * big_gamma * (n - 0.5) / (big_gamma * big_gamma + det * det) - gamma * n


@numba.njit(cache=True)
def rk4_schedule(omegas, delta, gamma, big_gamma, v, dt, steps_per_symbol, stride, n0):
    per_symbol = steps_per_symbol // stride
    out = np.empty(omegas.shape[0] * per_symbol)
    n = n0
    k = 0
    for s in range(omegas.shape[0]):
        om2 = omegas[s] * omegas[s]
        for q in range(steps_per_symbol):
            k1 = _f(n, om2, delta, gamma, big_gamma, v)
            k2 = _f(n + 0.5 * dt * k1, om2, delta, gamma, big_gamma, v)
            k3 = _f(n + 0.5 * dt * k2, om2, delta, gamma, big_gamma, v)
            k4 = _f(n + dt * k3, om2, delta, gamma, big_gamma, v)
            n = n + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if (q + 1) % stride == 0:
                out[k] = n
                k += 1
    return out, n


@numba.njit(cache=True)
def em_schedule(omegas, delta, gamma, big_gamma, v, d, dt, steps_per_symbol, stride, n0, z):
    per_symbol = steps_per_symbol // stride
    out = np.empty(omegas.shape[0] * per_symbol)
    n = n0
    k = 0
    j = 0
    for s in range(omegas.shape[0]):
        om2 = omegas[s] * omegas[s]
        for q in range(steps_per_symbol):
            drift = _f(n, om2, delta, gamma, big_gamma, v)
            n = n + drift * dt + math.sqrt(max(n, 0.0) * d * dt) * z[j]
            j += 1
            if n < 0.0 or n > 1.0:
                # fold with period 2 so that large kicks reflect off both walls
                n = n - 2.0 * math.floor(0.5 * n)
                if n > 1.0:
                    n = 2.0 - n
            if (q + 1) % stride == 0:
                out[k] = n
                k += 1
    return out, n


@numba.njit(cache=True)
def rk4_until(om2, delta, gamma, big_gamma, v, n, dt, tol, max_steps):
    for step in range(max_steps):
        if abs(_f(n, om2, delta, gamma, big_gamma, v)) < tol:
            return n, step, True
        k1 = _f(n, om2, delta, gamma, big_gamma, v)
        k2 = _f(n + 0.5 * dt * k1, om2, delta, gamma, big_gamma, v)
        k3 = _f(n + 0.5 * dt * k2, om2, delta, gamma, big_gamma, v)
        k4 = _f(n + dt * k3, om2, delta, gamma, big_gamma, v)
        n = n + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return n, max_steps, abs(_f(n, om2, delta, gamma, big_gamma, v)) < tol
