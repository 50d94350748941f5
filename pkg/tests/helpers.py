"""Shared fixtures-as-functions for the test modules."""

from math import pi

import numpy as np


def smooth_random(model, rng, modes=6, normalize=True):
    """Random trigonometric polynomial on the model grid."""
    t = model.t
    w = 2 * pi / model.L
    p = np.zeros(model.m)
    for j in range(modes + 1):
        a, b = rng.normal(size=2)
        p += a * np.cos(j * w * t) + b * np.sin(j * w * t)
    return p / np.abs(p).max() if normalize else p


def fd_directional(fun, u, psi, eps=1e-6):
    return (fun(u + eps * psi) - fun(u - eps * psi)) / (2 * eps)
